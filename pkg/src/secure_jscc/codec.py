"""Legitimate neural encoder and decoder.

The encoder maps a [0,1]-normalized image batch through a configurable
conv/GDN/PReLU stack to a power-constrained complex codeword of shape
(batch, k, n_T).  The decoder layer-normalizes the 2k real channel-output
values, reshapes them onto the encoder's pre-flatten grid and mirrors the
stack with transposed convolutions, IGDN and a final sigmoid.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Union

import torch
import torch.nn.functional as F
from torch import nn

from .channel import ChannelSpec, ComplexSignal, apply_channel

DEFAULT_CONV_STACK = ((16, 5, 2), (32, 5, 2), (32, 5, 1), (32, 5, 1), (32, 5, 1))

POWER_NORM_EPS = 1e-12


class CodecError(ValueError):
    """Invalid codec configuration or malformed codec input."""


@dataclasses.dataclass
class ImageBatch:
    """Batch of images as a (batch, H, W, C) tensor with values in [0, 1].

    ``pixel_max`` is the de-normalization constant used only when exporting
    integer pixels; every loss operates in [0, 1] space.
    """

    pixels: torch.Tensor
    pixel_max: float = 255.0

    def __post_init__(self) -> None:
        if self.pixels.dim() != 4:
            raise CodecError(
                f"image batch must be (batch, H, W, C), got {tuple(self.pixels.shape)}"
            )
        values = self.pixels.detach()
        lo, hi = float(values.min()), float(values.max())
        if lo < 0.0 or hi > 1.0:
            raise CodecError(f"pixel values outside [0, 1]: min={lo}, max={hi}")

    @property
    def shape(self) -> tuple:
        return tuple(self.pixels.shape)

    def to_uint8(self):
        """De-normalize to integer pixels; presentation only, not a loss path."""
        arr = (self.pixels.detach() * self.pixel_max).round().clamp(0, self.pixel_max)
        return arr.to(torch.uint8).cpu().numpy()


@dataclasses.dataclass(frozen=True)
class CodecConfig:
    """Architecture and bandwidth contract for one encoder/decoder pair.

    ``conv_stack`` lists (filters, kernel_size, stride) per encoder layer.
    The final entry's filter count is per antenna; the actual head conv emits
    ``filters * n_T`` channels, one group per antenna.  The per-antenna
    flattened output must hold exactly 2k reals, k = round(bandwidth_ratio*n).
    """

    height: int
    width: int
    channels: int
    n_T: int = 4
    bandwidth_ratio: float = 1.0 / 3.0
    conv_stack: tuple = DEFAULT_CONV_STACK
    power: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "conv_stack", tuple(tuple(int(v) for v in layer) for layer in self.conv_stack)
        )
        self.validate()

    @property
    def n(self) -> int:
        """Source bandwidth: number of real pixel values per image."""
        return self.height * self.width * self.channels

    @property
    def k(self) -> int:
        """Channel bandwidth: complex symbols per antenna per image."""
        return round(self.bandwidth_ratio * self.n)

    def latent_grid(self) -> tuple:
        """(per-antenna filters, grid height, grid width) after the encoder."""
        h, w = self.height, self.width
        for _, kernel, stride in self.conv_stack:
            h //= stride
            w //= stride
        return self.conv_stack[-1][0], h, w

    def validate(self) -> None:
        if not self.conv_stack:
            raise CodecError("conv_stack must not be empty")
        if self.n_T < 1:
            raise CodecError(f"n_T must be >= 1, got {self.n_T}")
        if not 0 < self.bandwidth_ratio:
            raise CodecError(f"bandwidth_ratio must be positive, got {self.bandwidth_ratio}")
        if not self.power > 0:
            raise CodecError(f"power must be positive, got {self.power}")
        h, w = self.height, self.width
        for i, (filters, kernel, stride) in enumerate(self.conv_stack):
            if filters < 1 or kernel < 1 or stride < 1:
                raise CodecError(f"conv_stack[{i}] has non-positive entries")
            if kernel % 2 == 0:
                raise CodecError(f"conv_stack[{i}] kernel must be odd, got {kernel}")
            if h % stride or w % stride:
                raise CodecError(
                    f"image size {self.height}x{self.width} incompatible with "
                    f"stride schedule at layer {i} (grid {h}x{w}, stride {stride})"
                )
            h //= stride
            w //= stride
        per_antenna = self.conv_stack[-1][0] * h * w
        if per_antenna != 2 * self.k:
            raise CodecError(
                f"encoder emits {per_antenna} reals per antenna but the bandwidth "
                f"contract requires 2k = {2 * self.k}"
            )

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "width": self.width,
            "channels": self.channels,
            "n_T": self.n_T,
            "bandwidth_ratio": self.bandwidth_ratio,
            "conv_stack": [list(layer) for layer in self.conv_stack],
            "power": self.power,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CodecConfig":
        return cls(
            height=int(d["height"]),
            width=int(d["width"]),
            channels=int(d["channels"]),
            n_T=int(d.get("n_T", 4)),
            bandwidth_ratio=float(d.get("bandwidth_ratio", 1.0 / 3.0)),
            conv_stack=tuple(tuple(layer) for layer in d.get("conv_stack", DEFAULT_CONV_STACK)),
            power=float(d.get("power", 1.0)),
        )


class GDN(nn.Module):
    """Generalized divisive normalization over the channel axis.

    y_i = x_i / sqrt(beta_i + sum_j gamma_ij x_j^2); the inverse form
    multiplies by the same root instead.  beta >= beta_min and gamma >= 0 are
    enforced by square reparameterization.
    """

    def __init__(
        self,
        channels: int,
        inverse: bool = False,
        beta_min: float = 1e-6,
        gamma_init: float = 0.1,
    ):
        super().__init__()
        self.channels = channels
        self.inverse = inverse
        self.beta_min = beta_min
        self._beta_sqrt = nn.Parameter(
            torch.full((channels,), math.sqrt(1.0 - beta_min))
        )
        self._gamma_sqrt = nn.Parameter(
            torch.eye(channels).mul(gamma_init).sqrt()
        )

    def set_identity_(self) -> None:
        """Set beta = 1, gamma = 0, making forward a no-op for sanity checks."""
        with torch.no_grad():
            self._beta_sqrt.fill_(math.sqrt(1.0 - self.beta_min))
            self._gamma_sqrt.zero_()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        beta = self._beta_sqrt.square() + self.beta_min
        gamma = self._gamma_sqrt.square().view(self.channels, self.channels, 1, 1)
        pool = F.conv2d(x.square(), gamma, beta)
        root = pool.sqrt()
        if self.inverse:
            return x * root
        return x / root


def power_normalize(x: ComplexSignal, power: float) -> ComplexSignal:
    """Scale each per-antenna vector to squared norm k*P (differentiable).

    A small epsilon inside the root guards near-zero activations; an exactly
    zero-norm antenna vector is degenerate and raises instead of silently
    breaking the power contract.
    """
    if len(x.shape) != 3:
        raise CodecError(f"expected (batch, k, n_T) signal, got {x.shape}")
    k = x.shape[1]
    norm_sq = x.magnitude_sq().sum(dim=1, keepdim=True)  # (batch, 1, n_T)
    if bool((norm_sq == 0).any()):
        raise CodecError("zero-norm antenna vector cannot be power-normalized")
    scale = math.sqrt(k * power) / torch.sqrt(norm_sq + POWER_NORM_EPS)
    return ComplexSignal(x.real * scale, x.imag * scale)


def _coerce_pixels(u: Union[ImageBatch, torch.Tensor]) -> torch.Tensor:
    return u.pixels if isinstance(u, ImageBatch) else u


class Encoder(nn.Module):
    """Image batch -> power-normalized complex codeword (batch, k, n_T)."""

    def __init__(self, cfg: CodecConfig):
        super().__init__()
        self.cfg = cfg
        blocks = []
        in_ch = cfg.channels
        last = len(cfg.conv_stack) - 1
        for i, (filters, kernel, stride) in enumerate(cfg.conv_stack):
            out_ch = filters * cfg.n_T if i == last else filters
            blocks += [
                nn.Conv2d(in_ch, out_ch, kernel, stride=stride, padding=kernel // 2),
                GDN(out_ch),
                nn.PReLU(),
            ]
            in_ch = out_ch
        self.net = nn.Sequential(*blocks)

    def forward(self, u: Union[ImageBatch, torch.Tensor]) -> ComplexSignal:
        pixels = _coerce_pixels(u)
        cfg = self.cfg
        if pixels.shape[1:] != (cfg.height, cfg.width, cfg.channels):
            raise CodecError(
                f"image shape {tuple(pixels.shape[1:])} does not match config "
                f"{(cfg.height, cfg.width, cfg.channels)}"
            )
        feat = self.net(pixels.permute(0, 3, 1, 2))
        batch = feat.shape[0]
        f_last, gh, gw = cfg.latent_grid()
        # channel index = antenna * f_last + filter: one contiguous group per antenna
        flat = feat.reshape(batch, cfg.n_T, f_last * gh * gw)
        sig = ComplexSignal.from_interleaved(flat)  # (batch, n_T, k)
        sig = ComplexSignal(sig.real.transpose(1, 2), sig.imag.transpose(1, 2))
        return power_normalize(sig, cfg.power)


class Decoder(nn.Module):
    """Noisy channel output (batch, k) -> reconstructed image batch."""

    def __init__(self, cfg: CodecConfig):
        super().__init__()
        self.cfg = cfg
        f_last, gh, gw = cfg.latent_grid()
        self.norm = nn.LayerNorm(2 * cfg.k)
        stack = cfg.conv_stack
        blocks = []
        in_ch = f_last
        for j in range(len(stack) - 1, 0, -1):
            _, kernel, stride = stack[j]
            out_ch = stack[j - 1][0]
            blocks += [
                nn.ConvTranspose2d(
                    in_ch,
                    out_ch,
                    kernel,
                    stride=stride,
                    padding=kernel // 2,
                    output_padding=stride - 1,
                ),
                GDN(out_ch, inverse=True),
                nn.PReLU(),
            ]
            in_ch = out_ch
        _, kernel0, stride0 = stack[0]
        blocks.append(
            nn.ConvTranspose2d(
                in_ch,
                cfg.channels,
                kernel0,
                stride=stride0,
                padding=kernel0 // 2,
                output_padding=stride0 - 1,
            )
        )
        self.net = nn.Sequential(*blocks)

    def forward(self, y: ComplexSignal) -> ImageBatch:
        cfg = self.cfg
        if len(y.shape) != 2 or y.shape[1] != cfg.k:
            raise CodecError(
                f"decoder expects (batch, {cfg.k}) channel output, got {y.shape}"
            )
        f_last, gh, gw = cfg.latent_grid()
        flat = self.norm(y.to_interleaved())
        feat = flat.reshape(flat.shape[0], f_last, gh, gw)
        out = torch.sigmoid(self.net(feat))
        return ImageBatch(out.permute(0, 2, 3, 1))


@dataclasses.dataclass(frozen=True)
class LayerInfo:
    name: str
    output_shape: tuple
    param_count: int


@dataclasses.dataclass(frozen=True)
class ArchitectureSummary:
    encoder_layers: tuple
    decoder_layers: tuple
    encoder_output_reals: int
    encoder_params: int
    decoder_params: int
    k: int
    n: int


def describe(cfg: CodecConfig) -> ArchitectureSummary:
    """Layer-by-layer shapes and parameter counts for logging."""
    cfg.validate()
    encoder = Encoder(cfg)
    decoder = Decoder(cfg)

    def summarize(module: nn.Sequential, in_shape) -> tuple:
        rows = []
        x = torch.zeros(1, *in_shape)
        with torch.no_grad():
            for layer in module:
                x = layer(x)
                rows.append(
                    LayerInfo(
                        name=type(layer).__name__,
                        output_shape=tuple(x.shape[1:]),
                        param_count=sum(p.numel() for p in layer.parameters()),
                    )
                )
        return tuple(rows)

    f_last, gh, gw = cfg.latent_grid()
    enc_rows = summarize(encoder.net, (cfg.channels, cfg.height, cfg.width))
    dec_rows = summarize(decoder.net, (f_last, gh, gw))
    return ArchitectureSummary(
        encoder_layers=enc_rows,
        decoder_layers=dec_rows,
        encoder_output_reals=2 * cfg.k * cfg.n_T,
        encoder_params=sum(p.numel() for p in encoder.parameters()),
        decoder_params=sum(p.numel() for p in decoder.parameters()),
        k=cfg.k,
        n=cfg.n,
    )


def transmit(
    encoder: Encoder,
    decoder: Decoder,
    u: Union[ImageBatch, torch.Tensor],
    spec: ChannelSpec,
    rng,
) -> ImageBatch:
    """Full encode -> channel -> decode pass for one batch."""
    return decoder(apply_channel(encoder(u), spec, rng))

"""Stochastic, differentiable simulation of AWGN and fading wireless channels.

A transmission sends a complex codeword of ``k`` symbols per antenna through
one of three channel families (AWGN, Rayleigh, Nakagami-m).  Fading is block
fading: one coefficient per antenna per batch element, constant across the
``k`` symbols of a transmission.  Fading coefficients and noise are sampled
outside the autograd graph, so gradients propagate only to the channel input.

Randomness comes from ``numpy.random.Generator`` streams supplied by the
caller; identical seed, spec and input give bit-identical output.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np
import torch

FADING_KINDS = ("rayleigh", "nakagami")
CHANNEL_KINDS = ("awgn",) + FADING_KINDS


class ChannelError(ValueError):
    """Invalid channel configuration or malformed channel input."""


def noise_variance_from_snr(snr_db: float, power: float) -> float:
    """Complex noise variance sigma^2 = P / 10^(snr_db/10) at average power P."""
    if not power > 0:
        raise ChannelError(f"average power must be positive, got {power}")
    if not math.isfinite(snr_db):
        raise ChannelError(f"snr_db must be finite, got {snr_db}")
    return power / (10.0 ** (snr_db / 10.0))


@dataclasses.dataclass(frozen=True)
class ChannelSpec:
    """One wireless link: channel family, operating SNR and fading statistics.

    ``fading_std`` is the standard deviation of the complex gain, i.e.
    E[|h|^2] = fading_std^2 for both fading families.  ``shape`` is the
    Nakagami m parameter (ignored elsewhere); ``fading_std`` is ignored for
    AWGN.
    """

    kind: str
    snr_db: float
    fading_std: float = 1.0
    shape: float = 3.0
    power: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in CHANNEL_KINDS:
            raise ChannelError(
                f"unknown channel kind {self.kind!r}; expected one of {CHANNEL_KINDS}"
            )
        if not math.isfinite(self.snr_db):
            raise ChannelError(f"snr_db must be finite, got {self.snr_db}")
        if self.kind in FADING_KINDS and not self.fading_std > 0:
            raise ChannelError(f"fading_std must be positive, got {self.fading_std}")
        if self.kind == "nakagami" and not self.shape > 1:
            raise ChannelError(f"nakagami shape must exceed 1, got {self.shape}")
        if not self.power > 0:
            raise ChannelError(f"power must be positive, got {self.power}")

    @property
    def noise_variance(self) -> float:
        return noise_variance_from_snr(self.snr_db, self.power)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "snr_db": self.snr_db,
            "fading_std": self.fading_std,
            "shape": self.shape,
            "power": self.power,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelSpec":
        return cls(
            kind=d["kind"],
            snr_db=float(d["snr_db"]),
            fading_std=float(d.get("fading_std", 1.0)),
            shape=float(d.get("shape", 3.0)),
            power=float(d.get("power", 1.0)),
        )


@dataclasses.dataclass
class ComplexSignal:
    """Complex tensor stored as a (real, imag) pair of equally shaped tensors.

    Channel inputs are (batch, k, n_T); channel outputs are (batch, k).  The
    interleaved real view places real parts at even indices and imaginary
    parts at odd indices; this pairing convention is shared with the codec so
    checkpoints stay portable.
    """

    real: torch.Tensor
    imag: torch.Tensor

    def __post_init__(self) -> None:
        if self.real.shape != self.imag.shape:
            raise ChannelError(
                f"real/imag shape mismatch: {tuple(self.real.shape)} vs "
                f"{tuple(self.imag.shape)}"
            )

    @property
    def shape(self) -> tuple:
        return tuple(self.real.shape)

    def magnitude_sq(self) -> torch.Tensor:
        return self.real.square() + self.imag.square()

    def to_interleaved(self) -> torch.Tensor:
        """Flatten the last axis into 2x reals: even index real, odd imag."""
        stacked = torch.stack((self.real, self.imag), dim=-1)
        return stacked.reshape(*self.real.shape[:-1], 2 * self.real.shape[-1])

    @classmethod
    def from_interleaved(cls, flat: torch.Tensor) -> "ComplexSignal":
        if flat.shape[-1] % 2 != 0:
            raise ChannelError("interleaved signal needs an even last axis")
        pairs = flat.reshape(*flat.shape[:-1], flat.shape[-1] // 2, 2)
        return cls(real=pairs[..., 0], imag=pairs[..., 1])

    def detach(self) -> "ComplexSignal":
        return ComplexSignal(self.real.detach(), self.imag.detach())


def sample_fading(
    spec: ChannelSpec, count: int, rng: np.random.Generator
) -> ComplexSignal:
    """Draw ``count`` i.i.d. fading coefficients for a fading channel spec.

    Rayleigh: circularly symmetric complex Gaussian with E[|h|^2] = std^2.
    Nakagami: |h|^2 ~ Gamma(shape=m, scale=std^2/m), phase uniform on [0, 2pi).
    """
    if spec.kind not in FADING_KINDS:
        raise ChannelError(f"channel kind {spec.kind!r} has no fading coefficients")
    var = spec.fading_std**2
    if spec.kind == "rayleigh":
        parts = rng.normal(0.0, math.sqrt(var / 2.0), size=(2, count))
        re, im = parts[0], parts[1]
    else:
        gain = rng.gamma(shape=spec.shape, scale=var / spec.shape, size=count)
        phase = rng.uniform(0.0, 2.0 * math.pi, size=count)
        mag = np.sqrt(gain)
        re = mag * np.cos(phase)
        im = mag * np.sin(phase)
    return ComplexSignal(torch.from_numpy(re), torch.from_numpy(im))


def _coerce_fading(
    h: ComplexSignal, batch: int, n_antennas: int, dtype: torch.dtype
) -> ComplexSignal:
    if h.shape != (batch, n_antennas):
        raise ChannelError(
            f"fading coefficients must have shape {(batch, n_antennas)}, got {h.shape}"
        )
    return ComplexSignal(h.real.to(dtype), h.imag.to(dtype))


def apply_channel(
    x: ComplexSignal,
    spec: ChannelSpec,
    rng: Optional[np.random.Generator] = None,
    h: Optional[ComplexSignal] = None,
    noise: Optional[ComplexSignal] = None,
) -> ComplexSignal:
    """Transmit a (batch, k, n_T) codeword, returning the (batch, k) output.

    Antenna outputs superpose: y = sum_i h_i * x_i + nu for fading channels
    (h_i per antenna per batch element, constant over the k symbols) and
    y = sum_i x_i + nu for AWGN, with nu i.i.d. complex Gaussian of variance
    ``spec.noise_variance`` per symbol.  ``h`` and ``noise`` may be injected
    for deterministic tests; when sampled, fading is drawn before noise from
    the same ``rng`` stream.
    """
    if len(x.shape) != 3:
        raise ChannelError(f"channel input must be (batch, k, n_T), got {x.shape}")
    if torch.isnan(x.real).any() or torch.isnan(x.imag).any():
        raise ChannelError("channel input contains NaN")
    batch, k, n_antennas = x.shape
    dtype = x.real.dtype

    if spec.kind in FADING_KINDS:
        if h is None:
            if rng is None:
                raise ChannelError("rng required when fading is not injected")
            h = sample_fading(spec, batch * n_antennas, rng)
            h = ComplexSignal(
                h.real.reshape(batch, n_antennas), h.imag.reshape(batch, n_antennas)
            )
        h = _coerce_fading(h, batch, n_antennas, dtype)
        hr = h.real.unsqueeze(1)  # (batch, 1, n_T)
        hi = h.imag.unsqueeze(1)
        y_re = (hr * x.real - hi * x.imag).sum(dim=2)
        y_im = (hr * x.imag + hi * x.real).sum(dim=2)
    else:
        if h is not None:
            raise ChannelError("AWGN channel does not accept fading coefficients")
        y_re = x.real.sum(dim=2)
        y_im = x.imag.sum(dim=2)

    if noise is None:
        if rng is None:
            raise ChannelError("rng required when noise is not injected")
        sigma = math.sqrt(spec.noise_variance / 2.0)
        parts = rng.normal(0.0, sigma, size=(2, batch, k))
        n_re = torch.from_numpy(parts[0]).to(dtype)
        n_im = torch.from_numpy(parts[1]).to(dtype)
    else:
        if noise.shape != (batch, k):
            raise ChannelError(
                f"injected noise must have shape {(batch, k)}, got {noise.shape}"
            )
        n_re = noise.real.to(dtype)
        n_im = noise.imag.to(dtype)

    return ComplexSignal(y_re + n_re, y_im + n_im)

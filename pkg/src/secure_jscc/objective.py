"""Training losses: mixed distortion, cross-entropy leakage and the minimax objectives.

Distortion mixes per-pixel MSE with a windowed SSIM term, d = MSE + alpha*(1-SSIM).
The legitimate pair minimizes distortion plus a weighted leakage term; its
uniform-target variant drives every adversary posterior toward the uniform
distribution instead of merely away from the truth.  Adversaries minimize plain
cross-entropy against the one-hot secret.
"""

from __future__ import annotations

import dataclasses
from typing import Optional, Sequence, Union

import torch

from .codec import ImageBatch

LOG_EPS = 1e-9

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


class ObjectiveError(ValueError):
    """Mismatched shapes or invalid weights in a loss computation."""


@dataclasses.dataclass(frozen=True)
class LossWeights:
    """Leakage weight(s) w (shared scalar or per-eavesdropper) and SSIM weight alpha."""

    w: Union[float, tuple] = 5.0
    alpha: float = 0.1

    def __post_init__(self) -> None:
        ws = self.w if isinstance(self.w, (tuple, list)) else (self.w,)
        if any(v < 0 for v in ws):
            raise ObjectiveError(f"leakage weights must be nonnegative, got {self.w}")
        if self.alpha < 0:
            raise ObjectiveError(f"alpha must be nonnegative, got {self.alpha}")

    def per_eve(self, m: int) -> tuple:
        """Expand to one weight per eavesdropper."""
        if isinstance(self.w, (tuple, list)):
            if len(self.w) != m:
                raise ObjectiveError(
                    f"{len(self.w)} leakage weights for {m} eavesdroppers"
                )
            return tuple(float(v) for v in self.w)
        return (float(self.w),) * m

    def any_leakage(self) -> bool:
        ws = self.w if isinstance(self.w, (tuple, list)) else (self.w,)
        return any(v > 0 for v in ws)

    def to_dict(self) -> dict:
        w = list(self.w) if isinstance(self.w, (tuple, list)) else self.w
        return {"w": w, "alpha": self.alpha}


def _pixels(u) -> torch.Tensor:
    return u.pixels if isinstance(u, ImageBatch) else u


def mse(u, u_hat) -> torch.Tensor:
    """Per-image mean squared error over all n pixel values."""
    a, b = _pixels(u), _pixels(u_hat)
    if a.shape != b.shape:
        raise ObjectiveError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    return (a - b).square().reshape(a.shape[0], -1).mean(dim=1)


def _gaussian_window(size: int, sigma: float, dtype, device) -> torch.Tensor:
    coords = torch.arange(size, dtype=dtype, device=device) - (size - 1) / 2.0
    g = torch.exp(-coords.square() / (2.0 * sigma**2))
    g = g / g.sum()
    return torch.outer(g, g)


def ssim(
    img1,
    img2,
    window_size: int = SSIM_WINDOW,
    sigma: float = SSIM_SIGMA,
    dynamic_range: float = 1.0,
) -> torch.Tensor:
    """Per-image structural similarity, windowed and averaged over positions and channels.

    Local statistics use a Gaussian window (valid positions only); images
    smaller than the window fall back to a single global window per channel.
    """
    a, b = _pixels(img1), _pixels(img2)
    if a.shape != b.shape:
        raise ObjectiveError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.dim() != 4:
        raise ObjectiveError(f"expected (batch, H, W, C) images, got {tuple(a.shape)}")
    c1 = (SSIM_K1 * dynamic_range) ** 2
    c2 = (SSIM_K2 * dynamic_range) ** 2
    x = a.permute(0, 3, 1, 2)
    y = b.permute(0, 3, 1, 2)
    _, channels, height, width = x.shape

    if height < window_size or width < window_size:
        mu1 = x.mean(dim=(2, 3))
        mu2 = y.mean(dim=(2, 3))
        s11 = x.square().mean(dim=(2, 3)) - mu1.square()
        s22 = y.square().mean(dim=(2, 3)) - mu2.square()
        s12 = (x * y).mean(dim=(2, 3)) - mu1 * mu2
    else:
        win = _gaussian_window(window_size, sigma, x.dtype, x.device)
        win = win.expand(channels, 1, window_size, window_size)
        conv = lambda t: torch.nn.functional.conv2d(t, win, groups=channels)
        mu1 = conv(x)
        mu2 = conv(y)
        s11 = conv(x.square()) - mu1.square()
        s22 = conv(y.square()) - mu2.square()
        s12 = conv(x * y) - mu1 * mu2

    num = (2 * mu1 * mu2 + c1) * (2 * s12 + c2)
    den = (mu1.square() + mu2.square() + c1) * (s11 + s22 + c2)
    return (num / den).reshape(x.shape[0], -1).mean(dim=1)


def distortion(u, u_hat, alpha: float) -> torch.Tensor:
    """Per-image mixed distortion d = MSE + alpha * (1 - SSIM)."""
    d = mse(u, u_hat)
    if alpha != 0:
        d = d + alpha * (1.0 - ssim(u, u_hat))
    return d


def cross_entropy(
    target: torch.Tensor, prediction: torch.Tensor, eps: float = LOG_EPS
) -> torch.Tensor:
    """H(target, prediction) = -sum_l target_l log prediction_l, log-guarded.

    Predictions are clamped from below at ``eps`` inside the log so saturated
    softmax outputs stay finite without biasing interior values.
    """
    if target.shape != prediction.shape:
        raise ObjectiveError(
            f"shape mismatch: {tuple(target.shape)} vs {tuple(prediction.shape)}"
        )
    return -(target * prediction.clamp_min(eps).log()).sum(dim=-1)


def uniform_belief(num_classes: int, dtype=torch.float32, device=None) -> torch.Tensor:
    return torch.full((num_classes,), 1.0 / num_classes, dtype=dtype, device=device)


def one_hot(labels: torch.Tensor, num_classes: int, dtype=torch.float32) -> torch.Tensor:
    if labels.numel() and (labels.min() < 0 or labels.max() >= num_classes):
        raise ObjectiveError(
            f"label out of range [0, {num_classes}): "
            f"{int(labels.min())}..{int(labels.max())}"
        )
    return torch.nn.functional.one_hot(labels.long(), num_classes).to(dtype)


def _leakage_weights(beliefs: Sequence[torch.Tensor], weights: LossWeights) -> tuple:
    m = len(beliefs)
    if m == 0:
        raise ObjectiveError("at least one eavesdropper belief is required")
    return weights.per_eve(m)


def legit_loss(
    u,
    u_hat,
    beliefs: Sequence[torch.Tensor],
    truths: Sequence[torch.Tensor],
    weights: LossWeights,
) -> torch.Tensor:
    """Batch mean of d(u, u_hat) - (1/M) sum_i w_i H(truth_i, belief_i).

    The subtracted-truth form; kept for ablations against the uniform-target
    objective below.
    """
    per_eve = _leakage_weights(beliefs, weights)
    if len(truths) != len(beliefs):
        raise ObjectiveError(
            f"{len(truths)} truth streams for {len(beliefs)} beliefs"
        )
    loss = distortion(u, u_hat, weights.alpha).mean()
    m = len(beliefs)
    for w_i, q_i, t_i in zip(per_eve, beliefs, truths):
        target = one_hot(t_i, q_i.shape[-1], dtype=q_i.dtype)
        loss = loss - (w_i / m) * cross_entropy(target, q_i).mean()
    return loss


def legit_loss_alc(
    u,
    u_hat,
    beliefs: Sequence[torch.Tensor],
    weights: LossWeights,
) -> torch.Tensor:
    """Batch mean of d(u, u_hat) + (1/M) sum_i w_i H(uniform, belief_i).

    The leakage term is minimized exactly when every belief is uniform, so
    the legitimate pair is pushed to make adversary posteriors uninformative.
    """
    per_eve = _leakage_weights(beliefs, weights)
    loss = distortion(u, u_hat, weights.alpha).mean()
    m = len(beliefs)
    for w_i, q_i in zip(per_eve, beliefs):
        target = uniform_belief(q_i.shape[-1], dtype=q_i.dtype, device=q_i.device)
        target = target.expand_as(q_i)
        loss = loss + (w_i / m) * cross_entropy(target, q_i).mean()
    return loss


def adversary_loss(
    beliefs: torch.Tensor,
    truths: torch.Tensor,
    class_weights: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Mean cross-entropy of one eavesdropper's beliefs against its secret.

    ``class_weights`` (per-class, typically inverse-frequency) re-weights the
    per-sample terms; the weighted mean divides by the summed weights so an
    all-ones vector reproduces the unweighted loss.
    """
    target = one_hot(truths, beliefs.shape[-1], dtype=beliefs.dtype)
    ce = cross_entropy(target, beliefs)
    if class_weights is None:
        return ce.mean()
    cw = torch.as_tensor(class_weights, dtype=beliefs.dtype, device=beliefs.device)
    if cw.shape != (beliefs.shape[-1],):
        raise ObjectiveError(
            f"class_weights must have shape ({beliefs.shape[-1]},), got {tuple(cw.shape)}"
        )
    sample_w = cw[truths.long()]
    return (sample_w * ce).sum() / sample_w.sum()

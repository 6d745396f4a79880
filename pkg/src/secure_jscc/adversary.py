"""Eavesdropper classifiers and colluding-ensemble inference.

Each eavesdropper owns an independent two-layer dense network that maps its
wiretapped channel output to a posterior over secret classes.  Colluding
eavesdroppers average their probability vectors; pessimistic scoring counts a
sample as leaked if any single eavesdropper guesses the common secret.
"""

from __future__ import annotations

import dataclasses
from typing import Sequence

import torch
from torch import nn

from .channel import ChannelSpec, ComplexSignal


class AdversaryError(ValueError):
    """Invalid adversary configuration or mismatched belief shapes."""


@dataclasses.dataclass(frozen=True)
class EavesdropperSpec:
    """One eavesdropper: its wiretap link and the secret it targets."""

    id: int
    channel: ChannelSpec
    secret_id: str
    num_classes: int

    def __post_init__(self) -> None:
        if self.id < 1:
            raise AdversaryError(f"eavesdropper id must be >= 1, got {self.id}")
        if self.num_classes < 2:
            raise AdversaryError(
                f"num_classes must be >= 2, got {self.num_classes}"
            )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "channel": self.channel.to_dict(),
            "secret_id": self.secret_id,
            "num_classes": self.num_classes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EavesdropperSpec":
        return cls(
            id=int(d["id"]),
            channel=ChannelSpec.from_dict(d["channel"]),
            secret_id=str(d["secret_id"]),
            num_classes=int(d["num_classes"]),
        )


class AdversaryNet(nn.Module):
    """Posterior estimator: flattened 2k reals -> dense(128)+ReLU -> softmax(L)."""

    def __init__(self, k: int, num_classes: int, hidden: int = 128):
        super().__init__()
        self.k = k
        self.num_classes = num_classes
        self.body = nn.Sequential(
            nn.Linear(2 * k, hidden),
            nn.ReLU(),
            nn.Linear(hidden, num_classes),
        )

    def forward(self, z: ComplexSignal) -> torch.Tensor:
        flat = z.to_interleaved()
        if flat.shape[-1] != 2 * self.k:
            raise AdversaryError(
                f"observation has {flat.shape[-1]} reals, adversary expects {2 * self.k}"
            )
        return torch.softmax(self.body(flat), dim=-1)


def adversary_predict(
    z: ComplexSignal, params: AdversaryNet, num_classes: int
) -> torch.Tensor:
    """Belief rows on the L-simplex for a batch of wiretap observations."""
    if params.num_classes != num_classes:
        raise AdversaryError(
            f"adversary outputs {params.num_classes} classes, caller expects {num_classes}"
        )
    return params(z)


def adversary_guess(belief: torch.Tensor) -> torch.Tensor:
    """Argmax class index per belief row; ties break to the lowest index."""
    return belief.argmax(dim=-1)


def collude_combine(beliefs: Sequence[torch.Tensor]) -> torch.Tensor:
    """Element-wise mean of probability vectors over a common secret, renormalized."""
    if len(beliefs) == 0:
        raise AdversaryError("cannot combine an empty list of beliefs")
    width = beliefs[0].shape[-1]
    for b in beliefs[1:]:
        if b.shape[-1] != width:
            raise AdversaryError(
                f"mixed belief widths: {width} vs {b.shape[-1]}"
            )
    combined = torch.stack(tuple(beliefs), dim=0).mean(dim=0)
    return combined / combined.sum(dim=-1, keepdim=True)


def pessimistic_hit(beliefs: Sequence[torch.Tensor], truth) -> torch.Tensor:
    """True where any individual eavesdropper's argmax equals the truth."""
    if len(beliefs) == 0:
        raise AdversaryError("cannot score an empty list of beliefs")
    if not torch.is_tensor(truth):
        truth = torch.as_tensor(truth)
    hits = torch.stack([adversary_guess(b) == truth for b in beliefs], dim=0)
    return hits.any(dim=0)

"""Evaluation metrics: SSIM/PSNR for the legitimate link, CE leakage and
adversarial accuracy (individual, colluding, pessimistic) plus macro F1.

``evaluate`` transmits every test image ``repeats`` times with independent
channel draws, reusing the shared loss implementations so reported leakage
equals the training-time cross-entropy by construction.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch

from . import objective
from .adversary import (
    AdversaryNet,
    EavesdropperSpec,
    adversary_guess,
    adversary_predict,
    collude_combine,
    pessimistic_hit,
)
from .channel import ChannelSpec, apply_channel
from .codec import Decoder, Encoder
from .data import ImageDataset, iter_batches


class MetricsError(ValueError):
    """Mismatched metric inputs or a malformed metrics CSV."""


def psnr(u, u_hat, pixel_max: float = 255.0) -> torch.Tensor:
    """Per-image PSNR in dB on de-normalized pixels; infinite where MSE is zero."""
    err = objective.mse(u, u_hat) * pixel_max**2
    out = torch.full_like(err, math.inf)
    nonzero = err > 0
    out[nonzero] = 10.0 * torch.log10(pixel_max**2 / err[nonzero])
    return out


def accuracy(guesses, truths) -> float:
    """Fraction of correct guesses."""
    guesses = torch.as_tensor(guesses)
    truths = torch.as_tensor(truths)
    if guesses.shape != truths.shape:
        raise MetricsError(
            f"length mismatch: {tuple(guesses.shape)} vs {tuple(truths.shape)}"
        )
    return float((guesses == truths).double().mean())


def f1_macro(guesses, truths, num_classes: int) -> float:
    """Unweighted mean over classes of per-class F1; empty classes score 0."""
    guesses = np.asarray(guesses)
    truths = np.asarray(truths)
    if guesses.size == 0:
        raise MetricsError("cannot compute F1 of an empty prediction set")
    if guesses.shape != truths.shape:
        raise MetricsError(f"length mismatch: {guesses.shape} vs {truths.shape}")
    scores = np.zeros(num_classes)
    for c in range(num_classes):
        tp = int(np.sum((guesses == c) & (truths == c)))
        fp = int(np.sum((guesses == c) & (truths != c)))
        fn = int(np.sum((guesses != c) & (truths == c)))
        denom = 2 * tp + fp + fn
        scores[c] = (2 * tp / denom) if denom else 0.0
    return float(scores.mean())


@dataclasses.dataclass
class MetricsRecord:
    """One evaluation point; vector fields hold one entry per eavesdropper."""

    tag: str
    seed: int
    checkpoint: str
    scenario: str
    channel_kind: str
    snr_legit_db: float
    snr_eve_db: float
    repeats: int
    ssim_bob: float
    psnr_bob_db: float
    mse_bob: float
    ce_per_eve: tuple
    acc_per_eve: tuple
    acc_colluding: Optional[float] = None
    acc_pessimistic: Optional[float] = None
    f1_macro_per_eve: Optional[tuple] = None

    @property
    def ce_mean(self) -> float:
        return float(np.mean(self.ce_per_eve))

    @property
    def acc_mean(self) -> float:
        return float(np.mean(self.acc_per_eve))


CSV_COLUMNS = (
    "tag",
    "seed",
    "checkpoint",
    "scenario",
    "channel_kind",
    "snr_legit_db",
    "snr_eve_db",
    "repeats",
    "ssim_bob",
    "psnr_bob_db",
    "mse_bob",
    "ce_mean",
    "acc_mean",
    "acc_colluding",
    "acc_pessimistic",
    "ce_per_eve",
    "acc_per_eve",
    "f1_macro_per_eve",
)


def _join(vec) -> str:
    return "" if vec is None else ";".join(repr(float(v)) for v in vec)


def _split(cell: str):
    return None if cell == "" else tuple(float(v) for v in cell.split(";"))


def record_to_row(rec: MetricsRecord) -> dict:
    return {
        "tag": rec.tag,
        "seed": rec.seed,
        "checkpoint": rec.checkpoint,
        "scenario": rec.scenario,
        "channel_kind": rec.channel_kind,
        "snr_legit_db": repr(float(rec.snr_legit_db)),
        "snr_eve_db": repr(float(rec.snr_eve_db)),
        "repeats": rec.repeats,
        "ssim_bob": repr(float(rec.ssim_bob)),
        "psnr_bob_db": repr(float(rec.psnr_bob_db)),
        "mse_bob": repr(float(rec.mse_bob)),
        "ce_mean": repr(rec.ce_mean),
        "acc_mean": repr(rec.acc_mean),
        "acc_colluding": "" if rec.acc_colluding is None else repr(float(rec.acc_colluding)),
        "acc_pessimistic": "" if rec.acc_pessimistic is None else repr(float(rec.acc_pessimistic)),
        "ce_per_eve": _join(rec.ce_per_eve),
        "acc_per_eve": _join(rec.acc_per_eve),
        "f1_macro_per_eve": _join(rec.f1_macro_per_eve),
    }


def append_metrics_csv(path, records: Sequence[MetricsRecord]) -> None:
    path = Path(path)
    new_file = not path.exists()
    with open(path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if new_file:
            writer.writeheader()
        for rec in records:
            writer.writerow(record_to_row(rec))


def read_metrics_csv(path) -> list:
    path = Path(path)
    if not path.is_file():
        raise MetricsError(f"metrics CSV not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CSV_COLUMNS if c not in (reader.fieldnames or ())]
        if missing:
            raise MetricsError(f"metrics CSV missing columns: {', '.join(missing)}")
        rows = []
        for raw in reader:
            row = dict(raw)
            for key in (
                "snr_legit_db",
                "snr_eve_db",
                "ssim_bob",
                "psnr_bob_db",
                "mse_bob",
                "ce_mean",
                "acc_mean",
            ):
                row[key] = float(raw[key])
            for key in ("acc_colluding", "acc_pessimistic"):
                row[key] = None if raw[key] == "" else float(raw[key])
            for key in ("ce_per_eve", "acc_per_eve", "f1_macro_per_eve"):
                row[key] = _split(raw[key])
            row["seed"] = int(raw["seed"])
            row["repeats"] = int(raw["repeats"])
            rows.append(row)
        return rows


def evaluate(
    encoder: Encoder,
    decoder: Decoder,
    eves: Sequence[AdversaryNet],
    roster: Sequence[EavesdropperSpec],
    dataset: ImageDataset,
    legit_spec: ChannelSpec,
    scenario: str = "non_colluding",
    repeats: int = 10,
    seed: int = 0,
    batch_size: int = 128,
    tag: str = "eval",
    checkpoint: str = "",
    record_seed: Optional[int] = None,
) -> MetricsRecord:
    """Average all metrics over the split with ``repeats`` channel draws per image.

    Deterministic under a fixed seed: every stochastic draw comes from one
    seeded stream consumed in a fixed order.  Colluding and pessimistic
    accuracies are reported whenever all eavesdroppers share a secret.
    ``record_seed`` (default: ``seed``) is what lands in the provenance column.
    """
    if len(eves) != len(roster):
        raise MetricsError(f"{len(eves)} adversaries for {len(roster)} roster entries")
    for net, spec in zip(eves, roster):
        if net.num_classes != spec.num_classes:
            raise MetricsError(
                f"eavesdropper {spec.id} expects {spec.num_classes} classes, "
                f"network outputs {net.num_classes}"
            )
    common_secret = len({spec.secret_id for spec in roster}) == 1
    rng = np.random.default_rng(seed)

    n_eves = len(roster)
    ssim_sum = 0.0
    mse_sum = 0.0
    psnr_sum = 0.0
    ce_sums = np.zeros(n_eves)
    hit_sums = np.zeros(n_eves)
    collude_hits = 0.0
    pess_hits = 0.0
    count = 0
    guesses_all = [[] for _ in range(n_eves)]
    truths_all = [[] for _ in range(n_eves)]

    encoder.eval()
    decoder.eval()
    for net in eves:
        net.eval()
    with torch.no_grad():
        for batch, labels in iter_batches(dataset, batch_size):
            x = encoder(batch)
            for _ in range(repeats):
                y = apply_channel(x, legit_spec, rng)
                u_hat = decoder(y)
                ssim_sum += float(objective.ssim(batch, u_hat).sum())
                mse_sum += float(objective.mse(batch, u_hat).sum())
                psnr_sum += float(psnr(batch, u_hat, dataset.pixel_max).sum())
                beliefs = []
                for i, (net, spec) in enumerate(zip(eves, roster)):
                    z = apply_channel(x, spec.channel, rng)
                    q = adversary_predict(z, net, spec.num_classes)
                    truth = labels[spec.secret_id]
                    target = objective.one_hot(truth, spec.num_classes, dtype=q.dtype)
                    ce_sums[i] += float(objective.cross_entropy(target, q).sum())
                    guess = adversary_guess(q)
                    hit_sums[i] += float((guess == truth).sum())
                    beliefs.append(q)
                    guesses_all[i].append(guess.numpy())
                    truths_all[i].append(truth.numpy())
                if common_secret:
                    truth = labels[roster[0].secret_id]
                    combined = adversary_guess(collude_combine(beliefs))
                    collude_hits += float((combined == truth).sum())
                    pess_hits += float(pessimistic_hit(beliefs, truth).sum())
                count += len(batch.pixels)

    return MetricsRecord(
        tag=tag,
        seed=seed if record_seed is None else record_seed,
        checkpoint=checkpoint,
        scenario=scenario,
        channel_kind=legit_spec.kind,
        snr_legit_db=legit_spec.snr_db,
        snr_eve_db=roster[0].channel.snr_db if roster else math.nan,
        repeats=repeats,
        ssim_bob=ssim_sum / count,
        psnr_bob_db=psnr_sum / count,
        mse_bob=mse_sum / count,
        ce_per_eve=tuple(ce_sums / count),
        acc_per_eve=tuple(hit_sums / count),
        acc_colluding=(collude_hits / count) if common_secret else None,
        acc_pessimistic=(pess_hits / count) if common_secret else None,
        f1_macro_per_eve=tuple(
            f1_macro(
                np.concatenate(guesses_all[i]),
                np.concatenate(truths_all[i]),
                roster[i].num_classes,
            )
            for i in range(n_eves)
        ),
    )

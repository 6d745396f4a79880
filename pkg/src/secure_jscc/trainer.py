"""Training protocol: legitimate warm-up, adversarial warm-up with a frozen
encoder, then episode-based minimax training, with deterministic checkpoints.

All stochastic choices (shuffle orders, channel noise, fading) come from
streams derived by hashing (root seed, purpose tag, epoch counter), so a run
is reproducible from its seed alone and a resumed run continues the exact
stream sequence of an uninterrupted one.  Each adversarial epoch reuses the
shuffle order of the legitimate epoch with the same counter value, and each
eavesdropper owns channel streams keyed by its id, which makes per-eve
training order-independent.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch

from . import metrics as metrics_mod
from .adversary import AdversaryNet, EavesdropperSpec, adversary_predict
from .channel import ChannelSpec, apply_channel
from .codec import CodecConfig, Decoder, Encoder
from .data import (
    ImageDataset,
    class_weights,
    iter_batches,
    load_celeba,
    load_cifar10,
    SECRET_MAPPING_PRESETS,
    synthetic_dataset,
)
from .objective import (
    LossWeights,
    adversary_loss,
    distortion,
    legit_loss,
    legit_loss_alc,
)

CHECKPOINT_MAGIC = b"secure-jscc-ckpt/1\n"

log = logging.getLogger("secure_jscc")


class TrainingDiverged(RuntimeError):
    """A training loss became non-finite; aborted with diagnostics."""


class CheckpointError(RuntimeError):
    """Unreadable, version-mismatched or incompatible checkpoint archive."""


def derive_seed(root_seed: int, *tags) -> int:
    """Stable 64-bit stream seed from the root seed and purpose tags."""
    digest = hashlib.sha256(repr((int(root_seed),) + tags).encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _stream(root_seed: int, *tags) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root_seed, *tags))


@dataclasses.dataclass(frozen=True)
class TrainingSchedule:
    """All training hyperparameters; defaults are the full-scale setting."""

    batch_size: int = 128
    n_episodes: int = 200
    n_warmup: int = 50
    n_legit_epochs: int = 5
    n_adv_epochs: int = 5
    lr: float = 1e-4
    snr_legit_train_db: float = 20.0
    snr_eve_train_db: float = 15.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    eval_every: int = 10
    checkpoint_every: int = 10
    eval_repeats: int = 10

    def __post_init__(self) -> None:
        for field in ("batch_size", "n_warmup", "n_legit_epochs", "n_adv_epochs"):
            if getattr(self, field) < 1:
                raise ValueError(f"{field} must be >= 1, got {getattr(self, field)}")
        if self.n_episodes < 0:
            raise ValueError(f"n_episodes must be >= 0, got {self.n_episodes}")
        if not self.lr > 0:
            raise ValueError(f"lr must be positive, got {self.lr}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingSchedule":
        return cls(**d)


@dataclasses.dataclass
class TrainState:
    """Everything training mutates: parameters, optimizer states, counters."""

    codec_cfg: CodecConfig
    legit_spec: ChannelSpec
    roster: tuple
    schedule: TrainingSchedule
    encoder: Encoder
    decoder: Decoder
    eves: list
    opt_codec: torch.optim.Adam
    opt_eves: list
    episode: int = 0
    legit_epochs_done: int = 0
    adv_epochs_done: int = 0
    history: dict = dataclasses.field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.schedule.seed


def init_state(
    codec_cfg: CodecConfig,
    roster: Sequence[EavesdropperSpec],
    schedule: TrainingSchedule,
    legit_spec: ChannelSpec,
) -> TrainState:
    """Build freshly initialized networks and optimizers, seeded for reproducibility.

    Each adversary is initialized under a seed keyed by its roster id, so a
    permuted roster yields the same per-eavesdropper parameters.
    """
    torch.manual_seed(derive_seed(schedule.seed, "init"))
    encoder = Encoder(codec_cfg)
    decoder = Decoder(codec_cfg)
    eves = []
    for spec in roster:
        torch.manual_seed(derive_seed(schedule.seed, "init-eve", spec.id))
        eves.append(AdversaryNet(codec_cfg.k, spec.num_classes))
    opt_codec = torch.optim.Adam(
        list(encoder.parameters()) + list(decoder.parameters()),
        lr=schedule.lr,
        betas=(schedule.adam_beta1, schedule.adam_beta2),
        eps=schedule.adam_eps,
    )
    opt_eves = [
        torch.optim.Adam(
            net.parameters(),
            lr=schedule.lr,
            betas=(schedule.adam_beta1, schedule.adam_beta2),
            eps=schedule.adam_eps,
        )
        for net in eves
    ]
    codec_ids = {id(p) for p in opt_codec.param_groups[0]["params"]}
    for i, opt in enumerate(opt_eves):
        eve_ids = {id(p) for p in opt.param_groups[0]["params"]}
        if codec_ids & eve_ids:
            raise RuntimeError(f"adversary {i} shares parameters with the codec")
    return TrainState(
        codec_cfg=codec_cfg,
        legit_spec=legit_spec,
        roster=tuple(roster),
        schedule=schedule,
        encoder=encoder,
        decoder=decoder,
        eves=eves,
        opt_codec=opt_codec,
        opt_eves=opt_eves,
    )


def _check_finite(loss: torch.Tensor, phase: str, epoch: int, batch: int) -> None:
    if not torch.isfinite(loss):
        raise TrainingDiverged(
            f"non-finite loss {float(loss)} in {phase} (epoch {epoch}, batch {batch})"
        )


def _legit_epoch(
    state: TrainState,
    dataset: ImageDataset,
    weights: LossWeights,
    include_leakage: bool,
    use_alc: bool = True,
) -> list:
    """One epoch of joint encoder/decoder updates; returns per-batch losses.

    With no positive leakage weight the loss reduces to plain distortion and
    no eavesdropper stream is consumed, so a leakage-free minimax phase is
    arithmetically identical to a warm-up epoch at the same counter value.
    """
    schedule = state.schedule
    t = state.legit_epochs_done
    order = _stream(state.seed, "order-legit", t).permutation(len(dataset))
    chan_rng = _stream(state.seed, "chan-legit", t)
    use_leakage = include_leakage and weights.any_leakage()
    eve_rngs = [
        _stream(state.seed, "chan-eve-legit", spec.id, t) for spec in state.roster
    ]
    state.encoder.train()
    state.decoder.train()
    losses = []
    for batch_idx, (batch, labels) in enumerate(
        iter_batches(dataset, schedule.batch_size, order=order)
    ):
        x = state.encoder(batch)
        y = apply_channel(x, state.legit_spec, chan_rng)
        u_hat = state.decoder(y)
        if use_leakage:
            beliefs = []
            for i, spec in enumerate(state.roster):
                z = apply_channel(x, spec.channel, eve_rngs[i])
                beliefs.append(adversary_predict(z, state.eves[i], spec.num_classes))
            if use_alc:
                loss = legit_loss_alc(batch, u_hat, beliefs, weights)
            else:
                truths = [labels[spec.secret_id] for spec in state.roster]
                loss = legit_loss(batch, u_hat, beliefs, truths, weights)
        else:
            loss = distortion(batch, u_hat, weights.alpha).mean()
        _check_finite(loss, "legitimate phase", t, batch_idx)
        state.opt_codec.zero_grad(set_to_none=True)
        loss.backward()
        state.opt_codec.step()
        losses.append(float(loss.detach()))
    state.legit_epochs_done += 1
    return losses


def _adv_epoch(
    state: TrainState,
    dataset: ImageDataset,
    per_eve_class_weights: Optional[Sequence] = None,
) -> list:
    """One epoch of independent per-eavesdropper updates on a frozen encoder."""
    schedule = state.schedule
    t = state.adv_epochs_done
    order = _stream(state.seed, "order-legit", t).permutation(len(dataset))
    eve_rngs = [
        _stream(state.seed, "chan-eve-adv", spec.id, t) for spec in state.roster
    ]
    for net in state.eves:
        net.train()
    sums = np.zeros(len(state.roster))
    batches = 0
    for batch_idx, (batch, labels) in enumerate(
        iter_batches(dataset, schedule.batch_size, order=order)
    ):
        with torch.no_grad():
            x = state.encoder(batch)
        for i, spec in enumerate(state.roster):
            z = apply_channel(x, spec.channel, eve_rngs[i])
            q = adversary_predict(z, state.eves[i], spec.num_classes)
            cw = None if per_eve_class_weights is None else per_eve_class_weights[i]
            loss = adversary_loss(q, labels[spec.secret_id], cw)
            _check_finite(loss, f"adversarial phase (eve {spec.id})", t, batch_idx)
            state.opt_eves[i].zero_grad(set_to_none=True)
            loss.backward()
            state.opt_eves[i].step()
            sums[i] += float(loss.detach())
        batches += 1
    state.adv_epochs_done += 1
    return list(sums / batches)


def warmup_legit(
    state: TrainState,
    dataset: ImageDataset,
    schedule: TrainingSchedule,
    weights: LossWeights,
) -> TrainState:
    """Train the encoder/decoder pair on pure distortion; adversaries untouched."""
    for epoch in range(schedule.n_warmup):
        losses = _legit_epoch(state, dataset, weights, include_leakage=False)
        mean = float(np.mean(losses))
        state.history.setdefault("warmup_legit", []).append(mean)
        log.info("warmup-legit epoch %d/%d loss %.6f", epoch + 1, schedule.n_warmup, mean)
    return state


def warmup_adversaries(
    state: TrainState,
    dataset: ImageDataset,
    schedule: TrainingSchedule,
    per_eve_class_weights: Optional[Sequence] = None,
) -> TrainState:
    """Train each eavesdropper on its own wiretapped observations; codec untouched."""
    for epoch in range(schedule.n_warmup):
        losses = _adv_epoch(state, dataset, per_eve_class_weights)
        state.history.setdefault("warmup_adv", []).append(losses)
        log.info(
            "warmup-adv epoch %d/%d losses %s",
            epoch + 1,
            schedule.n_warmup,
            " ".join(f"{v:.4f}" for v in losses),
        )
    return state


def minimax_episode(
    state: TrainState,
    dataset: ImageDataset,
    schedule: TrainingSchedule,
    weights: LossWeights,
    per_eve_class_weights: Optional[Sequence] = None,
    use_alc: bool = True,
) -> TrainState:
    """One episode: legitimate epochs with frozen adversaries, then the reverse."""
    eve_params = [p for net in state.eves for p in net.parameters()]
    for p in eve_params:
        p.requires_grad_(False)
    try:
        legit_means = []
        for _ in range(schedule.n_legit_epochs):
            losses = _legit_epoch(
                state, dataset, weights, include_leakage=True, use_alc=use_alc
            )
            legit_means.append(float(np.mean(losses)))
    finally:
        for p in eve_params:
            p.requires_grad_(True)
    adv_means = []
    for _ in range(schedule.n_adv_epochs):
        adv_means.append(_adv_epoch(state, dataset, per_eve_class_weights))
    state.episode += 1
    state.history.setdefault("episodes", []).append(
        {"legit": legit_means, "adv": adv_means}
    )
    log.info(
        "episode %d legit %.6f adv %s",
        state.episode,
        legit_means[-1],
        " ".join(f"{v:.4f}" for v in adv_means[-1]),
    )
    return state


# --- checkpointing ---------------------------------------------------------

_DTYPES = {
    "float32": (torch.float32, np.float32),
    "float64": (torch.float64, np.float64),
    "int64": (torch.int64, np.int64),
    "int32": (torch.int32, np.int32),
    "uint8": (torch.uint8, np.uint8),
    "bool": (torch.bool, np.bool_),
}
_TORCH_DTYPE_NAMES = {t: name for name, (t, _) in _DTYPES.items()}


def _collect_tensors(state: TrainState) -> dict:
    tensors = {}
    for prefix, module in (
        ("enc", state.encoder),
        ("dec", state.decoder),
        *((f"eve{i}", net) for i, net in enumerate(state.eves)),
    ):
        for key, value in module.state_dict().items():
            tensors[f"{prefix}.{key}"] = value
    for prefix, opt in (
        ("optC", state.opt_codec),
        *((f"optE{i}", opt) for i, opt in enumerate(state.opt_eves)),
    ):
        sd = opt.state_dict()
        for pidx in sorted(sd["state"]):
            for slot in sorted(sd["state"][pidx]):
                value = sd["state"][pidx][slot]
                if not torch.is_tensor(value):
                    value = torch.tensor(float(value), dtype=torch.float64)
                tensors[f"{prefix}.{pidx}.{slot}"] = value
    return tensors


def save_checkpoint(state: TrainState, path) -> Path:
    """Write a self-describing, byte-deterministic archive of the train state."""
    path = Path(path)
    tensors = _collect_tensors(state)
    manifest = []
    blobs = []
    offset = 0
    for name, tensor in tensors.items():
        dtype_name = _TORCH_DTYPE_NAMES.get(tensor.dtype)
        if dtype_name is None:
            raise CheckpointError(f"unsupported tensor dtype {tensor.dtype} for {name}")
        blob = tensor.detach().cpu().contiguous().numpy().tobytes()
        manifest.append(
            {
                "name": name,
                "dtype": dtype_name,
                "shape": list(tensor.shape),
                "offset": offset,
                "nbytes": len(blob),
            }
        )
        blobs.append(blob)
        offset += len(blob)
    header = {
        "codec": state.codec_cfg.to_dict(),
        "legit_spec": state.legit_spec.to_dict(),
        "roster": [spec.to_dict() for spec in state.roster],
        "schedule": state.schedule.to_dict(),
        "counters": {
            "episode": state.episode,
            "legit_epochs_done": state.legit_epochs_done,
            "adv_epochs_done": state.adv_epochs_done,
        },
        "tensors": manifest,
    }
    payload = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(len(payload).to_bytes(8, "big"))
        fh.write(payload)
        for blob in blobs:
            fh.write(blob)
    return path


def load_checkpoint(path, expected_codec: Optional[CodecConfig] = None) -> TrainState:
    """Exact round-trip of a saved train state; validates format and config."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(
            f"{path} is not a {CHECKPOINT_MAGIC.decode().strip()} archive"
        )
    try:
        cursor = len(CHECKPOINT_MAGIC)
        header_len = int.from_bytes(raw[cursor : cursor + 8], "big")
        cursor += 8
        header = json.loads(raw[cursor : cursor + header_len])
        cursor += header_len
        body = raw[cursor:]
        codec_cfg = CodecConfig.from_dict(header["codec"])
        legit_spec = ChannelSpec.from_dict(header["legit_spec"])
        roster = tuple(EavesdropperSpec.from_dict(d) for d in header["roster"])
        schedule = TrainingSchedule.from_dict(header["schedule"])
        counters = header["counters"]
        tensors = {}
        for entry in header["tensors"]:
            torch_dtype, np_dtype = _DTYPES[entry["dtype"]]
            arr = np.frombuffer(
                body, dtype=np_dtype, count=int(np.prod(entry["shape"], dtype=np.int64)) if entry["shape"] else 1,
                offset=entry["offset"],
            ).copy()
            tensors[entry["name"]] = (
                torch.from_numpy(arr).reshape(entry["shape"]).to(torch_dtype)
            )
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc

    if expected_codec is not None and codec_cfg != expected_codec:
        raise CheckpointError(
            f"checkpoint codec config {codec_cfg.to_dict()} does not match "
            f"expected {expected_codec.to_dict()}"
        )

    state = init_state(codec_cfg, roster, schedule, legit_spec)
    state.episode = int(counters["episode"])
    state.legit_epochs_done = int(counters["legit_epochs_done"])
    state.adv_epochs_done = int(counters["adv_epochs_done"])

    def take(prefix: str) -> dict:
        plen = len(prefix) + 1
        return {k[plen:]: v for k, v in tensors.items() if k.startswith(prefix + ".")}

    state.encoder.load_state_dict(take("enc"))
    state.decoder.load_state_dict(take("dec"))
    for i, net in enumerate(state.eves):
        net.load_state_dict(take(f"eve{i}"))
    for prefix, opt in (
        ("optC", state.opt_codec),
        *((f"optE{i}", opt) for i, opt in enumerate(state.opt_eves)),
    ):
        entries = take(prefix)
        opt_state: dict = {}
        for key, tensor in entries.items():
            pidx_str, slot = key.split(".", 1)
            opt_state.setdefault(int(pidx_str), {})[slot] = tensor
        sd = opt.state_dict()
        sd["state"] = opt_state
        opt.load_state_dict(sd)
    return state


def module_fingerprint(module: torch.nn.Module) -> str:
    """Hash of all parameters and buffers; equal hashes mean byte-equal state."""
    digest = hashlib.sha256()
    for key, value in module.state_dict().items():
        digest.update(key.encode())
        digest.update(value.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()


def optimizer_fingerprint(opt: torch.optim.Optimizer) -> str:
    digest = hashlib.sha256()
    sd = opt.state_dict()
    for pidx in sorted(sd["state"]):
        for slot in sorted(sd["state"][pidx]):
            value = sd["state"][pidx][slot]
            digest.update(f"{pidx}.{slot}".encode())
            if torch.is_tensor(value):
                digest.update(value.detach().cpu().contiguous().numpy().tobytes())
            else:
                digest.update(repr(value).encode())
    return digest.hexdigest()


# --- full pipeline ---------------------------------------------------------


def _load_datasets(block) -> tuple:
    """Resolve the dataset block of an experiment config into train/test splits."""
    name = block.name
    if name == "synthetic":
        h, w, c = block.image_size
        train = synthetic_dataset(
            block.train_count or 2000, h, w, c, block.num_classes, seed=block.synthetic_seed
        )
        test = synthetic_dataset(
            block.test_count or 500, h, w, c, block.num_classes, seed=block.synthetic_seed + 1
        )
        return train, test
    root = block.effective_root() if hasattr(block, "effective_root") else block.root
    if name == "cifar10":
        train = load_cifar10(root, "train")
        test = load_cifar10(root, "test")
    elif name == "celeba":
        mappings = SECRET_MAPPING_PRESETS[block.mappings]
        size = block.image_size[0]
        train = load_celeba(root, "train", mappings, size, max_count=block.train_count)
        test = load_celeba(root, "test", mappings, size, max_count=block.test_count)
    else:
        raise ValueError(f"unknown dataset {name!r}")
    if block.train_count:
        train = train.subset(block.train_count)
    if block.test_count:
        test = test.subset(block.test_count)
    return train, test


def _build_roster(experiment, dataset: ImageDataset) -> tuple:
    stds = experiment.roster.fading_stds[: experiment.roster.count]
    secret_ids = experiment.roster.secret_ids
    specs = []
    for i, std in enumerate(stds):
        secret = secret_ids[i] if i < len(secret_ids) else secret_ids[-1]
        if secret not in dataset.num_classes:
            raise ValueError(f"dataset provides no secret stream {secret!r}")
        specs.append(
            EavesdropperSpec(
                id=i + 1,
                channel=ChannelSpec(
                    kind=experiment.channel.train_kind,
                    snr_db=experiment.schedule.snr_eve_train_db,
                    fading_std=std,
                    shape=experiment.channel.nakagami_m,
                    power=experiment.codec.power,
                ),
                secret_id=secret,
                num_classes=dataset.num_classes[secret],
            )
        )
    return tuple(specs)


def _build_codec_cfg(experiment, dataset: ImageDataset) -> CodecConfig:
    h, w, c = dataset.image_shape
    return CodecConfig(
        height=h,
        width=w,
        channels=c,
        n_T=experiment.codec.n_T,
        bandwidth_ratio=experiment.codec.bandwidth_ratio,
        conv_stack=experiment.codec.conv_stack,
        power=experiment.codec.power,
    )


def _eval_state(state: TrainState, test_ds, experiment, tag: str) -> metrics_mod.MetricsRecord:
    return metrics_mod.evaluate(
        state.encoder,
        state.decoder,
        state.eves,
        state.roster,
        test_ds,
        state.legit_spec,
        scenario=experiment.scenario,
        repeats=state.schedule.eval_repeats,
        seed=derive_seed(state.seed, "eval", state.episode),
        batch_size=state.schedule.batch_size,
        tag=tag,
        checkpoint=f"ep{state.episode}",
        record_seed=state.seed,
    )


def train(experiment, run_dir, resume_from=None) -> Path:
    """Full protocol: warm-ups, minimax episodes, periodic eval and checkpoints.

    Returns the final checkpoint path.  ``experiment`` is a resolved
    experiment config; ``resume_from`` restores a saved state and continues
    the same stream sequence, so a resumed run matches an uninterrupted one.
    """
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(run_dir / "run.log")
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(handler)
    stream_handler = None
    if not any(isinstance(h, logging.StreamHandler) and h is not handler for h in log.handlers):
        stream_handler = logging.StreamHandler(sys.stdout)
        log.addHandler(stream_handler)
    log.setLevel(logging.INFO)
    try:
        train_ds, test_ds = _load_datasets(experiment.dataset)
        codec_cfg = _build_codec_cfg(experiment, train_ds)
        schedule = experiment.schedule
        weights = LossWeights(w=experiment.loss.w, alpha=experiment.loss.alpha)
        legit_spec = ChannelSpec(
            kind=experiment.channel.train_kind,
            snr_db=schedule.snr_legit_train_db,
            fading_std=experiment.channel.legit_fading_std,
            shape=experiment.channel.nakagami_m,
            power=experiment.codec.power,
        )
        if resume_from is not None:
            state = load_checkpoint(resume_from, expected_codec=codec_cfg)
        else:
            roster = _build_roster(experiment, train_ds)
            state = init_state(codec_cfg, roster, schedule, legit_spec)

        per_eve_cw = None
        if experiment.loss.class_weighted:
            per_eve_cw = [
                torch.from_numpy(
                    class_weights(train_ds.labels[spec.secret_id], spec.num_classes)
                )
                for spec in state.roster
            ]

        metrics_path = run_dir / "metrics.csv"
        if state.legit_epochs_done == 0:
            log.info("starting legitimate warm-up (%d epochs)", schedule.n_warmup)
            warmup_legit(state, train_ds, schedule, weights)
        if state.adv_epochs_done == 0:
            log.info("starting adversarial warm-up (%d epochs)", schedule.n_warmup)
            warmup_adversaries(state, train_ds, schedule, per_eve_cw)
        if state.episode == 0:
            rec = _eval_state(state, test_ds, experiment, tag="warmup")
            metrics_mod.append_metrics_csv(metrics_path, [rec])
            save_checkpoint(state, run_dir / "ckpt_warmup.sjc")
            log.info(
                "post-warmup eval ssim %.4f acc %s",
                rec.ssim_bob,
                " ".join(f"{v:.3f}" for v in rec.acc_per_eve),
            )

        while state.episode < schedule.n_episodes:
            minimax_episode(
                state, train_ds, schedule, weights, per_eve_cw,
                use_alc=experiment.loss.alc,
            )
            at = state.episode
            if schedule.eval_every and (at % schedule.eval_every == 0) and at < schedule.n_episodes:
                rec = _eval_state(state, test_ds, experiment, tag=f"episode-{at}")
                metrics_mod.append_metrics_csv(metrics_path, [rec])
            if schedule.checkpoint_every and (at % schedule.checkpoint_every == 0):
                save_checkpoint(state, run_dir / f"ckpt_ep{at}.sjc")

        final_path = save_checkpoint(state, run_dir / "final.sjc")
        rec = _eval_state(state, test_ds, experiment, tag="final")
        metrics_mod.append_metrics_csv(metrics_path, [rec])
        log.info(
            "final eval ssim %.4f acc %s",
            rec.ssim_bob,
            " ".join(f"{v:.3f}" for v in rec.acc_per_eve),
        )
        return final_path
    finally:
        log.removeHandler(handler)
        handler.close()
        if stream_handler is not None:
            log.removeHandler(stream_handler)

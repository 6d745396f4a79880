"""Experiment runner: config parsing, train/eval/sweep commands and plots.

Configs are JSON documents with schema tag "secure-jscc-config/1"; parsing
fills defaults so a resolved snapshot re-parses to itself.  Exit codes:
0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import metrics as metrics_mod
from . import trainer as trainer_mod
from .channel import CHANNEL_KINDS, ChannelSpec
from .data import SECRET_MAPPING_PRESETS, DataConfigError, IngestionError
from .metrics import MetricsError
from .trainer import CheckpointError, TrainingSchedule, derive_seed

CONFIG_VERSION = "secure-jscc-config/1"
DATA_ENV_VAR = "SECURE_JSCC_DATA"

PAPER_FADING_STDS = (0.04, 0.16, 0.36, 0.64, 1.0, 1.44)
SWEEP_DEFAULTS = {
    "w": (0.0, 10.0, 50.0, 100.0),
    "alpha": (0.0, 0.05, 0.1, 0.5),
    "snr_eve": (5.0, 10.0, 15.0, 20.0, 25.0),
    "M": (1, 2, 3, 4, 5, 6),
}


class ConfigError(ValueError):
    """Invalid experiment config; the message names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclasses.dataclass(frozen=True)
class DatasetBlock:
    name: str = "cifar10"
    root: Optional[str] = None
    train_count: Optional[int] = None
    test_count: Optional[int] = None
    image_size: tuple = (32, 32, 3)
    num_classes: int = 10
    mappings: str = "celeba-table3"
    synthetic_seed: int = 1234

    def effective_root(self) -> Optional[str]:
        return os.environ.get(DATA_ENV_VAR) or self.root


@dataclasses.dataclass(frozen=True)
class CodecBlock:
    n_T: int = 4
    bandwidth_ratio: float = 1.0 / 3.0
    conv_stack: tuple = ((16, 5, 2), (32, 5, 2), (32, 5, 1), (32, 5, 1), (32, 5, 1))
    power: float = 1.0


@dataclasses.dataclass(frozen=True)
class RosterBlock:
    count: int = 6
    fading_stds: tuple = PAPER_FADING_STDS
    secret_ids: tuple = ()


@dataclasses.dataclass(frozen=True)
class ChannelBlock:
    train_kind: str = "rayleigh"
    legit_fading_std: float = 1.0
    nakagami_m: float = 3.0
    eval_kinds: tuple = ("awgn", "rayleigh", "nakagami")
    eval_snr_grid_db: tuple = tuple(float(v) for v in range(-20, 31, 5))
    eval_snr_legit_db: float = 20.0
    eval_snr_eve_db: float = 15.0
    sweep_link: str = "legit"


@dataclasses.dataclass(frozen=True)
class LossBlock:
    w: float = 5.0
    alpha: float = 0.1
    alc: bool = True
    class_weighted: bool = False


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    scenario: str = "colluding"
    output_dir: str = "runs/experiment"
    dataset: DatasetBlock = DatasetBlock()
    codec: CodecBlock = CodecBlock()
    roster: RosterBlock = RosterBlock()
    channel: ChannelBlock = ChannelBlock()
    loss: LossBlock = LossBlock()
    schedule: TrainingSchedule = TrainingSchedule()

    def to_dict(self) -> dict:
        d = {
            "version": CONFIG_VERSION,
            "seed": self.seed,
            "scenario": self.scenario,
            "output_dir": self.output_dir,
            "dataset": dataclasses.asdict(self.dataset),
            "codec": dataclasses.asdict(self.codec),
            "roster": dataclasses.asdict(self.roster),
            "channel": dataclasses.asdict(self.channel),
            "loss": dataclasses.asdict(self.loss),
            "schedule": self.schedule.to_dict(),
        }
        d["dataset"]["image_size"] = list(self.dataset.image_size)
        d["codec"]["conv_stack"] = [list(l) for l in self.codec.conv_stack]
        d["roster"]["fading_stds"] = list(self.roster.fading_stds)
        d["roster"]["secret_ids"] = list(self.roster.secret_ids)
        d["channel"]["eval_kinds"] = list(self.channel.eval_kinds)
        d["channel"]["eval_snr_grid_db"] = list(self.channel.eval_snr_grid_db)
        return d


def _take(block: dict, field: str, key: str, default, caster):
    value = block.get(key, default)
    try:
        return caster(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{field}.{key}", f"invalid value {value!r}: {exc}") from exc


def _check_keys(block: dict, field: str, allowed: Sequence[str]) -> None:
    unknown = set(block) - set(allowed)
    if unknown:
        raise ConfigError(f"{field}.{sorted(unknown)[0]}", "unknown key")


def _opt_int(v):
    return None if v is None else int(v)


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a config document and fill all defaults."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    _check_keys(
        doc,
        "<root>",
        ("version", "seed", "scenario", "output_dir", "dataset", "codec", "roster", "channel", "loss", "schedule"),
    )
    version = doc.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError("version", f"expected {CONFIG_VERSION!r}, got {version!r}")
    seed = _take(doc, "<root>", "seed", 0, int)
    scenario = _take(doc, "<root>", "scenario", "colluding", str)
    if scenario not in ("colluding", "non_colluding"):
        raise ConfigError("scenario", f"must be colluding or non_colluding, got {scenario!r}")
    output_dir = _take(doc, "<root>", "output_dir", "runs/experiment", str)

    ds = doc.get("dataset", {})
    _check_keys(ds, "dataset", (f.name for f in dataclasses.fields(DatasetBlock)))
    dataset = DatasetBlock(
        name=_take(ds, "dataset", "name", "cifar10", str),
        root=ds.get("root"),
        train_count=_take(ds, "dataset", "train_count", None, _opt_int),
        test_count=_take(ds, "dataset", "test_count", None, _opt_int),
        image_size=_take(ds, "dataset", "image_size", (32, 32, 3), lambda v: tuple(int(x) for x in v)),
        num_classes=_take(ds, "dataset", "num_classes", 10, int),
        mappings=_take(ds, "dataset", "mappings", "celeba-table3", str),
        synthetic_seed=_take(ds, "dataset", "synthetic_seed", 1234, int),
    )
    if dataset.name not in ("cifar10", "celeba", "synthetic"):
        raise ConfigError("dataset.name", f"unknown dataset {dataset.name!r}")
    if len(dataset.image_size) != 3:
        raise ConfigError("dataset.image_size", "must be [height, width, channels]")
    if dataset.name == "celeba" and dataset.mappings not in SECRET_MAPPING_PRESETS:
        raise ConfigError(
            "dataset.mappings",
            f"unknown preset {dataset.mappings!r}; known: {sorted(SECRET_MAPPING_PRESETS)}",
        )
    if dataset.name == "cifar10":
        dataset = dataclasses.replace(dataset, image_size=(32, 32, 3), num_classes=10)

    cd = doc.get("codec", {})
    _check_keys(cd, "codec", (f.name for f in dataclasses.fields(CodecBlock)))
    codec = CodecBlock(
        n_T=_take(cd, "codec", "n_T", 4, int),
        bandwidth_ratio=_take(cd, "codec", "bandwidth_ratio", 1.0 / 3.0, float),
        conv_stack=_take(
            cd,
            "codec",
            "conv_stack",
            CodecBlock().conv_stack,
            lambda v: tuple(tuple(int(x) for x in layer) for layer in v),
        ),
        power=_take(cd, "codec", "power", 1.0, float),
    )
    for i, layer in enumerate(codec.conv_stack):
        if len(layer) != 3:
            raise ConfigError(f"codec.conv_stack[{i}]", "expected [filters, kernel, stride]")

    rb = doc.get("roster", {})
    _check_keys(rb, "roster", (f.name for f in dataclasses.fields(RosterBlock)))
    roster = RosterBlock(
        count=_take(rb, "roster", "count", 6, int),
        fading_stds=_take(
            rb, "roster", "fading_stds", PAPER_FADING_STDS, lambda v: tuple(float(x) for x in v)
        ),
        secret_ids=_take(
            rb, "roster", "secret_ids", (), lambda v: tuple(str(x) for x in v)
        ),
    )
    if roster.count < 1:
        raise ConfigError("roster.count", f"must be >= 1, got {roster.count}")
    if roster.count > len(roster.fading_stds):
        raise ConfigError(
            "roster.count",
            f"{roster.count} eavesdroppers but only {len(roster.fading_stds)} fading stds",
        )
    if not roster.secret_ids:
        if dataset.name == "celeba":
            ids = tuple(m.secret_id for m in SECRET_MAPPING_PRESETS[dataset.mappings])
        else:
            ids = ("class",) * roster.count
        roster = dataclasses.replace(roster, secret_ids=ids[: roster.count])

    ch = doc.get("channel", {})
    _check_keys(ch, "channel", (f.name for f in dataclasses.fields(ChannelBlock)))
    channel = ChannelBlock(
        train_kind=_take(ch, "channel", "train_kind", "rayleigh", str),
        legit_fading_std=_take(ch, "channel", "legit_fading_std", 1.0, float),
        nakagami_m=_take(ch, "channel", "nakagami_m", 3.0, float),
        eval_kinds=_take(
            ch, "channel", "eval_kinds", ("awgn", "rayleigh", "nakagami"),
            lambda v: tuple(str(x) for x in v),
        ),
        eval_snr_grid_db=_take(
            ch, "channel", "eval_snr_grid_db", ChannelBlock().eval_snr_grid_db,
            lambda v: tuple(float(x) for x in v),
        ),
        eval_snr_legit_db=_take(ch, "channel", "eval_snr_legit_db", 20.0, float),
        eval_snr_eve_db=_take(ch, "channel", "eval_snr_eve_db", 15.0, float),
        sweep_link=_take(ch, "channel", "sweep_link", "legit", str),
    )
    if channel.train_kind not in CHANNEL_KINDS:
        raise ConfigError("channel.train_kind", f"unknown kind {channel.train_kind!r}")
    for kind in channel.eval_kinds:
        if kind not in CHANNEL_KINDS:
            raise ConfigError("channel.eval_kinds", f"unknown kind {kind!r}")
    if channel.sweep_link not in ("legit", "eve"):
        raise ConfigError("channel.sweep_link", f"must be legit or eve, got {channel.sweep_link!r}")

    lb = doc.get("loss", {})
    _check_keys(lb, "loss", (f.name for f in dataclasses.fields(LossBlock)))
    loss = LossBlock(
        w=_take(lb, "loss", "w", 5.0, float),
        alpha=_take(lb, "loss", "alpha", 0.1, float),
        alc=_take(lb, "loss", "alc", True, bool),
        class_weighted=_take(lb, "loss", "class_weighted", False, bool),
    )
    if loss.w < 0:
        raise ConfigError("loss.w", f"must be nonnegative, got {loss.w}")
    if loss.alpha < 0:
        raise ConfigError("loss.alpha", f"must be nonnegative, got {loss.alpha}")

    sc = dict(doc.get("schedule", {}))
    _check_keys(sc, "schedule", (f.name for f in dataclasses.fields(TrainingSchedule)))
    sc["seed"] = seed
    try:
        schedule = TrainingSchedule.from_dict({**TrainingSchedule().to_dict(), **sc})
    except (TypeError, ValueError) as exc:
        raise ConfigError("schedule", str(exc)) from exc

    return ExperimentConfig(
        seed=seed,
        scenario=scenario,
        output_dir=output_dir,
        dataset=dataset,
        codec=codec,
        roster=roster,
        channel=channel,
        loss=loss,
        schedule=schedule,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("<config>", f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<config>", f"invalid JSON in {path}: {exc}") from exc
    return parse_config(doc)


def preset_config(name: str) -> dict:
    """Built-in config documents: full-scale 'paper' and test-scale 'desk'."""
    if name == "paper":
        return {"version": CONFIG_VERSION}
    if name == "desk":
        return {
            "version": CONFIG_VERSION,
            "scenario": "colluding",
            "output_dir": "runs/desk",
            "dataset": {"name": "cifar10", "train_count": 2000, "test_count": 500},
            "codec": {
                "n_T": 1,
                "conv_stack": [[8, 3, 2], [16, 3, 2], [16, 3, 1], [16, 3, 1], [32, 3, 1]],
            },
            "roster": {"count": 3},
            "channel": {"eval_snr_grid_db": [0.0, 10.0, 20.0]},
            "schedule": {
                "n_episodes": 12,
                "n_warmup": 8,
                "lr": 1e-3,
                "eval_every": 6,
                "checkpoint_every": 6,
                "eval_repeats": 2,
            },
        }
    raise ConfigError("preset", f"unknown preset {name!r}; expected desk or paper")


def _merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def resolve_config(
    config_path=None, preset: Optional[str] = None, seed: Optional[int] = None
) -> ExperimentConfig:
    doc: dict = {"version": CONFIG_VERSION}
    if preset:
        doc = _merge(doc, preset_config(preset))
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError("<config>", f"config file not found: {path}")
        try:
            doc = _merge(doc, json.loads(path.read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError("<config>", f"invalid JSON in {path}: {exc}") from exc
    if not preset and config_path is None:
        raise ConfigError("<config>", "either --config or --preset is required")
    if seed is not None:
        doc["seed"] = seed
    return parse_config(doc)


def _require_dataset_root(experiment: ExperimentConfig) -> None:
    if experiment.dataset.name in ("cifar10", "celeba") and not experiment.dataset.effective_root():
        raise ConfigError(
            "dataset.root",
            f"dataset {experiment.dataset.name!r} needs a root directory "
            f"(set dataset.root or ${DATA_ENV_VAR})",
        )


def cmd_train(experiment: ExperimentConfig, out=None, resume_from=None) -> Path:
    """Create a run directory with a resolved-config snapshot and train."""
    _require_dataset_root(experiment)
    run_dir = Path(out) if out else Path(experiment.output_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(
        json.dumps(experiment.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    trainer_mod.train(experiment, run_dir, resume_from=resume_from)
    return run_dir


def _eval_points(experiment: ExperimentConfig):
    ch = experiment.channel
    for kind in ch.eval_kinds:
        for snr in ch.eval_snr_grid_db:
            if ch.sweep_link == "legit":
                yield kind, float(snr), ch.eval_snr_eve_db
            else:
                yield kind, ch.eval_snr_legit_db, float(snr)


def cmd_eval(
    checkpoint, experiment: ExperimentConfig, out, repeats: Optional[int] = None
) -> list:
    """Sweep the configured SNR grid x channel kinds; one CSV row per point."""
    _require_dataset_root(experiment)
    state = trainer_mod.load_checkpoint(checkpoint)
    _, test_ds = trainer_mod._load_datasets(experiment.dataset)
    if test_ds.image_shape != (
        state.codec_cfg.height,
        state.codec_cfg.width,
        state.codec_cfg.channels,
    ):
        raise CheckpointError(
            f"checkpoint images are "
            f"{(state.codec_cfg.height, state.codec_cfg.width, state.codec_cfg.channels)}, "
            f"dataset provides {test_ds.image_shape}"
        )
    repeats = repeats if repeats is not None else 10
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt_id = Path(checkpoint).name
    records = []
    for kind, snr_legit, snr_eve in _eval_points(experiment):
        legit_spec = ChannelSpec(
            kind=kind,
            snr_db=snr_legit,
            fading_std=experiment.channel.legit_fading_std,
            shape=experiment.channel.nakagami_m,
            power=state.codec_cfg.power,
        )
        roster = tuple(
            dataclasses.replace(
                spec,
                channel=dataclasses.replace(
                    spec.channel, kind=kind, snr_db=snr_eve,
                    shape=experiment.channel.nakagami_m,
                ),
            )
            for spec in state.roster
        )
        rec = metrics_mod.evaluate(
            state.encoder,
            state.decoder,
            state.eves,
            roster,
            test_ds,
            legit_spec,
            scenario=experiment.scenario,
            repeats=repeats,
            seed=derive_seed(experiment.seed, "cmd-eval", kind, repr(snr_legit), repr(snr_eve)),
            batch_size=state.schedule.batch_size,
            tag=f"eval-{kind}",
            checkpoint=ckpt_id,
            record_seed=experiment.seed,
        )
        records.append(rec)
    metrics_mod.append_metrics_csv(out / "metrics.csv", records)
    return records


def cmd_sweep(
    experiment: ExperimentConfig, axis: str, out, values: Optional[Sequence] = None
) -> Path:
    """Train and evaluate once per axis value; aggregate final rows into one CSV."""
    if axis not in SWEEP_DEFAULTS:
        raise ConfigError("axis", f"unknown sweep axis {axis!r}; expected one of {sorted(SWEEP_DEFAULTS)}")
    if values is None:
        values = SWEEP_DEFAULTS[axis]
    values = tuple(values)
    if not values:
        raise ConfigError("axis", "empty sweep value list")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    agg_path = out / "sweep.csv"
    rows = []
    for value in values:
        doc = experiment.to_dict()
        if axis == "w":
            doc["loss"]["w"] = float(value)
        elif axis == "alpha":
            doc["loss"]["alpha"] = float(value)
        elif axis == "snr_eve":
            doc["schedule"]["snr_eve_train_db"] = float(value)
            doc["channel"]["eval_snr_eve_db"] = float(value)
        elif axis == "M":
            doc["roster"]["count"] = int(value)
            doc["roster"]["secret_ids"] = []
        run_cfg = parse_config(doc)
        run_dir = cmd_train(run_cfg, out=out / f"{axis}={value}")
        final_rows = [
            r for r in metrics_mod.read_metrics_csv(run_dir / "metrics.csv") if r["tag"] == "final"
        ]
        for row in final_rows:
            rows.append({"sweep_axis": axis, "sweep_value": value, **row})
    import csv as _csv

    with open(agg_path, "w", newline="") as fh:
        writer = _csv.DictWriter(
            fh, fieldnames=("sweep_axis", "sweep_value") + metrics_mod.CSV_COLUMNS
        )
        writer.writeheader()
        for row in rows:
            out_row = dict(row)
            for key in ("ce_per_eve", "acc_per_eve", "f1_macro_per_eve"):
                if isinstance(out_row.get(key), tuple):
                    out_row[key] = ";".join(repr(v) for v in out_row[key])
            for key in ("acc_colluding", "acc_pessimistic"):
                if out_row.get(key) is None:
                    out_row[key] = ""
            writer.writerow(out_row)
    return agg_path


PLOT_FAMILIES = ("privacy_utility", "accuracy_vs_snr", "sweep_tradeoff")


def cmd_plot(csv_path, family: str, out) -> Path:
    """Render one figure family from a metrics CSV; numbers come from the CSV only."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if family not in PLOT_FAMILIES:
        raise ConfigError("family", f"unknown figure family {family!r}; expected one of {PLOT_FAMILIES}")
    rows = metrics_mod.read_metrics_csv(csv_path)
    if not rows:
        raise MetricsError(f"no rows in {csv_path}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4.5), dpi=120)

    if family == "privacy_utility":
        kinds = sorted({(r["channel_kind"], r["scenario"]) for r in rows})
        for kind, scenario in kinds:
            pts = [r for r in rows if r["channel_kind"] == kind and r["scenario"] == scenario]
            pts.sort(key=lambda r: r["ssim_bob"])
            ax.plot(
                [r["ssim_bob"] for r in pts],
                [r["ce_mean"] for r in pts],
                marker="o",
                label=f"{kind}/{scenario}",
            )
        ax.set_xlabel("reconstruction SSIM at the legitimate receiver")
        ax.set_ylabel("mean adversarial cross-entropy")
    elif family == "accuracy_vs_snr":
        snr_key = (
            "snr_eve_db"
            if len({r["snr_eve_db"] for r in rows}) > 1
            else "snr_legit_db"
        )
        for kind in sorted({r["channel_kind"] for r in rows}):
            pts = sorted(
                (r for r in rows if r["channel_kind"] == kind), key=lambda r: r[snr_key]
            )
            ax.plot([r[snr_key] for r in pts], [r["acc_mean"] for r in pts], marker="o", label=f"{kind} mean")
            if all(r["acc_colluding"] is not None for r in pts):
                ax.plot(
                    [r[snr_key] for r in pts],
                    [r["acc_colluding"] for r in pts],
                    marker="s",
                    linestyle="--",
                    label=f"{kind} colluding",
                )
            if all(r["acc_pessimistic"] is not None for r in pts):
                ax.plot(
                    [r[snr_key] for r in pts],
                    [r["acc_pessimistic"] for r in pts],
                    marker="^",
                    linestyle=":",
                    label=f"{kind} pessimistic",
                )
        ax.set_xlabel(f"{'eavesdropper' if snr_key == 'snr_eve_db' else 'legitimate'} SNR (dB)")
        ax.set_ylabel("adversarial accuracy")
    else:  # sweep_tradeoff
        with open(csv_path, newline="") as fh:
            import csv as _csv

            raw = list(_csv.DictReader(fh))
        if not raw or "sweep_value" not in raw[0]:
            raise MetricsError(f"metrics CSV missing columns: sweep_axis, sweep_value")
        raw.sort(key=lambda r: float(r["sweep_value"]))
        xs = [float(r["sweep_value"]) for r in raw]
        ax.plot(xs, [float(r["ssim_bob"]) for r in raw], marker="o", label="SSIM (Bob)")
        ax.plot(xs, [float(r["acc_mean"]) for r in raw], marker="s", label="adversary accuracy")
        ax.set_xlabel(raw[0]["sweep_axis"])
        ax.set_ylabel("metric value")

    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    target = out / f"{family}.png"
    fig.savefig(target, metadata={"Software": "secure-jscc"})
    plt.close(fig)
    return target


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="secure-jscc",
        description="Train and evaluate secure image transmission over wiretap channels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from a config or preset")
    p_eval = sub.add_parser("eval", help="evaluate a checkpoint over the SNR grid")
    p_sweep = sub.add_parser("sweep", help="train/evaluate along a hyperparameter axis")
    for p in (p_train, p_eval, p_sweep):
        p.add_argument("--config", default=None, help="path to a JSON experiment config")
        p.add_argument("--preset", default=None, choices=("desk", "paper"))
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
    p_train.add_argument("--resume", default=None, help="checkpoint to resume from")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--repeats", type=int, default=None, help="channel draws per image (default 10)")
    p_sweep.add_argument("--axis", required=True)
    p_sweep.add_argument("--values", default=None, help="comma-separated axis values")

    p_plot = sub.add_parser("plot", help="render charts from a metrics CSV")
    p_plot.add_argument("--csv", required=True)
    p_plot.add_argument("--family", required=True)
    p_plot.add_argument("--out", default="plots")

    args = parser.parse_args(argv)
    try:
        if args.command == "plot":
            target = cmd_plot(args.csv, args.family, args.out)
            print(target)
            return 0
        experiment = resolve_config(args.config, args.preset, args.seed)
        if args.command == "train":
            run_dir = cmd_train(experiment, out=args.out, resume_from=args.resume)
            print(run_dir)
        elif args.command == "eval":
            out = args.out or "eval"
            records = cmd_eval(args.checkpoint, experiment, out, repeats=args.repeats)
            print(f"{len(records)} evaluation rows -> {Path(out) / 'metrics.csv'}")
        elif args.command == "sweep":
            values = None
            if args.values is not None:
                values = [float(v) for v in args.values.split(",") if v != ""]
            out = args.out or f"sweep_{args.axis}"
            agg = cmd_sweep(experiment, args.axis, out, values)
            print(agg)
        return 0
    except (ConfigError, DataConfigError, MetricsError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (IngestionError, CheckpointError, trainer_mod.TrainingDiverged, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())

import numpy as np
import pytest
import torch

from secure_jscc import trainer as trainer_mod
from secure_jscc.adversary import EavesdropperSpec, adversary_guess
from secure_jscc.channel import ChannelSpec, apply_channel
from secure_jscc.codec import CodecConfig, ImageBatch
from secure_jscc.data import synthetic_dataset
from secure_jscc.metrics import read_metrics_csv
from secure_jscc.objective import LossWeights
from secure_jscc.trainer import (
    CheckpointError,
    TrainingDiverged,
    TrainingSchedule,
    _adv_epoch,
    _legit_epoch,
    derive_seed,
    init_state,
    load_checkpoint,
    minimax_episode,
    module_fingerprint,
    optimizer_fingerprint,
    save_checkpoint,
    warmup_adversaries,
    warmup_legit,
)

TINY_CODEC = CodecConfig(
    height=16, width=16, channels=1, n_T=1, bandwidth_ratio=0.25,
    conv_stack=((4, 3, 2), (4, 3, 2), (8, 3, 1)),
)
LEGIT_SPEC = ChannelSpec("rayleigh", 20.0, fading_std=1.0)


def tiny_roster(n=2, std=1.0, num_classes=4):
    return tuple(
        EavesdropperSpec(
            id=i + 1,
            channel=ChannelSpec("rayleigh", 15.0, fading_std=std),
            secret_id="class",
            num_classes=num_classes,
        )
        for i in range(n)
    )


def tiny_schedule(**overrides):
    base = dict(
        batch_size=16, n_episodes=2, n_warmup=2, n_legit_epochs=1, n_adv_epochs=1,
        lr=1e-3, seed=5, eval_every=1, checkpoint_every=1, eval_repeats=1,
    )
    base.update(overrides)
    return TrainingSchedule(**base)


def tiny_data(n=48, seed=3):
    return synthetic_dataset(n, 16, 16, 1, num_classes=4, seed=seed)


def make_state(**sched_overrides):
    schedule = tiny_schedule(**sched_overrides)
    return init_state(TINY_CODEC, tiny_roster(), schedule, LEGIT_SPEC), schedule


class TestDeriveSeed:
    def test_stable(self):
        assert derive_seed(3, "order", 1) == derive_seed(3, "order", 1)

    def test_tag_sensitivity(self):
        seeds = {
            derive_seed(3, "order", 1),
            derive_seed(3, "order", 2),
            derive_seed(3, "chan", 1),
            derive_seed(4, "order", 1),
        }
        assert len(seeds) == 4


class TestSchedule:
    def test_defaults_match_full_scale_protocol(self):
        s = TrainingSchedule()
        assert s.batch_size == 128
        assert s.n_episodes == 200
        assert s.n_warmup == 50
        assert s.n_legit_epochs == 5 and s.n_adv_epochs == 5
        assert s.lr == 1e-4
        assert s.snr_legit_train_db == 20.0 and s.snr_eve_train_db == 15.0
        assert (s.adam_beta1, s.adam_beta2, s.adam_eps) == (0.9, 0.999, 1e-8)

    def test_validation(self):
        with pytest.raises(ValueError):
            TrainingSchedule(batch_size=0)
        with pytest.raises(ValueError):
            TrainingSchedule(lr=0.0)

    def test_roundtrip(self):
        s = tiny_schedule()
        assert TrainingSchedule.from_dict(s.to_dict()) == s


class TestInitState:
    def test_update_sets_disjoint(self):
        state, _ = make_state()
        codec_ids = {id(p) for p in state.opt_codec.param_groups[0]["params"]}
        for opt in state.opt_eves:
            eve_ids = {id(p) for p in opt.param_groups[0]["params"]}
            assert not (codec_ids & eve_ids)

    def test_same_seed_same_parameters(self):
        a, _ = make_state()
        b, _ = make_state()
        assert module_fingerprint(a.encoder) == module_fingerprint(b.encoder)
        assert module_fingerprint(a.eves[0]) == module_fingerprint(b.eves[0])

    def test_eve_init_keyed_by_id_not_position(self):
        roster = tiny_roster(2)
        schedule = tiny_schedule()
        fwd = init_state(TINY_CODEC, roster, schedule, LEGIT_SPEC)
        rev = init_state(TINY_CODEC, roster[::-1], schedule, LEGIT_SPEC)
        assert module_fingerprint(fwd.eves[0]) == module_fingerprint(rev.eves[1])
        assert module_fingerprint(fwd.eves[1]) == module_fingerprint(rev.eves[0])


class TestWarmupLegit:
    def test_adversaries_untouched_and_loss_decreases(self):
        state, schedule = make_state(n_warmup=4)
        ds = tiny_data(96)
        before = [module_fingerprint(net) for net in state.eves]
        before_opt = [optimizer_fingerprint(opt) for opt in state.opt_eves]
        warmup_legit(state, ds, schedule, LossWeights(w=5.0, alpha=0.1))
        assert [module_fingerprint(net) for net in state.eves] == before
        assert [optimizer_fingerprint(opt) for opt in state.opt_eves] == before_opt
        losses = state.history["warmup_legit"]
        assert losses[-1] <= losses[0] * 1.05  # smoke: trending down, 5% slack

    def test_weight_plays_no_role(self):
        a, schedule = make_state()
        b, _ = make_state()
        ds = tiny_data()
        warmup_legit(a, ds, schedule, LossWeights(w=0.0, alpha=0.1))
        warmup_legit(b, ds, schedule, LossWeights(w=100.0, alpha=0.1))
        assert a.history["warmup_legit"] == b.history["warmup_legit"]
        assert module_fingerprint(a.encoder) == module_fingerprint(b.encoder)


class TestWarmupAdversaries:
    def test_codec_untouched(self):
        state, schedule = make_state()
        ds = tiny_data()
        enc_fp = module_fingerprint(state.encoder)
        dec_fp = module_fingerprint(state.decoder)
        opt_fp = optimizer_fingerprint(state.opt_codec)
        warmup_adversaries(state, ds, schedule)
        assert module_fingerprint(state.encoder) == enc_fp
        assert module_fingerprint(state.decoder) == dec_fp
        assert optimizer_fingerprint(state.opt_codec) == opt_fp

    def test_accuracy_rises_above_chance(self):
        state, schedule = make_state(n_warmup=6, batch_size=32)
        ds = tiny_data(256, seed=9)
        warmup_legit(state, ds, schedule, LossWeights(w=0.0, alpha=0.1))
        warmup_adversaries(state, ds, schedule)
        rng = np.random.default_rng(0)
        spec = state.roster[0]
        hits, n = 0, len(ds)
        with torch.no_grad():
            x = state.encoder(ImageBatch(torch.from_numpy(ds.images)))
            z = apply_channel(x, spec.channel, rng)
            guess = adversary_guess(state.eves[0](z))
            hits = int((guess == torch.from_numpy(ds.labels["class"])).sum())
        acc = hits / n
        chance = 1.0 / spec.num_classes
        band = 3 * np.sqrt(chance * (1 - chance) / n)
        assert acc > chance + band

    def test_eve_order_permutation_invariance(self):
        roster = tiny_roster(2)
        schedule = tiny_schedule()
        ds = tiny_data()
        fwd = init_state(TINY_CODEC, roster, schedule, LEGIT_SPEC)
        rev = init_state(TINY_CODEC, roster[::-1], schedule, LEGIT_SPEC)
        warmup_adversaries(fwd, ds, schedule)
        warmup_adversaries(rev, ds, schedule)
        # eve id 1 ends in position 0 of fwd and position 1 of rev
        assert module_fingerprint(fwd.eves[0]) == module_fingerprint(rev.eves[1])
        assert module_fingerprint(fwd.eves[1]) == module_fingerprint(rev.eves[0])


class TestPhaseIsolation:
    def test_legit_phase_freezes_adversaries(self):
        state, schedule = make_state()
        ds = tiny_data()
        eve_fps = [module_fingerprint(net) for net in state.eves]
        eve_opt_fps = [optimizer_fingerprint(o) for o in state.opt_eves]
        _legit_epoch(state, ds, LossWeights(w=5.0, alpha=0.1), include_leakage=True)
        assert [module_fingerprint(net) for net in state.eves] == eve_fps
        assert [optimizer_fingerprint(o) for o in state.opt_eves] == eve_opt_fps

    def test_adv_phase_freezes_codec(self):
        state, schedule = make_state()
        ds = tiny_data()
        enc_fp = module_fingerprint(state.encoder)
        dec_fp = module_fingerprint(state.decoder)
        opt_fp = optimizer_fingerprint(state.opt_codec)
        _adv_epoch(state, ds)
        assert module_fingerprint(state.encoder) == enc_fp
        assert module_fingerprint(state.decoder) == dec_fp
        assert optimizer_fingerprint(state.opt_codec) == opt_fp

    def test_episode_counter_increments_once(self):
        state, schedule = make_state()
        ds = tiny_data()
        minimax_episode(state, ds, schedule, LossWeights(w=1.0, alpha=0.1))
        assert state.episode == 1


class TestWeightZeroReduction:
    def test_minimax_legit_phase_equals_warmup_epochs_exactly(self, tmp_path):
        state, _ = make_state()
        ds = tiny_data()
        ckpt = save_checkpoint(state, tmp_path / "base.sjc")
        weights = LossWeights(w=0.0, alpha=0.1)

        path_a = load_checkpoint(ckpt)
        losses_a = [
            _legit_epoch(path_a, ds, weights, include_leakage=False) for _ in range(2)
        ]

        path_b = load_checkpoint(ckpt)
        schedule_b = tiny_schedule(n_legit_epochs=2, n_adv_epochs=1)
        minimax_episode(path_b, ds, schedule_b, weights)
        means_b = path_b.history["episodes"][0]["legit"]

        means_a = [float(np.mean(l)) for l in losses_a]
        assert means_a == means_b  # exact float equality

    def test_nonzero_weight_changes_losses(self, tmp_path):
        state, _ = make_state()
        ds = tiny_data()
        ckpt = save_checkpoint(state, tmp_path / "base.sjc")
        a = load_checkpoint(ckpt)
        b = load_checkpoint(ckpt)
        la = _legit_epoch(a, ds, LossWeights(w=0.0, alpha=0.1), include_leakage=True)
        lb = _legit_epoch(b, ds, LossWeights(w=5.0, alpha=0.1), include_leakage=True)
        assert la != lb


class TestCheckpoint:
    def test_save_load_save_byte_identical(self, tmp_path):
        state, schedule = make_state()
        ds = tiny_data()
        warmup_legit(state, ds, schedule, LossWeights(w=0.0, alpha=0.1))
        p1 = save_checkpoint(state, tmp_path / "a.sjc")
        loaded = load_checkpoint(p1)
        p2 = save_checkpoint(loaded, tmp_path / "b.sjc")
        assert p1.read_bytes() == p2.read_bytes()

    def test_counters_and_tensor_count_preserved(self, tmp_path):
        state, schedule = make_state()
        ds = tiny_data()
        warmup_legit(state, ds, schedule, LossWeights(w=0.0, alpha=0.1))
        warmup_adversaries(state, ds, schedule)
        loaded = load_checkpoint(save_checkpoint(state, tmp_path / "c.sjc"))
        assert loaded.legit_epochs_done == state.legit_epochs_done
        assert loaded.adv_epochs_done == state.adv_epochs_done
        assert module_fingerprint(loaded.encoder) == module_fingerprint(state.encoder)
        assert optimizer_fingerprint(loaded.opt_codec) == optimizer_fingerprint(state.opt_codec)
        n_params = lambda s: sum(1 for _ in s.encoder.state_dict()) + sum(
            1 for _ in s.decoder.state_dict()
        )
        assert n_params(loaded) == n_params(state)

    def test_mismatched_codec_config_rejected(self, tmp_path):
        state, _ = make_state()
        path = save_checkpoint(state, tmp_path / "d.sjc")
        other = CodecConfig(
            height=16, width=16, channels=1, n_T=2, bandwidth_ratio=0.25,
            conv_stack=((4, 3, 2), (4, 3, 2), (8, 3, 1)),
        )
        with pytest.raises(CheckpointError):
            load_checkpoint(path, expected_codec=other)

    def test_wrong_magic_rejected(self, tmp_path):
        bad = tmp_path / "bad.sjc"
        bad.write_bytes(b"secure-jscc-ckpt/9\n" + b"\x00" * 32)
        with pytest.raises(CheckpointError):
            load_checkpoint(bad)

    def test_corrupt_header_rejected(self, tmp_path):
        state, _ = make_state()
        path = save_checkpoint(state, tmp_path / "e.sjc")
        raw = bytearray(path.read_bytes())
        raw[len(b"secure-jscc-ckpt/1\n") + 8] = ord("X")  # smash the JSON header
        bad = tmp_path / "f.sjc"
        bad.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError):
            load_checkpoint(bad)


class TestNaNPolicy:
    def test_non_finite_loss_aborts_with_diagnostic(self, monkeypatch):
        state, schedule = make_state()
        ds = tiny_data()
        monkeypatch.setattr(
            trainer_mod,
            "distortion",
            lambda *a, **k: torch.full((16,), float("nan")),
        )
        with pytest.raises(TrainingDiverged, match="legitimate phase"):
            warmup_legit(state, ds, schedule, LossWeights(w=0.0, alpha=0.1))


class TestChannelStochasticity:
    def test_consecutive_batches_draw_fresh_noise(self, monkeypatch):
        # 16 copies of one image and a vanishing learning rate: batch pixels
        # and parameters are identical batch-to-batch, so differing channel
        # outputs prove the noise/fading stream advances between batches.
        from secure_jscc.data import ImageDataset

        state, schedule = make_state(batch_size=8, lr=1e-30)
        one = tiny_data(1).images
        ds = ImageDataset(
            images=np.tile(one, (16, 1, 1, 1)),
            labels={"class": np.zeros(16, dtype=np.int64)},
            num_classes={"class": 4},
        )
        outputs = []
        real_apply = trainer_mod.apply_channel

        def recording_apply(x, spec, rng=None, **kwargs):
            y = real_apply(x, spec, rng, **kwargs)
            outputs.append(y.real.detach().clone())
            return y

        monkeypatch.setattr(trainer_mod, "apply_channel", recording_apply)
        _legit_epoch(state, ds, LossWeights(w=0.0, alpha=0.1), include_leakage=False)
        assert len(outputs) == 2
        assert not torch.equal(outputs[0], outputs[1])


class TestNonAlcAblation:
    def test_truth_target_route_differs_from_uniform_target(self, tmp_path):
        state, schedule = make_state()
        ds = tiny_data()
        ckpt = save_checkpoint(state, tmp_path / "s.sjc")
        weights = LossWeights(w=5.0, alpha=0.1)
        alc = load_checkpoint(ckpt)
        alt = load_checkpoint(ckpt)
        minimax_episode(alc, ds, schedule, weights, use_alc=True)
        minimax_episode(alt, ds, schedule, weights, use_alc=False)
        assert alc.history["episodes"][0]["legit"] != alt.history["episodes"][0]["legit"]
        assert module_fingerprint(alc.encoder) != module_fingerprint(alt.encoder)


def tiny_experiment_doc(tmp_out, seed=5, w=5.0, n_episodes=2):
    return {
        "version": "secure-jscc-config/1",
        "seed": seed,
        "scenario": "colluding",
        "output_dir": str(tmp_out),
        "dataset": {
            "name": "synthetic",
            "train_count": 48,
            "test_count": 24,
            "image_size": [16, 16, 1],
            "num_classes": 4,
        },
        "codec": {
            "n_T": 1,
            "bandwidth_ratio": 0.25,
            "conv_stack": [[4, 3, 2], [4, 3, 2], [8, 3, 1]],
        },
        "roster": {"count": 2, "fading_stds": [1.0, 1.2]},
        "loss": {"w": w, "alpha": 0.1},
        "schedule": {
            "batch_size": 16,
            "n_episodes": n_episodes,
            "n_warmup": 2,
            "n_legit_epochs": 1,
            "n_adv_epochs": 1,
            "lr": 1e-3,
            "eval_every": 1,
            "checkpoint_every": 1,
            "eval_repeats": 1,
        },
    }


def run_tiny_train(tmp_path, name, **doc_kwargs):
    from secure_jscc.cli import parse_config

    out = tmp_path / name
    experiment = parse_config(tiny_experiment_doc(out, **doc_kwargs))
    final = trainer_mod.train(experiment, out)
    return out, final, experiment


class TestTrainPipeline:
    def test_run_artifacts_and_determinism(self, tmp_path):
        out1, final1, _ = run_tiny_train(tmp_path, "run1")
        assert (out1 / "metrics.csv").is_file()
        assert (out1 / "run.log").is_file()
        assert final1.is_file()
        out2, _, _ = run_tiny_train(tmp_path, "run2")
        assert (out1 / "metrics.csv").read_bytes() == (out2 / "metrics.csv").read_bytes()

    def test_resume_matches_uninterrupted(self, tmp_path):
        out1, _, _ = run_tiny_train(tmp_path, "full")
        mid = out1 / "ckpt_ep1.sjc"
        assert mid.is_file()
        from secure_jscc.cli import parse_config

        out2 = tmp_path / "resumed"
        experiment = parse_config(tiny_experiment_doc(out2))
        trainer_mod.train(experiment, out2, resume_from=mid)
        rows1 = read_metrics_csv(out1 / "metrics.csv")
        rows2 = read_metrics_csv(out2 / "metrics.csv")
        final1 = [r for r in rows1 if r["tag"] == "final"][-1]
        final2 = [r for r in rows2 if r["tag"] == "final"][-1]
        assert final1 == final2

    def test_zero_episodes_stops_after_warmup(self, tmp_path):
        out, final, _ = run_tiny_train(tmp_path, "warmonly", n_episodes=0)
        final_state = load_checkpoint(final)
        warm_state = load_checkpoint(out / "ckpt_warmup.sjc")
        assert final_state.episode == 0
        assert module_fingerprint(final_state.encoder) == module_fingerprint(warm_state.encoder)
        assert module_fingerprint(final_state.eves[0]) == module_fingerprint(warm_state.eves[0])

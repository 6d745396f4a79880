import math

import numpy as np
import pytest
import torch

from secure_jscc.channel import ChannelSpec, ComplexSignal, apply_channel
from secure_jscc.codec import (
    GDN,
    CodecConfig,
    CodecError,
    Decoder,
    Encoder,
    ImageBatch,
    describe,
    power_normalize,
)


def cifar_cfg(n_T=4):
    return CodecConfig(height=32, width=32, channels=3, n_T=n_T)


class TestPowerNormalize:
    def test_unit_vector_scaled_to_sqrt_kp(self):
        re = torch.zeros(1, 4, 1)
        re[0, 0, 0] = 1.0
        out = power_normalize(ComplexSignal(re, torch.zeros(1, 4, 1)), 1.0)
        assert out.real[0, 0, 0] == pytest.approx(2.0, rel=1e-6)
        assert float(out.real.abs().sum()) == pytest.approx(2.0, rel=1e-6)

    def test_fixed_point(self):
        gen = torch.Generator().manual_seed(3)
        re = torch.randn(2, 16, 1, generator=gen, dtype=torch.float64)
        im = torch.randn(2, 16, 1, generator=gen, dtype=torch.float64)
        sig = ComplexSignal(re, im)
        scale = math.sqrt(16 * 1.0) / sig.magnitude_sq().sum(dim=1, keepdim=True).sqrt()
        fixed = ComplexSignal(re * scale, im * scale)
        out = power_normalize(fixed, 1.0)
        assert torch.allclose(out.real, fixed.real, rtol=1e-9)
        assert torch.allclose(out.imag, fixed.imag, rtol=1e-9)

    def test_norm_against_independent_summation(self):
        gen = torch.Generator().manual_seed(11)
        sig = ComplexSignal(
            torch.randn(3, 1024, 2, generator=gen),
            torch.randn(3, 1024, 2, generator=gen),
        )
        out = power_normalize(sig, 1.0)
        re = out.real.double().numpy()
        im = out.imag.double().numpy()
        for b in range(3):
            for ant in range(2):
                total = 0.0
                for s in range(1024):
                    total += re[b, s, ant] ** 2 + im[b, s, ant] ** 2
                assert abs(total - 1024.0) / 1024.0 < 1e-5

    def test_zero_norm_raises(self):
        sig = ComplexSignal(torch.zeros(1, 4, 1), torch.zeros(1, 4, 1))
        with pytest.raises(CodecError):
            power_normalize(sig, 1.0)

    def test_differentiable(self):
        re = torch.randn(1, 8, 1, requires_grad=True)
        im = torch.randn(1, 8, 1, requires_grad=True)
        out = power_normalize(ComplexSignal(re, im), 1.0)
        (out.real.sum() + out.imag.sum()).backward()
        assert torch.isfinite(re.grad).all() and torch.isfinite(im.grad).all()


class TestCodecConfig:
    def test_cifar_bandwidth(self):
        cfg = cifar_cfg()
        assert cfg.n == 3072
        assert cfg.k == 1024  # n/3 for the 1/3 compression ratio

    def test_latent_grid(self):
        assert cifar_cfg().latent_grid() == (32, 8, 8)

    def test_empty_stack_rejected(self):
        with pytest.raises(CodecError):
            CodecConfig(height=32, width=32, channels=3, conv_stack=())

    def test_incompatible_stride_schedule(self):
        with pytest.raises(CodecError):
            CodecConfig(
                height=30, width=30, channels=3,
                conv_stack=((16, 5, 2), (32, 5, 2), (32, 5, 1), (32, 5, 1), (32, 5, 1)),
            )

    def test_bandwidth_contract_enforced(self):
        with pytest.raises(CodecError):
            CodecConfig(
                height=32, width=32, channels=3,
                conv_stack=((16, 5, 2), (16, 5, 2), (16, 5, 1)),
            )

    def test_roundtrip(self):
        cfg = cifar_cfg(n_T=2)
        assert CodecConfig.from_dict(cfg.to_dict()) == cfg


class TestEncoder:
    def test_output_shape(self, tiny_cfg):
        enc = Encoder(tiny_cfg)
        u = ImageBatch(torch.rand(5, 16, 16, 1))
        x = enc(u)
        assert x.shape == (5, tiny_cfg.k, tiny_cfg.n_T)

    def test_cifar_shape(self):
        enc = Encoder(cifar_cfg())
        x = enc(ImageBatch(torch.rand(2, 32, 32, 3)))
        assert x.shape == (2, 1024, 4)

    def test_power_constraint_random_inputs_and_params(self, tiny_cfg):
        for trial in range(5):
            torch.manual_seed(trial)
            enc = Encoder(tiny_cfg)
            x = enc(ImageBatch(torch.rand(4, 16, 16, 1)))
            norms = x.magnitude_sq().sum(dim=1)
            target = tiny_cfg.k * tiny_cfg.power
            assert torch.allclose(
                norms, torch.full_like(norms, target), rtol=1e-5
            )

    def test_shape_mismatch(self, tiny_cfg):
        enc = Encoder(tiny_cfg)
        with pytest.raises(CodecError):
            enc(ImageBatch(torch.rand(1, 8, 8, 1)))


class TestDecoder:
    def test_output_in_unit_interval_and_shape(self, tiny_cfg):
        dec = Decoder(tiny_cfg)
        y = ComplexSignal(torch.randn(3, tiny_cfg.k), torch.randn(3, tiny_cfg.k))
        out = dec(y)
        assert out.shape == (3, 16, 16, 1)
        pixels = out.pixels.detach()
        assert float(pixels.min()) >= 0.0 and float(pixels.max()) <= 1.0

    def test_cifar_roundtrip_shape(self):
        cfg = cifar_cfg()
        enc, dec = Encoder(cfg), Decoder(cfg)
        u = ImageBatch(torch.rand(2, 32, 32, 3))
        y = apply_channel(enc(u), ChannelSpec("rayleigh", 20.0), np.random.default_rng(0))
        assert dec(y).shape == u.shape

    def test_untrained_random_input_finite(self, tiny_cfg):
        dec = Decoder(tiny_cfg)
        y = ComplexSignal(torch.randn(2, tiny_cfg.k) * 10, torch.randn(2, tiny_cfg.k) * 10)
        assert torch.isfinite(dec(y).pixels).all()

    def test_wrong_width_rejected(self, tiny_cfg):
        dec = Decoder(tiny_cfg)
        with pytest.raises(CodecError):
            dec(ComplexSignal(torch.randn(1, 10), torch.randn(1, 10)))


@pytest.mark.parametrize(
    "height,width,channels,ratio,stack",
    [
        (32, 32, 3, 1.0 / 3.0, ((16, 5, 2), (32, 5, 2), (32, 5, 1), (32, 5, 1), (32, 5, 1))),
        (64, 64, 3, 1.0 / 3.0, ((16, 5, 2), (32, 5, 2), (32, 5, 1), (32, 5, 1), (32, 5, 1))),
        (16, 16, 1, 0.25, ((4, 3, 2), (4, 3, 2), (8, 3, 1))),
    ],
)
def test_roundtrip_shape_across_sizes(height, width, channels, ratio, stack):
    cfg = CodecConfig(
        height=height, width=width, channels=channels,
        n_T=1, bandwidth_ratio=ratio, conv_stack=stack,
    )
    enc, dec = Encoder(cfg), Decoder(cfg)
    u = ImageBatch(torch.rand(2, height, width, channels))
    y = apply_channel(enc(u), ChannelSpec("awgn", 20.0), np.random.default_rng(0))
    assert dec(y).shape == (2, height, width, channels)


class TestGDN:
    def test_identity_configuration_inverse_pair(self):
        fwd = GDN(6)
        inv = GDN(6, inverse=True)
        fwd.set_identity_()
        inv.set_identity_()
        x = torch.randn(2, 6, 5, 5)
        out = inv(fwd(x))
        assert torch.allclose(out, x, atol=1e-5)

    def test_default_parameters_positive(self):
        layer = GDN(4)
        x = torch.randn(1, 4, 3, 3)
        assert torch.isfinite(layer(x)).all()

    def test_inverse_scales_up(self):
        x = torch.ones(1, 3, 2, 2)
        fwd, inv = GDN(3), GDN(3, inverse=True)
        assert float(inv(x).mean()) > float(fwd(x).mean())


class TestDifferentiability:
    def test_end_to_end_gradients_nonzero(self, tiny_cfg):
        enc, dec = Encoder(tiny_cfg), Decoder(tiny_cfg)
        u = ImageBatch(torch.rand(2, 16, 16, 1))
        y = apply_channel(enc(u), ChannelSpec("rayleigh", 20.0), np.random.default_rng(5))
        loss = (dec(y).pixels - u.pixels).square().mean()
        loss.backward()
        grads = [p.grad for p in enc.parameters()]
        assert all(g is not None and torch.isfinite(g).all() for g in grads)
        assert any(float(g.abs().max()) > 0 for g in grads)


class TestDescribe:
    def test_encoder_output_reals(self):
        summary = describe(cifar_cfg())
        assert summary.encoder_output_reals == 2 * 1024 * 4
        assert summary.k == 1024 and summary.n == 3072

    def test_antenna_count_only_changes_head(self):
        one = describe(cifar_cfg(n_T=1))
        four = describe(cifar_cfg(n_T=4))
        # all layers but the last conv block match shape-for-shape
        enc_one = [r for r in one.encoder_layers if r.name == "Conv2d"]
        enc_four = [r for r in four.encoder_layers if r.name == "Conv2d"]
        assert [r.output_shape for r in enc_one[:-1]] == [r.output_shape for r in enc_four[:-1]]
        assert enc_one[-1].output_shape[0] * 4 == enc_four[-1].output_shape[0]

    def test_layer_param_totals(self):
        summary = describe(cifar_cfg())
        assert summary.encoder_params == sum(
            r.param_count for r in summary.encoder_layers
        )


class TestImageBatch:
    def test_range_validation(self):
        with pytest.raises(CodecError):
            ImageBatch(torch.full((1, 2, 2, 1), 1.5))
        with pytest.raises(CodecError):
            ImageBatch(torch.full((1, 2, 2, 1), -0.1))

    def test_dim_validation(self):
        with pytest.raises(CodecError):
            ImageBatch(torch.rand(2, 2, 2))

    def test_uint8_export_roundtrip(self):
        raw = torch.arange(256, dtype=torch.float32).reshape(1, 16, 16, 1) / 255.0
        batch = ImageBatch(raw)
        assert (batch.to_uint8().reshape(-1) == np.arange(256)).all()

import numpy as np
import pytest
import torch

from secure_jscc.codec import CodecConfig


@pytest.fixture
def tiny_cfg():
    """Small codec for fast tests: 16x16x1 images, ratio 1/4, k=64, n_T=2."""
    return CodecConfig(
        height=16,
        width=16,
        channels=1,
        n_T=2,
        bandwidth_ratio=0.25,
        conv_stack=((4, 3, 2), (4, 3, 2), (8, 3, 1)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)

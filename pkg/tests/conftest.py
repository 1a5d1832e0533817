import numpy as np
import pytest

from models.lm import ModelConfig


@pytest.fixture
def make_config():
    """Small 64-bit model configs; keyword arguments override the defaults."""
    def factory(**overrides):
        values = dict(depth=2, hidden=4, embed=3, vocab_size=5, precision=64)
        values.update(overrides)
        return ModelConfig(**values)
    return factory


@pytest.fixture
def rng():
    return np.random.default_rng(42)

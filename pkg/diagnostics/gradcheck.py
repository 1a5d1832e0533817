"""Central finite-difference oracle for the hand-derived gradients."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from models.errors import ContractViolation
from models.lm import (CarryState, ModelConfig, ModelParams, backward_window, forward_window,
                       init_model)
from models.tensor import Rng

REL_FLOOR = 1e-3


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = REL_FLOOR) -> np.ndarray:
    """|a - n| / max(|a|, |n|, floor), elementwise."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def numeric_gradient(loss_fn: Callable[[], float], array: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """∂loss/∂array by central differences, perturbing `array` in place."""
    grad = np.zeros_like(array, dtype=np.float64)
    flat = array.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + eps
        plus = loss_fn()
        flat[i] = original - eps
        minus = loss_fn()
        flat[i] = original
        out[i] = (plus - minus) / (2 * eps)
    return grad


@dataclass
class GradCheckReport:
    errors: Dict[str, float] = field(default_factory=dict)  # tensor name → max relative error

    @property
    def max_rel_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def worst_tensor(self) -> Optional[str]:
        return max(self.errors, key=self.errors.get) if self.errors else None

    def passed(self, tolerance: float = 1e-5) -> bool:
        return self.max_rel_error < tolerance


def check_model_gradients(params: ModelParams, config: ModelConfig, tokens_in, tokens_target,
                          carry: Optional[CarryState] = None, eps: float = 1e-5) -> GradCheckReport:
    """Compare backward_window against finite differences on every parameter (no dropout)."""
    if config.precision != 64:
        raise ContractViolation('diagnostics', 'gradient checks need 64-bit precision')

    def loss_fn():
        loss, _, _, _ = forward_window(params, config, tokens_in, tokens_target, carry)
        return loss

    _, _, cache, _ = forward_window(params, config, tokens_in, tokens_target, carry)
    analytic = backward_window(params, config, cache).params.named_tensors()

    report = GradCheckReport()
    for name, array in params.named_tensors().items():
        numeric = numeric_gradient(loss_fn, array, eps)
        report.errors[name] = float(relative_error(analytic[name], numeric).max())
    return report


def random_gradcheck(config: ModelConfig, seed: int = 0, window: int = 3,
                     batch_size: int = 1) -> GradCheckReport:
    """Gradient check on random tokens and a random non-zero carry-in state."""
    params = init_model(config, seed)
    rng = Rng(seed).stream('gradcheck')
    # Spread the biases away from their constant init so every coordinate is exercised.
    for name, array in params.named_tensors().items():
        if array.ndim == 1:
            array += rng.uniform(-0.5, 0.5, size=array.shape)
    tokens = rng.integers(0, config.vocab_size, size=(batch_size, window + 1))
    carry = CarryState.zeros(config, batch_size)
    carry.s[...] = rng.uniform(-0.5, 0.5, size=carry.s.shape)
    if carry.s_hat is not None:
        carry.s_hat[...] = rng.uniform(-0.5, 0.5, size=carry.s_hat.shape)
    return check_model_gradients(params, config, tokens[:, :-1], tokens[:, 1:], carry)

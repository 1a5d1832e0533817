"""Highway State Gating: a per-neuron gated mix of the previous output state and
the RHN output.

    g     = σ(W_R ŝ_prev + W_F s_L + b_G)
    ŝ     = g·ŝ_prev + (1 - g)·s_L
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..errors import ContractViolation
from ..tensor import Rng, dsigmoid, matvec, matvec_t, outer, sigmoid, sum_rows, uniform


@dataclass
class HsgParams:
    w_r: np.ndarray
    w_f: np.ndarray
    b_g: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.b_g.shape[0]

    def tensors(self) -> Dict[str, np.ndarray]:
        return {'w_r': self.w_r, 'w_f': self.w_f, 'b_g': self.b_g}

    def zeros_like(self) -> HsgParams:
        return HsgParams(**{k: np.zeros_like(v) for k, v in self.tensors().items()})


@dataclass
class HsgStepCache:
    s_hat_prev: np.ndarray
    s_l: np.ndarray
    g: np.ndarray
    s_hat: np.ndarray
    gate_mask: Optional[np.ndarray] = None


def init_hsg_params(hidden: int, gate_bias: float, rng: Rng, dtype: np.dtype,
                    prefix: str = 'hsg') -> HsgParams:
    scale = 1.0 / math.sqrt(hidden)
    return HsgParams(
        w_r=uniform(rng.stream(f'{prefix}.w_r'), (hidden, hidden), scale, dtype),
        w_f=uniform(rng.stream(f'{prefix}.w_f'), (hidden, hidden), scale, dtype),
        b_g=np.full(hidden, gate_bias, dtype=dtype),
    )


def hsg_forward(s_hat_prev: np.ndarray, s_l: np.ndarray, params: HsgParams,
                gate_mask: Optional[np.ndarray] = None) -> Tuple[np.ndarray, HsgStepCache]:
    """One HSG step.

    `gate_mask` is an optional dropout mask on ŝ_prev as it enters the gate
    pre-activation; the mixing path always sees the unmasked state.
    """
    n = params.hidden_size
    if s_hat_prev.shape != s_l.shape or s_l.shape[-1] != n:
        raise ContractViolation(
            'hsg', f'states {s_hat_prev.shape} and {s_l.shape} do not match hidden size {n}')

    gate_in = s_hat_prev if gate_mask is None else s_hat_prev * gate_mask
    g = sigmoid(matvec(params.w_r, gate_in) + matvec(params.w_f, s_l) + params.b_g)
    s_hat = g * s_hat_prev + (1.0 - g) * s_l
    return s_hat, HsgStepCache(s_hat_prev=s_hat_prev, s_l=s_l, g=g, s_hat=s_hat,
                               gate_mask=gate_mask)


def hsg_backward(grad_s_hat: np.ndarray, cache: HsgStepCache, params: HsgParams,
                 grads: Optional[HsgParams] = None) -> Tuple[np.ndarray, np.ndarray, HsgParams]:
    """Returns (grad_s_hat_prev, grad_s_l, grads), accumulating into `grads`."""
    if cache.g.shape[-1] != params.hidden_size or grad_s_hat.shape != cache.g.shape:
        raise ContractViolation('hsg', 'cache does not match parameters or upstream gradient')
    if grads is None:
        grads = params.zeros_like()

    g = cache.g
    grad_prev = grad_s_hat * g
    grad_s_l = grad_s_hat * (1.0 - g)

    da = grad_s_hat * (cache.s_hat_prev - cache.s_l) * dsigmoid(g)
    gate_in = cache.s_hat_prev if cache.gate_mask is None else cache.s_hat_prev * cache.gate_mask

    grads.w_r += outer(da, gate_in)
    grads.w_f += outer(da, cache.s_l)
    grads.b_g += sum_rows(da)

    back_r = matvec_t(params.w_r, da)
    if cache.gate_mask is not None:
        back_r = back_r * cache.gate_mask
    grad_prev = grad_prev + back_r
    grad_s_l = grad_s_l + matvec_t(params.w_f, da)
    return grad_prev, grad_s_l, grads


def collect_gate_values(caches: Sequence[HsgStepCache]) -> np.ndarray:
    """Flatten every cached gate value, step by step, in neuron order."""
    if not caches:
        raise ContractViolation('hsg', 'no HSG caches to collect gate values from')
    return np.concatenate([np.ravel(cache.g) for cache in caches])

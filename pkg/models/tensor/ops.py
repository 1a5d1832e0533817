"""Dense linear-algebra substrate.

Vectors are 1-D arrays; a 2-D array is read as a batch of row vectors, so every
op below applies the same per-vector rule across the batch rows.
"""
from __future__ import annotations

from typing import Optional, Tuple, Union

import numpy as np
import numpy.typing as npt

from ..errors import ContractViolation, NumericalFailure

Matrix2D = npt.NDArray[np.floating]
Vector = npt.NDArray[np.floating]

DTYPES = {32: np.float32, 64: np.float64}


def dtype_for(precision: int) -> np.dtype:
    try:
        return np.dtype(DTYPES[precision])
    except KeyError:
        raise ContractViolation('tensor', f'unsupported precision {precision}') from None


def matvec(m: Matrix2D, v: Vector) -> Vector:
    """m · v, row-wise when `v` is a batch."""
    if m.ndim != 2 or m.shape[1] != v.shape[-1]:
        raise ContractViolation(
            'tensor', f'matvec: matrix {m.shape} does not match vector {v.shape}')
    return v @ m.T


def matvec_t(m: Matrix2D, v: Vector) -> Vector:
    """mᵀ · v, the product used on the way back."""
    if m.ndim != 2 or m.shape[0] != v.shape[-1]:
        raise ContractViolation(
            'tensor', f'matvec_t: matrix {m.shape} does not match vector {v.shape}')
    return v @ m


def outer(d: Vector, v: Vector) -> Matrix2D:
    """d ⊗ v, summed over batch rows when both are batches."""
    batch_axes = list(range(d.ndim - 1))
    return np.tensordot(d, v, axes=(batch_axes, batch_axes))


def sum_rows(d: Vector) -> Vector:
    return d.reshape(-1, d.shape[-1]).sum(axis=0)


def sigmoid(v: Vector) -> Vector:
    # Split by sign so neither branch can overflow; saturates to exact 0/1.
    v = np.asarray(v)
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ez = np.exp(v[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def tanh(v: Vector) -> Vector:
    return np.tanh(v)


def dsigmoid(s: Vector) -> Vector:
    """Derivative of sigmoid, given its output."""
    return s * (1.0 - s)


def dtanh(h: Vector) -> Vector:
    """Derivative of tanh, given its output."""
    return 1.0 - h * h


def softmax_xent(logits: Vector,
                 target: Union[int, npt.NDArray[np.integer]]) -> Tuple[Union[float, Vector], Vector]:
    """Cross-entropy of softmax(logits) at `target` and its gradient wrt logits.

    For a batch of logits `target` is one id per row and the loss is per row.
    """
    logits = np.asarray(logits)
    n_classes = logits.shape[-1]
    target = np.asarray(target)
    if np.any(target < 0) or np.any(target >= n_classes):
        raise ContractViolation(
            'tensor', f'softmax_xent: target out of range for {n_classes} classes')

    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_probs = shifted - log_norm
    grad = np.exp(log_probs)

    if logits.ndim == 1:
        loss = -float(log_probs[target])
        grad[target] -= 1.0
        return loss, grad

    rows = np.arange(logits.shape[0])
    loss = -log_probs[rows, target]
    grad[rows, target] -= 1.0
    return loss, grad


def check_finite(source: str, name: str, array: np.ndarray) -> None:
    if not np.all(np.isfinite(array)):
        raise NumericalFailure(source, f'non-finite values in {name}', tensor=name)


def uniform(rng: np.random.Generator, shape: Tuple[int, ...], scale: float,
            dtype: Optional[np.dtype] = None) -> np.ndarray:
    values = rng.uniform(-scale, scale, size=shape)
    return values.astype(dtype or np.float64)

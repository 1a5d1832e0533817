from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np

from models.errors import ContractViolation, NumericalFailure
from models.lm import ModelParams, is_bias

logger = logging.getLogger(__name__)

SPIKE_FACTOR = 100


def global_norm(grads: ModelParams) -> float:
    return math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64)))
                         for g in grads.named_tensors().values()))


def clip_gradients(grads: ModelParams, clip_norm: Optional[float]) -> float:
    """Rescale `grads` in place so their global L2 norm is at most `clip_norm`.

    Returns the norm before clipping.
    """
    norm = global_norm(grads)
    if clip_norm is not None and norm > clip_norm:
        if norm > SPIKE_FACTOR * clip_norm:
            logger.warning('Gradient norm %.4g is over %dx the clip threshold', norm, SPIKE_FACTOR)
        scale = clip_norm / norm
        for g in grads.named_tensors().values():
            g *= scale
        logger.debug('Clipped gradient norm %.4g to %.4g', norm, clip_norm)
    return norm


def sgd_step(params: ModelParams, grads: ModelParams, lr: float, l2_lambda: float = 0.0,
             clip_norm: Optional[float] = None) -> ModelParams:
    """Plain SGD with L2 decay on matrices only; updates `params` in place."""
    named_params = params.named_tensors()
    named_grads = grads.named_tensors()
    if named_params.keys() != named_grads.keys():
        raise ContractViolation('trainer', 'gradients do not match parameters')

    for name, g in named_grads.items():
        if g.shape != named_params[name].shape:
            raise ContractViolation(
                'trainer', f'gradient {name} has shape {g.shape}, expected {named_params[name].shape}')
        if not np.all(np.isfinite(g)):
            raise NumericalFailure('trainer', f'non-finite gradient in {name}', tensor=name)

    clip_gradients(grads, clip_norm)

    for name, p in named_params.items():
        g = named_grads[name]
        if l2_lambda and not is_bias(name):
            p -= lr * (g + l2_lambda * p)
        else:
            p -= lr * g
    return params

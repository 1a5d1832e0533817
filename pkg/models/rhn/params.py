from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from ..errors import ContractViolation
from ..tensor import Rng, uniform


@dataclass
class RhnInputParams:
    """Input projections, only applied at the first highway layer."""
    w_h: np.ndarray
    w_t: np.ndarray
    w_c: Optional[np.ndarray] = None  # absent when gates are coupled

    def tensors(self) -> Dict[str, np.ndarray]:
        named = {'w_h': self.w_h, 'w_t': self.w_t}
        if self.w_c is not None:
            named['w_c'] = self.w_c
        return named

    def zeros_like(self) -> RhnInputParams:
        return RhnInputParams(**{k: np.zeros_like(v) for k, v in self.tensors().items()})


@dataclass
class RhnLayerParams:
    r_h: np.ndarray
    r_t: np.ndarray
    b_h: np.ndarray
    b_t: np.ndarray
    layer_index: int
    r_c: Optional[np.ndarray] = None
    b_c: Optional[np.ndarray] = None

    @property
    def coupled(self) -> bool:
        return self.r_c is None

    @property
    def hidden_size(self) -> int:
        return self.r_h.shape[0]

    def tensors(self) -> Dict[str, np.ndarray]:
        named = {'r_h': self.r_h, 'r_t': self.r_t}
        if self.r_c is not None:
            named['r_c'] = self.r_c
        named.update({'b_h': self.b_h, 'b_t': self.b_t})
        if self.b_c is not None:
            named['b_c'] = self.b_c
        return named

    def zeros_like(self) -> RhnLayerParams:
        zeros = {k: np.zeros_like(v) for k, v in self.tensors().items()}
        return RhnLayerParams(layer_index=self.layer_index, **zeros)


def init_rhn_params(hidden: int, embed: int, depth: int, coupled: bool,
                    gate_bias: float, rng: Rng, dtype: np.dtype,
                    prefix: str = 'rhn') -> tuple[RhnInputParams, List[RhnLayerParams]]:
    """Uniform ±1/√n weights, b_T = gate_bias, b_H = b_C = 0.

    Every tensor draws from its own named stream.
    """
    if hidden < 1 or embed < 1 or depth < 1:
        raise ContractViolation('rhn', f'invalid dims n={hidden} m={embed} L={depth}')

    scale = 1.0 / math.sqrt(hidden)

    def draw(name, shape):
        return uniform(rng.stream(f'{prefix}.{name}'), shape, scale, dtype)

    input_params = RhnInputParams(
        w_h=draw('input.w_h', (hidden, embed)),
        w_t=draw('input.w_t', (hidden, embed)),
        w_c=None if coupled else draw('input.w_c', (hidden, embed)),
    )

    layers = []
    for index in range(1, depth + 1):
        name = f'layer{index}'
        layers.append(RhnLayerParams(
            r_h=draw(f'{name}.r_h', (hidden, hidden)),
            r_t=draw(f'{name}.r_t', (hidden, hidden)),
            r_c=None if coupled else draw(f'{name}.r_c', (hidden, hidden)),
            b_h=np.zeros(hidden, dtype=dtype),
            b_t=np.full(hidden, gate_bias, dtype=dtype),
            b_c=None if coupled else np.zeros(hidden, dtype=dtype),
            layer_index=index,
        ))
    return input_params, layers

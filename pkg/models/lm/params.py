from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from ..errors import ContractViolation
from ..hsg import HsgParams, init_hsg_params
from ..rhn import RhnInputParams, RhnLayerParams, init_rhn_params
from ..tensor import Rng, dtype_for, uniform
from .config import ModelConfig


@dataclass
class ModelParams:
    embedding: np.ndarray        # V×m
    rhn_input: RhnInputParams
    rhn_layers: List[RhnLayerParams]
    out_w: np.ndarray            # n×V
    out_b: np.ndarray            # V
    hsg: Optional[HsgParams] = None

    def named_tensors(self) -> Dict[str, np.ndarray]:
        """Stable name → array view of every parameter."""
        named = {'embedding': self.embedding}
        for key, value in self.rhn_input.tensors().items():
            named[f'rhn.input.{key}'] = value
        for layer in self.rhn_layers:
            for key, value in layer.tensors().items():
                named[f'rhn.layer{layer.layer_index}.{key}'] = value
        if self.hsg is not None:
            for key, value in self.hsg.tensors().items():
                named[f'hsg.{key}'] = value
        named['output.w'] = self.out_w
        named['output.b'] = self.out_b
        return named

    def zeros_like(self) -> ModelParams:
        return ModelParams(
            embedding=np.zeros_like(self.embedding),
            rhn_input=self.rhn_input.zeros_like(),
            rhn_layers=[layer.zeros_like() for layer in self.rhn_layers],
            out_w=np.zeros_like(self.out_w),
            out_b=np.zeros_like(self.out_b),
            hsg=None if self.hsg is None else self.hsg.zeros_like(),
        )

    def copy(self) -> ModelParams:
        return copy.deepcopy(self)

    def count(self) -> int:
        return sum(array.size for array in self.named_tensors().values())


def is_bias(name: str) -> bool:
    """Biases are exempt from weight decay."""
    leaf = name.rsplit('.', 1)[-1]
    return leaf == 'b' or leaf.startswith('b_')


def parameter_shapes(config: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    n, m, V = config.hidden, config.embedding_size, config.vocab_size
    gates = ('h', 't') if config.coupled else ('h', 't', 'c')

    shapes = {'embedding': (V, m)}
    for gate in gates:
        shapes[f'rhn.input.w_{gate}'] = (n, m)
    for index in range(1, config.depth + 1):
        for gate in gates:
            shapes[f'rhn.layer{index}.r_{gate}'] = (n, n)
        for gate in gates:
            shapes[f'rhn.layer{index}.b_{gate}'] = (n,)
    if config.use_hsg:
        shapes.update({'hsg.w_r': (n, n), 'hsg.w_f': (n, n), 'hsg.b_g': (n,)})
    shapes['output.w'] = (n, V)
    shapes['output.b'] = (V,)
    return shapes


def count_parameters(config: ModelConfig) -> int:
    return sum(math.prod(shape) for shape in parameter_shapes(config).values())


def init_model(config: ModelConfig, seed: int) -> ModelParams:
    dtype = dtype_for(config.precision)
    rng = Rng(seed)
    n, m, V = config.hidden, config.embedding_size, config.vocab_size

    rhn_input, rhn_layers = init_rhn_params(
        n, m, config.depth, config.coupled, config.gate_bias_init, rng, dtype)
    params = ModelParams(
        embedding=uniform(rng.stream('embedding'), (V, m), 1.0 / math.sqrt(m), dtype),
        rhn_input=rhn_input,
        rhn_layers=rhn_layers,
        out_w=uniform(rng.stream('output.w'), (n, V), 1.0 / math.sqrt(n), dtype),
        out_b=np.zeros(V, dtype=dtype),
        hsg=init_hsg_params(n, config.gate_bias_init, rng, dtype) if config.use_hsg else None,
    )
    validate_params(params, config)
    return params


def validate_params(params: ModelParams, config: ModelConfig) -> None:
    expected = parameter_shapes(config)
    actual = {name: array.shape for name, array in params.named_tensors().items()}
    if actual != expected:
        missing = sorted(set(expected) - set(actual))
        extra = sorted(set(actual) - set(expected))
        wrong = sorted(k for k in set(expected) & set(actual) if expected[k] != actual[k])
        raise ContractViolation(
            'lm_network',
            f'params do not match config (missing={missing}, extra={extra}, shape={wrong})')


def params_from_tensors(config: ModelConfig, tensors: Mapping[str, np.ndarray]) -> ModelParams:
    """Rebuild a ModelParams from `named_tensors()` output (e.g. a checkpoint)."""
    expected = parameter_shapes(config)
    if set(tensors) != set(expected):
        raise ContractViolation(
            'lm_network', f'tensor set does not match config: {sorted(set(tensors) ^ set(expected))}')

    def get(name):
        return tensors.get(name)

    layers = []
    for index in range(1, config.depth + 1):
        prefix = f'rhn.layer{index}'
        layers.append(RhnLayerParams(
            r_h=get(f'{prefix}.r_h'), r_t=get(f'{prefix}.r_t'), r_c=get(f'{prefix}.r_c'),
            b_h=get(f'{prefix}.b_h'), b_t=get(f'{prefix}.b_t'), b_c=get(f'{prefix}.b_c'),
            layer_index=index,
        ))
    params = ModelParams(
        embedding=get('embedding'),
        rhn_input=RhnInputParams(w_h=get('rhn.input.w_h'), w_t=get('rhn.input.w_t'),
                                 w_c=get('rhn.input.w_c')),
        rhn_layers=layers,
        out_w=get('output.w'),
        out_b=get('output.b'),
        hsg=HsgParams(w_r=get('hsg.w_r'), w_f=get('hsg.w_f'), b_g=get('hsg.b_g'))
        if config.use_hsg else None,
    )
    validate_params(params, config)
    return params

"""Recurrent Highway Network transition and its exact reverse pass.

One time step stacks L highway layers:

    h_l = tanh(W_H x·[l=1] + R_H s_{l-1} + b_H)
    t_l = σ(W_T x·[l=1] + R_T s_{l-1} + b_T)
    c_l = σ(W_C x·[l=1] + R_C s_{l-1} + b_C)      or 1 - t_l when coupled
    s_l = h_l·t_l + s_{l-1}·c_l
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ContractViolation
from ..tensor import dsigmoid, dtanh, matvec, matvec_t, outer, sigmoid, sum_rows, tanh
from .params import RhnInputParams, RhnLayerParams


@dataclass
class RhnLayerCache:
    s_prev: np.ndarray
    h: np.ndarray
    t: np.ndarray
    c: np.ndarray
    s_out: np.ndarray
    layer_index: int


@dataclass
class RhnStepCache:
    x: np.ndarray
    layers: List[RhnLayerCache] = field(default_factory=list)

    @property
    def states(self) -> List[np.ndarray]:
        """s_0 .. s_L for the step."""
        if not self.layers:
            return []
        return [self.layers[0].s_prev] + [layer.s_out for layer in self.layers]


@dataclass
class RhnGrads:
    input: RhnInputParams
    layers: List[RhnLayerParams]


def _check_layer(x, s_prev, layer, input_params, coupled):
    n = layer.hidden_size
    if s_prev.shape[-1] != n:
        raise ContractViolation('rhn', f'state size {s_prev.shape[-1]} != hidden size {n}')
    if coupled != layer.coupled:
        raise ContractViolation(
            'rhn', f'layer {layer.layer_index} parameters do not match coupled={coupled}')
    if layer.layer_index == 1:
        if x is None or input_params is None:
            raise ContractViolation('rhn', 'layer 1 needs the input and its projections')
    elif x is not None or input_params is not None:
        raise ContractViolation(
            'rhn', f'input supplied to layer {layer.layer_index}; only layer 1 reads x')


def rhn_layer_forward(x: Optional[np.ndarray], s_prev: np.ndarray, layer: RhnLayerParams,
                      input_params: Optional[RhnInputParams],
                      coupled: bool) -> Tuple[np.ndarray, RhnLayerCache]:
    _check_layer(x, s_prev, layer, input_params, coupled)

    pre_h = matvec(layer.r_h, s_prev) + layer.b_h
    pre_t = matvec(layer.r_t, s_prev) + layer.b_t
    if x is not None:
        pre_h = pre_h + matvec(input_params.w_h, x)
        pre_t = pre_t + matvec(input_params.w_t, x)

    h = tanh(pre_h)
    t = sigmoid(pre_t)
    if coupled:
        c = 1.0 - t
    else:
        pre_c = matvec(layer.r_c, s_prev) + layer.b_c
        if x is not None:
            pre_c = pre_c + matvec(input_params.w_c, x)
        c = sigmoid(pre_c)

    s_out = h * t + s_prev * c
    return s_out, RhnLayerCache(s_prev=s_prev, h=h, t=t, c=c, s_out=s_out,
                                layer_index=layer.layer_index)


def rhn_cell_forward(x: np.ndarray, s_in: np.ndarray, input_params: RhnInputParams,
                     layers: Sequence[RhnLayerParams],
                     coupled: bool) -> Tuple[np.ndarray, RhnStepCache]:
    """Run all L layers for one time step; s_0 is the incoming state."""
    if not layers:
        raise ContractViolation('rhn', 'cell needs at least one layer')
    for position, layer in enumerate(layers, start=1):
        if layer.layer_index != position:
            raise ContractViolation(
                'rhn', f'layer at position {position} has index {layer.layer_index}')

    cache = RhnStepCache(x=x)
    s = s_in
    for layer in layers:
        first = layer.layer_index == 1
        s, layer_cache = rhn_layer_forward(
            x if first else None, s, layer, input_params if first else None, coupled)
        cache.layers.append(layer_cache)
    return s, cache


def zeros_like_rhn(input_params: RhnInputParams,
                   layers: Sequence[RhnLayerParams]) -> RhnGrads:
    return RhnGrads(input=input_params.zeros_like(),
                    layers=[layer.zeros_like() for layer in layers])


def rhn_cell_backward(grad_s_l: np.ndarray, cache: RhnStepCache, input_params: RhnInputParams,
                      layers: Sequence[RhnLayerParams], coupled: bool,
                      grads: Optional[RhnGrads] = None) -> Tuple[np.ndarray, np.ndarray, RhnGrads]:
    """Reverse of `rhn_cell_forward`.

    Returns (grad_x, grad_s_in, grads); parameter gradients are added into
    `grads` when one is passed, so repeated calls accumulate.
    """
    if len(cache.layers) != len(layers):
        raise ContractViolation(
            'rhn', f'cache has {len(cache.layers)} layers, params have {len(layers)}')
    if grads is None:
        grads = zeros_like_rhn(input_params, layers)

    ds = grad_s_l
    grad_x = np.zeros_like(cache.x)
    for layer, lc, lg in zip(reversed(layers), reversed(cache.layers), reversed(grads.layers)):
        if lc.layer_index != layer.layer_index or lc.s_prev.shape[-1] != layer.hidden_size:
            raise ContractViolation('rhn', f'cache does not match layer {layer.layer_index}')

        dh = ds * lc.t
        dt = ds * lc.h
        dc = ds * lc.s_prev
        ds_prev = ds * lc.c
        if coupled:
            dt = dt - dc

        da_h = dh * dtanh(lc.h)
        da_t = dt * dsigmoid(lc.t)

        lg.r_h += outer(da_h, lc.s_prev)
        lg.r_t += outer(da_t, lc.s_prev)
        lg.b_h += sum_rows(da_h)
        lg.b_t += sum_rows(da_t)
        ds_prev = ds_prev + matvec_t(layer.r_h, da_h) + matvec_t(layer.r_t, da_t)

        da_c = None
        if not coupled:
            da_c = dc * dsigmoid(lc.c)
            lg.r_c += outer(da_c, lc.s_prev)
            lg.b_c += sum_rows(da_c)
            ds_prev = ds_prev + matvec_t(layer.r_c, da_c)

        if layer.layer_index == 1:
            gi = grads.input
            gi.w_h += outer(da_h, cache.x)
            gi.w_t += outer(da_t, cache.x)
            grad_x = matvec_t(input_params.w_h, da_h) + matvec_t(input_params.w_t, da_t)
            if da_c is not None:
                gi.w_c += outer(da_c, cache.x)
                grad_x = grad_x + matvec_t(input_params.w_c, da_c)

        ds = ds_prev

    return grad_x, ds, grads

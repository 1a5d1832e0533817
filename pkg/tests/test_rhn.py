import math

import numpy as np
import pytest

from diagnostics import numeric_gradient, relative_error
from models.errors import ContractViolation
from models.rhn import (RhnInputParams, RhnLayerParams, init_rhn_params, rhn_cell_backward,
                        rhn_cell_forward, rhn_layer_forward)
from models.tensor import Rng


def make_rhn(hidden=3, embed=2, depth=2, coupled=True, gate_bias=-1.0, seed=0):
    return init_rhn_params(hidden, embed, depth, coupled, gate_bias, Rng(seed), np.dtype(np.float64))


def scalar_layer(x, s, w, layer, coupled):
    """Loop-over-scalars reference for one highway layer."""
    n = len(s)
    out = []
    for i in range(n):
        pre = {}
        for gate in ('h', 't', 'c'):
            if coupled and gate == 'c':
                continue
            total = getattr(layer, f'b_{gate}')[i]
            total += sum(getattr(layer, f'r_{gate}')[i][j] * s[j] for j in range(n))
            if x is not None:
                total += sum(getattr(w, f'w_{gate}')[i][j] * x[j] for j in range(len(x)))
            pre[gate] = total
        h = math.tanh(pre['h'])
        t = 1.0 / (1.0 + math.exp(-pre['t']))
        c = 1.0 - t if coupled else 1.0 / (1.0 + math.exp(-pre['c']))
        out.append(h * t + s[i] * c)
    return np.array(out)


def force_gates(layers, bias):
    for layer in layers:
        layer.b_t[...] = bias


class TestLayerForward:

    def test_closed_gate_passes_state_through(self, rng):
        input_params, layers = make_rhn()
        force_gates(layers, -1e9)
        s_prev = rng.normal(size=3)
        s_out, cache = rhn_layer_forward(rng.normal(size=2), s_prev, layers[0], input_params, True)
        np.testing.assert_array_equal(s_out, s_prev)
        np.testing.assert_array_equal(cache.t, 0.0)

    def test_open_gate_emits_candidate(self, rng):
        input_params, layers = make_rhn()
        force_gates(layers, 1e9)
        s_out, cache = rhn_layer_forward(rng.normal(size=2), rng.normal(size=3), layers[0],
                                         input_params, True)
        np.testing.assert_array_equal(s_out, cache.h)

    @pytest.mark.parametrize('coupled', [True, False])
    def test_matches_scalar_reference(self, coupled):
        input_params, layers = init_rhn_params(2, 2, 1, coupled, -2.5, Rng(42), np.dtype(np.float64))
        rng = np.random.default_rng(42)
        for layer in layers:
            layer.b_h[...] = rng.normal(size=2)
        x, s_prev = rng.normal(size=2), rng.normal(size=2)
        s_out, _ = rhn_layer_forward(x, s_prev, layers[0], input_params, coupled)
        expected = scalar_layer(x, s_prev, input_params, layers[0], coupled)
        np.testing.assert_allclose(s_out, expected, rtol=1e-12, atol=1e-15)

    def test_gate_ranges_and_coupling(self, rng):
        input_params, layers = make_rhn(hidden=5, embed=4)
        _, cache = rhn_layer_forward(rng.normal(size=4) * 5, rng.normal(size=5), layers[0],
                                     input_params, True)
        assert np.all((cache.t > 0) & (cache.t < 1))
        assert np.all(np.abs(cache.h) < 1)
        np.testing.assert_array_equal(cache.c, 1.0 - cache.t)

    def test_input_only_at_first_layer(self, rng):
        input_params, layers = make_rhn()
        with pytest.raises(ContractViolation):
            rhn_layer_forward(rng.normal(size=2), rng.normal(size=3), layers[1], input_params, True)
        with pytest.raises(ContractViolation):
            rhn_layer_forward(None, rng.normal(size=3), layers[0], None, True)

    def test_state_size_mismatch(self, rng):
        input_params, layers = make_rhn()
        with pytest.raises(ContractViolation):
            rhn_layer_forward(rng.normal(size=2), rng.normal(size=4), layers[0], input_params, True)

    def test_coupling_flag_must_match_params(self, rng):
        input_params, layers = make_rhn(coupled=False)
        with pytest.raises(ContractViolation):
            rhn_layer_forward(rng.normal(size=2), rng.normal(size=3), layers[0], input_params, True)


class TestCellForward:

    def test_depth_one_equals_single_layer(self, rng):
        input_params, layers = make_rhn(depth=1)
        x, s_in = rng.normal(size=2), rng.normal(size=3)
        s_cell, _ = rhn_cell_forward(x, s_in, input_params, layers, True)
        s_layer, _ = rhn_layer_forward(x, s_in, layers[0], input_params, True)
        np.testing.assert_array_equal(s_cell, s_layer)

    @pytest.mark.parametrize('depth', [1, 3, 8])
    def test_closed_gates_compose_to_identity(self, depth, rng):
        input_params, layers = make_rhn(depth=depth)
        force_gates(layers, -1e9)
        s_in = rng.normal(size=3)
        s_l, _ = rhn_cell_forward(rng.normal(size=2), s_in, input_params, layers, True)
        np.testing.assert_array_equal(s_l, s_in)

    def test_matches_chained_scalar_reference(self):
        input_params, layers = init_rhn_params(4, 2, 3, True, -1.0, Rng(5), np.dtype(np.float64))
        rng = np.random.default_rng(5)
        x, s_in = rng.normal(size=2), rng.normal(size=4)
        s_l, cache = rhn_cell_forward(x, s_in, input_params, layers, True)

        expected = s_in
        for layer in layers:
            expected = scalar_layer(x if layer.layer_index == 1 else None, expected,
                                    input_params, layer, True)
        np.testing.assert_allclose(s_l, expected, rtol=1e-12, atol=1e-15)
        assert len(cache.states) == 4
        np.testing.assert_array_equal(cache.states[0], s_in)

    @pytest.mark.parametrize('depth', [1, 10, 40, 64])
    def test_saturated_gates_hold_state(self, depth, rng):
        input_params, layers = make_rhn(depth=depth)
        for p in [input_params.w_t] + [layer.r_t for layer in layers]:
            p[...] = 0.0
        force_gates(layers, -35.0)
        s_in = rng.uniform(-1, 1, size=3)
        s_l, _ = rhn_cell_forward(rng.normal(size=2), s_in, input_params, layers, True)
        assert np.max(np.abs(s_l - s_in)) < 1e-12

    def test_layer_order_is_checked(self):
        input_params, layers = make_rhn(depth=2)
        with pytest.raises(ContractViolation):
            rhn_cell_forward(np.zeros(2), np.zeros(3), input_params, layers[::-1], True)

    def test_deterministic(self, rng):
        input_params, layers = make_rhn(depth=3)
        x, s_in = rng.normal(size=2), rng.normal(size=3)
        a, _ = rhn_cell_forward(x, s_in, input_params, layers, True)
        b, _ = rhn_cell_forward(x, s_in, input_params, layers, True)
        np.testing.assert_array_equal(a, b)


class TestCellBackward:

    @staticmethod
    def check(depth, coupled, hidden=3, embed=2, batch=None, seed=0):
        input_params, layers = make_rhn(hidden, embed, depth, coupled, gate_bias=-0.5, seed=seed)
        rng = np.random.default_rng(seed)
        for layer in layers:
            for bias in (layer.b_h, layer.b_t, layer.b_c):
                if bias is not None:
                    bias += rng.uniform(-0.5, 0.5, size=bias.shape)
        shape = (batch,) if batch else ()
        x = rng.normal(size=shape + (embed,))
        s_in = rng.normal(size=shape + (hidden,))
        weights = rng.normal(size=shape + (hidden,))

        def loss():
            s_l, _ = rhn_cell_forward(x, s_in, input_params, layers, coupled)
            return float(np.sum(weights * s_l))

        _, cache = rhn_cell_forward(x, s_in, input_params, layers, coupled)
        grad_x, grad_s, grads = rhn_cell_backward(weights, cache, input_params, layers, coupled)

        worst = 0.0
        for analytic, array in [(grad_x, x), (grad_s, s_in)]:
            worst = max(worst, relative_error(analytic, numeric_gradient(loss, array)).max())
        for g, p in [(grads.input, input_params)] + list(zip(grads.layers, layers)):
            for name, array in p.tensors().items():
                numeric = numeric_gradient(loss, array)
                worst = max(worst, relative_error(g.tensors()[name], numeric).max())
        return worst

    @pytest.mark.parametrize('coupled', [True, False])
    @pytest.mark.parametrize('depth', [1, 2, 4])
    def test_matches_finite_differences(self, depth, coupled):
        assert self.check(depth, coupled) < 1e-6

    def test_batch_matches_finite_differences(self):
        assert self.check(2, True, hidden=4, embed=3, batch=3, seed=3) < 1e-6

    def test_zero_upstream_gives_zero(self, rng):
        input_params, layers = make_rhn(depth=3, coupled=False)
        _, cache = rhn_cell_forward(rng.normal(size=2), rng.normal(size=3), input_params, layers,
                                    False)
        grad_x, grad_s, grads = rhn_cell_backward(np.zeros(3), cache, input_params, layers, False)
        assert not grad_x.any() and not grad_s.any()
        for g in [grads.input] + grads.layers:
            assert not any(t.any() for t in g.tensors().values())

    def test_gradients_accumulate(self, rng):
        input_params, layers = make_rhn(depth=2)
        _, cache = rhn_cell_forward(rng.normal(size=2), rng.normal(size=3), input_params, layers,
                                    True)
        upstream = rng.normal(size=3)
        _, _, once = rhn_cell_backward(upstream, cache, input_params, layers, True)
        _, _, twice = rhn_cell_backward(upstream, cache, input_params, layers, True)
        rhn_cell_backward(upstream, cache, input_params, layers, True, twice)
        for a, b in zip(once.layers, twice.layers):
            for name in a.tensors():
                np.testing.assert_allclose(b.tensors()[name], 2 * a.tensors()[name], rtol=1e-14)

    def test_saturated_closed_gates_pass_gradient(self, rng):
        input_params, layers = make_rhn(depth=5)
        force_gates(layers, -1e9)
        _, cache = rhn_cell_forward(rng.normal(size=2), rng.normal(size=3), input_params, layers,
                                    True)
        upstream = rng.normal(size=3)
        grad_x, grad_s, _ = rhn_cell_backward(upstream, cache, input_params, layers, True)
        np.testing.assert_array_equal(grad_s, upstream)
        np.testing.assert_array_equal(grad_x, 0.0)

    def test_cache_mismatch(self, rng):
        input_params, layers = make_rhn(depth=3)
        _, cache = rhn_cell_forward(rng.normal(size=2), rng.normal(size=3), input_params, layers,
                                    True)
        with pytest.raises(ContractViolation):
            rhn_cell_backward(np.ones(3), cache, input_params, layers[:2], True)


class TestInit:

    def test_shapes_and_biases(self):
        input_params, layers = init_rhn_params(6, 4, 3, False, -2.5, Rng(1), np.dtype(np.float64))
        assert input_params.w_c.shape == (6, 4)
        assert [layer.layer_index for layer in layers] == [1, 2, 3]
        for layer in layers:
            np.testing.assert_array_equal(layer.b_t, -2.5)
            np.testing.assert_array_equal(layer.b_h, 0.0)
            np.testing.assert_array_equal(layer.b_c, 0.0)
            assert np.all(np.abs(layer.r_h) <= 1 / math.sqrt(6))

    def test_coupled_has_no_carry_gate(self):
        input_params, layers = make_rhn(coupled=True)
        assert input_params.w_c is None
        assert all(layer.coupled and layer.r_c is None for layer in layers)

    def test_layers_do_not_share_weights(self):
        _, layers = make_rhn(depth=2)
        assert not np.array_equal(layers[0].r_h, layers[1].r_h)

    def test_invalid_dims(self):
        with pytest.raises(ContractViolation):
            init_rhn_params(0, 2, 1, True, -2.5, Rng(0), np.dtype(np.float64))

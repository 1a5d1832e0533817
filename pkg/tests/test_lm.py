import math

import numpy as np
import pytest
from pydantic import ValidationError

from diagnostics import (check_model_gradients, gradient_probe, numeric_gradient, random_gradcheck,
                         relative_error)
from models.errors import ContractViolation
from models.lm import (CarryState, DropoutMasks, ModelConfig, ModelParams, backward_window,
                       count_parameters, evaluate_perplexity, evaluate_token_losses,
                       forward_window, init_model, iter_windows, load_checkpoint,
                       parameter_shapes, perplexity, save_checkpoint)


def zero_projection(params):
    params.out_w[...] = 0.0
    params.out_b[...] = 0.0
    return params


def without_hsg(params):
    return ModelParams(embedding=params.embedding, rhn_input=params.rhn_input,
                       rhn_layers=params.rhn_layers, out_w=params.out_w, out_b=params.out_b)


class TestModelConfig:

    def test_defaults(self):
        config = ModelConfig()
        assert (config.depth, config.hidden, config.embedding_size) == (10, 830, 830)
        assert config.coupled and config.use_hsg
        assert config.gate_bias_init == -2.5
        assert not config.uses_dropout

    @pytest.mark.parametrize('overrides', [
        {'precision': 16},
        {'depth': 0},
        {'dropout_state': 1.0},
        {'dropout_output': -0.1},
        {'use_hsg': False, 'dropout_hsg': 0.2},
    ])
    def test_rejects(self, overrides):
        with pytest.raises(ValidationError):
            ModelConfig(**overrides)


class TestInitModel:

    def test_parameter_count_closed_form(self):
        n, m, V, L = 830, 830, 10000, 10
        expected = V * m + 2 * n * m + L * (2 * n * n + 2 * n) + (2 * n * n + n) + n * V + V
        config = ModelConfig(depth=L, hidden=n, embed=m, vocab_size=V)
        assert count_parameters(config) == expected

    def test_uncoupled_vanilla_count(self):
        n, m, V, L = 5, 3, 7, 4
        expected = V * m + 3 * n * m + L * (3 * n * n + 3 * n) + n * V + V
        config = ModelConfig(depth=L, hidden=n, embed=m, vocab_size=V, coupled=False, use_hsg=False)
        assert count_parameters(config) == expected
        assert init_model(config, 0).count() == expected

    def test_gate_biases(self, make_config):
        params = init_model(make_config(depth=3), 0)
        for layer in params.rhn_layers:
            np.testing.assert_array_equal(layer.b_t, -2.5)
        np.testing.assert_array_equal(params.hsg.b_g, -2.5)
        np.testing.assert_array_equal(params.out_b, 0.0)

    def test_deterministic_in_seed(self, make_config):
        config = make_config()
        a, b = init_model(config, 3).named_tensors(), init_model(config, 3).named_tensors()
        c = init_model(config, 4).named_tensors()
        for name in a:
            np.testing.assert_array_equal(a[name], b[name])
        assert not np.array_equal(a['rhn.layer1.r_h'], c['rhn.layer1.r_h'])

    def test_named_tensors_follow_shapes(self, make_config):
        config = make_config(coupled=False)
        named = init_model(config, 0).named_tensors()
        assert {k: v.shape for k, v in named.items()} == parameter_shapes(config)
        assert list(named)[0] == 'embedding' and list(named)[-1] == 'output.b'

    def test_precision(self, make_config):
        params = init_model(make_config(precision=32), 0)
        assert all(a.dtype == np.float32 for a in params.named_tensors().values())


class TestForwardWindow:

    @pytest.mark.parametrize('use_hsg', [True, False])
    def test_zero_projection_is_uniform(self, use_hsg, make_config):
        config = make_config(use_hsg=use_hsg)
        params = zero_projection(init_model(config, 0))
        loss, logits, cache, _ = forward_window(params, config, [0, 1, 2, 3], [1, 2, 3, 4])
        assert loss == pytest.approx(math.log(5), rel=1e-12)
        assert logits.shape == (1, 4, 5)
        assert cache.losses.shape == (1, 4)

    def test_scalar_reference(self):
        config = ModelConfig(depth=1, hidden=2, embed=2, vocab_size=3)
        params = init_model(config, 9)
        params.out_b[...] = [0.1, -0.2, 0.3]
        loss, _, _, carry = forward_window(params, config, [2], [1])

        layer, inp, hsg = params.rhn_layers[0], params.rhn_input, params.hsg
        x = params.embedding[2]
        h = np.tanh(inp.w_h @ x + layer.b_h)
        t = 1 / (1 + np.exp(-(inp.w_t @ x + layer.b_t)))
        s = h * t
        g = 1 / (1 + np.exp(-(hsg.w_f @ s + hsg.b_g)))
        s_hat = (1 - g) * s
        logits = s_hat @ params.out_w + params.out_b
        expected = -(logits[1] - math.log(np.exp(logits).sum()))

        assert loss == pytest.approx(expected, rel=1e-12)
        np.testing.assert_allclose(carry.s_hat[0], s_hat, rtol=1e-12)
        np.testing.assert_allclose(carry.s[0], s, rtol=1e-12)

    def test_closed_hsg_equals_vanilla(self, make_config, rng):
        config = make_config(depth=3)
        params = init_model(config, 1)
        params.hsg.b_g[...] = -1e9
        vanilla_config = config.copy(update={'use_hsg': False})
        tokens = rng.integers(0, 5, size=(2, 13))

        loss, logits, _, _ = forward_window(params, config, tokens[:, :-1], tokens[:, 1:])
        loss_v, logits_v, _, _ = forward_window(without_hsg(params), vanilla_config,
                                                tokens[:, :-1], tokens[:, 1:])
        assert loss == loss_v
        np.testing.assert_array_equal(logits, logits_v)

    def test_closed_hsg_equals_vanilla_over_a_long_corpus(self, make_config, rng):
        config = make_config(depth=3)
        params = init_model(config, 4)
        params.hsg.b_g[...] = -1e9
        corpus = rng.integers(0, 5, size=1000)
        losses = evaluate_token_losses(params, config, corpus, window=35)
        vanilla_config = config.copy(update={'use_hsg': False})
        losses_v = evaluate_token_losses(without_hsg(params), vanilla_config, corpus, window=35)
        assert losses.shape == (999,)
        np.testing.assert_array_equal(losses, losses_v)

    @pytest.mark.parametrize('use_hsg', [True, False])
    def test_state_carries_across_windows(self, use_hsg, make_config, rng):
        config = make_config(use_hsg=use_hsg)
        params = init_model(config, 2)
        ids = rng.integers(0, 5, size=13)
        whole, _, _, _ = forward_window(params, config, ids[:12], ids[1:13])
        first, _, _, carry = forward_window(params, config, ids[:6], ids[1:7])
        second, _, _, _ = forward_window(params, config, ids[6:12], ids[7:13], carry)
        assert whole == pytest.approx((first + second) / 2, rel=1e-10)

    def test_masks_are_reused_every_step(self, make_config, rng):
        config = make_config(dropout_embedding=0.5, dropout_state=0.3, dropout_output=0.4,
                             dropout_hsg=0.2)
        params = init_model(config, 0)
        masks = DropoutMasks.sample(config, 3, np.random.default_rng(0))
        for mask, rate in [(masks.embedding, 0.5), (masks.state, 0.3), (masks.output, 0.4),
                           (masks.hsg, 0.2)]:
            assert set(np.unique(mask)) <= {0.0, 1 / (1 - rate)}

        tokens = rng.integers(0, 5, size=(3, 8))
        _, _, cache, _ = forward_window(params, config, tokens[:, :-1], tokens[:, 1:], masks=masks)
        for step in cache.steps:
            np.testing.assert_array_equal(step.x, params.embedding[step.tokens] * masks.embedding)
            np.testing.assert_array_equal(step.y, step.hsg.s_hat * masks.output)
            assert step.hsg.gate_mask is masks.hsg

    def test_rejects_bad_tokens(self, make_config):
        config = make_config()
        params = init_model(config, 0)
        with pytest.raises(ContractViolation):
            forward_window(params, config, [0, 5], [1, 2])
        with pytest.raises(ContractViolation):
            forward_window(params, config, [0, 1], [1])
        with pytest.raises(ContractViolation):
            forward_window(params, config, [], [])

    def test_rejects_mismatched_carry(self, make_config):
        config = make_config()
        params = init_model(config, 0)
        vanilla_carry = CarryState.zeros(config.copy(update={'use_hsg': False}))
        with pytest.raises(ContractViolation):
            forward_window(params, config, [0], [1], vanilla_carry)
        with pytest.raises(ContractViolation):
            forward_window(params, config, [[0], [1]], [[1], [2]], CarryState.zeros(config, 3))


class TestFrozenState:
    """HSG gates forced open keep ŝ fixed and pass its gradient through unchanged."""

    def test_state_is_unchanged_over_a_hundred_steps(self, make_config, rng):
        config = make_config(depth=3)
        params = init_model(config, 3)
        params.hsg.b_g[...] = 1e9
        carry = CarryState.zeros(config)
        carry.s[...] = rng.uniform(-0.5, 0.5, size=carry.s.shape)
        carry.s_hat[...] = rng.uniform(-0.5, 0.5, size=carry.s_hat.shape)
        tokens = rng.integers(0, 5, size=101)

        _, _, cache, carry_out = forward_window(params, config, tokens[:-1], tokens[1:], carry)
        assert len(cache.steps) == 100
        assert np.max(np.abs(carry_out.s_hat - carry.s_hat)) == 0.0

    def test_state_gradient_norm_is_constant_over_a_hundred_steps(self, make_config, rng):
        config = make_config(depth=3)
        params = init_model(config, 3)
        params.hsg.b_g[...] = 1e9
        report = gradient_probe(params, config, rng.integers(0, 5, size=110), t=5, max_lag=100)
        assert len(report.rows) == 101
        np.testing.assert_allclose(report.ratios, 1.0, rtol=1e-12)


class TestBackwardWindow:

    @pytest.mark.parametrize('coupled', [True, False])
    @pytest.mark.parametrize('use_hsg', [True, False])
    def test_full_model_gradient_check(self, coupled, use_hsg, make_config):
        report = random_gradcheck(make_config(coupled=coupled, use_hsg=use_hsg), seed=0, window=3)
        assert report.passed(1e-5), report.errors
        assert set(report.errors) == set(parameter_shapes(make_config(coupled=coupled,
                                                                      use_hsg=use_hsg)))

    def test_batched_gradient_check(self, make_config):
        report = random_gradcheck(make_config(depth=1), seed=5, window=4, batch_size=3)
        assert report.max_rel_error < 1e-5

    def test_gradient_check_with_dropout_masks(self, make_config, rng):
        config = make_config(dropout_embedding=0.3, dropout_state=0.3, dropout_output=0.3,
                             dropout_hsg=0.3)
        params = init_model(config, 4)
        masks = DropoutMasks.sample(config, 2, np.random.default_rng(4))
        tokens = rng.integers(0, 5, size=(2, 4))

        def loss():
            return forward_window(params, config, tokens[:, :-1], tokens[:, 1:], masks=masks)[0]

        _, _, cache, _ = forward_window(params, config, tokens[:, :-1], tokens[:, 1:], masks=masks)
        analytic = backward_window(params, config, cache, masks).params.named_tensors()
        for name, array in params.named_tensors().items():
            assert relative_error(analytic[name], numeric_gradient(loss, array)).max() < 1e-5, name

    def test_rate_zero_masks_are_a_no_op(self, make_config, rng):
        config = make_config()
        params = init_model(config, 0)
        masks = DropoutMasks.sample(config, 2, np.random.default_rng(0))
        tokens = rng.integers(0, 5, size=(2, 5))
        _, _, plain, _ = forward_window(params, config, tokens[:, :-1], tokens[:, 1:])
        _, _, masked, _ = forward_window(params, config, tokens[:, :-1], tokens[:, 1:], masks=masks)
        a = backward_window(params, config, plain).params.named_tensors()
        b = backward_window(params, config, masked, masks).params.named_tensors()
        for name in a:
            np.testing.assert_array_equal(a[name], b[name])

    def test_linear_in_loss_scale(self, make_config, rng):
        config = make_config()
        params = init_model(config, 0)
        tokens = rng.integers(0, 5, size=(2, 5))
        _, _, cache, _ = forward_window(params, config, tokens[:, :-1], tokens[:, 1:])
        base = backward_window(params, config, cache).params.named_tensors()
        doubled = backward_window(params, config, cache,
                                  step_weights=[2 / 8] * 4).params.named_tensors()
        for name in base:
            np.testing.assert_allclose(doubled[name], 2 * base[name], rtol=1e-12, atol=1e-300)

    def test_carry_gradient_flows_with_closed_transform_gates(self, make_config, rng):
        config = make_config()
        params = init_model(config, 0)
        for layer in params.rhn_layers:
            layer.b_t[...] = -1e9
        carry = CarryState.zeros(config)
        carry.s_hat[...] = rng.normal(size=carry.s_hat.shape)
        _, _, cache, _ = forward_window(params, config, [1, 2], [2, 3], carry)
        grads = backward_window(params, config, cache)
        assert np.abs(grads.carry).max() > 0

    def test_gradient_check_needs_double_precision(self, make_config):
        config = make_config(precision=32)
        with pytest.raises(ContractViolation):
            check_model_gradients(init_model(config, 0), config, [0], [1])

    def test_cache_from_other_config(self, make_config):
        config = make_config()
        params = init_model(config, 0)
        _, _, cache, _ = forward_window(params, config, [0, 1], [1, 2])
        other = make_config(depth=3)
        with pytest.raises(ContractViolation):
            backward_window(init_model(other, 0), other, cache)


class TestEvaluation:

    @pytest.mark.parametrize('vocab_size', [4, 10000])
    def test_uniform_model_perplexity(self, vocab_size, make_config, rng):
        config = make_config(vocab_size=vocab_size)
        params = zero_projection(init_model(config, 0))
        corpus = rng.integers(0, vocab_size, size=50)
        assert evaluate_perplexity(params, config, corpus, window=7) == pytest.approx(
            vocab_size, rel=1e-6)

    def test_perplexity_overflows_to_inf(self):
        assert perplexity(np.array([1.0, 3.0])) == pytest.approx(math.exp(2.0))
        assert perplexity(np.array([800.0, 900.0])) == math.inf

    def test_token_losses_cover_every_target(self, make_config, rng):
        config = make_config()
        params = init_model(config, 0)
        ids = rng.integers(0, 5, size=23)
        losses = evaluate_token_losses(params, config, ids, window=5)
        assert losses.shape == (22,)
        whole, _, _, _ = forward_window(params, config, ids[:-1], ids[1:])
        assert losses.mean() == pytest.approx(whole, rel=1e-10)

    def test_iter_windows(self):
        ids = np.arange(11)
        windows = list(iter_windows(ids, 4))
        assert [len(w[0]) for w in windows] == [4, 4, 2]
        np.testing.assert_array_equal(np.concatenate([t for _, t in windows]), np.arange(1, 11))

    def test_short_corpus(self, make_config):
        config = make_config()
        with pytest.raises(ContractViolation):
            evaluate_perplexity(init_model(config, 0), config, [1])


class TestCheckpoint:

    def test_save_and_load(self, make_config, tmp_path):
        config = make_config(coupled=False, precision=32)
        params = init_model(config, 6)
        path = save_checkpoint(tmp_path / 'model.ckpt', params, config, meta={'epoch': 3})
        checkpoint = load_checkpoint(path)

        assert checkpoint.config.dict() == config.dict()
        assert checkpoint.meta == {'epoch': 3}
        loaded = checkpoint.params.named_tensors()
        for name, array in params.named_tensors().items():
            assert loaded[name].dtype == np.float32
            np.testing.assert_array_equal(loaded[name], array)
        assert not (tmp_path / 'model.ckpt.tmp').exists()

    def test_header_is_text(self, make_config, tmp_path):
        config = make_config()
        save_checkpoint(tmp_path / 'model.ckpt', init_model(config, 0), config)
        header = (tmp_path / 'model.ckpt').read_bytes().split(b'\nend\n')[0].decode().split('\n')
        assert header[0] == 'HIGHWAY-LM 1'
        assert header[1].startswith('config {')
        assert header[2] == 'tensor embedding f8 5x3 0'
        assert header[3] == 'tensor rhn.input.w_h f8 4x3 120'

    def test_not_a_checkpoint(self, tmp_path):
        (tmp_path / 'junk.ckpt').write_bytes(b'hello\nend\n')
        with pytest.raises(ContractViolation):
            load_checkpoint(tmp_path / 'junk.ckpt')
        with pytest.raises(ContractViolation):
            load_checkpoint(tmp_path / 'missing.ckpt')

"""Embedding → RHN (+ HSG) unrolled over a window → projection → cross-entropy.

Token arrays are (batch, time); a 1-D array is a single stream.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ContractViolation
from ..hsg import HsgStepCache, hsg_backward, hsg_forward
from ..rhn import RhnGrads, RhnStepCache, rhn_cell_backward, rhn_cell_forward
from ..tensor import check_finite, dtype_for, matvec, matvec_t, outer, softmax_xent, sum_rows
from .config import ModelConfig
from .params import ModelParams

logger = logging.getLogger(__name__)

MAX_LOG_PERPLEXITY = 700.0


@dataclass
class CarryState:
    """State handed from one window to the next.

    `s` is the last RHN output s_L; `s_hat` the last HSG output (HSG models only).
    """
    s: np.ndarray
    s_hat: Optional[np.ndarray] = None

    @classmethod
    def zeros(cls, config: ModelConfig, batch_size: int = 1) -> CarryState:
        dtype = dtype_for(config.precision)
        shape = (batch_size, config.hidden)
        return cls(s=np.zeros(shape, dtype=dtype),
                   s_hat=np.zeros(shape, dtype=dtype) if config.use_hsg else None)

    @property
    def recurrent(self) -> np.ndarray:
        """The state the next RHN step reads."""
        return self.s if self.s_hat is None else self.s_hat

    def copy(self) -> CarryState:
        return CarryState(s=self.s.copy(), s_hat=None if self.s_hat is None else self.s_hat.copy())


@dataclass
class DropoutMasks:
    """Variational masks: sampled once per window, reused at every step."""
    embedding: Optional[np.ndarray] = None
    state: Optional[np.ndarray] = None
    output: Optional[np.ndarray] = None
    hsg: Optional[np.ndarray] = None

    @classmethod
    def sample(cls, config: ModelConfig, batch_size: int,
               rng: np.random.Generator) -> DropoutMasks:
        dtype = dtype_for(config.precision)

        def mask(rate, size):
            keep = rng.random((batch_size, size)) >= rate
            return (keep / (1.0 - rate)).astype(dtype)

        n, m = config.hidden, config.embedding_size
        return cls(
            embedding=mask(config.dropout_embedding, m),
            state=mask(config.dropout_state, n),
            output=mask(config.dropout_output, n),
            hsg=mask(config.dropout_hsg, n) if config.use_hsg else None,
        )


@dataclass
class StepRecord:
    tokens: np.ndarray
    x: np.ndarray               # embedded (and masked) input
    s_rec: np.ndarray           # recurrent state entering layer 1, after masking
    rhn: RhnStepCache
    hsg: Optional[HsgStepCache]
    y: np.ndarray               # masked output state read by the projection
    logits: np.ndarray
    losses: np.ndarray
    dlogits: np.ndarray


@dataclass
class UnrolledCache:
    steps: List[StepRecord] = field(default_factory=list)
    carry_in: Optional[CarryState] = None
    carry_out: Optional[CarryState] = None

    @property
    def batch_size(self) -> int:
        return self.steps[0].tokens.shape[0]

    @property
    def losses(self) -> np.ndarray:
        """Per-token losses, (batch, time)."""
        return np.stack([step.losses for step in self.steps], axis=1)

    @property
    def hsg_caches(self) -> List[HsgStepCache]:
        return [step.hsg for step in self.steps if step.hsg is not None]


@dataclass
class WindowGrads:
    params: ModelParams
    carry: np.ndarray  # gradient wrt the recurrent carry-in; dropped by truncated BPTT


def _as_batch(tokens, name: str) -> np.ndarray:
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim == 1:
        tokens = tokens[None, :]
    if tokens.ndim != 2:
        raise ContractViolation('lm_network', f'{name} must be (batch, time), got {tokens.shape}')
    return tokens


def forward_window(params: ModelParams, config: ModelConfig, tokens_in, tokens_target,
                   carry: Optional[CarryState] = None,
                   masks: Optional[DropoutMasks] = None
                   ) -> Tuple[float, np.ndarray, UnrolledCache, CarryState]:
    """Unroll the model over one window.

    Returns (mean loss, logits (batch, time, V), cache, new carry).
    """
    inputs = _as_batch(tokens_in, 'tokens_in')
    targets = _as_batch(tokens_target, 'tokens_target')
    if inputs.shape != targets.shape:
        raise ContractViolation(
            'lm_network', f'inputs {inputs.shape} and targets {targets.shape} differ')
    if inputs.shape[1] == 0:
        raise ContractViolation('lm_network', 'empty window')
    V = config.vocab_size
    for name, ids in (('input', inputs), ('target', targets)):
        if ids.min() < 0 or ids.max() >= V:
            raise ContractViolation('lm_network', f'{name} token id outside [0, {V})')

    batch_size = inputs.shape[0]
    if carry is None:
        carry = CarryState.zeros(config, batch_size)
    if carry.recurrent.shape != (batch_size, config.hidden):
        raise ContractViolation(
            'lm_network', f'carry {carry.recurrent.shape} != ({batch_size}, {config.hidden})')
    if config.use_hsg != (carry.s_hat is not None):
        raise ContractViolation('lm_network', 'carry state does not match use_hsg')
    masks = masks or DropoutMasks()

    cache = UnrolledCache(carry_in=carry)
    s_l, s_hat = carry.s, carry.s_hat
    for step in range(inputs.shape[1]):
        x = params.embedding[inputs[:, step]]
        if masks.embedding is not None:
            x = x * masks.embedding

        prev = s_l if s_hat is None else s_hat
        s_rec = prev if masks.state is None else prev * masks.state
        s_l, rhn_cache = rhn_cell_forward(
            x, s_rec, params.rhn_input, params.rhn_layers, config.coupled)

        hsg_cache = None
        out = s_l
        if config.use_hsg:
            s_hat, hsg_cache = hsg_forward(s_hat, s_l, params.hsg, masks.hsg)
            out = s_hat

        y = out if masks.output is None else out * masks.output
        logits = matvec(params.out_w.T, y) + params.out_b
        losses, dlogits = softmax_xent(logits, targets[:, step])
        cache.steps.append(StepRecord(
            tokens=inputs[:, step], x=x, s_rec=s_rec, rhn=rhn_cache, hsg=hsg_cache,
            y=y, logits=logits, losses=losses, dlogits=dlogits,
        ))

    cache.carry_out = CarryState(s=s_l, s_hat=s_hat)
    mean_loss = float(cache.losses.mean())
    if not math.isfinite(mean_loss):
        logger.debug('Non-finite window loss %s', mean_loss)
    logits = np.stack([step.logits for step in cache.steps], axis=1)
    return mean_loss, logits, cache, cache.carry_out


def backward_window(params: ModelParams, config: ModelConfig, cache: UnrolledCache,
                    masks: Optional[DropoutMasks] = None,
                    step_weights: Optional[Sequence[float]] = None) -> WindowGrads:
    """Exact BPTT through the window.

    The loss being differentiated is Σ_t step_weights[t] · Σ_batch loss[b, t];
    the default weights give the window's mean token loss.
    """
    if not cache.steps:
        raise ContractViolation('lm_network', 'empty cache')
    if len(cache.steps[0].rhn.layers) != len(params.rhn_layers) \
            or config.use_hsg != (cache.steps[0].hsg is not None):
        raise ContractViolation('lm_network', 'cache was not produced by these params/config')

    n_steps, batch_size = len(cache.steps), cache.batch_size
    if step_weights is None:
        step_weights = [1.0 / (n_steps * batch_size)] * n_steps
    if len(step_weights) != n_steps:
        raise ContractViolation('lm_network', 'one step weight per timestep required')
    masks = masks or DropoutMasks()

    grads = params.zeros_like()
    rhn_grads = RhnGrads(input=grads.rhn_input, layers=grads.rhn_layers)
    d_next = np.zeros_like(cache.carry_in.recurrent)

    for step, weight in zip(reversed(cache.steps), reversed(step_weights)):
        dlogits = step.dlogits * weight
        grads.out_w += outer(step.y, dlogits)
        grads.out_b += sum_rows(dlogits)
        d_out = matvec_t(params.out_w.T, dlogits)
        if masks.output is not None:
            d_out = d_out * masks.output
        d_out = d_out + d_next

        if config.use_hsg:
            d_hat_prev, d_s_l, _ = hsg_backward(d_out, step.hsg, params.hsg, grads.hsg)
        else:
            d_hat_prev, d_s_l = None, d_out

        d_x, d_rec, _ = rhn_cell_backward(
            d_s_l, step.rhn, params.rhn_input, params.rhn_layers, config.coupled, rhn_grads)
        if masks.state is not None:
            d_rec = d_rec * masks.state
        if masks.embedding is not None:
            d_x = d_x * masks.embedding
        np.add.at(grads.embedding, step.tokens, d_x)

        d_next = d_rec if d_hat_prev is None else d_rec + d_hat_prev

    return WindowGrads(params=grads, carry=d_next)


def iter_windows(ids: np.ndarray, window: int) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """Consecutive (input, target) windows covering every target; the last may be short."""
    for start in range(0, len(ids) - 1, window):
        stop = min(start + window, len(ids) - 1)
        yield ids[start:stop], ids[start + 1:stop + 1]


def evaluate_token_losses(params: ModelParams, config: ModelConfig, corpus,
                          window: int = 64) -> np.ndarray:
    """Cross-entropy of every target token, state carried, no dropout."""
    ids = np.asarray(getattr(corpus, 'ids', corpus), dtype=np.int64)
    if len(ids) < 2:
        raise ContractViolation('lm_network', 'corpus needs at least two tokens')
    if window < 1:
        raise ContractViolation('lm_network', f'window must be positive, got {window}')

    carry = CarryState.zeros(config)
    losses = []
    for inputs, targets in iter_windows(ids, window):
        _, _, cache, carry = forward_window(params, config, inputs, targets, carry)
        losses.append(cache.losses[0])
    token_losses = np.concatenate(losses)
    check_finite('lm_network', 'evaluation loss', token_losses)
    return token_losses


def perplexity(token_losses: np.ndarray) -> float:
    """exp of the mean token loss; inf once that overflows a float."""
    mean_loss = float(np.mean(token_losses))
    return math.exp(mean_loss) if mean_loss < MAX_LOG_PERPLEXITY else math.inf


def evaluate_perplexity(params: ModelParams, config: ModelConfig, corpus,
                        window: int = 64) -> float:
    return perplexity(evaluate_token_losses(params, config, corpus, window))

from __future__ import annotations

import csv
import logging
import math
import pathlib
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np
from tqdm import tqdm

from corpus import CorpusSplits, batchify, count_windows
from models.errors import ContractViolation, NumericalFailure
from models.lm import (CarryState, DropoutMasks, ModelConfig, ModelParams, backward_window,
                       evaluate_perplexity, forward_window, init_model, load_checkpoint,
                       save_checkpoint)
from models.tensor import Rng

from .config import TrainConfig, TrainState
from .sgd import sgd_step

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ['epoch', 'step', 'train_loss', 'valid_ppl', 'test_ppl', 'lr']
BEST_CHECKPOINT = 'best.ckpt'
LAST_GOOD_CHECKPOINT = 'last_good.ckpt'
CURVE_FILE = 'learning_curve.csv'


@dataclass
class CurveRow:
    epoch: int
    step: int
    train_loss: float
    valid_ppl: Optional[float]
    test_ppl: Optional[float]
    lr: float

    def csv_fields(self) -> List[str]:
        def fmt(value):
            return '' if value is None else f'{value:.10g}'
        return [str(self.epoch), str(self.step), fmt(self.train_loss),
                fmt(self.valid_ppl), fmt(self.test_ppl), fmt(self.lr)]


@dataclass
class TrainResult:
    params: ModelParams              # best validation checkpoint
    final_params: ModelParams
    curve: List[CurveRow] = field(default_factory=list)
    window_losses: List[np.ndarray] = field(default_factory=list)  # one array per epoch
    best_valid_ppl: float = float('inf')


def write_curve(path: Union[str, pathlib.Path], curve: List[CurveRow]) -> None:
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(CURVE_COLUMNS)
        for row in curve:
            writer.writerow(row.csv_fields())


def train(model_config: ModelConfig, train_config: TrainConfig, splits: CorpusSplits,
          out_dir: Optional[Union[str, pathlib.Path]] = None,
          init_params: Optional[ModelParams] = None,
          resume_from: Optional[Union[str, pathlib.Path]] = None,
          progress: bool = False) -> TrainResult:
    """Truncated-BPTT SGD over sequential windows, lr decayed geometrically per epoch.

    The best-validation parameters are returned (and written as best.ckpt when
    `out_dir` is given). A divergence raises NumericalFailure and leaves the
    last-good checkpoint from the previous epoch in place.
    """
    if splits.train.vocab_size != model_config.vocab_size:
        raise ContractViolation(
            'trainer', f'corpus vocabulary {splits.train.vocab_size} != model vocabulary '
                       f'{model_config.vocab_size}')
    out_dir = pathlib.Path(out_dir) if out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    rng = Rng(train_config.seed)
    state = TrainState(lr=train_config.lr_at(0))
    curve: List[CurveRow] = []
    if resume_from:
        checkpoint = load_checkpoint(resume_from)
        if checkpoint.config.dict() != model_config.dict():
            raise ContractViolation('trainer', f'{resume_from} was trained with another config')
        params = checkpoint.params
        state = TrainState.from_meta(checkpoint.meta)
        rng.counter = state.rng_counter
        logger.info('Resuming from %s at epoch %d', resume_from, state.epoch + 1)
        best_params = _best_before_resume(pathlib.Path(resume_from), model_config, out_dir)
        if best_params is None:
            if state.best_valid_ppl != float('inf'):
                logger.warning('No %s next to %s; best validation perplexity starts over',
                               BEST_CHECKPOINT, resume_from)
                state.best_valid_ppl = float('inf')
            best_params = params.copy()
    else:
        params = init_params if init_params is not None else init_model(model_config, train_config.seed)
        best_params = params.copy()

    window_losses = []
    B, W = train_config.batch_size, train_config.window_length
    n_windows = count_windows(splits.train, B, W)

    for epoch in range(state.epoch, train_config.epochs):
        state.epoch = epoch
        state.lr = train_config.lr_at(epoch)
        state.carry = CarryState.zeros(model_config, B)
        losses = []

        batches = tqdm(batchify(splits.train, B, W), total=n_windows,
                       desc=f'Epoch {epoch + 1}/{train_config.epochs}', disable=not progress)
        for batch in batches:
            masks = None
            if model_config.uses_dropout:
                masks = DropoutMasks.sample(model_config, B, rng.next_stream())
            loss, _, cache, state.carry = forward_window(
                params, model_config, batch.inputs, batch.targets, state.carry, masks)
            if not math.isfinite(loss):
                _abort(out_dir, f'training loss became {loss} at epoch {epoch + 1}, '
                                f'window {batch.index}')

            grads = backward_window(params, model_config, cache, masks)
            try:
                sgd_step(params, grads.params, state.lr, train_config.l2_lambda,
                         train_config.clip_norm)
            except NumericalFailure as e:
                _abort(out_dir, str(e.message), e.tensor)
            losses.append(loss)
            state.step += 1
            logger.debug('epoch %d window %d loss %.4f', epoch + 1, batch.index, loss)

        state.rng_counter = rng.counter
        window_losses.append(np.asarray(losses))
        train_loss = float(np.mean(losses))

        valid_ppl = test_ppl = None
        last_epoch = epoch + 1 == train_config.epochs
        if (epoch + 1) % train_config.eval_every == 0 or last_epoch:
            valid_ppl = evaluate_perplexity(params, model_config, splits.valid,
                                            train_config.eval_window)
            if splits.test is not None:
                test_ppl = evaluate_perplexity(params, model_config, splits.test,
                                               train_config.eval_window)
            if valid_ppl < state.best_valid_ppl:
                state.best_valid_ppl = valid_ppl
                best_params = params.copy()
                if out_dir:
                    save_checkpoint(out_dir / BEST_CHECKPOINT, params, model_config,
                                    meta=state.to_meta())

        curve.append(CurveRow(epoch=epoch, step=state.step, train_loss=train_loss,
                              valid_ppl=valid_ppl, test_ppl=test_ppl, lr=state.lr))
        logger.info('Epoch %d: train loss %.4f, valid ppl %s, lr %.4g', epoch + 1, train_loss,
                    'n/a' if valid_ppl is None else f'{valid_ppl:.3f}', state.lr)

        if out_dir:
            resume_state = TrainState(epoch=epoch + 1, step=state.step,
                                      lr=train_config.lr_at(epoch + 1),
                                      best_valid_ppl=state.best_valid_ppl,
                                      rng_counter=state.rng_counter)
            save_checkpoint(out_dir / LAST_GOOD_CHECKPOINT, params, model_config,
                            meta=resume_state.to_meta())
            write_curve(out_dir / CURVE_FILE, curve)

    return TrainResult(params=best_params, final_params=params, curve=curve,
                       window_losses=window_losses, best_valid_ppl=state.best_valid_ppl)


def _abort(out_dir: Optional[pathlib.Path], message: str, tensor: Optional[str] = None):
    if out_dir and (out_dir / LAST_GOOD_CHECKPOINT).exists():
        logger.error('Training diverged; last good checkpoint kept at %s',
                     out_dir / LAST_GOOD_CHECKPOINT)
    raise NumericalFailure('trainer', message, tensor=tensor)


def _best_before_resume(resume_from: pathlib.Path, model_config: ModelConfig,
                        out_dir: Optional[pathlib.Path]) -> Optional[ModelParams]:
    """The best.ckpt written alongside the resumed checkpoint, copied into `out_dir`."""
    best_path = resume_from.parent / BEST_CHECKPOINT
    if not best_path.is_file():
        return None
    best = load_checkpoint(best_path)
    if best.config.dict() != model_config.dict():
        raise ContractViolation('trainer', f'{best_path} was trained with another config')
    if out_dir and (out_dir / BEST_CHECKPOINT).resolve() != best_path.resolve():
        save_checkpoint(out_dir / BEST_CHECKPOINT, best.params, model_config, meta=best.meta)
    return best.params

"""Depth sweep on the copy task: vanilla RHN against RHN + HSG."""
from __future__ import annotations

import csv
import logging
import pathlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from tqdm import tqdm

from corpus import CorpusSplits, gen_copy_task
from models.lm import ModelConfig, ModelParams, evaluate_token_losses, perplexity
from training import TrainConfig, train

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ['depth', 'use_hsg', 'seed', 'valid_ppl', 'query_loss']


@dataclass
class SweepRun:
    depth: int
    use_hsg: bool
    seed: int
    valid_ppl: float
    query_loss: float
    model_config: Optional[ModelConfig] = field(default=None, repr=False)
    params: Optional[ModelParams] = field(default=None, repr=False)  # best validation


@dataclass
class DepthSummary:
    depth: int
    vanilla_query_loss: float   # median over seeds
    hsg_query_loss: float

    @property
    def hsg_advantage(self) -> float:
        return self.vanilla_query_loss - self.hsg_query_loss


def depth_sweep(depths: Sequence[int], seeds: Sequence[int], base_config: ModelConfig,
                train_config: TrainConfig, lag: int = 50, alphabet: int = 16,
                n_sequences: int = 1000, data_seed: int = 0,
                progress: bool = False) -> List[SweepRun]:
    """Train every (depth, hsg on/off, seed) combination on one copy-task draw."""
    train_corpus, valid_corpus, task = gen_copy_task(n_sequences, lag, alphabet, data_seed)
    splits = CorpusSplits(train=train_corpus, valid=valid_corpus)
    queries = task.query_positions(valid_corpus)

    combos = [(d, h, s) for d in depths for h in (False, True) for s in seeds]
    runs = []
    for depth, use_hsg, seed in tqdm(combos, desc='Depth sweep', disable=not progress):
        model_config = base_config.copy(update={
            'depth': depth, 'use_hsg': use_hsg, 'vocab_size': task.vocab_size,
            'dropout_hsg': base_config.dropout_hsg if use_hsg else 0.0,
        })
        result = train(model_config, train_config.copy(update={'seed': seed}), splits)
        losses = evaluate_token_losses(result.params, model_config, valid_corpus,
                                       train_config.eval_window)
        run = SweepRun(depth=depth, use_hsg=use_hsg, seed=seed,
                       valid_ppl=perplexity(losses),
                       query_loss=float(losses[queries].mean()),
                       model_config=model_config, params=result.params)
        logger.info('depth %d hsg=%s seed %d: valid ppl %.3f, query loss %.4f',
                    depth, use_hsg, seed, run.valid_ppl, run.query_loss)
        runs.append(run)
    return runs


def summarize(runs: Sequence[SweepRun]) -> List[DepthSummary]:
    by_depth: Dict[int, Dict[bool, List[float]]] = {}
    for run in runs:
        by_depth.setdefault(run.depth, {False: [], True: []})[run.use_hsg].append(run.query_loss)
    return [DepthSummary(depth=depth,
                         vanilla_query_loss=float(np.median(losses[False])),
                         hsg_query_loss=float(np.median(losses[True])))
            for depth, losses in sorted(by_depth.items())]


def write_sweep(path: Union[str, pathlib.Path], runs: Sequence[SweepRun]) -> None:
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(SWEEP_COLUMNS)
        for run in runs:
            writer.writerow([run.depth, int(run.use_hsg), run.seed,
                             f'{run.valid_ppl:.10g}', f'{run.query_loss:.10g}'])

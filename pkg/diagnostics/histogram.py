from __future__ import annotations

import csv
import pathlib
from dataclasses import dataclass
from typing import Union

import numpy as np

from models.errors import ContractViolation
from models.hsg import collect_gate_values
from models.lm import CarryState, ModelConfig, ModelParams, forward_window, iter_windows
from models.tensor import Rng


@dataclass
class GateHistogram:
    edges: np.ndarray    # n_bins + 1 edges, edge i == i / n_bins
    counts: np.ndarray
    values: np.ndarray   # the raw gate samples

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def mass(self, low: float, high: float) -> float:
        """Fraction of samples in [low, high]."""
        inside = (self.values >= low) & (self.values <= high)
        return float(inside.mean())

    def write_csv(self, path: Union[str, pathlib.Path]) -> None:
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(['bin_left', 'count'])
            for left, count in zip(self.edges[:-1], self.counts):
                writer.writerow([f'{left:.6g}', int(count)])

    def write_values(self, path: Union[str, pathlib.Path]) -> None:
        with open(path, 'w', encoding='utf-8') as f:
            f.write('gate\n')
            f.writelines(f'{value:.9g}\n' for value in self.values)


def gate_histogram(params: ModelParams, config: ModelConfig, corpus, n_steps: int,
                   n_bins: int = 20, seed: int = 0, window: int = 64) -> GateHistogram:
    """Histogram of HSG gate values at `n_steps` random time steps of the corpus.

    The corpus is run from its start with carried state, so every sampled step
    sees the state it would have in a normal evaluation pass.
    """
    if not config.use_hsg:
        raise ContractViolation('diagnostics', 'gate histogram needs a model with HSG')
    if n_bins < 1:
        raise ContractViolation('diagnostics', 'need at least one bin')
    ids = np.asarray(getattr(corpus, 'ids', corpus), dtype=np.int64)
    n_positions = len(ids) - 1
    if not 1 <= n_steps <= n_positions:
        raise ContractViolation(
            'diagnostics', f'cannot sample {n_steps} steps from {n_positions} positions')

    rng = Rng(seed).stream('gate-histogram')
    positions = np.sort(rng.choice(n_positions, size=n_steps, replace=False))
    wanted = set(positions.tolist())

    caches = []
    carry = CarryState.zeros(config)
    position = 0
    for inputs, targets in iter_windows(ids[:positions[-1] + 2], window):
        _, _, cache, carry = forward_window(params, config, inputs, targets, carry)
        for offset, hsg_cache in enumerate(cache.hsg_caches):
            if position + offset in wanted:
                caches.append(hsg_cache)
        position += len(inputs)

    values = collect_gate_values(caches)
    edges = np.arange(n_bins + 1) / n_bins
    counts, _ = np.histogram(values, bins=edges)
    return GateHistogram(edges=edges, counts=counts, values=values)

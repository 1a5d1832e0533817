from __future__ import annotations

import csv
import pathlib
from dataclasses import dataclass, field
from typing import Any, Dict, List, Union

import numpy as np

from models.errors import ContractViolation
from models.lm import (CarryState, ModelConfig, ModelParams, backward_window,
                       forward_window)
from models.tensor import check_finite


@dataclass
class ProbeRow:
    lag: int
    seed_norm: float        # ‖∂loss_{t+k}/∂state_{t+k}‖
    state_grad_norm: float  # ‖∂loss_{t+k}/∂state_t‖


@dataclass
class GradientProbeReport:
    step: int
    rows: List[ProbeRow]
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def norms(self) -> np.ndarray:
        return np.array([row.state_grad_norm for row in self.rows])

    @property
    def ratios(self) -> np.ndarray:
        """Propagated norm relative to the seed norm, per lag."""
        return np.array([row.state_grad_norm / row.seed_norm if row.seed_norm else 0.0
                         for row in self.rows])

    def write_csv(self, path: Union[str, pathlib.Path]) -> None:
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(['lag', 'seed_norm', 'state_grad_norm'])
            for row in self.rows:
                writer.writerow([row.lag, f'{row.seed_norm:.12g}', f'{row.state_grad_norm:.12g}'])


def _output_state_grad(params: ModelParams, dlogits: np.ndarray) -> np.ndarray:
    return dlogits @ params.out_w.T


def gradient_probe(params: ModelParams, config: ModelConfig, sequence, t: int,
                   max_lag: int) -> GradientProbeReport:
    """How much of the loss gradient at step t+k reaches the state at step t.

    The state is the one read by the output projection (ŝ with HSG, s_L without).
    Lag 0 reports the seed gradient itself. No dropout is applied.
    """
    ids = np.asarray(getattr(sequence, 'ids', sequence), dtype=np.int64)
    if t < 0 or max_lag < 0 or t + max_lag + 1 >= len(ids):
        raise ContractViolation(
            'diagnostics', f'sequence of {len(ids)} tokens too short for step {t} + lag {max_lag}')

    _, _, prefix, carry = forward_window(params, config, ids[:t + 1], ids[1:t + 2])
    seed0 = _output_state_grad(params, prefix.steps[-1].dlogits)
    norm0 = float(np.linalg.norm(seed0))
    rows = [ProbeRow(lag=0, seed_norm=norm0, state_grad_norm=norm0)]

    if max_lag:
        _, _, cache, _ = forward_window(
            params, config, ids[t + 1:t + max_lag + 1], ids[t + 2:t + max_lag + 2], carry)
        for k in range(1, max_lag + 1):
            weights = [0.0] * max_lag
            weights[k - 1] = 1.0
            # Steps after t+k get zero weight, so they contribute nothing.
            grads = backward_window(params, config, cache, step_weights=weights)
            check_finite('diagnostics', f'state gradient at lag {k}', grads.carry)
            seed = _output_state_grad(params, cache.steps[k - 1].dlogits)
            rows.append(ProbeRow(lag=k, seed_norm=float(np.linalg.norm(seed)),
                                 state_grad_norm=float(np.linalg.norm(grads.carry))))

    return GradientProbeReport(step=t, rows=rows, config=config.dict())

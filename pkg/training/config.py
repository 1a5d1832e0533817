from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Optional

from pydantic import BaseModel, NonNegativeFloat, PositiveFloat, PositiveInt, confloat

from models.lm import CarryState


class TrainConfig(BaseModel):
    """Options of the SGD training loop."""
    initial_lr: NonNegativeFloat = 1.0
    lr_decay: confloat(gt=0.0, le=1.0) = 1.0
    epochs: PositiveInt = 10
    window_length: PositiveInt = 35
    batch_size: PositiveInt = 20
    l2_lambda: NonNegativeFloat = 0.0
    clip_norm: Optional[PositiveFloat] = 10.0
    seed: int = 0
    eval_every: PositiveInt = 1
    eval_window: PositiveInt = 64

    def lr_at(self, epoch: int) -> float:
        return self.initial_lr * self.lr_decay ** epoch


@dataclass
class TrainState:
    """Where training stands; `lr` always equals initial_lr × lr_decay^epoch."""
    epoch: int = 0
    step: int = 0
    lr: float = 1.0
    best_valid_ppl: float = float('inf')
    rng_counter: int = 0
    carry: Optional[CarryState] = None

    def to_meta(self) -> Dict[str, Any]:
        return {
            'epoch': self.epoch,
            'step': self.step,
            'lr': self.lr,
            'best_valid_ppl': self.best_valid_ppl if self.best_valid_ppl != float('inf') else None,
            'rng_counter': self.rng_counter,
        }

    @classmethod
    def from_meta(cls, meta: Dict[str, Any]) -> TrainState:
        best = meta.get('best_valid_ppl')
        return cls(epoch=int(meta['epoch']), step=int(meta['step']), lr=float(meta['lr']),
                   best_valid_ppl=float('inf') if best is None else float(best),
                   rng_counter=int(meta['rng_counter']))

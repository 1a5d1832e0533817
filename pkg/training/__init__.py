from .config import TrainConfig, TrainState
from .loop import CURVE_COLUMNS, CurveRow, TrainResult, train, write_curve
from .sgd import clip_gradients, global_norm, sgd_step


__all__ = [
    'CURVE_COLUMNS',
    'CurveRow',
    'TrainConfig',
    'TrainResult',
    'TrainState',
    'clip_gradients',
    'global_norm',
    'sgd_step',
    'train',
    'write_curve',
]

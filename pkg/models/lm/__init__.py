from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import ModelConfig
from .network import (CarryState, DropoutMasks, UnrolledCache, WindowGrads,
                      backward_window, evaluate_perplexity, evaluate_token_losses,
                      forward_window, iter_windows, perplexity)
from .params import (ModelParams, count_parameters, init_model, is_bias,
                     parameter_shapes, params_from_tensors)


__all__ = [
    'CarryState',
    'Checkpoint',
    'DropoutMasks',
    'ModelConfig',
    'ModelParams',
    'UnrolledCache',
    'WindowGrads',
    'backward_window',
    'count_parameters',
    'evaluate_perplexity',
    'evaluate_token_losses',
    'forward_window',
    'init_model',
    'is_bias',
    'iter_windows',
    'load_checkpoint',
    'parameter_shapes',
    'params_from_tensors',
    'perplexity',
    'save_checkpoint',
]

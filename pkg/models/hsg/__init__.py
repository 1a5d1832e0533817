from .cell import (HsgParams, HsgStepCache, collect_gate_values, hsg_backward,
                   hsg_forward, init_hsg_params)


__all__ = [
    'HsgParams',
    'HsgStepCache',
    'collect_gate_values',
    'hsg_backward',
    'hsg_forward',
    'init_hsg_params',
]

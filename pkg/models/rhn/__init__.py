from .cell import (RhnGrads, RhnLayerCache, RhnStepCache, rhn_cell_backward,
                   rhn_cell_forward, rhn_layer_forward, zeros_like_rhn)
from .params import RhnInputParams, RhnLayerParams, init_rhn_params


__all__ = [
    'RhnGrads',
    'RhnInputParams',
    'RhnLayerCache',
    'RhnLayerParams',
    'RhnStepCache',
    'init_rhn_params',
    'rhn_cell_backward',
    'rhn_cell_forward',
    'rhn_layer_forward',
    'zeros_like_rhn',
]

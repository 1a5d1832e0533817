from .ops import (DTYPES, Matrix2D, Vector, check_finite, dsigmoid, dtanh,
                  dtype_for, matvec, matvec_t, outer, sigmoid, softmax_xent,
                  sum_rows, tanh, uniform)
from .rng import Rng


__all__ = [
    'DTYPES',
    'Matrix2D',
    'Rng',
    'Vector',
    'check_finite',
    'dsigmoid',
    'dtanh',
    'dtype_for',
    'matvec',
    'matvec_t',
    'outer',
    'sigmoid',
    'softmax_xent',
    'sum_rows',
    'tanh',
    'uniform',
]

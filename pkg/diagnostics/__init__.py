from .gradcheck import (GradCheckReport, check_model_gradients, numeric_gradient,
                        random_gradcheck, relative_error)
from .histogram import GateHistogram, gate_histogram
from .paths import (ARCHITECTURES, PathLengthReport, build_graph, enumerate_path_lengths,
                    path_lengths)
from .probe import GradientProbeReport, ProbeRow, gradient_probe
from .sweep import DepthSummary, SweepRun, depth_sweep, summarize, write_sweep


__all__ = [
    'ARCHITECTURES',
    'DepthSummary',
    'GateHistogram',
    'GradCheckReport',
    'GradientProbeReport',
    'PathLengthReport',
    'ProbeRow',
    'SweepRun',
    'build_graph',
    'check_model_gradients',
    'depth_sweep',
    'enumerate_path_lengths',
    'gate_histogram',
    'gradient_probe',
    'numeric_gradient',
    'path_lengths',
    'random_gradcheck',
    'relative_error',
    'summarize',
    'write_sweep',
]

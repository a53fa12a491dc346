from .geometry import Dom, DomArray, dom_grid
from .medium import Anisotropy, IceModel, Layer, Tilt, uniform_ice
from .transport import (
    BatchResult,
    Photon,
    PhotonNumericalFault,
    PointSource,
    SegmentSource,
    Status,
    propagate,
    run_batch,
    sample_abs_tau,
    sample_scatter,
    sample_scatter_cos,
    step_to_next_scatter,
)

__all__ = [
    "Anisotropy", "BatchResult", "Dom", "DomArray", "IceModel", "Layer",
    "Photon", "PhotonNumericalFault", "PointSource", "SegmentSource",
    "Status", "Tilt", "dom_grid", "propagate", "run_batch", "sample_abs_tau",
    "sample_scatter", "sample_scatter_cos", "step_to_next_scatter",
    "uniform_ice",
]

"""Isogeometric Karhunen-Loeve expansion with interpolation-based quadrature."""

__version__ = "0.1.0"

from .eigensolver import KleSpectrum, LanczosConfig, LanczosNotConverged, solve_spectrum
from .geometry import TensorPatch, load_geometry
from .kernels import CovarianceKernel
from .operator import KleOperator, build_operator
from .splines import BSplineBasis

__all__ = [
    "BSplineBasis",
    "CovarianceKernel",
    "KleOperator",
    "KleSpectrum",
    "LanczosConfig",
    "LanczosNotConverged",
    "TensorPatch",
    "build_operator",
    "load_geometry",
    "solve_spectrum",
]

"""Structurally damped semilinear wave equation: fractional operators, cutoffs, solver and analysis."""

__version__ = "0.1.0"

from .fields import Grid, RealField, SpectralField, forward_transform, inverse_transform, norm
from .fractional_ops import frac_laplacian_quadrature, frac_laplacian_spectral
from .solver import DataSpec, SimConfig, Trajectory, run

__all__ = [
    "Grid",
    "RealField",
    "SpectralField",
    "forward_transform",
    "inverse_transform",
    "norm",
    "frac_laplacian_quadrature",
    "frac_laplacian_spectral",
    "DataSpec",
    "SimConfig",
    "Trajectory",
    "run",
]

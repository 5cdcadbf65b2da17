"""Numerical laboratory for weakly coupled fractional diffusion systems with
time-dependent generators: stable-kernel evaluation, exponent/regime algebra,
a pseudospectral mild-solution solver, and bound verification."""

from .exponents import SystemParams, ExponentReport, classify
from .kernels import KernelSpec, SpectralGrid
from .solver import FieldPair, InitialData, RunConfig, TimeMesh, solve

__version__ = "0.1.0"

__all__ = [
    "SystemParams", "ExponentReport", "classify",
    "KernelSpec", "SpectralGrid",
    "FieldPair", "InitialData", "RunConfig", "TimeMesh", "solve",
    "__version__",
]

"""Hermitised products of Gaussian random matrices: sampling, exact densities and kernels.

Submodules
----------
special_functions
    Mellin--Barnes line integrals, Meijer G and Wright--Bessel functions.
sampling
    Matrix samplers and the rank-one secular-equation chain.
ensemble_density
    Joint eigenvalue densities and the weight functions.
biortho_kernel
    Bi-orthogonal functions and the finite-n correlation kernel.
hard_edge
    Limiting kernels at the origin.
global_density
    The two-sided Fuss--Catalan global density.
harness, cli
    Seeded Monte Carlo orchestration, verification suites, command line.
"""

from .errors import (
    BracketingError,
    BranchTrackingError,
    ContourPlacementError,
    DimensionError,
    GammaPoleError,
    HermprodError,
    NonConvergenceError,
    NumericalError,
    OrderingError,
    OriginSingularityError,
)
from .sampling import EnsembleParams, SignedDiagonal, SpectrumSample

__version__ = "0.1.0"

__all__ = [
    "EnsembleParams",
    "SignedDiagonal",
    "SpectrumSample",
    "HermprodError",
    "NumericalError",
    "NonConvergenceError",
    "BracketingError",
    "BranchTrackingError",
    "GammaPoleError",
    "ContourPlacementError",
    "OrderingError",
    "OriginSingularityError",
    "DimensionError",
]

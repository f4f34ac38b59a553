"""Two-phase Stokes flow with surface tension: spectral symbols, per-mode
resolvent solutions, exact linear interface evolution, and a semi-implicit
nonlinear interface stepper on a periodic tangential grid."""

__version__ = "0.1.0"

from .core import (
    BranchCutError,
    BulkFields,
    ContourError,
    DiscretizationError,
    DivergenceError,
    FluidParams,
    InterfaceState,
    SingularModeError,
    SpectrumError,
    TangentialGrid,
    VerticalGrid,
)

__all__ = [
    "BranchCutError",
    "BulkFields",
    "ContourError",
    "DiscretizationError",
    "DivergenceError",
    "FluidParams",
    "InterfaceState",
    "SingularModeError",
    "SpectrumError",
    "TangentialGrid",
    "VerticalGrid",
    "__version__",
]

"""Self-similar extinction toolkit for fast diffusion with weighted
absorption: profile shooting, phase-space classification, invariant-region
audits and a radial PDE solver with extinction-rate measurement."""

__version__ = "0.1.0"

from .core import (
    InvalidParams,
    DegenerateDimension,
    Params,
    Derived,
    PhasePoint,
    Equilibrium,
    validate_params,
    derive_constants,
    vector_field,
    analytic_jacobian,
    numeric_jacobian,
    equilibria,
    equilibrium_spectrum,
)
from .backend import BACKEND

__all__ = [
    "__version__",
    "BACKEND",
    "InvalidParams",
    "DegenerateDimension",
    "Params",
    "Derived",
    "PhasePoint",
    "Equilibrium",
    "validate_params",
    "derive_constants",
    "vector_field",
    "analytic_jacobian",
    "numeric_jacobian",
    "equilibria",
    "equilibrium_spectrum",
]

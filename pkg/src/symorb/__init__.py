"""Symmetric periodic orbits of the spatial circular restricted three-body
problem: differential correction, continuation, Floquet stability, Krein
signatures, Conley-Zehnder style index bookkeeping, and bifurcation bridges."""

from .dynamics import (
    EARTH_MOON_MU,
    MassRatio,
    Symmetry,
    LibrationPointInfo,
    apply_symmetry,
    jacobi_constant,
    libration_points,
    state,
    to_hamiltonian,
    to_lagrangian,
    vector_field,
)
from .integrate import (
    EventSpec,
    IntegratorConfig,
    SectionAxis,
    propagate,
    propagate_to_event,
    propagate_variational,
)

__version__ = "0.1.0"

__all__ = [
    "EARTH_MOON_MU",
    "MassRatio",
    "Symmetry",
    "LibrationPointInfo",
    "apply_symmetry",
    "jacobi_constant",
    "libration_points",
    "state",
    "to_hamiltonian",
    "to_lagrangian",
    "vector_field",
    "EventSpec",
    "IntegratorConfig",
    "SectionAxis",
    "propagate",
    "propagate_to_event",
    "propagate_variational",
    "__version__",
]

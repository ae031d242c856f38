"""Computational services.

Services:
    operators   - dense complex matrix algebra on C^n
    bundle      - operator fields, parameter paths, pull-back generator
    propagator  - time-ordered exponentials and state propagation
    holonomy    - parallel transport, Berry phases, adiabatic blocks
"""

from .operators import (
    check_hermitian,
    eig_hermitian,
    spectral_projectors,
    matrix_exp,
    unitarity_defect,
    polar_unitarize,
)


def __getattr__(name):
    """Lazy imports to avoid circular dependencies."""
    if name in ("OperatorField", "ParameterPath", "PullbackSystem"):
        from . import bundle
        return getattr(bundle, name)
    if name in ("time_ordered_exp", "propagate_state", "compose", "convergence_order"):
        from . import propagator
        return getattr(propagator, name)
    if name in ("parallel_transport", "abelian_phase", "factorized_propagator", "phase_split"):
        from . import holonomy
        return getattr(holonomy, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__all__ = [
    "check_hermitian",
    "eig_hermitian",
    "spectral_projectors",
    "matrix_exp",
    "unitarity_defect",
    "polar_unitarize",
    "OperatorField",
    "ParameterPath",
    "PullbackSystem",
    "time_ordered_exp",
    "propagate_state",
    "compose",
    "convergence_order",
    "parallel_transport",
    "abelian_phase",
    "factorized_propagator",
    "phase_split",
]

"""Data models and schemas."""

from .schemas import (
    ParameterPoint,
    SpectralBlock,
    IntegratorConfig,
    Propagator,
    HolonomyResult,
    BlockPhase,
    CommandOptions,
    CommandRecord,
)

__all__ = [
    "ParameterPoint",
    "SpectralBlock",
    "IntegratorConfig",
    "Propagator",
    "HolonomyResult",
    "BlockPhase",
    "CommandOptions",
    "CommandRecord",
]

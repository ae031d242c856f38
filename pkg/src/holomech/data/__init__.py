"""Scenario input and record output.

Structure:
    templates/   - shipped scenario templates (TOML)
    stores/      - JSON-lines / CSV record output

    expression.py  - coefficient expression language
    scenario.py    - scenario loading, validation and serialization
"""

from .expression import Expression, parse_expression


def __getattr__(name):
    """Lazy imports to avoid circular dependencies (scenario builds services)."""
    if name in ("Scenario", "load_scenario", "serialize_scenario"):
        from . import scenario
        return getattr(scenario, name)
    if name == "RecordStore":
        from .stores import RecordStore
        return RecordStore
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__all__ = [
    "Expression",
    "parse_expression",
    "Scenario",
    "load_scenario",
    "serialize_scenario",
    "RecordStore",
]

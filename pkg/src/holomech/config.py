"""Application configuration settings."""

from pathlib import Path
from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache

# package directory (contains data/templates)
PACKAGE_DIR = Path(__file__).parent


# =============================================================================
# Built-in scenario templates
# Each one pins a small experiment; `holomech check` and the tests run on them.
# =============================================================================

TEMPLATE_DESCRIPTIONS: dict[str, str] = {
    "aharonov_bohm": "Flat U(1) connection alpha*dtheta on the punctured plane (n=1, d=2). "
                     "Paths: unit_circle (winding w), offset_circle (contractible).",
    "spin_half_cone": "Spin-1/2 adiabatic frame with the eigenstate Berry connection on the "
                      "stereographic plane (n=2, d=2). Path: cone (fixed polar angle theta).",
    "commuting_factorization": "omega*sigma_z Hamiltonian with a scalar flat connection; "
                               "geometric x dynamical factorization holds.",
    "noncommuting_factorization": "0.5*sigma_z Hamiltonian with a sigma_x connection; "
                                  "factorization fails by O(1).",
    "block_adiabatic": "n=3 Hamiltonian diag(1,1,2) with an eigenspace-preserving, "
                       "non-abelian connection on the 2-dim block.",
}

# Path used when a command is not given --path / --loop
TEMPLATE_DEFAULT_PATHS: dict[str, str] = {
    "aharonov_bohm": "unit_circle",
    "spin_half_cone": "cone",
    "commuting_factorization": "loop",
    "noncommuting_factorization": "loop",
    "block_adiabatic": "loop",
}


def get_template_description(name: str) -> str:
    """Get human-readable description of a built-in template.

    Args:
        name: Template name (e.g. "aharonov_bohm")

    Returns:
        Description string, or the name itself for unknown templates
    """
    return TEMPLATE_DESCRIPTIONS.get(name, name)


def get_template_summary() -> str:
    """Get a formatted listing of all built-in templates for CLI help.

    Returns:
        Formatted string, one template per paragraph
    """
    lines = ["BUILT-IN SCENARIO TEMPLATES:"]
    for name, desc in TEMPLATE_DESCRIPTIONS.items():
        lines.append(f"  {name}")
        lines.append(f"      {desc}")
    return "\n".join(lines)


# =============================================================================
# Application Settings
# =============================================================================

class Settings(BaseSettings):
    """Application settings loaded from environment variables (HOLOMECH_*)."""

    model_config = SettingsConfigDict(
        env_prefix="HOLOMECH_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # App Settings
    log_level: str = "WARNING"

    # Integrator defaults
    default_method: str = "exp-midpoint-2"
    default_tol: float = 1e-8
    max_steps: int = 1_000_000

    # Spectral / block tolerances
    gap_tol: float = 1e-8
    leak_tol: float = 1e-8
    projector_samples: int = 33
    commutation_samples: int = 64

    # Bundle model
    sign_convention: str = "paper"
    derivative_step: float = 1e-5

    # Sweep
    max_jobs: int = 8

    # Paths
    template_dir: Path = PACKAGE_DIR / "data" / "templates"


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()

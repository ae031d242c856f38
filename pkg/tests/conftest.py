"""Shared fixtures."""

import numpy as np
import pytest

from holomech.config import get_settings
from holomech.models import IntegratorConfig


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Each test sees settings built from its own environment."""
    for name in ("HOLOMECH_TEMPLATE_DIR", "HOLOMECH_DEFAULT_METHOD", "HOLOMECH_DEFAULT_TOL",
                 "HOLOMECH_SIGN_CONVENTION", "HOLOMECH_MAX_JOBS", "HOLOMECH_PROJECTOR_SAMPLES"):
        monkeypatch.delenv(name, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def cf4():
    return IntegratorConfig(method="magnus-cf-4", tol=1e-8)


@pytest.fixture
def midpoint():
    return IntegratorConfig(method="exp-midpoint-2", tol=1e-8)


@pytest.fixture
def write_scenario(tmp_path):
    """Write TOML text to a scenario file and return its path."""

    def _write(text: str, name: str = "scenario.toml") -> str:
        target = tmp_path / name
        target.write_text(text, encoding="utf-8")
        return str(target)

    return _write

"""Shared plumbing for CLI commands: scenario, path, interval and integrator resolution."""

from dataclasses import dataclass
from typing import Optional

from holomech.config import get_settings
from holomech.data.scenario import Scenario, load_scenario
from holomech.errors import IntervalMismatch
from holomech.models import CommandOptions, CommandRecord, IntegratorConfig
from holomech.services.bundle import ParameterPath


@dataclass(frozen=True)
class Context:
    """Everything a command needs after option resolution."""

    options: CommandOptions
    scenario: Scenario
    path: ParameterPath
    t0: float
    t1: float
    cfg: IntegratorConfig


def integrator_config(scenario: Scenario, options: CommandOptions) -> IntegratorConfig:
    """CLI flags override the scenario's [integrator] table."""
    update = {}
    if options.method is not None:
        update["method"] = options.method
    if options.tol is not None:
        update["tol"] = options.tol
    return scenario.defaults.model_copy(update=update) if update else scenario.defaults


def resolve(options: CommandOptions, path_name: Optional[str] = None) -> Context:
    """Load the scenario and pick the path and time interval."""
    scenario = load_scenario(options.scenario, options.overrides, options.sign_convention)
    path = scenario.get_path(path_name or options.path)
    t0 = path.t0 if options.t0 is None else options.t0
    t1 = path.t1 if options.t1 is None else options.t1
    if not t1 > t0:
        raise IntervalMismatch(f"need t0 < t1, got [{t0}, {t1}]")
    return Context(options, scenario, path, float(t0), float(t1), integrator_config(scenario, options))


def record(command: str, options: CommandOptions, summary: dict, data: dict) -> CommandRecord:
    return CommandRecord(command=command, scenario=options.scenario, summary=summary, data=data)


def block_settings() -> tuple[float, float, int]:
    """gap_tol, leak_tol and projector_samples from Settings."""
    settings = get_settings()
    return settings.gap_tol, settings.leak_tol, settings.projector_samples

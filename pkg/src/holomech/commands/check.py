"""check - invariant suite for one scenario.

Runs four checks and reports each as a 0/1 column:

    round_trip   serialize -> reload agrees at 20 random points within 1e-12
    determinism  two identical `run` invocations give byte-identical records
    exit_codes   each documented error class maps to its exit code
    unitarity    the path propagator has unitarity defect <= 1e-10
"""

import logging
from typing import Callable

import numpy as np

from holomech.commands.common import record, resolve
from holomech.commands.run import run
from holomech.data.scenario import Scenario, loads_scenario, serialize_scenario
from holomech.data.stores import record_line
from holomech.errors import CheckFailed, ExpressionDomainError, HolomechError, exit_code_for
from holomech.models import CommandOptions, CommandRecord, ParameterPoint
from holomech.services.bundle import OperatorField
from holomech.services.holonomy import abelian_phase
from holomech.services.operators import polar_unitarize
from holomech.services.propagator import fit_order, time_ordered_exp

logger = logging.getLogger("holomech.commands.check")

ROUND_TRIP_POINTS = 20
ROUND_TRIP_TOL = 1e-12
UNITARITY_TOL = 1e-10
SEED = 20240611

_BAD_SCENARIOS: dict[str, str] = {
    "syntax": '[system]\ndimension = 1\nhamiltonian = [{ coeff = "s1 +* 2", basis = "I(1)" }]\n',
    "unknown_identifier": '[system]\ndimension = 1\nhamiltonian = [{ coeff = "bogus*t", basis = "I(1)" }]\n',
    "dimension": '[system]\ndimension = 3\nhamiltonian = [{ coeff = "1", basis = "pauli_z" }]\n',
    "non_hermitian_basis": '[system]\ndimension = 2\nhamiltonian = [{ coeff = "1", basis = "E(1,2,2)" }]\n',
    "format": 'name = "no_system"\n',
}


def _field_distance(a: OperatorField, b: OperatorField, point) -> float:
    try:
        va = a.evaluate(point)
    except ExpressionDomainError:
        va = None
    try:
        vb = b.evaluate(point)
    except ExpressionDomainError:
        vb = None
    if va is None or vb is None:
        return 0.0 if va is None and vb is None else float("inf")
    return float(np.max(np.abs(va - vb), initial=0.0))


def round_trip_distance(scenario: Scenario, seed: int = SEED) -> float:
    """Largest disagreement between `scenario` and its serialized-and-reloaded copy."""
    copy = loads_scenario(serialize_scenario(scenario), scenario.name)
    if (copy.system.n, copy.system.d, copy.system.sign) != (scenario.system.n, scenario.system.d, scenario.system.sign):
        return float("inf")
    if set(copy.paths) != set(scenario.paths) or copy.defaults != scenario.defaults:
        return float("inf")

    rng = np.random.default_rng(seed)
    worst = 0.0
    fields = list(zip(
        [scenario.system.hamiltonian, *scenario.system.connection],
        [copy.system.hamiltonian, *copy.system.connection],
    ))
    for _ in range(ROUND_TRIP_POINTS):
        point = ParameterPoint(t=float(rng.uniform(-2.0, 2.0)),
                               sigma=tuple(rng.uniform(-2.0, 2.0, scenario.system.d).tolist()))
        for a, b in fields:
            worst = max(worst, _field_distance(a, b, point))
        for name, path in scenario.paths.items():
            other = copy.paths[name]
            if (other.t0, other.t1, other.closed, other.breakpoints) != (path.t0, path.t1, path.closed, path.breakpoints):
                return float("inf")
            t = float(rng.uniform(path.t0, path.t1))
            worst = max(worst, float(np.max(np.abs(path.evaluate(t) - other.evaluate(t)), initial=0.0)))
    return worst


def _exit_code_cases(ctx) -> dict[str, tuple[Callable[[], object], int]]:
    cases: dict[str, tuple[Callable[[], object], int]] = {
        name: ((lambda text=text, name=name: loads_scenario(text, name)), 2) for name, text in _BAD_SCENARIOS.items()
    }
    starved = ctx.cfg.model_copy(update={"max_steps": 1, "initial_step": None})
    cases["step_limit"] = (
        lambda: time_ordered_exp(ctx.scenario.system, ctx.path, ctx.t0, ctx.t1, starved), 1
    )
    cases["non_scalar_holonomy"] = (lambda: abelian_phase(np.diag([1.0, -1.0]).astype(complex)), 1)
    cases["degenerate_errors"] = (lambda: fit_order([0.1, 0.05], [1e-16, 1e-16]), 1)
    cases["singular_input"] = (lambda: polar_unitarize(np.zeros((2, 2), dtype=complex)), 1)
    return cases


def exit_code_failures(ctx) -> list[str]:
    """Names of cases that did not fail with the documented exit code."""
    failures = []
    for name, (thunk, expected) in _exit_code_cases(ctx).items():
        try:
            thunk()
        except HolomechError as exc:
            if exit_code_for(exc) != expected:
                failures.append(f"{name}: {exc.code} exits {exit_code_for(exc)}, expected {expected}")
            continue
        failures.append(f"{name}: no error raised")
    return failures


def check(options: CommandOptions) -> CommandRecord:
    ctx = resolve(options)
    problems: list[str] = []

    distance = round_trip_distance(ctx.scenario)
    round_trip_ok = distance <= ROUND_TRIP_TOL
    if not round_trip_ok:
        problems.append(f"round trip differs by {distance:.3e}")

    first = record_line(run(options))
    second = record_line(run(options))
    determinism_ok = first == second
    if not determinism_ok:
        problems.append("reruns produced different records")

    exit_failures = exit_code_failures(ctx)
    problems.extend(exit_failures)

    defect = time_ordered_exp(ctx.scenario.system, ctx.path, ctx.t0, ctx.t1, ctx.cfg).defect
    unitarity_ok = defect <= UNITARITY_TOL
    if not unitarity_ok:
        problems.append(f"unitarity defect {defect:.3e}")

    for problem in problems:
        logger.warning(f"[CHECK] {problem}")

    result = record(
        "check",
        options,
        summary={
            "round_trip": float(round_trip_ok),
            "round_trip_distance": distance,
            "determinism": float(determinism_ok),
            "exit_codes": float(not exit_failures),
            "unitarity": float(unitarity_ok),
            "defect": defect,
        },
        data={"path": ctx.path.name, "problems": problems},
    )
    if problems:
        return result.model_copy(update={
            "status": "error",
            "error_code": CheckFailed.code,
            "error": "; ".join(problems),
        })
    return result

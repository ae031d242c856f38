"""Time-ordered exponentials G = T exp[i int K dt] on U(n).

Later factors multiply on the left: U(t + dt) = exp(i K dt) U(t). Every step
is a product of exponentials of skew-Hermitian matrices, so the result stays
on the unitary group up to rounding.
"""

import logging
import math
from typing import Callable, Sequence

import numpy as np

from holomech.errors import (
    DegenerateErrorSequence,
    DimensionMismatch,
    FormatError,
    IntervalMismatch,
    StepLimitExceeded,
)
from holomech.models import IntegratorConfig, Propagator
from holomech.services.bundle import PullbackSystem, ParameterPath, SampledSection, pullback_generator
from holomech.services.operators import (
    as_cvector,
    frobenius,
    matrix_exp,
    polar_unitarize,
    unitarity_defect,
)

logger = logging.getLogger("holomech.propagator")

Generator = Callable[[float], np.ndarray]

# Gauss-Legendre nodes and commutator-free order-4 weights
_SQRT3_6 = math.sqrt(3.0) / 6.0
GAUSS_NODES = (0.5 - _SQRT3_6, 0.5 + _SQRT3_6)
CF4_WEIGHTS = (0.25 - _SQRT3_6, 0.25 + _SQRT3_6)

REUNITARIZE_THRESHOLD = 1e-12
MACHINE_FLOOR = 1e-13


def step_unitary(generator: Generator, t: float, dt: float, method: str) -> np.ndarray:
    """One step of the chosen scheme over [t, t + dt]."""
    if method == "exp-midpoint-2":
        return matrix_exp(1j * dt * generator(t + 0.5 * dt))
    K1 = generator(t + GAUSS_NODES[0] * dt)
    K2 = generator(t + GAUSS_NODES[1] * dt)
    a1, a2 = CF4_WEIGHTS
    later = matrix_exp(1j * dt * (a1 * K1 + a2 * K2))
    earlier = matrix_exp(1j * dt * (a2 * K1 + a1 * K2))
    return later @ earlier


def _finish(U: np.ndarray, t0: float, t1: float, steps: int, tol: float, label: str) -> Propagator:
    defect = unitarity_defect(U)
    if defect > REUNITARIZE_THRESHOLD:
        logger.warning(f"[PROPAGATOR] {label}: defect {defect:.3e} after {steps} steps, re-unitarizing")
        U = polar_unitarize(U)
        defect = unitarity_defect(U)
    return Propagator(U=U, t_start=t0, t_end=t1, steps_taken=steps, defect=defect, tol=tol)


def integrate_generator(
    generator: Generator,
    n: int,
    t0: float,
    t1: float,
    cfg: IntegratorConfig,
    breakpoints: Sequence[float] = (),
    label: str = "T-exp",
) -> Propagator:
    """Adaptive T exp[i int_{t0}^{t1} K(t) dt] for an arbitrary Hermitian generator.

    Step-doubling control: a step of size h is accepted when the full step and
    the two half steps differ by at most tol * h / (t1 - t0); the half-step
    product is kept. Steps never cross a breakpoint.

    Args:
        generator: t -> Hermitian n x n matrix K(t)
        n: Hilbert dimension
        t0, t1: Interval, t0 < t1
        cfg: Integrator configuration
        breakpoints: Interior points where K may be discontinuous
        label: Name used in log messages

    Returns:
        Propagator with steps_taken = number of accepted steps
    """
    if not t1 > t0:
        raise IntervalMismatch(f"{label}: need t0 < t1, got [{t0}, {t1}]")

    total = t1 - t0
    edges = [t0, *sorted(b for b in breakpoints if t0 < b < t1), t1]
    dt = cfg.initial_step or total / 16.0
    grow_below = 1.0 / 2.0 ** (cfg.order + 1)

    U = np.eye(n, dtype=complex)
    attempts = 0
    accepted = 0
    for a, b in zip(edges[:-1], edges[1:]):
        t = a
        while b - t > 1e-14 * max(1.0, abs(b)):
            h = min(dt, b - t)
            truncated = h < dt
            if b - (t + h) < 1e-12 * total:
                h = b - t
            attempts += 1
            if attempts > cfg.max_steps:
                raise StepLimitExceeded(
                    f"{label}: {cfg.max_steps} steps attempted before reaching t = {t1} (stopped at t = {t:.6g})"
                )
            if t + h == t:
                raise StepLimitExceeded(f"{label}: step size underflow at t = {t:.17g}")

            full = step_unitary(generator, t, h, cfg.method)
            first = step_unitary(generator, t, 0.5 * h, cfg.method)
            second = step_unitary(generator, t + 0.5 * h, 0.5 * h, cfg.method)
            fine = second @ first
            err = frobenius(fine - full)
            local_tol = cfg.tol * h / total

            if err <= local_tol:
                U = fine @ U
                t = b if h == b - t else t + h
                accepted += 1
                if not truncated:
                    dt = 2.0 * h if err <= grow_below * local_tol else h
            else:
                dt = 0.5 * h

    logger.debug(f"[PROPAGATOR] {label}: [{t0:g}, {t1:g}] accepted {accepted}/{attempts} steps ({cfg.method})")
    return _finish(U, t0, t1, accepted, cfg.tol, label)


def fixed_step_exp(generator: Generator, n: int, t0: float, t1: float, steps: int, method: str) -> np.ndarray:
    """Fixed-step product of `steps` equal steps over [t0, t1]."""
    if steps < 1:
        raise FormatError("steps must be positive")
    dt = (t1 - t0) / steps
    U = np.eye(n, dtype=complex)
    for k in range(steps):
        U = step_unitary(generator, t0 + k * dt, dt, method) @ U
    return U


def _check_interval(h: ParameterPath, t0: float, t1: float) -> None:
    slack = 1e-12 * max(1.0, abs(h.t0), abs(h.t1))
    if t0 < h.t0 - slack or t1 > h.t1 + slack:
        raise IntervalMismatch(f"[{t0}, {t1}] is not inside the domain [{h.t0}, {h.t1}] of path '{h.name}'")


def time_ordered_exp(
    sys: PullbackSystem,
    h: ParameterPath,
    t0: float,
    t1: float,
    cfg: IntegratorConfig,
) -> Propagator:
    """G(t1, t0) for the pull-back generator along h."""
    sys.check_path(h)
    _check_interval(h, t0, t1)
    return integrate_generator(
        lambda t: pullback_generator(sys, h, t),
        sys.n, t0, t1, cfg,
        breakpoints=h.breakpoints,
        label=f"path '{h.name}'",
    )


def _check_state(psi0, n: int) -> np.ndarray:
    psi = as_cvector(psi0, n)
    norm = float(np.linalg.norm(psi))
    if abs(norm - 1.0) > 1e-10:
        raise FormatError(f"initial state must be normalized, |psi0| = {norm:.12g}")
    return psi


def propagate_state(
    sys: PullbackSystem,
    h: ParameterPath,
    t0: float,
    t1: float,
    psi0: np.ndarray,
    cfg: IntegratorConfig,
) -> np.ndarray:
    """psi(t1) = G(t1, t0) psi0."""
    psi = _check_state(psi0, sys.n)
    return time_ordered_exp(sys, h, t0, t1, cfg).U @ psi


def propagate_trajectory(
    sys: PullbackSystem,
    h: ParameterPath,
    t0: float,
    t1: float,
    psi0: np.ndarray,
    cfg: IntegratorConfig,
    samples: int = 33,
) -> SampledSection:
    """Dense solution of the pull-back Schroedinger equation on a uniform grid."""
    psi = _check_state(psi0, sys.n)
    times = np.linspace(t0, t1, samples)
    values = np.empty((samples, sys.n), dtype=complex)
    values[0] = psi
    for i in range(1, samples):
        step = time_ordered_exp(sys, h, float(times[i - 1]), float(times[i]), cfg)
        values[i] = step.U @ values[i - 1]
    return SampledSection(times=times, values=values)


def compose(P1: Propagator, P2: Propagator) -> Propagator:
    """P2 after P1: U = P2.U @ P1.U over [P1.t_start, P2.t_end]."""
    if abs(P1.t_end - P2.t_start) > 1e-12:
        raise IntervalMismatch(f"cannot compose: first ends at {P1.t_end}, second starts at {P2.t_start}")
    if P1.n != P2.n:
        raise DimensionMismatch(f"cannot compose propagators of dimension {P1.n} and {P2.n}")
    U = P2.U @ P1.U
    return Propagator(
        U=U,
        t_start=P1.t_start,
        t_end=P2.t_end,
        steps_taken=P1.steps_taken + P2.steps_taken,
        defect=unitarity_defect(U),
        tol=P1.tol + P2.tol,
    )


def convergence_study(
    sys: PullbackSystem,
    h: ParameterPath,
    interval: tuple[float, float],
    method: str,
    base_steps: int = 16,
) -> tuple[list[float], list[float]]:
    """Fixed-step errors at step sizes D, D/2, D/4, D/8 against a fine reference.

    The reference is the order-4 scheme with 16x the finest step count.

    Returns:
        (step sizes, errors)
    """
    sys.check_path(h)
    a, b = interval
    _check_interval(h, a, b)
    generator = lambda t: pullback_generator(sys, h, t)  # noqa: E731
    reference = fixed_step_exp(generator, sys.n, a, b, base_steps * 8 * 16, "magnus-cf-4")

    steps, errors = [], []
    for k in range(4):
        count = base_steps * 2 ** k
        U = fixed_step_exp(generator, sys.n, a, b, count, method)
        steps.append((b - a) / count)
        errors.append(frobenius(U - reference))
    logger.info(f"[PROPAGATOR] convergence {method}: errors {', '.join(f'{e:.3e}' for e in errors)}")
    return steps, errors


def fit_order(steps: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(step)."""
    if min(errors) <= MACHINE_FLOOR:
        raise DegenerateErrorSequence(
            f"errors reach the machine floor ({min(errors):.3e}); the scheme is exact for this generator"
        )
    slope, _ = np.polyfit(np.log(steps), np.log(errors), 1)
    return float(slope)


def convergence_order(
    sys: PullbackSystem,
    h: ParameterPath,
    interval: tuple[float, float],
    method: str,
    base_steps: int = 16,
) -> float:
    """Measured order of accuracy of `method` on this system."""
    steps, errors = convergence_study(sys, h, interval, method, base_steps)
    return fit_order(steps, errors)

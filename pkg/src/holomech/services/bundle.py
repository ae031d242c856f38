"""Composite bundle data over the trivialization R x Z.

Operator fields H(t, sigma) and A_m(t, sigma) are finite sums of real
coefficient expressions times constant Hermitian matrices; a parameter path
h(t) is a tuple of expressions in t. Everything is immutable after
construction.
"""

import bisect
import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from holomech.data.expression import (
    Expression,
    Number,
    Piecewise,
    Variable,
    mul,
    neg,
    sub,
)
from holomech.errors import (
    DimensionMismatch,
    ExpressionDomainError,
    FormatError,
    GridTooCoarse,
    IntervalMismatch,
    NonHermitianBasis,
)
from holomech.models import ParameterPoint
from holomech.services.operators import HERMITIAN_TOL, as_cmatrix, check_hermitian, dagger

logger = logging.getLogger("holomech.bundle")

CLOSURE_TOL = 1e-9

# 4th-order finite-difference stencils (offsets in units of the step, weights / 12)
CENTRAL_STENCIL = ((-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0))
FORWARD_STENCIL = ((0, -25.0), (1, 48.0), (2, -36.0), (3, 16.0), (4, -3.0))
# first-derivative weights for the second grid point of a 5-point window
NEAR_EDGE_STENCIL = ((-1, -3.0), (0, -10.0), (1, 18.0), (2, -6.0), (3, 1.0))


# =============================================================================
# Operator fields
# =============================================================================

@dataclass(frozen=True)
class FieldTerm:
    """coefficient(t, s1..sd) * basis"""

    coefficient: Expression
    basis: np.ndarray
    label: str = ""


class OperatorField:
    """Hermitian operator field sum_j c_j(t, sigma) B_j."""

    def __init__(self, dim: int, terms: Sequence[FieldTerm] = ()):
        if dim < 1:
            raise DimensionMismatch(f"field dimension must be positive, got {dim}")
        self.dim = dim
        checked = []
        for i, term in enumerate(terms):
            basis = as_cmatrix(term.basis)
            if basis.shape[0] != dim:
                raise DimensionMismatch(
                    f"term {i} ({term.label or 'matrix'}): basis is {basis.shape[0]}x{basis.shape[0]} "
                    f"in a dimension-{dim} field"
                )
            if not check_hermitian(basis, HERMITIAN_TOL):
                raise NonHermitianBasis(f"term {i} ({term.label or 'matrix'}): basis is not Hermitian")
            checked.append(FieldTerm(term.coefficient, 0.5 * (basis + dagger(basis)), term.label))
        self.terms: tuple[FieldTerm, ...] = tuple(checked)

    @classmethod
    def zero(cls, dim: int) -> "OperatorField":
        return cls(dim, ())

    @property
    def variables(self) -> frozenset[str]:
        out = frozenset()
        for term in self.terms:
            out |= term.coefficient.variables
        return out

    @property
    def is_time_independent(self) -> bool:
        return "t" not in self.variables

    def evaluate(self, point: ParameterPoint) -> np.ndarray:
        env = point.bindings()
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for i, term in enumerate(self.terms):
            try:
                coeff = term.coefficient.evaluate(env)
            except ExpressionDomainError as exc:
                raise ExpressionDomainError(f"term {i} ({term.label or 'matrix'}): {exc}") from None
            out += coeff * term.basis
        return out

    def map_coefficients(self, fn) -> "OperatorField":
        return OperatorField(self.dim, [FieldTerm(fn(t.coefficient), t.basis, t.label) for t in self.terms])

    def substitute(self, mapping: Mapping[str, Expression]) -> "OperatorField":
        return self.map_coefficients(lambda c: c.substitute(mapping))

    def restrict_basis(self, V: np.ndarray) -> "OperatorField":
        """Term-wise reduction V^dagger B V onto the span of V's columns."""
        V = np.asarray(V, dtype=complex)
        terms = [FieldTerm(t.coefficient, dagger(V) @ t.basis @ V, t.label) for t in self.terms]
        return OperatorField(V.shape[1], terms)


def eval_field(F: OperatorField, p: ParameterPoint) -> np.ndarray:
    """Pointwise value of an operator field."""
    return F.evaluate(p)


# =============================================================================
# Parameter paths
# =============================================================================

class ParameterPath:
    """Piecewise-smooth section h(t) of the parameter bundle over [t0, t1]."""

    def __init__(
        self,
        t0: float,
        t1: float,
        coords: Sequence[Expression],
        closed: bool = False,
        derivative_step: float = 1e-5,
        breakpoints: Sequence[float] = (),
        name: str = "",
    ):
        if not (np.isfinite(t0) and np.isfinite(t1)) or t0 >= t1:
            raise FormatError(f"path '{name}': domain needs t0 < t1, got [{t0}, {t1}]")
        if derivative_step <= 0:
            raise FormatError(f"path '{name}': derivative_step must be positive")
        for m, coord in enumerate(coords, start=1):
            extra = coord.variables - {"t"}
            if extra:
                raise FormatError(f"path '{name}': coordinate {m} depends on {sorted(extra)}; only t is allowed")

        self.t0 = float(t0)
        self.t1 = float(t1)
        self.coords: tuple[Expression, ...] = tuple(coords)
        self.closed = bool(closed)
        self.derivative_step = float(derivative_step)
        self.breakpoints: tuple[float, ...] = tuple(sorted({float(b) for b in breakpoints if t0 < b < t1}))
        self.name = name

        for t in np.linspace(self.t0, self.t1, 17).tolist() + list(self.breakpoints):
            self.evaluate(t)
        if self.closed:
            gap = np.max(np.abs(self.evaluate(self.t1) - self.evaluate(self.t0)), initial=0.0)
            if gap > CLOSURE_TOL:
                raise FormatError(f"path '{name}' is declared closed but its endpoints differ by {gap:.3e}")

    @property
    def d(self) -> int:
        return len(self.coords)

    @property
    def edges(self) -> list[float]:
        return [self.t0, *self.breakpoints, self.t1]

    @property
    def segments(self) -> list[tuple[float, float]]:
        edges = self.edges
        return list(zip(edges[:-1], edges[1:]))

    def _check_time(self, t: float) -> float:
        slack = 1e-12 * max(1.0, abs(self.t0), abs(self.t1))
        if t < self.t0 - slack or t > self.t1 + slack:
            raise IntervalMismatch(f"t = {t} outside path domain [{self.t0}, {self.t1}]")
        return min(max(t, self.t0), self.t1)

    def evaluate(self, t: float) -> np.ndarray:
        env = {"t": float(t)}
        out = np.empty(self.d)
        for m, coord in enumerate(self.coords):
            try:
                out[m] = coord.evaluate(env)
            except ExpressionDomainError as exc:
                raise ExpressionDomainError(f"path '{self.name}' coordinate {m + 1}: {exc}") from None
        return out

    def point(self, t: float, at: Optional[float] = None) -> ParameterPoint:
        """ParameterPoint (at, h(t)); `at` defaults to t itself."""
        sigma = tuple(self.evaluate(t).tolist())
        return ParameterPoint(t=t if at is None else at, sigma=sigma)

    def segment_of(self, t: float) -> tuple[float, float]:
        edges = self.edges
        i = bisect.bisect_right(edges, t) - 1
        i = min(max(i, 0), len(edges) - 2)
        return edges[i], edges[i + 1]

    def derivative(self, t: float) -> np.ndarray:
        """4th-order finite-difference d h^m / dt, one-sided near segment edges."""
        if self.d == 0:
            return np.empty(0)
        t = self._check_time(t)
        a, b = self.segment_of(t)
        eps = min(self.derivative_step, (b - a) / 8.0)
        if t - 2 * eps >= a and t + 2 * eps <= b:
            stencil, direction = CENTRAL_STENCIL, 1.0
        elif t - 2 * eps < a:
            stencil, direction = FORWARD_STENCIL, 1.0
        else:
            stencil, direction = FORWARD_STENCIL, -1.0
        acc = np.zeros(self.d)
        for offset, weight in stencil:
            acc += weight * self.evaluate(t + direction * offset * eps)
        return direction * acc / (12.0 * eps)

    # --- derived paths ---

    def _derived(self, t0, t1, coords, closed, breakpoints, suffix) -> "ParameterPath":
        return ParameterPath(t0, t1, coords, closed=closed, derivative_step=self.derivative_step,
                             breakpoints=breakpoints, name=f"{self.name}{suffix}")

    def reversed(self) -> "ParameterPath":
        """Same image traversed backwards over the same domain."""
        flip = {"t": Expression(sub(Number(self.t0 + self.t1), Variable("t")))}
        coords = [c.substitute(flip) for c in self.coords]
        breakpoints = [self.t0 + self.t1 - b for b in self.breakpoints]
        return self._derived(self.t0, self.t1, coords, self.closed, breakpoints, "~reversed")

    def restricted(self, t0: float, t1: float) -> "ParameterPath":
        t0, t1 = self._check_time(t0), self._check_time(t1)
        if t0 == self.t0 and t1 == self.t1:
            return self
        return self._derived(t0, t1, self.coords, False, self.breakpoints, f"[{t0:g},{t1:g}]")

    def concatenate(self, other: "ParameterPath") -> "ParameterPath":
        """Traverse self, then other (shifted in time to start at self.t1)."""
        if other.d != self.d:
            raise DimensionMismatch("cannot concatenate paths of different parameter dimension")
        gap = np.max(np.abs(self.evaluate(self.t1) - other.evaluate(other.t0)), initial=0.0)
        if gap > CLOSURE_TOL:
            raise FormatError(f"paths '{self.name}' and '{other.name}' do not join (gap {gap:.3e})")
        shift = self.t1 - other.t0
        shifted = {"t": Expression(sub(Variable("t"), Number(shift)))}
        # only the branch on the current side of self.t1 is evaluated
        at = sub(Variable("t"), Number(self.t1))
        coords = [Expression(Piecewise(at, a.root, b.substitute(shifted).root))
                  for a, b in zip(self.coords, other.coords)]
        t1 = other.t1 + shift
        closed = bool(np.max(np.abs(other.evaluate(other.t1) - self.evaluate(self.t0)), initial=0.0) <= CLOSURE_TOL)
        breakpoints = [*self.breakpoints, self.t1, *(b + shift for b in other.breakpoints)]
        return ParameterPath(self.t0, t1, coords, closed=closed, derivative_step=self.derivative_step,
                             breakpoints=breakpoints, name=f"{self.name}+{other.name}")


def path_derivative(h: ParameterPath, t: float) -> np.ndarray:
    """d h^m / dt at t (numerical, 4th order)."""
    return h.derivative(t)


# =============================================================================
# Pull-back system
# =============================================================================

class PullbackSystem:
    """Hilbert dimension n, parameter dimension d, H and d connection fields.

    ``sign`` is +1 for the paper convention (d psi/dt = +iK psi) and -1 for the
    physics convention; it multiplies every generator built from the system.
    """

    def __init__(self, hamiltonian: OperatorField, connection: Sequence[OperatorField] = (), sign: int = 1):
        if sign not in (1, -1):
            raise FormatError(f"sign must be +1 or -1, got {sign}")
        for m, field in enumerate(connection, start=1):
            if field.dim != hamiltonian.dim:
                raise DimensionMismatch(
                    f"connection component {m} has dimension {field.dim}, Hamiltonian has {hamiltonian.dim}"
                )
        self.hamiltonian = hamiltonian
        self.connection: tuple[OperatorField, ...] = tuple(connection)
        self.sign = sign

    @property
    def n(self) -> int:
        return self.hamiltonian.dim

    @property
    def d(self) -> int:
        return len(self.connection)

    def with_sign(self, sign: int) -> "PullbackSystem":
        return PullbackSystem(self.hamiltonian, self.connection, sign)

    def restrict_basis(self, V: np.ndarray) -> "PullbackSystem":
        return PullbackSystem(
            self.hamiltonian.restrict_basis(V),
            [field.restrict_basis(V) for field in self.connection],
            self.sign,
        )

    def time_reversed(self, t0: float, t1: float) -> "PullbackSystem":
        """System whose flow, along the reversed path, inverts the original flow."""
        flip = {"t": Expression(sub(Number(t0 + t1), Variable("t")))}
        hamiltonian = self.hamiltonian.map_coefficients(lambda c: Expression(neg(c.substitute(flip).root)))
        connection = [field.substitute(flip) for field in self.connection]
        return PullbackSystem(hamiltonian, connection, self.sign)

    def check_path(self, h: ParameterPath) -> None:
        if h.d != self.d:
            raise DimensionMismatch(f"path '{h.name}' has {h.d} coordinates, system expects {self.d}")


def pullback_generator(sys: PullbackSystem, h: ParameterPath, t: float) -> np.ndarray:
    """K(t) = sign * (A_m(t, h(t)) dh^m/dt + H(t, h(t)))."""
    sys.check_path(h)
    point = h.point(t)
    K = sys.hamiltonian.evaluate(point)
    if sys.d:
        velocity = h.derivative(t)
        for field, v in zip(sys.connection, velocity):
            if v != 0.0 and field.terms:
                K = K + v * field.evaluate(point)
    K = 0.5 * (K + dagger(K))
    return sys.sign * K


def restrict_to_path(sys: PullbackSystem, h: ParameterPath) -> PullbackSystem:
    """The pulled-back system with sigma = h(t) substituted symbolically (d = 0)."""
    sys.check_path(h)
    sigma = {f"s{m}": coord for m, coord in enumerate(h.coords, start=1)}
    terms = [FieldTerm(t.coefficient.substitute(sigma), t.basis, t.label) for t in sys.hamiltonian.terms]
    for coord, field in zip(h.coords, sys.connection):
        velocity = coord.derivative("t")
        for term in field.terms:
            coeff = Expression(mul(term.coefficient.substitute(sigma).root, velocity.root))
            terms.append(FieldTerm(coeff, term.basis, term.label))
    return PullbackSystem(OperatorField(sys.n, terms), (), sys.sign)


# =============================================================================
# Sampled sections and the covariant derivative
# =============================================================================

@dataclass(frozen=True)
class SampledSection:
    """A section t -> C^n sampled on a uniform grid; values has shape (N, n)."""

    times: np.ndarray
    values: np.ndarray

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0])


def grid_derivative(values: np.ndarray, step: float) -> np.ndarray:
    """4th-order d/dt along axis 0 of uniformly sampled values (N >= 5)."""
    f = np.asarray(values)
    N = f.shape[0]
    if N < 5:
        raise GridTooCoarse(f"need at least 5 samples, got {N}")
    out = np.empty_like(f, dtype=complex)
    out[2:N - 2] = (f[:N - 4] - 8.0 * f[1:N - 3] + 8.0 * f[3:N - 1] - f[4:]) / 12.0
    out[0] = sum(w * f[k] for k, w in FORWARD_STENCIL) / 12.0
    out[1] = sum(w * f[1 + k] for k, w in NEAR_EDGE_STENCIL) / 12.0
    out[N - 2] = -sum(w * f[N - 2 - k] for k, w in NEAR_EDGE_STENCIL) / 12.0
    out[N - 1] = -sum(w * f[N - 1 - k] for k, w in FORWARD_STENCIL) / 12.0
    return out / step


def covariant_derivative(sys: PullbackSystem, section: SampledSection, h: ParameterPath) -> SampledSection:
    """nabla_h(psi) = d psi/dt - i K(t) psi, samplewise."""
    times = np.asarray(section.times, dtype=float)
    values = np.asarray(section.values, dtype=complex)
    if times.shape[0] < 5:
        raise GridTooCoarse(f"need at least 5 samples, got {times.shape[0]}")
    if values.shape != (times.shape[0], sys.n):
        raise DimensionMismatch(f"section values have shape {values.shape}, expected ({times.shape[0]}, {sys.n})")
    steps = np.diff(times)
    if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise FormatError("section grid must be uniform and increasing")
    if not np.all(np.isfinite(values)):
        raise FormatError("section has non-finite samples")

    dpsi = grid_derivative(values, float(steps[0]))
    out = np.empty_like(values)
    for i, t in enumerate(times):
        K = pullback_generator(sys, h, float(t))
        out[i] = dpsi[i] - 1j * (K @ values[i])
    return SampledSection(times=times, values=out)

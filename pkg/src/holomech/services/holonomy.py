"""Berry-connection parallel transport, holonomy and adiabatic block splitting."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.integrate

from holomech.errors import (
    DriftingProjectors,
    EigenspaceNotPreserved,
    FormatError,
    NonScalarHolonomy,
)
from holomech.models import BlockPhase, HolonomyResult, IntegratorConfig, SpectralBlock
from holomech.services.bundle import ParameterPath, PullbackSystem
from holomech.services.operators import (
    commutator,
    dagger,
    frobenius,
    spectral_projectors,
    unitarity_defect,
    wrap_phase,
)
from holomech.services.propagator import integrate_generator, time_ordered_exp

logger = logging.getLogger("holomech.holonomy")

SCALAR_TOL = 1e-8


# =============================================================================
# Curves in a Z slice
# =============================================================================

class ZCurve:
    """A parameter path read as a curve in the slice {t_slice} x Z."""

    def __init__(self, path: ParameterPath, t_slice: float = 0.0):
        self.path = path
        self.t_slice = float(t_slice)


class ZLoop(ZCurve):
    """Closed curve; the holonomy base point is the loop start."""

    def __init__(self, path: ParameterPath, t_slice: float = 0.0):
        if not path.closed:
            raise FormatError(f"path '{path.name}' is not declared closed")
        super().__init__(path, t_slice)


def connection_generator(sys: PullbackSystem, path: ParameterPath, s: float, t_slice: float) -> np.ndarray:
    """sign * A_m(t_slice, h(s)) dh^m/ds."""
    point = path.point(s, at=t_slice)
    velocity = path.derivative(s)
    A = np.zeros((sys.n, sys.n), dtype=complex)
    for field, v in zip(sys.connection, velocity):
        if v != 0.0 and field.terms:
            A += v * field.evaluate(point)
    A = 0.5 * (A + dagger(A))
    return sys.sign * A


def curve_length(path: ParameterPath, panels: int = 64) -> float:
    """Euclidean length of the image of `path` (composite Gauss-Legendre)."""
    if path.d == 0:
        return 0.0
    nodes, weights = np.polynomial.legendre.leggauss(5)
    length = 0.0
    for a, b in path.segments:
        edges = np.linspace(a, b, panels + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = 0.5 * (hi - lo)
            mid = 0.5 * (hi + lo)
            for x, w in zip(nodes, weights):
                length += w * half * float(np.linalg.norm(path.derivative(mid + half * x)))
    return length


# =============================================================================
# Transport and phases
# =============================================================================

def abelian_phase(W: np.ndarray) -> float:
    """arg(w) in (-pi, pi] when W = w * I; the winding number is not recovered."""
    W = np.asarray(W, dtype=complex)
    defect = unitarity_defect(W)
    if defect > SCALAR_TOL:
        raise FormatError(f"holonomy is not unitary (defect {defect:.3e})")
    n = W.shape[0]
    w = np.trace(W) / n
    spread = frobenius(W - w * np.eye(n))
    if spread > SCALAR_TOL:
        raise NonScalarHolonomy(f"holonomy is not a multiple of the identity (distance {spread:.3e})")
    return wrap_phase(float(np.angle(w)))


def parallel_transport(sys: PullbackSystem, loop: ZCurve, cfg: IntegratorConfig) -> HolonomyResult:
    """W = T exp[i int_h A_m dsigma^m] with the connection frozen at loop.t_slice."""
    path = loop.path
    sys.check_path(path)
    prop = integrate_generator(
        lambda s: connection_generator(sys, path, s, loop.t_slice),
        sys.n, path.t0, path.t1, cfg,
        breakpoints=path.breakpoints,
        label=f"transport '{path.name}'",
    )
    W = prop.U
    try:
        abelian = abelian_phase(W)
    except NonScalarHolonomy:
        abelian = None
    eigenphases = sorted(wrap_phase(float(x)) for x in np.angle(np.linalg.eigvals(W)))
    logger.info(f"[HOLONOMY] '{path.name}': {prop.steps_taken} steps, abelian phase {abelian}")
    return HolonomyResult(
        W=W,
        loop_length=curve_length(path),
        defect=prop.defect,
        abelian=abelian,
        eigenphases=eigenphases,
        steps_taken=prop.steps_taken,
    )


def slice_consistency(
    sys: PullbackSystem,
    curve: ZCurve,
    cfg: IntegratorConfig,
    t_slice_a: float,
    t_slice_b: float,
) -> float:
    """||W(t_slice_a) - W(t_slice_b)||; small whenever A_m is t-independent."""
    W_a = parallel_transport(sys, ZCurve(curve.path, t_slice_a), cfg).W
    W_b = parallel_transport(sys, ZCurve(curve.path, t_slice_b), cfg).W
    return frobenius(W_a - W_b)


def aharonov_bohm_check(
    alpha: float,
    winding: int,
    cfg: IntegratorConfig,
    contractible: bool = False,
) -> tuple[float, float]:
    """Transport around the puncture of the flat connection alpha * dtheta.

    Returns:
        (computed abelian phase, expected phase wrap(2 pi alpha w)); the
        expected phase of the contractible loop is 0.
    """
    # lazy import to avoid circular dependency (scenario loading builds services)
    from holomech.data.scenario import load_scenario

    scenario = load_scenario("aharonov_bohm", overrides={"alpha": alpha, "winding": winding})
    path = scenario.paths["offset_circle" if contractible else "unit_circle"]
    result = parallel_transport(scenario.system, ZLoop(path), cfg)
    computed = abelian_phase(result.W)
    expected = 0.0 if contractible else wrap_phase(2.0 * np.pi * alpha * winding)
    return computed, expected


# =============================================================================
# Geometric x dynamical factorization
# =============================================================================

@dataclass(frozen=True)
class Factorization:
    W_geo: np.ndarray
    U_dyn: np.ndarray
    G: np.ndarray
    mismatch: float


def commutation_defect(sys: PullbackSystem, h: ParameterPath, samples: int = 64) -> float:
    """max_t ||[H(t, h(t)), A_m(t, h(t)) dh^m/dt]||."""
    if samples < 2:
        raise FormatError("commutation_defect needs at least 2 samples")
    sys.check_path(h)
    worst = 0.0
    for t in np.linspace(h.t0, h.t1, samples):
        point = h.point(float(t))
        H = sys.hamiltonian.evaluate(point)
        C = np.zeros_like(H)
        for field, v in zip(sys.connection, h.derivative(float(t))):
            C += v * field.evaluate(point)
        worst = max(worst, frobenius(commutator(H, C)))
    return worst


def _warn_if_time_dependent(sys: PullbackSystem, h: ParameterPath, t: float) -> None:
    for s in np.linspace(h.t0, t, 5):
        early = h.point(float(s), at=h.t0)
        late = h.point(float(s), at=t)
        for m, field in enumerate(sys.connection, start=1):
            if frobenius(field.evaluate(early) - field.evaluate(late)) > 1e-12:
                logger.warning(
                    f"[HOLONOMY] connection component {m} changes between t = {h.t0:g} and t = {t:g}; "
                    "the factorized form assumes a time-independent connection"
                )
                return


def factorized_propagator(
    sys: PullbackSystem,
    h: ParameterPath,
    t: float,
    cfg: IntegratorConfig,
    t_slice: Optional[float] = None,
) -> Factorization:
    """Compare W_geo . U_dyn (geometric factor on the left) with the full G_t."""
    sys.check_path(h)
    _warn_if_time_dependent(sys, h, t)
    path = h.restricted(h.t0, t)
    t_slice = h.t0 if t_slice is None else t_slice

    W_geo = parallel_transport(sys, ZCurve(path, t_slice), cfg).W
    U_dyn = integrate_generator(
        lambda s: sys.sign * sys.hamiltonian.evaluate(path.point(s)),
        sys.n, path.t0, path.t1, cfg,
        breakpoints=path.breakpoints,
        label=f"dynamical '{path.name}'",
    ).U
    G = time_ordered_exp(sys, path, path.t0, path.t1, cfg).U
    mismatch = frobenius(W_geo @ U_dyn - G)
    logger.info(f"[HOLONOMY] factorization mismatch {mismatch:.3e}")
    return Factorization(W_geo=W_geo, U_dyn=U_dyn, G=G, mismatch=mismatch)


# =============================================================================
# Adiabatic block decomposition
# =============================================================================

@dataclass(frozen=True)
class ReducedBlock:
    block: SpectralBlock
    system: PullbackSystem


@dataclass(frozen=True)
class BlockSystem:
    blocks: list[ReducedBlock]
    residual: float


def block_decompose(
    sys: PullbackSystem,
    h: ParameterPath,
    gap_tol: float = 1e-8,
    leak_tol: float = 1e-8,
    samples: int = 33,
) -> BlockSystem:
    """Split the system along the eigenspaces E_k of H taken at h's start.

    Raises:
        DriftingProjectors: P_k moves along h by more than leak_tol
        EigenspaceNotPreserved: some A_m leaks out of an eigenspace by more than leak_tol
    """
    if samples < 2:
        raise FormatError("block_decompose needs at least 2 samples")
    sys.check_path(h)
    reference = spectral_projectors(sys.hamiltonian.evaluate(h.point(h.t0)), gap_tol)
    identity = np.eye(sys.n)

    residual = 0.0
    for t in np.linspace(h.t0, h.t1, samples):
        point = h.point(float(t))
        current = spectral_projectors(sys.hamiltonian.evaluate(point), gap_tol)
        if len(current) != len(reference):
            raise DriftingProjectors(
                f"H has {len(current)} eigenspaces at t = {t:g}, {len(reference)} at the start of '{h.name}'"
            )
        for ref in reference:
            drift = min(frobenius(ref.projector - blk.projector) for blk in current)
            if drift > leak_tol:
                raise DriftingProjectors(f"eigenprojector drifts by {drift:.3e} at t = {t:g}")
        for field in sys.connection:
            A = field.evaluate(point)
            for ref in reference:
                P = ref.projector
                residual = max(residual, frobenius((identity - P) @ A @ P))

    if residual > leak_tol:
        raise EigenspaceNotPreserved(f"connection leaks out of an eigenspace (off-block norm {residual:.3e})")

    blocks = [ReducedBlock(block=ref, system=sys.restrict_basis(ref.basis)) for ref in reference]
    logger.info(f"[HOLONOMY] {len(blocks)} blocks of dims {[b.block.block_dim for b in blocks]}, residual {residual:.2e}")
    return BlockSystem(blocks=blocks, residual=residual)


def _dynamical_phase(reduced: PullbackSystem, path: ParameterPath) -> float:
    dim = reduced.n

    def eigenvalue(s: float) -> float:
        return float(np.real(np.trace(reduced.hamiltonian.evaluate(path.point(s))))) / dim

    levels = [eigenvalue(float(s)) for s in np.linspace(path.t0, path.t1, 9)]
    if max(levels) - min(levels) <= 1e-8:
        integral = levels[0] * (path.t1 - path.t0)
    else:
        integral, _ = scipy.integrate.quad(
            eigenvalue, path.t0, path.t1,
            points=path.breakpoints or None, epsabs=1e-13, epsrel=1e-12, limit=200,
        )
    return reduced.sign * integral


def phase_split(
    sys: PullbackSystem,
    h: ParameterPath,
    t: float,
    gap_tol: float,
    leak_tol: float,
    cfg: IntegratorConfig,
    samples: int = 33,
) -> list[BlockPhase]:
    """Per eigenspace block: geometric transport unitary and dynamical phase over [h.t0, t]."""
    path = h.restricted(h.t0, t)
    decomposition = block_decompose(sys, path, gap_tol, leak_tol, samples)

    phases = []
    for reduced in decomposition.blocks:
        geometric = parallel_transport(reduced.system, ZCurve(path, path.t0), cfg).W
        geometric_phase = wrap_phase(float(np.angle(geometric[0, 0]))) if reduced.block.block_dim == 1 else None
        phases.append(BlockPhase(
            eigenvalue=reduced.block.eigenvalue,
            block_dim=reduced.block.block_dim,
            basis=reduced.block.basis,
            geometric=geometric,
            dynamical_phase=_dynamical_phase(reduced.system, path),
            geometric_phase=geometric_phase,
        ))
    return phases


def reconstruct_propagator(phases: list[BlockPhase]) -> np.ndarray:
    """sum_k V_k (e^{i dyn_k} geo_k) V_k^dagger."""
    n = phases[0].basis.shape[0]
    G = np.zeros((n, n), dtype=complex)
    for block in phases:
        V = block.basis
        G += V @ (np.exp(1j * block.dynamical_phase) * block.geometric) @ dagger(V)
    return G

"""Tests for parallel transport, Berry phases and block decomposition."""

import logging

import numpy as np
import pytest
import scipy.integrate

from builders import SIGMA_X, SIGMA_Z, circle, field, path, random_loop, random_system
from holomech.data.expression import parse_expression
from holomech.data.scenario import load_scenario
from holomech.errors import DriftingProjectors, EigenspaceNotPreserved, FormatError, NonScalarHolonomy
from holomech.models import IntegratorConfig
from holomech.services.bundle import ParameterPath, PullbackSystem, pullback_generator
from holomech.services.holonomy import (
    ZCurve,
    ZLoop,
    abelian_phase,
    aharonov_bohm_check,
    block_decompose,
    commutation_defect,
    connection_generator,
    curve_length,
    factorized_propagator,
    parallel_transport,
    phase_split,
    reconstruct_propagator,
    slice_consistency,
)
from holomech.services.operators import frobenius, matrix_exp, phase_distance, unitarity_defect, wrap_phase
from holomech.services.propagator import fixed_step_exp, time_ordered_exp


def cube_reparameterized(h: ParameterPath) -> ParameterPath:
    """Same loop traversed with s = t^3 on [0, 1]."""
    cube = {"t": parse_expression("t^3")}
    return ParameterPath(h.t0, h.t1, [c.substitute(cube) for c in h.coords], closed=h.closed, name=f"{h.name}^3")


class TestAbelianPhase:
    """Scalar holonomies."""

    def test_scalar(self):
        assert abelian_phase(np.exp(0.3j) * np.eye(3)) == pytest.approx(0.3)

    def test_branch(self):
        assert abelian_phase(-np.eye(2)) == pytest.approx(np.pi)

    def test_non_scalar(self):
        with pytest.raises(NonScalarHolonomy):
            abelian_phase(matrix_exp(0.2j * SIGMA_Z))

    def test_non_unitary(self):
        with pytest.raises(FormatError):
            abelian_phase(2.0 * np.eye(2))


class TestAharonovBohm:
    """Flat connection alpha * dtheta around the puncture."""

    @pytest.mark.parametrize("alpha", [0.0, 0.1, 0.25, 0.5, 0.9])
    def test_phase_is_two_pi_alpha(self, alpha, cf4):
        computed, expected = aharonov_bohm_check(alpha, 1, cf4)
        assert expected == pytest.approx(wrap_phase(2 * np.pi * alpha))
        assert phase_distance(computed, expected) <= 1e-6

    def test_winding_two(self, cf4):
        computed, expected = aharonov_bohm_check(0.1, 2, cf4)
        assert phase_distance(computed, wrap_phase(0.4 * np.pi)) <= 1e-6

    @pytest.mark.parametrize("alpha", [0.25, 0.9])
    def test_contractible_loop_is_trivial(self, alpha, cf4):
        computed, expected = aharonov_bohm_check(alpha, 1, cf4, contractible=True)
        assert expected == 0.0
        assert abs(computed) <= 1e-6

    def test_open_quarter_arc(self, cf4):
        scenario = load_scenario("aharonov_bohm", overrides={"alpha": 0.25})
        arc = scenario.paths["unit_circle"].restricted(0.0, 0.25)
        result = parallel_transport(scenario.system, ZCurve(arc), cf4)
        assert result.abelian == pytest.approx(2 * np.pi * 0.25 / 4, abs=1e-7)
        assert result.loop_length == pytest.approx(np.pi / 2, rel=1e-9)

    def test_loop_requires_closed_path(self):
        with pytest.raises(FormatError):
            ZLoop(path(["t", "t"]))


class TestSpinHalfCone:
    """Eigenstate Berry phase on a cone of fixed polar angle."""

    @pytest.mark.parametrize("theta", [np.pi / 6, np.pi / 4, np.pi / 3, np.pi / 2])
    def test_upper_block_phase_is_half_solid_angle(self, theta, cf4):
        scenario = load_scenario("spin_half_cone", overrides={"theta": theta})
        h = scenario.paths["cone"]
        phases = phase_split(scenario.system, h, h.t1, 1e-8, 1e-8, cf4)
        upper = phases[-1]
        assert upper.eigenvalue == pytest.approx(1.0)
        solid_half = np.pi * (1 - np.cos(theta))
        assert phase_distance(abs(upper.geometric_phase), solid_half) <= 1e-5
        assert phase_distance(upper.geometric_phase, wrap_phase(-solid_half)) <= 1e-5
        assert upper.dynamical_phase == pytest.approx(1.0, abs=1e-12)

    def test_fine_product_oracle(self, cf4):
        scenario = load_scenario("spin_half_cone", overrides={"theta": np.pi / 3})
        h = scenario.paths["cone"]
        reduced = block_decompose(scenario.system, h).blocks[-1].system
        oracle = fixed_step_exp(lambda s: connection_generator(reduced, h, s, 0.0), 1, 0.0, 1.0, 100_000,
                                "exp-midpoint-2")
        W = parallel_transport(reduced, ZLoop(h), cf4).W
        assert abs(W[0, 0] - oracle[0, 0]) <= 1e-6
        assert phase_distance(float(np.angle(oracle[0, 0])), -np.pi / 2) <= 1e-5


class TestReparameterization:
    """Holonomy depends on the loop, not its parameterization."""

    def test_cubic_reparameterization(self):
        rng = np.random.default_rng(99)
        cfg = IntegratorConfig(method="magnus-cf-4", tol=1e-7)
        for k in range(20):
            sys = random_system(rng, 2, 2)
            loop = random_loop(rng, 2, name=f"loop{k}")
            W = parallel_transport(sys, ZLoop(loop), cfg).W
            W3 = parallel_transport(sys, ZLoop(cube_reparameterized(loop)), cfg).W
            assert frobenius(W - W3) <= 5 * cfg.tol

    def test_curve_length_of_circle(self):
        assert curve_length(circle(radius=2.0)) == pytest.approx(4 * np.pi, rel=1e-10)


class TestSliceConsistency:
    """W does not depend on the slice when A is time independent."""

    def test_time_independent_connection(self, cf4):
        sys = PullbackSystem(field(2), [field(2, ("s2", SIGMA_X)), field(2, ("0.3", SIGMA_Z))])
        loop = ZLoop(circle())
        assert slice_consistency(sys, loop, cf4, 0.0, 5.0) <= 1e-7

    def test_time_dependent_connection(self, cf4):
        sys = PullbackSystem(field(2), [field(2, ("s2*cos(t)", SIGMA_X)), field(2, ("0.3", SIGMA_Z))])
        loop = ZLoop(circle())
        assert slice_consistency(sys, loop, cf4, 0.0, 2.0) > 1e-3

    def test_eigenphases_reported(self, cf4):
        sys = PullbackSystem(field(2), [field(2, ("s2", SIGMA_X)), field(2, ("0.3 + s1", SIGMA_Z))])
        result = parallel_transport(sys, ZLoop(circle()), cf4)
        assert result.abelian is None
        assert len(result.eigenphases) == 2
        assert result.eigenphases == sorted(result.eigenphases)
        np.testing.assert_allclose(np.sort(np.angle(np.linalg.eigvals(result.W))), result.eigenphases, atol=1e-12)


class TestFactorization:
    """G = W_geo . U_dyn exactly when H and the connection commute."""

    def test_commuting_template(self, cf4):
        scenario = load_scenario("commuting_factorization")
        h = scenario.paths["loop"]
        result = factorized_propagator(scenario.system, h, h.t1, cf4)
        assert result.mismatch <= 10 * cf4.tol
        assert commutation_defect(scenario.system, h) <= 1e-12

    def test_noncommuting_template(self, cf4):
        scenario = load_scenario("noncommuting_factorization")
        h = scenario.paths["loop"]
        result = factorized_propagator(scenario.system, h, h.t1, cf4)
        assert result.mismatch > 0.01
        assert commutation_defect(scenario.system, h) > 0.1

    def test_partial_interval(self, cf4):
        scenario = load_scenario("commuting_factorization")
        h = scenario.paths["loop"]
        result = factorized_propagator(scenario.system, h, 1.2, cf4)
        G = time_ordered_exp(scenario.system, h, 0.0, 1.2, cf4).U
        assert frobenius(result.G - G) <= 5 * cf4.tol
        assert result.mismatch <= 10 * cf4.tol

    def test_factorization_holds_exactly_when_connection_is_scalar(self, cf4):
        rng = np.random.default_rng(2024)
        identity = np.eye(2)
        scalar_ok = 0
        for k in range(50):
            base = random_system(rng, 2, 2)
            connection = [
                field(2, (f"{rng.uniform(0.1, 0.6):.6f} + {rng.uniform(0.1, 0.6):.6f}*sin(s{m})", identity))
                for m in (1, 2)
            ]
            sys = PullbackSystem(base.hamiltonian, connection)
            h = random_loop(rng, 2, name=f"scalar{k}")
            scalar_ok += factorized_propagator(sys, h, h.t1, cf4).mismatch <= 1e-6
        assert scalar_ok == 50

    def test_factorization_fails_for_generic_systems(self, cf4):
        rng = np.random.default_rng(2025)
        failures = 0
        for k in range(50):
            sys = random_system(rng, 2, 2)
            h = random_loop(rng, 2, name=f"generic{k}")
            failures += factorized_propagator(sys, h, h.t1, cf4).mismatch > 1e-3
        assert failures >= 45

    def test_time_dependent_connection_warns(self, cf4, caplog):
        sys = PullbackSystem(field(2, ("0.2", SIGMA_Z)), [field(2, ("cos(t)", np.eye(2)))])
        h = path(["t"], t1=1.0)
        with caplog.at_level(logging.WARNING, logger="holomech.holonomy"):
            factorized_propagator(sys, h, 1.0, cf4)
        assert any("time-independent connection" in r.getMessage() for r in caplog.records)


class TestLoopAlgebra:
    """Holonomy of composed, reversed and abelian loops."""

    @staticmethod
    def _based_loops(rng):
        """Two closed loops through the origin."""
        a, b, c, e = rng.uniform(0.3, 1.0, 4)
        first = path([f"{a:.6f}*(cos(2*pi*t) - 1)", f"{b:.6f}*sin(2*pi*t)"], closed=True, name="first")
        second = path([f"{c:.6f}*sin(2*pi*t)", f"{e:.6f}*(1 - cos(4*pi*t))"], closed=True, name="second")
        return first, second

    def test_composition_puts_later_loop_on_the_left(self):
        rng = np.random.default_rng(31)
        cfg = IntegratorConfig(method="magnus-cf-4", tol=1e-9)
        for _ in range(5):
            sys = random_system(rng, 2, 2)
            first, second = self._based_loops(rng)
            joined = first.concatenate(second)
            assert joined.closed
            W1 = parallel_transport(sys, ZLoop(first), cfg).W
            W2 = parallel_transport(sys, ZLoop(second), cfg).W
            W = parallel_transport(sys, ZLoop(joined), cfg).W
            assert frobenius(W - W2 @ W1) <= 1e-6

    def test_reversed_loop_gives_inverse(self):
        rng = np.random.default_rng(32)
        cfg = IntegratorConfig(method="magnus-cf-4", tol=1e-9)
        for k in range(5):
            sys = random_system(rng, 3, 2)
            loop = random_loop(rng, 2, name=f"loop{k}")
            W = parallel_transport(sys, ZLoop(loop), cfg).W
            W_back = parallel_transport(sys, ZLoop(loop.reversed()), cfg).W
            assert frobenius(W_back @ W - np.eye(3)) <= 1e-6

    def test_abelian_phase_matches_line_integral(self, cf4):
        # A = s2 ds1 + s1^2 ds2 on n = 1
        sys = PullbackSystem(field(1), [field(1, ("s2", np.eye(1))), field(1, ("s1^2", np.eye(1)))])
        rng = np.random.default_rng(33)
        for _ in range(5):
            cx, cy, r = rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.2, 1.0)
            loop = circle(radius=r, center=(round(cx, 6), round(cy, 6)))
            cx, cy = round(cx, 6), round(cy, 6)

            def integrand(s):
                x, y = cx + r * np.cos(2 * np.pi * s), cy + r * np.sin(2 * np.pi * s)
                dx, dy = -2 * np.pi * r * np.sin(2 * np.pi * s), 2 * np.pi * r * np.cos(2 * np.pi * s)
                return y * dx + x * x * dy

            integral, _ = scipy.integrate.quad(integrand, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)
            assert integral == pytest.approx((2 * cx - 1) * np.pi * r * r, abs=1e-10)
            phase = abelian_phase(parallel_transport(sys, ZLoop(loop), cf4).W)
            assert phase_distance(phase, wrap_phase(integral)) <= 1e-6


class TestBlockDecomposition:
    """Adiabatic splitting along eigenspaces of H."""

    def test_blocks_and_reconstruction(self, cf4):
        scenario = load_scenario("block_adiabatic")
        h = scenario.paths["loop"]
        decomposition = block_decompose(scenario.system, h)
        assert [b.block.block_dim for b in decomposition.blocks] == [2, 1]
        assert decomposition.residual <= 1e-12

        phases = phase_split(scenario.system, h, h.t1, 1e-8, 1e-8, cf4)
        G = time_ordered_exp(scenario.system, h, h.t0, h.t1, cf4).U
        assert frobenius(reconstruct_propagator(phases) - G) <= 10 * cf4.tol
        assert phases[0].geometric_phase is None
        assert phases[0].dynamical_phase == pytest.approx(2 * np.pi)
        assert phases[1].dynamical_phase == pytest.approx(4 * np.pi)

    def test_leaking_connection(self, cf4):
        scenario = load_scenario("block_adiabatic", overrides={"leak": 0.3})
        with pytest.raises(EigenspaceNotPreserved):
            block_decompose(scenario.system, scenario.paths["loop"])

    def test_drifting_projectors(self):
        sys = PullbackSystem(field(2, ("cos(s1)", SIGMA_Z), ("sin(s1)", SIGMA_X)), [field(2)])
        with pytest.raises(DriftingProjectors):
            block_decompose(sys, path(["t"], t1=1.0))

    def test_projector_samples(self):
        # H turns away and back; only interior samples see the drift
        sys = PullbackSystem(field(2, ("cos(s1)", SIGMA_Z), ("sin(s1)", SIGMA_X)), [field(2)])
        h = path(["sin(2*pi*t)"], t1=1.0)
        assert len(block_decompose(sys, h, samples=2).blocks) == 2
        with pytest.raises(DriftingProjectors):
            block_decompose(sys, h, samples=33)
        with pytest.raises(FormatError):
            block_decompose(sys, h, samples=1)

    @pytest.mark.parametrize("name, loop", [("block_adiabatic", "loop"), ("spin_half_cone", "cone")])
    def test_block_geometric_factors_are_unitary(self, name, loop, cf4):
        scenario = load_scenario(name)
        h = scenario.paths[loop]
        for block in phase_split(scenario.system, h, h.t1, 1e-8, 1e-8, cf4):
            assert unitarity_defect(block.geometric) <= 1e-10

    def test_physics_sign_flips_phases(self, cf4):
        scenario = load_scenario("spin_half_cone", sign_convention="physics")
        h = scenario.paths["cone"]
        upper = phase_split(scenario.system, h, h.t1, 1e-8, 1e-8, cf4)[-1]
        assert phase_distance(upper.geometric_phase, np.pi / 2) <= 1e-5
        assert upper.dynamical_phase == pytest.approx(-1.0, abs=1e-12)

    def test_generator_is_block_diagonal(self):
        scenario = load_scenario("block_adiabatic")
        K = pullback_generator(scenario.system, scenario.paths["loop"], 0.4)
        np.testing.assert_allclose(K[:2, 2], 0.0, atol=1e-14)

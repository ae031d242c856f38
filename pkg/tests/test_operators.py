"""Tests for dense operator algebra."""

import numpy as np
import pytest
import scipy.linalg

from builders import SIGMA_X, SIGMA_Z, random_hermitian
from holomech.errors import DimensionMismatch, NonHermitianInput, SingularInput
from holomech.services.operators import (
    check_hermitian,
    eig_hermitian,
    matrix_exp,
    phase_distance,
    polar_unitarize,
    spectral_projectors,
    unitarity_defect,
    wrap_phase,
)


class TestHermiticity:
    """check_hermitian and input validation."""

    def test_random_hermitian_passes(self, rng):
        assert check_hermitian(random_hermitian(rng, 4))

    def test_non_hermitian_fails(self):
        assert not check_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))

    def test_tolerance_is_respected(self):
        M = SIGMA_X.copy()
        M[0, 1] += 1e-12
        assert check_hermitian(M, 1e-10)
        assert not check_hermitian(M, 1e-14)

    def test_eig_rejects_non_hermitian(self):
        with pytest.raises(NonHermitianInput):
            eig_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))

    def test_eig_rejects_non_square(self):
        with pytest.raises(DimensionMismatch):
            eig_hermitian(np.zeros((2, 3)))


class TestEigHermitian:
    """Eigendecomposition with a deterministic gauge."""

    def test_reconstructs_matrix(self, rng):
        H = random_hermitian(rng, 5)
        w, V = eig_hermitian(H)
        np.testing.assert_allclose(H @ V, V * w, atol=1e-12)
        np.testing.assert_allclose(V.conj().T @ V, np.eye(5), atol=1e-12)
        assert np.all(np.diff(w) >= 0)

    def test_gauge_makes_largest_component_real_positive(self, rng):
        _, V = eig_hermitian(random_hermitian(rng, 4))
        for j in range(4):
            k = int(np.argmax(np.abs(V[:, j])))
            assert abs(V[k, j].imag) < 1e-14
            assert V[k, j].real > 0

    def test_eigenvalues_survive_unitary_conjugation(self, rng):
        for _ in range(10):
            H = random_hermitian(rng, 4)
            U = matrix_exp(1j * random_hermitian(rng, 4))
            w, _ = eig_hermitian(H)
            w_rotated, _ = eig_hermitian(U @ H @ U.conj().T)
            np.testing.assert_allclose(w_rotated, w, atol=1e-12)

    def test_gauge_is_deterministic(self, rng):
        H = random_hermitian(rng, 3)
        np.testing.assert_array_equal(eig_hermitian(H)[1], eig_hermitian(H.copy())[1])


class TestSpectralProjectors:
    """Eigenvalue clustering."""

    def test_degenerate_block(self):
        blocks = spectral_projectors(np.diag([1.0, 1.0, 2.0]).astype(complex))
        assert [b.block_dim for b in blocks] == [2, 1]
        assert [b.eigenvalue for b in blocks] == pytest.approx([1.0, 2.0])
        total = sum(b.projector for b in blocks)
        np.testing.assert_allclose(total, np.eye(3), atol=1e-14)
        for b in blocks:
            np.testing.assert_allclose(b.projector @ b.projector, b.projector, atol=1e-14)

    def test_near_degenerate_eigenvalues_cluster(self):
        blocks = spectral_projectors(np.diag([1.0, 1.0 + 1e-10, 2.0]).astype(complex), gap_tol=1e-8)
        assert [b.block_dim for b in blocks] == [2, 1]

    def test_resolved_gap_splits(self):
        blocks = spectral_projectors(np.diag([1.0, 1.0 + 1e-6, 2.0]).astype(complex), gap_tol=1e-8)
        assert len(blocks) == 3

    @pytest.mark.parametrize("diagonal", [None, [1.0, 1.0, 2.0, -0.5]])
    def test_spectral_resolution(self, rng, diagonal):
        if diagonal is None:
            H = random_hermitian(rng, 4)
        else:
            U = matrix_exp(1j * random_hermitian(rng, 4))
            H = U @ np.diag(diagonal) @ U.conj().T
        resolved = sum(b.eigenvalue * b.projector for b in spectral_projectors(H))
        np.testing.assert_allclose(resolved, H, atol=1e-12)

    def test_projectors_commute_with_h(self, rng):
        H = random_hermitian(rng, 4)
        for b in spectral_projectors(H):
            np.testing.assert_allclose(H @ b.projector, b.projector @ H, atol=1e-12)


class TestMatrixExp:
    """exp on the unitary group."""

    def test_unitary_for_skew_hermitian(self, rng):
        U = matrix_exp(1j * random_hermitian(rng, 6, scale=10.0))
        assert unitarity_defect(U) < 1e-12

    def test_agrees_with_scipy(self, rng):
        A = 1j * random_hermitian(rng, 3)
        np.testing.assert_allclose(matrix_exp(A), scipy.linalg.expm(A), atol=1e-12)

    def test_inverse_is_exp_of_negative(self, rng):
        for _ in range(10):
            A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            np.testing.assert_allclose(matrix_exp(A) @ matrix_exp(-A), np.eye(4), atol=1e-10)

    def test_similarity_commutes_with_exp(self, rng):
        for _ in range(10):
            A = 1j * random_hermitian(rng, 3)
            P = np.eye(3) + 0.3 * (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
            P_inv = np.linalg.inv(P)
            np.testing.assert_allclose(matrix_exp(P @ A @ P_inv), P @ matrix_exp(A) @ P_inv, atol=1e-10)

    def test_general_matrix_uses_pade(self):
        A = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
        np.testing.assert_allclose(matrix_exp(A), [[1.0, 1.0], [0.0, 1.0]], atol=1e-15)

    def test_zero_gives_identity(self):
        np.testing.assert_allclose(matrix_exp(np.zeros((3, 3))), np.eye(3), atol=1e-15)

    def test_pauli_rotation(self):
        theta = 0.7
        expected = np.cos(theta) * np.eye(2) + 1j * np.sin(theta) * SIGMA_Z
        np.testing.assert_allclose(matrix_exp(1j * theta * SIGMA_Z), expected, atol=1e-15)


class TestUnitarity:
    """Defect and polar re-unitarization."""

    def test_identity_has_zero_defect(self):
        assert unitarity_defect(np.eye(4)) == 0.0

    def test_polar_restores_unitarity(self, rng):
        U = matrix_exp(1j * random_hermitian(rng, 3))
        noisy = U + 1e-6 * rng.normal(size=(3, 3))
        assert unitarity_defect(noisy) > 1e-8
        fixed = polar_unitarize(noisy)
        assert unitarity_defect(fixed) < 1e-13
        assert np.linalg.norm(fixed - U) < 1e-5

    def test_polar_is_idempotent(self, rng):
        noisy = matrix_exp(1j * random_hermitian(rng, 3)) + 1e-4 * rng.normal(size=(3, 3))
        once = polar_unitarize(noisy)
        np.testing.assert_allclose(polar_unitarize(once), once, atol=1e-13)

    def test_singular_input(self):
        with pytest.raises(SingularInput):
            polar_unitarize(np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex))


class TestPhases:
    """Phase wrapping onto (-pi, pi]."""

    @pytest.mark.parametrize("x, expected", [
        (0.0, 0.0),
        (np.pi, np.pi),
        (-np.pi, np.pi),
        (3 * np.pi - 0.2, np.pi - 0.2),
        (2 * np.pi + 0.1, 0.1),
        (-0.5, -0.5),
    ])
    def test_wrap(self, x, expected):
        assert wrap_phase(x) == pytest.approx(expected, abs=1e-12)

    def test_distance_across_branch_cut(self):
        assert phase_distance(np.pi - 1e-3, -np.pi + 1e-3) == pytest.approx(2e-3, abs=1e-12)

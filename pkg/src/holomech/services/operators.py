"""Dense complex matrix algebra on C^n (hbar = 1).

Matrices are plain ``numpy`` complex arrays; every function here is pure.
"""

import logging

import numpy as np
import scipy.linalg

from holomech.errors import DimensionMismatch, NonHermitianInput, SingularInput
from holomech.models import SpectralBlock

logger = logging.getLogger("holomech.operators")

# Hermiticity tolerance used when a caller does not pass one
HERMITIAN_TOL = 1e-10


def as_cmatrix(M, dim: int | None = None) -> np.ndarray:
    """Validate and convert to a square, finite complex matrix.

    Args:
        M: Array-like n x n
        dim: Expected dimension (optional)

    Returns:
        Complex ndarray of shape (n, n)
    """
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {A.shape}")
    if dim is not None and A.shape[0] != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {A.shape[0]}")
    if not np.all(np.isfinite(A)):
        raise DimensionMismatch("matrix has non-finite entries")
    return A


def as_cvector(v, dim: int | None = None) -> np.ndarray:
    """Validate and convert to a finite complex vector."""
    x = np.asarray(v, dtype=complex)
    if x.ndim != 1 or x.shape[0] == 0:
        raise DimensionMismatch(f"expected a non-empty vector, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise DimensionMismatch("vector has non-finite entries")
    return x


def dagger(M: np.ndarray) -> np.ndarray:
    return M.conj().T


def frobenius(M: np.ndarray) -> float:
    return float(np.linalg.norm(M, "fro"))


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B - B @ A


def check_hermitian(M: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    """True iff the max-entry norm of M - M^dagger is at most tol."""
    if tol < 0:
        raise ValueError("tol must be non-negative")
    M = np.asarray(M, dtype=complex)
    return bool(np.max(np.abs(M - dagger(M)), initial=0.0) <= tol)


def _require_hermitian(H: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    H = as_cmatrix(H)
    if not check_hermitian(H, tol):
        raise NonHermitianInput(f"matrix is not Hermitian within {tol:g}")
    return 0.5 * (H + dagger(H))


def eig_hermitian(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian eigendecomposition with a deterministic gauge.

    Eigenvalues ascend; in each eigenvector the largest-magnitude component
    (first one on ties) is made real and positive.

    Returns:
        (eigenvalues, V) with H @ V[:, j] = eigenvalues[j] * V[:, j]
    """
    H = _require_hermitian(H)
    w, V = scipy.linalg.eigh(H)
    for j in range(V.shape[1]):
        k = int(np.argmax(np.abs(V[:, j])))
        pivot = V[k, j]
        V[:, j] *= np.conj(pivot) / abs(pivot)
    return w, V


def spectral_projectors(H: np.ndarray, gap_tol: float = 1e-8) -> list[SpectralBlock]:
    """Cluster the spectrum of H and return one block per cluster.

    Adjacent eigenvalues belong to one cluster when their gap is at most
    gap_tol * max(1, spectral radius).
    """
    if gap_tol <= 0:
        raise ValueError("gap_tol must be positive")
    w, V = eig_hermitian(H)
    threshold = gap_tol * max(1.0, float(np.max(np.abs(w))))

    clusters: list[list[int]] = [[0]]
    for j in range(1, len(w)):
        if w[j] - w[j - 1] <= threshold:
            clusters[-1].append(j)
        else:
            clusters.append([j])

    blocks = []
    for idx in clusters:
        basis = V[:, idx]
        blocks.append(SpectralBlock(
            eigenvalue=float(np.mean(w[idx])),
            projector=basis @ dagger(basis),
            block_dim=len(idx),
            basis=basis,
        ))
    return blocks


def _is_skew_hermitian(A: np.ndarray) -> bool:
    scale = max(1.0, float(np.max(np.abs(A))))
    return bool(np.max(np.abs(A + dagger(A))) <= 1e-13 * scale)


def matrix_exp(A: np.ndarray) -> np.ndarray:
    """exp(A); exactly unitary output for skew-Hermitian A.

    Skew-Hermitian arguments A = iH go through the eigendecomposition of H,
    everything else through scipy's scaling-and-squaring Pade expm.
    """
    A = as_cmatrix(A)
    if _is_skew_hermitian(A):
        H = -1j * A
        w, V = scipy.linalg.eigh(0.5 * (H + dagger(H)))
        return (V * np.exp(1j * w)) @ dagger(V)
    return scipy.linalg.expm(A)


def unitarity_defect(U: np.ndarray) -> float:
    """Frobenius norm of U^dagger U - I."""
    U = np.asarray(U, dtype=complex)
    return frobenius(dagger(U) @ U - np.eye(U.shape[0]))


def polar_unitarize(U: np.ndarray) -> np.ndarray:
    """Nearest unitary to U (unitary factor of the polar decomposition)."""
    U = as_cmatrix(U)
    smallest = float(scipy.linalg.svdvals(U).min())
    if smallest < 1e-14:
        raise SingularInput(f"smallest singular value {smallest:.3e} below 1e-14")
    W, _ = scipy.linalg.polar(U, side="right")
    return W


def wrap_phase(x: float) -> float:
    """Map an angle onto (-pi, pi]."""
    return float(np.pi - np.mod(np.pi - x, 2.0 * np.pi))


def phase_distance(a: float, b: float) -> float:
    """|a - b| measured on the circle."""
    return abs(wrap_phase(a - b))

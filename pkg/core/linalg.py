"""
Dense symmetric linear algebra used by every solver.
Thin wrappers over LAPACK (through scipy) that translate failures into
the package's own error types.
"""

from typing import Tuple

import numpy as np
from numpy.typing import NDArray
from scipy import linalg as sla
from scipy.linalg import lapack

from core.errors import DimensionMismatch, NoConvergence, NotPositiveDefinite

# Symmetric matrices are plain float64 arrays; the lower triangle is authoritative.
SymMatrix = NDArray[np.float64]


def _as_square(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    return A


def symmetrize(A) -> SymMatrix:
    """Return (A + Aᵀ)/2 so both triangles agree exactly."""
    A = _as_square(A)
    return 0.5 * (A + A.T)


def cholesky(A) -> np.ndarray:
    """
    Lower-triangular Cholesky factor L with L Lᵀ = A.

    Args:
        A: Symmetric positive definite matrix (lower triangle is read)

    Returns:
        L, with the strict upper triangle zeroed

    Raises:
        NotPositiveDefinite: carries the 0-based index of the failing pivot
    """
    A = _as_square(A)
    if A.shape[0] == 0:
        return A.copy()
    factor, info = lapack.dpotrf(A, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefinite(info - 1)
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    return factor


def sym_eig(A) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigen-decomposition of a symmetric matrix.

    Returns:
        (eigenvalues ascending, orthonormal eigenvectors as columns)

    Raises:
        NoConvergence: LAPACK reported non-convergence
    """
    A = _as_square(A)
    if A.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0))
    if not np.all(np.isfinite(A)):
        raise NoConvergence("(non-finite input)")
    try:
        w, V = sla.eigh(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"({exc})") from exc
    return w, V


def sym_eigvals(A) -> np.ndarray:
    """Eigenvalues only, ascending."""
    A = _as_square(A)
    if A.shape[0] == 0:
        return np.zeros(0)
    try:
        return sla.eigh(A, lower=True, eigvals_only=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NoConvergence(f"({exc})") from exc


def solve_posdef(A, b) -> np.ndarray:
    """Solve A x = b for symmetric positive definite A via its Cholesky factor."""
    L = cholesky(A)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != L.shape[0]:
        raise DimensionMismatch(f"rhs has {b.shape[0]} rows, matrix has {L.shape[0]}")
    return sla.cho_solve((L, True), b, check_finite=False)


def min_eigenvalue(A) -> float:
    w = sym_eigvals(A)
    return float(w[0]) if w.size else 0.0


def psd_violation(A) -> float:
    """
    How far A is from the PSD cone, relative to its scale.

    Returns:
        max(0, -λ_min) / (1 + max(λ_max, 0))
    """
    w = sym_eigvals(symmetrize(A))
    if w.size == 0:
        return 0.0
    return max(0.0, -float(w[0])) / (1.0 + max(float(w[-1]), 0.0))

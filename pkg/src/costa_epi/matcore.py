"""Dense symmetric-matrix numerics.

Symmetric matrices are plain read-only ``numpy`` arrays produced by
:func:`sym`; every other function here accepts anything array-like and
symmetrizes on entry.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatchError,
    EigenSolverError,
    NotCommutingError,
    NotPSDError,
    SingularMatrixError,
)

DEFAULT_TOL = 1e-9
SQRT_CLAMP_TOL = 1e-10

SymMatrix = np.ndarray


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # ascending
    basis: np.ndarray  # columns are eigenvectors


def sym(m, name: str = "matrix") -> SymMatrix:
    """Return ``(m + m.T) / 2`` as a read-only float array.

    Raises ``ValueError`` for non-square, empty or non-finite input.
    """
    a = np.array(m, dtype=float, copy=True)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"{name}: expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name}: entries must be finite")
    a = 0.5 * (a + a.T)
    a.setflags(write=False)
    return a


def identity(n: int) -> SymMatrix:
    return sym(np.eye(n))


def spectral_norm(m) -> float:
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def _check_same_dim(a, b):
    if a.shape != b.shape:
        raise DimensionMismatchError(f"dimension mismatch: {a.shape} vs {b.shape}")


def _fix_signs(basis: np.ndarray) -> np.ndarray:
    # first component with |v_i| above noise is made positive
    basis = basis.copy()
    for j in range(basis.shape[1]):
        col = basis[:, j]
        idx = np.flatnonzero(np.abs(col) > 1e-12)
        if idx.size and col[idx[0]] < 0:
            basis[:, j] = -col
    return basis


def sym_eig(m, name: str = "matrix") -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix with a deterministic sign convention."""
    a = sym(m, name)
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigen-solver did not converge for {name}: {exc}") from exc
    return EigenDecomposition(w, _fix_signs(v))


def sym_function(m, fn, name: str = "matrix") -> SymMatrix:
    """Apply a scalar function to the spectrum: ``U f(L) U^T``."""
    w, v = sym_eig(m, name)
    return sym((v * fn(w)) @ v.T, name)


def psd_sqrt(m, tol: float = SQRT_CLAMP_TOL, name: str = "matrix") -> SymMatrix:
    """The unique PSD square root.

    Eigenvalues in ``[-tol*||M||, 0)`` are clamped to zero; anything lower
    raises :class:`NotPSDError`.
    """
    w, v = sym_eig(m, name)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    if w[0] < -tol * scale:
        raise NotPSDError(
            f"{name} is not positive semidefinite: eigenvalue {w[0]:.6g}", eigenvalue=float(w[0])
        )
    w = np.clip(w, 0.0, None)
    return sym((v * np.sqrt(w)) @ v.T, name)


def psd_inv_sqrt(m, name: str = "matrix") -> SymMatrix:
    """``M^{-1/2}`` for a positive definite ``M``."""
    w, v = sym_eig(m, name)
    if w[0] <= 0:
        raise SingularMatrixError(f"{name} is not positive definite (min eigenvalue {w[0]:.6g})")
    return sym((v / np.sqrt(w)) @ v.T, name)


def is_psd(m, tol: float = DEFAULT_TOL) -> bool:
    w = np.linalg.eigvalsh(sym(m))
    scale = max(1.0, float(np.max(np.abs(w))))
    return bool(w[0] >= -tol * scale)


def is_pd(m, tol: float = DEFAULT_TOL) -> bool:
    """Strict positive definiteness: every eigenvalue above ``tol*||M||``."""
    w = np.linalg.eigvalsh(sym(m))
    scale = float(np.max(np.abs(w)))
    return bool(scale > 0 and w[0] > tol * scale)


def loewner_leq(a, b, tol: float = DEFAULT_TOL) -> bool:
    """``A <= B`` in the positive semidefinite order."""
    a, b = sym(a), sym(b)
    _check_same_dim(a, b)
    return is_psd(b - a, tol)


def commutator(a, b) -> np.ndarray:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    _check_same_dim(a, b)
    return a @ b - b @ a


def commutes(a, b, tol: float = DEFAULT_TOL) -> bool:
    a, b = sym(a), sym(b)
    c = commutator(a, b)
    return bool(np.max(np.abs(c)) <= tol * (1.0 + spectral_norm(a) * spectral_norm(b)))


def _offdiag_maxabs(m: np.ndarray) -> float:
    if m.shape[0] < 2:
        return 0.0
    return float(np.max(np.abs(m - np.diag(np.diag(m)))))


def simultaneous_diagonalize(a, b, tol: float = DEFAULT_TOL):
    """Common orthogonal eigenbasis of two commuting symmetric matrices.

    Diagonalizes ``A`` first, then diagonalizes ``B`` restricted to each
    (numerically) degenerate eigenspace of ``A``.

    Returns
    -------
    (U, a_diag, b_diag) with ``U.T @ A @ U = diag(a_diag)`` and likewise for B.
    """
    a, b = sym(a, "A"), sym(b, "B")
    _check_same_dim(a, b)
    if not commutes(a, b, tol):
        raise NotCommutingError("simultaneous_diagonalize requires commuting matrices")
    n = a.shape[0]
    w, v = sym_eig(a, "A")
    cluster_tol = max(tol, 1e-8) * max(1.0, float(np.max(np.abs(w))))
    u = v.copy()
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and w[stop] - w[stop - 1] <= cluster_tol:
            stop += 1
        if stop - start > 1:
            block = u[:, start:stop]
            wb, vb = np.linalg.eigh(sym(block.T @ b @ block))
            u[:, start:stop] = block @ vb
        start = stop
    u = _fix_signs(u)
    da = u.T @ a @ u
    db = u.T @ b @ u
    if _offdiag_maxabs(da) > tol * max(1.0, spectral_norm(a)) or _offdiag_maxabs(db) > tol * max(
        1.0, spectral_norm(b)
    ):
        raise NotCommutingError("simultaneous diagonalization left an off-diagonal residual above tol")
    return u, np.diag(da).copy(), np.diag(db).copy()


def logdet_pd(m, name: str = "matrix") -> float:
    """``log det M`` via Cholesky; raises :class:`SingularMatrixError` unless M is PD."""
    a = sym(m, name)
    try:
        c = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"{name} is not positive definite") from exc
    d = np.diag(c)
    if np.any(d <= 0):
        raise SingularMatrixError(f"{name} is not positive definite")
    return float(2.0 * np.sum(np.log(d)))


def logdet_psd(m, tol: float = DEFAULT_TOL, name: str = "matrix") -> float:
    """``log det M`` for a PSD matrix; ``-inf`` when M is singular within ``tol``."""
    a = sym(m, name)
    w = np.linalg.eigvalsh(a)
    scale = max(1.0, float(np.max(np.abs(w))))
    if w[0] < -tol * scale:
        raise NotPSDError(f"{name} is not positive semidefinite", eigenvalue=float(w[0]))
    if w[0] <= tol * scale:
        return float("-inf")
    try:
        return logdet_pd(a, name)
    except SingularMatrixError:
        return float(np.sum(np.log(w)))


def solve_pd(m, rhs, name: str = "matrix") -> np.ndarray:
    """Solve ``M X = rhs`` for PD ``M`` by Cholesky."""
    try:
        factor = scipy.linalg.cho_factor(sym(m, name), lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"{name} is not positive definite") from exc
    return scipy.linalg.cho_solve(factor, np.asarray(rhs, dtype=float))


def random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR of a Gaussian matrix, sign-corrected)."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_pd(rng: np.random.Generator, n: int, lo: float = 1e-2, hi: float = 1e3, basis=None) -> SymMatrix:
    """PD matrix with eigenvalues log-uniform in ``[lo, hi]``."""
    if basis is None:
        basis = random_orthogonal(rng, n)
    w = np.exp(rng.uniform(np.log(lo), np.log(hi), size=n))
    return sym((basis * w) @ basis.T)

"""Closed-form entropy algebra for zero-mean Gaussian vectors (nats)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotPSDError, SingularMatrixError
from .matcore import SymMatrix, is_pd, is_psd, logdet_pd, solve_pd, sym

LOG_2PIE = math.log(2.0 * math.pi * math.e)
# relative eigenvalue floor below which a covariance counts as singular;
# kept near machine precision so whitened, badly conditioned PD inputs stay finite
SINGULAR_TOL = 64 * np.finfo(float).eps
TWO_PI_E = 2.0 * math.pi * math.e


@dataclass(frozen=True)
class GaussianVector:
    """``N(0, cov)``; the mean is always zero."""

    cov: SymMatrix

    def __post_init__(self):
        cov = sym(self.cov, "cov")
        if not is_psd(cov):
            raise NotPSDError("Gaussian covariance must be positive semidefinite")
        object.__setattr__(self, "cov", cov)

    @property
    def n(self) -> int:
        return self.cov.shape[0]


def gaussian_entropy(g: GaussianVector | np.ndarray, tol: float = SINGULAR_TOL) -> float:
    """Differential entropy ``0.5 * (n log(2 pi e) + log det cov)``.

    Returns ``-inf`` for a singular covariance.
    """
    if not isinstance(g, GaussianVector):
        g = GaussianVector(g)
    if not is_pd(g.cov, tol):
        return float("-inf")
    try:
        ld = logdet_pd(g.cov, "cov")
    except SingularMatrixError:
        return float("-inf")
    return 0.5 * (g.n * LOG_2PIE + ld)


def log_entropy_power(h: float, n: int) -> float:
    """``2h/n``, the logarithm of the entropy power."""
    if h == float("-inf"):
        return float("-inf")
    return 2.0 * h / n


def entropy_power(h: float, n: int) -> float:
    """``exp(2h/n)``; ``h = -inf`` maps to 0."""
    return math.exp(log_entropy_power(h, n))


def gaussian_entropy_power(cov) -> float:
    """``2 pi e det(cov)^{1/n}`` computed through the log-determinant."""
    cov = sym(cov, "cov")
    return entropy_power(gaussian_entropy(GaussianVector(cov)), cov.shape[0])


def conditional_cov(sigma_x, sigma_z, m) -> SymMatrix:
    """``Cov(Z | M X + Z)`` for independent ``X ~ N(0, sigma_x)``, ``Z ~ N(0, sigma_z)``.

    Schur complement ``Sz - Sz (M Sx M^T + Sz)^{-1} Sz``.
    """
    sx, sz = sym(sigma_x, "sigma_x"), sym(sigma_z, "sigma_z")
    m = np.asarray(m, dtype=float)
    s = sym(m @ sx @ m.T + sz, "M Sx M^T + Sz")
    try:
        c = sz - sz @ solve_pd(s, sz, "M Sx M^T + Sz")
    except SingularMatrixError as exc:
        raise SingularMatrixError("conditional_cov: M Sx M^T + Sz is singular") from exc
    return sym(c, "conditional covariance")

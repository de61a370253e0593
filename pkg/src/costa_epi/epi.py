"""Evaluators for the matrix-weighted Costa EPI and its supporting identities.

Every evaluator works on the Gaussian slice: ``X ~ N(0, sigma_x)`` and
``Z ~ N(0, sigma_z)`` independent, so all entropies are exact log-determinants.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError, NotCommutingError, NotPSDError, SingularMatrixError
from .gaussian import TWO_PI_E, conditional_cov, entropy_power, gaussian_entropy, gaussian_entropy_power
from .matcore import (
    DEFAULT_TOL,
    SymMatrix,
    commutes,
    identity,
    is_psd,
    loewner_leq,
    psd_inv_sqrt,
    psd_sqrt,
    random_orthogonal,
    random_pd,
    simultaneous_diagonalize,
    solve_pd,
    spectral_norm,
    sym,
)

log = logging.getLogger(__name__)

GAMMA_MAX = 1.0 - 1e-12


@dataclass(frozen=True)
class EpiInstance:
    """A triple ``(sigma_x, sigma_z, a)`` with ``0 <= a <= I``.

    ``a_sqrt`` is always derived from ``a``.
    """

    sigma_x: SymMatrix
    sigma_z: SymMatrix
    a: SymMatrix
    label: str | None = None
    tol: float = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        sx = sym(self.sigma_x, "sigma_x")
        sz = sym(self.sigma_z, "sigma_z")
        a = sym(self.a, "a")
        if not (sx.shape == sz.shape == a.shape):
            raise ValueError(f"shape mismatch: sigma_x {sx.shape}, sigma_z {sz.shape}, a {a.shape}")
        for name, m in (("sigma_x", sx), ("sigma_z", sz), ("a", a)):
            if not is_psd(m, self.tol):
                raise NotPSDError(f"{name} must be positive semidefinite")
        if not loewner_leq(a, identity(a.shape[0]), self.tol):
            raise NotPSDError("a must satisfy a <= I")
        object.__setattr__(self, "sigma_x", sx)
        object.__setattr__(self, "sigma_z", sz)
        object.__setattr__(self, "a", a)

    @classmethod
    def from_a_sqrt(cls, sigma_x, sigma_z, a_sqrt, label=None, tol=DEFAULT_TOL):
        r = sym(a_sqrt, "a_sqrt")
        return cls(sigma_x, sigma_z, r @ r, label=label, tol=tol)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @cached_property
    def a_sqrt(self) -> SymMatrix:
        return psd_sqrt(self.a, name="a")

    @cached_property
    def a_eigenvalues(self) -> np.ndarray:
        return np.clip(np.linalg.eigvalsh(self.a), 0.0, 1.0)

    def is_commuting(self, tol: float = DEFAULT_TOL) -> bool:
        return commutes(self.a, self.sigma_z, tol)


def counterexample_instance() -> EpiInstance:
    """The two-dimensional counterexample: ``A^{1/2} = [[10, 5], [5, 17]] / 20``."""
    return EpiInstance.from_a_sqrt(
        sigma_x=[[200.0, 100.0], [100.0, 51.0]],
        sigma_z=[[200.0, 0.0], [0.0, 1.0]],
        a_sqrt=np.array([[10.0, 5.0], [5.0, 17.0]]) / 20.0,
        label="counterexample (n=2)",
    )


@dataclass(frozen=True)
class EpiReport:
    """Both sides of an entropy-power inequality ``lhs >= rhs_term_x + rhs_term_xz``.

    For :func:`triple_epi_check` the two right-hand terms are
    ``EP(X) EP(Y)`` and ``EP(W) EP(X+Y+W)``.
    """

    lhs: float
    rhs_term_x: float
    rhs_term_xz: float
    rhs: float
    gap: float
    violated: bool
    dets: dict
    kind: str = "costa"

    @property
    def scale(self) -> float:
        return max(self.lhs, self.rhs)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lhs": self.lhs,
            "rhs_term_x": self.rhs_term_x,
            "rhs_term_xz": self.rhs_term_xz,
            "rhs": self.rhs,
            "gap": self.gap,
            "violated": self.violated,
            "dets": dict(self.dets),
        }


def _report(lhs, term_x, term_xz, dets, tol, kind) -> EpiReport:
    rhs = term_x + term_xz
    gap = lhs - rhs
    violated = bool(gap < -tol * max(lhs, rhs))
    return EpiReport(lhs, term_x, term_xz, rhs, gap, violated, dets, kind)


def _dets_from_logs(logs: dict) -> dict:
    out = {}
    for key, value in logs.items():
        out[f"log_{key}"] = value
        out[key] = math.exp(value)
    return out


def _logdet_cov(m, name):
    # gaussian_entropy already returns -inf on singular input
    h = gaussian_entropy(sym(m, name))
    if h == float("-inf"):
        return h
    n = m.shape[0]
    return 2.0 * h - n * math.log(TWO_PI_E)


def costa_check(inst: EpiInstance, tol: float = DEFAULT_TOL) -> EpiReport:
    """Evaluate both sides of the matrix Costa EPI for Gaussian ``X``.

    ``lhs = EP(X + A^{1/2} Z)``, ``rhs = |I-A|^{1/n} EP(X) + |A|^{1/n} EP(X+Z)``.
    """
    n = inst.n
    r = inst.a_sqrt
    lhs_cov = sym(inst.sigma_x + r @ inst.sigma_z @ r, "sigma_x + A^1/2 sigma_z A^1/2")
    h_lhs = gaussian_entropy(lhs_cov)
    if h_lhs == float("-inf"):
        raise SingularMatrixError("sigma_x + A^1/2 sigma_z A^1/2 is singular")
    lam = inst.a_eigenvalues
    with np.errstate(divide="ignore"):
        logdet_i_minus_a = float(np.sum(np.log1p(-lam)))
        logdet_a = float(np.sum(np.log(lam)))
    sxz = sym(inst.sigma_x + inst.sigma_z, "sigma_x + sigma_z")
    h_x = gaussian_entropy(inst.sigma_x)
    h_xz = gaussian_entropy(sxz)

    lhs = entropy_power(h_lhs, n)
    term_x = math.exp(logdet_i_minus_a / n) * entropy_power(h_x, n)
    term_xz = math.exp(logdet_a / n) * entropy_power(h_xz, n)
    dets = _dets_from_logs(
        {
            "det_I_minus_A": logdet_i_minus_a,
            "det_A": logdet_a,
            "det_sigma_x": _logdet_cov(inst.sigma_x, "sigma_x"),
            "det_sigma_x_plus_z": _logdet_cov(sxz, "sigma_x + sigma_z"),
            "det_lhs_cov": _logdet_cov(lhs_cov, "lhs"),
        }
    )
    return _report(lhs, term_x, term_xz, dets, tol, "costa")


def splitting_identity_residual(a, sigma_z):
    """Residual of ``A^{1/2} Sz A^{1/2} + (I-A)^{1/2} Sz (I-A)^{1/2} = Sz``.

    Returns ``(residual matrix, max-abs entry)``; zero exactly when A and Sz commute.
    """
    a, sz = sym(a, "a"), sym(sigma_z, "sigma_z")
    r = psd_sqrt(a, name="a")
    q = psd_sqrt(identity(a.shape[0]) - a, name="I - a")
    residual = r @ sz @ r + q @ sz @ q - sz
    return residual, float(np.max(np.abs(residual)))


def triple_epi_check(sigma_x, sigma_y, sigma_w, tol: float = DEFAULT_TOL) -> EpiReport:
    """``EP(X+W) EP(Y+W) >= EP(X) EP(Y) + EP(W) EP(X+Y+W)`` for independent Gaussians."""
    sx, sy, sw = sym(sigma_x, "sigma_x"), sym(sigma_y, "sigma_y"), sym(sigma_w, "sigma_w")
    covs = {
        "x": sx,
        "y": sy,
        "w": sw,
        "x_plus_w": sx + sw,
        "y_plus_w": sy + sw,
        "x_plus_y_plus_w": sx + sy + sw,
    }
    ep = {}
    for key, cov in covs.items():
        ep[key] = gaussian_entropy_power(cov)
        if ep[key] == 0.0 and key not in ("x", "y", "w"):
            raise SingularMatrixError(f"covariance of {key} is singular")
    lhs = ep["x_plus_w"] * ep["y_plus_w"]
    dets = _dets_from_logs({f"det_{k}": _logdet_cov(v, k) for k, v in covs.items()})
    return _report(lhs, ep["x"] * ep["y"], ep["w"] * ep["x_plus_y_plus_w"], dets, tol, "triple")


def theorem1_check(inst: EpiInstance, tol: float = DEFAULT_TOL) -> EpiReport:
    """:func:`costa_check` restricted to commuting ``(A, sigma_z)``, where it must hold."""
    if not inst.is_commuting(tol):
        raise NotCommutingError(
            "theorem1_check requires A and sigma_z to commute; use costa_check for general instances"
        )
    report = costa_check(inst, tol)
    if report.violated:
        log.error(
            "commuting instance violates the inequality (gap=%.17g, scale=%.17g): implementation bug",
            report.gap,
            report.scale,
        )
    return report


@dataclass(frozen=True)
class GammaDiagnostic:
    """One point on the perturbation path.

    ``k_matrix`` is ``Sz^{-1} Cov(Z | D X + Z) (I - D^{-2})``; it is generally
    not symmetric. ``det_side`` is ``None`` when ``det(k) < 0`` and n is even.
    """

    gamma: float
    d_gamma: SymMatrix
    cond_cov: SymMatrix
    k_matrix: np.ndarray
    eigenvalues: np.ndarray  # complex, sorted by real part
    has_complex: bool
    det_side: float | None
    trace_side: float
    amgm_holds: bool
    k_psd: bool

    def __post_init__(self):
        if self.k_psd and not self.amgm_holds:
            raise AssertionError(f"AM-GM failed for a PSD argument at gamma={self.gamma}")

    @property
    def eigenvalues_real(self) -> np.ndarray:
        return self.eigenvalues.real.copy()

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "eigenvalues": [float(x) for x in self.eigenvalues.real],
            "eigenvalues_imag": [float(x) for x in self.eigenvalues.imag],
            "has_complex": self.has_complex,
            "det_side": self.det_side,
            "trace_side": self.trace_side,
            "amgm_holds": self.amgm_holds,
            "k_psd": self.k_psd,
            "d_gamma": self.d_gamma.tolist(),
            "cond_cov": self.cond_cov.tolist(),
            "k_matrix": self.k_matrix.tolist(),
        }


def _path_spectrum(inst: EpiInstance, gamma: float):
    """Eigenbasis of A with the spectra of ``D^2`` and ``I - D^{-2}`` along it."""
    _check_gamma(gamma)
    lam, u = np.linalg.eigh(inst.a)
    if gamma == 0.0:
        n = inst.n
        return np.eye(n), np.ones(n), np.zeros(n)
    if lam[0] <= 0.0:
        raise DomainError("the perturbation path needs A positive definite for gamma > 0")
    lam = np.minimum(lam, 1.0)
    step = gamma * (1.0 / lam - 1.0)
    return u, 1.0 + step, step / (1.0 + step)


def _from_spectrum(u, w, name):
    return sym((u * w) @ u.T, name)


def d_gamma_squared(inst: EpiInstance, gamma: float) -> SymMatrix:
    """``I + gamma (A^{-1} - I)``: runs from I at gamma=0 to ``A^{-1}`` at gamma=1.

    Conditioning on ``D X + Z`` is then conditioning on ``X + D^{-1} Z``, which
    interpolates between ``X + Z`` and ``X + A^{1/2} Z``.
    """
    u, d2, _ = _path_spectrum(inst, gamma)
    return _from_spectrum(u, d2, "D_gamma^2")


def _check_gamma(gamma):
    if not (0.0 <= gamma < GAMMA_MAX):
        raise DomainError(
            f"gamma must lie in [0, 1); got {gamma!r}. The path runs from X + Z at gamma = 0 "
            "towards X + A^{1/2} Z, which is reached only in the limit gamma -> 1"
        )


def gamma_diagnostic(inst: EpiInstance, gamma: float, tol: float = DEFAULT_TOL) -> GammaDiagnostic:
    n = inst.n
    u, d2, f = _path_spectrum(inst, gamma)
    d = _from_spectrum(u, np.sqrt(d2), "D_gamma")
    factor = _from_spectrum(u, f, "I - D_gamma^-2")
    cond = conditional_cov(inst.sigma_x, inst.sigma_z, d)
    k = solve_pd(inst.sigma_z, cond, "sigma_z") @ factor

    eig = np.linalg.eigvals(k).astype(complex)
    eig = eig[np.lexsort((eig.imag, eig.real))]
    eig_scale = max(1.0, float(np.max(np.abs(eig))))
    has_complex = bool(np.max(np.abs(eig.imag)) > tol * eig_scale)

    det_k = float(np.linalg.det(k))
    if det_k >= 0:
        det_side = det_k ** (1.0 / n)
    elif n % 2 == 1:
        det_side = -((-det_k) ** (1.0 / n))
    else:
        det_side = None
    trace_side = float(np.trace(k)) / n
    amgm_holds = det_side is not None and det_side <= trace_side + tol * max(1.0, abs(trace_side))

    k_norm = max(1.0, spectral_norm(k))
    if np.max(np.abs(k - k.T)) <= tol * k_norm:
        k_psd = is_psd(sym(k), tol)
    else:
        k_psd = False
    return GammaDiagnostic(
        gamma=float(gamma),
        d_gamma=d,
        cond_cov=cond,
        k_matrix=k,
        eigenvalues=eig,
        has_complex=has_complex,
        det_side=det_side,
        trace_side=trace_side,
        amgm_holds=bool(amgm_holds),
        k_psd=bool(k_psd),
    )


def gamma_path(inst: EpiInstance, gammas, tol: float = DEFAULT_TOL) -> list[GammaDiagnostic]:
    gammas = [float(g) for g in gammas]
    for g in gammas:
        _check_gamma(g)
    return [gamma_diagnostic(inst, g, tol) for g in gammas]


def symmetrized_k(inst: EpiInstance, gamma: float) -> SymMatrix:
    """``F^{1/2} Sz^{-1/2} Cov Sz^{-1/2} F^{1/2}`` with ``F = I - D^{-2}``.

    Always PSD; similar to ``k_matrix`` when A and Sz commute.
    """
    u, d2, f = _path_spectrum(inst, gamma)
    d = _from_spectrum(u, np.sqrt(d2), "D_gamma")
    f_half = _from_spectrum(u, np.sqrt(f), "(I - D^-2)^1/2")
    z_inv_half = psd_inv_sqrt(inst.sigma_z, "sigma_z")
    cond = conditional_cov(inst.sigma_x, inst.sigma_z, d)
    return sym(f_half @ z_inv_half @ cond @ z_inv_half @ f_half)


def reduce_to_canonical(inst: EpiInstance, tol: float = DEFAULT_TOL):
    """Rotate and whiten a commuting instance to ``sigma_z = I`` with diagonal A.

    Returns ``(canonical, scale)`` where ``scale = det(sigma_z)^{1/n}`` and
    ``costa_check(inst).gap == scale * costa_check(canonical).gap``.
    """
    if not inst.is_commuting(tol):
        raise NotCommutingError("reduce_to_canonical requires A and sigma_z to commute")
    u, a_diag, z_diag = simultaneous_diagonalize(inst.a, inst.sigma_z, tol)
    if np.min(z_diag) <= 0:
        raise SingularMatrixError("sigma_z is singular")
    n = inst.n
    z_inv_half = (u / np.sqrt(z_diag)) @ u.T
    sx = u.T @ z_inv_half @ inst.sigma_x @ z_inv_half @ u
    canonical = EpiInstance(
        sigma_x=sx,
        sigma_z=np.eye(n),
        a=np.diag(np.clip(a_diag, 0.0, 1.0)),
        label=f"{inst.label} (canonical)" if inst.label else "canonical",
        tol=inst.tol,
    )
    scale = math.exp(float(np.sum(np.log(z_diag))) / n)
    return canonical, scale


def random_commuting_instance(rng: np.random.Generator, n: int, lo: float = 1e-2, hi: float = 1e3) -> EpiInstance:
    """Shared random eigenbasis for A and sigma_z; A eigenvalues uniform on [0, 1]."""
    u = random_orthogonal(rng, n)
    a = (u * rng.uniform(0.0, 1.0, size=n)) @ u.T
    sz = random_pd(rng, n, lo, hi, basis=u)
    sx = random_pd(rng, n, lo, hi)
    return EpiInstance(sx, sz, a)


def random_instance(rng: np.random.Generator, n: int, lo: float = 1e-2, hi: float = 1e3) -> EpiInstance:
    """Independent random bases for all three matrices."""
    u = random_orthogonal(rng, n)
    a = (u * rng.uniform(0.0, 1.0, size=n)) @ u.T
    return EpiInstance(random_pd(rng, n, lo, hi), random_pd(rng, n, lo, hi), a)

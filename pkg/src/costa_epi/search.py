"""Seeded derivative-free search for instances violating the matrix Costa EPI.

Instances are encoded as unconstrained real vectors so that every decoded
point is feasible:

* ``sigma_x``, ``sigma_z``: lower-triangular Cholesky factors with
  log-parameterized diagonals;
* ``a = Q diag(logistic(theta)) Q^T`` with ``Q`` the Cayley transform of a
  skew-symmetric matrix, so ``0 < a < I`` strictly.

With ``commuting=True`` the encoder instead shares ``Q`` between ``a`` and
``sigma_z`` (log-eigenvalues for ``sigma_z``), restricting the search to the
slice where the inequality is a theorem.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .epi import EpiInstance, EpiReport, costa_check, random_commuting_instance, random_instance
from .gaussian import LOG_2PIE

CERTIFY_REL = 1e-6
LOGIT_CLIP = 36.0


@dataclass(frozen=True)
class SearchConfig:
    n: int = 2
    restarts: int = 32
    iterations: int = 2000
    seed: int = 42
    step_scale: float = 0.5
    eig_range: tuple[float, float] = (1e-2, 1e3)
    objective_tol: float = 1e-9
    commuting: bool = False
    # search box |x_i| <= param_bound keeps iterates away from degenerate limits
    param_bound: float = 8.0

    def __post_init__(self):
        lo, hi = self.eig_range
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.restarts < 1 or self.iterations < 1:
            raise ValueError("restarts and iterations must be >= 1")
        if not (0 < lo < hi):
            raise ValueError("eig_range must satisfy 0 < lo < hi")
        if self.step_scale <= 0:
            raise ValueError("step_scale must be positive")
        if self.param_bound <= 0:
            raise ValueError("param_bound must be positive")


@dataclass
class SearchTrace:
    best_instance: EpiInstance
    best_report: EpiReport
    best_restart: int
    history: list[list[tuple[int, float]]] = field(repr=False)
    evaluations: int
    seed: int
    found: bool

    @property
    def best_gap(self) -> float:
        return self.best_report.gap

    @property
    def best_objective(self) -> float:
        return -self.best_report.gap

    def to_dict(self) -> dict:
        return {
            "found": self.found,
            "best_gap": self.best_gap,
            "best_objective": self.best_objective,
            "best_relative_gap": self.best_gap / self.best_report.scale,
            "best_restart": self.best_restart,
            "evaluations": self.evaluations,
            "seed": self.seed,
            "report": self.best_report.to_dict(),
            "history": [[[i, v] for i, v in h] for h in self.history],
        }


def _tril_size(n):
    return n * (n + 1) // 2


def _skew_size(n):
    return n * (n - 1) // 2


def param_size(n: int, commuting: bool = False) -> int:
    if commuting:
        return _tril_size(n) + _skew_size(n) + 2 * n
    return 2 * _tril_size(n) + _skew_size(n) + n


@lru_cache(maxsize=None)
def _indices(n):
    return np.tril_indices(n), np.triu_indices(n, 1), np.arange(n), np.eye(n)


def _chol_from(v, n):
    tril, _, idx, _ = _indices(n)
    lower = np.zeros((n, n))
    lower[tril] = v
    lower[idx, idx] = np.exp(lower[idx, idx])
    return lower


def _chol_to(m):
    n = m.shape[0]
    lower = np.linalg.cholesky(m)
    idx = np.arange(n)
    lower[idx, idx] = np.log(lower[idx, idx])
    return lower[np.tril_indices(n)]


def _cayley(v, n):
    _, triu, _, eye = _indices(n)
    s = np.zeros((n, n))
    s[triu] = v
    s = s - s.T
    return np.linalg.solve(eye - s, eye + s)


def _inverse_cayley(q):
    n = q.shape[0]
    eye = np.eye(n)
    # S = (Q - I)(Q + I)^{-1}
    s = np.linalg.solve((q + eye).T, (q - eye).T).T
    s = 0.5 * (s - s.T)
    return s[np.triu_indices(n, 1)]


def _cayley_friendly_basis(v):
    """Flip column signs so ``det = +1`` and ``V + I`` is best conditioned."""
    n = v.shape[0]
    best, best_sv = None, -1.0
    for signs in itertools.product((1.0, -1.0), repeat=n):
        cand = v * np.array(signs)
        if np.linalg.det(cand) < 0:
            continue
        sv = np.linalg.svd(cand + np.eye(n), compute_uv=False)[-1]
        if sv > best_sv:
            best, best_sv = cand, sv
    if best_sv < 1e-6:
        raise ValueError("eigenbasis has no Cayley representation")
    return best


def _split(params, n, commuting):
    params = np.asarray(params, dtype=float)
    if params.shape != (param_size(n, commuting),):
        raise ValueError(f"expected {param_size(n, commuting)} parameters for n={n}, got {params.shape}")
    if not np.all(np.isfinite(params)):
        raise ValueError("parameters must be finite")
    t, k = _tril_size(n), _skew_size(n)
    if commuting:
        return params[:t], params[t : t + k], params[t + k : t + k + n], params[t + k + n :]
    return params[:t], params[t : 2 * t], params[2 * t : 2 * t + k], params[2 * t + k :]


def _decode_matrices(params, n, commuting=False):
    if commuting:
        px, pq, pz, pa = _split(params, n, True)
        q = _cayley(pq, n)
        sz = (q * np.exp(pz)) @ q.T
    else:
        px, pz, pq, pa = _split(params, n, False)
        lz = _chol_from(pz, n)
        sz = lz @ lz.T
        q = _cayley(pq, n)
    lx = _chol_from(px, n)
    sx = lx @ lx.T
    # |logit| <= 36 keeps expit strictly inside (0, 1) in double precision
    lam = expit(np.clip(pa, -LOGIT_CLIP, LOGIT_CLIP))
    return sx, sz, q, lam


def decode(params, n: int, commuting: bool = False) -> EpiInstance:
    sx, sz, q, lam = _decode_matrices(params, n, commuting)
    return EpiInstance(sx, sz, (q * lam) @ q.T)


def encode(inst: EpiInstance, commuting: bool = False) -> np.ndarray:
    """Inverse of :func:`decode`; A's eigenvalues must lie strictly inside (0, 1)."""
    n = inst.n
    lam, v = np.linalg.eigh(inst.a)
    if lam[0] <= 0.0 or lam[-1] >= 1.0:
        raise ValueError("encode needs 0 < eig(A) < 1 strictly")
    q = _cayley_friendly_basis(v)
    px = _chol_to(np.asarray(inst.sigma_x))
    pq = _inverse_cayley(q)
    pa = logit(lam)
    if commuting:
        z = np.diag(q.T @ inst.sigma_z @ q)
        return np.concatenate([px, pq, np.log(z), pa])
    pz = _chol_to(np.asarray(inst.sigma_z))
    return np.concatenate([px, pz, pq, pa])


def _fast_sides(sx, sz, q, lam):
    # log-domain evaluation without instance validation; decode guarantees feasibility
    n = sx.shape[0]
    r = (q * np.sqrt(lam)) @ q.T
    s1, ld_lhs = np.linalg.slogdet(sx + r @ sz @ r)
    s2, ld_x = np.linalg.slogdet(sx)
    s3, ld_xz = np.linalg.slogdet(sx + sz)
    if min(s1, s2, s3) <= 0:
        return None
    log_lhs = LOG_2PIE + ld_lhs / n
    log_tx = LOG_2PIE + (np.sum(np.log1p(-lam)) + ld_x) / n
    log_txz = LOG_2PIE + (np.sum(np.log(lam)) + ld_xz) / n
    return log_lhs, log_tx, log_txz


def objective(params, n: int, commuting: bool = False) -> float:
    """``rhs - lhs`` of the inequality; positive values certify a violation.

    Returns ``-inf`` when an intermediate matrix is singular.
    """
    try:
        sides = _fast_sides(*_decode_matrices(params, n, commuting))
    except (ValueError, np.linalg.LinAlgError):
        return float("-inf")
    if sides is None:
        return float("-inf")
    log_lhs, log_tx, log_txz = sides
    return math.exp(log_tx) + math.exp(log_txz) - math.exp(log_lhs)


def relative_objective(params, n: int, commuting: bool = False) -> float:
    """``(rhs - lhs) / max(lhs, rhs)``; scale-free, in ``(-1, 1)``."""
    try:
        sides = _fast_sides(*_decode_matrices(params, n, commuting))
    except (ValueError, np.linalg.LinAlgError):
        return float("-inf")
    if sides is None:
        return float("-inf")
    log_lhs, log_tx, log_txz = sides
    log_rhs = np.logaddexp(log_tx, log_txz)
    top = max(log_lhs, log_rhs)
    return float(math.exp(log_rhs - top) - math.exp(log_lhs - top))


def _initial_point(rng, cfg: SearchConfig):
    lo, hi = cfg.eig_range
    maker = random_commuting_instance if cfg.commuting else random_instance
    while True:
        inst = maker(rng, cfg.n, lo, hi)
        lam = np.linalg.eigvalsh(inst.a)
        if 1e-3 < lam[0] and lam[-1] < 1 - 1e-3:
            try:
                return encode(inst, cfg.commuting)
            except ValueError:
                continue


def _run_restart(cfg: SearchConfig, index: int):
    rng = np.random.default_rng([cfg.seed, index])
    x0 = np.clip(_initial_point(rng, cfg), -0.9 * cfg.param_bound, 0.9 * cfg.param_bound)
    dim = x0.size
    simplex = np.vstack([x0, x0 + cfg.step_scale * rng.standard_normal((dim, dim))])

    def loss(x):
        if np.max(np.abs(x)) > cfg.param_bound:
            return 2.0
        val = relative_objective(x, cfg.n, cfg.commuting)
        return 2.0 if not np.isfinite(val) else -val

    history = []
    running = -math.inf

    def record(intermediate_result):
        nonlocal running
        running = max(running, -float(intermediate_result.fun))
        history.append((len(history) + 1, running))

    res = minimize(
        loss,
        x0,
        method="Nelder-Mead",
        callback=record,
        options={
            "maxiter": cfg.iterations,
            "maxfev": 4 * cfg.iterations,
            "initial_simplex": simplex,
            "xatol": 1e-10,
            "fatol": 1e-14,
            "adaptive": dim > 6,
        },
    )
    best_value = -float(res.fun)
    if not history or best_value > history[-1][1]:
        history.append((len(history) + 1, max(best_value, running)))
    return res.x, best_value, history, int(res.nfev)


def search_counterexample(cfg: SearchConfig, workers: int = 1) -> SearchTrace:
    """Random-restart Nelder-Mead maximizing the relative violation.

    Restart ``i`` draws from ``default_rng([seed, i])``, so the result does not
    depend on ``workers``. The winner is re-verified by :func:`costa_check`.
    """
    indices = range(cfg.restarts)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_restart, [cfg] * cfg.restarts, indices))
    else:
        results = [_run_restart(cfg, i) for i in indices]

    best_index = 0
    for i, (_, value, _, _) in enumerate(results):
        if value > results[best_index][1]:
            best_index = i
    best_x = results[best_index][0]
    inst = decode(best_x, cfg.n, cfg.commuting)
    report = costa_check(inst, cfg.objective_tol)
    found = report.violated and report.gap < -CERTIFY_REL * report.scale
    return SearchTrace(
        best_instance=inst,
        best_report=report,
        best_restart=best_index,
        history=[r[2] for r in results],
        evaluations=sum(r[3] for r in results),
        seed=cfg.seed,
        found=bool(found),
    )

"""Monte-Carlo check of the commuting-case inequality for non-Gaussian X.

Entropies are estimated with the Kozachenko-Leonenko k-nearest-neighbour
estimator; every entropy term uses its own independent sample set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma, gammaln

from .errors import NotCommutingError, NotPSDError
from .gaussian import GaussianVector
from .matcore import commutes, identity, is_psd, loewner_leq, psd_sqrt, sym

DEFAULT_K = 5
N_FOLDS = 16
TIE_JITTER = 1e-12


@dataclass(frozen=True)
class MixtureSpec:
    """Finite Gaussian mixture ``sum_i w_i N(mu_i, S_i)``."""

    weights: tuple
    means: tuple
    covs: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0 or np.any(w <= 0):
            raise ValueError("mixture weights must be a non-empty list of positive numbers")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixture weights must sum to 1 (got {w.sum()!r})")
        means = [np.asarray(m, dtype=float).reshape(-1) for m in self.means]
        covs = [sym(c, f"component {i} cov") for i, c in enumerate(self.covs)]
        if not (len(means) == len(covs) == w.size):
            raise ValueError("weights, means and covs must have equal length")
        n = covs[0].shape[0]
        for i, (m, c) in enumerate(zip(means, covs)):
            if m.shape != (n,) or c.shape != (n, n):
                raise ValueError(f"component {i} has inconsistent dimension")
            try:
                np.linalg.cholesky(c)
            except np.linalg.LinAlgError as exc:
                raise NotPSDError(f"component {i} covariance is not positive definite") from exc
        object.__setattr__(self, "weights", tuple(w))
        object.__setattr__(self, "means", tuple(means))
        object.__setattr__(self, "covs", tuple(covs))

    @property
    def n(self) -> int:
        return self.covs[0].shape[0]

    @classmethod
    def gaussian(cls, cov, mean=None):
        cov = sym(cov)
        mean = np.zeros(cov.shape[0]) if mean is None else mean
        return cls((1.0,), (mean,), (cov,))

    @classmethod
    def from_dict(cls, data: dict):
        comps = data["components"]
        return cls(
            tuple(float(c["weight"]) for c in comps),
            tuple(c.get("mean", [0.0] * len(c["cov"])) for c in comps),
            tuple(c["cov"] for c in comps),
        )

    def to_dict(self) -> dict:
        return {
            "components": [
                {"weight": w, "mean": m.tolist(), "cov": c.tolist()}
                for w, m, c in zip(self.weights, self.means, self.covs)
            ]
        }


@dataclass(frozen=True)
class McReport:
    lhs_estimate: float
    rhs_estimate: float
    se_lhs: float
    se_rhs: float
    entropies: dict
    samples: int
    k: int
    seed: int
    conclusion: str

    def to_dict(self) -> dict:
        return {
            "lhs_estimate": self.lhs_estimate,
            "rhs_estimate": self.rhs_estimate,
            "se_lhs": self.se_lhs,
            "se_rhs": self.se_rhs,
            "entropies": dict(self.entropies),
            "samples": self.samples,
            "k": self.k,
            "seed": self.seed,
            "conclusion": self.conclusion,
            "note": (
                "'suspicious' marks a statistically significant apparent violation; "
                "the commuting case is a theorem, so this points at estimator bias"
            ),
        }


def sample(spec, m: int, seed) -> np.ndarray:
    """``m`` i.i.d. draws as an ``(m, n)`` array.

    A single-component mixture consumes the generator exactly like the
    equivalent :class:`GaussianVector`, so both give identical samples.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if isinstance(spec, GaussianVector):
        spec = MixtureSpec.gaussian(spec.cov)
    n = spec.n
    factors = []
    for i, c in enumerate(spec.covs):
        try:
            factors.append(np.linalg.cholesky(c))
        except np.linalg.LinAlgError as exc:
            raise NotPSDError(f"component {i} covariance is not positive definite") from exc
    if len(factors) == 1:
        return spec.means[0] + rng.standard_normal((m, n)) @ factors[0].T
    labels = rng.choice(len(factors), size=m, p=np.asarray(spec.weights))
    z = rng.standard_normal((m, n))
    out = np.empty((m, n))
    for i, (mu, f) in enumerate(zip(spec.means, factors)):
        sel = labels == i
        out[sel] = mu + z[sel] @ f.T
    return out


def _log_unit_ball(n):
    return 0.5 * n * math.log(math.pi) - gammaln(0.5 * n + 1.0)


def knn_distances(samples: np.ndarray, k: int) -> np.ndarray:
    """Distance from each point to its k-th nearest other point (kd-tree)."""
    dist, _ = cKDTree(samples).query(samples, k=k + 1)
    return dist[:, k]


def knn_distances_brute(samples: np.ndarray, k: int, chunk: int = 2048) -> np.ndarray:
    """Exact O(m^2) reference for :func:`knn_distances`."""
    x = np.asarray(samples, dtype=float)
    m = x.shape[0]
    sq = np.einsum("ij,ij->i", x, x)
    out = np.empty(m)
    for start in range(0, m, chunk):
        block = x[start : start + chunk]
        d2 = sq[start : start + chunk, None] + sq[None, :] - 2.0 * block @ x.T
        d2[np.arange(block.shape[0]), np.arange(start, start + block.shape[0])] = np.inf
        np.maximum(d2, 0.0, out=d2)
        out[start : start + chunk] = np.sqrt(np.partition(d2, k - 1, axis=1)[:, k - 1])
    return out


def _kl_estimate(x, k):
    m, n = x.shape
    eps = knn_distances(x, k)
    return float(digamma(m) - digamma(k) + _log_unit_ball(n) + n * np.mean(np.log(eps)))


def knn_entropy(samples, k: int = DEFAULT_K, folds: int = N_FOLDS):
    """Kozachenko-Leonenko differential entropy estimate in nats.

    The standard error comes from ``folds`` contiguous disjoint subsamples:
    ``std(fold estimates) / sqrt(folds)``.

    Returns
    -------
    (estimate, standard_error)
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    m, n = x.shape
    if m <= k:
        raise ValueError(f"need more samples than neighbours (m={m}, k={k})")
    if np.any(knn_distances(x, 1) == 0.0):
        scale = max(float(np.max(np.std(x, axis=0))), 1.0)
        x = x + TIE_JITTER * scale * np.random.default_rng(0).standard_normal(x.shape)
    estimate = _kl_estimate(x, k)
    size = m // folds
    if folds < 2 or size <= k:
        return estimate, float("nan")
    fold_values = np.array([_kl_estimate(x[i * size : (i + 1) * size], k) for i in range(folds)])
    return estimate, float(np.std(fold_values, ddof=1) / math.sqrt(folds))


def _ep_with_se(h, se, n):
    ep = math.exp(2.0 * h / n)
    return ep, ep * 2.0 * se / n


def classify(lhs, se_lhs, rhs, se_rhs) -> str:
    if lhs + 3 * se_lhs < rhs - 3 * se_rhs:
        return "suspicious"
    if lhs - rhs >= -3 * math.hypot(se_lhs, se_rhs):
        return "consistent"
    return "inconclusive"


def mc_theorem1_check(x_spec, sigma_z, a, m: int = 100_000, k: int = DEFAULT_K, seed: int = 0, tol: float = 1e-9) -> McReport:
    """Estimate both sides of the commuting-case inequality for a mixture X.

    Three independent sample sets (X, X + A^{1/2} Z, X + Z) are drawn from
    child streams of ``seed``.
    """
    if isinstance(x_spec, GaussianVector):
        x_spec = MixtureSpec.gaussian(x_spec.cov)
    sz, a = sym(sigma_z, "sigma_z"), sym(a, "a")
    n = x_spec.n
    if sz.shape != (n, n) or a.shape != (n, n):
        raise ValueError("dimension mismatch between X, sigma_z and a")
    if not (is_psd(a, tol) and loewner_leq(a, identity(n), tol)):
        raise NotPSDError("a must satisfy 0 <= a <= I")
    if not commutes(a, sz, tol):
        raise NotCommutingError("mc_theorem1_check requires A and sigma_z to commute; use costa_check")
    z = GaussianVector(sz)
    r = psd_sqrt(a, name="a")

    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]
    x_only = sample(x_spec, m, streams[0])
    x_scaled = sample(x_spec, m, streams[1]) + sample(z, m, streams[1]) @ r.T
    x_full = sample(x_spec, m, streams[2]) + sample(z, m, streams[2])

    h = {}
    for name, data in (("x", x_only), ("x_plus_a_sqrt_z", x_scaled), ("x_plus_z", x_full)):
        h[name] = knn_entropy(data, k)

    lam = np.clip(np.linalg.eigvalsh(a), 0.0, 1.0)
    c_x = float(np.prod(1.0 - lam)) ** (1.0 / n)
    c_xz = float(np.prod(lam)) ** (1.0 / n)
    lhs, se_lhs = _ep_with_se(*h["x_plus_a_sqrt_z"], n)
    ep_x, se_x = _ep_with_se(*h["x"], n)
    ep_xz, se_xz = _ep_with_se(*h["x_plus_z"], n)
    rhs = c_x * ep_x + c_xz * ep_xz
    se_rhs = math.hypot(c_x * se_x, c_xz * se_xz)
    return McReport(
        lhs_estimate=lhs,
        rhs_estimate=rhs,
        se_lhs=se_lhs,
        se_rhs=se_rhs,
        entropies={key: {"estimate": v[0], "se": v[1]} for key, v in h.items()},
        samples=m,
        k=k,
        seed=seed,
        conclusion=classify(lhs, se_lhs, rhs, se_rhs),
    )

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from costa_epi.errors import DimensionMismatchError, NotCommutingError, NotPSDError
from costa_epi.matcore import (
    commutes,
    is_psd,
    logdet_pd,
    loewner_leq,
    psd_sqrt,
    random_orthogonal,
    random_pd,
    simultaneous_diagonalize,
    sym,
    sym_eig,
)

CE_ROOT = np.array([[10.0, 5.0], [5.0, 17.0]]) / 20.0
# explicit 2x2 square of CE_ROOT
CE_A = np.array([[125.0, 135.0], [135.0, 314.0]]) / 400.0
SIGMA_Z = np.diag([200.0, 1.0])


def rel_fro(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def hand_eig_2x2(m):
    """Roots of the characteristic polynomial of a symmetric 2x2 matrix."""
    t = m[0, 0] + m[1, 1]
    d = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    disc = math.sqrt(t * t - 4 * d)
    return (t - disc) / 2, (t + disc) / 2


class TestSym:
    def test_symmetrizes_by_averaging(self):
        m = sym([[1.0, 2.0], [4.0, 3.0]])
        assert m[0, 1] == m[1, 0] == 3.0

    def test_read_only(self):
        m = sym(np.eye(2))
        with pytest.raises(ValueError):
            m[0, 0] = 5.0

    @pytest.mark.parametrize("bad", [np.zeros((2, 3)), np.zeros((0, 0)), [[np.nan]]])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            sym(bad)


class TestSymEig:
    def test_identity(self):
        w, v = sym_eig(np.eye(2))
        np.testing.assert_allclose(w, [1.0, 1.0])
        np.testing.assert_allclose(v @ np.diag(w) @ v.T, np.eye(2), atol=1e-15)

    def test_diagonal(self):
        w, v = sym_eig(np.diag([200.0, 1.0]))
        np.testing.assert_allclose(w, [1.0, 200.0])
        np.testing.assert_allclose(np.abs(v), [[0.0, 1.0], [1.0, 0.0]])

    def test_counterexample_root(self):
        w, _ = sym_eig(CE_ROOT)
        # trace 1.35, det 0.3625
        assert hand_eig_2x2(CE_ROOT) == pytest.approx((0.369836109606657, 0.980163890393343))
        np.testing.assert_allclose(w, hand_eig_2x2(CE_ROOT), rtol=1e-12)

    def test_sign_convention(self):
        rng = np.random.default_rng(3)
        m = random_pd(rng, 5, 0.1, 10.0)
        _, v = sym_eig(m)
        for j in range(5):
            col = v[:, j]
            first = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
            assert first > 0
        _, v2 = sym_eig(m.copy())
        np.testing.assert_array_equal(v, v2)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_reconstruction(self, n, seed):
        rng = np.random.default_rng(seed)
        m = sym(rng.standard_normal((n, n)) * 10)
        w, v = sym_eig(m)
        assert np.all(np.diff(w) >= 0)
        assert np.max(np.abs(v.T @ v - np.eye(n))) < 1e-10
        assert rel_fro(v @ np.diag(w) @ v.T, m) < 1e-9


class TestPsdSqrt:
    def test_identity(self):
        np.testing.assert_allclose(psd_sqrt(np.eye(3)), np.eye(3))

    def test_counterexample_a(self):
        np.testing.assert_allclose(psd_sqrt(CE_A), CE_ROOT, atol=1e-14)

    def test_singular_diagonal(self):
        np.testing.assert_allclose(psd_sqrt(np.diag([4.0, 0.0])), np.diag([2.0, 0.0]), atol=1e-15)

    def test_clamps_tiny_negative(self):
        m = np.diag([1.0, -1e-12])
        np.testing.assert_allclose(psd_sqrt(m), np.diag([1.0, 0.0]))

    def test_rejects_negative(self):
        with pytest.raises(NotPSDError) as err:
            psd_sqrt(np.diag([1.0, -0.5]))
        assert err.value.eigenvalue == pytest.approx(-0.5)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_square_recovers_input(self, n, seed):
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((n, n))
        m = sym(g @ g.T)
        r = psd_sqrt(m)
        assert rel_fro(r @ r, m) < 1e-9
        assert is_psd(r)


class TestPredicates:
    def test_is_psd(self):
        assert is_psd(np.diag([1.0, 0.0]))
        assert not is_psd([[0.0, 1.0], [1.0, 0.0]])

    def test_loewner_counterexample(self):
        # eigenvalues of A are squares of the hand-solved root eigenvalues, both below 1
        lo, hi = hand_eig_2x2(CE_ROOT)
        assert hi**2 < 1
        assert loewner_leq(CE_A, np.eye(2))
        assert not loewner_leq(np.eye(2), CE_A)
        assert loewner_leq(np.zeros((2, 2)), np.zeros((2, 2)))

    def test_loewner_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            loewner_leq(np.eye(2), np.eye(3))

    def test_commutes(self):
        assert commutes(CE_A, np.eye(2))
        assert commutes(np.diag([1.0, 2.0]), np.diag([5.0, -1.0]))
        # off-diagonal of [A, Sz] is 0.3375 * (1 - 200)
        c = CE_A @ SIGMA_Z - SIGMA_Z @ CE_A
        assert c[0, 1] == pytest.approx(0.3375 * (1 - 200))
        assert not commutes(CE_A, SIGMA_Z)

    def test_commutes_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            commutes(np.eye(2), np.eye(3))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_loewner_antisymmetry(self, n, seed):
        rng = np.random.default_rng(seed)
        a = random_pd(rng, n, 0.1, 10.0)
        b = a + 1e-12 * np.eye(n)
        if loewner_leq(a, b) and loewner_leq(b, a):
            assert np.max(np.abs(a - b)) <= 2e-9 * max(1.0, np.linalg.norm(a, 2))


class TestSimultaneousDiagonalize:
    def test_diagonal_pair(self):
        u, a, b = simultaneous_diagonalize(np.diag([1.0, 2.0]), np.diag([3.0, 4.0]))
        np.testing.assert_allclose(np.abs(u), np.eye(2))
        np.testing.assert_allclose(a, [1.0, 2.0])
        np.testing.assert_allclose(b, [3.0, 4.0])

    def test_identity_with_arbitrary(self):
        b = np.array([[2.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 1.0]])
        u, a, d = simultaneous_diagonalize(np.eye(3), b)
        np.testing.assert_allclose(a, 1.0)
        np.testing.assert_allclose(np.sort(d), np.linalg.eigvalsh(b), atol=1e-12)
        np.testing.assert_allclose(u.T @ b @ u, np.diag(d), atol=1e-12)

    def test_aI_plus_bJ(self):
        a_m = np.array([[2.0, 1.0], [1.0, 2.0]])
        b_m = np.array([[5.0, 3.0], [3.0, 5.0]])
        u, a, b = simultaneous_diagonalize(a_m, b_m)
        # eigenvectors (1,1)/sqrt2 -> (3, 8) and (1,-1)/sqrt2 -> (1, 2)
        pairs = sorted(zip(np.round(a, 12), np.round(b, 12)))
        assert pairs == [(1.0, 2.0), (3.0, 8.0)]
        s = 1 / math.sqrt(2)
        np.testing.assert_allclose(sorted(np.abs(u).ravel()), [s] * 4)

    def test_non_commuting(self):
        with pytest.raises(NotCommutingError):
            simultaneous_diagonalize(CE_A, SIGMA_Z)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.booleans())
    def test_commuting_iff_diagonalizable(self, n, seed, degenerate):
        rng = np.random.default_rng(seed)
        u = random_orthogonal(rng, n)
        da = rng.uniform(0, 1, n)
        if degenerate and n > 1:
            da[: n // 2 + 1] = 0.5
        a = sym((u * da) @ u.T)
        b = sym((u * rng.uniform(0.1, 5, n)) @ u.T)
        assert commutes(a, b)
        v, ea, eb = simultaneous_diagonalize(a, b)
        off = lambda m: m - np.diag(np.diag(m))
        assert np.max(np.abs(off(v.T @ a @ v))) <= 1e-9
        assert np.max(np.abs(off(v.T @ b @ v))) <= 1e-9 * 5

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 6), st.integers(0, 2**32 - 1))
    def test_non_commuting_rejected(self, n, seed):
        rng = np.random.default_rng(seed)
        a = random_pd(rng, n, 0.1, 1.0)
        b = random_pd(rng, n, 0.1, 10.0)
        if np.max(np.abs(a @ b - b @ a)) > 1e-3:
            assert not commutes(a, b)
            with pytest.raises(NotCommutingError):
                simultaneous_diagonalize(a, b)


def test_logdet_pd_matches_slogdet():
    rng = np.random.default_rng(0)
    m = random_pd(rng, 6, 1e-2, 1e3)
    assert logdet_pd(m) == pytest.approx(np.linalg.slogdet(m)[1], rel=1e-12)

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from lorapar import lowrank
from lorapar.lowrank import (
    LowRankMatrix,
    SingularSpectrum,
    add,
    combine,
    from_dense,
    from_factors,
    singular_values,
    tangent_project,
    truncate,
    truncate_tol,
    zero,
)


def random_lowrank(m, r, seed, n=None, sigma=None):
    rng = np.random.default_rng(seed)
    n = m if n is None else n
    U, _ = la.qr(rng.standard_normal((m, r)), mode="economic")
    V, _ = la.qr(rng.standard_normal((n, r)), mode="economic")
    s = np.sort(rng.uniform(0.1, 2.0, r))[::-1] if sigma is None else np.asarray(sigma, float)
    return from_factors(U, np.diag(s), V)


class TestFromDense:
    def test_zero_matrix(self):
        Y = from_dense(np.zeros((4, 4)))
        assert Y.rank == 4
        assert np.all(np.diag(Y.S) == 0)
        assert np.array_equal(Y.dense(), np.zeros((4, 4)))
        assert Y.orthonormality_defect() <= lowrank.ORTHONORMALITY_TOL

    def test_identity(self):
        Y = from_dense(np.eye(3))
        np.testing.assert_allclose(Y.sigma(), np.ones(3), atol=1e-14)
        np.testing.assert_allclose(Y.dense(), np.eye(3), atol=1e-14)

    def test_roundtrip_random(self):
        X = np.random.default_rng(42).standard_normal((20, 20))
        Y = from_dense(X)
        assert Y.rank == 20
        assert la.norm(Y.dense() - X) <= lowrank.ROUNDTRIP_RTOL * la.norm(X)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            from_dense(np.ones(3))
        with pytest.raises(ValueError):
            from_dense(np.array([[1.0, np.nan], [0.0, 1.0]]))


class TestTruncate:
    def test_rank_one_of_diagonal(self):
        Y = truncate(from_dense(np.diag([3.0, 1.0, 0.0])), 1)
        np.testing.assert_allclose(Y.dense(), np.diag([3.0, 0.0, 0.0]), atol=1e-14)

    def test_idempotent_exactly(self):
        Y = random_lowrank(15, 5, seed=1)
        Yt = truncate(Y, 5)
        assert Yt is Y  # already at the requested bound
        Y3 = truncate(Y, 3)
        Y33 = truncate(Y3, 3)
        assert np.array_equal(Y3.U, Y33.U) and np.array_equal(Y3.S, Y33.S)

    def test_prescribed_tail_error(self):
        # 100x100 with sigma_i = 10^{-(i-1)}; rank-4 error is the tail norm
        # of the prescribed spectrum, summed independently.
        sigma = 10.0 ** (-np.arange(100, dtype=float))
        rng = np.random.default_rng(3)
        Q1, _ = la.qr(rng.standard_normal((100, 100)))
        Q2, _ = la.qr(rng.standard_normal((100, 100)))
        X = (Q1 * sigma) @ Q2.T
        expected = np.sqrt(np.sum(sigma[4:] ** 2))
        Y4 = truncate(from_dense(X), 4)
        assert la.norm(X - Y4.dense()) == pytest.approx(expected, rel=1e-8)

    def test_best_approximation(self):
        Y = random_lowrank(18, 9, seed=7)
        Yt = truncate(Y, 4)
        err = add(Y, Yt, 1.0, -1.0).norm()
        rng = np.random.default_rng(8)
        for trial in range(100):
            rp = int(rng.integers(1, 5))
            W = random_lowrank(18, rp, seed=1000 + trial)
            W = from_factors(W.U, W.S * Y.norm(), W.V)
            assert err <= add(Y, W, 1.0, -1.0).norm() + 1e-12

    def test_rejects_rank_zero(self):
        with pytest.raises(ValueError):
            truncate(random_lowrank(5, 2, seed=0), 0)


class TestTruncateTol:
    def test_threshold_between_modes(self):
        Y = random_lowrank(10, 3, seed=2, sigma=[1.0, 1e-3, 1e-9])
        assert truncate_tol(Y, 1e-6).rank == 2

    def test_never_rank_zero(self):
        Y = random_lowrank(10, 3, seed=2, sigma=[1.0, 1e-3, 1e-9])
        assert truncate_tol(Y, 10.0).rank == 1

    def test_steep_spectrum(self):
        # sigma_i = 10^{-5(i-1)}: tolerance 1e-9 keeps two modes.
        sigma = 10.0 ** (-5.0 * np.arange(4, dtype=float))
        Y = random_lowrank(12, 4, seed=5, sigma=sigma)
        assert truncate_tol(Y, 1e-9).rank == 2

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            truncate_tol(random_lowrank(5, 2, seed=0), 0.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 8), st.floats(1e-10, 10.0))
def test_tolerance_truncation_keeps_modes_above_threshold(seed, r, tau):
    rng = np.random.default_rng(seed)
    sigma = np.sort(rng.uniform(0.0, 2.0, r))[::-1]
    assume(np.min(np.abs(sigma - tau)) > 1e-9)  # stay off the cut boundary
    Y = random_lowrank(10, r, seed=seed, sigma=sigma)
    expected = max(1, int(np.count_nonzero(sigma > tau)))
    assert truncate_tol(Y, tau).rank == expected


class TestAdd:
    def test_self_cancellation(self):
        Y = random_lowrank(12, 4, seed=9)
        Z = add(Y, Y, 1.0, -1.0)
        assert Z.rank == 8
        assert Z.norm() <= 1e-12 * Y.norm()

    def test_additive_identity(self):
        Y = random_lowrank(12, 4, seed=10)
        Z = add(Y, zero(12), 1.0, 1.0)
        assert la.norm(Z.dense() - Y.dense()) <= 1e-12 * Y.norm()

    def test_matches_dense_sum(self):
        Y1 = random_lowrank(50, 16, seed=11)
        Y2 = random_lowrank(50, 4, seed=12)
        Z = add(Y1, Y2, 0.7, -1.3)
        assert Z.rank == 20
        dense = 0.7 * Y1.dense() - 1.3 * Y2.dense()
        assert la.norm(Z.dense() - dense) <= 1e-12 * la.norm(dense)

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            add(random_lowrank(5, 2, seed=0), random_lowrank(6, 2, seed=0))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 12), st.integers(1, 6), st.integers(1, 6))
def test_combination_properties(seed, m, r1, r2):
    r1, r2 = min(r1, m), min(r2, m)
    Y1 = random_lowrank(m, r1, seed=seed)
    Y2 = random_lowrank(m, r2, seed=seed + 1)
    Z = add(Y1, Y2, 2.0, -0.5)
    assert Z.rank <= r1 + r2
    assert Z.orthonormality_defect() <= lowrank.ORTHONORMALITY_TOL
    dense = 2.0 * Y1.dense() - 0.5 * Y2.dense()
    assert la.norm(Z.dense() - dense) <= 1e-12 * max(la.norm(dense), 1.0)
    s = Z.sigma()
    assert np.all(np.diff(s) <= 0) and np.all(s >= 0)


class TestTangentProject:
    def test_fixes_tangent_vectors(self):
        Y = random_lowrank(20, 5, seed=13)
        rng = np.random.default_rng(14)
        Z = Y.U @ rng.standard_normal((5, 5)) @ Y.V.T  # U A V^T form
        np.testing.assert_allclose(tangent_project(Y, Z), Z, atol=1e-12)

    def test_idempotent_and_self_adjoint(self):
        Y = random_lowrank(16, 4, seed=15)
        rng = np.random.default_rng(16)
        Z = rng.standard_normal((16, 16))
        W = rng.standard_normal((16, 16))
        PZ = tangent_project(Y, Z)
        np.testing.assert_allclose(tangent_project(Y, PZ), PZ, atol=1e-12)
        assert np.sum(PZ * W) == pytest.approx(np.sum(Z * tangent_project(Y, W)), abs=1e-12 * la.norm(Z) * la.norm(W))

    def test_residual_orthogonal_to_tangent_space(self):
        Y = random_lowrank(30, 5, seed=17)
        rng = np.random.default_rng(18)
        Z = rng.standard_normal((30, 30))
        resid = Z - tangent_project(Y, Z)
        for _ in range(20):
            # generic tangent vector: U A V^T + U B^T + C V^T
            A = rng.standard_normal((5, 5))
            B = rng.standard_normal((30, 5))
            Cm = rng.standard_normal((30, 5))
            W = Y.U @ A @ Y.V.T + Y.U @ B.T + Cm @ Y.V.T
            W = tangent_project(Y, W)
            assert abs(np.sum(resid * W)) <= 1e-10 * la.norm(resid) * la.norm(W)


class TestSingularValues:
    def test_diagonal(self):
        s = singular_values(from_dense(np.diag([3.0, 1.0])))
        np.testing.assert_allclose(s.sigma, [3.0, 1.0], atol=1e-14)

    def test_orthogonal_invariance(self):
        rng = np.random.default_rng(19)
        Q, _ = la.qr(rng.standard_normal((2, 2)))
        s = singular_values(from_dense(Q @ np.diag([3.0, 1.0]) @ Q.T))
        np.testing.assert_allclose(s.sigma, [3.0, 1.0], atol=1e-13)

    def test_matches_dense_svd(self):
        Y = random_lowrank(40, 8, seed=20)
        expected = la.svd(Y.dense(), compute_uv=False)[:8]
        np.testing.assert_allclose(singular_values(Y).sigma, expected, rtol=1e-12, atol=1e-14)

    def test_length_is_rank_bound(self):
        Y = random_lowrank(9, 4, seed=21)
        assert len(singular_values(Y)) == 4


class TestTruncationSensitivity:
    @pytest.mark.parametrize("ratio", [0.1, 0.5, 0.9])
    def test_perturbation_ratio_bounded_by_gap(self, ratio):
        # Geometric spectrum with sigma_{q+1}/sigma_q = ratio has gap factor
        # G = 1/(1 - ratio); the truncation perturbation ratio approaches a
        # limit <= G as the perturbation size decreases.
        m, q = 24, 3
        G = 1.0 / (1.0 - ratio)
        sigma = ratio ** np.arange(m, dtype=float)
        rng = np.random.default_rng(22)
        Q1, _ = la.qr(rng.standard_normal((m, m)))
        Q2, _ = la.qr(rng.standard_normal((m, m)))
        X = (Q1 * sigma) @ Q2.T
        D = rng.standard_normal((m, m))
        D /= la.norm(D)
        Tq = truncate(from_dense(X), q).dense()
        ratios = []
        for eps in (1e-4, 1e-6, 1e-8):
            Tq_pert = truncate(from_dense(X + eps * D), q).dense()
            ratios.append(la.norm(Tq - Tq_pert) / eps)
        assert ratios[-1] <= G * 1.02
        assert ratios[2] <= ratios[0] * 1.05  # decreasing toward the limit


class TestSingularSpectrum:
    def test_rejects_increasing(self):
        with pytest.raises(ValueError):
            SingularSpectrum(np.array([1.0, 2.0]))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            SingularSpectrum(np.array([1.0, -0.5]))

    def test_tail_norm(self):
        s = SingularSpectrum(np.array([3.0, 2.0, 1.0]))
        assert s.tail_norm(1) == pytest.approx(np.sqrt(5.0))


class TestImmutability:
    def test_factors_read_only(self):
        Y = random_lowrank(6, 2, seed=23)
        with pytest.raises(ValueError):
            Y.U[0, 0] = 1.0

    def test_constructor_validates_shapes(self):
        with pytest.raises(ValueError):
            LowRankMatrix(np.ones((4, 2)), np.ones((3, 3)), np.ones((4, 3)))
        with pytest.raises(ValueError):
            LowRankMatrix(np.ones((2, 3)), np.ones((3, 3)), np.ones((2, 3)))

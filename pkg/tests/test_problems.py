import numpy as np
import pytest
import scipy.linalg as la

from lorapar.integrators import FlowOptions
from lorapar.problems import (
    SpectrumSpec,
    build_cookie_synthetic,
    build_laplacian_1d,
    build_riccati_C,
    build_riccati_diffusion,
    eval_field,
    lyapunov_field,
    random_with_spectrum,
    riccati_field,
    sylvester_field,
    warm_start,
)


def small_lyapunov(m=12, seed=0):
    A = build_laplacian_1d(m, (-1.0, 1.0))
    C = random_with_spectrum(SpectrumSpec(decay=2.0, length=3, seed=seed), m, 3)
    return lyapunov_field(A, C)


class TestEvalField:
    def test_riccati_at_zero(self):
        A = build_riccati_diffusion(8)
        C = build_riccati_C(8, 3)
        F = riccati_field(A, C)
        np.testing.assert_allclose(eval_field(F, np.zeros((8, 8))), C.T @ C, atol=1e-14)

    def test_scalar_lyapunov(self):
        F = lyapunov_field(np.array([[-1.0]]), np.array([[1.0]]))
        for x in (0.0, 0.3, -2.0):
            assert eval_field(F, np.array([[x]]))[0, 0] == pytest.approx(-2.0 * x + 1.0)

    def test_sylvester_columnwise(self):
        rng = np.random.default_rng(1)
        A0 = rng.standard_normal((12, 12))
        A1 = rng.standard_normal((12, 12))
        c1 = rng.uniform(0, 3, 5)
        b = rng.standard_normal(12)
        F = sylvester_field(A0, A1, c1, b)
        X = rng.standard_normal((12, 5))
        out = eval_field(F, X)
        for j in range(5):
            col = -A0 @ X[:, j] - c1[j] * (A1 @ X[:, j]) + b
            np.testing.assert_allclose(out[:, j], col, atol=1e-12)

    def test_riccati_preserves_symmetry(self):
        A = build_riccati_diffusion(10)
        F = riccati_field(A, build_riccati_C(10, 3))
        rng = np.random.default_rng(2)
        X = rng.standard_normal((10, 10))
        X = X + X.T
        out = eval_field(F, X)
        assert la.norm(out - out.T) <= 1e-12 * la.norm(out)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            eval_field(small_lyapunov(), np.zeros((5, 5)))


class TestAffinity:
    def test_affine_fields_interpolate(self):
        rng = np.random.default_rng(3)
        for F in (small_lyapunov(), build_cookie_synthetic(12, 4)):
            assert F.is_affine
            X = rng.standard_normal(F.shape)
            Y = rng.standard_normal(F.shape)
            a = 0.37
            lhs = eval_field(F, a * X + (1 - a) * Y)
            rhs = a * eval_field(F, X) + (1 - a) * eval_field(F, Y)
            assert la.norm(lhs - rhs) <= 1e-10 * max(la.norm(rhs), 1.0)

    def test_riccati_is_not_affine(self):
        F = riccati_field(build_riccati_diffusion(8), build_riccati_C(8, 3))
        assert not F.is_affine
        rng = np.random.default_rng(4)
        X = rng.standard_normal((8, 8))
        Y = rng.standard_normal((8, 8))
        a = 0.37
        lhs = eval_field(F, a * X + (1 - a) * Y)
        rhs = a * eval_field(F, X) + (1 - a) * eval_field(F, Y)
        assert la.norm(lhs - rhs) > 1e-6 * la.norm(rhs)

    def test_one_sided_lipschitz_constant(self):
        F = small_lyapunov()
        w, _ = F.sym_eig()
        ell = 2.0 * w[-1]
        rng = np.random.default_rng(5)
        for _ in range(100):
            X = rng.standard_normal((12, 12))
            Y = rng.standard_normal((12, 12))
            inner = np.sum((X - Y) * (eval_field(F, X) - eval_field(F, Y)))
            assert inner <= ell * la.norm(X - Y) ** 2 + 1e-10


class TestLaplacian:
    def test_two_point_stencil(self):
        A = build_laplacian_1d(2, (-1.0, 1.0))
        np.testing.assert_allclose(A, np.array([[-2.0, 1.0], [1.0, -2.0]]) * 9.0 / 4.0, atol=1e-14)

    def test_analytic_eigenvalues(self):
        n = 10
        A = build_laplacian_1d(n, (-1.0, 1.0))
        dx = 2.0 / (n + 1)
        expected = -(4.0 / dx**2) * np.sin(np.arange(1, n + 1) * np.pi / (2 * (n + 1))) ** 2
        np.testing.assert_allclose(np.sort(la.eigvalsh(A)), np.sort(expected), rtol=1e-12)

    def test_negative_definite_large(self):
        w = la.eigvalsh(build_laplacian_1d(100, (-1.0, 1.0)))
        assert w[-1] < 0
        assert 2.0 * w[-1] < 0

    def test_rejects_tiny_grid(self):
        with pytest.raises(ValueError):
            build_laplacian_1d(1)


class TestRiccatiDiffusion:
    def test_constant_coefficient_reduction(self):
        a = 1.7
        D = build_riccati_diffusion(9, lam=0.0, alpha=lambda y: a + 0.0 * y)
        np.testing.assert_allclose(D, a * build_laplacian_1d(9, (0.0, 1.0)), atol=1e-11)

    def test_symmetric_by_construction(self):
        D = build_riccati_diffusion(20)
        assert np.array_equal(D, D.T)

    def test_interior_row_sums_vanish(self):
        D = build_riccati_diffusion(50, lam=0.0)
        sums = D.sum(axis=1)
        np.testing.assert_allclose(sums[1:-1], 0.0, atol=1e-9)
        assert sums[0] < 0 and sums[-1] < 0  # boundary rows lose a neighbor

    def test_rejects_tiny_grid(self):
        with pytest.raises(ValueError):
            build_riccati_diffusion(1)


class TestRiccatiObservations:
    def test_single_row_is_ones(self):
        np.testing.assert_array_equal(build_riccati_C(6, 1), np.ones((1, 6)))

    def test_direct_evaluation(self):
        C = build_riccati_C(4, 3)
        x = np.arange(1, 5) / 5.0
        np.testing.assert_allclose(C[0], np.ones(4))
        np.testing.assert_allclose(C[1], np.sqrt(2.0) * np.cos(2 * np.pi * x))
        np.testing.assert_allclose(C[2], np.sqrt(2.0) * np.sin(2 * np.pi * x))

    def test_rows_linearly_independent(self):
        assert np.linalg.matrix_rank(build_riccati_C(100, 9)) == 9

    def test_rejects_even_count(self):
        with pytest.raises(ValueError):
            build_riccati_C(10, 4)


class TestRandomWithSpectrum:
    def test_rank_one(self):
        X = random_with_spectrum(SpectrumSpec(sigma=[1.0], seed=0), 7)
        assert np.linalg.matrix_rank(X) == 1
        assert la.norm(X, 2) == pytest.approx(1.0, rel=1e-12)

    def test_deterministic(self):
        spec = SpectrumSpec(decay=1.0, length=5, seed=99)
        assert np.array_equal(random_with_spectrum(spec, 20), random_with_spectrum(spec, 20))

    def test_prescribed_spectrum(self):
        m = 100
        X = random_with_spectrum(SpectrumSpec(decay=1.0, length=m, seed=6), m)
        sigma = la.svd(X, compute_uv=False)
        expected = 10.0 ** (-np.arange(m, dtype=float))
        # absolute accuracy relative to the top singular value
        assert np.max(np.abs(sigma - expected)) <= 1e-12 * expected[0]
        np.testing.assert_allclose(sigma[:4], expected[:4], rtol=1e-11)

    def test_rejects_oversized_spectrum(self):
        with pytest.raises(ValueError):
            random_with_spectrum(SpectrumSpec(sigma=[1.0, 0.5], seed=0), 5, 1)


class TestWarmStart:
    def test_zero_time_identity(self):
        F = small_lyapunov()
        X = np.random.default_rng(7).standard_normal((12, 12))
        np.testing.assert_array_equal(warm_start(F, X, 0.0), X)

    def test_stationary_point_unchanged(self):
        F = small_lyapunov()
        X_stat = la.solve_lyapunov(np.asarray(F.A), -(F.C @ F.C.T))
        out = warm_start(F, X_stat, 0.4)
        assert la.norm(out - X_stat) <= 1e-11 * la.norm(X_stat)

    def test_heat_start_decays_steeply(self):
        # the standard experiment start: random spectrum 10^{-(i-1)} pushed
        # through a short burn-in; the result is numerically low rank
        n = 100
        A = build_laplacian_1d(n, (-1.0, 1.0))
        C = random_with_spectrum(SpectrumSpec(decay=5.0, length=5, seed=8), n, 5)
        F = lyapunov_field(A, C)
        X_pre = random_with_spectrum(SpectrumSpec(decay=1.0, length=n, seed=9), n)
        X0 = warm_start(F, X_pre, 0.01)
        sigma = la.svd(X0, compute_uv=False)
        numerical_rank = int(np.count_nonzero(sigma > 1e-12 * sigma[0]))
        assert 10 <= numerical_rank <= 24
        assert sigma[19] <= 1e-9 * sigma[0]


class TestCookieSynthetic:
    def test_single_parameter_degeneration(self):
        F = build_cookie_synthetic(10, 1)
        rng = np.random.default_rng(10)
        y = rng.standard_normal((10, 1))
        np.testing.assert_allclose(
            eval_field(F, y), -np.asarray(F.A0) @ y + np.asarray(F.b)[:, None], atol=1e-12
        )

    def test_stationary_columns_solve_linear_systems(self):
        m, p = 60, 11
        F = build_cookie_synthetic(m, p)
        X_stat = np.column_stack(
            [la.solve(np.asarray(F.A0) + c * np.asarray(F.A1), np.asarray(F.b)) for c in F.c1]
        )
        X_T = warm_start(F, np.zeros((m, p)), 3.0, FlowOptions(rtol=1e-12, atol=1e-15, substeps=8192))
        assert la.norm(X_T - X_stat) <= 1e-10 * max(1.0, la.norm(X_stat))

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            build_cookie_synthetic(3, 1)
        with pytest.raises(ValueError):
            build_cookie_synthetic(10, 0)


class TestFieldValidation:
    def test_rejects_asymmetric_lyapunov(self):
        A = np.array([[-1.0, 0.5], [0.0, -1.0]])
        with pytest.raises(ValueError):
            lyapunov_field(A, np.ones((2, 1)))

    def test_rejects_indefinite_lyapunov(self):
        with pytest.raises(ValueError):
            lyapunov_field(np.diag([-1.0, 1.0]), np.ones((2, 1)))

    def test_operands_read_only(self):
        F = small_lyapunov()
        with pytest.raises(ValueError):
            F.A[0, 0] = 1.0

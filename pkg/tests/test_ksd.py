import numpy as np
import pytest

from gammastein.ksd import (
    RbfKernel,
    anchored_ksd_score,
    gof_test,
    ksd_ustat,
    ksd_ustat_multi,
    median_bandwidth,
    stein_kernel,
    stein_kernel_matrix,
)
from gammastein.models import Gaussian, SphericalMixture, VonMisesFisher

STD2 = Gaussian([0.0, 0.0], [[1.0, 0.2], [0.2, 1.0]])


def classical_stein_kernel(q, X, h):
    """Independent double-loop classical (gamma = 0) KSD Stein kernel."""
    n, d = X.shape
    S = q.score(X)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            diff = X[i] - X[j]
            r2 = diff @ diff
            K = np.exp(-r2 / (2 * h * h))
            out[i, j] = (
                S[i] @ S[j] * K
                + S[i] @ (K * diff / h**2)
                + S[j] @ (-K * diff / h**2)
                + K * (d / h**2 - r2 / h**4)
            )
    return out


class TestMedianBandwidth:
    def test_single_pair(self):
        assert median_bandwidth(np.array([[0.0], [1.0]])) == pytest.approx(np.sqrt(0.5), rel=1e-6)

    def test_degenerate_fallback(self):
        assert median_bandwidth(np.zeros((5, 2))) == 1.0

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(100, 2))
        d2 = []
        for i in range(100):
            for j in range(i + 1, 100):
                d2.append(np.sum((X[i] - X[j]) ** 2))
        oracle = np.sqrt(np.median(d2) / 2.0)
        assert median_bandwidth(X) == pytest.approx(oracle, rel=0.2)


class TestSteinKernel:
    def test_coincident_point_value(self):
        g = Gaussian([0.0], [[1.0]])
        # gamma=0, x=x': ||s||^2 + d/h^2
        assert stein_kernel(g, 0.0, RbfKernel(1.0), [1.0], [1.0]) == pytest.approx(2.0)

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(40, 2))
        M = stein_kernel_matrix(STD2, 0.7, RbfKernel(0.8), X)
        assert np.max(np.abs(M - M.T)) < 1e-12

    def test_classical_reduction(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(50, 2))
        h = median_bandwidth(X)
        M = stein_kernel_matrix(STD2, 0.0, RbfKernel(h), X)
        assert np.max(np.abs(M - classical_stein_kernel(STD2, X, h))) < 1e-12

    def test_kernel_derivatives_vs_finite_differences(self):
        # probe the three derivative pieces through the closed form
        g = Gaussian([0.0, 0.0], np.eye(2))
        h = 0.9
        x = np.array([0.3, -0.4])
        y = np.array([-0.2, 0.6])
        eps = 1e-6

        def K(a, b):
            return np.exp(-np.sum((a - b) ** 2) / (2 * h * h))

        grad_y_fd = np.array(
            [(K(x, y + e) - K(x, y - e)) / (2 * eps) for e in np.eye(2) * eps]
        )
        grad_y_analytic = K(x, y) * (x - y) / h**2
        assert np.allclose(grad_y_fd, grad_y_analytic, rtol=1e-5)

        trace_fd = 0.0
        for k in range(2):
            e = np.eye(2)[k] * eps
            trace_fd += (
                K(x + e, y + e) - K(x + e, y - e) - K(x - e, y + e) + K(x - e, y - e)
            ) / (4 * eps * eps)
        r2 = np.sum((x - y) ** 2)
        trace_analytic = K(x, y) * (2 / h**2 - r2 / h**4)
        assert trace_fd == pytest.approx(trace_analytic, rel=1e-4)


class TestUstat:
    def test_two_identical_points(self):
        g = Gaussian([0.0], [[1.0]])
        k = RbfKernel(1.0)
        r = ksd_ustat(np.array([[0.5], [0.5]]), g, 0.7, kernel=k)
        expect = np.exp(2 * 0.7 * g.log_u(np.array([0.5]))) * stein_kernel(g, 0.7, k, [0.5], [0.5])
        assert r.statistic == pytest.approx(expect, rel=1e-12)

    def test_permutation_invariance_exact(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(60, 2))
        a = ksd_ustat(X, STD2, 0.4).statistic
        b = ksd_ustat(X[rng.permutation(60)], STD2, 0.4).statistic
        assert a == b

    def test_scale_covariance_and_decision_invariance(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(50, 2))
        gamma = 0.3
        shift = 2.0
        base = ksd_ustat(X, STD2, gamma, kernel=RbfKernel(1.0)).statistic
        shifted = ksd_ustat(X, STD2.with_log_shift(shift), gamma, kernel=RbfKernel(1.0)).statistic
        assert shifted == pytest.approx(np.exp(2 * gamma * shift) * base, rel=1e-12)
        r1 = gof_test(X, STD2, gamma, B=150, rng=np.random.default_rng(0))
        r2 = gof_test(X, STD2.with_log_shift(shift), gamma, B=150, rng=np.random.default_rng(0))
        assert r1.reject == r2.reject
        assert r1.p_value == pytest.approx(r2.p_value, abs=1e-12)

    def test_mean_zero_under_model(self):
        g = Gaussian([0.0, 0.0], np.eye(2))
        rng = np.random.default_rng(5)
        stats = np.array(
            [ksd_ustat(g.sample(40, rng), g, 0.3).statistic for _ in range(300)]
        )
        assert abs(stats.mean()) <= 5 * stats.std(ddof=1) / np.sqrt(300)

    def test_positive_for_wrong_model(self):
        rng = np.random.default_rng(6)
        wrong = Gaussian([1.0, 1.0], np.eye(2))
        hits = 0
        for _ in range(20):
            X = STD2.sample(500, rng)
            hits += ksd_ustat(X, wrong, 0.2).statistic > 0
        assert hits == 20

    def test_multi_matches_single(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(40, 2))
        k = RbfKernel(median_bandwidth(X))
        multi = ksd_ustat_multi(X, STD2, [0.0, 0.3, 0.8], kernel=k)
        for r in multi:
            single = ksd_ustat(X, STD2, r.gamma, kernel=k)
            assert r.statistic == pytest.approx(single.statistic, rel=1e-12)

    def test_spherical_mean_zero_under_model(self):
        m = VonMisesFisher([1.0, 0.0, 0.0], 10.0)
        rng = np.random.default_rng(8)
        stats = np.array(
            [ksd_ustat(m.sample(60, rng), m, 0.1, spherical=True).statistic for _ in range(200)]
        )
        assert abs(stats.mean()) <= 5 * stats.std(ddof=1) / np.sqrt(200)

    def test_spherical_positive_for_wrong_model(self):
        m = VonMisesFisher([1.0, 0.0, 0.0], 10.0)
        wrong = VonMisesFisher([0.0, 1.0, 0.0], 10.0)
        X = m.sample(300, np.random.default_rng(9))
        assert ksd_ustat(X, wrong, 0.1, spherical=True).statistic > 1.0


class TestGofTest:
    def test_decision_matches_critical_value(self):
        rng = np.random.default_rng(10)
        X = Gaussian([0.6, 0.6], np.eye(2)).sample(150, rng)
        res = gof_test(X, STD2, 0.2, B=200, rng=rng)
        assert res.reject == (res.statistic > res.critical_value)
        assert 0.0 < res.p_value <= 1.0
        count = np.sum(res.replicate_values >= res.statistic)
        assert res.p_value == pytest.approx((1 + count) / (200 + 1))

    def test_null_simulation_level(self):
        g = Gaussian([0.0, 0.0], np.eye(2))
        rng = np.random.default_rng(11)
        rejects = sum(
            gof_test(g.sample(80, rng), g, 0.3, B=100, rng=rng).reject for _ in range(60)
        )
        assert rejects / 60 < 0.2

    def test_multiplier_mode_runs(self):
        rng = np.random.default_rng(12)
        X = STD2.sample(100, rng)
        res = gof_test(X, STD2, 0.1, calibration="multiplier", B=150, rng=rng)
        assert res.bootstrap_replicates == 150
        assert res.calibration == "multiplier"

    def test_small_b_rejected(self):
        with pytest.raises(ValueError):
            gof_test(np.zeros((10, 1)) + np.arange(10)[:, None], Gaussian([0.0], [[1.0]]), 0.1, B=50)

    def test_calibration_warning_flag(self):
        rng = np.random.default_rng(13)
        X = STD2.sample(60, rng)
        res = gof_test(X, STD2, 0.1, B=100, alpha=0.005, rng=rng)
        assert res.calibration_warning

    def test_custom_null_sampler(self):
        # calibration under a contaminated null keeps type I moderate even
        # though the data are far from the target model
        target = Gaussian([0.0, 0.0], np.eye(2))
        contaminated = SphericalMixture([0.9, 0.1], [[0.0, 0.0], [5.0, 5.0]], [1.0, 1.0])
        rng = np.random.default_rng(14)
        X = contaminated.sample(150, rng)
        res = gof_test(
            X, target, 0.3, null_sampler=contaminated.sample, B=200, rng=rng
        )
        assert res.bootstrap_replicates == 200


def test_anchored_score_is_scale_free():
    rng = np.random.default_rng(15)
    m = VonMisesFisher([1.0, 0.0, 0.0], 10.0)
    X = m.sample(80, rng)
    a = anchored_ksd_score(X, m, 0.1, spherical=True)
    b = anchored_ksd_score(X, m.with_log_shift(40.0), 0.1, spherical=True)
    assert a == pytest.approx(b, rel=1e-9)

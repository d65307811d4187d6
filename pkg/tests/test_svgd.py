import numpy as np
import pytest

from gammastein.errors import DegenerateWeightError
from gammastein.ksd import RbfKernel
from gammastein.svgd import (
    ParticleEnsemble,
    SvgdConfig,
    anneal_schedule,
    gamma_svgd_velocity,
    gaussian_target,
    init_particles,
    make_poisson_target,
    poisson_gamma_log_target,
    run_svgd,
    softmax_gamma_weights,
    svgd_velocity,
)

TARGET2 = gaussian_target([0.0, 0.0], np.eye(2))


def brute_force_velocity(positions, target, gamma, h):
    M = positions.shape[0]
    S = target.grad_log_u(positions)
    lu = target.log_u(positions)
    if gamma == 0.0:
        w = np.full(M, 1.0 / M)
    else:
        e = np.exp(gamma * lu - np.max(gamma * lu))
        w = e / e.sum()
    out = np.zeros_like(positions)
    for i in range(M):
        for j in range(M):
            diff = positions[j] - positions[i]
            K = np.exp(-(diff @ diff) / (2 * h * h))
            out[i] += w[j] * ((gamma + 1.0) * K * S[j] - K * diff / h**2)
    return out


class TestVelocity:
    def test_single_particle_is_gradient_ascent(self):
        pos = np.array([[1.0, 2.0]])
        v = svgd_velocity(pos, TARGET2, RbfKernel(1.0))
        assert np.allclose(v, TARGET2.grad_log_u(pos))

    def test_symmetric_pair_opposite(self):
        pos = np.array([[1.0, 0.0], [-1.0, 0.0]])
        v = svgd_velocity(pos, TARGET2, RbfKernel(1.0))
        assert np.allclose(v[0], -v[1])

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(0)
        pos = rng.normal(size=(5, 2))
        for gamma in [0.0, 0.5]:
            v = gamma_svgd_velocity(pos, TARGET2, gamma, RbfKernel(0.9))
            bf = brute_force_velocity(pos, TARGET2, gamma, 0.9)
            assert np.max(np.abs(v - bf)) < 1e-12

    def test_gamma_zero_bitwise_reduction(self):
        rng = np.random.default_rng(1)
        pos = rng.normal(size=(8, 3))
        t = gaussian_target([0.0, 0.0, 0.0], np.eye(3))
        assert np.array_equal(
            gamma_svgd_velocity(pos, t, 0.0, RbfKernel(1.1)), svgd_velocity(pos, t, RbfKernel(1.1))
        )

    def test_all_particles_at_mode_zero_velocity(self):
        pos = np.zeros((6, 2))
        v = gamma_svgd_velocity(pos, TARGET2, 0.4, RbfKernel(1.0))
        assert np.max(np.abs(v)) < 1e-12

    def test_outlier_particle_suppressed(self):
        t = gaussian_target([0.0], [[1.0]])
        pos = np.array([[0.0], [0.5], [-1000.0]])
        w = softmax_gamma_weights(t.log_u(pos), 0.5)
        assert w[2] < 1e-300


class TestSoftmaxWeights:
    def test_sum_to_one(self):
        rng = np.random.default_rng(2)
        w = softmax_gamma_weights(rng.normal(size=32), 0.7)
        assert abs(w.sum() - 1.0) < 1e-12

    def test_constant_shift_invariance(self):
        rng = np.random.default_rng(3)
        lu = rng.normal(size=16)
        a = softmax_gamma_weights(lu, 0.3)
        b = softmax_gamma_weights(lu + 45.0, 0.3)
        assert np.allclose(a, b, rtol=1e-12)

    def test_degenerate_error(self):
        with pytest.raises(DegenerateWeightError):
            softmax_gamma_weights(np.full(4, -np.inf), 0.5)

    def test_unnormalized_variant(self):
        lu = np.array([0.0, np.log(2.0)])
        w = softmax_gamma_weights(lu, 1.0, unnormalized=True)
        assert np.allclose(w, [0.5, 1.0])


class TestPoissonTarget:
    def setup_method(self):
        rng = np.random.default_rng(4)
        self.X = rng.normal(size=(60, 3))
        alpha = np.array([0.5, 0.3, -0.2, 0.1])
        self.y = rng.poisson(np.exp(alpha[0] + self.X @ alpha[1:]))

    def test_gamma_limit_matches_loglik(self):
        # per-observation agreement at gamma = 1e-8 (the O(gamma) remainder
        # scales with the summed squared log-likelihood terms)
        a = np.array([0.4, 0.2, -0.1, 0.05])
        l0, g0 = poisson_gamma_log_target(a, self.X, self.y, 0.0)
        l1, g1 = poisson_gamma_log_target(a, self.X, self.y, 1e-8)
        assert abs(l0 - l1) / self.X.shape[0] < 1e-6
        assert np.allclose(g0, g1, atol=1e-6)

    def test_hand_value_zero_count(self):
        gamma = 0.3
        lu, _ = poisson_gamma_log_target(
            np.zeros(2), np.zeros((1, 1)), np.array([0]), gamma, prior_variances=[1.0, 1.0]
        )
        assert lu == pytest.approx((np.exp(-gamma / (gamma + 1.0)) - 1.0) / gamma)

    @pytest.mark.parametrize("gamma", [0.0, 0.05, 0.2])
    def test_gradient_matches_finite_differences(self, gamma):
        rng = np.random.default_rng(5)
        for _ in range(20):
            a = rng.normal(scale=0.3, size=4)
            _, grad = poisson_gamma_log_target(a, self.X, self.y, gamma)
            eps = 1e-6
            for i in range(4):
                up, dn = a.copy(), a.copy()
                up[i] += eps
                dn[i] -= eps
                fd = (
                    poisson_gamma_log_target(up, self.X, self.y, gamma)[0]
                    - poisson_gamma_log_target(dn, self.X, self.y, gamma)[0]
                ) / (2 * eps)
                assert fd == pytest.approx(grad[i], rel=1e-5, abs=1e-4)

    def test_spiked_counts_downweighted(self):
        # a count spike must reduce, not amplify, its own weight e^{a_i}
        gamma = 0.1
        X = np.array([[1.0], [1.0]])
        y = np.array([3, 300])
        target = make_poisson_target(X, y, gamma)
        a = np.zeros((1, 2))
        a[0, 1] = 1.0  # z = 1 for both observations
        # contribution of each observation to the gradient scale
        from scipy.special import gammaln

        z = 1.0
        exps = gamma * (y * z - np.exp((gamma + 1) * z) / (gamma + 1) - gammaln(y + 1.0))
        assert exps[1] < exps[0] - 10.0

    def test_counts_validated(self):
        with pytest.raises(ValueError):
            poisson_gamma_log_target(np.zeros(2), np.zeros((1, 1)), np.array([-1]), 0.1)


class TestRunSvgd:
    def test_gaussian_moments(self):
        cfg = SvgdConfig(particles=32, iterations=200, step=0.1, gamma_target=0.0)
        init = init_particles(2, 32, np.random.default_rng(7), scale=2.0)
        res = run_svgd(cfg, TARGET2, init)
        assert np.all(np.abs(res.positions.mean(axis=0)) < 0.1)
        assert np.all(np.abs(res.positions.var(axis=0) - 1.0) < 0.25)

    def test_determinism(self):
        cfg = SvgdConfig(particles=16, iterations=50, step=0.1, gamma_target=0.1)
        a = run_svgd(cfg, TARGET2, init_particles(2, 16, np.random.default_rng(8)))
        b = run_svgd(cfg, TARGET2, init_particles(2, 16, np.random.default_rng(8)))
        assert np.array_equal(a.positions, b.positions)
        assert [r.step for r in a.trace] == [r.step for r in b.trace]

    def test_trace_and_annealing(self):
        cfg = SvgdConfig(particles=8, iterations=40, step=0.05, gamma_target=0.3)
        res = run_svgd(cfg, TARGET2, init_particles(2, 8, np.random.default_rng(9)))
        gammas = [r.gamma for r in res.trace]
        assert gammas[0] == 0.0
        assert gammas[-1] == 0.3
        assert all(b >= a for a, b in zip(gammas, gammas[1:]))

    def test_projection_radius(self):
        cfg = SvgdConfig(particles=8, iterations=30, step=0.5, projection_radius=0.5)
        res = run_svgd(cfg, TARGET2, init_particles(2, 8, np.random.default_rng(10), scale=3.0))
        assert np.all(np.linalg.norm(res.positions, axis=1) <= 0.5 + 1e-12)

    def test_frozen_bandwidth_policy(self):
        cfg = SvgdConfig(particles=8, iterations=20, bandwidth_policy="frozen")
        res = run_svgd(cfg, TARGET2, init_particles(2, 8, np.random.default_rng(11)))
        bandwidths = {r.bandwidth for r in res.trace}
        assert len(bandwidths) == 1

    def test_normalizer_shift_leaves_trajectory(self):
        base = make_poisson_target(
            np.random.default_rng(12).normal(size=(40, 2)),
            np.random.default_rng(13).poisson(2.0, size=40),
            0.05,
        )
        shifted_target = type(base)(
            log_u=lambda A: base.log_u(A) + 33.0,
            grad_log_u=base.grad_log_u,
            dim=base.dim,
            kind=base.kind,
        )
        cfg = SvgdConfig(particles=12, iterations=40, gamma_target=0.05)
        a = run_svgd(cfg, base, init_particles(base.dim, 12, np.random.default_rng(14)))
        b = run_svgd(cfg, shifted_target, init_particles(base.dim, 12, np.random.default_rng(14)))
        assert np.allclose(a.positions, b.positions, rtol=1e-12, atol=1e-12)


def test_anneal_schedule_invariants():
    g = anneal_schedule(100, 0.4, fraction=0.6)
    assert g[0] == 0.0 and g[-1] == 0.4
    assert np.all(np.diff(g) >= 0)
    assert np.all(g <= 0.4)


def test_config_validation():
    with pytest.raises(ValueError):
        SvgdConfig(step=-0.1)
    with pytest.raises(ValueError):
        SvgdConfig(bandwidth_policy="hourly")

"""Acceptance suite: one test per criterion at desk scale with pinned seeds
and tolerances.  Each test prints a PASS line on success; failures carry the
measured values.  Experiments are cached per module so each runs once.
"""

import time

import numpy as np
import pytest

from gammastein.fields import linear_field, monomial_field, sin_field
from gammastein.harness import run_experiment
from gammastein.ksd import RbfKernel, gof_test, ksd_ustat, median_bandwidth
from gammastein.models import (
    FisherBingham,
    Gaussian,
    Quartic,
    SphericalMixture,
    VonMisesFisher,
)
from gammastein.moments import estimating_mean, estimating_values
from gammastein.operators import apply_gamma_stein
from gammastein.solvers import (
    gaussian_fixed_point,
    jacobian_symmetry_diagnostic,
    vmf_fixed_point,
)
from gammastein.svgd import (
    SvgdConfig,
    gamma_svgd_velocity,
    init_particles,
    make_poisson_target,
    run_svgd,
)

SEED = 20240808

_CACHE = {}


def _experiment(name, tmp_path_factory, **overrides):
    if name not in _CACHE:
        out = str(tmp_path_factory.mktemp(f"acc-{name}"))
        t0 = time.time()
        result = run_experiment(name, overrides=overrides, desk=True, seed=SEED, out_dir=out)
        _CACHE[name] = (result, time.time() - t0)
    return _CACHE[name]


def _cell(agg, **match):
    rows = [r for r in agg if all(str(r[k]) == str(v) for k, v in match.items())]
    assert len(rows) == 1, f"no unique row for {match}"
    return rows[0]


def test_criterion_01_identity_suite(tmp_path_factory):
    result, elapsed = _experiment("verify-identities", tmp_path_factory)
    failed = [r for r in result.rows if not r["passed"]]
    assert not failed, f"identity checks failed: {[r['check'] for r in failed]}"
    kinds = {r["check"].split(":")[0] for r in result.rows}
    counts = {k: sum(r["check"].startswith(k) for r in result.rows) for k in kinds}
    assert counts["identity"] == 12
    assert counts["mixed"] == 6
    assert counts["first-variation"] == 4
    assert elapsed < 30.0, f"identity suite took {elapsed:.1f}s"
    print(f"\nACCEPTANCE 1 PASS: 22 identity checks, {elapsed:.1f}s")


def test_criterion_02_gamma_zero_reductions():
    rng = np.random.default_rng(SEED)
    t0 = time.time()

    # operator: classical <s, f> + div f coded independently
    g = Gaussian([0.0, 0.0], [[1.0, 0.3], [0.3, 1.0]])
    field = sin_field()
    for _ in range(50):
        x = rng.normal(size=2)
        ev = apply_gamma_stein(g, 0.0, field, x)
        s = g.score(x)
        classical = s[0] * np.sin(x[0]) + s[1] * np.sin(x[1]) + np.cos(x[0]) + np.cos(x[1])
        assert abs(ev.total - classical) <= 1e-12 * (1 + abs(classical))

    # KSD: independent double loop, different algebraic grouping
    X = rng.normal(size=(40, 2))
    h = median_bandwidth(X)
    stat = ksd_ustat(X, g, 0.0, kernel=RbfKernel(h)).statistic
    S = g.score(X)
    acc = 0.0
    for i in range(40):
        for j in range(40):
            if i == j:
                continue
            diff = X[i] - X[j]
            r2 = float(diff @ diff)
            K = np.exp(-r2 / (2 * h * h))
            acc += K * (S[i] @ S[j] + (S[i] - S[j]) @ diff / h**2 + 2 / h**2 - r2 / h**4)
    assert abs(stat - acc / (40 * 39)) <= 1e-12 * (1 + abs(stat))

    # SVGD velocity: independent double loop
    from gammastein.svgd import gaussian_target, svgd_velocity

    target = gaussian_target([0.0, 0.0], np.eye(2))
    pos = rng.normal(size=(6, 2))
    vel = gamma_svgd_velocity(pos, target, 0.0, RbfKernel(0.8))
    Sp = target.grad_log_u(pos)
    ref = np.zeros_like(pos)
    for i in range(6):
        for j in range(6):
            diff = pos[j] - pos[i]
            K = np.exp(-(diff @ diff) / (2 * 0.8**2))
            ref[i] += (K * Sp[j] - K * diff / 0.8**2) / 6.0
    assert np.max(np.abs(vel - ref)) <= 1e-12
    assert np.array_equal(vel, svgd_velocity(pos, target, RbfKernel(0.8)))
    print(f"\nACCEPTANCE 2 PASS: gamma=0 reductions at 1e-12, {time.time() - t0:.1f}s")


def test_criterion_03_normalizer_invariance():
    rng = np.random.default_rng(SEED + 1)
    t0 = time.time()
    shifts = [-50.0, -7.3, 13.1, 50.0]

    # estimator moment functionals (the solvers parameterize log u internally,
    # so a shift cannot enter them at all; the shift-exposed surface is the
    # normalized estimating mean)
    models = {
        "gaussian": (Gaussian([0.2], [[1.5]]), rng.normal(size=(200, 1))),
        "quartic": (Quartic(0.0, 2.0, -0.5), Quartic(0.0, 2.0, -0.5).sample(200, rng)),
        "vmf": (
            VonMisesFisher([1.0, 0.0, 0.0], 10.0),
            VonMisesFisher([1.0, 0.0, 0.0], 10.0).sample(200, rng),
        ),
    }
    for name, (model, X) in models.items():
        base = estimating_mean(model, X, 0.3, normalize_weights=True).values
        for c in shifts:
            shifted = estimating_mean(
                model.with_log_shift(c), X, 0.3, normalize_weights=True
            ).values
            assert np.allclose(shifted, base, rtol=1e-12, atol=1e-12), name

    # test decision invariance
    g2 = Gaussian([0.0, 0.0], np.eye(2))
    X = Gaussian([0.4, 0.4], np.eye(2)).sample(120, rng)
    base = gof_test(X, g2, 0.3, B=200, rng=np.random.default_rng(5))
    for c in shifts:
        res = gof_test(X, g2.with_log_shift(c), 0.3, B=200, rng=np.random.default_rng(5))
        assert res.reject == base.reject
        assert res.p_value == pytest.approx(base.p_value, abs=1e-12)

    # SVGD trajectory invariance
    target = make_poisson_target(rng.normal(size=(60, 2)), rng.poisson(3.0, size=60), 0.05)
    shifted_target = type(target)(
        log_u=lambda A, c=25.0: target.log_u(A) + c,
        grad_log_u=target.grad_log_u,
        dim=target.dim,
        kind=target.kind,
    )
    cfg = SvgdConfig(particles=16, iterations=60, gamma_target=0.05)
    a = run_svgd(cfg, target, init_particles(target.dim, 16, np.random.default_rng(6)))
    b = run_svgd(cfg, shifted_target, init_particles(target.dim, 16, np.random.default_rng(6)))
    assert np.allclose(a.positions, b.positions, rtol=1e-12, atol=1e-12)
    print(f"\nACCEPTANCE 3 PASS: normalizer invariance at machine precision, {time.time() - t0:.1f}s")


def test_criterion_04_vmf_table(tmp_path_factory):
    result, elapsed = _experiment("vmf-table1", tmp_path_factory)
    agg = result.aggregate

    mle_02 = _cell(agg, epsilon=0.2, estimator="MLE")["integrated_rmse"]
    g10_02 = _cell(agg, epsilon=0.2, estimator="gamma=0.1")["integrated_rmse"]
    assert abs(mle_02 - 8.06) <= 4.0, f"MLE at eps=0.2: {mle_02:.2f}"
    assert abs(g10_02 - 0.73) <= 0.4, f"gamma=0.1 at eps=0.2: {g10_02:.2f}"

    # gamma = 0.10 best at eps = 0.20
    rivals = [r["integrated_rmse"] for r in agg if r["epsilon"] == 0.2 and r["estimator"] != "gamma=0.1"]
    assert g10_02 < min(rivals), f"gamma=0.1 not best at eps=0.2 ({g10_02:.2f} vs {min(rivals):.2f})"

    # MLE best at eps = 0: below every gamma > 0 row; MLE and the unweighted
    # estimator are statistically tied on clean data (both ~0.45), so that
    # comparison carries a 25% band
    mle_0 = _cell(agg, epsilon=0.0, estimator="MLE")["integrated_rmse"]
    g0_0 = _cell(agg, epsilon=0.0, estimator="gamma=0")["integrated_rmse"]
    positive = [
        r["integrated_rmse"]
        for r in agg
        if r["epsilon"] == 0.0 and r["estimator"] not in ("MLE", "gamma=0")
    ]
    assert mle_0 < min(positive), "MLE not best on clean data"
    assert mle_0 <= 1.25 * g0_0
    assert elapsed < 300.0
    print(
        f"\nACCEPTANCE 4 PASS: MLE@0.2={mle_02:.2f} (8.06+-4), gamma0.1@0.2={g10_02:.2f} "
        f"(0.73+-0.4), orderings hold, {elapsed:.1f}s"
    )


def test_criterion_05_cv_selection(tmp_path_factory):
    result, elapsed = _experiment("cv-table2", tmp_path_factory)
    agg = result.aggregate
    anchors = [0.0, 0.05, 0.1]

    def hits(eps, wanted):
        return sum(
            _cell(agg, epsilon=eps, anchor=a)["selected_gamma"] == wanted for a in anchors
        )

    n05 = hits(0.05, 0.05)
    n10 = hits(0.1, 0.1)
    n20 = hits(0.2, 0.1)
    assert elapsed < 600.0
    detail = f"selected-gamma anchor hits: eps=0.05->{n05}/3, eps=0.10->{n10}/3, eps=0.20->{n20}/3"
    assert n05 >= 2 and n10 >= 2 and n20 >= 2, detail
    print(f"\nACCEPTANCE 5 PASS: {detail}, {elapsed:.1f}s")


def test_criterion_06_nmm_table(tmp_path_factory):
    result, elapsed = _experiment("nmm-table3", tmp_path_factory)
    agg = result.aggregate
    g10 = _cell(agg, epsilon=0.1, estimator="gamma-stein")
    m10 = _cell(agg, epsilon=0.1, estimator="mle-em")
    ratio = m10["rmse_sigma"] / g10["rmse_sigma"]
    assert ratio >= 3.0, f"sigma RMSE ratio at eps=10%: {ratio:.2f}"

    g0 = _cell(agg, epsilon=0.0, estimator="gamma-stein")
    m0 = _cell(agg, epsilon=0.0, estimator="mle-em")
    for block in ("rmse_pi", "rmse_mu", "rmse_sigma"):
        assert m0[block] < g0[block], f"MLE not better on clean {block}"
    assert elapsed < 600.0
    print(f"\nACCEPTANCE 6 PASS: sigma ratio {ratio:.1f} (>=3), clean sweep holds, {elapsed:.1f}s")


def test_criterion_07_quartic_table(tmp_path_factory):
    result, elapsed = _experiment("quartic-table4", tmp_path_factory)
    agg = result.aggregate
    mle_out = _cell(agg, scenario="outliers", estimator="MLE")["rmse"]
    g3_out = _cell(agg, scenario="outliers", estimator="gamma=0.3")["rmse"]
    assert g3_out < 0.5 * mle_out, f"outliers: gamma=0.3 {g3_out:.3f} vs MLE {mle_out:.3f}"
    mle_clean = _cell(agg, scenario="clean", estimator="MLE")["rmse"]
    g3_clean = _cell(agg, scenario="clean", estimator="gamma=0.3")["rmse"]
    assert mle_clean < g3_clean
    assert elapsed < 600.0
    print(
        f"\nACCEPTANCE 7 PASS: outliers {g3_out:.2f} < 0.5*{mle_out:.2f}, "
        f"clean {mle_clean:.2f} < {g3_clean:.2f}, {elapsed:.1f}s"
    )


def test_criterion_08_power_table(tmp_path_factory):
    result, elapsed = _experiment("power-table5", tmp_path_factory)
    agg = result.aggregate
    type1 = {r["gamma"]: r["power"] for r in agg if r["delta"] == 0.0}
    for gamma, level in type1.items():
        assert 0.02 <= level <= 0.08, f"type I at gamma={gamma}: {level:.3f}"
    p65 = _cell(agg, delta=0.6, gamma=0.5)["power"]
    assert p65 >= 0.85, f"power(0.6, 0.5) = {p65:.3f}"
    gamma0 = {r["delta"]: r["power"] for r in agg if r["gamma"] == 0.0}
    offenders = {d: p for d, p in gamma0.items() if p > 0.15}
    assert elapsed < 900.0
    assert not offenders, f"gamma=0 power exceeds 0.15 at {offenders}"
    print(
        f"\nACCEPTANCE 8 PASS: type I {sorted(type1.values())}, power(0.6,0.5)={p65:.2f}, "
        f"gamma=0 blind, {elapsed:.1f}s"
    )


def test_criterion_09_svgd_table(tmp_path_factory):
    result, elapsed = _experiment("svgd-table6", tmp_path_factory)
    agg = result.aggregate

    def rmse(scenario, gamma):
        return _cell(agg, scenario=scenario, gamma=gamma)["mean_rmse"]

    clean = {r["gamma"]: r["mean_rmse"] for r in agg if r["scenario"] == "clean"}
    assert clean[0.0] == min(clean.values()), f"clean: {clean}"
    assert rmse("outcome", 0.1) < rmse("outcome", 0.0)
    mixed_best = min(rmse("covariate+outcome", 0.02), rmse("covariate+outcome", 0.05))
    assert mixed_best < rmse("covariate+outcome", 0.0)
    assert elapsed < 600.0
    print(
        f"\nACCEPTANCE 9 PASS: clean min at gamma=0 ({clean[0.0]:.2f}), "
        f"Y-contam {rmse('outcome', 0.1):.2f} < {rmse('outcome', 0.0):.2f}, "
        f"mixed {mixed_best:.2f} < {rmse('covariate+outcome', 0.0):.2f}, {elapsed:.1f}s"
    )


def test_criterion_10_property_suite():
    t0 = time.time()
    rng = np.random.default_rng(SEED + 2)

    # unbiasedness of the estimating mean at truth, 5 sigma Monte Carlo
    # (the practical vMF concentration block targets (gamma+1) kappa, so the
    # vMF family is checked at gamma = 0 where it is the exact Stein block)
    cases = [
        (Gaussian([0.4], [[2.0]]), 0.3, 10**5),
        (Quartic(0.0, 2.0, -0.5), 0.3, 10**5),
        (SphericalMixture([0.5, 0.5], [[-2.0, 0.0], [2.0, 0.0]], [1 / 0.6, 1 / 0.6]), 0.3, 10**5),
        (VonMisesFisher([1.0, 0.0, 0.0], 10.0), 0.0, 10**5),
        (FisherBingham([1.0, 0.0, 0.5], np.diag([0.2, -0.1, -0.1])), 0.3, 2 * 10**4),
    ]
    for model, gamma, n in cases:
        X = model.sample(n, rng)
        vals, _ = estimating_values(model, X, gamma)
        mean = vals.mean(axis=0)
        tol = 5.0 * vals.std(axis=0, ddof=1) / np.sqrt(n)
        assert np.all(np.abs(mean) <= tol), type(model).__name__

    # Jacobian asymmetry ratio decreasing over n
    model = Gaussian([0.0], [[1.0]])
    gen = np.random.default_rng(123)
    ratios = [
        jacobian_symmetry_diagnostic(model, model.sample(n, gen), 0.5)
        for n in (10**2, 10**3, 10**4)
    ]
    assert ratios[0] > ratios[1] > ratios[2], ratios

    # KSD U-statistic mean zero under H0, 5 sigma
    g2 = Gaussian([0.0, 0.0], np.eye(2))
    stats = np.array([ksd_ustat(g2.sample(50, rng), g2, 0.3).statistic for _ in range(300)])
    assert abs(stats.mean()) <= 5 * stats.std(ddof=1) / np.sqrt(300)

    # gradient-vs-finite-difference checks across all families
    families = [
        Gaussian([0.3, -0.7], [[2.0, 0.4], [0.4, 1.0]]),
        Quartic(0.1, 2.0, -0.5),
        SphericalMixture([0.5, 0.5], [[-2.0, 0.0], [2.0, 0.0]], [1 / 0.6, 1 / 0.6]),
        VonMisesFisher([0.0, 0.0, 1.0], 5.0),
        FisherBingham([1.0, 0.5, 0.0], np.diag([0.3, -0.1, -0.2])),
    ]
    h = 1e-5
    for model in families:
        if isinstance(model, (VonMisesFisher, FisherBingham)):
            Z = rng.standard_normal((100, model.dim))
            X = Z / np.linalg.norm(Z, axis=1, keepdims=True)
        else:
            X = rng.normal(scale=1.5, size=(100, model.dim))
        for k in range(model.dim):
            step = np.zeros(model.dim)
            step[k] = h
            fd = (model.log_u(X + step) - model.log_u(X - step)) / (2 * h)
            assert np.allclose(fd, model.score(X)[:, k], rtol=1e-5, atol=1e-6)

    elapsed = time.time() - t0
    assert elapsed < 300.0
    print(f"\nACCEPTANCE 10 PASS: property suite, {elapsed:.1f}s")

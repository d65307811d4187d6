"""Experiment drivers reproducing the five simulation studies plus the
identity verification suite.

Every experiment runs R independent replications (optionally across a process
pool), writes a per-replication CSV, recomputes the aggregate table from the
written file as a self-consistency check, and emits the aggregate CSV, a
rendered text table, optional SVG plots, and a JSON manifest listing every
output file.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import __version__
from ..fields import (
    constant_field,
    field_sum,
    linear_field,
    monomial_field,
    rotation_field,
    sin_field,
)
from ..ksd import RbfKernel, anchored_ksd_score, ksd_ustat_multi, median_bandwidth
from ..models import Gaussian, Quartic, SphericalMixture, make_model
from ..operators import (
    correct_field,
    first_variation_check,
    mixed_inner_product_check,
    stein_identity_residual,
)
from ..quadrature import grid_for_model
from ..selection import kfold_split, one_se_select
from ..solvers import (
    nmm_em_mle,
    nmm_fit,
    quartic_gamma_fit,
    quartic_mle,
    vmf_fixed_point,
    vmf_mle,
)
from ..svgd import (
    SvgdConfig,
    init_particles,
    make_poisson_target,
    run_svgd,
)
from ..validation import EXP_CLAMP, as_generator
from .metrics import mixture_rmse, predictive_rmse
from .plots import svg_line_plot
from .scenarios import ContaminationSpec, ScenarioConfig, generate_dataset

EXPERIMENT_NAMES = (
    "vmf-table1",
    "cv-table2",
    "nmm-table3",
    "quartic-table4",
    "power-table5",
    "svgd-table6",
    "verify-identities",
)

VMF_MU_STAR = (1.0, 0.0, 0.0)
VMF_KAPPA_STAR = 10.0
NMM_TRUTH = {
    "weights": [0.5, 0.5],
    "means": [[-2.0, 0.0], [2.0, 0.0]],
    "precisions": [1.0 / 0.6, 1.0 / 0.6],
}
QUARTIC_THETA_STAR = (0.0, 2.0, -0.5)
POISSON_ALPHA_STAR = (3.0, 0.3, -0.2, 0.4, -0.3, 0.2, -0.1)


@dataclass
class RunManifest:
    version: str
    experiment: str
    config: dict
    seed: int
    desk: bool
    wall_time_s: float
    outputs: list
    failures: int
    replications: int

    def to_dict(self):
        return {
            "version": self.version,
            "experiment": self.experiment,
            "config": self.config,
            "seed": self.seed,
            "desk": self.desk,
            "wall_time_s": self.wall_time_s,
            "outputs": self.outputs,
            "failures": self.failures,
            "replications": self.replications,
        }


@dataclass
class RunResult:
    manifest: RunManifest
    rows: list
    aggregate: list
    exit_code: int


# ---------------------------------------------------------------- utilities


def _fmt(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in header])
    return path


def _read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _rows_equal(header, a, b):
    fa = [[_fmt(r[k]) for k in header] for r in a]
    fb = [[_fmt(r[k]) for k in header] for r in b]
    return fa == fb


def _spawn_seeds(seed, n):
    return np.random.SeedSequence(seed).spawn(n)


def _run_replications(rep_fn, config, replications, seed, threads):
    seeds = _spawn_seeds(seed, replications)
    results = {}
    failures = []
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = {
                pool.submit(rep_fn, config, r, seeds[r]): r for r in range(replications)
            }
            for fut, r in futures.items():
                try:
                    results[r] = fut.result()
                except Exception as exc:  # noqa: BLE001 - replication isolation
                    failures.append((r, repr(exc)))
    else:
        for r in range(replications):
            try:
                results[r] = rep_fn(config, r, seeds[r])
            except Exception as exc:  # noqa: BLE001
                failures.append((r, repr(exc)))
    rows = []
    for r in sorted(results):
        rows.extend(results[r])
    return rows, failures


# ------------------------------------------------------------- vmf table 1


def _vmf_config(desk, overrides):
    cfg = {
        "epsilons": [0.0, 0.05, 0.10, 0.20],
        "gammas": [0.0, 0.05, 0.10, 0.20, 0.30],
        "n": 400,
        "replications": 20 if desk else 50,
        "mu_star": list(VMF_MU_STAR),
        "kappa_star": VMF_KAPPA_STAR,
        "spike_kappa": 50.0,
    }
    cfg.update(overrides)
    return cfg


def _vmf_rep(config, rep, seed):
    rng = as_generator(seed)
    rows = []
    mu_star = np.asarray(config["mu_star"])
    for eps in config["epsilons"]:
        scen = ScenarioConfig(
            experiment="vmf-table1",
            family="vmf",
            true_params={"mu": config["mu_star"], "kappa": config["kappa_star"]},
            n=config["n"],
            contamination=ContaminationSpec(
                "antipodal-vmf", eps, {"kappa": config["spike_kappa"]}
            ),
        )
        data = generate_dataset(scen, rep, rng)
        fits = {"MLE": vmf_mle(data.X)}
        for gamma in config["gammas"]:
            fits[f"gamma={gamma:g}"] = vmf_fixed_point(data.X, gamma)
        for name, fit in fits.items():
            rows.append(
                {
                    "epsilon": eps,
                    "replication": rep,
                    "estimator": name,
                    "direction_error": 1.0 - float(fit.params.mu @ mu_star) ** 2,
                    "kappa_hat": fit.params.kappa,
                }
            )
    return rows


def _vmf_aggregate(rows, config):
    kappa_star = config["kappa_star"]
    agg = []
    for eps in config["epsilons"]:
        for name in ["MLE"] + [f"gamma={g:g}" for g in config["gammas"]]:
            sel = [
                r
                for r in rows
                if float(r["epsilon"]) == eps and r["estimator"] == name
            ]
            if not sel:
                continue
            dir_err = np.array([float(r["direction_error"]) for r in sel])
            kappas = np.array([float(r["kappa_hat"]) for r in sel])
            tr = np.sqrt(2.0 * dir_err.mean())
            krm = np.sqrt(np.mean((kappas - kappa_star) ** 2))
            agg.append(
                {
                    "epsilon": eps,
                    "estimator": name,
                    "trace_rmse_mu": tr,
                    "rmse_kappa": krm,
                    "integrated_rmse": tr + krm,
                    "replications": len(sel),
                }
            )
    return agg


def _vmf_render(agg, config):
    eps = config["epsilons"]
    names = ["MLE"] + [f"gamma={g:g}" for g in config["gammas"]]
    lines = ["Integrated RMSE, direction + concentration (vMF, antipodal spike)"]
    lines.append("estimator      " + "".join(f"eps={e:<8g}" for e in eps))
    table = {(r["estimator"], float(r["epsilon"])): r["integrated_rmse"] for r in agg}
    for name in names:
        cells = "".join(f"{table[(name, e)]:<12.3f}" for e in eps if (name, e) in table)
        lines.append(f"{name:<15}" + cells)
    return "\n".join(lines) + "\n"


def _vmf_plots(agg, config, out_dir):
    eps = config["epsilons"]
    series = []
    for name in ["MLE"] + [f"gamma={g:g}" for g in config["gammas"]]:
        ys = [r["integrated_rmse"] for r in agg if r["estimator"] == name]
        if len(ys) == len(eps):
            series.append((name, eps, ys))
    path = os.path.join(out_dir, "vmf-table1.svg")
    svg_line_plot(path, series, title="Integrated RMSE vs contamination",
                  xlabel="epsilon", ylabel="integrated RMSE")
    return [path]


# -------------------------------------------------------------- cv table 2


def _cv_config(desk, overrides):
    cfg = {
        "epsilons": [0.0, 0.05, 0.10, 0.20],
        "gamma_grid": [0.0, 0.05, 0.10, 0.20, 0.30, 1.0],
        "anchors": [0.0, 0.05, 0.10],
        "n": 400,
        "n_folds": 5,
        "replications": 20 if desk else 50,
        "mu_star": list(VMF_MU_STAR),
        "kappa_star": VMF_KAPPA_STAR,
        "spike_kappa": 50.0,
    }
    cfg.update(overrides)
    return cfg


def _cv_rep(config, rep, seed):
    rng = as_generator(seed)
    rows = []
    grid = list(config["gamma_grid"])
    for eps in config["epsilons"]:
        scen = ScenarioConfig(
            experiment="cv-table2",
            family="vmf",
            true_params={"mu": config["mu_star"], "kappa": config["kappa_star"]},
            n=config["n"],
            contamination=ContaminationSpec(
                "antipodal-vmf", eps, {"kappa": config["spike_kappa"]}
            ),
        )
        data = generate_dataset(scen, rep, rng)
        X = data.X
        folds = kfold_split(X.shape[0], config["n_folds"], rng)
        kernel = RbfKernel(median_bandwidth(X))  # frozen per dataset, shared by folds
        # fit once per (fold, gamma); anchors reuse the fits
        fits = {}
        for k in range(config["n_folds"]):
            train = X[folds != k]
            for gamma in grid:
                fits[(k, gamma)] = vmf_fixed_point(train, gamma).params
        for anchor in config["anchors"]:
            scores = np.zeros((config["n_folds"], len(grid)))
            for k in range(config["n_folds"]):
                held = X[folds == k]
                for gi, gamma in enumerate(grid):
                    scores[k, gi] = anchored_ksd_score(
                        held, fits[(k, gamma)], anchor, kernel=kernel, spherical=True
                    )
            mean = scores.mean(axis=0)
            stderr = scores.std(axis=0, ddof=1) / np.sqrt(config["n_folds"])
            argmin, one_se = one_se_select(grid, mean, stderr)
            rows.append(
                {
                    "epsilon": eps,
                    "replication": rep,
                    "anchor": anchor,
                    "gamma_argmin": argmin,
                    "gamma_one_se": one_se,
                    "cv_at_selected": mean[list(grid).index(argmin)],
                }
            )
    return rows


def _cv_aggregate(rows, config):
    agg = []
    for eps in config["epsilons"]:
        for anchor in config["anchors"]:
            sel = [
                r
                for r in rows
                if float(r["epsilon"]) == eps and float(r["anchor"]) == anchor
            ]
            if not sel:
                continue
            chosen = np.array([float(r["gamma_argmin"]) for r in sel])
            values, counts = np.unique(chosen, return_counts=True)
            modal = float(values[np.argmax(counts)])
            stability = float(counts.max() / counts.sum())
            agg.append(
                {
                    "epsilon": eps,
                    "anchor": anchor,
                    "selected_gamma": modal,
                    "stability": stability,
                    "mean_cv_at_selected": float(
                        np.mean([float(r["cv_at_selected"]) for r in sel])
                    ),
                    "replications": len(sel),
                }
            )
    return agg


def _cv_render(agg, config):
    lines = ["Anchored KSD cross-validation: modal one-SE selection (stability)"]
    lines.append("eps      " + "".join(f"anchor={a:<14g}" for a in config["anchors"]))
    for eps in config["epsilons"]:
        cells = []
        for anchor in config["anchors"]:
            match = [
                r
                for r in agg
                if float(r["epsilon"]) == eps and float(r["anchor"]) == anchor
            ]
            if match:
                r = match[0]
                stab = f"{r['stability']:.2f}" if r["replications"] > 1 else "--"
                cells.append(f"{r['selected_gamma']:.2f} / {stab:<12}")
            else:
                cells.append("--" + " " * 18)
        lines.append(f"{eps:<9g}" + "".join(cells))
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------- nmm table 3


def _nmm_config(desk, overrides):
    cfg = {
        "epsilons": [0.0, 0.03, 0.05, 0.10],
        "gamma_target": 0.3,
        "n": 500,
        "replications": 20 if desk else 50,
        "truth": dict(NMM_TRUTH),
        "t_df": 4.0,
        "t_scale": 4.0,
    }
    cfg.update(overrides)
    return cfg


def _nmm_rep(config, rep, seed):
    rng = as_generator(seed)
    truth = SphericalMixture(**config["truth"])
    rows = []
    for eps in config["epsilons"]:
        scen = ScenarioConfig(
            experiment="nmm-table3",
            family="nmm",
            true_params=config["truth"],
            n=config["n"],
            contamination=ContaminationSpec(
                "student-t", eps, {"df": config["t_df"], "scale": config["t_scale"]}
            ),
        )
        data = generate_dataset(scen, rep, rng)
        fits = {
            "gamma-stein": nmm_fit(
                data.X, truth.n_components, gamma_target=config["gamma_target"], rng=rng
            ),
            "mle-em": nmm_em_mle(data.X, truth.n_components, rng=rng),
        }
        for name, fit in fits.items():
            r_pi, r_mu, r_sig = mixture_rmse(fit.params, truth)
            rows.append(
                {
                    "epsilon": eps,
                    "replication": rep,
                    "estimator": name,
                    "rmse_pi": r_pi,
                    "rmse_mu": r_mu,
                    "rmse_sigma": r_sig,
                }
            )
    return rows


def _nmm_aggregate(rows, config):
    agg = []
    for eps in config["epsilons"]:
        for name in ("gamma-stein", "mle-em"):
            sel = [
                r
                for r in rows
                if float(r["epsilon"]) == eps and r["estimator"] == name
            ]
            if not sel:
                continue
            agg.append(
                {
                    "epsilon": eps,
                    "estimator": name,
                    "rmse_pi": float(np.mean([float(r["rmse_pi"]) for r in sel])),
                    "rmse_mu": float(np.mean([float(r["rmse_mu"]) for r in sel])),
                    "rmse_sigma": float(np.mean([float(r["rmse_sigma"]) for r in sel])),
                    "replications": len(sel),
                }
            )
    return agg


def _nmm_render(agg, config):
    lines = ["Mean RMSE for mixture parameters (per-replication block RMSE averaged)"]
    lines.append(f"{'eps':<7}{'estimator':<14}{'RMSE(pi)':<12}{'RMSE(mu)':<12}{'RMSE(sigma)':<12}")
    for r in agg:
        lines.append(
            f"{float(r['epsilon']):<7g}{r['estimator']:<14}"
            f"{r['rmse_pi']:<12.3f}{r['rmse_mu']:<12.3f}{r['rmse_sigma']:<12.3f}"
        )
    return "\n".join(lines) + "\n"


# --------------------------------------------------------- quartic table 4


def _quartic_config(desk, overrides):
    cfg = {
        "scenarios": ["clean", "outliers"],
        "gammas": [0.3, 0.5],
        "outlier_rate": 0.05,
        "n": 500,
        "replications": 20 if desk else 50,
        "theta_star": list(QUARTIC_THETA_STAR),
    }
    cfg.update(overrides)
    return cfg


def _quartic_rep(config, rep, seed):
    rng = as_generator(seed)
    theta_star = np.asarray(config["theta_star"])
    rows = []
    for scenario in config["scenarios"]:
        rate = config["outlier_rate"] if scenario == "outliers" else 0.0
        scen = ScenarioConfig(
            experiment="quartic-table4",
            family="quartic",
            true_params={
                "theta1": theta_star[0],
                "theta2": theta_star[1],
                "theta3": theta_star[2],
            },
            n=config["n"],
            contamination=ContaminationSpec("quartic-outlier", rate),
        )
        data = generate_dataset(scen, rep, rng)
        fits = {"MLE": quartic_mle(data.X, rng=rng)}
        for gamma in config["gammas"]:
            fits[f"gamma={gamma:g}"] = quartic_gamma_fit(data.X, gamma, rng=rng)
        for name, fit in fits.items():
            theta = fit.params.theta
            rows.append(
                {
                    "scenario": scenario,
                    "replication": rep,
                    "estimator": name,
                    "theta1": theta[0],
                    "theta2": theta[1],
                    "theta3": theta[2],
                    "sq_error": float(np.sum((theta - theta_star) ** 2)),
                }
            )
    return rows


def _quartic_aggregate(rows, config):
    agg = []
    for scenario in config["scenarios"]:
        for name in ["MLE"] + [f"gamma={g:g}" for g in config["gammas"]]:
            sel = [
                r
                for r in rows
                if r["scenario"] == scenario and r["estimator"] == name
            ]
            if not sel:
                continue
            agg.append(
                {
                    "scenario": scenario,
                    "estimator": name,
                    "mean_theta1": float(np.mean([float(r["theta1"]) for r in sel])),
                    "mean_theta2": float(np.mean([float(r["theta2"]) for r in sel])),
                    "mean_theta3": float(np.mean([float(r["theta3"]) for r in sel])),
                    "rmse": float(np.sqrt(np.mean([float(r["sq_error"]) for r in sel]))),
                    "replications": len(sel),
                }
            )
    return agg


def _quartic_render(agg, config):
    lines = ["Quartic potential model: mean estimates and parameter RMSE"]
    lines.append(f"{'scenario':<10}{'estimator':<12}{'theta1':<10}{'theta2':<10}{'theta3':<10}{'RMSE':<10}")
    for r in agg:
        lines.append(
            f"{r['scenario']:<10}{r['estimator']:<12}"
            f"{r['mean_theta1']:<10.4f}{r['mean_theta2']:<10.4f}{r['mean_theta3']:<10.4f}"
            f"{r['rmse']:<10.4f}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------- power table 5


def _power_config(desk, overrides):
    cfg = {
        "deltas": [0.0, 0.2, 0.4, 0.6, 0.8],
        "gammas": [0.0, 0.3, 0.5],
        "epsilon": 0.10,
        "outlier_mean": [5.0, 5.0],
        "n": 200,
        "alpha": 0.05,
        "bootstrap": 200 if desk else 500,
        "replications": 200 if desk else 500,
    }
    cfg.update(overrides)
    return cfg


def _power_null_model(config, delta):
    return SphericalMixture(
        weights=[1.0 - config["epsilon"], config["epsilon"]],
        means=[[delta, delta], list(config["outlier_mean"])],
        precisions=[1.0, 1.0],
    )


def _power_rep(config, rep, seed):
    rng = as_generator(seed)
    target = Gaussian(mean=[0.0, 0.0], precision=np.eye(2))
    gammas = list(config["gammas"])
    n = config["n"]
    B = config["bootstrap"]
    null_sampler = _power_null_model(config, 0.0)
    # one pool of null datasets per replication, shared by every gamma and delta
    null_data = [null_sampler.sample(n, rng) for _ in range(B)]
    rows = []
    for delta in config["deltas"]:
        X = _power_null_model(config, delta).sample(n, rng)
        kernel = RbfKernel(median_bandwidth(X))
        stats = ksd_ustat_multi(X, target, gammas, kernel=kernel)
        boots = np.empty((B, len(gammas)))
        for b in range(B):
            res = ksd_ustat_multi(null_data[b], target, gammas, kernel=kernel)
            boots[b] = [r.statistic for r in res]
        for gi, gamma in enumerate(gammas):
            crit = float(np.quantile(boots[:, gi], 1.0 - config["alpha"]))
            rows.append(
                {
                    "delta": delta,
                    "replication": rep,
                    "gamma": gamma,
                    "statistic": stats[gi].statistic,
                    "critical_value": crit,
                    "reject": bool(stats[gi].statistic > crit),
                }
            )
    return rows


def _power_aggregate(rows, config):
    agg = []
    for delta in config["deltas"]:
        for gamma in config["gammas"]:
            sel = [
                r
                for r in rows
                if float(r["delta"]) == delta and float(r["gamma"]) == gamma
            ]
            if not sel:
                continue
            power = float(np.mean([float(r["reject"]) for r in sel]))
            agg.append(
                {
                    "delta": delta,
                    "gamma": gamma,
                    "power": power,
                    "replications": len(sel),
                }
            )
    return agg


def _power_render(agg, config):
    lines = ["Rejection rate vs mean shift (10% outlier contamination; delta=0 row is type I error)"]
    lines.append("delta   " + "".join(f"gamma={g:<10g}" for g in config["gammas"]))
    for delta in config["deltas"]:
        cells = []
        for gamma in config["gammas"]:
            match = [
                r
                for r in agg
                if float(r["delta"]) == delta and float(r["gamma"]) == gamma
            ]
            cells.append(f"{match[0]['power']:<16.3f}" if match else "--")
        lines.append(f"{delta:<8g}" + "".join(cells))
    return "\n".join(lines) + "\n"


def _power_plots(agg, config, out_dir):
    series = []
    for gamma in config["gammas"]:
        pts = [
            (float(r["delta"]), r["power"])
            for r in agg
            if float(r["gamma"]) == gamma
        ]
        series.append((f"gamma={gamma:g}", [p[0] for p in pts], [p[1] for p in pts]))
    path = os.path.join(out_dir, "power-table5.svg")
    svg_line_plot(path, series, title="Test power vs mean shift", xlabel="delta", ylabel="power")
    return [path]


# ----------------------------------------------------------- svgd table 6


def _svgd_config(desk, overrides):
    cfg = {
        "scenarios": ["clean", "outcome", "covariate", "covariate+outcome"],
        "gammas": [0.0, 0.02, 0.05, 0.08, 0.10],
        "rate": 0.10,
        "n_train": 400,
        "n_test": 1500,
        "particles": 32,
        "iterations": 220,
        "step": 0.05,
        "replications": 10 if desk else 50,
        "alpha_star": list(POISSON_ALPHA_STAR),
    }
    cfg.update(overrides)
    return cfg


def _svgd_rep(config, rep, seed):
    rng = as_generator(seed)
    sampler = make_model("poisson_regression", {"alpha": config["alpha_star"]})
    test = sampler.sample(config["n_test"], rng)
    rows = []
    for scenario in config["scenarios"]:
        cont = None if scenario == "clean" else ContaminationSpec(scenario, config["rate"])
        scen = ScenarioConfig(
            experiment="svgd-table6",
            family="poisson_regression",
            true_params={"alpha": config["alpha_star"]},
            n=config["n_train"],
            contamination=cont,
        )
        train = generate_dataset(scen, rep, rng)
        for gamma in config["gammas"]:
            target = make_poisson_target(train.X, train.y, gamma)
            svgd_cfg = SvgdConfig(
                particles=config["particles"],
                iterations=config["iterations"],
                step=config["step"],
                gamma_target=gamma,
            )
            init = init_particles(target.dim, config["particles"], rng, scale=0.1)
            result = run_svgd(svgd_cfg, target, init)
            design = np.concatenate([np.ones((test.X.shape[0], 1)), test.X], axis=1)
            mu_hat = np.exp(
                np.minimum(design @ result.positions.T, EXP_CLAMP)
            ).mean(axis=1)
            rows.append(
                {
                    "scenario": scenario,
                    "replication": rep,
                    "gamma": gamma,
                    "rmse": predictive_rmse(mu_hat, test.y),
                }
            )
    return rows


def _svgd_aggregate(rows, config):
    agg = []
    for scenario in config["scenarios"]:
        per_gamma = []
        for gamma in config["gammas"]:
            sel = [
                r
                for r in rows
                if r["scenario"] == scenario and float(r["gamma"]) == gamma
            ]
            if not sel:
                continue
            vals = np.array([float(r["rmse"]) for r in sel])
            per_gamma.append(
                {
                    "scenario": scenario,
                    "gamma": gamma,
                    "mean_rmse": float(vals.mean()),
                    "stderr": float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0,
                    "replications": int(vals.size),
                }
            )
        if per_gamma:
            means = [r["mean_rmse"] for r in per_gamma]
            errs = [r["stderr"] for r in per_gamma]
            _, one_se = one_se_select([r["gamma"] for r in per_gamma], means, errs)
            for r in per_gamma:
                r["one_se_selected"] = bool(r["gamma"] == one_se)
            agg.extend(per_gamma)
    return agg


def _svgd_render(agg, config):
    lines = ["Posterior-predictive RMSE (mean +/- s.e.); * marks the one-SE selection"]
    lines.append("gamma   " + "".join(f"{s:<22}" for s in config["scenarios"]))
    for gamma in config["gammas"]:
        cells = []
        for scenario in config["scenarios"]:
            match = [
                r
                for r in agg
                if r["scenario"] == scenario and float(r["gamma"]) == gamma
            ]
            if match:
                r = match[0]
                star = "*" if r["one_se_selected"] else " "
                cells.append(f"{r['mean_rmse']:.2f} +/- {r['stderr']:.2f}{star:<6}")
            else:
                cells.append("--")
        lines.append(f"{gamma:<8g}" + "".join(cells))
    return "\n".join(lines) + "\n"


def _svgd_plots(agg, config, out_dir):
    series = []
    for scenario in config["scenarios"]:
        pts = [
            (float(r["gamma"]), r["mean_rmse"])
            for r in agg
            if r["scenario"] == scenario
        ]
        series.append((scenario, [p[0] for p in pts], [p[1] for p in pts]))
    path = os.path.join(out_dir, "svgd-table6.svg")
    svg_line_plot(path, series, title="Predictive RMSE vs gamma", xlabel="gamma", ylabel="RMSE")
    return [path]


# ----------------------------------------------------- identity verification


def _verify_config(desk, overrides):
    cfg = {"replications": 1}
    cfg.update(overrides)
    return cfg


def _verify_cases():
    g1 = Gaussian([0.0], [[1.0]])
    g1b = Gaussian([1.0], [[4.0]])
    quartic = Quartic(*QUARTIC_THETA_STAR)
    mix1 = SphericalMixture([0.4, 0.6], [[-1.5], [1.5]], [2.0, 1.0])
    g2 = Gaussian([0.0, 0.0], [[1.0, 0.3], [0.3, 1.0]])
    mix2 = SphericalMixture(**NMM_TRUTH)
    lin1, lin2 = linear_field(1.0), linear_field(np.eye(2))
    identity_cases = [
        ("gauss1d,linear,g=0", g1, lin1, 0.0),
        ("gauss1d,sin,g=0.1", g1, sin_field(), 0.1),
        ("gauss1d,cubic,g=1", g1, monomial_field(3), 1.0),
        ("gauss1d_b,sin,g=0.5", g1b, sin_field(), 0.5),
        ("quartic,linear,g=0.5", quartic, lin1, 0.5),
        ("quartic,sin,g=1", quartic, sin_field(), 1.0),
        ("mix1d,linear,g=0.1", mix1, lin1, 0.1),
        ("mix1d,cubic,g=0.5", mix1, monomial_field(3), 0.5),
        ("gauss2d,linear,g=0", g2, lin2, 0.0),
        ("gauss2d,sin,g=0.5", g2, sin_field(), 0.5),
        ("mix2d,rotation,g=0.1", mix2, rotation_field(), 0.1),
        ("mix2d,sin,g=1", mix2, sin_field(), 1.0),
    ]
    mixed_cases = [
        ("gauss/gauss-shift,g=0.5", g1, Gaussian([1.0], [[1.0]]), 0.5, lin1),
        ("gauss/gauss-wide,g=1", g1, Gaussian([0.0], [[0.25]]), 1.0, monomial_field(2)),
        ("gauss/quartic,g=0.3", g1, quartic, 0.3, sin_field()),
        ("quartic/gauss,g=0.5", quartic, Gaussian([0.0], [[0.25]]), 0.5, lin1),
        ("mix1d/gauss,g=0.2", mix1, g1, 0.2, sin_field()),
        ("gauss2d/mix2d,g=0.5", g2, mix2, 0.5, lin2),
    ]
    fv_cases = [
        ("fv gauss,g=0.3", g1, Gaussian([0.3], [[1.0 / 1.44]]), 0.3, sin_field()),
        ("fv gauss,g=0.5", g1, Gaussian([0.5], [[1.0]]), 0.5,
         field_sum(sin_field(), constant_field([0.5]))),
        ("fv gauss KL,g=0", g1, Gaussian([0.0], [[1.0 / 2.25]]), 0.0, sin_field()),
        ("fv quartic,g=0.2", g1, quartic, 0.2, sin_field()),
    ]
    return identity_cases, mixed_cases, fv_cases


def _verify_rep(config, rep, seed):
    rows = []
    identity_cases, mixed_cases, fv_cases = _verify_cases()
    for name, model, fld, gamma in identity_cases:
        grid = grid_for_model(model)
        resid = stein_identity_residual(model, gamma, fld, grid)
        rows.append(
            {"check": f"identity:{name}", "value": resid, "threshold": 1e-6, "passed": bool(resid < 1e-6)}
        )
    for name, p, q, gamma, fld in mixed_cases:
        grid = grid_for_model(p)
        lhs, rhs = mixed_inner_product_check(p, q, gamma, fld, grid)
        err = abs(lhs - rhs) / (1.0 + abs(lhs))
        rows.append(
            {"check": f"mixed:{name}", "value": err, "threshold": 1e-6, "passed": bool(err < 1e-6)}
        )
    for name, p, q, gamma, fld in fv_cases:
        grid = grid_for_model(p, n=4001)
        corrected, _ = correct_field(fld, p, q, gamma, grid)
        fd, op = first_variation_check(p, q, gamma, corrected, 1e-3, grid)
        err = abs(fd - op) / (1.0 + abs(op))
        rows.append(
            {"check": f"first-variation:{name}", "value": err, "threshold": 1e-3, "passed": bool(err < 1e-3)}
        )
    return rows


def _verify_aggregate(rows, config):
    return [
        {
            "checks": len(rows),
            "passed": int(sum(int(r["passed"]) for r in rows)),
            "failed": int(sum(1 - int(r["passed"]) for r in rows)),
        }
    ]


def _verify_render(agg, config):
    r = agg[0]
    return f"identity suite: {r['passed']}/{r['checks']} checks passed\n"


# ------------------------------------------------------------------ registry


_EXPERIMENTS = {
    "vmf-table1": {
        "config": _vmf_config,
        "rep": _vmf_rep,
        "aggregate": _vmf_aggregate,
        "render": _vmf_render,
        "plots": _vmf_plots,
        "rep_header": ["epsilon", "replication", "estimator", "direction_error", "kappa_hat"],
        "agg_header": ["epsilon", "estimator", "trace_rmse_mu", "rmse_kappa", "integrated_rmse", "replications"],
    },
    "cv-table2": {
        "config": _cv_config,
        "rep": _cv_rep,
        "aggregate": _cv_aggregate,
        "render": _cv_render,
        "plots": None,
        "rep_header": ["epsilon", "replication", "anchor", "gamma_argmin", "gamma_one_se", "cv_at_selected"],
        "agg_header": ["epsilon", "anchor", "selected_gamma", "stability", "mean_cv_at_selected", "replications"],
    },
    "nmm-table3": {
        "config": _nmm_config,
        "rep": _nmm_rep,
        "aggregate": _nmm_aggregate,
        "render": _nmm_render,
        "plots": None,
        "rep_header": ["epsilon", "replication", "estimator", "rmse_pi", "rmse_mu", "rmse_sigma"],
        "agg_header": ["epsilon", "estimator", "rmse_pi", "rmse_mu", "rmse_sigma", "replications"],
    },
    "quartic-table4": {
        "config": _quartic_config,
        "rep": _quartic_rep,
        "aggregate": _quartic_aggregate,
        "render": _quartic_render,
        "plots": None,
        "rep_header": ["scenario", "replication", "estimator", "theta1", "theta2", "theta3", "sq_error"],
        "agg_header": ["scenario", "estimator", "mean_theta1", "mean_theta2", "mean_theta3", "rmse", "replications"],
    },
    "power-table5": {
        "config": _power_config,
        "rep": _power_rep,
        "aggregate": _power_aggregate,
        "render": _power_render,
        "plots": _power_plots,
        "rep_header": ["delta", "replication", "gamma", "statistic", "critical_value", "reject"],
        "agg_header": ["delta", "gamma", "power", "replications"],
    },
    "svgd-table6": {
        "config": _svgd_config,
        "rep": _svgd_rep,
        "aggregate": _svgd_aggregate,
        "render": _svgd_render,
        "plots": _svgd_plots,
        "rep_header": ["scenario", "replication", "gamma", "rmse"],
        "agg_header": ["scenario", "gamma", "mean_rmse", "stderr", "replications", "one_se_selected"],
    },
    "verify-identities": {
        "config": _verify_config,
        "rep": _verify_rep,
        "aggregate": _verify_aggregate,
        "render": _verify_render,
        "plots": None,
        "rep_header": ["check", "value", "threshold", "passed"],
        "agg_header": ["checks", "passed", "failed"],
    },
}


def run_experiment(name, overrides=None, desk=True, seed=0, out_dir="runs", threads=1) -> RunResult:
    """Execute one experiment end to end and write its artifacts."""
    if name not in _EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; choose from {EXPERIMENT_NAMES}")
    spec = _EXPERIMENTS[name]
    config = spec["config"](desk, overrides or {})
    out = os.path.join(out_dir, name)
    os.makedirs(out, exist_ok=True)
    t0 = time.time()

    rows, failures = _run_replications(
        spec["rep"], config, config["replications"], seed, threads
    )
    outputs = []
    rep_path = os.path.join(out, "replications.csv")
    _write_csv(rep_path, spec["rep_header"], rows)
    outputs.append(rep_path)

    agg_memory = spec["aggregate"](rows, config)
    agg_reread = spec["aggregate"](_read_csv(rep_path), config)
    if not _rows_equal(spec["agg_header"], agg_memory, agg_reread):
        raise RuntimeError("self-consistency failure: aggregate differs after CSV round-trip")
    agg_path = os.path.join(out, "aggregate.csv")
    _write_csv(agg_path, spec["agg_header"], agg_memory)
    outputs.append(agg_path)

    table_path = os.path.join(out, "table.txt")
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write(spec["render"](agg_memory, config))
    outputs.append(table_path)

    if spec["plots"] is not None and agg_memory:
        outputs.extend(spec["plots"](agg_memory, config, out))

    manifest = RunManifest(
        version=__version__,
        experiment=name,
        config=config,
        seed=seed,
        desk=desk,
        wall_time_s=round(time.time() - t0, 3),
        outputs=outputs + [os.path.join(out, "manifest.json")],
        failures=len(failures),
        replications=config["replications"],
    )
    manifest_path = os.path.join(out, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, default=str)

    exit_code = 0
    if name == "verify-identities":
        if agg_memory[0]["failed"] > 0:
            exit_code = 3
    elif failures and len(failures) > 0.1 * config["replications"]:
        exit_code = 2
    return RunResult(manifest=manifest, rows=rows, aggregate=agg_memory, exit_code=exit_code)

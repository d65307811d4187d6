"""Command-line interface.

Subcommands: fit, gof, svgd, select-gamma, experiment <name>, verify.
Exit codes: 0 success, 1 usage error, 2 experiment failure threshold
exceeded, 3 verification-suite failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from ..ksd import gof_test
from ..models import make_model, unwrap
from ..selection import cv_select
from ..solvers import (
    gaussian_fixed_point,
    nmm_fit,
    quartic_gamma_fit,
    vmf_fixed_point,
)
from ..svgd import SvgdConfig, init_particles, make_poisson_target, run_svgd
from ..validation import as_generator
from .experiments import EXPERIMENT_NAMES, run_experiment
from .scenarios import ScenarioConfig, generate_dataset


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def _common_flags(parser):
    parser.add_argument("--config", type=str, default=None, help="scenario JSON path")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=str, default="runs")
    parser.add_argument("--desk", action="store_true", help="reduced desk-scale run")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--gamma", type=float, default=0.1)
    parser.add_argument("--gamma0", type=float, default=0.1)


def build_parser():
    parser = _Parser(prog="gammastein", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", parents=[], help="fit one model family")
    _common_flags(p_fit)
    p_fit.add_argument("--family", choices=["gaussian", "vmf", "quartic", "nmm"])
    p_fit.add_argument("--data", type=str, default=None, help="CSV of observations")
    p_fit.add_argument("--n-components", type=int, default=2)

    p_gof = sub.add_parser("gof", help="goodness-of-fit test against a model")
    _common_flags(p_gof)
    p_gof.add_argument("--data", type=str, default=None)
    p_gof.add_argument("--bootstrap", type=int, default=500)
    p_gof.add_argument("--alpha", type=float, default=0.05)
    p_gof.add_argument(
        "--calibration", choices=["null-simulation", "multiplier"], default="null-simulation"
    )

    p_svgd = sub.add_parser("svgd", help="run SVGD on a Poisson regression scenario")
    _common_flags(p_svgd)
    p_svgd.add_argument("--particles", type=int, default=32)
    p_svgd.add_argument("--iterations", type=int, default=220)

    p_sel = sub.add_parser("select-gamma", help="anchored cross-validation for gamma")
    _common_flags(p_sel)
    p_sel.add_argument("--family", choices=["gaussian", "vmf", "quartic", "nmm"])
    p_sel.add_argument("--data", type=str, default=None)
    p_sel.add_argument("--grid", type=str, default="0,0.05,0.1,0.2,0.3")
    p_sel.add_argument("--validator", choices=["residual", "ksd"], default="ksd")
    p_sel.add_argument("--folds", type=int, default=5)

    p_exp = sub.add_parser("experiment", help="run a full simulation study")
    _common_flags(p_exp)
    p_exp.add_argument("name", choices=EXPERIMENT_NAMES)

    p_ver = sub.add_parser("verify", help="run the operator identity suite")
    _common_flags(p_ver)
    return parser


def _load_scenario(args):
    if args.config is None:
        return None
    return ScenarioConfig.from_json(args.config)


def _load_data(args, scenario):
    if args.data is not None:
        raw = np.genfromtxt(args.data, delimiter=",", skip_header=0)
        if np.isnan(raw).any():  # header row present
            raw = np.genfromtxt(args.data, delimiter=",", skip_header=1)
        raw = np.asarray(raw, dtype=float)
        return raw[:, None] if raw.ndim == 1 else raw
    if scenario is not None:
        return generate_dataset(scenario, 0, as_generator(args.seed)).X
    raise SystemExit("error: provide --data or --config")


def _emit(obj):
    print(json.dumps(obj, indent=2, default=_jsonable))


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return str(v)


def _cmd_fit(args):
    scenario = _load_scenario(args)
    family = args.family or (scenario.family if scenario else None)
    if family is None:
        print("error: --family or --config required", file=sys.stderr)
        return 1
    X = _load_data(args, scenario)
    rng = as_generator(args.seed)
    if family == "gaussian":
        fit = gaussian_fixed_point(X, args.gamma)
    elif family == "vmf":
        fit = vmf_fixed_point(X, args.gamma)
    elif family == "quartic":
        fit = quartic_gamma_fit(X, args.gamma, rng=rng)
    else:
        fit = nmm_fit(X, args.n_components, gamma_target=args.gamma, rng=rng)
    _emit(
        {
            "family": family,
            "gamma": args.gamma,
            "params": repr(unwrap(fit.params)),
            "iterations": fit.iterations,
            "converged": fit.converged,
            "final_residual": fit.final_residual,
            "flags": fit.flags,
        }
    )
    return 0


def _cmd_gof(args):
    scenario = _load_scenario(args)
    if scenario is None:
        print("error: gof needs --config describing the null model", file=sys.stderr)
        return 1
    model = make_model(scenario.family, scenario.true_params)
    X = _load_data(args, scenario)
    result = gof_test(
        X,
        model,
        args.gamma,
        calibration=args.calibration,
        B=args.bootstrap,
        alpha=args.alpha,
        rng=as_generator(args.seed),
        spherical=scenario.family == "vmf",
    )
    _emit(
        {
            "statistic": result.statistic,
            "critical_value": result.critical_value,
            "p_value": result.p_value,
            "reject": result.reject,
            "bootstrap_replicates": result.bootstrap_replicates,
            "calibration": result.calibration,
        }
    )
    return 0


def _cmd_svgd(args):
    scenario = _load_scenario(args)
    if scenario is None or scenario.family != "poisson_regression":
        print("error: svgd needs --config with family poisson_regression", file=sys.stderr)
        return 1
    rng = as_generator(args.seed)
    data = generate_dataset(scenario, 0, rng)
    target = make_poisson_target(data.X, data.y, args.gamma)
    config = SvgdConfig(
        particles=args.particles, iterations=args.iterations, gamma_target=args.gamma
    )
    result = run_svgd(config, target, init_particles(target.dim, args.particles, rng, scale=0.1))
    _emit(
        {
            "gamma": args.gamma,
            "particles": args.particles,
            "iterations": args.iterations,
            "posterior_mean": result.positions.mean(axis=0),
            "posterior_sd": result.positions.std(axis=0),
        }
    )
    return 0


def _cmd_select(args):
    scenario = _load_scenario(args)
    family = args.family or (scenario.family if scenario else None)
    if family is None:
        print("error: --family or --config required", file=sys.stderr)
        return 1
    X = _load_data(args, scenario)
    grid = [float(g) for g in args.grid.split(",")]
    table, result = cv_select(
        X,
        family,
        grid,
        gamma0=args.gamma0,
        n_folds=args.folds,
        validator=args.validator,
        rng=as_generator(args.seed),
    )
    _emit(
        {
            "gamma_grid": table.gamma_grid,
            "mean_cv": table.mean,
            "stderr": table.stderr,
            "validator": table.validator,
            "gamma_argmin": result.gamma_argmin,
            "gamma_one_se": result.gamma_one_se,
        }
    )
    return 0


def _cmd_experiment(args, name=None):
    overrides = {}
    scenario = _load_scenario(args)
    if scenario is not None and scenario.extras:
        overrides.update(scenario.extras)
    result = run_experiment(
        name or args.name,
        overrides=overrides,
        desk=args.desk,
        seed=args.seed,
        out_dir=args.out,
        threads=args.threads,
    )
    print(f"wrote {len(result.manifest.outputs)} files under {args.out}")
    for row in result.aggregate[:20]:
        print(json.dumps(row, default=_jsonable))
    return result.exit_code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fit":
            code = _cmd_fit(args)
        elif args.command == "gof":
            code = _cmd_gof(args)
        elif args.command == "svgd":
            code = _cmd_svgd(args)
        elif args.command == "select-gamma":
            code = _cmd_select(args)
        elif args.command == "experiment":
            code = _cmd_experiment(args)
        elif args.command == "verify":
            code = _cmd_experiment(args, name="verify-identities")
        else:  # pragma: no cover - argparse enforces choices
            code = 1
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 1
    sys.exit(code)


if __name__ == "__main__":
    main()

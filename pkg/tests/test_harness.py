import json
import subprocess
import sys

import numpy as np
import pytest

from gammastein.harness import (
    ContaminationSpec,
    ScenarioConfig,
    generate_dataset,
    mixture_rmse,
    param_rmse,
    run_experiment,
    trace_rmse,
)
from gammastein.harness.plots import svg_line_plot
from gammastein.models import SphericalMixture
from gammastein.quadrature import grid_1d, grid_2d
from gammastein.validation import as_generator


class TestScenarioConfig:
    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            ScenarioConfig.from_dict(
                {
                    "experiment": "x",
                    "family": "vmf",
                    "true_params": {},
                    "n": 10,
                    "bogus": 1,
                }
            )

    def test_unknown_contamination_keys_rejected(self):
        with pytest.raises(ValueError, match="unknown contamination keys"):
            ScenarioConfig.from_dict(
                {
                    "experiment": "x",
                    "family": "vmf",
                    "true_params": {},
                    "n": 10,
                    "contamination": {"kind": "antipodal-vmf", "rate": 0.1, "oops": 2},
                }
            )

    def test_json_roundtrip(self, tmp_path):
        cfg = ScenarioConfig(
            experiment="vmf-table1",
            family="vmf",
            true_params={"mu": [1.0, 0.0, 0.0], "kappa": 10.0},
            n=50,
            contamination=ContaminationSpec("antipodal-vmf", 0.1, {"kappa": 50.0}),
            seed=3,
        )
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(cfg.to_dict()))
        loaded = ScenarioConfig.from_json(path)
        assert loaded.family == "vmf"
        assert loaded.contamination.rate == 0.1

    def test_bad_contamination_kind(self):
        with pytest.raises(ValueError):
            ContaminationSpec("meteor", 0.1)

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            ContaminationSpec("student-t", 1.0)


class TestGenerateDataset:
    def _scenario(self, eps, n=400):
        return ScenarioConfig(
            experiment="t",
            family="vmf",
            true_params={"mu": [1.0, 0.0, 0.0], "kappa": 10.0},
            n=n,
            contamination=ContaminationSpec("antipodal-vmf", eps, {"kappa": 50.0}),
        )

    def test_clean(self):
        data = generate_dataset(self._scenario(0.0), 0, as_generator(0))
        assert data.n == 400
        assert data.meta["n_contaminated"] == 0

    def test_contaminated_counts(self):
        data = generate_dataset(self._scenario(0.10), 0, as_generator(0))
        assert data.meta["n_contaminated"] == 40
        assert data.meta["n_clean"] == 360
        assert data.meta["contaminated_mask"].sum() == 40
        # the antipodal spike points aim away from mu*
        bad = data.X[data.meta["contaminated_mask"]]
        assert np.all(bad @ np.array([1.0, 0.0, 0.0]) < 0)

    def test_floor_rounding(self):
        data = generate_dataset(self._scenario(0.05, n=99), 0, as_generator(1))
        assert data.meta["n_contaminated"] == 4  # floor(4.95)

    def test_student_t_scenario(self):
        cfg = ScenarioConfig(
            experiment="t",
            family="nmm",
            true_params={
                "weights": [0.5, 0.5],
                "means": [[-2.0, 0.0], [2.0, 0.0]],
                "precisions": [1 / 0.6, 1 / 0.6],
            },
            n=500,
            contamination=ContaminationSpec("student-t", 0.05, {"df": 4}),
        )
        data = generate_dataset(cfg, 0, as_generator(2))
        assert data.meta["n_contaminated"] == 25

    def test_poisson_scenarios(self):
        base = dict(
            experiment="t",
            family="poisson_regression",
            true_params={"alpha": [1.0, 0.3, -0.2]},
            n=200,
        )
        rng = as_generator(3)
        clean = generate_dataset(ScenarioConfig(**base), 0, as_generator(3))
        lever = generate_dataset(
            ScenarioConfig(**base, contamination=ContaminationSpec("covariate", 0.1)),
            0,
            as_generator(3),
        )
        spike = generate_dataset(
            ScenarioConfig(**base, contamination=ContaminationSpec("outcome", 0.1)),
            0,
            as_generator(3),
        )
        both = generate_dataset(
            ScenarioConfig(**base, contamination=ContaminationSpec("covariate+outcome", 0.1)),
            0,
            as_generator(3),
        )
        assert np.array_equal(clean.y, lever.y)  # leverage keeps responses
        assert not np.array_equal(clean.X, lever.X)
        assert np.array_equal(clean.X, spike.X)
        assert spike.y.sum() > clean.y.sum()
        assert not np.array_equal(clean.X, both.X) and both.y.sum() > clean.y.sum()

    def test_deterministic(self):
        a = generate_dataset(self._scenario(0.2), 0, as_generator(7))
        b = generate_dataset(self._scenario(0.2), 0, as_generator(7))
        assert np.array_equal(a.X, b.X)


class TestMetrics:
    def test_trace_rmse_examples(self):
        mu = np.array([1.0, 0.0, 0.0])
        assert trace_rmse([mu], mu) == 0.0
        assert trace_rmse([-mu], mu) == 0.0
        assert trace_rmse([[0.0, 1.0, 0.0]], mu) == pytest.approx(np.sqrt(2.0))

    def test_mixture_rmse_permutation(self):
        truth = SphericalMixture([0.4, 0.6], [[-2.0, 0.0], [2.0, 0.0]], [2.0, 1.0])
        swapped = SphericalMixture([0.6, 0.4], [[2.0, 0.0], [-2.0, 0.0]], [1.0, 2.0])
        assert mixture_rmse(truth, truth) == (0.0, 0.0, 0.0)
        assert mixture_rmse(swapped, truth) == (0.0, 0.0, 0.0)

    def test_mixture_rmse_perturbation_oracle(self):
        truth = SphericalMixture([0.5, 0.5], [[-2.0, 0.0], [2.0, 0.0]], [1.0, 1.0])
        means = np.array([[-2.0, 0.0], [2.1, 0.0]])
        fit = SphericalMixture([0.5, 0.5], means, [1.0, 1.0])
        r_pi, r_mu, r_sig = mixture_rmse(fit, truth)
        assert r_mu == pytest.approx(0.1 / np.sqrt(4.0))
        assert r_pi == 0.0 and r_sig == 0.0

    def test_param_rmse(self):
        assert param_rmse([[1.0, 0.0]], [0.0, 0.0]) == 1.0


class TestQuadratureInvariants:
    def test_weights_sum_to_box_measure(self):
        g = grid_1d(-10, 10, 1001)
        assert g.weights.sum() == pytest.approx(20.0)
        g2 = grid_2d([-3, -2], [3, 2], 41)
        assert g2.weights.sum() == pytest.approx(24.0)

    def test_normalized_density_integrates_to_one(self):
        from gammastein.models import Gaussian
        from gammastein.quadrature import normalized_density

        g = grid_1d(-10, 10, 2001)
        p = normalized_density(Gaussian([0.0], [[1.0]]), g)
        assert g.integrate(p) == pytest.approx(1.0, abs=1e-12)

    def test_invalid_grid(self):
        with pytest.raises(ValueError):
            grid_1d(3.0, 1.0)


class TestPlots:
    def test_svg_written(self, tmp_path):
        path = tmp_path / "plot.svg"
        svg_line_plot(path, [("a", [0, 1, 2], [1.0, 0.5, 0.25])], title="t", xlabel="x", ylabel="y")
        text = path.read_text()
        assert text.startswith("<svg")
        assert "polyline" in text and text.rstrip().endswith("</svg>")


class TestRunner:
    OVR = {"replications": 2, "epsilons": [0.0, 0.1], "gammas": [0.0, 0.1]}

    def test_determinism_and_outputs(self, tmp_path):
        r1 = run_experiment("vmf-table1", overrides=self.OVR, seed=5, out_dir=str(tmp_path / "a"))
        r2 = run_experiment("vmf-table1", overrides=self.OVR, seed=5, out_dir=str(tmp_path / "b"))
        csv1 = (tmp_path / "a" / "vmf-table1" / "replications.csv").read_bytes()
        csv2 = (tmp_path / "b" / "vmf-table1" / "replications.csv").read_bytes()
        assert csv1 == csv2
        agg1 = (tmp_path / "a" / "vmf-table1" / "aggregate.csv").read_bytes()
        agg2 = (tmp_path / "b" / "vmf-table1" / "aggregate.csv").read_bytes()
        assert agg1 == agg2
        assert r1.exit_code == 0
        manifest = json.loads((tmp_path / "a" / "vmf-table1" / "manifest.json").read_text())
        import os

        for out in manifest["outputs"]:
            assert os.path.exists(out)

    def test_threads_match_serial(self, tmp_path):
        r1 = run_experiment("vmf-table1", overrides=self.OVR, seed=9, out_dir=str(tmp_path / "s"))
        r2 = run_experiment(
            "vmf-table1", overrides=self.OVR, seed=9, out_dir=str(tmp_path / "p"), threads=2
        )
        a = (tmp_path / "s" / "vmf-table1" / "replications.csv").read_bytes()
        b = (tmp_path / "p" / "vmf-table1" / "replications.csv").read_bytes()
        assert a == b

    def test_verify_identities_passes(self, tmp_path):
        r = run_experiment("verify-identities", out_dir=str(tmp_path))
        assert r.exit_code == 0
        assert r.aggregate[0]["failed"] == 0

    def test_unknown_experiment(self):
        with pytest.raises(ValueError):
            run_experiment("nope")


class TestCli:
    def _run(self, *args):
        return subprocess.run(
            [sys.executable, "-m", "gammastein.harness.cli", *args],
            capture_output=True,
            text=True,
            timeout=300,
        )

    def test_usage_error_exit_code(self):
        res = self._run("fit", "--family", "martian")
        assert res.returncode == 1

    def test_fit_from_csv(self, tmp_path):
        rng = np.random.default_rng(0)
        path = tmp_path / "data.csv"
        np.savetxt(path, rng.normal(size=(100, 1)), delimiter=",")
        res = self._run("fit", "--family", "gaussian", "--data", str(path), "--gamma", "0.1")
        assert res.returncode == 0
        out = json.loads(res.stdout)
        assert out["converged"] is True

    def test_gof_with_config(self, tmp_path):
        cfg = {
            "experiment": "cli",
            "family": "gaussian",
            "true_params": {"mean": [0.0], "precision": [[1.0]]},
            "n": 80,
        }
        cfg_path = tmp_path / "scenario.json"
        cfg_path.write_text(json.dumps(cfg))
        res = self._run(
            "gof", "--config", str(cfg_path), "--gamma", "0.2", "--bootstrap", "120", "--seed", "2"
        )
        assert res.returncode == 0
        out = json.loads(res.stdout)
        assert {"statistic", "critical_value", "p_value", "reject"} <= set(out)

    def test_select_gamma(self, tmp_path):
        rng = np.random.default_rng(1)
        path = tmp_path / "data.csv"
        np.savetxt(path, rng.normal(size=(120, 1)), delimiter=",")
        res = self._run(
            "select-gamma",
            "--family",
            "gaussian",
            "--data",
            str(path),
            "--grid",
            "0,0.1",
            "--validator",
            "residual",
        )
        assert res.returncode == 0
        out = json.loads(res.stdout)
        assert out["gamma_one_se"] in (0.0, 0.1)

    def test_verify_subcommand(self, tmp_path):
        res = self._run("verify", "--out", str(tmp_path))
        assert res.returncode == 0


class TestMetricReport:
    def test_stderr_invariant(self):
        from gammastein.harness import MetricReport

        values = np.array([1.0, 2.0, 3.0, 4.0])
        rep = MetricReport.from_values("param-rmse", values)
        assert rep.mean == pytest.approx(2.5)
        assert rep.stderr == pytest.approx(values.std(ddof=1) / 2.0)
        assert rep.kind == "param-rmse"


def test_failure_threshold_exit_code(monkeypatch, tmp_path):
    from gammastein.harness import experiments as exp

    orig = exp._EXPERIMENTS["vmf-table1"]["rep"]

    def flaky(config, rep, seed):
        if rep == 0:
            raise RuntimeError("synthetic replication failure")
        return orig(config, rep, seed)

    monkeypatch.setitem(exp._EXPERIMENTS["vmf-table1"], "rep", flaky)
    r = run_experiment(
        "vmf-table1",
        overrides={"replications": 4, "epsilons": [0.0], "gammas": [0.0]},
        seed=1,
        out_dir=str(tmp_path),
    )
    assert r.manifest.failures == 1
    assert r.exit_code == 2  # 25% > 10% threshold
    # surviving replications still aggregate
    assert all(row["replications"] == 3 for row in r.aggregate)

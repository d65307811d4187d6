"""Scenario configuration and contaminated dataset generation.

Config files are JSON documents mirroring ScenarioConfig field names exactly;
unknown keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..models import Dataset, PoissonRegressionSampler, make_model
from ..validation import as_generator


@dataclass
class ContaminationSpec:
    kind: str  # antipodal-vmf | student-t | quartic-outlier | covariate | outcome | mean-shift
    rate: float = 0.0
    params: dict = field(default_factory=dict)

    _KINDS = (
        "antipodal-vmf",
        "student-t",
        "quartic-outlier",
        "covariate",
        "outcome",
        "covariate+outcome",
        "mean-shift",
    )

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown contamination kind {self.kind!r}")
        if not 0.0 <= self.rate < 1.0:
            raise ValueError("contamination rate must lie in [0, 1)")


@dataclass
class ScenarioConfig:
    experiment: str
    family: str
    true_params: dict
    n: int
    contamination: ContaminationSpec | None = None
    gamma_grid: list = field(default_factory=list)
    replications: int = 1
    seed: int = 0
    out_dir: str = "runs"
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        allowed = set(cls.__dataclass_fields__)
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cont = data.get("contamination")
        if cont is not None and not isinstance(cont, ContaminationSpec):
            allowed_c = set(ContaminationSpec.__dataclass_fields__)
            unknown_c = set(cont) - allowed_c
            if unknown_c:
                raise ValueError(f"unknown contamination keys: {sorted(unknown_c)}")
            data["contamination"] = ContaminationSpec(**cont)
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def build_model(config: ScenarioConfig):
    return make_model(config.family, config.true_params)


def generate_dataset(config: ScenarioConfig, replication: int, rng) -> Dataset:
    """Clean + contaminant rows (floor(eps*n) contaminated), shuffled, tagged."""
    rng = as_generator(rng)
    model = build_model(config)
    cont = config.contamination
    rate = cont.rate if cont is not None else 0.0
    n = config.n
    n_cont = int(np.floor(rate * n))
    n_clean = n - n_cont

    if config.family == "poisson_regression":
        return _poisson_dataset(config, model, replication, n, rng)

    clean = model.sample(n_clean, rng)
    if n_cont > 0:
        bad = _draw_contaminant(cont, model, n_cont, config, rng)
        X = np.vstack([clean, bad])
        tags = np.concatenate([np.zeros(n_clean, dtype=int), np.ones(n_cont, dtype=int)])
    else:
        X = clean
        tags = np.zeros(n_clean, dtype=int)
    order = rng.permutation(n)
    meta = {
        "experiment": config.experiment,
        "family": config.family,
        "replication": replication,
        "n_clean": n_clean,
        "n_contaminated": n_cont,
        "contamination": None if cont is None else asdict(cont),
        "contaminated_mask": tags[order].astype(bool),
    }
    return Dataset(X=X[order], meta=meta)


def _draw_contaminant(cont: ContaminationSpec, model, n_cont, config, rng):
    p = cont.params
    if cont.kind == "antipodal-vmf":
        spike_kappa = p.get("kappa", 50.0)
        spike = make_model("vmf", {"mu": -np.asarray(model.mu), "kappa": spike_kappa})
        return spike.sample(n_cont, rng)
    if cont.kind == "student-t":
        df = p.get("df", 4.0)
        scale = p.get("scale", 4.0)
        center = np.asarray(p.get("center", np.zeros(model.dim)), dtype=float)
        return center + scale * rng.standard_t(df, size=(n_cont, model.dim))
    if cont.kind == "quartic-outlier":
        lo, hi = p.get("low", 4.0), p.get("high", 6.0)
        signs = rng.choice([-1.0, 1.0], size=n_cont)
        return (signs * rng.uniform(lo, hi, size=n_cont))[:, None]
    if cont.kind == "mean-shift":
        shift = np.asarray(p.get("shift"), dtype=float)
        cov_model = make_model(
            "gaussian", {"mean": shift, "precision": np.eye(shift.shape[0])}
        )
        return cov_model.sample(n_cont, rng)
    raise ValueError(f"contamination kind {cont.kind!r} does not apply to family samples")


def _poisson_dataset(config: ScenarioConfig, sampler: PoissonRegressionSampler, replication, n, rng):
    """Poisson regression data with optional leverage / count-spike corruption.

    Covariate rows are corrupted after the counts are generated, so leverage
    points carry responses from the uncorrupted covariates.
    """
    data = sampler.sample(n, rng)
    X, y = data.X, data.y.astype(np.int64)
    cont = config.contamination
    meta = {
        "experiment": config.experiment,
        "family": config.family,
        "replication": replication,
        "n_clean": n,
        "n_contaminated": 0,
        "contamination": None if cont is None else asdict(cont),
    }
    if cont is None or cont.rate == 0.0:
        return Dataset(X=X, y=y, meta=meta)

    p = cont.params
    kinds = cont.kind.split("+")
    n_bad = int(np.floor(cont.rate * n))
    for kind in kinds:
        rows = rng.choice(n, size=n_bad, replace=False)
        if kind == "covariate":
            factor = p.get("leverage_factor", 6.0)
            cols = rng.integers(0, X.shape[1], size=n_bad)
            X = X.copy()
            X[rows, cols] *= factor
        elif kind == "outcome":
            spike_scale = p.get("spike_mean_multiplier", 10.0)
            y = y.copy()
            y[rows] = y[rows] + rng.poisson(spike_scale * max(y.mean(), 1.0), size=n_bad)
        else:
            raise ValueError(f"contamination kind {kind!r} does not apply to regression")
    meta["n_contaminated"] = n_bad
    meta["n_clean"] = n - n_bad
    return Dataset(X=X, y=y, meta=meta)

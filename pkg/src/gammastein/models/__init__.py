"""Model families and the registry used by config files and the CLI."""

from __future__ import annotations

import numpy as np

from .base import LogShiftedModel, Model, ModelEval, unwrap
from .data import Dataset
from .gaussian import Gaussian
from .mixture import SphericalMixture
from .poisson import PoissonRegressionSampler
from .quartic import Quartic
from .sphere import (
    FisherBingham,
    VonMisesFisher,
    sample_vmf,
    sphere_grad_log,
    sphere_lap_log,
)

__all__ = [
    "Model",
    "ModelEval",
    "LogShiftedModel",
    "unwrap",
    "Dataset",
    "Gaussian",
    "VonMisesFisher",
    "FisherBingham",
    "SphericalMixture",
    "Quartic",
    "PoissonRegressionSampler",
    "sample_vmf",
    "sphere_grad_log",
    "sphere_lap_log",
    "make_model",
]

_FAMILIES = {
    "gaussian": lambda p: Gaussian(mean=p["mean"], precision=p["precision"]),
    "vmf": lambda p: VonMisesFisher(mu=p["mu"], kappa=p["kappa"]),
    "fisher_bingham": lambda p: FisherBingham(xi=p["xi"], B=p["B"]),
    "nmm": lambda p: SphericalMixture(
        weights=p["weights"], means=p["means"], precisions=p["precisions"]
    ),
    "quartic": lambda p: Quartic(
        theta1=p["theta1"], theta2=p["theta2"], theta3=p["theta3"]
    ),
    "poisson_regression": lambda p: PoissonRegressionSampler(alpha=p["alpha"]),
}


def make_model(family: str, params: dict):
    """Build a model from a family tag and a parameter dict (config files)."""
    try:
        builder = _FAMILIES[family]
    except KeyError:
        raise ValueError(
            f"unknown family {family!r}; expected one of {sorted(_FAMILIES)}"
        ) from None
    return builder({k: (np.asarray(v) if isinstance(v, list) else v) for k, v in params.items()})

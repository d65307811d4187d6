"""Error metrics for the simulation tables."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np


@dataclass
class MetricReport:
    kind: str
    values: np.ndarray
    mean: float
    stderr: float

    @classmethod
    def from_values(cls, kind, values):
        values = np.asarray(values, dtype=float)
        sd = values.std(ddof=1) if values.size > 1 else 0.0
        return cls(kind=kind, values=values, mean=float(values.mean()), stderr=float(sd / np.sqrt(values.size)))


def trace_rmse(mu_hats, mu_star):
    """Axis-aware direction error sqrt(2 E[1 - (mu_hat' mu*)^2])."""
    mu_hats = np.atleast_2d(np.asarray(mu_hats, dtype=float))
    mu_star = np.asarray(mu_star, dtype=float)
    cos2 = (mu_hats @ mu_star) ** 2
    return float(np.sqrt(2.0 * np.mean(1.0 - cos2)))


def rmse(values, truth):
    values = np.asarray(values, dtype=float)
    return float(np.sqrt(np.mean((values - truth) ** 2)))


def integrated_rmse(mu_hats, kappa_hats, mu_star, kappa_star):
    """Sum of the direction trace-RMSE and the concentration RMSE."""
    return trace_rmse(mu_hats, mu_star) + rmse(kappa_hats, kappa_star)


def param_rmse(theta_hats, theta_star):
    """sqrt(E ||theta_hat - theta*||^2) over replications."""
    theta_hats = np.atleast_2d(np.asarray(theta_hats, dtype=float))
    theta_star = np.asarray(theta_star, dtype=float)
    return float(np.sqrt(np.mean(np.sum((theta_hats - theta_star) ** 2, axis=1))))


def mixture_rmse(fit, truth):
    """(rmse_pi, rmse_mu, rmse_sigma) minimized jointly over one label permutation.

    Variances (1/precision) are compared, and each block's RMSE averages over
    its entries, so a +0.1 perturbation of a single mean coordinate gives
    rmse_mu = 0.1 / sqrt(J*d).
    """
    J = fit.n_components
    if truth.n_components != J:
        raise ValueError("component counts disagree")
    best = None
    for perm in permutations(range(J)):
        p = list(perm)
        se_pi = np.mean((fit.weights[p] - truth.weights) ** 2)
        se_mu = np.mean((fit.means[p] - truth.means) ** 2)
        se_sig = np.mean((fit.variances[p] - truth.variances) ** 2)
        total = se_pi + se_mu + se_sig
        if best is None or total < best[0]:
            best = (total, se_pi, se_mu, se_sig)
    return tuple(float(np.sqrt(v)) for v in best[1:])


def predictive_rmse(mu_hat, y_test):
    """Posterior-predictive RMSE on a held-out test set."""
    mu_hat = np.asarray(mu_hat, dtype=float)
    y_test = np.asarray(y_test, dtype=float)
    return float(np.sqrt(np.mean((mu_hat - y_test) ** 2)))

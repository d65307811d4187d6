"""Poisson log-linear regression data generator.

Covariates are standard normal; counts come from Poisson(exp(z)) with
z = alpha_0 + x'alpha_slopes.  The posterior / gamma-loss targets over alpha
live in the svgd module; this class only generates datasets.
"""

from __future__ import annotations

import numpy as np

from ..validation import EXP_CLAMP, as_vector
from .data import Dataset


class PoissonRegressionSampler:
    def __init__(self, alpha):
        self.alpha = as_vector(alpha, "alpha")
        if self.alpha.shape[0] < 2:
            raise ValueError("alpha must include an intercept and at least one slope")

    @property
    def n_covariates(self):
        return self.alpha.shape[0] - 1

    def linear_predictor(self, X):
        return self.alpha[0] + X @ self.alpha[1:]

    def sample(self, n, rng):
        n = int(n)
        X = rng.standard_normal((n, self.n_covariates))
        z = np.clip(self.linear_predictor(X), -EXP_CLAMP, EXP_CLAMP)
        y = rng.poisson(np.exp(z))
        return Dataset(X=X, y=y, meta={"family": "poisson_regression"})

"""Multivariate normal with precision parameterization.

log u(x) = -0.5 (x-mu)' Lambda (x-mu); the Gaussian normalizer is never part
of log_u, matching the unnormalized-model convention used everywhere else.
"""

from __future__ import annotations

import numpy as np

from ..validation import as_vector, check_spd
from .base import Model


class Gaussian(Model):
    def __init__(self, mean, precision):
        self.mean = as_vector(mean, "mean")
        precision = np.atleast_2d(np.asarray(precision, dtype=float))
        self.precision = check_spd(precision, "precision")
        if self.precision.shape[0] != self.mean.shape[0]:
            raise ValueError("mean and precision dimensions disagree")
        self.covariance = np.linalg.inv(self.precision)
        self._chol = np.linalg.cholesky(self.covariance)

    @property
    def dim(self):
        return self.mean.shape[0]

    def _log_u(self, X):
        delta = X - self.mean
        return -0.5 * np.einsum("ni,ij,nj->n", delta, self.precision, delta)

    def _score(self, X):
        return -(X - self.mean) @ self.precision

    def _score_divergence(self, X):
        return np.full(X.shape[0], -np.trace(self.precision))

    def sample(self, n, rng):
        z = rng.standard_normal((int(n), self.dim))
        return self.mean + z @ self._chol.T

    def quadrature_box(self, spread):
        sd = np.sqrt(np.diag(self.covariance))
        return self.mean - spread * sd, self.mean + spread * sd

    def __repr__(self):
        return f"Gaussian(mean={self.mean.tolist()}, precision={self.precision.tolist()})"

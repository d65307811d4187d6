"""Spherical normal mixture: components N(mu_j, I/lambda_j) with simplex weights.

log_u here is the fully normalized mixture log density (the component
normalizers are known), which is what the responsibilities require.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from ..validation import as_array2d, as_vector, check_simplex
from .base import Model


class SphericalMixture(Model):
    def __init__(self, weights, means, precisions):
        self.weights = check_simplex(weights, "weights")
        self.means = as_array2d(means, "means")
        self.precisions = as_vector(precisions, "precisions")
        if np.any(self.precisions <= 0):
            raise ValueError("precisions must be positive")
        J = self.weights.shape[0]
        if self.means.shape[0] != J or self.precisions.shape[0] != J:
            raise ValueError("weights, means, precisions must share the component count")

    @property
    def n_components(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]

    @property
    def variances(self):
        return 1.0 / self.precisions

    def _log_components(self, X):
        # (n, J): log pi_j + log N(x | mu_j, I/lambda_j)
        d = self.dim
        sq = ((X[:, None, :] - self.means[None, :, :]) ** 2).sum(axis=2)  # (n, J)
        return (
            np.log(self.weights)[None, :]
            + 0.5 * d * (np.log(self.precisions) - np.log(2.0 * np.pi))[None, :]
            - 0.5 * self.precisions[None, :] * sq
        )

    def _log_u(self, X):
        return logsumexp(self._log_components(X), axis=1)

    def responsibilities(self, X):
        X = as_array2d(X, "X")
        lc = self._log_components(X)
        return np.exp(lc - logsumexp(lc, axis=1, keepdims=True))

    def component_scores(self, X):
        """(n, J, d) array of s_j(x) = lambda_j (mu_j - x)."""
        X = as_array2d(X, "X")
        return self.precisions[None, :, None] * (self.means[None, :, :] - X[:, None, :])

    def _score(self, X):
        r = self.responsibilities(X)
        return np.einsum("nj,njd->nd", r, self.component_scores(X))

    def _score_divergence(self, X):
        # div s = sum_j r_j (<s_j - s, s_j> - d*lambda_j)
        r = self.responsibilities(X)
        sj = self.component_scores(X)
        s = np.einsum("nj,njd->nd", r, sj)
        inner = np.einsum("njd,njd->nj", sj - s[:, None, :], sj)
        return np.einsum("nj,nj->n", r, inner - self.dim * self.precisions[None, :])

    def sample(self, n, rng):
        n = int(n)
        comp = rng.choice(self.n_components, size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        return self.means[comp] + z / np.sqrt(self.precisions[comp])[:, None]

    def quadrature_box(self, spread):
        sd = 1.0 / np.sqrt(self.precisions)
        lower = (self.means - spread * sd[:, None]).min(axis=0)
        upper = (self.means + spread * sd[:, None]).max(axis=0)
        return lower, upper

    def __repr__(self):
        return (
            f"SphericalMixture(weights={self.weights.tolist()}, "
            f"means={self.means.tolist()}, precisions={self.precisions.tolist()})"
        )

"""1-D quartic potential: log u = t1*x + t2*x^2 + t3*x^4 with t3 < 0."""

from __future__ import annotations

import numpy as np

from .base import Model


class Quartic(Model):
    dim = 1

    def __init__(self, theta1, theta2, theta3):
        if not theta3 < 0:
            raise ValueError("theta3 must be negative for integrability")
        self.theta = np.array([theta1, theta2, theta3], dtype=float)

    def _log_u(self, X):
        x = X[:, 0]
        t1, t2, t3 = self.theta
        return t1 * x + t2 * x**2 + t3 * x**4

    def _score(self, X):
        x = X[:, 0]
        t1, t2, t3 = self.theta
        return (t1 + 2.0 * t2 * x + 4.0 * t3 * x**3)[:, None]

    def _score_divergence(self, X):
        x = X[:, 0]
        _, t2, t3 = self.theta
        return 2.0 * t2 + 12.0 * t3 * x**2

    def support_interval(self, drop=40.0):
        """Symmetric-search interval where log u exceeds (max - drop)."""
        half = _support_halfwidth(self.theta, drop)
        xs = np.linspace(-half, half, 4001)
        lu = self._log_u(xs[:, None])
        keep = lu >= lu.max() - drop
        return float(xs[keep][0]), float(xs[keep][-1])

    def sample(self, n, rng, grid_size=8001, drop=40.0):
        """Inverse-CDF sampling on a fine grid of the normalized density."""
        lo, hi = self.support_interval(drop)
        xs = np.linspace(lo, hi, grid_size)
        lu = self._log_u(xs[:, None])
        dens = np.exp(lu - lu.max())
        h = xs[1] - xs[0]
        cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) * (h / 2.0))])
        cdf /= cdf[-1]
        u = rng.random(int(n))
        return np.interp(u, cdf, xs)[:, None]

    def quadrature_box(self, spread):
        lo, hi = self.support_interval(drop=max(60.0, 4.0 * spread))
        return np.array([lo]), np.array([hi])

    def __repr__(self):
        return f"Quartic(theta={self.theta.tolist()})"


def _support_halfwidth(theta, drop):
    """Grow L until |log u| has dropped by `drop` at +/-L (t3 < 0 guarantees it)."""
    t1, t2, t3 = theta

    def log_u(x):
        return t1 * x + t2 * x**2 + t3 * x**4

    peak = max(log_u(0.0), log_u(1.0), log_u(-1.0))
    L = 1.0
    while min(log_u(L), log_u(-L)) > peak - 2.0 * drop:
        L *= 2.0
        if L > 1e6:
            raise ValueError("could not bracket quartic support; check theta3 < 0")
    return L

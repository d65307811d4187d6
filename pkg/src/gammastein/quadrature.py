"""Trapezoid quadrature grids for the expectation checks.

Uniform 1-D grids and 2-D tensor grids only; every verification target is a
smooth, rapidly decaying density, for which the trapezoid rule converges
spectrally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainCoverageError
from .validation import as_vector


@dataclass(frozen=True)
class QuadratureGrid:
    nodes: np.ndarray    # (N, d)
    weights: np.ndarray  # (N,) strictly positive, summing to the box volume
    lower: np.ndarray    # (d,)
    upper: np.ndarray    # (d,)

    def __post_init__(self):
        if self.nodes.ndim != 2:
            raise ValueError("nodes must be (N, d)")
        if self.dimension not in (1, 2):
            raise ValueError("only 1-D and 2-D grids are supported")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be strictly positive")
        if np.any(self.nodes < self.lower) or np.any(self.nodes > self.upper):
            raise ValueError("nodes must lie inside the domain box")

    @property
    def dimension(self):
        return self.nodes.shape[1]

    @property
    def size(self):
        return self.nodes.shape[0]

    def integrate(self, values):
        values = np.asarray(values, dtype=float)
        return float(self.weights @ values)


def _trapezoid_weights(lo, hi, n):
    if n < 2:
        raise ValueError("need at least 2 nodes")
    h = (hi - lo) / (n - 1)
    w = np.full(n, h)
    w[0] = w[-1] = h / 2.0
    return np.linspace(lo, hi, n), w


def grid_1d(lower, upper, n=4001):
    if upper <= lower:
        raise ValueError("upper must exceed lower")
    x, w = _trapezoid_weights(float(lower), float(upper), int(n))
    return QuadratureGrid(
        nodes=x[:, None], weights=w, lower=np.array([lower], float), upper=np.array([upper], float)
    )


def grid_2d(lower, upper, n=401):
    """Tensor-product trapezoid grid on a 2-D box."""
    lower = as_vector(lower, "lower")
    upper = as_vector(upper, "upper")
    if lower.shape != (2,) or upper.shape != (2,):
        raise ValueError("lower/upper must be length-2 vectors")
    x0, w0 = _trapezoid_weights(lower[0], upper[0], int(n))
    x1, w1 = _trapezoid_weights(lower[1], upper[1], int(n))
    nodes = np.stack(np.meshgrid(x0, x1, indexing="ij"), axis=-1).reshape(-1, 2)
    weights = np.outer(w0, w1).reshape(-1)
    return QuadratureGrid(nodes=nodes, weights=weights, lower=lower, upper=upper)


def grid_for_model(model, n=4001, spread=10.0, n2d=401):
    """A grid wide enough to hold essentially all of the model's mass.

    Uses per-family hints: Gaussian/mixture means +/- spread standard
    deviations, quartic adaptive support.  Falls back to +/- spread around 0.
    """
    hint = getattr(model, "quadrature_box", None)
    if hint is not None:
        lower, upper = hint(spread)
    else:
        d = model.dim
        lower = np.full(d, -spread)
        upper = np.full(d, spread)
    lower = np.atleast_1d(np.asarray(lower, float))
    upper = np.atleast_1d(np.asarray(upper, float))
    if lower.shape[0] == 1:
        return grid_1d(lower[0], upper[0], n)
    if lower.shape[0] == 2:
        return grid_2d(lower, upper, n2d)
    raise ValueError("quadrature is limited to 1-D and 2-D models")


def normalized_density(model, grid: QuadratureGrid, shift=0.0):
    """Density values renormalized to integrate to 1 on the grid."""
    log_u = model.log_u(grid.nodes) + shift
    m = np.max(log_u)
    u = np.exp(log_u - m)
    z = grid.weights @ u
    return u / z


def coverage_check(model, grid: QuadratureGrid, tol=1e-6):
    """Estimate the density mass in the outermost grid cells.

    A cheap proxy for the mass lying outside the box; raises
    DomainCoverageError when it exceeds ``tol``.
    """
    p = normalized_density(model, grid)
    if grid.dimension == 1:
        boundary = np.array([0, grid.size - 1])
    else:
        on_edge = np.any(
            (grid.nodes <= grid.lower + 1e-12) | (grid.nodes >= grid.upper - 1e-12), axis=1
        )
        boundary = np.flatnonzero(on_edge)
    leaked = float(np.sum(p[boundary] * grid.weights[boundary]))
    if leaked > tol:
        raise DomainCoverageError(
            f"grid leaks ~{leaked:.3g} of the density mass (tolerance {tol:g}); enlarge the domain"
        )
    return leaked

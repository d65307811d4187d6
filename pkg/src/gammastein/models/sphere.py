"""von Mises-Fisher and Fisher-Bingham families on the unit sphere.

Euclidean ``score`` returns the ambient gradient (kappa*mu, resp. xi + 2Bx);
the tangential calculus lives in :meth:`tangent_score` / :meth:`sphere_laplacian`
and the module-level ``sphere_grad_log`` / ``sphere_lap_log`` helpers.
"""

from __future__ import annotations

import numpy as np

from ..errors import SamplerStuckError
from ..validation import as_vector, check_symmetric, check_unit_rows
from .base import Model, unwrap

_MAX_PROPOSALS = 10**6


class _SphereModel(Model):
    # the ambient extensions of log_u are smooth, so batch evaluation only
    # guards against grossly off-sphere inputs (finite-difference probes sit
    # within ~1e-5 of the sphere); evaluate() enforces the strict domain
    def _validate_points(self, X):
        check_unit_rows(X, "points", tol=1e-4)
        return X

    def evaluate(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        check_unit_rows(np.atleast_2d(x), "point", tol=1e-8)
        return super().evaluate(x)

    def tangent_score(self, X):
        """Riemannian gradient of log u, tangent to the sphere at each row."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        check_unit_rows(X, "points", tol=1e-8)
        g = self._ambient_score(X)
        return g - X * np.einsum("ni,ni->n", X, g)[:, None]

    def sphere_laplacian(self, X):
        raise NotImplementedError

    def _score(self, X):
        return self._ambient_score(X)

    def _ambient_score(self, X):
        raise NotImplementedError


class VonMisesFisher(_SphereModel):
    def __init__(self, mu, kappa):
        self.mu = as_vector(mu, "mu")
        norm = np.linalg.norm(self.mu)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"mu must be a unit vector (|norm-1|={abs(norm-1):.3g})")
        if kappa < 0:
            raise ValueError("kappa must be nonnegative")
        self.kappa = float(kappa)

    @property
    def dim(self):
        return self.mu.shape[0]

    def _log_u(self, X):
        return self.kappa * (X @ self.mu)

    def _ambient_score(self, X):
        return np.broadcast_to(self.kappa * self.mu, X.shape).copy()

    def sphere_laplacian(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return -(self.dim - 1) * self.kappa * (X @ self.mu)

    def sample(self, n, rng):
        return sample_vmf(self.mu, self.kappa, int(n), rng)

    def __repr__(self):
        return f"VonMisesFisher(mu={self.mu.tolist()}, kappa={self.kappa})"


class FisherBingham(_SphereModel):
    def __init__(self, xi, B):
        self.xi = as_vector(xi, "xi")
        B = check_symmetric(np.atleast_2d(np.asarray(B, dtype=float)), "B")
        if abs(np.trace(B)) > 1e-10:
            raise ValueError(f"B must be traceless (tr={np.trace(B):.3g})")
        if B.shape[0] != self.xi.shape[0]:
            raise ValueError("xi and B dimensions disagree")
        self.B = B

    @property
    def dim(self):
        return self.xi.shape[0]

    def _log_u(self, X):
        return X @ self.xi + np.einsum("ni,ij,nj->n", X, self.B, X)

    def _ambient_score(self, X):
        return self.xi + 2.0 * (X @ self.B)

    def sphere_laplacian(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return -(self.dim - 1) * (X @ self.xi) - 2.0 * self.dim * np.einsum(
            "ni,ij,nj->n", X, self.B, X
        )

    def sample(self, n, rng):
        """Rejection with a vMF envelope.  Smoke quality only."""
        n = int(n)
        d = self.dim
        xi_norm = np.linalg.norm(self.xi)
        lam_max = float(np.linalg.eigvalsh(self.B).max())
        out = np.empty((n, d))
        got = 0
        proposals = 0
        while got < n:
            batch = max(4 * (n - got), 256)
            proposals += batch
            if proposals > _MAX_PROPOSALS:
                raise SamplerStuckError("Fisher-Bingham rejection sampler exceeded 1e6 proposals")
            if xi_norm > 1e-12:
                cand = sample_vmf(self.xi / xi_norm, xi_norm, batch, rng)
            else:
                cand = _uniform_sphere(d, batch, rng)
            log_acc = np.einsum("ni,ij,nj->n", cand, self.B, cand) - lam_max
            keep = np.log(rng.random(batch)) < log_acc
            taken = cand[keep][: n - got]
            out[got : got + taken.shape[0]] = taken
            got += taken.shape[0]
        return out

    def __repr__(self):
        return f"FisherBingham(xi={self.xi.tolist()}, B={self.B.tolist()})"


def sphere_grad_log(model, x):
    """Tangential gradient of log u at unit vector(s) x."""
    m = unwrap(model)
    if not isinstance(m, _SphereModel):
        raise TypeError("sphere_grad_log needs a spherical model")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    out = m.tangent_score(np.atleast_2d(x))
    return out[0] if single else out


def sphere_lap_log(model, x):
    """Spherical Laplacian of log u at unit vector(s) x."""
    m = unwrap(model)
    if not isinstance(m, _SphereModel):
        raise TypeError("sphere_lap_log needs a spherical model")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    check_unit_rows(np.atleast_2d(x), "points", tol=1e-8)
    out = m.sphere_laplacian(np.atleast_2d(x))
    return float(out[0]) if single else out


def _uniform_sphere(d, n, rng):
    z = rng.standard_normal((n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def sample_vmf(mu, kappa, n, rng):
    """Exact vMF sampling via the tangent-normal rejection construction."""
    mu = as_vector(mu, "mu")
    d = mu.shape[0]
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    if kappa == 0.0:
        return _uniform_sphere(d, n, rng)
    if d == 1:
        # S^0 = {-1, +1}
        p = 1.0 / (1.0 + np.exp(-2.0 * kappa))
        signs = np.where(rng.random(n) < p, 1.0, -1.0)
        return (signs * mu[0])[:, None]

    w = _sample_radial(kappa, d, n, rng)
    v = _tangent_directions(mu, n, rng)
    return v * np.sqrt(np.clip(1.0 - w**2, 0.0, None))[:, None] + w[:, None] * mu


def _sample_radial(kappa, d, n, rng):
    """Wood's rejection sampler for the cosine w = mu'x."""
    m = d - 1
    b = m / (np.sqrt(4.0 * kappa**2 + m**2) + 2.0 * kappa)
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + m * np.log(1.0 - x0**2)
    out = np.empty(n)
    got = 0
    proposals = 0
    while got < n:
        batch = max(2 * (n - got), 64)
        proposals += batch
        if proposals > _MAX_PROPOSALS:
            raise SamplerStuckError("vMF radial sampler exceeded 1e6 proposals")
        z = rng.beta(m / 2.0, m / 2.0, size=batch)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.random(batch)
        keep = kappa * w + m * np.log(1.0 - x0 * w) - c >= np.log(u)
        taken = w[keep][: n - got]
        out[got : got + taken.shape[0]] = taken
        got += taken.shape[0]
    return out


def _tangent_directions(mu, n, rng):
    """Uniform unit vectors orthogonal to mu."""
    d = mu.shape[0]
    z = rng.standard_normal((n, d))
    z -= np.outer(z @ mu, mu)
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    # resample any numerically degenerate draws
    bad = norms[:, 0] < 1e-12
    while np.any(bad):
        z2 = rng.standard_normal((int(bad.sum()), d))
        z2 -= np.outer(z2 @ mu, mu)
        z[bad] = z2
        norms = np.linalg.norm(z, axis=1, keepdims=True)
        bad = norms[:, 0] < 1e-12
    return z / norms

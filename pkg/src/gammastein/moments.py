"""Estimating functions built from the weighted Stein identity.

``estimating_values`` returns the per-observation stacked estimating-function
components for a model family; ``estimating_mean`` averages them.  Weights are
the raw u(x)^gamma (normalizer dropped), so values are covariant under a log_u
shift; solvers stabilize internally where only ratios matter.

The ``canonical`` variant applies the operator to the parameter gradient of
the score itself, which is the form whose population Jacobian is symmetric;
the default "displayed" blocks are theta-rescaled versions with the same
roots that the fixed-point solvers use.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .models import (
    FisherBingham,
    Gaussian,
    Quartic,
    SphericalMixture,
    VonMisesFisher,
    unwrap,
)
from .validation import EXP_CLAMP, as_array2d


@dataclass
class MomentVector:
    values: np.ndarray
    labels: list

    def __post_init__(self):
        if self.values.shape[0] != len(self.labels):
            raise ValueError("values and labels disagree")


def gamma_log_weights(model, X, gamma):
    """log of u(x)^gamma, clamped at exp overflow (flagged via warning)."""
    z = gamma * np.atleast_1d(model.log_u(X))
    if np.any(z > EXP_CLAMP):
        warnings.warn("u^gamma overflow; exponent clamped at 700", RuntimeWarning, stacklevel=2)
        z = np.minimum(z, EXP_CLAMP)
    return z


def estimating_values(model, X, gamma, canonical=False, normalize_weights=False):
    """Per-observation estimating-function values, shape (n, k), plus labels.

    normalize_weights rescales the u^gamma weights to mean one: the
    estimating equation's roots are unchanged (a positive constant cancels,
    just like the normalizer), but the rescaled form removes the degenerate
    ||theta|| -> inf direction along which every raw weight vanishes, which
    matters when the mean is minimized in norm rather than solved exactly.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    X = as_array2d(X, "X")
    fam = unwrap(model)
    z = gamma_log_weights(model, X, gamma)
    if normalize_weights:
        w = np.exp(z - np.max(z))
        w = w / w.mean()
    else:
        w = np.exp(z)
    if isinstance(fam, Gaussian):
        return _gaussian_values(fam, X, w, gamma, canonical)
    if isinstance(fam, VonMisesFisher):
        return _vmf_values(fam, X, w, gamma)
    if isinstance(fam, FisherBingham):
        return _fb_values(fam, X, w, gamma)
    if isinstance(fam, SphericalMixture):
        return _nmm_values(fam, X, w, gamma)
    if isinstance(fam, Quartic):
        return _quartic_values(fam, X, w, gamma)
    raise TypeError(f"no estimating function for {type(fam).__name__}")


def estimating_mean(model, X, gamma, canonical=False, normalize_weights=False) -> MomentVector:
    """(1/n) sum_i U_gamma(theta, x_i)."""
    vals, labels = estimating_values(
        model, X, gamma, canonical=canonical, normalize_weights=normalize_weights
    )
    return MomentVector(values=vals.mean(axis=0), labels=labels)


def _gaussian_values(g: Gaussian, X, w, gamma, canonical):
    d = g.dim
    delta = X - g.mean
    lam_delta = delta @ g.precision  # rows Lambda (x - mu)
    if not canonical:
        mu_block = lam_delta
        outer = (gamma + 1.0) * lam_delta[:, :, None] * delta[:, None, :]
        outer -= np.eye(d)[None, :, :]
        vals = np.concatenate([mu_block, outer.reshape(X.shape[0], d * d)], axis=1)
        labels = [f"mean[{k}]" for k in range(d)] + [
            f"precision[{j},{k}]" for j in range(d) for k in range(d)
        ]
        return w[:, None] * vals, labels

    s = -lam_delta
    mu_block = (gamma + 1.0) * (s @ g.precision)
    vech = []
    labels = [f"mean[{k}]" for k in range(d)]
    for j in range(d):
        for k in range(j, d):
            if j == k:
                vech.append(-(gamma + 1.0) * s[:, j] * delta[:, j] - 1.0)
            else:
                vech.append(-(gamma + 1.0) * (s[:, j] * delta[:, k] + s[:, k] * delta[:, j]))
            labels.append(f"precision[{j},{k}]")
    vals = np.concatenate([mu_block, np.stack(vech, axis=1)], axis=1)
    return w[:, None] * vals, labels


def _vmf_values(m: VonMisesFisher, X, w, gamma):
    d = m.dim
    t = X @ m.mu
    mu_block = X - t[:, None] * m.mu[None, :]
    kappa_block = (d - 1.0) * t - m.kappa * (1.0 - t**2)
    vals = np.concatenate([mu_block, kappa_block[:, None]], axis=1)
    labels = [f"mu[{k}]" for k in range(d)] + ["kappa"]
    return w[:, None] * vals, labels


def _fb_values(m: FisherBingham, X, w, gamma):
    d = m.dim
    t1 = X @ m.xi
    BX = X @ m.B
    t2 = np.einsum("ni,ni->n", X, BX)
    quad = t1 + 2.0 * t2
    xi_block = -(d - 1.0) * X + (gamma + 1.0) * (
        m.xi[None, :] + 2.0 * BX - X * quad[:, None]
    )
    labels = [f"xi[{i}]" for i in range(d)]
    b_cols = []
    for j in range(d):
        for k in range(j, d):
            col = (
                2.0 * (1.0 if j == k else 0.0)
                - 2.0 * d * X[:, j] * X[:, k]
                + (gamma + 1.0)
                * (
                    X[:, j] * m.xi[k]
                    + X[:, k] * m.xi[j]
                    + 2.0 * (X[:, j] * BX[:, k] + X[:, k] * BX[:, j])
                    - 2.0 * X[:, j] * X[:, k] * quad
                )
            )
            b_cols.append(col)
            labels.append(f"B[{j},{k}]")
    vals = np.concatenate([xi_block, np.stack(b_cols, axis=1)], axis=1)
    return w[:, None] * vals, labels


def _nmm_values(m: SphericalMixture, X, w, gamma):
    J, d = m.n_components, m.dim
    r = m.responsibilities(X)          # (n, J)
    sj = m.component_scores(X)         # (n, J, d)
    s = np.einsum("nj,njd->nd", r, sj)
    dx = m.means[None, :, :] - X[:, None, :]  # (n, J, d) = mu_j - x

    pi_block = (gamma + 1.0) * np.einsum("nd,njd->nj", s, sj) - (
        d * m.precisions[None, :]
    )
    mean_block = r[:, :, None] * (gamma * s[:, None, :] + sj)  # (n, J, d)
    lam_block = r * (np.einsum("njd,njd->nj", sj + gamma * s[:, None, :], dx) - d)

    vals = np.concatenate(
        [pi_block, mean_block.reshape(X.shape[0], J * d), lam_block], axis=1
    )
    labels = (
        [f"pi[{j}]" for j in range(J)]
        + [f"mean[{j},{k}]" for j in range(J) for k in range(d)]
        + [f"precision[{j}]" for j in range(J)]
    )
    return w[:, None] * vals, labels


def _quartic_values(m: Quartic, X, w, gamma):
    x = X[:, 0]
    s = m.score(X)[:, 0]
    grads = np.stack([np.ones_like(x), 2.0 * x, 4.0 * x**3], axis=1)
    divs = np.stack([np.zeros_like(x), np.full_like(x, 2.0), 12.0 * x**2], axis=1)
    vals = (gamma + 1.0) * s[:, None] * grads + divs
    return w[:, None] * vals, ["theta1", "theta2", "theta3"]

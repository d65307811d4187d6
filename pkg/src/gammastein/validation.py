"""Input validation helpers used across estimators and operators."""

from __future__ import annotations

import numbers

import numpy as np

from .errors import DomainError

# exp() overflows float64 just above 709; clamp at 700 per the design notes
EXP_CLAMP = 700.0


def as_array2d(X, name="X", dtype=float):
    """Coerce to a finite 2-D float array of shape (n, d)."""
    X = np.asarray(X, dtype=dtype)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"{name} must be 1-D or 2-D, got ndim={X.ndim}")
    if X.shape[0] == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


def as_vector(v, name="v", dtype=float):
    v = np.atleast_1d(np.asarray(v, dtype=dtype))
    if v.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def check_unit_rows(X, name="X", tol=1e-8):
    """Check that every row of X has unit Euclidean norm."""
    norms = np.linalg.norm(X, axis=1)
    err = np.max(np.abs(norms - 1.0))
    if err > tol:
        raise DomainError(f"{name} rows must be unit vectors (max |norm-1| = {err:.3g})")
    return X


def check_simplex(w, name="weights", tol=1e-10):
    w = as_vector(w, name)
    if np.any(w < -tol):
        raise ValueError(f"{name} must be nonnegative")
    if abs(w.sum() - 1.0) > tol:
        raise ValueError(f"{name} must sum to 1 (got {w.sum()!r})")
    return w


def check_symmetric(M, name="matrix", tol=1e-12):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if np.max(np.abs(M - M.T)) > tol * (1.0 + np.max(np.abs(M))):
        raise ValueError(f"{name} must be symmetric")
    return M


def check_spd(M, name="matrix", tol=1e-12):
    M = check_symmetric(M, name, tol)
    eigvals = np.linalg.eigvalsh(M)
    if eigvals.min() <= 0:
        raise ValueError(f"{name} must be positive definite (min eig {eigvals.min():.3g})")
    return M


def as_generator(seed=None):
    """Accept None, an int seed, a SeedSequence, or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    if seed is None or isinstance(seed, numbers.Integral):
        return np.random.default_rng(seed)
    raise TypeError(f"cannot build a Generator from {type(seed).__name__}")


def clipped_exp(z):
    """exp with the argument clamped at +/-EXP_CLAMP to avoid overflow."""
    return np.exp(np.clip(z, -EXP_CLAMP, EXP_CLAMP))

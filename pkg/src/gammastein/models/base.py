"""Common model interface: log unnormalized density, x-score, samplers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EvaluationError


@dataclass
class ModelEval:
    log_u: float
    score_x: np.ndarray
    ambient_hessian: np.ndarray | None = None


class Model:
    """Base class; subclasses implement _log_u / _score on (n, d) batches."""

    dim: int

    # subclass hooks -------------------------------------------------
    def _log_u(self, X):  # (n, d) -> (n,)
        raise NotImplementedError

    def _score(self, X):  # (n, d) -> (n, d)
        raise NotImplementedError

    def _score_divergence(self, X):  # (n, d) -> (n,), Laplacian of log u
        raise NotImplementedError(f"{type(self).__name__} has no score divergence")

    def _validate_points(self, X):
        return X

    # public surface -------------------------------------------------
    def _batch(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.shape[1] != self.dim:
            raise ValueError(f"points have dimension {X.shape[1]}, model has {self.dim}")
        self._validate_points(X)
        return X, single

    def log_u(self, X):
        X, single = self._batch(X)
        out = self._log_u(X)
        return float(out[0]) if single else out

    def score(self, X):
        X, single = self._batch(X)
        out = self._score(X)
        return out[0] if single else out

    def score_divergence(self, X):
        X, single = self._batch(X)
        out = self._score_divergence(X)
        return float(out[0]) if single else out

    def evaluate(self, x) -> ModelEval:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lu = self.log_u(x)
        s = self.score(x)
        if not np.isfinite(lu) or not np.all(np.isfinite(s)):
            raise EvaluationError(f"non-finite model evaluation at x={x}", x=x)
        return ModelEval(log_u=lu, score_x=s, ambient_hessian=self._ambient_hessian(x))

    def _ambient_hessian(self, x):
        return None

    def sample(self, n, rng):
        raise NotImplementedError(f"{type(self).__name__} has no sampler")

    def with_log_shift(self, shift):
        """Same model with log_u shifted by a constant (score unchanged)."""
        return LogShiftedModel(self, float(shift))


class LogShiftedModel(Model):
    """Wrapper adding a constant to log_u; everything else delegates."""

    def __init__(self, base: Model, shift: float):
        self._base = base
        self._shift = shift

    @property
    def dim(self):
        return self._base.dim

    @property
    def shift(self):
        return self._shift

    @property
    def base(self):
        return self._base

    def log_u(self, X):
        return self._base.log_u(X) + self._shift

    def score(self, X):
        return self._base.score(X)

    def score_divergence(self, X):
        return self._base.score_divergence(X)

    def sample(self, n, rng):
        return self._base.sample(n, rng)

    def with_log_shift(self, shift):
        return LogShiftedModel(self._base, self._shift + float(shift))

    def __getattr__(self, name):
        return getattr(self._base, name)


def unwrap(model: Model) -> Model:
    """Strip log-shift wrappers to reach the structural model."""
    while isinstance(model, LogShiftedModel):
        model = model.base
    return model

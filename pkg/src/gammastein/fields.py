"""Vector test fields with co-evaluable analytic divergence.

A field is the argument of every Stein-operator application.  Both callables
operate on batches: ``value`` maps an (n, d) array of points to an (n, d)
array, ``divergence`` maps (n, d) to (n,).  The divergence is always supplied
analytically; :func:`field_consistency_check` is a diagnostic, never a
fallback.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .validation import as_array2d


@dataclass(frozen=True)
class TestField:
    value: Callable[[np.ndarray], np.ndarray]
    divergence: Callable[[np.ndarray], np.ndarray]
    name: str = dc_field(default="", compare=False)

    def __repr__(self):
        return f"TestField({self.name or 'anonymous'})"


def linear_field(coeff=1.0):
    """f(x) = A x for a square matrix (or scalar) A; div f = tr(A)."""
    A = np.atleast_2d(np.asarray(coeff, dtype=float))
    tr = float(np.trace(A))
    return TestField(
        value=lambda X: as_array2d(X) @ A.T,
        divergence=lambda X: np.full(as_array2d(X).shape[0], tr),
        name=f"linear({coeff!r})",
    )


def constant_field(c):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return TestField(
        value=lambda X: np.broadcast_to(c, as_array2d(X).shape).copy(),
        divergence=lambda X: np.zeros(as_array2d(X).shape[0]),
        name=f"constant({c.tolist()})",
    )


def sin_field():
    """Componentwise sin(x); div = sum_k cos(x_k)."""
    return TestField(
        value=lambda X: np.sin(as_array2d(X)),
        divergence=lambda X: np.cos(as_array2d(X)).sum(axis=1),
        name="sin",
    )


def monomial_field(power):
    """Componentwise x^p; div = sum_k p x_k^(p-1)."""
    p = int(power)
    return TestField(
        value=lambda X: as_array2d(X) ** p,
        divergence=lambda X: (p * as_array2d(X) ** (p - 1)).sum(axis=1),
        name=f"x^{p}",
    )


def rotation_field():
    """2-D divergence-free field (x2, -x1)."""

    def value(X):
        X = as_array2d(X)
        return np.stack([X[:, 1], -X[:, 0]], axis=1)

    return TestField(
        value=value,
        divergence=lambda X: np.zeros(as_array2d(X).shape[0]),
        name="rotation",
    )


def score_field(model):
    """f = grad log u of a model; div = the model's score divergence."""
    return TestField(
        value=lambda X: model.score(as_array2d(X)),
        divergence=lambda X: model.score_divergence(as_array2d(X)),
        name=f"score({type(model).__name__})",
    )


def field_sum(a: TestField, b: TestField, alpha=1.0, beta=1.0):
    """alpha*a + beta*b with the matching divergence."""
    return TestField(
        value=lambda X: alpha * a.value(X) + beta * b.value(X),
        divergence=lambda X: alpha * a.divergence(X) + beta * b.divergence(X),
        name=f"{alpha}*{a.name}+{beta}*{b.name}",
    )


def field_consistency_check(field: TestField, points, h=1e-5, rtol=1e-4):
    """Compare the declared divergence against central finite differences.

    Returns the worst relative disagreement over the probe points; raises
    ValueError when it exceeds ``rtol``.
    """
    points = as_array2d(points)
    n, d = points.shape
    fd = np.zeros(n)
    for k in range(d):
        step = np.zeros(d)
        step[k] = h
        fd += (field.value(points + step)[:, k] - field.value(points - step)[:, k]) / (2 * h)
    declared = field.divergence(points)
    scale = 1.0 + np.abs(declared)
    worst = float(np.max(np.abs(fd - declared) / scale))
    if worst > rtol:
        raise ValueError(
            f"field {field.name!r}: divergence disagrees with finite differences "
            f"(worst relative error {worst:.3g})"
        )
    return worst

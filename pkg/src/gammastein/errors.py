"""Exception types shared across the toolkit."""


class GammaSteinError(Exception):
    """Base class for all toolkit errors."""


class DomainError(GammaSteinError, ValueError):
    """A point lies outside the model's domain (e.g. off the unit sphere)."""


class DomainCoverageError(GammaSteinError, ValueError):
    """A quadrature grid is too small to hold the density's mass."""


class EvaluationError(GammaSteinError, ArithmeticError):
    """A model or field produced a non-finite value; carries the point."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class SamplerStuckError(GammaSteinError, RuntimeError):
    """A rejection sampler exceeded its proposal budget."""


class FitError(GammaSteinError, RuntimeError):
    """An estimator could not produce a fit."""


class DirectionUndefinedError(FitError):
    """The weighted resultant vector vanished; the mean direction is undefined."""


class DegenerateConcentrationError(FitError):
    """All observations are (numerically) identical; kappa is unbounded."""


class DegenerateWeightError(GammaSteinError, RuntimeError):
    """Every particle has log-density -inf; softmax weights are undefined."""

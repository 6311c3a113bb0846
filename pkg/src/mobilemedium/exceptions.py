"""Exception and warning classes used throughout the package."""


class ParameterError(ValueError):
    """Base class for rejected model parameters."""

    invariant = "parameters"

    def __init__(self, message, invariant=None):
        super().__init__(message)
        if invariant is not None:
            self.invariant = invariant


class DimensionError(ParameterError):
    invariant = "1 <= d <= 8, integer"


class ShapeExponentError(ParameterError):
    invariant = "d/2 < p < d"


class PositivityError(ParameterError):
    invariant = "theta, sigma, t, kappa > 0 and finite"


class DomainError(ValueError):
    """Argument outside the domain of a special function or constant."""


class RegimeError(ValueError):
    """A regime-specific constant was requested outside its regime."""


class ConvergenceError(RuntimeError):
    """A quadrature or iterative procedure failed to reach its tolerance."""


class SingularityError(ArithmeticError):
    """A kernel was evaluated exactly at its pole with capping disabled."""


class DegenerateProfileError(ValueError):
    """A test profile has a vanishing norm where a positive one is needed."""


class FitDegenerateError(ValueError):
    """Not enough (or unusable) data points for a scaling fit."""


class DivergenceWarning(RuntimeWarning):
    """Successive refinements grow without stabilizing."""


class ConvergenceWarning(RuntimeWarning):
    """An optimizer or estimator did not settle within tolerance."""


class OverflowSignal(RuntimeWarning):
    """An exponential moment overflowed and was mapped to +inf."""

"""
Domain Layer — Errors
---------------------
One hierarchy for every failure the integrators, models and diagnostics can
signal. Each concrete error also derives from the closest builtin so callers
that only know Python's vocabulary (ValueError, ArithmeticError, ...) still
catch it.
"""

from __future__ import annotations


class ContactError(Exception):
    """Base class for everything raised by this package."""
    pass


class InvalidStateError(ContactError, ValueError):
    """Raised when a state or path is mis-shaped or holds NaN/Inf."""
    pass


class DimensionMismatchError(ContactError, ValueError):
    """Raised when a stepper, path and state disagree on n or m."""
    pass


class ModelDomainError(ContactError, ArithmeticError):
    """Raised when a model is evaluated at one of its singularities."""
    pass


class DegenerateDenominatorError(ContactError, ZeroDivisionError):
    """
    Raised when 1 - E, 1 + E or the conformal-factor denominator vanishes.
    In practice this means the step size is too large for the dissipation rate.
    """
    pass


class ConvergenceError(ContactError, RuntimeError):
    """Raised when a nonlinear solve does not reach its tolerance."""

    def __init__(self, message: str, iterations: int = 0, residual: float = float("nan")) -> None:
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class IntegrationError(ContactError):
    """
    Wraps the first failing step of a trajectory.
    The original error is chained as __cause__.
    """

    def __init__(self, index: int, cause: Exception) -> None:
        super().__init__(f"step {index} failed: {cause}")
        self.index = index
        self.__cause__ = cause


class ConfigError(ContactError, ValueError):
    """Raised for any invalid experiment configuration or CLI input."""
    pass

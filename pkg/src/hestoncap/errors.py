"""Exception hierarchy shared by all modules."""


class HestonCapError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(HestonCapError, ValueError):
    """Market parameters or constraints violate a standing invariant."""


class CoefficientError(HestonCapError):
    """A Riccati ODE needs r1^2 + 2 r0 r2 > 0 (and r2 != 0) but does not have it."""


class LifetimeExceeded(HestonCapError):
    """A Riccati flow was evaluated at or beyond its blow-up time."""


class NonFiniteState(HestonCapError):
    """Numerical integration produced an overflow, NaN or |y| above the blow-up threshold."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class AssumptionError(HestonCapError):
    """Solver refused to run because the existence/verification assumptions fail."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class BlowupError(HestonCapError):
    """A segment of the piecewise solution explodes before the horizon."""


class DomainError(HestonCapError, ValueError):
    """Argument outside the mathematical domain (e.g. non-positive variance)."""

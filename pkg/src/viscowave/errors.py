"""Exception hierarchy shared by all modules."""


class ViscowaveError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(ViscowaveError, ValueError):
    """Invalid user input: unknown ids, bad parameters, malformed configs."""


class UnknownCoefficientError(ConfigError, KeyError):
    """The coefficient identifier is not in the catalog."""

    def __str__(self):  # KeyError would otherwise quote the message
        return str(self.args[0]) if self.args else ""


class ParameterRangeError(ConfigError):
    """A family parameter lies outside its documented range."""


class RegimeMismatchError(ConfigError):
    """The coefficient does not behave as the requested regime requires."""


class NoCrossingError(ViscowaveError, LookupError):
    """A separating line has no root inside the search window."""


class NumericalError(ViscowaveError, ArithmeticError):
    """A numerical procedure failed (non-convergence, overflow, underflow)."""


class RootFindingError(NumericalError):
    """Bracketed root search did not reach the residual tolerance."""


class StepSizeUnderflowError(NumericalError):
    """Adaptive integration needed a step below ``min_step``.

    Attributes
    ----------
    t_reached : float
        Last time successfully reached by the failing mode.
    r : float or None
        Frequency of the failing mode, when known.
    """

    def __init__(self, message, t_reached=float("nan"), r=None):
        super().__init__(message)
        self.t_reached = t_reached
        self.r = r


class DivergentNormError(NumericalError):
    """A Sobolev norm integral diverges at the origin or at infinity."""


class ZoneViolationError(ViscowaveError, ValueError):
    """A point or interval lies outside the zone an object requires."""


class NegativeDiscriminantError(ZoneViolationError):
    """Eigenvalues requested where g^2 r^4 < 4 r^2 (hyperbolic side)."""


class WeightZeroError(ViscowaveError, ZeroDivisionError):
    """A symbol-class weight vanished at a sample point."""


class FitError(ViscowaveError, ValueError):
    """A rate fit is ill-posed (too few samples, nonpositive values, ...)."""

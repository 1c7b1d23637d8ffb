"""Exception hierarchy.

Numerical failures (leakage, step control) map to CLI exit code 3,
configuration problems to exit code 2.
"""


class RotkickError(Exception):
    """Base class for all package errors."""


class ConfigError(RotkickError, ValueError):
    """Invalid configuration or inconsistent input parameters."""


class NumericalError(RotkickError, ArithmeticError):
    """A propagation or synthesis step could not meet its accuracy contract."""


class BasisLeakageError(NumericalError):
    """Population reached the top of the truncated rotational basis."""


class StepControlError(NumericalError):
    """The adaptive integrator could not meet the requested local error."""


class GridError(NumericalError):
    """A sampling grid is too coarse or too short for the requested signal."""


class ShaperWindowError(ConfigError):
    """Input spectrum extends beyond the shaper's pixel window."""

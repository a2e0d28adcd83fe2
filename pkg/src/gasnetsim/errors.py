"""Exception types shared across the package.

The CLI maps ValidationError (and subclasses) to exit code 2 and
NumericalError to exit code 3.
"""


class ValidationError(ValueError):
    """Bad input data: files, parameters, inconsistent maps."""


class ParseError(ValidationError):
    """Malformed network or scenario document."""


class ConfigurationError(ValidationError):
    """Inconsistent simulation setup (time step, grids, missing controls)."""


class ScheduleError(ValidationError):
    """Boundary schedule does not cover the requested time."""


class DomainError(ValidationError):
    """Argument outside the physical domain of a pressure law."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to converge or produced non-finite values."""

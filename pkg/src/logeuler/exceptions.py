"""Exception hierarchy.

Every error derives from ``ValueError`` or ``RuntimeError`` so callers that
only know the standard library can still catch them.
"""


class LogEulerError(Exception):
    """Base class for all package errors."""


class InvalidFieldError(LogEulerError, ValueError):
    """Field samples are non-finite or have the wrong shape."""


class DomainError(LogEulerError, ValueError):
    """A parameter lies outside the domain of the operation."""


class PreconditionError(LogEulerError, ValueError):
    """An input violates a structural precondition (mean, divergence, ...)."""


class ConfigurationError(LogEulerError, ValueError):
    """A configuration cannot support the requested computation."""


class InsufficientDataError(LogEulerError, ValueError):
    """A trajectory does not carry enough snapshots for the request."""


class StepSizeError(LogEulerError, RuntimeError):
    """A time step violates the CFL bound."""


class InstabilityError(LogEulerError, RuntimeError):
    """A simulation blew up."""


class InconclusiveError(LogEulerError, RuntimeError):
    """Monte Carlo noise is too large to support a conclusion."""

"""Exception hierarchy shared by every module in the package.

All errors derive from :class:`FactorError` so callers can catch one type.
The CLI maps subclasses onto its exit-code contract: parameter and
dimension problems are usage errors (2), unreadable input is a data
error (3), and rank or definiteness failures are numerical errors (4).
"""

__all__ = [
    "FactorError",
    "ParameterError",
    "DimensionError",
    "DataError",
    "DegeneracyError",
    "DefinitenessError",
]


class FactorError(ValueError):
    """Base class for all errors raised by this package."""


class ParameterError(FactorError):
    """A scalar argument or configuration field is out of range."""


class DimensionError(FactorError):
    """Array shapes are inconsistent or a rank exceeds what the data allow."""


class DataError(FactorError):
    """Input data are unreadable or contain non-finite values."""


class DegeneracyError(FactorError):
    """A matrix that must be full rank or well conditioned is not."""


class DefinitenessError(FactorError):
    """A matrix that must be positive definite is not."""

"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors exit 1, data/validation
errors exit 2, numerical failures exit 3.
"""


class StructcorrError(Exception):
    """Base class for all package errors."""


class DataValidationError(StructcorrError):
    """Malformed or inconsistent input (files, specs, parameter values)."""


class NumericalError(StructcorrError):
    """A numerical operation failed (singular system, empty support, ...)."""


class NotPositiveDefiniteError(NumericalError):
    """A matrix required to be positive definite is not."""

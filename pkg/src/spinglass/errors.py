"""Exception hierarchy shared across the package."""


class SpinGlassError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SpinGlassError, ValueError):
    """Malformed argument: bad dimension, NaN input, domain violation."""


class ResourceLimitError(SpinGlassError):
    """Request exceeds a hard size cap (enumeration, dense tensor storage)."""


class NumericError(SpinGlassError):
    """Numerical failure: lost positive-definiteness, unstable quadrature."""


class DivergedError(SpinGlassError):
    """An iteration produced non-finite values."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step

"""Error and warning types.  Each error class carries the CLI exit code it maps to."""


class EllipticalRadonError(Exception):
    exit_code = 1


class ValidationError(EllipticalRadonError, ValueError):
    """Bad arguments, mismatched metadata, failed coverage checks."""

    exit_code = 2


class NumericalToleranceError(EllipticalRadonError, ArithmeticError):
    """A declared accuracy check (Richardson, self-test threshold) failed."""

    exit_code = 3


class DataIOError(EllipticalRadonError, OSError):
    exit_code = 4


class TruncationWarning(UserWarning):
    """Data or quadrature truncation is likely to bias a result."""

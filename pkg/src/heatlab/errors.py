"""Exception types shared across the package.

The CLI maps these to exit codes: configuration problems exit with 2,
numerical/accuracy failures with 3.
"""


class HeatlabError(Exception):
    """Base class for all package-specific errors."""


class ArgumentError(HeatlabError, ValueError):
    """An argument is outside its documented range (t <= 0, q out of range, ...)."""


class DomainError(HeatlabError, ValueError):
    """A point or coefficient left the declared analyticity/chart domain."""


class InvariantViolation(HeatlabError, ValueError):
    """A structural invariant failed (non-Hermitian input, bad index order, ...)."""


class ResourceLimitError(HeatlabError, RuntimeError):
    """A configured resource cap (grid site count, dense-eigen size) was exceeded."""


class NumericalError(HeatlabError, RuntimeError):
    """An iterative method failed to converge.

    Carries the final residual so callers can report it.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class AccuracyError(HeatlabError, RuntimeError):
    """A requested accuracy cannot be met; carries the achievable bound."""

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class ConfigError(HeatlabError, ValueError):
    """A configuration file failed validation."""

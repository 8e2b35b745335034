"""Exception and warning types raised across the package."""


class GmmStreamError(Exception):
    """Base class for all package errors."""


class DegenerateCovariance(GmmStreamError, ArithmeticError):
    """A covariance matrix is not positive definite (even after regularization)."""


class DimensionError(GmmStreamError, ValueError):
    """Inputs disagree on dimensionality or length."""


class InvalidData(GmmStreamError, ValueError):
    """Input data contains non-finite or otherwise unusable values."""


class ParseError(GmmStreamError, ValueError):
    """A dataset file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatError(GmmStreamError, ValueError):
    """A sketch file is corrupt or written by an incompatible version."""


class ConfigError(GmmStreamError, ValueError):
    """A configuration value or mixture specification is invalid."""


class StateError(GmmStreamError, RuntimeError):
    """An operation was requested on a sketch in the wrong state."""


class NoOpWarning(UserWarning):
    """The requested operation had nothing to do."""

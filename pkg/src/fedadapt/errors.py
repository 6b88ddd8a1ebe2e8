"""Exception types raised by this package.

The CLI maps them onto exit codes: configuration problems exit 1, data and
file-format problems exit 2, numeric failures exit 3.
"""


class FedAdaptError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(FedAdaptError, ValueError):
    """Operands have inconsistent dimensions."""


class ParameterError(FedAdaptError, ValueError):
    """An argument is outside its legal range."""


class ConfigError(FedAdaptError, ValueError):
    """A run configuration cannot be executed as given."""


class FormatError(FedAdaptError, ValueError):
    """A binary file does not follow its declared layout."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class DataValidationError(FedAdaptError, ValueError):
    """A file parsed cleanly but its contents violate an invariant."""


class NumericError(FedAdaptError, ArithmeticError):
    """A computation produced or was handed non-finite values."""

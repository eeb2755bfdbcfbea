"""Exception hierarchy shared by every turnstate module."""
from typing import Optional


class TurnStateError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(TurnStateError, ValueError):
    """Tensor shapes do not agree."""


class ConfigError(TurnStateError, ValueError):
    """A configuration value is invalid or inconsistent."""


class ContractError(TurnStateError):
    """An API was called outside of its contract."""


class DataError(TurnStateError, ValueError):
    """Input data is inconsistent with the model or vocabulary."""


class ValidationError(DataError):
    """A dialogue record carries an unknown or misplaced label."""


class ParseError(DataError):
    """A dataset or config file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)


class TrainingError(TurnStateError, RuntimeError):
    """Training cannot continue (non-finite loss or gradient)."""

# app/core/exceptions.py
"""Error hierarchy shared by the library and the command-line surface."""
from typing import Optional

from app.utils import constants


class HeatcastError(Exception):
    """Base class for every error raised by the forecasting pipeline."""
    exit_code = constants.EXIT_DATA_ERROR


class DimensionError(HeatcastError):
    """Array or tensor shapes do not fit together."""


class ContractError(HeatcastError):
    """A documented pre-condition of an operation was violated."""


class DomainError(HeatcastError):
    """A value lies outside the mathematical domain of an operation."""


class DataFormatError(HeatcastError):
    """A CSV, checkpoint or config file could not be parsed."""

    def __init__(self, message: str, path: Optional[str] = None, row: Optional[int] = None):
        self.path = path
        self.row = row
        location = ""
        if path:
            location = f" [{path}" + (f", row {row}" if row is not None else "") + "]"
        super().__init__(f"{message}{location}")


class TrainingError(HeatcastError):
    """Training diverged (non-finite loss)."""

    def __init__(self, message: str, last_finite_epoch: int):
        self.last_finite_epoch = last_finite_epoch
        super().__init__(f"{message} (last finite epoch: {last_finite_epoch})")


class UsageError(HeatcastError):
    """The command line could not be interpreted."""
    exit_code = constants.EXIT_USAGE_ERROR

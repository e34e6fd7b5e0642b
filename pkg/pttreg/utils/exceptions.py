"""Exception hierarchy and helpers."""

from __future__ import annotations

import asyncio

from pttreg.constants import EXIT_CONFIG_ERROR, EXIT_DATA_ERROR, EXIT_NUMERICAL_ERROR


class PttregError(RuntimeError):
    """Base class for every error raised by pttreg."""

    exit_code: int = EXIT_NUMERICAL_ERROR


class ConfigError(PttregError):
    """Raised when a configuration value violates its invariants."""

    exit_code = EXIT_CONFIG_ERROR


class DataError(PttregError):
    """Raised for unreadable or inconsistent input data."""

    exit_code = EXIT_DATA_ERROR


class CloudParseError(DataError):
    """Raised when a point cloud file cannot be parsed."""

    def __init__(self, path: str, line: int, reason: str) -> None:
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line


class EmptyCloudError(DataError):
    """Raised when a point cloud has no points."""


class WeightsFormatError(DataError):
    """Raised when a weight file is malformed or does not match the config."""

    def __init__(self, message: str, tensor: str | None = None) -> None:
        super().__init__(f"{message} (tensor: {tensor})" if tensor else message)
        self.tensor = tensor


class NumericalError(PttregError):
    """Base class for numerical failures."""

    exit_code = EXIT_NUMERICAL_ERROR


class ContractViolationError(NumericalError):
    """Raised when an operation's preconditions (shapes, indices) are violated."""


class EmptyAttentionRowError(NumericalError):
    """Raised when a query row has no valid key to attend to."""

    def __init__(self, row: int) -> None:
        super().__init__(f"attention row {row} has no valid entries")
        self.row = row


class ConvergenceError(NumericalError):
    """Raised when an iterative solver exhausts its iteration cap."""


class DegenerateGeometryError(NumericalError):
    """Raised when weighted correspondences cannot determine a rotation."""


class StageError(PttregError):
    """Wraps an error with the pipeline stage in which it occurred."""

    def __init__(self, stage: str, cause: PttregError) -> None:
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = cause.exit_code


def reraise_if_fatal(exc: BaseException) -> None:
    """Reraise cancellation and non-Exception BaseExceptions.

    When using `asyncio.gather(..., return_exceptions=True)`, failures are
    returned as values. Call sites should log any relevant context when
    handling non-fatal exceptions; this helper does not log.
    """

    if isinstance(exc, asyncio.CancelledError):
        raise exc

    if not isinstance(exc, Exception):
        raise exc

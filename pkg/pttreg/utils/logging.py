"""structlog configuration for JSON logging."""

from __future__ import annotations

import logging
import sys

import structlog

from pttreg.utils.exceptions import ConfigError


def resolve_level(level: str, *, verbose: bool = False) -> int:
    """Numeric level for a level name; ``verbose`` forces DEBUG.

    Raises:
        ConfigError: If the name is not a standard logging level.
    """
    if verbose:
        return logging.DEBUG
    numeric = logging.getLevelNamesMapping().get(level.upper())
    if numeric is None:
        raise ConfigError(f"unknown log level {level!r}")
    return numeric


def configure_logging(level: str = "INFO", *, verbose: bool = False, command: str | None = None) -> None:
    """Configure structlog for structured JSON output on stderr.

    Reports go to stdout, so log lines never mix with machine-readable output.

    Args:
        level: Log level name, normally ``RunConfig.log_level``.
        verbose: Force DEBUG regardless of ``level`` (the CLI ``-v`` flag).
        command: CLI command name bound to every event of this run.
    """
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.JSONRenderer(sort_keys=True),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(resolve_level(level, verbose=verbose)),
        context_class=dict,
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
    structlog.contextvars.clear_contextvars()
    if command is not None:
        structlog.contextvars.bind_contextvars(command=command)

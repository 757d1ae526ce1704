#!/usr/bin/env python3
"""
Structured JSON logging for the non-convergence analyzer.

Every record is a single JSON object on stderr carrying ``timestamp``,
``level``, ``logger`` and ``message`` plus any bound context. stdout stays
reserved for command results.
"""

import logging
import sys
import uuid
from typing import Any, Dict, Optional

import structlog

_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
    "CRITICAL": logging.CRITICAL,
}


def get_log_level(name: str) -> int:
    """Map a level name (any case) to its numeric value; unknown names give INFO."""
    return _LEVELS.get(str(name).upper(), logging.INFO)


def create_correlation_id() -> str:
    """Create a fresh correlation id (UUID4 string)."""
    return str(uuid.uuid4())


class StderrLoggerFactory:
    """``PrintLogger`` on whatever ``sys.stderr`` is when a record is emitted."""

    def __call__(self, *args: Any) -> structlog.PrintLogger:
        return structlog.PrintLogger(file=sys.stderr)


def _uppercase_level(logger: Any, method_name: str, event_dict: dict) -> dict:
    event_dict["level"] = method_name.upper()
    return event_dict


structlog.configure(
    processors=[
        _uppercase_level,
        structlog.processors.TimeStamper(fmt="iso", utc=True, key="timestamp"),
        structlog.processors.EventRenamer("message"),
        structlog.processors.JSONRenderer(sort_keys=True, default=str),
    ],
    wrapper_class=structlog.make_filtering_bound_logger(logging.INFO),
    logger_factory=StderrLoggerFactory(),
    cache_logger_on_first_use=False,
)


def configure_logging(level: str = "INFO") -> None:
    """Set the global logging threshold."""
    structlog.configure(wrapper_class=structlog.make_filtering_bound_logger(get_log_level(level)))


class StructuredLogger:
    """
    Named logger with bound context.

    Each call goes through a fresh lazy structlog proxy, so the current
    threshold and stderr apply even to loggers created at import time.
    """

    def __init__(self, name: str, context: Optional[Dict[str, Any]] = None):
        self.name = name
        self._context = dict(context or {})

    def _proxy(self) -> Any:
        return structlog.get_logger().bind(logger=self.name, **self._context)

    def with_correlation_id(self, correlation_id: str) -> "StructuredLogger":
        return self.bind(correlation_id=correlation_id)

    def bind(self, **context: Any) -> "StructuredLogger":
        return StructuredLogger(self.name, {**self._context, **context})

    def debug(self, message: str, **context: Any) -> None:
        self._proxy().debug(message, **context)

    def info(self, message: str, **context: Any) -> None:
        self._proxy().info(message, **context)

    def warning(self, message: str, **context: Any) -> None:
        self._proxy().warning(message, **context)

    def error(self, message: str, **context: Any) -> None:
        self._proxy().error(message, **context)

    def critical(self, message: str, **context: Any) -> None:
        self._proxy().critical(message, **context)


def get_logger(name: str) -> StructuredLogger:
    """Return a JSON logger tagged with ``name``."""
    return StructuredLogger(name)

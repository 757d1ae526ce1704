#!/usr/bin/env python3
"""
Error types and the standard error envelope.

Library code raises ``AnalyzerError`` subclasses; the CLI converts them into
the JSON error envelope and a process exit code.
"""

import traceback
import uuid
from datetime import datetime, timezone
from typing import Any, Dict, Optional

from structured_logging import create_correlation_id, get_logger

logger = get_logger("error_handler")

EXIT_CODES = {
    "validation_error": 2,
    "config_error": 2,
    "unsupported": 2,
    "precondition_inapplicable": 3,
    "invariant_violation": 4,
    "internal_error": 4,
}


class AnalyzerError(Exception):
    """Base class for all errors raised by the analyzer."""

    code = "internal_error"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class ValidationError(AnalyzerError):
    """Invalid input to an operation (bad dimensions, bad parameters)."""

    code = "validation_error"


class ConfigError(AnalyzerError):
    """Config file missing, unparsable or structurally invalid."""

    code = "config_error"


class UnsupportedError(AnalyzerError):
    """A valid request the implementation does not support."""

    code = "unsupported"


class BoundInapplicableError(AnalyzerError):
    """The hypotheses of a probability bound do not hold."""

    code = "precondition_inapplicable"


class InvariantViolationError(AnalyzerError):
    """An internal invariant failed. Never expected."""

    code = "invariant_violation"


def get_exit_code_for_error(error_code: str) -> int:
    """Exit code for an error code; unknown codes map to 4."""
    return EXIT_CODES.get(error_code, 4)


def create_error_response(
    error_code: str,
    error_message: str,
    details: Optional[Dict[str, Any]] = None,
    request_id: Optional[str] = None,
) -> Dict[str, Any]:
    """Build the standard error envelope."""
    error: Dict[str, Any] = {
        "code": error_code,
        "message": error_message,
        "error_id": str(uuid.uuid4()),
    }
    if details is not None:
        error["details"] = details
    response: Dict[str, Any] = {
        "status": "error",
        "error": error,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "correlation_id": create_correlation_id(),
    }
    if request_id is not None:
        response["request_id"] = request_id
    return response


def handle_exception(exception: BaseException, context: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Log an exception and convert it into an error envelope."""
    context = context or {}
    if isinstance(exception, AnalyzerError):
        details = dict(exception.details)
        details.setdefault("type", type(exception).__name__)
        response = create_error_response(exception.code, exception.message, details)
        logger.warning("operation failed", code=exception.code, error=exception.message, **context)
    else:
        error_id = str(uuid.uuid4())
        details = {
            "type": type(exception).__name__,
            "error_id": error_id,
            "context": context,
        }
        response = create_error_response("internal_error", f"Unexpected error: {exception}", details)
        logger.error(
            "unexpected exception",
            error=str(exception),
            error_id=error_id,
            traceback=traceback.format_exc(),
            **context,
        )
    return response

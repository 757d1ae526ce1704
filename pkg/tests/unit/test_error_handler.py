#!/usr/bin/env python3
"""
Unit tests for error_handler module.

This module tests the error types, the error envelope and exit-code mapping.
"""

import json

import pytest

from error_handler import (
    AnalyzerError,
    BoundInapplicableError,
    ConfigError,
    InvariantViolationError,
    UnsupportedError,
    ValidationError,
    create_error_response,
    get_exit_code_for_error,
    handle_exception,
)
from structured_logging import configure_logging


class TestErrorResponse:
    """Tests for the error envelope"""

    def test_create_error_response_basic(self):
        """Test creating a basic error response"""
        response = create_error_response("validation_error", "Invalid window")

        assert response["status"] == "error"
        assert response["error"]["code"] == "validation_error"
        assert response["error"]["message"] == "Invalid window"
        assert "timestamp" in response
        assert "correlation_id" in response
        assert "error_id" in response["error"]
        assert "details" not in response["error"]
        assert "request_id" not in response

    def test_create_error_response_with_details(self):
        """Test creating an error response with details"""
        details = {"field": "bound.window", "window": [-1.0, 2.0]}

        response = create_error_response("validation_error", "Invalid window", details)

        assert response["error"]["details"] == details

    def test_create_error_response_with_request_id(self):
        """Test creating an error response with a request ID"""
        response = create_error_response("internal_error", "boom", request_id="run-123")

        assert response["request_id"] == "run-123"

    def test_error_ids_are_unique(self):
        """Two envelopes never share an error id"""
        first = create_error_response("internal_error", "a")
        second = create_error_response("internal_error", "a")

        assert first["error"]["error_id"] != second["error"]["error_id"]


class TestExitCodes:
    """Tests for the error code to exit code mapping"""

    @pytest.mark.parametrize(
        "code,expected",
        [
            ("validation_error", 2),
            ("config_error", 2),
            ("unsupported", 2),
            ("precondition_inapplicable", 3),
            ("invariant_violation", 4),
            ("internal_error", 4),
            ("something_else", 4),
        ],
    )
    def test_exit_code_mapping(self, code, expected):
        """Every error code maps to its documented exit code"""
        assert get_exit_code_for_error(code) == expected

    @pytest.mark.parametrize(
        "exc_type,code",
        [
            (ValidationError, "validation_error"),
            (ConfigError, "config_error"),
            (UnsupportedError, "unsupported"),
            (BoundInapplicableError, "precondition_inapplicable"),
            (InvariantViolationError, "invariant_violation"),
        ],
    )
    def test_error_classes_carry_codes(self, exc_type, code):
        """Each error class has its own code and keeps message and details"""
        exc = exc_type("message", {"field": "x"})

        assert isinstance(exc, AnalyzerError)
        assert exc.code == code
        assert exc.message == "message"
        assert exc.details == {"field": "x"}
        assert str(exc) == "message"


class TestHandleException:
    """Tests for converting exceptions into envelopes"""

    def test_handle_analyzer_error(self):
        """Analyzer errors keep their code, message and details"""
        exc = BoundInapplicableError("p must lie in (0, 1)", {"field": "sweep.p", "p": 1.5})

        response = handle_exception(exc, {"command": "bound"})

        assert response["error"]["code"] == "precondition_inapplicable"
        assert response["error"]["message"] == "p must lie in (0, 1)"
        assert response["error"]["details"]["field"] == "sweep.p"
        assert response["error"]["details"]["type"] == "BoundInapplicableError"

    def test_handle_unexpected_exception(self):
        """Anything else becomes an internal error with the context attached"""
        try:
            raise ZeroDivisionError("division by zero")
        except ZeroDivisionError as exc:
            response = handle_exception(exc, {"command": "train"})

        assert response["error"]["code"] == "internal_error"
        assert "division by zero" in response["error"]["message"]
        assert response["error"]["details"]["type"] == "ZeroDivisionError"
        assert response["error"]["details"]["context"] == {"command": "train"}

    def test_unexpected_exception_is_logged_with_traceback(self, capsys):
        """Internal errors are logged on stderr as JSON with a traceback"""
        configure_logging("INFO")
        try:
            raise RuntimeError("kaput")
        except RuntimeError as exc:
            handle_exception(exc)

        lines = [json.loads(line) for line in capsys.readouterr().err.splitlines() if line.strip()]
        record = next(r for r in lines if r["message"] == "unexpected exception")
        assert record["level"] == "ERROR"
        assert "RuntimeError" in record["traceback"]

    def test_envelope_is_json_serializable(self):
        """Envelopes go to stderr as JSON"""
        response = handle_exception(ValidationError("bad", {"field": "architecture"}))

        assert json.loads(json.dumps(response)) == response

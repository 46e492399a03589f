"""
Test cases for the logging system.

Tests JSON logging format, correlation IDs, request/response logging,
and detection, sweep and timing records.
"""

import json
import logging
import sys
import uuid
from io import StringIO
from unittest.mock import MagicMock, patch

import pytest

from app.core.logging import (
    LOGGER_NAME,
    JSONFormatter,
    app_logger,
    correlation_id_context,
    get_correlation_id,
    log_detection_operation,
    log_performance_metric,
    log_sweep_cell,
    log_validation_result,
    new_correlation_id,
    setup_logging
)
from app.services.detection_service import DetectionService


def make_record(**extra) -> logging.LogRecord:
    record = logging.LogRecord(
        name="test.logger",
        level=logging.INFO,
        pathname="test.py",
        lineno=42,
        msg="Test message",
        args=(),
        exc_info=None
    )
    record.funcName = "test_function"
    record.module = "test_module"
    for key, value in extra.items():
        setattr(record, key, value)
    return record


@pytest.fixture
def captured_logger():
    """Route app_logger records into a buffer for the duration of a test."""
    buffer = StringIO()
    handler = logging.StreamHandler(buffer)
    handler.setFormatter(JSONFormatter())
    app_logger.addHandler(handler)
    try:
        yield buffer
    finally:
        app_logger.removeHandler(handler)


@pytest.mark.unit
class TestJSONFormatter:
    """JSON log formatting."""

    def test_json_formatter(self):
        """Test JSON formatter produces valid JSON output."""
        log_data = json.loads(JSONFormatter().format(make_record()))
        assert log_data["level"] == "INFO"
        assert log_data["logger"] == "test.logger"
        assert log_data["message"] == "Test message"
        assert log_data["module"] == "test_module"
        assert log_data["function"] == "test_function"
        assert log_data["line"] == 42
        assert log_data["timestamp"].endswith("Z")

    def test_json_formatter_with_correlation_id(self):
        """Test JSON formatter includes correlation ID when available."""
        correlation_id = str(uuid.uuid4())
        token = correlation_id_context.set(correlation_id)
        try:
            log_data = json.loads(JSONFormatter().format(make_record()))
        finally:
            correlation_id_context.reset(token)
        assert log_data["correlation_id"] == correlation_id

    def test_json_formatter_with_extra_fields(self):
        """Test JSON formatter includes extra fields."""
        record = make_record(extra_fields={"image_id": "img000", "blocks": 14641})
        log_data = json.loads(JSONFormatter().format(record))
        assert log_data["image_id"] == "img000"
        assert log_data["blocks"] == 14641

    def test_json_formatter_with_exception(self):
        try:
            raise ValueError("bad block")
        except ValueError:
            record = make_record(exc_info=sys.exc_info())
        log_data = json.loads(JSONFormatter().format(record))
        assert "ValueError: bad block" in log_data["exception"]


@pytest.mark.unit
class TestSetupLogging:
    """Logger configuration."""

    def test_setup_logging(self):
        """Test logging setup configuration."""
        logger = setup_logging()
        assert logger.name == LOGGER_NAME
        assert len(logger.handlers) == 1
        assert isinstance(logger.handlers[0].formatter, JSONFormatter)
        assert logger.propagate is False

    def test_setup_logging_stderr(self, capsys):
        """Command-line logging goes to stderr, not stdout."""
        logger = setup_logging(use_stderr=True)
        try:
            logger.warning("to stderr")
            captured = capsys.readouterr()
            assert captured.out == ""
            assert json.loads(captured.err.strip().splitlines()[-1])["message"] == "to stderr"
        finally:
            setup_logging()

    def test_correlation_ids(self):
        token = correlation_id_context.set(None)
        try:
            assert get_correlation_id() is None
            cid = new_correlation_id()
            assert get_correlation_id() == cid
            uuid.UUID(cid)
        finally:
            correlation_id_context.reset(token)


@pytest.mark.unit
class TestOperationRecords:
    """Structured operation records."""

    def test_log_detection_operation(self):
        with patch("logging.getLogger") as mock_get_logger:
            mock_logger = MagicMock()
            mock_get_logger.return_value = mock_logger

            log_detection_operation(
                method="dct",
                image_id="forged.png",
                dims=(128, 128),
                blocks=14641,
                accepted_classes=1,
                detected_pixels=3200,
                timing_ms={"features": 12.3456, "total": 20.0},
                correlation_id="cid-1",
                effective_th2=100
            )

            mock_get_logger.assert_called_with(f"{LOGGER_NAME}.detection")
            args, kwargs = mock_logger.info.call_args
            data = kwargs["extra"]["extra_fields"]
            assert "forged.png" in args[0]
            assert data["type"] == "detection"
            assert data["correlation_id"] == "cid-1"
            assert data["rows"] == 128
            assert data["timing_ms"]["features"] == 12.346
            assert data["effective_th2"] == 100

    def test_log_sweep_cell_failure_is_warning(self):
        with patch("logging.getLogger") as mock_get_logger:
            mock_logger = MagicMock()
            mock_get_logger.return_value = mock_logger

            log_sweep_cell("img003", "qf=50", 0.0, 0.0, failed=True, error_message="BlockTooLarge: b=40")

            mock_get_logger.assert_called_with(f"{LOGGER_NAME}.sweep")
            level, message = mock_logger.log.call_args[0]
            data = mock_logger.log.call_args[1]["extra"]["extra_fields"]
            assert level == logging.WARNING
            assert "failed" in message
            assert data["grid_point"] == "qf=50"
            assert data["error_message"] == "BlockTooLarge: b=40"

    def test_log_sweep_cell_success_is_debug(self):
        with patch("logging.getLogger") as mock_get_logger:
            mock_logger = MagicMock()
            mock_get_logger.return_value = mock_logger

            log_sweep_cell("img000", "identity", 0.99, 0.01)

            assert mock_logger.log.call_args[0][0] == logging.DEBUG
            assert "error_message" not in mock_logger.log.call_args[1]["extra"]["extra_fields"]

    def test_log_validation_result_failure(self):
        with patch("logging.getLogger") as mock_get_logger:
            mock_logger = MagicMock()
            mock_get_logger.return_value = mock_logger

            log_validation_result("broken.png", False, error_message="bad header", validation_time_ms=1.234)

            mock_get_logger.assert_called_with(f"{LOGGER_NAME}.validation")
            level, message = mock_logger.log.call_args[0]
            data = mock_logger.log.call_args[1]["extra"]["extra_fields"]
            assert level == logging.WARNING
            assert message == "Validation Failed - broken.png"
            assert data["validation_time_ms"] == 1.23

    def test_log_performance_metric(self):
        with patch("logging.getLogger") as mock_get_logger:
            mock_logger = MagicMock()
            mock_get_logger.return_value = mock_logger

            log_performance_metric("sweep_duration", 812.5, context={"cells": 4})

            mock_get_logger.assert_called_with(f"{LOGGER_NAME}.performance")
            data = mock_logger.info.call_args[1]["extra"]["extra_fields"]
            assert data["metric_name"] == "sweep_duration"
            assert data["unit"] == "ms"
            assert data["context"] == {"cells": 4}

    def test_detection_service_logs_each_run(self, noise_forgery):
        """DetectionService.run emits one detection record."""
        with patch("app.services.detection_service.log_detection_operation") as mock_log:
            DetectionService.run(noise_forgery[0], image_id="forged")
        kwargs = mock_log.call_args[1]
        assert kwargs["image_id"] == "forged"
        assert kwargs["blocks"] == 14641
        assert kwargs["method"] == "dct"


@pytest.mark.unit
class TestRequestLoggingMiddleware:
    """Test suite for request logging middleware."""

    def test_health_endpoint_logging(self, client, captured_logger):
        """Test that health endpoint requests are logged properly."""
        response = client.get("/health")

        assert "x-correlation-id" in response.headers
        assert "x-processing-time-ms" in response.headers

        records = [json.loads(line) for line in captured_logger.getvalue().splitlines() if line]
        request_log = next(r for r in records if r.get("type") == "request")
        response_log = next(r for r in records if r.get("type") == "response")
        assert request_log["method"] == "GET"
        assert request_log["path"] == "/health"
        assert response_log["status_code"] == 200
        assert response_log["correlation_id"] == request_log["correlation_id"]
        assert response.headers["x-correlation-id"] == request_log["correlation_id"]

    def test_error_response_logged_as_warning(self, client, captured_logger):
        client.post("/api/v1/forensics/detect", files={"file": ("notes.txt", b"hello", "text/plain")})
        records = [json.loads(line) for line in captured_logger.getvalue().splitlines() if line]
        response_log = next(r for r in records if r.get("type") == "response")
        assert response_log["status_code"] == 400
        assert response_log["level"] == "WARNING"

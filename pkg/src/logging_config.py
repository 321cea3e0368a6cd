"""
Structured logging for borelsum.

Engine modules log through ``get_logger("borelsum.<module>")`` and attach
numerical context as keyword fields (``logger.debug_with("picard", iterations=12,
update=3e-13)``). Fields may hold complex numbers, numpy scalars or Fractions;
both formatters render them. Handlers write to stderr, since stdout carries the
JSON reports.
"""
import json
import logging
import os
import sys
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from fractions import Fraction
from typing import Any, Dict, Iterator, Optional

import numpy as np

NAMESPACE = "borelsum"


def _field_value(value: Any) -> Any:
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.ndarray):
        return _field_value(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (list, tuple)):
        return [_field_value(v) for v in value]
    return value


def _fields(record: logging.LogRecord) -> Dict[str, Any]:
    return {k: _field_value(v) for k, v in getattr(record, "extra_fields", {}).items()}


class JSONFormatter(logging.Formatter):
    """One JSON object per record: ts, level, logger, msg, the fields, exception."""

    def format(self, record: logging.LogRecord) -> str:
        entry = {
            "ts": datetime.fromtimestamp(record.created, timezone.utc).isoformat().replace("+00:00", "Z"),
            "level": record.levelname.lower(),
            "logger": record.name,
            "msg": record.getMessage(),
            **_fields(record),
        }
        if record.exc_info:
            entry["exception"] = self.formatException(record.exc_info)
        return json.dumps(entry, default=str)


class FieldFormatter(logging.Formatter):
    """Plain text with the structured fields appended as key=value."""

    def __init__(self):
        super().__init__("[%(asctime)s] %(levelname)s %(name)s: %(message)s", datefmt="%H:%M:%S")

    def format(self, record: logging.LogRecord) -> str:
        text = super().format(record)
        fields = _fields(record)
        if fields:
            text += " " + " ".join(f"{k}={_short(v)}" for k, v in fields.items())
        return text


def _short(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, list) and len(value) == 2 and all(isinstance(v, float) for v in value):
        return f"{value[0]:.6g}{value[1]:+.6g}i"
    return str(value)


class StructuredLogger(logging.Logger):
    def _log_fields(self, level: int, msg: str, fields: Dict[str, Any]):
        if self.isEnabledFor(level):
            self._log(level, msg, (), extra={"extra_fields": fields})

    def debug_with(self, msg: str, **fields):
        self._log_fields(logging.DEBUG, msg, fields)

    def info_with(self, msg: str, **fields):
        self._log_fields(logging.INFO, msg, fields)

    def warning_with(self, msg: str, **fields):
        self._log_fields(logging.WARNING, msg, fields)

    def error_with(self, msg: str, **fields):
        self._log_fields(logging.ERROR, msg, fields)


logging.setLoggerClass(StructuredLogger)


@contextmanager
def timed(logger: StructuredLogger, msg: str, **fields) -> Iterator[Dict[str, Any]]:
    """Log ``msg`` at DEBUG on exit with ``elapsed`` seconds; the yielded dict adds fields."""
    started = time.perf_counter()
    extra: Dict[str, Any] = dict(fields)
    try:
        yield extra
    finally:
        extra["elapsed"] = round(time.perf_counter() - started, 4)
        logger.debug_with(msg, **extra)


def setup_logging(
    level: Optional[str] = None,
    json_format: Optional[bool] = None,
    log_file: Optional[str] = None,
) -> logging.Logger:
    """Configure the ``borelsum`` logger tree; arguments fall back to BORELSUM_LOG_*."""
    level = level or os.environ.get("BORELSUM_LOG_LEVEL", "WARNING")
    if json_format is None:
        json_format = os.environ.get("BORELSUM_LOG_JSON", "0") == "1"
    log_file = log_file or os.environ.get("BORELSUM_LOG_FILE")

    formatter = JSONFormatter() if json_format else FieldFormatter()
    handlers: list = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))

    root = logging.getLogger(NAMESPACE)
    root.setLevel(getattr(logging, level.upper(), logging.WARNING))
    root.propagate = False
    for old in root.handlers[:]:
        root.removeHandler(old)
        old.close()
    for handler in handlers:
        handler.setFormatter(formatter)
        root.addHandler(handler)

    # scipy IntegrationWarning, numpy RuntimeWarning
    logging.captureWarnings(True)
    py_warnings = logging.getLogger("py.warnings")
    py_warnings.handlers = list(handlers)
    py_warnings.propagate = False
    return root


def get_logger(name: str) -> StructuredLogger:
    logger = logging.getLogger(name)
    if not isinstance(logger, StructuredLogger):
        logger.__class__ = StructuredLogger
    return logger

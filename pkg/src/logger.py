"""Structured JSON logging on stderr; stdout is reserved for reports."""

from __future__ import annotations

import json
import logging
import sys
from datetime import UTC, datetime

import numpy as np


def _jsonable(value: object) -> object:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return str(value)


class JsonFormatter(logging.Formatter):
    """Render standard log records as one JSON object per line."""

    _standard_fields = frozenset(logging.LogRecord("", 0, "", 0, "", (), None).__dict__.keys())

    def format(self, record: logging.LogRecord) -> str:
        payload: dict[str, object] = {
            "timestamp": datetime.now(UTC).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        payload.update(
            {
                key: value
                for key, value in record.__dict__.items()
                if key not in self._standard_fields and key not in {"message", "asctime"}
            }
        )
        if record.exc_info:
            payload["exception"] = self.formatException(record.exc_info)
        return json.dumps(payload, ensure_ascii=False, default=_jsonable)


def create_logger(name: str = "umbilic-mirror", level: int | str = logging.INFO) -> logging.Logger:
    """Create an idempotently configured pipeline logger.

    Child loggers (``umbilic-mirror.strata``) inherit the handler through
    propagation to this root.
    """

    pipeline_logger = logging.getLogger(name)
    pipeline_logger.setLevel(level)
    pipeline_logger.propagate = False
    if not pipeline_logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(JsonFormatter())
        pipeline_logger.addHandler(handler)
    return pipeline_logger


def get_logger(component: str) -> logging.Logger:
    """Return the module logger for one pipeline component."""

    return logging.getLogger(f"umbilic-mirror.{component}")

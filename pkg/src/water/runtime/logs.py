"""Log plumbing.  Every line is ``ts level instance_id message``."""

from __future__ import annotations

import logging
import sys
import time

LEVEL_NAMES = ("error", "warn", "info", "debug")
_PY_LEVELS = (logging.ERROR, logging.WARNING, logging.INFO, logging.DEBUG)

logger = logging.getLogger("water")


def level_from_name(name) -> int:
    """Map ``error|warn|info|debug`` (or a digit 0-3) to a level number."""
    name = str(name).strip().lower()
    if name.isdigit() and int(name) < 4:
        return int(name)
    if name == "warning":
        name = "warn"
    try:
        return LEVEL_NAMES.index(name)
    except ValueError:
        raise ValueError(f"unknown log level {name!r}") from None


def to_python_level(level: int) -> int:
    return _PY_LEVELS[max(0, min(3, level))]


def format_line(level: int, instance_id: str, message: str, ts: float | None = None) -> str:
    ts = time.time() if ts is None else ts
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(ts)) + f".{int(ts % 1 * 1e6):06d}Z"
    return f"{stamp} {LEVEL_NAMES[level]} {instance_id} {message}"


def default_sink(level: int, instance_id: str, message: str):
    logger.log(to_python_level(level), message, extra={"instance": instance_id})


class LineFormatter(logging.Formatter):
    def format(self, record):
        level = next((i for i, lv in enumerate(_PY_LEVELS) if record.levelno >= lv), 3)
        line = format_line(level, getattr(record, "instance", "-"), record.getMessage(),
                           record.created)
        if record.exc_info:
            line += "\n" + self.formatException(record.exc_info)
        return line


def configure(level: int, stream=None):
    """Send ``water`` log records to ``stream`` in line format."""
    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(LineFormatter())
    logger.handlers[:] = [handler]
    logger.setLevel(to_python_level(level))
    logger.propagate = False
    return handler

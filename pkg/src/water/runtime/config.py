from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

from ..abi import ErrorCode, WaterError

DEFAULT_SHUTTLE_BYTES = 4096


def inject_remote(blob: bytes, addr: str) -> bytes:
    """Append a ``remote=`` line; the guest takes the last occurrence."""
    blob = bytes(blob)
    if blob and not blob.endswith(b"\n"):
        blob += b"\n"
    return blob + b"remote=" + addr.encode("utf-8") + b"\n"


@dataclass(frozen=True)
class InstanceConfig:
    """Per-instance settings.  ``config_blob`` is opaque to the host."""

    config_blob: bytes = b""
    shuttle_buffer_bytes: int = DEFAULT_SHUTTLE_BYTES
    log_level: int = 2
    # called as sink(level, instance_id, message); None means the "water" logger
    log_sink: Optional[Callable[[int, str, str], None]] = None
    dial_timeout: float = 10.0

    def __post_init__(self):
        if not isinstance(self.config_blob, (bytes, bytearray)):
            raise WaterError(ErrorCode.INVALID_ARGUMENT, "config_blob must be bytes")
        if int(self.shuttle_buffer_bytes) < 1:
            raise WaterError(ErrorCode.INVALID_ARGUMENT, "shuttle_buffer_bytes must be >= 1")
        if not 0 <= int(self.log_level) <= 3:
            raise WaterError(ErrorCode.INVALID_ARGUMENT, "log_level must be 0..3")

    def with_remote(self, addr: str) -> "InstanceConfig":
        return replace(self, config_blob=inject_remote(self.config_blob, addr))

"""Sandboxed WebAssembly transport modules behind ordinary dial/listen/relay objects."""

from .abi import ABI_VERSION, Cancelled, ErrorCode, RoleCapabilities, WaterError, errno_to_message
from .runtime import (Dialer, InstanceConfig, Listener, Relay, VirtualConn, WATMImage, load_image,
                      load_image_file)

__all__ = [
    "ABI_VERSION", "Cancelled", "Dialer", "ErrorCode", "InstanceConfig", "Listener", "Relay",
    "RoleCapabilities", "VirtualConn", "WATMImage", "WaterError", "errno_to_message",
    "load_image", "load_image_file",
]

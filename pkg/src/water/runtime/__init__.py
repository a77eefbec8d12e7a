"""The host runtime: load WATM images and run them as dialers, listeners and relays."""

from .config import InstanceConfig, inject_remote
from .conn import VirtualConn
from .handles import Dialer, Listener, Relay
from .image import WATMImage, digest_of, load_image, load_image_file, parse_manifest
from .instance import GuestInstance, GuestTrap

__all__ = [
    "Dialer", "GuestInstance", "GuestTrap", "InstanceConfig", "Listener", "Relay",
    "VirtualConn", "WATMImage", "digest_of", "inject_remote", "load_image", "load_image_file",
    "parse_manifest",
]

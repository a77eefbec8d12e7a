"""Host-side plumbing behind the guest imports."""

from .descriptors import DescriptorTable, WasiError, Waker
from .host import (host_dial_impl, host_log_impl, make_internal_channel, parse_addr,
                   pull_config_impl, push_accepted)
from .pipe import PipeClosed, PipeEnd, PipePair

__all__ = [
    "DescriptorTable", "PipeClosed", "PipeEnd", "PipePair", "WasiError", "Waker",
    "host_dial_impl", "host_log_impl", "make_internal_channel", "parse_addr",
    "pull_config_impl", "push_accepted",
]

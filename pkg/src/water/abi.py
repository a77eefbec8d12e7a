"""The host/guest contract for WATM binaries, ABI version 1.

Everything the runtime and the guest SDK must agree on lives here: export
names and signatures, the ``water_host`` import table, error codes and the
capability rule that maps an export set to the roles a module can play.
See docs/abi.md for the prose version.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

ABI_VERSION = 1
ABI_MARKER = "_water_v1"
HOST_NAMESPACE = "water_host"
WASI_NAMESPACE = "wasi_snapshot_preview1"

I32 = "i32"
I64 = "i64"


class ErrorCode(enum.IntEnum):
    OK = 0
    GENERAL = -1
    INVALID_ARGUMENT = -2
    INVALID_CONFIG = -3
    INVALID_FD = -4
    INVALID_FUNCTION = -5
    DOUBLE_INIT = -6
    FAILED_IO = -7
    NOT_INITIALIZED = -8
    NETWORK_UNREACHABLE = -9


_MESSAGES = {
    ErrorCode.OK: "ok",
    ErrorCode.GENERAL: "general error",
    ErrorCode.INVALID_ARGUMENT: "invalid argument",
    ErrorCode.INVALID_CONFIG: "invalid config",
    ErrorCode.INVALID_FD: "invalid file descriptor",
    ErrorCode.INVALID_FUNCTION: "invalid function",
    ErrorCode.DOUBLE_INIT: "double init",
    ErrorCode.FAILED_IO: "failed io",
    ErrorCode.NOT_INITIALIZED: "not initialized",
    ErrorCode.NETWORK_UNREACHABLE: "network unreachable",
}


def errno_to_message(code: int) -> str:
    try:
        return _MESSAGES[ErrorCode(code)]
    except ValueError:
        return f"unknown error {code}"


class WaterError(Exception):
    """A failure carrying an ABI error code."""

    def __init__(self, code, detail=""):
        self.code = int(code)
        self.detail = detail
        msg = errno_to_message(self.code)
        super().__init__(f"{msg}: {detail}" if detail else msg)

    @property
    def name(self):
        try:
            return ErrorCode(self.code).name
        except ValueError:
            return str(self.code)


class Cancelled(WaterError):
    def __init__(self, detail="cancelled"):
        super().__init__(ErrorCode.FAILED_IO, detail)


@dataclass(frozen=True)
class FuncSig:
    params: tuple
    results: tuple

    def __str__(self):
        return f"({', '.join(self.params)}) -> ({', '.join(self.results)})"


@dataclass(frozen=True)
class ExportSig:
    """One entry of a module's export section."""

    name: str
    kind: str  # "func" | "memory" | "table" | "global"
    sig: FuncSig | None = None


def _sig(params, results=(I32,)):
    return FuncSig(tuple(params), tuple(results))


# Guest exports.  `_water_cancel_with` is optional; the rest gate roles.
GUEST_EXPORTS = {
    "_water_v1": _sig([]),
    "_water_init": _sig([]),
    "_water_dial": _sig([I32]),
    "_water_accept": _sig([I32]),
    "_water_associate": _sig([]),
    "_water_cancel_with": _sig([I32]),
    "_water_worker": _sig([]),
}

HOST_IMPORTS = {
    "host_dial": _sig([I32, I32]),
    "host_defer": _sig([]),
    "pull_config": _sig([]),
    "host_log": _sig([I32, I32, I32]),
}

LOG_ERROR, LOG_WARN, LOG_INFO, LOG_DEBUG = 0, 1, 2, 3


@dataclass(frozen=True)
class RoleCapabilities:
    can_dial: bool = False
    can_listen: bool = False
    can_relay: bool = False

    def __bool__(self):
        return self.can_dial or self.can_listen or self.can_relay

    def roles(self):
        return [r for r, ok in (("dial", self.can_dial), ("listen", self.can_listen),
                                ("relay", self.can_relay)) if ok]


def validate_exports(exports: Iterable) -> RoleCapabilities:
    """Derive role capabilities from a module's exports.

    ``exports`` holds ExportSig entries or bare names; bare names skip the
    signature check.  Raises WaterError(INVALID_FUNCTION) when the marker or
    ``_water_init`` is missing, a known export has the wrong signature, or
    no role is available.
    """
    funcs = {}
    for e in exports:
        if isinstance(e, str):
            funcs[e] = None
        elif e.kind == "func":
            funcs[e.name] = e.sig
    for name, sig in funcs.items():
        want = GUEST_EXPORTS.get(name)
        if want is not None and sig is not None and sig != want:
            raise WaterError(ErrorCode.INVALID_FUNCTION, f"{name} has signature {sig}, want {want}")
    for required in (ABI_MARKER, "_water_init"):
        if required not in funcs:
            raise WaterError(ErrorCode.INVALID_FUNCTION, f"missing export {required}")
    worker = "_water_worker" in funcs
    caps = RoleCapabilities(
        can_dial=worker and "_water_dial" in funcs,
        can_listen=worker and "_water_accept" in funcs,
        can_relay=worker and "_water_associate" in funcs,
    )
    if not caps:
        raise WaterError(ErrorCode.INVALID_FUNCTION, "module supports no role")
    return caps

"""Loading and validating WATM binaries."""

from __future__ import annotations

import hashlib
import os
import threading
from dataclasses import dataclass, field

import wasmtime
import wasmtime._func

from ..abi import (ABI_VERSION, HOST_IMPORTS, HOST_NAMESPACE, WASI_NAMESPACE, ErrorCode,
                   RoleCapabilities, WaterError, validate_exports)
from ..bridge.wasi import SIGNATURES as WASI_SIGNATURES
from ..wasmbin import MAGIC, ModuleInfo, WasmFormatError, parse_module

MANIFEST_SUFFIX = ".manifest"

_engine = None
_engine_lock = threading.Lock()


class _LockedSlab(wasmtime._func.Slab):
    """wasmtime-py keeps every host function in one module-level slab that
    Func() allocates from and store finalizers free into, from any thread.
    Unlocked, two threads building instances at once corrupt its free list."""

    def __init__(self, inner):
        super().__init__()
        self.list, self.next = inner.list, inner.next
        self._lock = threading.RLock()

    def allocate(self, val):
        with self._lock:
            return super().allocate(val)

    def deallocate(self, idx):
        with self._lock:
            super().deallocate(idx)


def _guard_function_registry():
    if not isinstance(wasmtime._func.FUNCTIONS, _LockedSlab):
        wasmtime._func.FUNCTIONS = _LockedSlab(wasmtime._func.FUNCTIONS)


def shared_engine() -> wasmtime.Engine:
    global _engine
    with _engine_lock:
        if _engine is None:
            _guard_function_registry()
            _engine = wasmtime.Engine()
        return _engine


def digest_of(binary: bytes) -> bytes:
    return hashlib.sha256(binary).digest()


def _normalize_pin(pin) -> bytes:
    if isinstance(pin, str):
        try:
            pin = bytes.fromhex(pin.strip())
        except ValueError:
            raise WaterError(ErrorCode.INVALID_ARGUMENT, f"digest pin is not hex: {pin!r}") from None
    pin = bytes(pin)
    if len(pin) != 32:
        raise WaterError(ErrorCode.INVALID_ARGUMENT, "digest pin must be 32 bytes")
    return pin


@dataclass(frozen=True)
class WATMImage:
    binary: bytes = field(repr=False)
    digest: bytes
    capabilities: RoleCapabilities
    name: str = "watm"
    info: ModuleInfo = field(default=None, repr=False, compare=False)
    module: wasmtime.Module = field(default=None, repr=False, compare=False)

    @property
    def hexdigest(self):
        return self.digest.hex()

    def manifest(self) -> str:
        return f"digest={self.hexdigest}\nname={self.name}\nabi={ABI_VERSION}\n"


def _check_imports(info):
    for imp in info.imports:
        if imp.kind != "func":
            raise WaterError(ErrorCode.INVALID_FUNCTION,
                             f"unsupported {imp.kind} import {imp.module}.{imp.name}")
        if imp.module == WASI_NAMESPACE:
            want = WASI_SIGNATURES.get(imp.name)
        elif imp.module == HOST_NAMESPACE:
            want = HOST_IMPORTS.get(imp.name)
        else:
            raise WaterError(ErrorCode.INVALID_FUNCTION, f"unknown import namespace {imp.module!r}")
        if want is None:
            raise WaterError(ErrorCode.INVALID_FUNCTION, f"unknown import {imp.module}.{imp.name}")
        if imp.sig != want:
            raise WaterError(ErrorCode.INVALID_FUNCTION,
                             f"import {imp.module}.{imp.name} has signature {imp.sig}, want {want}")


def load_image(binary, expected_digest=None, name="watm") -> WATMImage:
    """Validate ``binary`` as a WATM and compile it.

    Raises WaterError: INVALID_ARGUMENT for non-WebAssembly input,
    INVALID_FUNCTION for a bad export/import set, GENERAL on a pin mismatch.
    """
    binary = bytes(binary)
    if not binary.startswith(MAGIC):
        raise WaterError(ErrorCode.INVALID_ARGUMENT, "not a WebAssembly module")
    digest = digest_of(binary)
    if expected_digest is not None:
        pin = _normalize_pin(expected_digest)
        if pin != digest:
            raise WaterError(ErrorCode.GENERAL,
                             f"digest mismatch: expected {pin.hex()}, got {digest.hex()}")
    try:
        info = parse_module(binary)
    except WasmFormatError as exc:
        raise WaterError(ErrorCode.INVALID_ARGUMENT, f"malformed module: {exc}") from exc
    caps = validate_exports(info.exports)
    if not any(e.name == "memory" and e.kind == "memory" for e in info.exports):
        raise WaterError(ErrorCode.INVALID_FUNCTION, "module does not export its memory")
    _check_imports(info)
    try:
        module = wasmtime.Module(shared_engine(), binary)
    except wasmtime.WasmtimeError as exc:
        raise WaterError(ErrorCode.INVALID_ARGUMENT, f"module failed to compile: {exc}") from exc
    return WATMImage(binary, digest, caps, name, info, module)


def parse_manifest(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        key, sep, value = line.partition("=")
        if sep:
            out[key.strip()] = value.strip()
    return out


def load_image_file(path, expected_digest=None) -> WATMImage:
    """Load a ``.wasm`` file, honouring a ``<path>.manifest`` sidecar if present."""
    with open(path, "rb") as fh:
        binary = fh.read()
    name = os.path.splitext(os.path.basename(path))[0]
    sidecar = str(path) + MANIFEST_SUFFIX
    if os.path.exists(sidecar):
        with open(sidecar, encoding="utf-8") as fh:
            meta = parse_manifest(fh.read())
        if meta.get("abi", str(ABI_VERSION)) != str(ABI_VERSION):
            raise WaterError(ErrorCode.INVALID_FUNCTION, f"manifest declares abi={meta['abi']}")
        name = meta.get("name", name)
        if "digest" in meta:
            pin, actual = _normalize_pin(meta["digest"]), digest_of(binary)
            if pin != actual:
                raise WaterError(ErrorCode.GENERAL, f"digest mismatch: expected {pin.hex()}, "
                                 f"got {actual.hex()} (from {sidecar})")
    return load_image(binary, expected_digest, name)

"""Direct access to the guest's AEAD framing code (compiled into kat.wasm
from the same sources as the aead transport) for known-answer tests and
timing, without a network in between."""

from __future__ import annotations

import wasmtime

from ..runtime.image import shared_engine
from . import bundled_path
from .oracle import MAX_PAYLOAD, SALT_LEN

_module = None


def _kat_module():
    global _module
    if _module is None:
        _module = wasmtime.Module(shared_engine(), bundled_path("kat").read_bytes())
    return _module


class GuestFraming:
    """One guest framing state (a send and a receive direction sharing a salt)."""

    def __init__(self, password: bytes, salt: bytes):
        self.store = wasmtime.Store(shared_engine())
        inst = wasmtime.Instance(self.store, _kat_module(), [])
        ex = inst.exports(self.store)
        self._ex = ex
        self._mem = ex["memory"]
        self._in = ex["kat_in"](self.store)
        self._out = ex["kat_out"](self.store)
        self.capacity = ex["kat_capacity"](self.store)
        if isinstance(password, str):
            password = password.encode("utf-8")
        if len(salt) != SALT_LEN:
            raise ValueError("salt must be 32 bytes")
        self._put(password + salt)
        if ex["kat_setup"](self.store, len(password)) != 0:
            raise ValueError("password too long for the harness buffer")

    def _put(self, data):
        if len(data) > self.capacity:
            raise ValueError("input exceeds harness buffer")
        self._mem.write(self.store, bytes(data), self._in)

    def _get(self, n):
        return bytes(self._mem.read(self.store, self._out, self._out + n))

    def set_nonce(self, counter: int):
        self._ex["kat_set_nonce"](self.store, counter & (2**64 - 1), counter >> 64)

    @property
    def nonce(self):
        return self._ex["kat_nonce_lo"](self.store) & (2**64 - 1)

    @property
    def frames(self):
        """AEAD messages sealed so far (two per frame)."""
        return self._ex["kat_frames"](self.store)

    def seal(self, payload) -> bytes:
        if len(payload) > MAX_PAYLOAD:
            raise ValueError("payload exceeds one frame")
        self._put(payload)
        n = self._ex["kat_seal"](self.store, len(payload))
        return self._get(n)

    def load(self, data):
        """Stage bytes for :meth:`open_step`."""
        self._put(data)

    def open_step(self, n):
        """One resumable decode step over the first ``n`` staged bytes:
        (consumed, plaintext) with consumed 0 for need-more, -1 for auth failure."""
        used = self._ex["kat_open"](self.store, n)
        plain = self._get(self._ex["kat_plain_len"](self.store)) if used > 0 else b""
        return used, plain

    def seal_bulk(self, total: int, fill=b"") -> int:
        """Seal ``total`` bytes in maximal frames inside the guest; returns the frame count."""
        if fill:
            self._put(fill[:MAX_PAYLOAD])
        return self._ex["kat_seal_bulk"](self.store, total)


class StreamOpener:
    """Feeds a wire stream through the guest decoder under arbitrary chunking,
    keeping unconsumed bytes the way the worker's accumulation buffer does."""

    def __init__(self, framing: GuestFraming):
        self.framing = framing
        self._acc = bytearray()
        self.peak = 0

    def feed(self, data) -> bytes:
        self._acc += data
        self.peak = max(self.peak, len(self._acc))
        out = bytearray()
        while self._acc:
            self.framing.load(self._acc)
            used, plain = self.framing.open_step(len(self._acc))
            if used < 0:
                raise ValueError("guest rejected frame")
            if used == 0:
                break
            del self._acc[:used]
            out += plain
        return bytes(out)

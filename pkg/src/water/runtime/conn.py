from __future__ import annotations

import threading

from ..abi import Cancelled, ErrorCode, WaterError
from ..bridge.pipe import PipeClosed

OPEN, HALF_CLOSED, CLOSED = "open", "half-closed", "closed"


class VirtualConn:
    """The caller's plaintext stream.  The guest sits between it and the network.

    One reader thread plus one writer thread may use a conn concurrently.
    """

    def __init__(self, end, instance):
        self._end = end
        self.instance = instance
        self._state = OPEN
        self._done = threading.Event()
        self.exit_code = None
        self.error = None

    def __repr__(self):
        return f"<VirtualConn {self.instance.id} {self._state}>"

    @property
    def state(self):
        return self._state

    @property
    def id(self):
        return self.instance.id

    def read(self, n=65536, timeout=None) -> bytes:
        """Up to ``n`` bytes; b"" at end of stream.  Raises WaterError(FAILED_IO)
        once the guest failed and its buffered output has been drained."""
        if n <= 0:
            raise WaterError(ErrorCode.INVALID_ARGUMENT, "read size must be positive")
        if self._state == CLOSED:
            return b""
        return self._end.read(n, timeout)

    def read_exactly(self, n, timeout=None) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            chunk = self.read(n - len(buf), timeout)
            if not chunk:
                raise WaterError(ErrorCode.FAILED_IO, f"stream ended after {len(buf)} of {n} bytes")
            buf += chunk
        return bytes(buf)

    def write(self, data, timeout=None) -> int:
        """Write all of ``data``; blocks while the shuttle buffer is full."""
        if not data:
            return 0
        if self._state != OPEN:
            raise WaterError(ErrorCode.FAILED_IO, f"write on {self._state} conn")
        try:
            return self._end.write_all(data, timeout)
        except (BrokenPipeError, PipeClosed) as exc:
            raise WaterError(ErrorCode.FAILED_IO, f"transport closed: {exc}") from exc

    sendall = write

    def close_write(self):
        """Half-close: the guest sees EOF and shuts down its network write side."""
        if self._state == OPEN:
            self._state = HALF_CLOSED
            self._end.shutdown_write()

    def close(self):
        if self._state != CLOSED:
            self._state = CLOSED
            self._end.close()

    def cancel(self):
        """Stop the guest now; pending and future reads raise Cancelled."""
        self._end.fail(Cancelled("connection cancelled"))
        self.instance.cancel()

    def join(self, timeout=None) -> bool:
        """Wait for the guest worker to finish; True when it has."""
        return self._done.wait(timeout)

    @property
    def finished(self):
        return self._done.is_set()

    def _worker_exit(self, rc, err):
        self.exit_code = rc
        if err is None and rc is not None and rc < 0:
            err = WaterError(rc, "transport worker failed")
        self.error = err
        if err is not None:
            self._end.fail(err if isinstance(err, WaterError)
                           else WaterError(ErrorCode.FAILED_IO, str(err)))
        self._done.set()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __iter__(self):
        while True:
            chunk = self.read()
            if not chunk:
                return
            yield chunk

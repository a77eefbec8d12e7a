"""Bounded in-memory duplex pipes.

A PipePair links two PipeEnds; bytes written on one end are read from the
other, in order, with at most ``capacity`` bytes buffered per direction so
a stalled reader pushes back on the writer.
"""

import threading
import time


class PipeClosed(OSError):
    pass


class _Channel:
    __slots__ = ("buf", "eof", "reader_gone")

    def __init__(self):
        self.buf = bytearray()
        self.eof = False  # writer shut down
        self.reader_gone = False


class PipePair:
    def __init__(self, capacity=4096):
        if capacity < 1:
            raise ValueError("pipe capacity must be positive")
        self.capacity = capacity
        self._cond = threading.Condition(threading.Lock())
        self._listeners = []
        ab, ba = _Channel(), _Channel()
        self.a = PipeEnd(self, rx=ba, tx=ab, label="a")
        self.b = PipeEnd(self, rx=ab, tx=ba, label="b")

    def add_listener(self, fn):
        """Call ``fn()`` (under the pipe lock) on every state change."""
        with self._cond:
            self._listeners.append(fn)

    def _changed(self):
        self._cond.notify_all()
        for fn in self._listeners:
            fn()


class PipeEnd:
    def __init__(self, pair, rx, tx, label):
        self._pair = pair
        self._rx = rx
        self._tx = tx
        self._closed = False
        self._error = None
        self.label = label

    def __repr__(self):
        return f"<PipeEnd {self.label} closed={self._closed}>"

    @property
    def capacity(self):
        return self._pair.capacity

    @property
    def closed(self):
        return self._closed

    def _deadline_wait(self, deadline):
        if deadline is None:
            self._pair._cond.wait()
            return
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise TimeoutError("pipe operation timed out")
        self._pair._cond.wait(remaining)

    def read(self, n, timeout=None):
        """Block until data or EOF; b"" means end of stream."""
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._pair._cond:
            while True:
                chunk = self._take(n)
                if chunk is not None:
                    return chunk
                self._deadline_wait(deadline)

    def read_nowait(self, n):
        """Like read, but None when nothing is available yet."""
        with self._pair._cond:
            return self._take(n)

    def _take(self, n):
        if self._closed:
            return b""
        rx = self._rx
        if rx.buf:
            chunk = bytes(rx.buf[:n])
            del rx.buf[:n]
            self._pair._changed()
            return chunk
        if self._error is not None:
            raise self._error
        if rx.eof:
            return b""
        return None

    def write(self, data, timeout=None):
        """Block until at least one byte fits; returns the count accepted."""
        if not data:
            return 0
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._pair._cond:
            while True:
                n = self._put(data)
                if n is not None:
                    return n
                self._deadline_wait(deadline)

    def write_nowait(self, data):
        with self._pair._cond:
            return self._put(data)

    def _put(self, data):
        if self._error is not None:
            raise self._error
        if self._closed or self._tx.eof:
            raise PipeClosed("write on closed pipe end")
        if self._tx.reader_gone:
            raise BrokenPipeError("peer end closed")
        space = self._pair.capacity - len(self._tx.buf)
        if space <= 0:
            return None
        take = data[:space]
        self._tx.buf += take
        self._pair._changed()
        return len(take)

    def write_all(self, data, timeout=None):
        view = memoryview(data)
        while view:
            n = self.write(view, timeout)
            view = view[n:]
        return len(data)

    def readable(self):
        """True when a read would not block."""
        with self._pair._cond:
            return (self._closed or bool(self._rx.buf) or self._rx.eof
                    or self._error is not None)

    def writable(self):
        with self._pair._cond:
            return (self._closed or self._tx.eof or self._tx.reader_gone
                    or self._error is not None
                    or len(self._tx.buf) < self._pair.capacity)

    def pending(self):
        with self._pair._cond:
            return len(self._rx.buf)

    def shutdown_write(self):
        with self._pair._cond:
            if not self._tx.eof:
                self._tx.eof = True
                self._pair._changed()

    def fail(self, exc):
        """Poison this end: buffered bytes stay readable, then ``exc`` is raised."""
        with self._pair._cond:
            if self._error is None and not self._closed:
                self._error = exc
                self._pair._changed()

    def close(self):
        with self._pair._cond:
            if self._closed:
                return
            self._closed = True
            self._tx.eof = True
            self._rx.reader_gone = True
            self._rx.buf.clear()
            self._pair._changed()

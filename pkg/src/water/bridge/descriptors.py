"""Host resources as seen through a guest's descriptor table."""

from __future__ import annotations

import errno
import io
import select
import socket
import threading

from . import wasi_errno as E
from .pipe import PipeClosed

FILETYPE_UNKNOWN = 0
FILETYPE_CHARACTER_DEVICE = 2
FILETYPE_REGULAR_FILE = 4
FILETYPE_SOCKET_STREAM = 6

SHUT_RD = 1
SHUT_WR = 2

FIRST_FREE_FD = 3


class WasiError(Exception):
    def __init__(self, errno_value, detail=""):
        super().__init__(detail or f"wasi errno {errno_value}")
        self.errno = errno_value


class Waker:
    """A self-pipe that lets other threads interrupt a blocking poll."""

    def __init__(self):
        self._r, self._w = socket.socketpair()
        self._r.setblocking(False)
        self._w.setblocking(False)
        self._pending = False
        self._closed = False

    def fileno(self):
        return self._r.fileno()

    def poke(self):
        if self._pending or self._closed:
            return
        self._pending = True
        try:
            self._w.send(b"\0")
        except (BlockingIOError, OSError):
            pass

    def drain(self):
        # empty the pipe before clearing the flag: the other order lets a
        # concurrent poke's byte be swallowed while the flag stays set, and
        # every later poke would then skip the write
        try:
            while self._r.recv(4096):
                pass
        except (BlockingIOError, OSError):
            pass
        self._pending = False

    def close(self):
        self._closed = True
        self._r.close()
        self._w.close()


class Descriptor:
    """Base class.  ``try_read``/``try_write`` never block: they return None
    when the operation would block, and the caller waits for readiness."""

    kind = "unknown"
    filetype = FILETYPE_UNKNOWN

    def fileno(self):
        return None

    def ready(self, mode):
        return True

    def try_read(self, n):
        raise WasiError(E.BADF, "not readable")

    def try_write(self, data):
        raise WasiError(E.BADF, "not writable")

    def shutdown(self, how):
        raise WasiError(E.NOTSOCK)

    def close(self):
        pass


class SocketDescriptor(Descriptor):
    kind = "network"
    filetype = FILETYPE_SOCKET_STREAM

    def __init__(self, sock):
        sock.setblocking(False)
        self.sock = sock

    def fileno(self):
        return self.sock.fileno()

    def ready(self, mode):
        fd = self.sock.fileno()
        if fd < 0:
            return True
        p = select.poll()
        p.register(fd, select.POLLIN if mode == "r" else select.POLLOUT)
        return bool(p.poll(0))

    def try_read(self, n):
        try:
            return self.sock.recv(n)
        except BlockingIOError:
            return None
        except InterruptedError:
            return None
        except ConnectionResetError as exc:
            raise WasiError(E.CONNRESET, str(exc)) from exc
        except OSError as exc:
            raise WasiError(_map_oserror(exc), str(exc)) from exc

    def try_write(self, data):
        try:
            return self.sock.send(data)
        except (BlockingIOError, InterruptedError):
            return None
        except BrokenPipeError as exc:
            raise WasiError(E.PIPE, str(exc)) from exc
        except OSError as exc:
            raise WasiError(_map_oserror(exc), str(exc)) from exc

    def shutdown(self, how):
        mode = {SHUT_RD: socket.SHUT_RD, SHUT_WR: socket.SHUT_WR,
                SHUT_RD | SHUT_WR: socket.SHUT_RDWR}.get(how)
        if mode is None:
            raise WasiError(E.INVAL)
        try:
            self.sock.shutdown(mode)
        except OSError as exc:
            if exc.errno != errno.ENOTCONN:
                raise WasiError(_map_oserror(exc)) from exc

    def close(self):
        self.sock.close()


class PipeDescriptor(Descriptor):
    """Guest side of an in-memory pipe (the internal channel or the cancel signal)."""

    filetype = FILETYPE_SOCKET_STREAM

    def __init__(self, end, kind="internal"):
        self.end = end
        self.kind = kind
        if kind != "internal":
            self.filetype = FILETYPE_CHARACTER_DEVICE

    def ready(self, mode):
        return self.end.readable() if mode == "r" else self.end.writable()

    def try_read(self, n):
        try:
            return self.end.read_nowait(n)
        except OSError as exc:
            raise WasiError(E.IO, str(exc)) from exc

    def try_write(self, data):
        try:
            return self.end.write_nowait(data)
        except (BrokenPipeError, PipeClosed) as exc:
            raise WasiError(E.PIPE, str(exc)) from exc

    def shutdown(self, how):
        if how & SHUT_WR:
            self.end.shutdown_write()

    def close(self):
        self.end.close()


class BytesDescriptor(Descriptor):
    """Read-only view over a byte string (the config blob)."""

    kind = "config"
    filetype = FILETYPE_CHARACTER_DEVICE

    def __init__(self, data):
        self._buf = io.BytesIO(bytes(data))

    def try_read(self, n):
        return self._buf.read(n)

    def close(self):
        self._buf.close()


class StdioDescriptor(Descriptor):
    kind = "stdio"
    filetype = FILETYPE_CHARACTER_DEVICE

    def __init__(self, sink=None):
        self._sink = sink

    def try_read(self, n):
        return b""

    def try_write(self, data):
        if self._sink is None:
            raise WasiError(E.BADF)
        self._sink(bytes(data))
        return len(data)


class DescriptorTable:
    """Per-instance descriptor table.  Indices are handed out once and never
    reused; 0-2 are the standard streams."""

    def __init__(self, stdout_sink=None):
        self._lock = threading.Lock()
        self._items = {0: StdioDescriptor(), 1: StdioDescriptor(stdout_sink),
                       2: StdioDescriptor(stdout_sink)}
        self._next = FIRST_FREE_FD
        self._closed = False

    def push(self, desc) -> int:
        with self._lock:
            if self._closed:
                raise WasiError(E.BADF, "table closed")
            fd = self._next
            self._next += 1
            self._items[fd] = desc
            return fd

    def get(self, fd):
        with self._lock:
            desc = self._items.get(fd)
        if desc is None:
            raise WasiError(E.BADF, f"bad descriptor {fd}")
        return desc

    def remove(self, fd):
        with self._lock:
            desc = self._items.pop(fd, None)
        if desc is None:
            raise WasiError(E.BADF, f"bad descriptor {fd}")
        return desc

    def kinds(self):
        with self._lock:
            return {fd: d.kind for fd, d in self._items.items()}

    def close_all(self):
        with self._lock:
            self._closed = True
            items = list(self._items.values())
            self._items.clear()
        for desc in items:
            try:
                desc.close()
            except OSError:
                pass

    @property
    def closed(self):
        return self._closed


def _map_oserror(exc):
    return {
        errno.EPIPE: E.PIPE,
        errno.ECONNRESET: E.CONNRESET,
        errno.ECONNABORTED: E.CONNABORTED,
        errno.ENOTCONN: E.NOTCONN,
        errno.EBADF: E.BADF,
    }.get(exc.errno, E.IO)

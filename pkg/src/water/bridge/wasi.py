"""Host implementation of the preview-1 system interface over a guest's
descriptor table.

Only stream descriptors exist (sockets, pipes, the config blob, stdio), so
the filesystem half of the interface reports ENOSYS / EBADF.  Every call
that can block waits through the owning instance, which makes it
cancellable.
"""

from __future__ import annotations

import os
import select
import struct
import time

from ..abi import I32, I64, FuncSig
from . import wasi_errno as E
from .descriptors import WasiError

_I = I32
_L = I64


def _s(*params, results=(I32,)):
    return FuncSig(tuple(params), tuple(results))


SIGNATURES = {
    "args_get": _s(_I, _I),
    "args_sizes_get": _s(_I, _I),
    "environ_get": _s(_I, _I),
    "environ_sizes_get": _s(_I, _I),
    "clock_res_get": _s(_I, _I),
    "clock_time_get": _s(_I, _L, _I),
    "fd_advise": _s(_I, _L, _L, _I),
    "fd_allocate": _s(_I, _L, _L),
    "fd_close": _s(_I),
    "fd_datasync": _s(_I),
    "fd_fdstat_get": _s(_I, _I),
    "fd_fdstat_set_flags": _s(_I, _I),
    "fd_fdstat_set_rights": _s(_I, _L, _L),
    "fd_filestat_get": _s(_I, _I),
    "fd_filestat_set_size": _s(_I, _L),
    "fd_filestat_set_times": _s(_I, _L, _L, _I),
    "fd_pread": _s(_I, _I, _I, _L, _I),
    "fd_prestat_get": _s(_I, _I),
    "fd_prestat_dir_name": _s(_I, _I, _I),
    "fd_pwrite": _s(_I, _I, _I, _L, _I),
    "fd_read": _s(_I, _I, _I, _I),
    "fd_readdir": _s(_I, _I, _I, _L, _I),
    "fd_renumber": _s(_I, _I),
    "fd_seek": _s(_I, _L, _I, _I),
    "fd_sync": _s(_I),
    "fd_tell": _s(_I, _I),
    "fd_write": _s(_I, _I, _I, _I),
    "path_create_directory": _s(_I, _I, _I),
    "path_filestat_get": _s(_I, _I, _I, _I, _I),
    "path_filestat_set_times": _s(_I, _I, _I, _I, _L, _L, _I),
    "path_link": _s(_I, _I, _I, _I, _I, _I, _I),
    "path_open": _s(_I, _I, _I, _I, _I, _L, _L, _I, _I),
    "path_readlink": _s(_I, _I, _I, _I, _I, _I),
    "path_remove_directory": _s(_I, _I, _I),
    "path_rename": _s(_I, _I, _I, _I, _I, _I),
    "path_symlink": _s(_I, _I, _I, _I, _I),
    "path_unlink_file": _s(_I, _I, _I),
    "poll_oneoff": _s(_I, _I, _I, _I),
    "proc_exit": _s(_I, results=()),
    "proc_raise": _s(_I),
    "sched_yield": _s(),
    "random_get": _s(_I, _I),
    "sock_accept": _s(_I, _I, _I),
    "sock_recv": _s(_I, _I, _I, _I, _I, _I),
    "sock_send": _s(_I, _I, _I, _I, _I),
    "sock_shutdown": _s(_I, _I),
}

EVENTTYPE_CLOCK = 0
EVENTTYPE_FD_READ = 1
EVENTTYPE_FD_WRITE = 2
SUBCLOCK_ABSTIME = 1
EVENT_HANGUP = 1
CLOCK_REALTIME, CLOCK_MONOTONIC = 0, 1
RIGHTS_ALL = (1 << 30) - 1

_SUB = struct.Struct("<QB7x")  # userdata, tag; union follows at +16
_SUB_CLOCK = struct.Struct("<I4xQQH")
_EVENT = struct.Struct("<QHB5xQH6x")
_FDSTAT = struct.Struct("<BxH4xQQ")
_IOVEC = struct.Struct("<II")


class ProcExit(Exception):
    def __init__(self, code):
        super().__init__(f"guest called proc_exit({code})")
        self.code = code


class Preview1:
    """The preview-1 host functions for one guest instance."""

    def __init__(self, instance):
        self.inst = instance

    # -- memory helpers -------------------------------------------------

    def _read(self, ptr, n):
        return self.inst.read_memory(ptr, n)

    def _write(self, ptr, data):
        self.inst.write_memory(ptr, data)

    def _u32_out(self, ptr, value):
        self._write(ptr, struct.pack("<I", value))

    def _iovecs(self, ptr, count):
        raw = self._read(ptr, 8 * count)
        return [_IOVEC.unpack_from(raw, 8 * i) for i in range(count)]

    # -- dispatch -------------------------------------------------------

    def bind(self, name):
        """Host callable for ``name``; errors become errno returns."""
        impl = getattr(self, name, None)
        if impl is None:
            return lambda *args: E.NOSYS
        if name == "proc_exit":
            return impl

        def call(*args):
            self.inst.begin_host_call()
            try:
                return impl(*args)
            except WasiError as exc:
                return exc.errno
            except Exception as exc:  # noqa: BLE001 - guest must never see a host exception
                self.inst.log_host(f"{name} failed: {exc!r}")
                return E.IO
        return call

    # -- process / environment -----------------------------------------

    def args_sizes_get(self, argc_ptr, buf_size_ptr):
        self._u32_out(argc_ptr, 0)
        self._u32_out(buf_size_ptr, 0)
        return E.SUCCESS

    environ_sizes_get = args_sizes_get

    def args_get(self, argv_ptr, buf_ptr):
        return E.SUCCESS

    environ_get = args_get

    def proc_exit(self, code):
        raise ProcExit(code)

    def sched_yield(self):
        time.sleep(0)
        return E.SUCCESS

    def random_get(self, ptr, n):
        self._write(ptr, os.urandom(n))
        return E.SUCCESS

    def clock_res_get(self, clock_id, ptr):
        self._write(ptr, struct.pack("<Q", 1000))
        return E.SUCCESS

    def clock_time_get(self, clock_id, precision, ptr):
        self._write(ptr, struct.pack("<Q", _now(clock_id)))
        return E.SUCCESS

    # -- descriptors ----------------------------------------------------

    def fd_close(self, fd):
        self.inst.table.remove(fd).close()
        return E.SUCCESS

    def fd_fdstat_get(self, fd, ptr):
        desc = self.inst.table.get(fd)
        self._write(ptr, _FDSTAT.pack(desc.filetype, 0, RIGHTS_ALL, RIGHTS_ALL))
        return E.SUCCESS

    def fd_fdstat_set_flags(self, fd, flags):
        self.inst.table.get(fd)
        return E.SUCCESS

    def fd_prestat_get(self, fd, ptr):
        self.inst.table.get(fd)
        return E.BADF

    def fd_seek(self, fd, offset, whence, ptr):
        self.inst.table.get(fd)
        return E.SPIPE

    def fd_tell(self, fd, ptr):
        self.inst.table.get(fd)
        return E.SPIPE

    def fd_read(self, fd, iovs_ptr, iovs_len, nread_ptr):
        desc = self.inst.table.get(fd)
        iovs = self._iovecs(iovs_ptr, iovs_len)
        total = sum(length for _, length in iovs)
        data = self.inst.blocking_read(desc, total) if total else b""
        off = 0
        for base, length in iovs:
            if off >= len(data):
                break
            piece = data[off:off + length]
            self._write(base, piece)
            off += len(piece)
        self._u32_out(nread_ptr, len(data))
        return E.SUCCESS

    def fd_write(self, fd, iovs_ptr, iovs_len, nwritten_ptr):
        desc = self.inst.table.get(fd)
        iovs = self._iovecs(iovs_ptr, iovs_len)
        data = b"".join(self._read(base, length) for base, length in iovs if length)
        n = self.inst.blocking_write(desc, data) if data else 0
        self._u32_out(nwritten_ptr, n)
        return E.SUCCESS

    def sock_recv(self, fd, iovs_ptr, iovs_len, flags, nread_ptr, oflags_ptr):
        rc = self.fd_read(fd, iovs_ptr, iovs_len, nread_ptr)
        self._write(oflags_ptr, b"\0\0")
        return rc

    def sock_send(self, fd, iovs_ptr, iovs_len, flags, nwritten_ptr):
        return self.fd_write(fd, iovs_ptr, iovs_len, nwritten_ptr)

    def sock_shutdown(self, fd, how):
        self.inst.table.get(fd).shutdown(how)
        return E.SUCCESS

    def sock_accept(self, fd, flags, ptr):
        self.inst.table.get(fd)
        return E.NOTSUP

    # -- poll -----------------------------------------------------------

    def poll_oneoff(self, in_ptr, out_ptr, nsubs, nevents_ptr):
        if nsubs <= 0:
            return E.INVAL
        raw = self._read(in_ptr, 48 * nsubs)
        subs = []
        deadline = None
        for i in range(nsubs):
            userdata, tag = _SUB.unpack_from(raw, 48 * i)
            if tag == EVENTTYPE_CLOCK:
                clock_id, timeout, _, flags = _SUB_CLOCK.unpack_from(raw, 48 * i + 16)
                if flags & SUBCLOCK_ABSTIME:
                    due = time.monotonic() + max(0, timeout - _now(clock_id)) / 1e9
                else:
                    due = time.monotonic() + timeout / 1e9
                subs.append((userdata, tag, due))
                deadline = due if deadline is None else min(deadline, due)
            elif tag in (EVENTTYPE_FD_READ, EVENTTYPE_FD_WRITE):
                (fd,) = struct.unpack_from("<I", raw, 48 * i + 16)
                subs.append((userdata, tag, fd))
            else:
                return E.INVAL

        events = self.inst.poll(subs, deadline)
        out = b"".join(_EVENT.pack(*ev) for ev in events)
        self._write(out_ptr, out)
        self._u32_out(nevents_ptr, len(events))
        return E.SUCCESS


def _now(clock_id):
    if clock_id == CLOCK_REALTIME:
        return time.time_ns()
    return time.monotonic_ns()


def poll_descriptors(table, subs, deadline, waker, is_cancelled):
    """Block until at least one subscription fires; returns event tuples
    ``(userdata, error, type, nbytes, flags)``.

    Raises WasiError(CANCELED) when the instance is cancelled and nothing
    else is ready.
    """
    while True:
        waker.drain()
        events = []
        os_fds = {}
        for userdata, tag, arg in subs:
            if tag == EVENTTYPE_CLOCK:
                continue
            mode = "r" if tag == EVENTTYPE_FD_READ else "w"
            try:
                desc = table.get(arg)
            except WasiError as exc:
                events.append((userdata, exc.errno, tag, 0, 0))
                continue
            fileno = desc.fileno()
            if fileno is None or fileno < 0:
                if desc.ready(mode):
                    events.append((userdata, 0, tag, 0, 0))
            else:
                mask = select.POLLIN if mode == "r" else select.POLLOUT
                os_fds.setdefault(fileno, []).append((userdata, tag, mask))

        cancelled = is_cancelled()
        if events or cancelled or (deadline is not None and time.monotonic() >= deadline):
            timeout_ms = 0
        elif deadline is None:
            timeout_ms = None
        else:
            timeout_ms = max(0, int((deadline - time.monotonic()) * 1000) + 1)

        poller = select.poll()
        for fileno, wants in os_fds.items():
            mask = 0
            for _, _, m in wants:
                mask |= m
            poller.register(fileno, mask)
        if timeout_ms != 0:
            poller.register(waker.fileno(), select.POLLIN)
        for fileno, revents in poller.poll(timeout_ms):
            for userdata, tag, mask in os_fds.get(fileno, ()):
                if revents & (mask | select.POLLHUP | select.POLLERR | select.POLLNVAL):
                    flags = EVENT_HANGUP if revents & select.POLLHUP else 0
                    events.append((userdata, 0, tag, 0, flags))

        now = time.monotonic()
        for userdata, tag, due in subs:
            if tag == EVENTTYPE_CLOCK and now >= due:
                events.append((userdata, 0, EVENTTYPE_CLOCK, 0, 0))
        if events:
            return events
        # only after a non-blocking pass saw nothing ready
        if cancelled:
            raise WasiError(E.CANCELED, "instance cancelled")

"""One running guest: a wasmtime store, its descriptor table and the
blocking/cancellation machinery the host imports rely on."""

from __future__ import annotations

import itertools
import logging
import select
import ctypes
import threading
import time

import wasmtime

from ..abi import ABI_MARKER, HOST_NAMESPACE, WASI_NAMESPACE, ErrorCode, WaterError
from ..bridge import wasi_errno as E
from ..bridge.descriptors import DescriptorTable, PipeDescriptor, WasiError, Waker
from ..bridge.host import HostImports
from ..bridge.pipe import PipePair
from ..bridge.wasi import Preview1, poll_descriptors
from .config import InstanceConfig
from .image import shared_engine
from .logs import default_sink, logger

_ids = itertools.count(1)


class GuestTrap(WaterError):
    """The guest trapped (or exited); the instance is dead."""

    def __init__(self, detail):
        super().__init__(ErrorCode.FAILED_IO, detail)


class GuestInstance:
    """Instantiates ``image`` and owns everything the guest can touch.

    Guest calls are made from one thread at a time; only :meth:`cancel` is
    meant to be called from elsewhere.
    """

    def __init__(self, image, config: InstanceConfig | None = None, role="conn"):
        self.image = image
        self.config = config or InstanceConfig()
        self.id = f"{image.name}-{role}-{next(_ids)}"
        self.phase = "created"
        self.table = DescriptorTable(stdout_sink=self._guest_stdout)
        self.waker = Waker()
        self.caller_ends = []
        self._mem_view = None
        self._cancelled = threading.Event()
        self._cancel_tx = None
        self._closed = False
        self._close_lock = threading.Lock()
        self.worker_thread = None
        self.exit_code = None

        self.store = wasmtime.Store(shared_engine())
        wasi = Preview1(self)
        host = HostImports(self)
        imports = []
        for imp in image.module.imports:
            provider = wasi if imp.module == WASI_NAMESPACE else host
            if imp.module not in (WASI_NAMESPACE, HOST_NAMESPACE):
                self.close()
                raise WaterError(ErrorCode.INVALID_FUNCTION, f"unknown import {imp.module}")
            imports.append(wasmtime.Func(self.store, imp.type, provider.bind(imp.name)))
        try:
            self._instance = wasmtime.Instance(self.store, image.module, imports)
        except (wasmtime.WasmtimeError, wasmtime.Trap) as exc:
            self.close()
            raise WaterError(ErrorCode.INVALID_FUNCTION, f"instantiation failed: {exc}") from exc
        self._exports = self._instance.exports(self.store)
        self.memory = self._exports["memory"]
        marker = self.call(ABI_MARKER)
        if marker != 1:
            self.close()
            raise WaterError(ErrorCode.INVALID_FUNCTION, f"{ABI_MARKER} returned {marker}")

    # -- guest calls ----------------------------------------------------

    def has_export(self, name):
        try:
            self._exports[name]
        except KeyError:
            return False
        return True

    def call(self, name, *args):
        if self._closed:
            raise WaterError(ErrorCode.FAILED_IO, "instance closed")
        try:
            fn = self._exports[name]
        except KeyError:
            raise WaterError(ErrorCode.INVALID_FUNCTION, f"guest lacks {name}") from None
        try:
            return fn(self.store, *args)
        except Exception as exc:  # noqa: BLE001 - traps and proc_exit land here
            self.phase = "trapped"
            self.log_host(f"guest trapped in {name}: {exc}", level=0)
            raise GuestTrap(f"guest trapped in {name}: {exc}") from exc

    def init(self):
        self.phase = "initializing"
        rc = self.call("_water_init")
        if rc < 0:
            raise WaterError(rc, "guest init failed")
        self.phase = "ready"

    # -- guest memory -----------------------------------------------------
    # Linear memory can only grow (and move) while guest code runs, so one
    # (base, size) lookup serves a whole host call.  Each ctypes call drops
    # the GIL, which is what makes the per-access lookups costly.

    def begin_host_call(self):
        self._mem_view = None

    def _view(self):
        if self._mem_view is None:
            size = self.memory.data_len(self.store)
            base = ctypes.addressof(self.memory.data_ptr(self.store).contents)
            self._mem_view = (base, size)
        return self._mem_view

    def read_memory(self, ptr, length):
        base, size = self._view()
        if ptr < 0 or length < 0 or ptr + length > size:
            raise WasiError(E.FAULT, "pointer out of bounds")
        return ctypes.string_at(base + ptr, length)

    def write_memory(self, ptr, data):
        base, size = self._view()
        if ptr < 0 or ptr + len(data) > size:
            raise WasiError(E.FAULT, "pointer out of bounds")
        ctypes.memmove(base + ptr, bytes(data), len(data))

    # -- cancellation ---------------------------------------------------

    @property
    def cancelled(self):
        return self._cancelled.is_set()

    def register_cancel(self):
        """Push the cancel pipe and hand it to ``_water_cancel_with`` when exported."""
        pair = PipePair(capacity=16)
        pair.add_listener(self.waker.poke)
        self._cancel_tx = pair.a
        fd = self.table.push(PipeDescriptor(pair.b, kind="cancel"))
        if self.has_export("_water_cancel_with"):
            rc = self.call("_water_cancel_with", fd)
            if rc < 0:
                raise WaterError(rc, "guest refused cancel descriptor")
        if self.cancelled:
            self._signal_cancel()
        return fd

    def _signal_cancel(self):
        tx = self._cancel_tx
        if tx is not None:
            try:
                tx.write_nowait(b"\x01")
            except OSError:
                pass

    def cancel(self):
        """Idempotent; safe from any thread."""
        if self._cancelled.is_set():
            return
        self._cancelled.set()
        self._signal_cancel()
        self.waker.poke()

    # -- blocking helpers used by the preview-1 layer -------------------

    def wait_fileno(self, fileno, mode, timeout=None):
        """Wait for an OS descriptor; raises WasiError(CANCELED) or TimeoutError."""
        deadline = None if timeout is None else time.monotonic() + timeout
        mask = select.POLLIN if mode == "r" else select.POLLOUT
        while True:
            self.waker.drain()
            if self.cancelled:
                raise WasiError(E.CANCELED, "instance cancelled")
            poller = select.poll()
            poller.register(fileno, mask)
            poller.register(self.waker.fileno(), select.POLLIN)
            if deadline is None:
                wait_ms = None
            else:
                wait_ms = int((deadline - time.monotonic()) * 1000)
                if wait_ms <= 0:
                    raise TimeoutError("timed out")
            for fd, _ in poller.poll(wait_ms):
                if fd == fileno:
                    return

    def _wait_ready(self, desc, mode):
        fileno = desc.fileno()
        if fileno is not None and fileno >= 0:
            self.wait_fileno(fileno, mode)
            return
        while True:
            self.waker.drain()
            if desc.ready(mode):
                return
            if self.cancelled:
                raise WasiError(E.CANCELED, "instance cancelled")
            select.select([self.waker.fileno()], [], [])

    def blocking_read(self, desc, n):
        while True:
            data = desc.try_read(n)
            if data is not None:
                return data
            self._wait_ready(desc, "r")

    def blocking_write(self, desc, data):
        while True:
            n = desc.try_write(data)
            if n is not None:
                return n
            self._wait_ready(desc, "w")

    def poll(self, subs, deadline):
        return poll_descriptors(self.table, subs, deadline, self.waker, lambda: self.cancelled)

    # -- worker ---------------------------------------------------------

    def run_worker(self):
        """Run ``_water_worker`` to completion in this thread and tear down.

        Returns the guest's code; raises GuestTrap on a trap.
        """
        self.phase = "running"
        try:
            rc = self.call("_water_worker")
        except BaseException as exc:
            self._poison_callers(exc if isinstance(exc, WaterError)
                                 else WaterError(ErrorCode.FAILED_IO, repr(exc)))
            self.close()
            raise
        self.exit_code = rc
        if rc < 0:
            self.log_host(f"worker exited with {WaterError(rc)}", level=1)
            self._poison_callers(WaterError(rc, "transport worker failed"))
        else:
            self.log_host("worker finished", level=3)
        self.close()
        return rc

    def _poison_callers(self, err):
        # must precede close(): closing the guest end would otherwise read as a clean EOF
        for end in self.caller_ends:
            end.fail(err)

    def start_worker(self, on_exit=None):
        """Run the worker on its own thread; ``on_exit(rc, exc)`` fires after teardown."""
        def body():
            rc, err = None, None
            try:
                rc = self.run_worker()
            except WaterError as exc:
                err = exc
            except Exception as exc:  # noqa: BLE001 - keep the host alive
                logger.exception("worker crashed", extra={"instance": self.id})
                err = WaterError(ErrorCode.GENERAL, repr(exc))
            if on_exit is not None:
                on_exit(rc, err)

        self.worker_thread = threading.Thread(target=body, name=f"water-{self.id}", daemon=True)
        self.worker_thread.start()
        return self.worker_thread

    # -- logging --------------------------------------------------------

    def emit_log(self, level, message):
        sink = self.config.log_sink or default_sink
        try:
            sink(level, self.id, message)
        except Exception:  # noqa: BLE001 - a broken sink must not kill the guest
            logging.getLogger(__name__).exception("log sink failed")

    def log_host(self, message, level=1):
        if level <= self.config.log_level:
            self.emit_log(level, message)

    def _guest_stdout(self, data):
        self.log_host(data.decode("utf-8", "replace").rstrip("\n"), level=3)

    # -- teardown -------------------------------------------------------

    @property
    def closed(self):
        return self._closed

    def close(self):
        """Release every descriptor.  Only the thread driving the guest may call this."""
        with self._close_lock:
            if self._closed:
                return
            self._closed = True
        if self.phase != "trapped":
            self.phase = "closed"
        self.table.close_all()
        if self._cancel_tx is not None:
            self._cancel_tx.close()
        self.waker.close()
        self._exports = None
        self._instance = None
        self.memory = None
        self.store = None

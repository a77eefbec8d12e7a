"""Dialer, Listener and Relay: the objects applications hold."""

from __future__ import annotations

import logging
import select
import socket
import threading

from ..abi import Cancelled, ErrorCode, WaterError
from ..bridge.descriptors import Waker
from ..bridge.host import format_addr, make_internal_channel, parse_addr, push_accepted
from .config import InstanceConfig
from .conn import VirtualConn
from .instance import GuestInstance

log = logging.getLogger("water.runtime")


def _require(image, capability, role):
    if not getattr(image.capabilities, capability):
        raise WaterError(ErrorCode.INVALID_FUNCTION, f"{image.name} cannot act as {role}")


def _bind(local, backlog):
    host, port = parse_addr(local, allow_empty_host=True)
    family = socket.AF_INET6 if ":" in host else socket.AF_INET
    sock = socket.socket(family, socket.SOCK_STREAM)
    try:
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((host, port))
        sock.listen(backlog)
    except OSError as exc:
        sock.close()
        raise WaterError(ErrorCode.FAILED_IO, f"bind {local}: {exc}") from exc
    sock.setblocking(False)
    return sock


class _Handle:
    """Tracks live guest instances so cancel() can reach all of them."""

    def __init__(self, image, config):
        self.image = image
        self.config = config or InstanceConfig()
        self._lock = threading.Lock()
        self._live = set()
        self._cancelled = threading.Event()

    def _track(self, inst):
        with self._lock:
            self._live.add(inst)
        if self._cancelled.is_set():
            inst.cancel()

    def _untrack(self, inst):
        with self._lock:
            self._live.discard(inst)

    @property
    def live_instances(self):
        with self._lock:
            return len(self._live)

    @property
    def cancelled(self):
        return self._cancelled.is_set()

    def _cancel_live(self):
        with self._lock:
            live = list(self._live)
        for inst in live:
            inst.cancel()

    def _launch(self, inst, end):
        """Hand the guest its cancel pipe, start its worker, wrap the caller end."""
        inst.register_cancel()
        conn = VirtualConn(end, inst)

        def on_exit(rc, err):
            self._untrack(inst)
            conn._worker_exit(rc, err)

        inst.start_worker(on_exit)
        return conn


class Dialer(_Handle):
    def __init__(self, image, config: InstanceConfig | None = None):
        _require(image, "can_dial", "dialer")
        super().__init__(image, config)

    def dial(self, remote: str | None = None) -> VirtualConn:
        """Start a guest that connects out (to ``remote`` if given, else the
        ``remote=`` line of the config) and return the plaintext conn."""
        if self.cancelled:
            raise Cancelled("dialer cancelled")
        cfg = self.config.with_remote(remote) if remote else self.config
        inst = GuestInstance(self.image, cfg, role="dial")
        self._track(inst)
        end = None
        try:
            inst.init()
            end, fd = make_internal_channel(inst, cfg.shuttle_buffer_bytes)
            rc = inst.call("_water_dial", fd)
            if rc < 0:
                raise WaterError(rc, "guest dial failed")
            return self._launch(inst, end)
        except BaseException:
            self._untrack(inst)
            inst.close()
            if end is not None:
                end.close()
            if inst.cancelled:
                raise Cancelled("dial cancelled") from None
            raise

    def cancel(self):
        self._cancelled.set()
        self._cancel_live()

    def close(self):
        self.cancel()


class _Acceptor(_Handle):
    """Shared listen-socket handling for Listener and Relay."""

    def __init__(self, image, config, local, backlog):
        super().__init__(image, config)
        self._sock = _bind(local, backlog)
        self._waker = Waker()
        self._closed = False

    @property
    def address(self):
        return self._sock.getsockname()[:2]

    @property
    def addr(self) -> str:
        host, port = self.address
        return format_addr(host, port)

    def _accept_socket(self, timeout=None):
        poller = select.poll()
        poller.register(self._sock.fileno(), select.POLLIN)
        poller.register(self._waker.fileno(), select.POLLIN)
        wait_ms = None if timeout is None else int(timeout * 1000)
        while True:
            self._waker.drain()
            if self.cancelled:
                raise Cancelled("listener cancelled")
            try:
                sock, _ = self._sock.accept()
                return sock
            except (BlockingIOError, InterruptedError):
                pass
            except OSError as exc:
                raise WaterError(ErrorCode.FAILED_IO, f"accept: {exc}") from exc
            if not poller.poll(wait_ms) and wait_ms is not None:
                raise TimeoutError("accept timed out")

    def cancel(self):
        """Wake blocked accepts and stop every live connection."""
        self._cancelled.set()
        self._waker.poke()
        self._cancel_live()

    def _close_socket(self):
        if not self._closed:
            self._closed = True
            self._sock.close()
            self._waker.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class Listener(_Acceptor):
    def __init__(self, image, config: InstanceConfig | None = None, local="127.0.0.1:0",
                 backlog=128):
        _require(image, "can_listen", "listener")
        super().__init__(image, config, local, backlog)
        self._accept_lock = threading.Lock()

    def accept(self, timeout=None) -> VirtualConn:
        """Wait for a peer and run the guest's accept handshake on it.

        A failed handshake raises for this attempt only; the listener keeps
        working.  The handshake runs in the calling thread.
        """
        with self._accept_lock:
            sock = self._accept_socket(timeout)
            inst = None
            try:
                inst = GuestInstance(self.image, self.config, role="accept")
                self._track(inst)
                inst.init()
                push_accepted(inst, sock)
                sock = None  # owned by the instance now
                end, fd = make_internal_channel(inst, self.config.shuttle_buffer_bytes)
                try:
                    rc = inst.call("_water_accept", fd)
                    if rc < 0:
                        raise WaterError(rc, "guest accept failed")
                    return self._launch(inst, end)
                except BaseException:
                    end.close()
                    raise
            except BaseException as exc:
                if sock is not None:
                    sock.close()
                if inst is not None:
                    self._untrack(inst)
                    inst.close()
                    if inst.cancelled and not isinstance(exc, Cancelled):
                        raise Cancelled("accept cancelled") from exc
                raise

    def close(self):
        self.cancel()
        with self._accept_lock:
            self._close_socket()

    def __iter__(self):
        while True:
            try:
                yield self.accept()
            except Cancelled:
                return


class Relay(_Acceptor):
    """Accepts on ``local`` and, per connection, lets the guest associate the
    inbound stream with a fresh outbound connection to ``remote``."""

    def __init__(self, image, config: InstanceConfig | None = None, local="127.0.0.1:0",
                 remote: str | None = None, backlog=128):
        _require(image, "can_relay", "relay")
        config = config or InstanceConfig()
        if remote:
            parse_addr(remote)
            config = config.with_remote(remote)
        super().__init__(image, config, local, backlog)
        self.remote = remote
        self._thread = None
        self._conn_threads = set()
        self.served = 0
        self.failed = 0

    def run(self):
        """Serve until cancelled.  Per-connection failures are logged and counted."""
        try:
            while True:
                try:
                    sock = self._accept_socket()
                except Cancelled:
                    return
                t = threading.Thread(target=self._serve, args=(sock,), daemon=True,
                                     name=f"water-relay-{self.addr}")
                with self._lock:
                    self._conn_threads.add(t)
                t.start()
        finally:
            self._cancel_live()

    def start(self):
        self._thread = threading.Thread(target=self.run, daemon=True, name=f"water-relay-{self.addr}")
        self._thread.start()
        return self

    def _serve(self, sock):
        inst = None
        try:
            inst = GuestInstance(self.image, self.config, role="relay")
            self._track(inst)
            inst.init()
            push_accepted(inst, sock)
            sock = None
            rc = inst.call("_water_associate")
            if rc < 0:
                raise WaterError(rc, "guest associate failed")
            inst.register_cancel()
            self.served += 1
            rc = inst.run_worker()
            if rc < 0:
                self.failed += 1
        except WaterError as exc:
            self.failed += 1
            if not self.cancelled:
                log.warning("relay connection failed: %s", exc,
                            extra={"instance": inst.id if inst else "-"})
        except Exception:  # noqa: BLE001 - one connection must not take the relay down
            self.failed += 1
            log.exception("relay connection crashed", extra={"instance": inst.id if inst else "-"})
        finally:
            if sock is not None:
                sock.close()
            if inst is not None:
                inst.close()
                self._untrack(inst)
            with self._lock:
                self._conn_threads.discard(threading.current_thread())

    def join(self, timeout=None):
        if self._thread is not None:
            self._thread.join(timeout)
        with self._lock:
            threads = list(self._conn_threads)
        for t in threads:
            t.join(timeout)

    def close(self, timeout=5.0):
        self.cancel()
        self.join(timeout)
        self._close_socket()

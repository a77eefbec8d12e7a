"""The ``water_host`` imports and the host-side descriptor plumbing behind
them: outbound TCP, pushing accepted sockets, the internal pipe channel,
config delivery and guest logging."""

from __future__ import annotations

import errno
import os
import socket

from ..abi import Cancelled, ErrorCode, WaterError
from .descriptors import BytesDescriptor, PipeDescriptor, SocketDescriptor, WasiError
from .pipe import PipePair


def parse_addr(addr, allow_empty_host=False):
    """Split ``host:port`` (IPv6 hosts in brackets) into (host, port)."""
    if isinstance(addr, bytes):
        try:
            addr = addr.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise WaterError(ErrorCode.INVALID_ARGUMENT, "address is not UTF-8") from exc
    host, sep, port = addr.strip().rpartition(":")
    if not sep or not port.isdigit():
        raise WaterError(ErrorCode.INVALID_ARGUMENT, f"bad address {addr!r}")
    if host.startswith("[") and host.endswith("]"):
        host = host[1:-1]
    port = int(port)
    if not 0 <= port <= 65535 or (not host and not allow_empty_host):
        raise WaterError(ErrorCode.INVALID_ARGUMENT, f"bad address {addr!r}")
    if not allow_empty_host and port == 0:
        raise WaterError(ErrorCode.INVALID_ARGUMENT, f"bad address {addr!r}")
    return host, port


def format_addr(host, port):
    return f"[{host}]:{port}" if ":" in host else f"{host}:{port}"


def set_nodelay(sock):
    try:
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    except OSError:
        pass


def _connect(instance, host, port, timeout):
    try:
        infos = socket.getaddrinfo(host, port, type=socket.SOCK_STREAM)
    except socket.gaierror as exc:
        raise WaterError(ErrorCode.NETWORK_UNREACHABLE, f"resolve {host}: {exc}") from exc
    last = None
    for family, type_, proto, _, sockaddr in infos:
        sock = socket.socket(family, type_, proto)
        sock.setblocking(False)
        try:
            rc = sock.connect_ex(sockaddr)
            if rc not in (0, errno.EINPROGRESS, errno.EWOULDBLOCK):
                raise OSError(rc, os.strerror(rc))
            if rc:
                instance.wait_fileno(sock.fileno(), "w", timeout)
            rc = sock.getsockopt(socket.SOL_SOCKET, socket.SO_ERROR)
            if rc:
                raise OSError(rc, os.strerror(rc))
            set_nodelay(sock)
            return sock
        except (Cancelled, WasiError):
            sock.close()
            raise Cancelled("dial cancelled")
        except (OSError, TimeoutError) as exc:
            sock.close()
            last = exc
    raise WaterError(ErrorCode.NETWORK_UNREACHABLE, f"connect {format_addr(host, port)}: {last}")


def host_dial_impl(instance, addr) -> int:
    """Connect outward on the guest's behalf; returns the new descriptor."""
    host, port = parse_addr(addr)
    sock = _connect(instance, host, port, instance.config.dial_timeout)
    try:
        fd = instance.table.push(SocketDescriptor(sock))
    except WasiError as exc:
        sock.close()
        raise WaterError(ErrorCode.FAILED_IO, "instance closed") from exc
    instance.log_host(f"dialed {format_addr(host, port)} as fd {fd}", level=3)
    return fd


def push_accepted(instance, sock) -> int:
    """Insert an accepted TCP stream into the guest's table."""
    if sock.fileno() < 0:
        raise WaterError(ErrorCode.FAILED_IO, "connection already closed")
    set_nodelay(sock)
    try:
        return instance.table.push(SocketDescriptor(sock))
    except WasiError as exc:
        raise WaterError(ErrorCode.FAILED_IO, "instance closed") from exc


def make_internal_channel(instance, shuttle_buffer_bytes):
    """Create the caller<->guest pipe; returns (caller end, guest descriptor)."""
    pair = PipePair(shuttle_buffer_bytes)
    pair.add_listener(instance.waker.poke)
    try:
        fd = instance.table.push(PipeDescriptor(pair.b, kind="internal"))
    except WasiError as exc:
        raise WaterError(ErrorCode.FAILED_IO, "instance closed") from exc
    instance.caller_ends.append(pair.a)
    return pair.a, fd


def pull_config_impl(instance) -> int:
    if instance.phase == "created":
        raise WaterError(ErrorCode.NOT_INITIALIZED, "config requested before init")
    return instance.table.push(BytesDescriptor(instance.config.config_blob))


def host_log_impl(instance, level, message: bytes) -> int:
    try:
        text = bytes(message).decode("utf-8")
    except UnicodeDecodeError:
        return ErrorCode.INVALID_ARGUMENT
    if not 0 <= level <= 3:
        return ErrorCode.INVALID_ARGUMENT
    if level <= instance.config.log_level:
        instance.emit_log(level, text)
    return ErrorCode.OK


class HostImports:
    """Guest-callable wrappers: raw pointers in, i32 codes out."""

    def __init__(self, instance):
        self.inst = instance

    def bind(self, name):
        impl = getattr(self, name)

        def call(*args):
            self.inst.begin_host_call()
            return impl(*args)
        return call

    def host_dial(self, ptr, length):
        try:
            raw = self.inst.read_memory(ptr, length)
            return host_dial_impl(self.inst, raw)
        except WaterError as exc:
            self.inst.log_host(f"host_dial failed: {exc}", level=1)
            return exc.code
        except WasiError:
            return ErrorCode.INVALID_ARGUMENT

    def host_defer(self):
        return ErrorCode.OK

    def pull_config(self):
        try:
            return pull_config_impl(self.inst)
        except WaterError as exc:
            return exc.code
        except WasiError:
            return ErrorCode.FAILED_IO

    def host_log(self, level, ptr, length):
        try:
            raw = self.inst.read_memory(ptr, length)
        except Exception:  # noqa: BLE001 - out-of-bounds pointer
            return ErrorCode.INVALID_ARGUMENT
        return host_log_impl(self.inst, level, raw)

"""Shared plumbing for the test suite: stream adapters, fd audits, servers."""

import os
import random
import socket
import threading
import time

from water.bench import EchoServer  # noqa: F401 - re-exported for tests
from water.runtime import VirtualConn
from water.transports.oracle import OracleStream


def open_fds():
    return len(os.listdir("/proc/self/fd"))


def wait_until(pred, timeout=5.0, interval=0.01):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if pred():
            return True
        time.sleep(interval)
    return pred()


def fds_back_to(baseline, timeout=5.0):
    return wait_until(lambda: open_fds() <= baseline, timeout)


class Stream:
    """Uniform send/recv/half-close over a VirtualConn, OracleStream or socket."""

    def __init__(self, obj):
        self.obj = obj

    def send(self, data):
        if isinstance(self.obj, VirtualConn):
            self.obj.write(data)
        else:
            self.obj.sendall(data)

    def recv(self, n=65536):
        if isinstance(self.obj, (VirtualConn, OracleStream)):
            return self.obj.read(n) if isinstance(self.obj, VirtualConn) else self.obj.recv(n)
        return self.obj.recv(n)

    def close_write(self):
        if isinstance(self.obj, VirtualConn):
            self.obj.close_write()
        elif isinstance(self.obj, OracleStream):
            self.obj.shutdown_write()
        else:
            self.obj.shutdown(socket.SHUT_WR)

    def close(self):
        self.obj.close()

    def read_all(self):
        buf = bytearray()
        while True:
            chunk = self.recv()
            if not chunk:
                return bytes(buf)
            buf += chunk


def send_chunked(stream, data, rng=None, max_chunk=65536):
    view = memoryview(data)
    off = 0
    while off < len(view):
        n = rng.randint(1, max_chunk) if rng else max_chunk
        stream.send(bytes(view[off:off + n]))
        off += n
    stream.close_write()


def exchange(a, b, data_ab, data_ba, rng=None, max_chunk=65536, timeout=30):
    """Send both payloads concurrently with half-close; return (b got, a got).

    Either side may be a zero-argument callable producing the stream, for
    peers that only exist once the other side has spoken (an aead accept).
    """
    lock = threading.Lock()
    cache = {}

    def side(key, obj):
        with lock:
            if key not in cache:
                cache[key] = Stream(obj() if callable(obj) else obj)
            return cache[key]

    # one rng per sender thread; random.Random is not safe to share
    rng_a = random.Random(rng.random()) if rng else None
    rng_b = random.Random(rng.random()) if rng else None
    results = {}
    errors = []

    def run(key, fn):
        try:
            results[key] = fn()
        except BaseException as exc:  # noqa: BLE001 - surfaced below
            errors.append(exc)

    threads = [
        threading.Thread(target=run, args=("wa", lambda: send_chunked(side("a", a), data_ab,
                                                                     rng_a, max_chunk))),
        threading.Thread(target=run, args=("wb", lambda: send_chunked(side("b", b), data_ba,
                                                                     rng_b, max_chunk))),
        threading.Thread(target=run, args=("rb", lambda: side("b", b).read_all())),
        threading.Thread(target=run, args=("ra", lambda: side("a", a).read_all())),
    ]
    for t in threads:
        t.daemon = True
        t.start()
    for t in threads:
        t.join(timeout)
    if errors:
        raise errors[0]
    if any(t.is_alive() for t in threads):
        raise TimeoutError("exchange did not finish")
    return results["rb"], results["ra"]


def accept_in_thread(listener, **kw):
    """Start listener.accept() in a thread; returns (thread, box) with box['conn'] or box['error']."""
    box = {}

    def run():
        try:
            box["conn"] = listener.accept(**kw)
        except BaseException as exc:  # noqa: BLE001
            box["error"] = exc

    t = threading.Thread(target=run, daemon=True)
    t.start()
    return t, box


def tcp_server():
    """A bound listening socket on loopback and its address string."""
    s = socket.create_server(("127.0.0.1", 0))
    return s, "127.0.0.1:%d" % s.getsockname()[1]


def closed_port():
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return "127.0.0.1:%d" % port


class Tap:
    """Loopback TCP forwarder that records every byte in both directions."""

    def __init__(self, target):
        self.target = target
        self.seen = bytearray()
        self._lock = threading.Lock()
        self.server, self.addr = tcp_server()
        threading.Thread(target=self._run, daemon=True).start()

    def _run(self):
        while True:
            try:
                a, _ = self.server.accept()
            except OSError:
                return
            host, port = self.target.rsplit(":", 1)
            b = socket.create_connection((host, int(port)))
            for src, dst in ((a, b), (b, a)):
                threading.Thread(target=self._pump, args=(src, dst), daemon=True).start()

    def _pump(self, src, dst):
        try:
            while True:
                data = src.recv(65536)
                if not data:
                    break
                with self._lock:
                    self.seen += data
                dst.sendall(data)
            dst.shutdown(socket.SHUT_WR)
        except OSError:
            pass

    def close(self):
        self.server.close()

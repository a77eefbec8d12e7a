"""Loopback latency/throughput/crypto measurements.

Every transport is measured through a relay in front of a local server
(client -> relay -> echo or sink); ``raw`` connects straight to the server
and is the baseline for the same run.
"""

from __future__ import annotations

import os
import socket
import statistics
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass

from ..abi import ErrorCode, WaterError
from ..bridge.host import set_nodelay
from ..runtime import InstanceConfig, Relay
from ..transports import load_bundled
from ..transports.oracle import MAX_PAYLOAD, Direction, derive_psk, derive_subkey, oracle_client
from .report import BASELINE, TABLE_SIZES, BenchReport, CryptoResult, Measurement

BENCH_TRANSPORTS = (BASELINE, "plain", "reverse", "aead")
MIN_ITERATIONS = 100
MIN_WARMUP = 10
MIN_DURATION = 5.0
BENCH_PASSWORD = "water-bench"


# -- local servers ------------------------------------------------------

class _Server:
    def __init__(self):
        self._sock = socket.create_server(("127.0.0.1", 0))
        self._closing = False
        self._conns = set()
        self._lock = threading.Lock()
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()

    @property
    def addr(self):
        host, port = self._sock.getsockname()[:2]
        return f"{host}:{port}"

    def _accept_loop(self):
        while not self._closing:
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            set_nodelay(conn)
            with self._lock:
                self._conns.add(conn)
            threading.Thread(target=self._run, args=(conn,), daemon=True).start()

    def _run(self, conn):
        try:
            self.handle(conn)
        except OSError:
            pass
        finally:
            with self._lock:
                self._conns.discard(conn)
            conn.close()

    def handle(self, conn):
        raise NotImplementedError

    def close(self):
        self._closing = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
        with self._lock:
            conns = list(self._conns)
        for c in conns:
            try:
                c.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
        self._thread.join(2)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class EchoServer(_Server):
    def handle(self, conn):
        buf = bytearray(65536)
        while True:
            n = conn.recv_into(buf)
            if not n:
                return
            conn.sendall(memoryview(buf)[:n])


class SinkServer(_Server):
    """Counts bytes per connection; ``results`` gets (bytes, first_ts, last_ts)."""

    def __init__(self):
        self.results = []
        self._done = threading.Condition()
        super().__init__()

    def handle(self, conn):
        buf = bytearray(1 << 18)
        total, first, last = 0, None, None
        while True:
            n = conn.recv_into(buf)
            if not n:
                break
            now = time.perf_counter()
            if first is None:
                first = now
            total += n
            last = now
        with self._done:
            self.results.append((total, first, last))
            self._done.notify_all()

    def wait(self, count=1, timeout=60.0):
        with self._done:
            if not self._done.wait_for(lambda: len(self.results) >= count, timeout):
                raise WaterError(ErrorCode.FAILED_IO, "sink never saw end of stream")
            return self.results[count - 1]


# -- clients ------------------------------------------------------------

class RawClient:
    def __init__(self, addr):
        host, _, port = addr.rpartition(":")
        self.sock = socket.create_connection((host, int(port)))
        set_nodelay(self.sock)

    def sendall(self, data):
        self.sock.sendall(data)

    def recv_exactly(self, n):
        buf = bytearray(n)
        view = memoryview(buf)
        got = 0
        while got < n:
            k = self.sock.recv_into(view[got:])
            if not k:
                raise WaterError(ErrorCode.FAILED_IO, "peer closed during echo")
            got += k
        return bytes(buf)

    def shutdown_write(self):
        self.sock.shutdown(socket.SHUT_WR)

    def close(self):
        self.sock.close()


@contextmanager
def topology(transport, server_addr):
    """Yield a connect() for ``transport`` reaching ``server_addr``."""
    if transport not in BENCH_TRANSPORTS:
        raise WaterError(ErrorCode.INVALID_ARGUMENT, f"unknown transport {transport!r}")
    if transport == BASELINE:
        yield lambda: RawClient(server_addr)
        return
    blob = f"password={BENCH_PASSWORD}\n".encode() if transport == "aead" else b""
    relay = Relay(load_bundled(transport), InstanceConfig(blob, log_level=1),
                  remote=server_addr).start()
    try:
        if transport == "aead":
            yield lambda: oracle_client(relay.addr, BENCH_PASSWORD)
        else:
            yield lambda: RawClient(relay.addr)
    finally:
        relay.close()


# -- measurements -------------------------------------------------------

@dataclass(frozen=True)
class LatencyStats:
    size: int
    iterations: int
    min_us: float
    median_us: float
    p99_us: float


def _check_size(size):
    if int(size) <= 0:
        raise WaterError(ErrorCode.INVALID_ARGUMENT, "message size must be positive")


def percentile(samples, q):
    ordered = sorted(samples)
    k = min(len(ordered) - 1, max(0, round(q * (len(ordered) - 1))))
    return ordered[k]


def measure_latency(connect, size, iterations=MIN_ITERATIONS, warmup=MIN_WARMUP):
    """Ping-pong ``size`` bytes ``iterations`` times over one connection."""
    client = connect()
    try:
        msg = os.urandom(size)
        for _ in range(warmup):
            client.sendall(msg)
            client.recv_exactly(size)
        samples = []
        for _ in range(iterations):
            t0 = time.perf_counter()
            client.sendall(msg)
            client.recv_exactly(size)
            samples.append((time.perf_counter() - t0) * 1e6)
    finally:
        client.close()
    return LatencyStats(size, iterations, min(samples), statistics.median(samples),
                        percentile(samples, 0.99))


def bench_latency(transport, size, iterations=MIN_ITERATIONS, warmup=MIN_WARMUP) -> LatencyStats:
    _check_size(size)
    if iterations < MIN_ITERATIONS or warmup < MIN_WARMUP:
        raise WaterError(ErrorCode.INVALID_ARGUMENT,
                         f"need >= {MIN_ITERATIONS} iterations and >= {MIN_WARMUP} warmup echoes")
    with EchoServer() as echo, topology(transport, echo.addr) as connect:
        return measure_latency(connect, size, iterations, warmup)


def measure_throughput(connect, sink, size, duration):
    """Stream ``size``-byte messages for ``duration`` seconds; Mbps seen by the sink."""
    client = connect()
    msg = os.urandom(size)
    seen = len(sink.results)
    start = time.perf_counter()
    deadline = start + duration
    batch = max(1, 65536 // size)
    try:
        while time.perf_counter() < deadline:
            for _ in range(batch):
                client.sendall(msg)
        client.shutdown_write()
        total, _, last = sink.wait(seen + 1, timeout=duration + 60)
    finally:
        client.close()
    if not total:
        raise WaterError(ErrorCode.FAILED_IO, "no bytes reached the sink")
    return total * 8 / (last - start) / 1e6


def bench_throughput(transport, size, duration=MIN_DURATION) -> float:
    _check_size(size)
    if duration < MIN_DURATION:
        raise WaterError(ErrorCode.INVALID_ARGUMENT, f"duration must be >= {MIN_DURATION:g} s")
    with SinkServer() as sink, topology(transport, sink.addr) as connect:
        return measure_throughput(connect, sink, size, duration)


def bench_crypto(payload_size, repeat=None) -> CryptoResult:
    """Seal ``payload_size`` bytes natively and inside the guest framing code;
    seconds per payload (median over ``repeat`` runs)."""
    from ..transports.kat import GuestFraming

    if payload_size < 0:
        raise WaterError(ErrorCode.INVALID_ARGUMENT, "payload size must be >= 0")
    if payload_size == 0:
        return CryptoResult(0, 0, 0.0, 0.0)
    if repeat is None:
        repeat = 200 if payload_size <= MAX_PAYLOAD else 1
    password, salt = os.urandom(16), os.urandom(32)
    chunk = os.urandom(min(payload_size, MAX_PAYLOAD))
    frames = -(-payload_size // MAX_PAYLOAD)
    native = Direction(derive_subkey(derive_psk(password), salt))
    guest = GuestFraming(password, salt)
    guest.load(chunk)

    def native_once():
        left = payload_size
        while left:
            n = min(left, MAX_PAYLOAD)
            native.seal(n.to_bytes(2, "big"))
            native.seal(chunk[:n])
            left -= n

    def guest_once():
        if payload_size <= MAX_PAYLOAD:
            guest.seal(chunk)
        else:
            guest.seal_bulk(payload_size)

    def timed(fn):
        runs = []
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            runs.append(time.perf_counter() - t0)
        return statistics.median(runs)

    return CryptoResult(payload_size, frames, timed(native_once), timed(guest_once))


def run_sweep(transports=("plain",), sizes=TABLE_SIZES, iterations=MIN_ITERATIONS,
              warmup=MIN_WARMUP, duration=MIN_DURATION, crypto_sizes=(), progress=None):
    """Latency and throughput for the baseline plus ``transports`` at every size."""
    if duration < MIN_DURATION:
        raise WaterError(ErrorCode.INVALID_ARGUMENT, f"duration must be >= {MIN_DURATION:g} s")
    for size in sizes:
        _check_size(size)
    order = [BASELINE] + [t for t in transports if t != BASELINE]
    report = BenchReport(metadata={"duration_s": duration, "warmup": warmup,
                                   "iterations": iterations, "sizes": list(sizes),
                                   "transports": order})
    with EchoServer() as echo, SinkServer() as sink:
        for transport in order:
            with topology(transport, echo.addr) as to_echo, \
                    topology(transport, sink.addr) as to_sink:
                for size in sizes:
                    lat = measure_latency(to_echo, size, iterations, warmup)
                    mbps = measure_throughput(to_sink, sink, size, duration)
                    report.add(Measurement(transport, size, lat.median_us, mbps,
                                           lat.min_us, lat.p99_us))
                    if progress:
                        progress(transport, size, lat, mbps)
    for size in crypto_sizes:
        report.crypto.append(bench_crypto(size))
    return report

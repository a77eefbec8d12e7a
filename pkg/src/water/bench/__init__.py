"""Latency, throughput and crypto measurements plus table output."""

from .harness import (BENCH_TRANSPORTS, EchoServer, LatencyStats, SinkServer, bench_crypto,
                      bench_latency, bench_throughput, run_sweep)
from .report import (TABLE_SIZES, BenchReport, CryptoResult, Measurement, emit_table,
                     parse_csv)

__all__ = [
    "BENCH_TRANSPORTS", "BenchReport", "CryptoResult", "EchoServer", "LatencyStats",
    "Measurement", "SinkServer", "TABLE_SIZES", "bench_crypto", "bench_latency",
    "bench_throughput", "emit_table", "parse_csv", "run_sweep",
]

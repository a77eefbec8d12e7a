"""Benchmark results and their text/CSV renderings."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

TABLE_SIZES = (1, 64, 128, 256, 512, 768, 1024, 2048, 4096)
BASELINE = "raw"

CSV_FIELDS = ("transport", "size", "latency_us", "latency_min_us", "latency_p99_us",
              "throughput_mbps", "latency_delta_us", "throughput_ratio_pct")


@dataclass(frozen=True)
class Measurement:
    """One (transport, message size) cell: median latency plus throughput."""

    transport: str
    size: int
    latency_us: float
    throughput_mbps: float
    latency_min_us: float = 0.0
    latency_p99_us: float = 0.0


@dataclass(frozen=True)
class CryptoResult:
    payload_size: int
    frames: int
    native_s: float
    guest_s: float

    @property
    def slowdown(self):
        return self.guest_s / self.native_s if self.native_s > 0 else math.nan


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    crypto: list = field(default_factory=list)

    def add(self, m: Measurement):
        self.rows.append(m)

    def get(self, transport, size):
        for row in self.rows:
            if row.transport == transport and row.size == size:
                return row
        return None

    def sizes(self):
        return sorted({r.size for r in self.rows})

    def transports(self):
        seen = []
        for r in self.rows:
            if r.transport not in seen:
                seen.append(r.transport)
        if BASELINE in seen:
            seen.remove(BASELINE)
            seen.insert(0, BASELINE)
        return seen

    def latency_delta_us(self, row: Measurement):
        base = self.get(BASELINE, row.size)
        return None if base is None else row.latency_us - base.latency_us

    def throughput_ratio_pct(self, row: Measurement):
        base = self.get(BASELINE, row.size)
        if base is None or base.throughput_mbps <= 0:
            return None
        return 100.0 * row.throughput_mbps / base.throughput_mbps

    def all_finite_positive(self):
        for r in self.rows:
            for v in (r.latency_us, r.throughput_mbps):
                if not (math.isfinite(v) and v > 0):
                    return False
            if r.transport != BASELINE:
                ratio = self.throughput_ratio_pct(r)
                if ratio is None or not (math.isfinite(ratio) and ratio > 0):
                    return False
        return True

    def __eq__(self, other):
        if not isinstance(other, BenchReport):
            return NotImplemented
        return (self.rows == other.rows and self.metadata == other.metadata
                and self.crypto == other.crypto)


# -- cells --------------------------------------------------------------

def baseline_cell(latency_us, throughput_mbps) -> str:
    return f"{latency_us:.0f}us / {throughput_mbps:.0f}Mbps"


def delta_cell(delta_us, ratio_pct) -> str:
    # ratios above 100% are reported as measured, never clamped
    return f"{delta_us:+.0f}us / {ratio_pct:.1f}%"


def _cell(report, row):
    if row is None:
        return "-"
    if row.transport == BASELINE:
        return baseline_cell(row.latency_us, row.throughput_mbps)
    delta = report.latency_delta_us(row)
    ratio = report.throughput_ratio_pct(row)
    if delta is None or ratio is None:
        return f"{row.latency_us:.0f}us / {row.throughput_mbps:.0f}Mbps"
    return delta_cell(delta, ratio)


def _header(transport):
    return "Raw TCP (Baseline)" if transport == BASELINE else transport


def emit_text(report: BenchReport) -> str:
    transports = report.transports()
    header = ["Size(B)"] + [_header(t) for t in transports]
    table = [header]
    for size in report.sizes():
        table.append([str(size)] + [_cell(report, report.get(t, size)) for t in transports])
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in table]
    if report.crypto and not report.rows:
        lines = []
    if report.crypto:
        if lines:
            lines.append("")
        lines.append(emit_crypto_text(report.crypto))
    return "\n".join(lines) + "\n"


def _duration(seconds):
    if seconds >= 1.0:
        return f"~{seconds:.2f} s"
    return f"~{seconds * 1e6:.1f} us"


def emit_crypto_text(results) -> str:
    rows = [("Configuration", "Frames", "Native", "WASM")]
    for r in results:
        rows.append((f"CHACHA20_POLY1305 - {r.payload_size}B", str(r.frames),
                     _duration(r.native_s), _duration(r.guest_s)))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)


def emit_csv(report: BenchReport) -> str:
    out = io.StringIO()
    for key, value in report.metadata.items():
        out.write(f"# {key}={json.dumps(value)}\n")
    if report.crypto:
        out.write(f"# crypto={json.dumps([asdict(c) for c in report.crypto])}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for row in report.rows:
        delta = report.latency_delta_us(row)
        ratio = report.throughput_ratio_pct(row)
        writer.writerow([row.transport, row.size, repr(row.latency_us), repr(row.latency_min_us),
                         repr(row.latency_p99_us), repr(row.throughput_mbps),
                         "" if delta is None or row.transport == BASELINE else repr(delta),
                         "" if ratio is None or row.transport == BASELINE else repr(ratio)])
    return out.getvalue()


def parse_csv(text: str) -> BenchReport:
    report = BenchReport()
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            value = json.loads(value)
            if key == "crypto":
                report.crypto = [CryptoResult(**c) for c in value]
            else:
                report.metadata[key] = value
        elif line.strip():
            body.append(line)
    for rec in csv.DictReader(body):
        report.add(Measurement(rec["transport"], int(rec["size"]), float(rec["latency_us"]),
                               float(rec["throughput_mbps"]), float(rec["latency_min_us"]),
                               float(rec["latency_p99_us"])))
    return report


def emit_table(report: BenchReport, fmt="text") -> str:
    if fmt == "text":
        return emit_text(report)
    if fmt == "csv":
        return emit_csv(report)
    raise ValueError(f"unknown format {fmt!r}")

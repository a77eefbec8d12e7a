import math
import os
import re
import signal
import socket
import statistics
import subprocess
import sys
import threading

import pytest

from water import ErrorCode, WaterError
from water.bench import (TABLE_SIZES, BenchReport, CryptoResult, Measurement, bench_crypto,
                         bench_latency, bench_throughput, emit_table, parse_csv)
from water.bench.harness import percentile
from water.bench.report import delta_cell
from water.cli import main
from water.runtime import digest_of
from water.transports import bundled_path

from helpers import tcp_server


def _fixture_report():
    r = BenchReport(metadata={"duration_s": 5.0, "warmup": 10})
    r.add(Measurement("raw", 512, 26.0, 2210.0))
    r.add(Measurement("plain", 512, 382.0, 2210.0 * 0.828))
    return r


class TestReport:
    def test_table_cell(self):
        text = emit_table(_fixture_report())
        assert "+356us / 82.8%" in text
        assert "26us / 2210Mbps" in text

    def test_delta_cell_format(self):
        assert delta_cell(356, 82.8) == "+356us / 82.8%"
        assert delta_cell(-3, 104.25) == "-3us / 104.2%"

    def test_ratio_above_hundred_not_clamped(self):
        r = BenchReport()
        r.add(Measurement("raw", 1, 10.0, 6.0))
        r.add(Measurement("plain", 1, 12.0, 9.0))
        assert "150.0%" in emit_table(r)

    def test_empty_report(self):
        assert emit_table(BenchReport()) == "Size(B)\n"

    def test_csv_roundtrip(self):
        r = _fixture_report()
        r.crypto.append(CryptoResult(256, 1, 6e-6, 3.5e-5))
        assert parse_csv(emit_table(r, "csv")) == r

    def test_csv_row_per_cell(self):
        lines = [ln for ln in emit_table(_fixture_report(), "csv").splitlines()
                 if not ln.startswith("#")]
        assert len(lines) == 1 + 2

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            emit_table(BenchReport(), "xml")

    def test_finite_positive_check(self):
        r = _fixture_report()
        assert r.all_finite_positive()
        r.add(Measurement("aead", 512, math.nan, 1.0))
        assert not r.all_finite_positive()

    def test_table_sizes(self):
        assert TABLE_SIZES == (1, 64, 128, 256, 512, 768, 1024, 2048, 4096)

    def test_percentile(self):
        samples = list(range(1, 101))
        assert percentile(samples, 0.99) == 99
        assert percentile(samples, 0.0) == 1


class TestValidation:
    def test_latency_size_zero(self):
        with pytest.raises(WaterError) as err:
            bench_latency("raw", 0)
        assert err.value.code == ErrorCode.INVALID_ARGUMENT

    def test_latency_too_few_iterations(self):
        with pytest.raises(WaterError) as err:
            bench_latency("raw", 64, iterations=10)
        assert err.value.code == ErrorCode.INVALID_ARGUMENT

    def test_throughput_short_duration(self):
        with pytest.raises(WaterError) as err:
            bench_throughput("raw", 64, duration=1)
        assert err.value.code == ErrorCode.INVALID_ARGUMENT

    def test_unknown_transport(self):
        with pytest.raises(WaterError) as err:
            bench_latency("quic", 64)
        assert err.value.code == ErrorCode.INVALID_ARGUMENT


class TestMeasurements:
    def test_raw_latency_finite_positive(self):
        stats = bench_latency("raw", 512)
        assert 0 < stats.min_us <= stats.median_us <= stats.p99_us
        assert math.isfinite(stats.p99_us) and stats.iterations == 100

    def test_crypto_zero_bytes(self):
        r = bench_crypto(0)
        assert (r.payload_size, r.frames) == (0, 0)

    def test_crypto_small_payload(self):
        r = bench_crypto(256, repeat=50)
        assert r.frames == 1 and r.native_s > 0 and r.guest_s > 0
        assert "CHACHA20_POLY1305 - 256B" in emit_table(BenchReport(crypto=[r]))

    def test_raw_throughput_monotonic(self):
        sizes = (1, 64, 512, 4096)
        medians = [statistics.median(bench_throughput("raw", s, 5) for _ in range(3))
                   for s in sizes]
        assert all(m > 0 for m in medians)
        assert medians == sorted(medians), dict(zip(sizes, medians))


# -- command line ---------------------------------------------------------

def _water(*args, env=None, **kw):
    full_env = dict(os.environ, **(env or {}))
    return subprocess.run([sys.executable, "-m", "water", *args], capture_output=True,
                          env=full_env, timeout=120, **kw)


class TestCli:
    def test_inspect(self):
        out = _water("inspect", "--watm", "plain")
        assert out.returncode == 0
        text = out.stdout.decode()
        assert digest_of(bundled_path("plain").read_bytes()).hex() in text
        assert "roles=dial,listen,relay" in text

    def test_bad_pin(self):
        pin = digest_of(bundled_path("reverse").read_bytes()).hex()
        out = _water("inspect", "--watm", "plain", "--pin", pin)
        assert out.returncode == 2
        err = out.stderr.decode()
        assert "GENERAL" in err and pin in err
        assert digest_of(bundled_path("plain").read_bytes()).hex() in err

    def test_missing_file(self, tmp_path):
        assert main(["inspect", "--watm", str(tmp_path / "nope.wasm")]) == 2

    def test_not_wasm(self, tmp_path):
        path = tmp_path / "junk.wasm"
        path.write_bytes(os.urandom(64))
        assert main(["inspect", "--watm", str(path)]) == 2

    @pytest.mark.parametrize("argv", [["bench", "latency", "--size", "0"],
                                      ["bench", "throughput", "--duration", "1"],
                                      ["frobnicate"],
                                      ["run", "--role", "relay", "--watm", "plain"]])
    def test_usage_errors(self, argv):
        if argv[0] == "frobnicate":
            assert _water(*argv).returncode == 1
        else:
            assert main(argv) == 1

    def test_bad_log_level(self):
        assert _water("inspect", "--watm", "plain", env={"WATER_LOG": "loud"}).returncode == 1

    def test_dial_reverse_through_stdin(self):
        srv, addr = tcp_server()
        box = {}

        def peer():
            conn, _ = srv.accept()
            conn.settimeout(10)
            buf = b""
            while len(buf) < 4:
                chunk = conn.recv(4)
                if not chunk:
                    break
                buf += chunk
            box["got"] = buf
            conn.close()

        t = threading.Thread(target=peer, daemon=True)
        t.start()
        out = _water("run", "--role", "dial", "--watm", "reverse", "--remote", addr,
                     input=b"ABCD", env={"WATER_LOG": "debug"})
        t.join(10)
        srv.close()
        assert out.returncode == 0
        assert box["got"] == b"DCBA"
        line = re.compile(r"^\S+T\S+ (error|warn|info|debug) \S+ .+$")
        logged = out.stderr.decode().splitlines()
        assert any(" debug " in ln and line.match(ln) for ln in logged)

    def test_water_log_error_silences_debug(self):
        srv, addr = tcp_server()
        threading.Thread(target=lambda: srv.accept()[0].close(), daemon=True).start()
        out = _water("run", "--role", "dial", "--watm", "plain", "--remote", addr,
                     input=b"", env={"WATER_LOG": "error"})
        srv.close()
        assert out.returncode == 0
        assert " debug " not in out.stderr.decode()

    def test_relay_runs_until_sigint(self):
        srv, addr = tcp_server()
        proc = subprocess.Popen([sys.executable, "-m", "water", "run", "--role", "relay",
                                 "--watm", "plain", "--local", "127.0.0.1:0", "--remote", addr],
                                stderr=subprocess.PIPE)
        try:
            first = proc.stderr.readline().decode()
            m = re.search(r"relaying (\S+) ->", first)
            assert m, first
            host, port = m.group(1).rsplit(":", 1)
            c = socket.create_connection((host, int(port)), timeout=5)
            c.sendall(b"via cli")
            peer, _ = srv.accept()
            peer.settimeout(5)
            assert peer.recv(16) == b"via cli"
            peer.close()
            c.close()
            proc.send_signal(signal.SIGINT)
            assert proc.wait(10) == 0
        finally:
            if proc.poll() is None:
                proc.kill()
            proc.stderr.close()
            srv.close()

    def test_bench_crypto_csv(self, capsys):
        assert main(["bench", "crypto", "--size", "256", "--format", "csv"]) == 0
        report = parse_csv(capsys.readouterr().out)
        assert report.crypto[0].payload_size == 256

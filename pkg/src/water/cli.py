"""``water`` command line: run endpoints from a WATM file and benchmark transports.

Exit codes: 0 success, 1 usage, 2 setup failure, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import signal
import socket
import sys
import threading
from pathlib import Path

from .abi import ErrorCode, WaterError
from .bench import BENCH_TRANSPORTS, TABLE_SIZES, BenchReport, Measurement, emit_table
from .bench import harness
from .bridge.host import parse_addr, set_nodelay
from .runtime import Dialer, InstanceConfig, Listener, Relay, load_image_file
from .runtime import logs
from .transports import DIAGNOSTICS, TRANSPORTS, bundled_path

EXIT_OK, EXIT_USAGE, EXIT_SETUP, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("water.cli")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser():
    p = _Parser(prog="water",
                description="Run endpoints from a WATM file and benchmark transports.")
    p.add_argument("--log-level", default=None, help="error|warn|info|debug (WATER_LOG overrides)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a dial, listen or relay endpoint")
    run.add_argument("--watm", required=True, help="path to a .wasm file or a bundled name")
    run.add_argument("--config", help="config file passed to the guest verbatim")
    run.add_argument("--role", required=True, choices=("dial", "listen", "relay"))
    run.add_argument("--local", help="listen address for listen/relay, e.g. :7000")
    run.add_argument("--remote", help="remote address for dial/relay (forward target for listen)")
    run.add_argument("--pin", help="expected SHA-256 of the .wasm file, hex")
    run.add_argument("--buffer", type=_positive_int, default=4096, help="shuttle buffer bytes")

    info = sub.add_parser("inspect", help="validate a WATM and print its digest and roles")
    info.add_argument("--watm", required=True)
    info.add_argument("--pin")

    bench = sub.add_parser("bench", help="latency / throughput / crypto measurements")
    bench.add_argument("kind", choices=("latency", "throughput", "crypto", "sweep"))
    bench.add_argument("--transport", default="plain", choices=BENCH_TRANSPORTS)
    bench.add_argument("--transports", default="plain",
                       help="comma-separated transports for sweep (baseline always included)")
    bench.add_argument("--size", type=int, default=512)
    bench.add_argument("--sizes", default=",".join(map(str, TABLE_SIZES)),
                       help="comma-separated message sizes for sweep")
    bench.add_argument("--iters", type=int, default=harness.MIN_ITERATIONS)
    bench.add_argument("--warmup", type=int, default=harness.MIN_WARMUP)
    bench.add_argument("--duration", type=float, default=harness.MIN_DURATION)
    bench.add_argument("--format", default="text", choices=("text", "csv"))
    return p


# -- helpers ------------------------------------------------------------

def resolve_watm(spec):
    path = Path(spec)
    if path.exists():
        return path
    if spec in TRANSPORTS + DIAGNOSTICS:
        return bundled_path(spec)
    raise WaterError(ErrorCode.INVALID_ARGUMENT, f"no such WATM file: {spec}")


def _read_config(path):
    if not path:
        return b""
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise WaterError(ErrorCode.INVALID_CONFIG, f"cannot read config: {exc}") from exc


def _need(args, *names):
    for name in names:
        if not getattr(args, name):
            raise UsageError(f"--role {args.role} needs --{name}")


def _pump(src_read, dst_write, on_eof):
    try:
        while True:
            chunk = src_read()
            if not chunk:
                break
            dst_write(chunk)
    except (OSError, WaterError) as exc:
        log.debug("pump stopped: %s", exc, extra={"instance": "-"})
    finally:
        on_eof()


def _bridge_conn_socket(conn, sock):
    set_nodelay(sock)
    up = threading.Thread(target=_pump, args=(conn.read, sock.sendall,
                                              lambda: _shutdown(sock)), daemon=True)
    up.start()
    _pump(lambda: sock.recv(65536), conn.write, conn.close_write)
    up.join()
    sock.close()
    conn.close()


def _shutdown(sock):
    try:
        sock.shutdown(socket.SHUT_WR)
    except OSError:
        pass


def _echo(conn):
    _pump(conn.read, conn.write, conn.close_write)
    conn.close()


# -- commands -----------------------------------------------------------

def cmd_run(args, stdin=None, stdout=None):
    stdin = stdin or sys.stdin.buffer
    stdout = stdout or sys.stdout.buffer
    image = load_image_file(resolve_watm(args.watm), args.pin)
    config = InstanceConfig(_read_config(args.config), shuttle_buffer_bytes=args.buffer,
                            log_level=args.log_level_num)

    if args.role == "dial":
        dialer = Dialer(image, config)
        conn = dialer.dial(args.remote) if args.remote else dialer.dial()

        def feed():
            _pump(lambda: stdin.read1(65536) if hasattr(stdin, "read1") else stdin.read(65536),
                  conn.write, conn.close_write)

        threading.Thread(target=feed, daemon=True).start()
        try:
            for chunk in conn:
                stdout.write(chunk)
                stdout.flush()
        except WaterError as exc:
            print(f"water: {exc.name}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        conn.close()
        return EXIT_OK

    if args.role == "listen":
        _need(args, "local")
        listener = Listener(image, config, local=args.local)
        _install_stop(listener.cancel)
        print(f"listening on {listener.addr}", file=sys.stderr)
        for conn in listener:
            if args.remote:
                host, port = parse_addr(args.remote)
                try:
                    sock = socket.create_connection((host, port))
                except OSError as exc:
                    log.warning("forward to %s failed: %s", args.remote, exc,
                                extra={"instance": conn.id})
                    conn.cancel()
                    continue
                threading.Thread(target=_bridge_conn_socket, args=(conn, sock), daemon=True).start()
            else:
                threading.Thread(target=_echo, args=(conn,), daemon=True).start()
        listener.close()
        return EXIT_OK

    _need(args, "local", "remote")
    relay = Relay(image, config, local=args.local, remote=args.remote)
    _install_stop(relay.cancel)
    print(f"relaying {relay.addr} -> {args.remote}", file=sys.stderr)
    relay.run()
    relay.close()
    return EXIT_OK


def _install_stop(fn):
    if threading.current_thread() is not threading.main_thread():
        return

    def handler(signum, frame):
        fn()

    signal.signal(signal.SIGINT, handler)
    signal.signal(signal.SIGTERM, handler)


def cmd_inspect(args):
    path = resolve_watm(args.watm)
    image = load_image_file(path, args.pin)
    print(f"file: {path}")
    print(image.manifest(), end="")
    print(f"roles={','.join(image.capabilities.roles())}")
    return EXIT_OK


def _sizes(text):
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad size list {text!r}") from None
    return sizes


def cmd_bench(args, out=None):
    out = out or sys.stdout
    if args.kind == "latency":
        base = harness.bench_latency("raw", args.size, args.iters, args.warmup)
        report = BenchReport(metadata={"iterations": args.iters, "warmup": args.warmup})
        report.add(Measurement("raw", args.size, base.median_us, float("nan"),
                               base.min_us, base.p99_us))
        lines = [f"raw: min {base.min_us:.1f}us median {base.median_us:.1f}us "
                 f"p99 {base.p99_us:.1f}us"]
        if args.transport != "raw":
            st = harness.bench_latency(args.transport, args.size, args.iters, args.warmup)
            report.add(Measurement(args.transport, args.size, st.median_us, float("nan"),
                                   st.min_us, st.p99_us))
            lines.append(f"{args.transport}: min {st.min_us:.1f}us median {st.median_us:.1f}us "
                         f"p99 {st.p99_us:.1f}us ({st.median_us - base.median_us:+.0f}us)")
        out.write(emit_table(report, "csv") if args.format == "csv" else "\n".join(lines) + "\n")
        return EXIT_OK

    if args.kind == "throughput":
        base = harness.bench_throughput("raw", args.size, args.duration)
        report = BenchReport(metadata={"duration_s": args.duration})
        report.add(Measurement("raw", args.size, float("nan"), base))
        lines = [f"raw: {base:.1f} Mbps"]
        if args.transport != "raw":
            mbps = harness.bench_throughput(args.transport, args.size, args.duration)
            report.add(Measurement(args.transport, args.size, float("nan"), mbps))
            lines.append(f"{args.transport}: {mbps:.1f} Mbps ({100 * mbps / base:.1f}%)")
        out.write(emit_table(report, "csv") if args.format == "csv" else "\n".join(lines) + "\n")
        return EXIT_OK

    if args.kind == "crypto":
        result = harness.bench_crypto(args.size)
        report = BenchReport(crypto=[result])
        out.write(emit_table(report, args.format))
        return EXIT_OK

    transports = [t.strip() for t in args.transports.split(",") if t.strip()]
    for t in transports:
        if t not in BENCH_TRANSPORTS:
            raise UsageError(f"unknown transport {t!r}")

    def progress(transport, size, lat, mbps):
        log.info("%s %dB: %.1fus %.1fMbps", transport, size, lat.median_us, mbps,
                 extra={"instance": "bench"})

    report = harness.run_sweep(transports, _sizes(args.sizes), args.iters, args.warmup,
                               args.duration, crypto_sizes=(256,), progress=progress)
    out.write(emit_table(report, args.format))
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        level = os.environ.get("WATER_LOG") or args.log_level or "info"
        args.log_level_num = logs.level_from_name(level)
    except ValueError as exc:
        print(f"water: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logs.configure(args.log_level_num)

    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "inspect":
            return cmd_inspect(args)
        return cmd_bench(args)
    except UsageError as exc:
        print(f"water: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except WaterError as exc:
        print(f"water: {exc.name}: {exc}", file=sys.stderr)
        if exc.code == ErrorCode.INVALID_ARGUMENT and args.command == "bench":
            return EXIT_USAGE
        return EXIT_SETUP
    except KeyboardInterrupt:
        return EXIT_OK
    except OSError as exc:
        print(f"water: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

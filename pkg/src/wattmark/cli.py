"""Command-line entry points.

Exit codes: 0 success, 1 usage error, 2 data error. Failures print one
machine-readable line to stderr: `err <Code> <message>`.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from . import daemon as daemon_mod
from . import sampler as sampler_mod
from .accounting import import_records, records_by_name, session_record
from .errors import WattmarkError
from .greeness import (
    DEFAULT_GRID_POINTS,
    crossover,
    curve,
    format_curves,
    format_regions,
    greeness_value,
    log_grid,
    winner_regions,
)
from .session import list_sessions, load_session, write_trace
from .telemetry import parse_source_spec

USAGE_EXIT = 1
DATA_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"err UsageError {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _parse_gpus(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise ValueError(f"bad gpu list {text!r}; expected e.g. 0,1") from None


def _parse_mui(text: str, points: int):
    """A single value, or lo:hi expanded to a log-spaced grid."""
    if ":" in text:
        lo_s, hi_s = text.split(":", 1)
        return log_grid(float(lo_s), float(hi_s), points)
    return [float(text)]


def _write_out(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as f:
            f.write(text)


def _cmd_record(args) -> int:
    config = sampler_mod.SamplerConfig(
        source=parse_source_spec(args.source),
        device_set=_parse_gpus(args.gpus),
        rate_s=args.rate)
    handle = sampler_mod.start(config)
    time.sleep(args.duration)
    trace = handle.stop()
    write_trace(trace, args.out)
    print(f"trace={args.out} samples={len(trace.samples)} "
          f"polls={handle.polls} dropped={handle.dropped}")
    return 0


def _cmd_analyze(args) -> int:
    session_id = args.id
    if session_id is None:
        ids = list_sessions(args.session)
        if len(ids) != 1:
            print(f"err SessionNotFound store has {len(ids)} sessions; pass --id",
                  file=sys.stderr)
            return DATA_EXIT
        session_id = ids[0]
    session = load_session(args.session, session_id)
    record = session_record(session, args.acc)
    g = greeness_value(record, args.mui, args.tau)
    print(f"session={session.session_id}")
    print(f"method={record.method_name}")
    print(f"type={record.algorithm_type.value}")
    print(f"tec_wh={record.tec_wh!r}")
    print(f"iec_wh={record.iec_wh!r}")
    print(f"acc_pct={record.acc_pct!r}")
    print(f"g(mui={args.mui!r},tau={args.tau!r})={g!r}")
    return 0


def _cmd_compare(args) -> int:
    records = import_records(args.methods)
    grid = _parse_mui(args.mui, args.points)
    curves = [curve(r, args.tau, grid) for r in records]
    _write_out(format_curves(curves), args.out)
    return 0


def _cmd_crossover(args) -> int:
    by_name = records_by_name(import_records(args.methods))
    try:
        rec_a, rec_b = by_name[args.a], by_name[args.b]
    except KeyError as e:
        print(f"err SessionNotFound method {e.args[0]!r} not in table", file=sys.stderr)
        return DATA_EXIT
    result = crossover(rec_a, rec_b, args.tau)
    star = "none" if result.mui_star is None else repr(result.mui_star)
    print(f"a={result.method_a} b={result.method_b} mui_star={star} "
          f"winner_below={result.winner_below} winner_above={result.winner_above}")
    return 0


def _cmd_regions(args) -> int:
    records = import_records(args.methods)
    lo_s, _, hi_s = args.mui.partition(":")
    if not hi_s:
        raise ValueError(f"--mui must be a lo:hi interval, got {args.mui!r}")
    regions = winner_regions(records, args.tau, (float(lo_s), float(hi_s)))
    _write_out(format_regions(regions), args.out)
    return 0


def _cmd_serve(args) -> int:
    socket_path = args.socket or os.environ.get(daemon_mod.SOCKET_ENV)
    if not socket_path:
        raise ValueError(f"--socket or ${daemon_mod.SOCKET_ENV} required")
    config = daemon_mod.DaemonConfig(
        socket_path=socket_path,
        sampler=sampler_mod.SamplerConfig(
            source=parse_source_spec(args.source),
            device_set=_parse_gpus(args.gpus),
            rate_s=args.rate),
        store_path=args.store,
        trace_dir=args.trace_dir)
    try:
        daemon_mod.serve(config)
    except KeyboardInterrupt:
        pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wattmark",
                     description="GPU energy profiling and greeness analytics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("record", help="sample a source and write a trace file")
    p.add_argument("--source", required=True,
                   help="nvidia-smi | replay:<path> | synthetic:<shape>:<params>")
    p.add_argument("--rate", type=float, default=0.1, help="seconds between polls")
    p.add_argument("--gpus", default="0", help="comma-separated device indices")
    p.add_argument("--duration", type=float, required=True, help="seconds to sample")
    p.add_argument("--out", required=True, help="trace file to write")
    p.set_defaults(func=_cmd_record)

    p = sub.add_parser("analyze", help="print TEC/IEC and greeness for a stored session")
    p.add_argument("--session", required=True, help="session store file")
    p.add_argument("--id", default=None, help="session id (optional if store has one)")
    p.add_argument("--acc", type=float, required=True, help="accuracy percentage")
    p.add_argument("--mui", type=float, default=5e8, help="usage intensity to evaluate")
    p.add_argument("--tau", type=float, default=2.0)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("compare", help="greeness curves for a methods table")
    p.add_argument("--methods", required=True, help="methods table (csv)")
    p.add_argument("--tau", type=float, default=2.0)
    p.add_argument("--mui", default="1e6:1e10", help="grid lo:hi, or one value")
    p.add_argument("--points", type=int, default=DEFAULT_GRID_POINTS)
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("crossover", help="usage intensity where two methods tie")
    p.add_argument("--methods", required=True)
    p.add_argument("--a", required=True, help="first method name")
    p.add_argument("--b", required=True, help="second method name")
    p.add_argument("--tau", type=float, default=2.0)
    p.set_defaults(func=_cmd_crossover)

    p = sub.add_parser("regions", help="winner regions over a usage interval")
    p.add_argument("--methods", required=True)
    p.add_argument("--tau", type=float, default=2.0)
    p.add_argument("--mui", default="1e6:1e10", help="interval lo:hi")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_regions)

    p = sub.add_parser("serve", help="run the control daemon")
    p.add_argument("--socket", default=None,
                   help=f"socket path (default ${daemon_mod.SOCKET_ENV})")
    p.add_argument("--source", required=True)
    p.add_argument("--rate", type=float, default=0.1)
    p.add_argument("--gpus", default="0")
    p.add_argument("--store", required=True, help="session store file")
    p.add_argument("--trace-dir", default=None)
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except WattmarkError as e:
        print(f"err {e.code} {e}", file=sys.stderr)
        return DATA_EXIT
    except ValueError as e:
        print(f"err UsageError {e}", file=sys.stderr)
        return USAGE_EXIT
    except OSError as e:
        print(f"err IoError {e}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())

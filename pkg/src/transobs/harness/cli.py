"""Command line: certify, verify, observe, trace-export, reconstruct."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from ..carleman import QuadratureError
from ..transport import TransportError
from . import pipeline
from .config import ConfigError, load_scenario
from .report import VerificationReport, emit_report, fmt, render


def _s_grid(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or not all(v > 0 and math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("s values must be positive and finite")
    return vals


def _point(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x_1,..,x_d,t, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="transobs", description="Certify and stress-test transport observability bounds.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("config", help="scenario file (key = value)")
        sp.add_argument("--out", help="output directory (default: output.dir of the scenario)")
        sp.add_argument("--level", type=int, help="quadrature level L (8*2^L nodes per panel)")
        return sp

    add("certify", "build the admissibility certificate")
    v = add("verify", "run identity, Carleman, energy and pointwise checks")
    v.add_argument("--s-grid", type=_s_grid, help="comma-separated s values")
    v.add_argument("--force", action="store_true", help="run on an infeasible certificate (diagnostic)")
    v.add_argument("--workers", type=int, default=1)
    o = add("observe", "estimate the observability constant")
    o.add_argument("--force", action="store_true", help="estimate without a feasible certificate (diagnostic)")
    o.add_argument("--workers", type=int, default=1)
    t = add("trace-export", "write the boundary trace of one ensemble profile as CSV")
    t.add_argument("--profile", type=int, default=0)
    r = add("reconstruct", "recover u(x, t) from boundary data along the characteristic")
    r.add_argument("--at", type=_point, required=True, help="x_1,..,x_d,t")
    r.add_argument("--trace", help="trace CSV to use instead of the closed-form trace")
    r.add_argument("--profile", type=int, default=0)
    return p


def _out_dir(args, scn) -> Path | None:
    d = args.out or scn.output_dir
    return Path(d) if d else None


def _finish(report: VerificationReport, args, scn, code: int) -> int:
    out = _out_dir(args, scn)
    if out is not None:
        emit_report(report, out)
    sys.stdout.write(render(report)["summary.txt"])
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scn = load_scenario(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return pipeline.EXIT_CONFIG
    if args.level is not None and not 0 <= args.level <= 6:
        print("config error: --level must lie in 0..6", file=sys.stderr)
        return pipeline.EXIT_CONFIG
    try:
        if args.command == "certify":
            res = pipeline.run_certify(scn)
            report = VerificationReport(scn.name, scn.mode, certificate=res.as_dict())
            if res.error:
                report.notes.append(res.error)
            elif res.certificate.diagnostics:
                report.notes.extend(res.certificate.diagnostics)
            return _finish(report, args, scn, res.exit_code)
        if args.command == "verify":
            report, code = pipeline.run_verify(scn, args.force, args.level, args.s_grid, args.workers)
            return _finish(report, args, scn, code)
        if args.command == "observe":
            report, code = pipeline.estimate_observability_constant(scn, args.level, args.force, args.workers)
            return _finish(report, args, scn, code)
        if args.command == "trace-export":
            out = _out_dir(args, scn) or Path(".")
            out.mkdir(parents=True, exist_ok=True)
            path = out / f"trace_profile{args.profile}.csv"
            trace = pipeline.export_trace(scn, path, args.profile, args.level)
            print(f"wrote {path} ({trace.values.size} nodes, ||g|| = {fmt(trace.norm())})")
            return pipeline.EXIT_OK
        if args.command == "reconstruct":
            d = scn.domain.dim
            if len(args.at) != d + 1:
                print(f"config error: --at needs {d + 1} numbers (x_1..x_{d}, t)", file=sys.stderr)
                return pipeline.EXIT_CONFIG
            value, exact = pipeline.reconstruct(scn, args.at[:d], args.at[d], args.trace, args.profile, args.level)
            print(f"reconstructed = {'uncovered' if value is None else fmt(value)}")
            print(f"exact = {fmt(exact)}")
            return pipeline.EXIT_OK
    except (QuadratureError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return pipeline.EXIT_NUMERICAL
    except (TransportError, IndexError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return pipeline.EXIT_CONFIG
    return pipeline.EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

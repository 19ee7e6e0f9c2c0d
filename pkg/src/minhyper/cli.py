"""Command-line front end.

Subcommands::

    minhyper verify <config> [--json PATH] [--csv PATH]
    minhyper ode --c1 X --c2 Y [--samples N]
    minhyper sample <config> --out PATH
    minhyper report <json>

Exit codes: 0 pass, 1 tolerance failure, 2 config or parse error,
3 numerical failure (including exclusions beyond the budget).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from typing import Optional, Sequence, TextIO

import numpy as np

from .config import RunConfig, build_immersion, load_config
from .errors import ConfigError, ExprError, MinHyperError, NumericalError, ParameterError
from .families import Immersion
from .phase import ode_residual_323, solve_phase, validity_interval
from .phase import gh as phase_gh
from .scan import ResidualReport, scan_grid
from .shape import curvature

__all__ = ["CSV_HEADER", "main", "run", "write_sample_csv"]

EXIT_PASS, EXIT_TOLERANCE, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
CSV_HEADER = ("u", "v", "z", "x1", "x2", "x3", "x4", "x5", "lambda1", "lambda2", "lambda3", "H", "H2", "K")


def _fmt(x: float) -> str:
    return "%.17g" % x


def _err(msg: str) -> None:
    print(f"minhyper: {msg}", file=sys.stderr)


# --- CSV ---------------------------------------------------------------------


def write_sample_csv(imm: Immersion, cfg: RunConfig, out: TextIO) -> int:
    """Write the point cloud over the configured grid; returns the row count.

    Curvature columns are ``nan`` where the point could not be evaluated.
    """
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    rows = 0
    for p in cfg.grid.points():
        x = imm.point(p)
        try:
            s = curvature(imm, p, cfg.diff)
            curv = [*s.lambdas, s.H, s.H2, s.K]
        except MinHyperError:
            curv = [math.nan] * 6
        w.writerow([_fmt(c) for c in (*p, *x, *curv)])
        rows += 1
    return rows


# --- JSON --------------------------------------------------------------------


def report_document(cfg: RunConfig, report: ResidualReport, wall_ms: Optional[float]) -> dict:
    return {
        "config_echo": cfg.echo(),
        "per_check": {name: st.as_dict() for name, st in report.stats.items()},
        "exclusions": report.exclusions_dict(),
        "wall_time_ms": wall_ms,
        "pass": report.passed,
    }


def _dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# --- subcommands ----------------------------------------------------------


def _cmd_verify(args) -> int:
    cfg = load_config(args.config)
    imm = build_immersion(cfg)
    extra = cfg.grid.random_points(cfg.random_points, cfg.seed) if cfg.random_points else ()
    t0 = time.perf_counter()
    report = scan_grid(imm, cfg.grid, cfg.checks, cfg.diff, cfg.tolerances, cfg.workers, extra)
    wall_ms = (time.perf_counter() - t0) * 1e3
    print(f"wall time: {wall_ms:.1f} ms", file=sys.stderr)

    json_path = args.json or cfg.output["json"]
    csv_path = args.csv or cfg.output["csv"]
    if json_path:
        recorded = wall_ms if cfg.output["record_time"] else None
        _write_text(json_path, _dump_json(report_document(cfg, report, recorded)))
    if csv_path:
        buf = io.StringIO()
        write_sample_csv(imm, cfg, buf)
        _write_text(csv_path, buf.getvalue())

    _print_summary(report_document(cfg, report, None), sys.stdout)
    if not report.within_budget:
        _err(
            f"{report.excluded_points} of {report.total_points} points excluded "
            f"({', '.join(f'{k}: {n}' for k, n in report.exclusions.items())}), over the "
            f"{100 * 0.01:.0f}% budget"
        )
        return EXIT_NUMERICAL
    if not report.tolerances_pass:
        failed = [n for n, st in report.stats.items() if not st.passed]
        _err(f"tolerance failures: {', '.join(failed)}")
        return EXIT_TOLERANCE
    return EXIT_PASS


def _cmd_ode(args) -> int:
    lo, hi = validity_interval(args.c1, args.c2)
    sol = solve_phase(args.c1, args.c2)
    print(f"validity interval: ({_fmt(lo)}, {_fmt(hi)})")
    a, b = sol.shrunk_interval()
    vs = np.linspace(a, b, args.samples)
    print(f"{'v':>24} {'phi':>24} {'g':>24} {'h':>24} {'residual_323':>24}")
    for v in vs:
        g, h = phase_gh(float(v), sol)
        res = ode_residual_323(lambda t: phase_gh(t, sol)[0], float(v), args.c1, args.c2)
        print(f"{_fmt(v):>24} {_fmt(sol.phi(float(v))):>24} {_fmt(g):>24} {_fmt(h):>24} {_fmt(res):>24}")
    return EXIT_PASS


def _cmd_sample(args) -> int:
    cfg = load_config(args.config)
    imm = build_immersion(cfg)
    buf = io.StringIO()
    rows = write_sample_csv(imm, cfg, buf)
    _write_text(args.out, buf.getvalue())
    print(f"wrote {rows} points to {args.out}", file=sys.stderr)
    return EXIT_PASS


def _print_summary(doc: dict, out: TextIO) -> None:
    echo = doc.get("config_echo", {})
    print(f"family: {echo.get('family', '?')}", file=out)
    checks = doc.get("per_check", {})
    width = max([len(n) for n in checks] + [5])
    print(f"{'check':<{width}}  {'max_abs':>12}  {'mean_abs':>12}  {'tolerance':>10}  result", file=out)
    for name, st in checks.items():
        verdict = "PASS" if st["pass"] else "FAIL"
        print(f"{name:<{width}}  {st['max_abs']:12.3e}  {st['mean_abs']:12.3e}  {st['tolerance']:10.1e}  {verdict}", file=out)
        if not st["pass"] and st.get("worst_point") is not None:
            print(f"{'':<{width}}  worst at {tuple(st['worst_point'])}", file=out)
    ex = doc.get("exclusions", {})
    print(f"excluded points: {ex.get('points', 0)} of {ex.get('total_points', 0)} {ex.get('by_error', {})}", file=out)
    if doc.get("wall_time_ms") is not None:
        print(f"wall time: {doc['wall_time_ms']:.1f} ms", file=out)
    print(f"overall: {'PASS' if doc.get('pass') else 'FAIL'}", file=out)


def _cmd_report(args) -> int:
    try:
        with open(args.json, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        _err(f"cannot read report {args.json}: {exc}")
        return EXIT_CONFIG
    if not isinstance(doc, dict) or "per_check" not in doc:
        _err(f"{args.json} is not a verify report")
        return EXIT_CONFIG
    _print_summary(doc, sys.stdout)
    return EXIT_PASS if doc.get("pass") else EXIT_TOLERANCE


def _positive_int(text: str) -> int:
    n = int(text)
    if n < 2:
        raise argparse.ArgumentTypeError("need at least 2 samples")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="minhyper", description="Curvature identity checks for hypersurfaces of S^4.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the configured checks over a grid")
    p.add_argument("config")
    p.add_argument("--json", help="override the JSON report path")
    p.add_argument("--csv", help="override the CSV point-cloud path")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("ode", help="tabulate the phase function and its ODE solutions")
    p.add_argument("--c1", type=float, required=True)
    p.add_argument("--c2", type=float, required=True)
    p.add_argument("--samples", type=_positive_int, default=11)
    p.set_defaults(func=_cmd_ode)

    p = sub.add_parser("sample", help="write the grid point cloud as CSV")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("report", help="pretty-print a JSON report")
    p.add_argument("json")
    p.set_defaults(func=_cmd_report)
    return ap


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    try:
        return args.func(args)
    except (ConfigError, ParameterError, ExprError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except OSError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except NumericalError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

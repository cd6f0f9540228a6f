"""Command-line entry point.

Exit codes: 0 success, 1 domain error (unsupported region, failed hypothesis,
solver failure, failed self-check), 2 usage error (bad flags, unreadable or
invalid config).
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import SweepError, run_sweep
from .cells import SOLVERS, CellSolveError, TorusGrid
from .coefficients import ConvergenceError, HypothesisError, find_min_hessian
from .config import ConfigError, RunConfig, load_config
from .direct import DirectProblem, ResolutionError, solve_direct
from .effective import AssemblyError, CoercivityError, build_effective_operator, solve_required_cells
from .eigen import FactorizationError, LanczosError
from .expr import ExpressionError
from .oscillator import TruncatedDomain, default_half_width, solve_oscillator
from .regions import ParameterPoint, UnsupportedRegion, classify, parse_decimal, scaling

SCHEMA_VERSION = 1

DOMAIN_ERRORS = (UnsupportedRegion, HypothesisError, ConvergenceError, CellSolveError, AssemblyError,
                 CoercivityError, FactorizationError, LanczosError, ResolutionError, SweepError,
                 FloatingPointError)


class UsageError(Exception):
    pass


class CheckFailed(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Fraction):
        return float(obj)
    return obj


def _write_csv(path: Path, header: list[str], rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


class Reporter:
    def __init__(self, args):
        self.args = args
        self.out = Path(args.out) if getattr(args, "out", None) else None
        self.sidecars = []

    def csv(self, name: str, header, rows):
        if self.out is None and not self.args.csv_dir:
            return
        base = Path(self.args.csv_dir) if self.args.csv_dir else self.out.parent
        stem = self.out.stem if self.out else self.args.command
        path = base / f"{stem}.{name}.csv"
        _write_csv(path, header, rows)
        self.sidecars.append(str(path))

    def emit(self, result: dict):
        report = {"schema_version": SCHEMA_VERSION, "command": self.args.command, "result": result}
        if self.sidecars:
            report["csv"] = self.sidecars
        if not self.args.no_meta:
            report["meta"] = {
                "version": __version__,
                "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
                "argv": self.args.argv,
            }
        text = json.dumps(_jsonable(report), indent=2, sort_keys=True, allow_nan=False) + "\n"
        if self.out:
            self.out.parent.mkdir(parents=True, exist_ok=True)
            self.out.write_text(text)
        else:
            sys.stdout.write(text)


def _config(args) -> RunConfig:
    path = Path(args.config)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    return load_config(path)


def _point(text_alpha, text_beta) -> ParameterPoint:
    try:
        return ParameterPoint(parse_decimal(text_alpha), parse_decimal(text_beta))
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"invalid parameter: {exc}") from None


def _effective(cfg: RunConfig, modes=None):
    spec = cfg.problem.spec()
    sc = scaling(cfg.problem.point(), spec.dim)
    stats = find_min_hessian(spec)
    grid = TorusGrid(spec.dim, modes or cfg.solver.modes)
    cells = solve_required_cells(sc, spec, stats.x_star, grid, cfg.solver.cell_tol)
    return spec, sc, stats, build_effective_operator(sc, spec, cells, stats, grid)


# ---------------------------------------------------------------------------
# subcommands


def cmd_classify(args, rep: Reporter):
    p = _point(args.alpha, args.beta)
    region = classify(p)
    out = {"alpha": p.alpha, "beta": p.beta, "alpha_exact": str(p.alpha), "beta_exact": str(p.beta),
           "region": region.value, "supported": region.supported}
    if not region.supported:
        rep.emit(out)
        raise UnsupportedRegion(region, p)
    out.update(scaling(p, args.dim).to_dict())
    rep.emit(out)


def cmd_cell(args, rep: Reporter):
    cfg = _config(args)
    spec = cfg.problem.spec()
    stats = find_min_hessian(spec)
    grid = TorusGrid(spec.dim, args.modes or cfg.solver.modes)
    sol = SOLVERS[args.which](spec, stats.x_star, grid, args.tol or cfg.solver.cell_tol)
    if spec.dim == 1:
        y = grid.points(padded=False)[:, 0]
        keys = list(sol.fields)
        rep.csv("cell", ["y"] + [f"field_{i}" for i in range(len(keys))],
                zip(y, *[sol.values(k) for k in keys]))
    rep.emit(sol.to_dict())


def cmd_effective(args, rep: Reporter):
    cfg = _config(args)
    _, sc, stats, op = _effective(cfg, args.modes)
    rep.emit({"scaling": sc.to_dict(), "stats": stats.to_dict(), "operator": op.to_dict()})


def cmd_spectrum(args, rep: Reporter):
    cfg = _config(args)
    _, sc, _, op = _effective(cfg)
    K = args.k or cfg.solver.k
    L = args.box or cfg.solver.effective_half_width or default_half_width(op, K)
    N = args.grid or cfg.solver.effective_points
    res = solve_oscillator(op, TruncatedDomain(L, N), K, extrapolate=not args.no_extrapolate,
                           seed=cfg.solver.seed)
    if op.dim == 1:
        z = res.grid.inner_points()[:, 0]
        rep.csv("eigenvectors", ["z"] + [f"v_{k + 1}" for k in range(K)], zip(z, *res.vectors))
    rep.emit({"scaling": sc.to_dict(), "operator": op.to_dict(), "spectrum": res.to_dict()})


def cmd_direct(args, rep: Reporter):
    cfg = _config(args)
    spec = cfg.problem.spec()
    eps = float(parse_decimal(args.eps))
    K = args.k or cfg.solver.k
    N = args.grid or cfg.solver.direct_intervals or DirectProblem.min_intervals(eps, spec.domain,
                                                                               cfg.solver.points_per_period)
    prob = DirectProblem(spec, cfg.problem.point(), eps, N)
    res = solve_direct(prob, K, seed=cfg.solver.seed)
    if spec.dim == 1:
        x = res.grid.inner_points()[:, 0]
        rep.csv("eigenfunctions", ["x"] + [f"u_{k + 1}" for k in range(K)], zip(x, *res.vectors))
    rep.emit(res.to_dict() | {"stats": res.stats.to_dict()})


def cmd_sweep(args, rep: Reporter):
    cfg = _config(args)
    spec = cfg.problem.spec()
    eps0 = float(parse_decimal(args.eps0)) if args.eps0 else cfg.sweep.eps0
    levels = args.levels or cfg.sweep.levels
    K = args.k or cfg.solver.k
    eps_list = [eps0 * 2.0**-j for j in range(levels)]
    res = run_sweep(spec, cfg.problem.point(), eps_list, K, cfg.solver.sweep_settings())
    rows = res.csv_rows()
    rep.csv("sweep", list(rows[0]), [list(r.values()) for r in rows])
    rep.emit(res.to_dict())


def cmd_check(args, rep: Reporter):
    from .selfcheck import run_checks

    cfg = _config(args) if args.config else None
    results = run_checks(cfg)
    ok = all(r["passed"] for r in results)
    rep.emit({"passed": ok, "checks": results})
    if not ok:
        raise CheckFailed("one or more self-checks failed")


COMMANDS = {
    "classify": cmd_classify,
    "cell": cmd_cell,
    "effective": cmd_effective,
    "spectrum": cmd_spectrum,
    "direct": cmd_direct,
    "sweep": cmd_sweep,
    "check": cmd_check,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    common.add_argument("--csv-dir", help="directory for CSV sidecars (default: next to --out)")
    common.add_argument("--no-meta", action="store_true", help="omit timestamp/version metadata")

    parser = _Parser(prog="lochom", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("classify", parents=[common], help="region and scaling exponents of (alpha, beta)")
    p.add_argument("--alpha", required=True)
    p.add_argument("--beta", required=True)
    p.add_argument("--dim", type=int, choices=(1, 2), default=1)

    p = sub.add_parser("cell", parents=[common], help="solve a family of cell problems")
    p.add_argument("--config", required=True)
    p.add_argument("--which", choices=sorted(SOLVERS), required=True)
    p.add_argument("--modes", type=int)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("effective", parents=[common], help="effective tensors and coercivity")
    p.add_argument("--config", required=True)
    p.add_argument("--modes", type=int)

    p = sub.add_parser("spectrum", parents=[common], help="eigenpairs of the effective problem")
    p.add_argument("--config", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--box", type=float, help="half-width L of the truncation box")
    p.add_argument("--grid", type=int, help="intervals N per dimension")
    p.add_argument("--no-extrapolate", action="store_true")

    p = sub.add_parser("direct", parents=[common], help="eigenpairs of the eps-problem")
    p.add_argument("--config", required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--grid", type=int, help="intervals per dimension")

    p = sub.add_parser("sweep", parents=[common], help="dyadic eps-sweep against the effective spectrum")
    p.add_argument("--config", required=True)
    p.add_argument("--eps0")
    p.add_argument("--levels", type=int)
    p.add_argument("--k", type=int)

    p = sub.add_parser("check", parents=[common], help="run the built-in self-verification suites")
    p.add_argument("--config")
    return parser


def dispatch(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    args.argv = argv
    rep = Reporter(args)
    try:
        COMMANDS[args.command](args, rep)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ExpressionError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except UnsupportedRegion as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1
    except DOMAIN_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        # remaining validation failures stem from user-supplied inputs
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()

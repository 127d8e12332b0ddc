"""``rdd`` command line: curve, surface, dmax and check subcommands.

Exit codes: 0 success, 1 config or usage error, 2 some sweep points failed
numerically (partial output is still written), 3 self-check failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, build_problem, load_config, sweep_plan
from .distortion import (
    BRUTEFORCE_CAP,
    Coupling,
    compute_dmax,
    gromov_distortion_bruteforce,
    gromov_distortion_decomposed,
)
from .solver import SolverConfig, amd_step, ba_step
from .spaces import (
    DegenerateSourceError,
    DimensionMismatchError,
    PointCapError,
    cross_distance_matrix,
    validate_metric_matrix,
)
from .sweep import audit, failures, lambda_grid, trace_curve, trace_surface

log = logging.getLogger("rdd")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2
EXIT_CHECK = 3

CSV_HEADER = ("lambda", "theta", "distortion", "rate_nats", "rate_bits", "iterations", "converged")
SCHEMA_VERSION = 1
CHECK_TOL = 1e-10
BA_TOL = 1e-12

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


def _configure_logging():
    level = _LOG_LEVELS.get(os.environ.get("RDD_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _num(x: float) -> str:
    return "%.17g" % x


def _needs_cross(config: RunConfig) -> bool:
    return any(t < 1.0 for t in config.sweep.theta_values)


def _cross(source, y_space):
    try:
        return cross_distance_matrix(source.space, y_space)
    except DimensionMismatchError as exc:
        raise ConfigError(f"theta < 1 needs a shared ambient space: {exc}") from None


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _row(pt) -> dict:
    return {
        "lambda": pt.lam,
        "theta": pt.theta,
        "distortion": pt.distortion,
        "rate_nats": pt.rate_nats,
        "rate_bits": pt.rate_bits,
        "iterations": pt.iterations_run,
        "converged": pt.converged,
    }


def format_csv(points) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for pt in points:
        r = _row(pt)
        writer.writerow([
            _num(r["lambda"]), _num(r["theta"]), _num(r["distortion"]), _num(r["rate_nats"]),
            _num(r["rate_bits"]), r["iterations"], "true" if r["converged"] else "false",
        ])
    return buf.getvalue()


def _json_safe(x):
    return None if isinstance(x, float) and not math.isfinite(x) else x


def format_json(points, config: RunConfig, resolved_lambda_end: float) -> str:
    rows = []
    for pt in points:
        row = {k: _json_safe(v) for k, v in _row(pt).items()}
        if pt.error is not None:
            row["error"] = pt.error
        rows.append(row)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": config.model_dump(mode="json"),
        "resolved": {"lambda_end": resolved_lambda_end},
        "points": rows,
    }
    return json.dumps(doc, indent=2) + "\n"


def _write_text(path: str | None, text: str):
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot write output {path}: {exc}") from None


def _write_couplings(path: str, points):
    out = Path(path)
    for k, pt in enumerate(points):
        if pt.coupling is None:
            continue
        target = out.with_name(f"{out.stem}_coupling_{k}.csv")
        try:
            np.savetxt(target, pt.coupling.w, delimiter=",", fmt="%.17g")
        except OSError as exc:
            raise ConfigError(f"cannot write coupling {target}: {exc}") from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _run_sweep(config: RunConfig, surface: bool, jobs: int | None) -> int:
    out = config.output
    if out.emit_coupling and out.path is None:
        raise ConfigError("output.emit_coupling requires output.path")
    if not surface and len(config.sweep.theta_values) != 1:
        raise ConfigError("sweep.theta_values: curve takes exactly one theta (use surface)")
    source, y_space = build_problem(config)
    d_cross = _cross(source, y_space) if _needs_cross(config) else None
    try:
        plan = sweep_plan(config, source)
    except ValueError as exc:
        raise ConfigError(f"sweep: {exc}") from None
    keep = out.emit_coupling or out.audit
    log.info("tracing %d points (M=%d, N=%d)", len(lambda_grid(plan)) * len(plan.theta_values),
             source.space.size, y_space.size)
    if surface:
        points = trace_surface(source, y_space, plan, d_cross, jobs=jobs, keep_couplings=keep)
    else:
        points = trace_curve(source, y_space, plan, d_cross, jobs=jobs, keep_couplings=keep)

    if out.format == "json":
        _write_text(out.path, format_json(points, config, plan.lambda_end))
    else:
        _write_text(out.path, format_csv(points))
    if out.emit_coupling:
        _write_couplings(out.path, points)

    status = EXIT_OK
    if out.audit:
        problems = audit(points, source, y_space, d_cross)
        for msg in problems:
            print(f"audit: {msg}", file=sys.stderr)
        if problems:
            status = EXIT_CHECK
    failed = failures(points)
    if failed:
        print(f"{len(failed)} of {len(points)} points failed numerically", file=sys.stderr)
        if status == EXIT_OK:
            status = EXIT_PARTIAL
    return status


def cmd_curve(config: RunConfig, jobs: int | None = None) -> int:
    return _run_sweep(config, surface=False, jobs=jobs)


def cmd_surface(config: RunConfig, jobs: int | None = None) -> int:
    return _run_sweep(config, surface=True, jobs=jobs)


def cmd_dmax(config: RunConfig, jobs: int | None = None) -> int:
    source, y_space = build_problem(config)
    value, r, diag = compute_dmax(
        source.space.dist_q,
        y_space.dist_q,
        source.pmf,
        config.dmax.restarts,
        iterations=config.dmax.iterations,
        seed=config.solver.seed,
        return_diagnostics=True,
    )
    print(f"D_max = {_num(value)}")
    print("r = " + json.dumps([float(x) for x in r]))
    print(f"vertex value = {_num(diag.vertex_value)}")
    print(f"restarts = {len(diag.restart_values)}, best restart = {diag.best_restart}")
    print("restart values = " + json.dumps([float(v) for v in diag.restart_values]))
    return EXIT_OK


def _check_inputs(source, y_space):
    validate_metric_matrix(source.space.dist_q, name="X distance matrix")
    validate_metric_matrix(y_space.dist_q, name="Y distance matrix")
    pmf = source.pmf
    if pmf.shape != (source.space.size,) or np.any(pmf < 0) or abs(pmf.sum() - 1) > 1e-12:
        raise ValueError("source pmf is not a probability vector over X")


def _oracle_check(source, y_space, rng) -> list[str]:
    dx, dy, p = source.space.dist_q, y_space.dist_q, source.pmf
    m, n = dx.shape[0], dy.shape[0]
    kernels = [np.full((m, n), 1.0 / n)]
    for _ in range(3):
        w = rng.exponential(size=(m, n))
        kernels.append(w / w.sum(axis=1, keepdims=True))
    problems = []
    for k, w in enumerate(kernels):
        brute = gromov_distortion_bruteforce(dx, dy, w, p)
        dec = gromov_distortion_decomposed(dx, dy, w, p).total
        if abs(dec - brute) > CHECK_TOL * max(1.0, abs(brute)):
            problems.append(f"oracle kernel {k}: decomposed {dec!r} vs brute force {brute!r}")
    return problems


def _ba_check(source, y_space, d_cross, lams) -> list[str]:
    dx, dy, p = source.space.dist_q, y_space.dist_q, source.pmf
    problems = []
    for lam in lams:
        a = b = Coupling.uniform(len(p), dy.shape[0])
        for it in range(5):
            a = amd_step(a, dx, dy, p, d_cross, SolverConfig(lam=lam, theta=0.0))
            b = ba_step(b, d_cross, p, lam)
            gap = float(np.max(np.abs(a.w - b.w)))
            if gap > BA_TOL:
                problems.append(f"theta=0 step {it + 1} at lambda={lam!r}: max |AMD - BA| = {gap:.3g}")
                break
            if not np.array_equal(a.r, a.w.T @ p):
                problems.append(f"stored marginal differs from W'p at lambda={lam!r}")
                break
    return problems


def cmd_check(config: RunConfig, jobs: int | None = None) -> int:
    source, y_space = build_problem(config)
    try:
        _check_inputs(source, y_space)
    except ValueError as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    problems = []
    m, n = source.space.size, y_space.size
    if m * n <= BRUTEFORCE_CAP:
        problems += _oracle_check(source, y_space, np.random.default_rng(config.solver.seed))
        print(f"oracle: decomposition vs brute force on {m}x{n}: {'ok' if not problems else 'FAILED'}")
    else:
        print(f"oracle: skipped, M*N = {m * n} exceeds the brute-force cap {BRUTEFORCE_CAP}")

    try:
        d_cross = cross_distance_matrix(source.space, y_space)
    except DimensionMismatchError:
        d_cross = None
    if d_cross is None:
        print("ba: skipped, X and Y live in different dimensions")
    else:
        try:
            grid = lambda_grid(sweep_plan(config, source))
        except ValueError as exc:
            raise ConfigError(f"sweep: {exc}") from None
        lams = sorted({grid[0], grid[len(grid) // 2], grid[-1]})
        ba_problems = _ba_check(source, y_space, d_cross, lams)
        print(f"ba: theta=0 AMD vs BA steps at {len(lams)} multipliers: {'ok' if not ba_problems else 'FAILED'}")
        problems += ba_problems

    for msg in problems:
        print(f"discrepancy: {msg}", file=sys.stderr)
    return EXIT_CHECK if problems else EXIT_OK


COMMANDS = {"curve": cmd_curve, "surface": cmd_surface, "dmax": cmd_dmax, "check": cmd_check}
HELP = {
    "curve": "trace one rate-distortion curve over the lambda grid",
    "surface": "trace the (theta, lambda) grid",
    "dmax": "estimate the zero-rate distortion threshold",
    "check": "validate inputs and run the built-in consistency checks",
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _theta_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _lambda_end(text: str):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}") from None


# (flag, dotted config key, argparse kwargs)
OVERRIDES = [
    ("--lambda-start", "sweep.lambda_start", dict(type=float)),
    ("--lambda-end", "sweep.lambda_end", dict(type=_lambda_end)),
    ("--lambda-count", "sweep.lambda_count", dict(type=int)),
    ("--theta", "sweep.theta_values", dict(type=_theta_list, help="comma-separated theta values")),
    ("--max-iter", "solver.max_iter", dict(type=int)),
    ("--w-tol", "solver.w_tol", dict(type=float)),
    ("--seed", "solver.seed", dict(type=int)),
    ("--restarts", "dmax.restarts", dict(type=int)),
    ("--q", "q", dict(type=float)),
    ("--max-points", "max_points", dict(type=int)),
    ("--output", "output.path", dict()),
    ("--format", "output.format", dict(choices=["csv", "json"])),
    ("--emit-coupling", "output.emit_coupling", dict(action="store_const", const=True)),
    ("--audit", "output.audit", dict(action="store_const", const=True)),
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rdd", description="Rate distortion-in-distortion solver")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--jobs", type=int, default=None,
                       help="parallel sweep points (default: available CPUs)")
        for flag, key, kwargs in OVERRIDES:
            p.add_argument(flag, dest=key, default=None, **kwargs)
    return parser


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    overrides = {key: getattr(args, key) for _, key, _ in OVERRIDES if getattr(args, key) is not None}
    try:
        config = load_config(args.config, overrides)
        jobs = args.jobs if args.jobs is not None else (config.jobs or os.cpu_count() or 1)
        if jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        return COMMANDS[args.command](config, jobs=jobs)
    except (ConfigError, PointCapError, DimensionMismatchError, DegenerateSourceError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

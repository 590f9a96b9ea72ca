"""Command-line front end: solve datasets, run the benchmark table, export
LP models and refinement traces.

Exit status is 0 only when the requested solve certified within tolerance
(for ``bench``: when every row lands within its per-case tolerance).
"""

from __future__ import annotations

import argparse
import math
import os
import re
import sys
import time

from . import adaptive as _adaptive
from . import model as _model
from . import solver as _solver
from .surrogate import TangentConfig, identity_pwl, tangent_pwl

# Per-case acceptance tolerance on the benchmark totals, $/h.
_BENCH = [
    # case, method, expected total $/h, best in literature $/h, tolerance
    ("case1", "simple", 8234.07, 8234.07, 0.01),
    ("case2a", "simple", 17963.83, 17963.83, 0.01),
    ("case2b", "simple", 24170.66, 24169.92, 0.01),
    ("case3", "simple", 121415.31, 121412.54, 0.02),
    ("case3", "tangent", 121412.54, 121412.54, 0.02),
    ("case2b", "adaptive", 24169.92, 24169.92, 0.01),
]

_THETA1_DEFAULT = 0.35 * math.pi
_THETA2_DEFAULT = 0.47 * math.pi


def _parse_angle(text: str) -> float:
    """Accept plain radians or multiples of pi such as '0.35pi' / '0.35*pi'."""
    m = re.fullmatch(r"\s*([-+0-9.eE]+)\s*\*?\s*pi\s*", text)
    if m:
        return float(m.group(1)) * math.pi
    return float(text)


def _resolve(token: str) -> _model.DispatchProblem:
    if os.path.exists(token):
        return _model.read_problem(token)
    return _model.bundled_problem(token)


def _effective_workers(requested: int) -> int:
    cap = os.environ.get("ELDP_MAX_WORKERS")
    if cap:
        try:
            return max(1, min(requested, int(cap)))
        except ValueError:
            pass
    return max(1, requested)


def _surrogates(problem, method, theta1, theta2):
    if method == "simple":
        return [identity_pwl()] * problem.n
    cfg = TangentConfig(theta1, theta2)
    return [tangent_pwl(cfg)] * problem.n


def _print_records(problem, method, rep, extra, out):
    w = out.write
    w(f"dataset {problem.name or '-'}\n")
    w(f"method {method}\n")
    w(f"status {'certified' if rep.certified else 'uncertified'}\n")
    w(f"n {problem.n}\n")
    w(f"demand {problem.demand:.6f}\n")
    for i, v in enumerate(rep.p, start=1):
        w(f"p {i} {v:.6f}\n")
    w(f"total_cost {rep.true_cost:.6f}\n")
    w(f"surrogate_value {rep.surrogate_value:.6f}\n")
    w(f"certified_bound {rep.certified_bound:.6f}\n")
    w(f"absolute_gap {rep.absolute_gap:.9g}\n")
    for key, val in extra:
        w(f"{key} {val}\n")
    w(f"nodes_explored {rep.nodes_explored}\n")


def _print_human(problem, method, rep, extra, out, elapsed):
    feas = _model.check_feasible(problem, rep.p)
    w = out.write
    w(f"dataset: {problem.name or '-'} ({problem.n} units, "
      f"demand {problem.demand:.3f} MW)\n")
    w(f"method: {method}\n")
    w("unit dispatch (MW):\n")
    for i, v in enumerate(rep.p, start=1):
        w(f"  {i:>3}  {v:>12.3f}\n")
    w(f"total cost:      {rep.true_cost:.2f} $/h\n")
    w(f"surrogate value: {rep.surrogate_value:.2f} $/h\n")
    w(f"certified bound: {rep.certified_bound:.2f} $/h\n")
    w(f"gap:             {rep.absolute_gap:.3e} $/h\n")
    for key, val in extra:
        w(f"{key}: {val}\n")
    w(f"balance residual: {feas.balance_residual:.3e} MW\n")
    w(f"nodes:           {rep.nodes_explored}\n")
    w(f"wall time:       {elapsed:.2f} s (solver {rep.wall_time:.2f} s)\n")
    w(f"status:          {'certified' if rep.certified else 'NOT certified'}\n")


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    problem = _resolve(args.dataset)
    workers = _effective_workers(args.workers)
    extra = []
    if args.method == "adaptive":
        cfg = _adaptive.AdaptiveConfig(
            epsilon=args.epsilon if args.epsilon is not None else 1e-3,
            max_iterations=args.max_iterations,
            gap_tol=args.gap_tol, node_cap=args.node_cap, workers=workers)
        rep, trace = _adaptive.adaptive_solve(problem, cfg)
        extra.append(("delta", f"{rep.true_cost - rep.surrogate_value:.9g}"))
        extra.append(("iterations", str(len(trace))))
        if args.trace_out:
            with open(args.trace_out, "w", encoding="utf-8") as fh:
                fh.write(_adaptive.format_trace(trace))
    else:
        theta1 = args.theta1 if args.theta1 is not None else _THETA1_DEFAULT
        theta2 = args.theta2 if args.theta2 is not None else _THETA2_DEFAULT
        pwls = _surrogates(problem, args.method, theta1, theta2)
        rep = _solver.solve_surrogate(
            problem, pwls, gap_tol=args.gap_tol,
            node_cap=args.node_cap, workers=workers)
    if args.format == "records":
        _print_records(problem, args.method, rep, extra, sys.stdout)
    else:
        _print_human(problem, args.method, rep, extra, sys.stdout,
                     time.perf_counter() - t0)
    return 0 if rep.certified else 1


def cmd_bench(args) -> int:
    rows = [r for r in _BENCH
            if (not args.cases or r[0] in args.cases)
            and (not args.methods or r[1] in args.methods)]
    workers = _effective_workers(args.workers)
    print(f"{'case':<8}{'method':<10}{'cost $/h':>14}{'best lit':>14}"
          f"{'deviation':>12}{'time s':>9}  status")
    ok = True
    for case, method, expected, best_lit, tol in rows:
        problem = _model.bundled_problem(case)
        t0 = time.perf_counter()
        if method == "adaptive":
            rep, _ = _adaptive.adaptive_solve(
                problem, _adaptive.AdaptiveConfig(workers=workers))
        else:
            pwls = _surrogates(problem, method, _THETA1_DEFAULT, _THETA2_DEFAULT)
            rep = _solver.solve_surrogate(problem, pwls, workers=workers)
        dt = time.perf_counter() - t0
        dev = rep.true_cost - best_lit
        good = rep.certified and abs(rep.true_cost - expected) <= tol
        ok = ok and good
        print(f"{case:<8}{method:<10}{rep.true_cost:>14.2f}{best_lit:>14.2f}"
              f"{dev:>+12.2f}{dt:>9.2f}  {'ok' if good else 'FAIL'}")
    return 0 if ok else 1


def cmd_export(args) -> int:
    problem = _resolve(args.dataset)
    theta1 = args.theta1 if args.theta1 is not None else _THETA1_DEFAULT
    theta2 = args.theta2 if args.theta2 is not None else _THETA2_DEFAULT
    pwls = _surrogates(problem, args.method, theta1, theta2)
    _solver.export_lp(problem, pwls, args.out)
    return 0


def _add_solver_opts(p):
    p.add_argument("--gap-tol", type=float, default=1e-6,
                   help="absolute certification gap, $/h")
    p.add_argument("--node-cap", type=int, default=1_000_000)
    p.add_argument("--workers", type=int, default=1,
                   help="parallel relaxation workers (ELDP_MAX_WORKERS caps this)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="eldp",
        description="Globally certified economic load dispatch with "
                    "valve-point effects")
    sub = ap.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve one dataset")
    ps.add_argument("dataset", help="bundled name (e.g. case1) or file path")
    ps.add_argument("--method", choices=("simple", "tangent", "adaptive"),
                    default="simple")
    ps.add_argument("--theta1", type=_parse_angle, default=None,
                    help="first tangency angle, e.g. 0.35pi (tangent only)")
    ps.add_argument("--theta2", type=_parse_angle, default=None,
                    help="second tangency angle (tangent only)")
    ps.add_argument("--epsilon", type=float, default=None,
                    help="certified gap target, $/h (adaptive only)")
    ps.add_argument("--max-iterations", type=int, default=60)
    ps.add_argument("--format", choices=("human", "records"), default="human")
    ps.add_argument("--trace-out", default=None,
                    help="write the adaptive iteration trace to this file")
    _add_solver_opts(ps)
    ps.set_defaults(func=cmd_solve)

    pb = sub.add_parser("bench",
                        help="reproduce the benchmark table on bundled cases")
    pb.add_argument("--cases", nargs="*", default=None)
    pb.add_argument("--methods", nargs="*", default=None)
    _add_solver_opts(pb)
    pb.set_defaults(func=cmd_bench)

    pe = sub.add_parser("export", help="write the LP-format surrogate model")
    pe.add_argument("dataset")
    pe.add_argument("--method", choices=("simple", "tangent"), default="simple")
    pe.add_argument("--theta1", type=_parse_angle, default=None)
    pe.add_argument("--theta2", type=_parse_angle, default=None)
    pe.add_argument("--out", required=True)
    pe.set_defaults(func=cmd_export)
    return ap


def _validate(args) -> str | None:
    method = getattr(args, "method", None)
    if method != "tangent" and (getattr(args, "theta1", None) is not None
                                or getattr(args, "theta2", None) is not None):
        return "--theta1/--theta2 are only valid with --method tangent"
    if method != "adaptive" and getattr(args, "epsilon", None) is not None:
        return "--epsilon is only valid with --method adaptive"
    return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    problem = _validate(args)
    if problem:
        print(f"error: {problem}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (_model.DatasetError, _solver.InfeasibleError, OSError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

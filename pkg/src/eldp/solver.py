"""Certified global solver for compiled surrogate dispatch problems.

The surrogate problem min sum_i q_i(p_i) s.t. sum p_i = demand, p in boxes,
with each q_i piecewise quadratic, is solved by spatial branch and bound:

* node relaxation: each q_i is replaced by its lower convex envelope on the
  node's interval, and the separable convex problem is solved exactly by a
  parametric sweep over the balance multiplier (the classic continuous
  quadratic knapsack);
* branching: on the generator with the largest envelope gap at the
  relaxation point, at the compiled piece boundary nearest that point, so
  node envelopes become exact after finitely many splits;
* incumbents: every relaxation point is repaired to exact balance and
  evaluated on the true surrogate.

Everything is deterministic: best-first order with sequence-number
tie-breaking, lowest-index tie rules, and value-preserving deduplication of
nodes that only permute intervals between interchangeable units.
"""

from __future__ import annotations

import heapq
import math
import time
from array import array
from bisect import bisect_left
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .envelope import ConvexEnvelope, convex_envelope
from .model import DispatchProblem, total_cost
from .surrogate import PiecewiseLinear, compile_cost

__all__ = [
    "InfeasibleError",
    "SolveReport",
    "solve_separable_convex",
    "kkt_residual",
    "solve_surrogate",
    "export_lp",
]


class InfeasibleError(ValueError):
    """The demand cannot be met within the given intervals."""


@dataclass(frozen=True)
class SolveReport:
    """Result of one certified surrogate solve.

    ``certified_bound`` is a proven lower bound on the surrogate optimum over
    the whole feasible set; ``absolute_gap = surrogate_value -
    certified_bound``.  ``certified`` is False only when the node cap was
    hit before the gap closed.
    """

    p: tuple[float, ...]
    surrogate_value: float
    true_cost: float
    certified_bound: float
    absolute_gap: float
    nodes_explored: int
    wall_time: float
    certified: bool
    bound_history: tuple[float, ...] = ()


class _EnvData:
    """Per-envelope arrays for the parametric knapsack.

    The inverse derivative of a convex piecewise quadratic decomposes per
    piece: at multiplier lam the piece contributes
    clip((lam - s_lo)/(2A), 0, width); flat pieces (A == 0) contribute their
    whole width once lam passes their slope.  Summing contributions gives
    the minimizer of env(x) - lam*x, and the events where d/dlam changes
    are exactly the piece end slopes.
    """

    __slots__ = ("env", "lo", "hi", "n_pieces", "p_lo", "p_w", "p_A", "p_B",
                 "s_lo", "ev_lam", "ev_ds", "ev_jump")

    def __init__(self, env: ConvexEnvelope):
        self.env = env
        self.lo = env.lo
        self.hi = env.hi
        pieces = env.pieces
        self.n_pieces = len(pieces)
        p_lo = np.array([q.lo for q in pieces])
        p_hi = np.array([q.hi for q in pieces])
        self.p_A = np.array([q.A for q in pieces])
        self.p_B = np.array([q.B for q in pieces])
        self.p_lo = p_lo
        self.p_w = p_hi - p_lo
        self.s_lo = 2.0 * self.p_A * p_lo + self.p_B
        s_hi = 2.0 * self.p_A * p_hi + self.p_B
        lam, ds, jump = [], [], []
        for i in range(self.n_pieces):
            if self.p_A[i] > 0.0:
                gain = 0.5 / self.p_A[i]
                lam.append(self.s_lo[i]); ds.append(gain); jump.append(0.0)
                lam.append(s_hi[i]); ds.append(-gain); jump.append(0.0)
            else:
                lam.append(self.p_B[i]); ds.append(0.0)
                jump.append(self.p_w[i])
        self.ev_lam = np.array(lam)
        self.ev_ds = np.array(ds)
        self.ev_jump = np.array(jump)


def _node_relax(eds: Sequence[_EnvData], demand: float):
    """Exact solution of min sum env_i(x_i) s.t. sum x = demand, x in boxes.

    Returns (p, lam, dual_bound, env_values) or None when the interval sums
    cannot meet the demand.  ``dual_bound`` is the Lagrangian value at lam,
    a valid lower bound even in the face of rounding.
    """
    n = len(eds)
    lo_sum = math.fsum(ed.lo for ed in eds)
    hi_sum = math.fsum(ed.hi for ed in eds)
    ftol = 1e-12 * max(1.0, abs(demand))
    if demand < lo_sum - ftol or demand > hi_sum + ftol:
        return None
    d_eff = min(max(demand, lo_sum), hi_sum)

    lam_all = np.concatenate([ed.ev_lam for ed in eds])
    ds_all = np.concatenate([ed.ev_ds for ed in eds])
    jump_all = np.concatenate([ed.ev_jump for ed in eds])
    order = np.argsort(lam_all, kind="stable")
    lam_s = lam_all[order]
    ds_s = ds_all[order]
    jump_s = jump_all[order]
    run = np.cumsum(ds_s)
    growth = np.empty_like(lam_s)
    growth[0] = 0.0
    if len(lam_s) > 1:
        np.cumsum(run[:-1] * np.diff(lam_s), out=growth[1:])
    s_after = lo_sum + np.cumsum(jump_s) + growth

    i = int(np.searchsorted(s_after, d_eff, side="left"))
    if i >= len(lam_s):
        i = len(lam_s) - 1
    lam_i = float(lam_s[i])
    r0 = int(np.searchsorted(lam_s, lam_i, side="left"))
    s_before_run = float(s_after[r0] - jump_s[r0])
    if s_before_run <= d_eff or r0 == 0:
        lam_star = lam_i
    else:
        sigma = float(run[r0 - 1])
        lam_prev = float(lam_s[r0 - 1])
        s_prev = float(s_after[r0 - 1])
        if sigma <= 0.0:
            lam_star = lam_i
        else:
            lam_star = lam_prev + (d_eff - s_prev) / sigma
            lam_star = min(max(lam_star, lam_prev), lam_i)

    # piecewise contributions at lam_star (flats exactly at lam_star held back)
    p_A = np.concatenate([ed.p_A for ed in eds])
    p_B = np.concatenate([ed.p_B for ed in eds])
    p_w = np.concatenate([ed.p_w for ed in eds])
    s_lo = np.concatenate([ed.s_lo for ed in eds])
    pos = p_A > 0.0
    denom = np.where(pos, 2.0 * p_A, 1.0)
    conv = np.clip((lam_star - s_lo) / denom, 0.0, p_w)
    contrib = np.where(pos, conv, np.where(p_B < lam_star, p_w, 0.0))

    need = d_eff - lo_sum - float(np.sum(contrib))
    atol = 1e-9 * max(1.0, abs(demand))
    if need > atol:
        stol = 1e-12 * max(1.0, abs(lam_star))
        idxs = np.nonzero(~pos & (np.abs(p_B - lam_star) <= stol)
                          & (contrib < p_w))[0]
        for q in idxs:
            take = min(need, float(p_w[q] - contrib[q]))
            contrib[q] += take
            need -= take
            if need <= atol:
                break

    offsets = np.empty(n, dtype=np.intp)
    k = 0
    for j, ed in enumerate(eds):
        offsets[j] = k
        k += ed.n_pieces
    lo_units = np.array([ed.lo for ed in eds])
    p_tilde = np.add.reduceat(contrib, offsets) + lo_units if n > 0 else lo_units
    np.clip(p_tilde, lo_units, np.array([ed.hi for ed in eds]), out=p_tilde)

    # dual value at an exact per-unit minimizer: a valid bound for any lam
    env_t = [eds[j].env(float(p_tilde[j])) for j in range(n)]
    dual = math.fsum(env_t) - lam_star * (math.fsum(p_tilde.tolist()) - demand)

    # spill rounding crumbs so the balance holds to machine precision
    p = p_tilde.tolist()
    resid = demand - math.fsum(p)
    if resid != 0.0:
        for j in range(n):
            new = min(max(p[j] + resid, eds[j].lo), eds[j].hi)
            resid -= new - p[j]
            p[j] = new
            if resid == 0.0:
                break
    if abs(resid) > 1e-6 * max(1.0, abs(demand)):
        return None  # numerically infeasible sliver
    env_vals = [eds[j].env(p[j]) for j in range(n)]
    return tuple(p), lam_star, dual, env_vals


def solve_separable_convex(
    envelopes: Sequence[ConvexEnvelope], demand: float,
) -> tuple[tuple[float, ...], float]:
    """Minimize sum env_i(p_i) subject to sum p_i = demand and the envelope
    domains as box constraints.

    Returns (p, lam) where lam is the balance multiplier: a subgradient of
    every env_i at an interior p_i.  Raises InfeasibleError when the demand
    lies outside the interval sums.
    """
    eds = [_EnvData(env) for env in envelopes]
    res = _node_relax(eds, demand)
    if res is None:
        lo = sum(e.lo for e in envelopes)
        hi = sum(e.hi for e in envelopes)
        raise InfeasibleError(
            f"demand {demand} outside the interval sum range [{lo}, {hi}]")
    p, lam, _dual, _vals = res
    return p, lam


def kkt_residual(envelopes: Sequence[ConvexEnvelope], p: Sequence[float],
                 lam: float) -> float:
    """Largest violation of the multiplier optimality conditions, in $/MWh.

    At an interior point the multiplier must lie between the one-sided
    slopes; at the interval ends only the inward condition applies.
    """
    worst = 0.0
    for env, pi in zip(envelopes, p):
        left, right = env.slopes_at(pi)
        worst = max(worst, left - lam, lam - right)
    return worst


# ---------------------------------------------------------------------------
# branch and bound
# ---------------------------------------------------------------------------

def solve_surrogate(
    problem: DispatchProblem,
    pwls: Sequence[PiecewiseLinear],
    *,
    gap_tol: float = 1e-6,
    node_cap: int = 1_000_000,
    warm_start: Sequence[float] | None = None,
    workers: int = 1,
) -> SolveReport:
    """Solve the compiled surrogate problem to proven global optimality.

    Terminates when the best live node bound rises to within ``gap_tol`` of
    the incumbent.  ``warm_start`` seeds the incumbent with a feasible
    dispatch (it can only prune, never change the certificate).  With
    ``workers`` > 1 the child relaxations of each expanded node are
    evaluated concurrently; results are merged in a fixed order, so reports
    are identical for every worker count.
    """
    t0 = time.perf_counter()
    gens = problem.generators
    n = problem.n
    pwls = list(pwls)
    if len(pwls) != n:
        raise ValueError(f"{len(pwls)} surrogates for {n} generators")
    demand = problem.demand
    pwqs = [compile_cost(g, w) for g, w in zip(gens, pwls)]
    pbs = [pwq.boundaries for pwq in pwqs]

    # units with identical data and identical surrogates are interchangeable;
    # nodes that only permute their intervals are duplicates
    plan: list[list[int]] = []
    gkey: dict = {}
    for i, (g, w) in enumerate(zip(gens, pwls)):
        key = (g, w.breakpoints, w.slopes, w.intercepts)
        if key in gkey:
            plan[gkey[key]].append(i)
        else:
            gkey[key] = len(plan)
            plan.append([i])

    def canon(iv) -> bytes:
        flat = array("I")
        for members in plan:
            if len(members) == 1:
                flat.extend(iv[members[0]])
            else:
                for pair in sorted(iv[m] for m in members):
                    flat.extend(pair)
        return flat.tobytes()

    cache: dict[tuple[int, int, int], _EnvData] = {}

    def envdata(i: int, lohi) -> _EnvData:
        key = (i, lohi[0], lohi[1])
        ed = cache.get(key)
        if ed is None:
            pb = pbs[i]
            ed = _EnvData(convex_envelope(pwqs[i], pb[lohi[0]], pb[lohi[1]]))
            cache[key] = ed
        return ed

    def relax(iv, parent_bound):
        eds = [envdata(i, iv[i]) for i in range(n)]
        res = _node_relax(eds, demand)
        if res is None:
            return None
        p, lam, dual, env_vals = res
        bound = dual if dual > parent_bound else parent_bound
        disc = [pwqs[i](p[i]) - env_vals[i] for i in range(n)]
        return bound, p, disc

    best_val = math.inf
    best_p: tuple[float, ...] | None = None

    def offer(q):
        nonlocal best_val, best_p
        gval = math.fsum(pwqs[i](q[i]) for i in range(n))
        if gval < best_val:
            best_val = gval
            best_p = tuple(q)

    def project_and_offer(p, iv):
        # re-balance on the widest node interval; greedy spill if it clips
        j, widest = 0, -1.0
        for i in range(n):
            w = pbs[i][iv[i][1]] - pbs[i][iv[i][0]]
            if w > widest:
                widest, j = w, i
        q = list(p)
        q[j] = demand - (math.fsum(q) - q[j])
        g = gens[j]
        if not (g.p_min <= q[j] <= g.p_max):
            q[j] = min(max(q[j], g.p_min), g.p_max)
            resid = demand - math.fsum(q)
            for i in range(n):
                gi = gens[i]
                new = min(max(q[i] + resid, gi.p_min), gi.p_max)
                resid -= new - q[i]
                q[i] = new
                if resid == 0.0:
                    break
            if abs(resid) > 1e-6 * max(1.0, abs(demand)):
                return
        offer(q)

    def choose_branch(iv, p, disc, bound):
        eps = 1e-11 * (1.0 + abs(bound))
        j, dmax = -1, eps
        for i in range(n):
            if disc[i] > dmax:
                j, dmax = i, disc[i]
        if j < 0:
            return None
        lo_i, hi_i = iv[j]
        pb = pbs[j]
        pos = bisect_left(pb, p[j], lo_i + 1, hi_i)
        left = pos - 1 if pos - 1 >= lo_i + 1 else None
        right = pos if pos <= hi_i - 1 else None
        if left is None and right is None:
            return None
        if left is None:
            beta = right
        elif right is None:
            beta = left
        else:
            beta = left if p[j] - pb[left] <= pb[right] - p[j] else right
        return j, beta

    if warm_start is not None:
        q = [min(max(float(v), g.p_min), g.p_max)
             for v, g in zip(warm_start, gens)]
        if len(q) == n and abs(math.fsum(q) - demand) <= 1e-6 * max(1.0, abs(demand)):
            offer(q)

    heap: list = []
    seq = 0
    floor_min = math.inf
    nodes = 0
    bound_hist: list[float] = []
    seen = set()
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    sum_tol = 1e-9 * max(1.0, abs(demand))

    try:
        root_iv = tuple((0, len(pbs[i]) - 1) for i in range(n))
        seen.add(canon(root_iv))
        res = relax(root_iv, -math.inf)
        nodes += 1
        if res is None:
            raise InfeasibleError("demand outside the deliverable range")
        bound, p, disc = res
        project_and_offer(p, root_iv)
        br = choose_branch(root_iv, p, disc, bound)
        if br is None or bound >= best_val - gap_tol:
            floor_min = min(floor_min, bound)
        else:
            heap.append((bound, seq, root_iv, br))
            seq += 1

        live = math.inf
        capped = False
        while heap:
            bound, _s, iv, (bj, bbeta) = heapq.heappop(heap)
            if bound >= best_val - gap_tol:
                live = bound
                break
            if nodes >= node_cap:
                live = bound
                capped = True
                break
            bound_hist.append(bound)

            lo_j, hi_j = iv[bj]
            child_ivs = []
            for piece in ((lo_j, bbeta), (bbeta, hi_j)):
                civ = iv[:bj] + (piece,) + iv[bj + 1:]
                clo = math.fsum(pbs[i][civ[i][0]] for i in range(n))
                chi = math.fsum(pbs[i][civ[i][1]] for i in range(n))
                if demand < clo - sum_tol or demand > chi + sum_tol:
                    continue
                key = canon(civ)
                if key in seen:
                    continue
                seen.add(key)
                child_ivs.append(civ)

            if pool is not None and len(child_ivs) > 1:
                results = list(pool.map(
                    lambda civ: relax(civ, bound), child_ivs))
            else:
                results = [relax(civ, bound) for civ in child_ivs]

            for civ, r in zip(child_ivs, results):
                nodes += 1
                if r is None:
                    continue
                cbound, cp, cdisc = r
                project_and_offer(cp, civ)
                if cbound >= best_val - gap_tol:
                    floor_min = min(floor_min, cbound)
                    continue
                cbr = choose_branch(civ, cp, cdisc, cbound)
                if cbr is None:
                    floor_min = min(floor_min, cbound)
                    continue
                heapq.heappush(heap, (cbound, seq, civ, cbr))
                seq += 1
    finally:
        if pool is not None:
            pool.shutdown()

    certified_bound = min(best_val, floor_min, live)
    gap = best_val - certified_bound
    certified = (not capped) and gap <= gap_tol * (1.0 + 1e-9)
    return SolveReport(
        p=best_p,
        surrogate_value=best_val,
        true_cost=total_cost(problem, best_p),
        certified_bound=certified_bound,
        absolute_gap=gap,
        nodes_explored=nodes,
        wall_time=time.perf_counter() - t0,
        certified=certified,
        bound_history=tuple(bound_hist),
    )


# ---------------------------------------------------------------------------
# LP-format export
# ---------------------------------------------------------------------------

def _is_identity(w: PiecewiseLinear) -> bool:
    return w.m == 1 and w.slopes[0] == 1.0 and w.intercepts[0] == 0.0


def _terms(parts: list[tuple[float, str]]) -> str:
    out = []
    for coef, name in parts:
        if coef == 0.0:
            continue
        sign = "-" if coef < 0 else "+"
        mag = repr(abs(coef))
        if out:
            out.append(f"{sign} {mag} {name}")
        else:
            out.append(f"{mag} {name}" if coef > 0 else f"- {mag} {name}")
    return " ".join(out) if out else "0"


def export_lp(problem: DispatchProblem, pwls: Sequence[PiecewiseLinear],
              destination) -> None:
    """Write the surrogate model in LP-format text.

    The single-segment identity surrogate produces the compact model with
    continuous p, t and integer k only; any other surrogate adds the
    segment-assignment variables chi (continuous) and eta (binary).  The
    quadratic objective uses the bracketed half-form; the constant part of
    the cost is emitted as a literal objective offset.
    """
    gens = problem.generators
    n = problem.n
    pwls = list(pwls)
    if len(pwls) != n:
        raise ValueError(f"{len(pwls)} surrogates for {n} generators")
    simple = all(_is_identity(w) for w in pwls)
    pi = math.pi

    lin: list[tuple[float, str]] = []
    quad: list[tuple[float, str]] = []
    const = 0.0
    rows: list[str] = []
    bounds: list[str] = []
    generals: list[str] = []
    binaries: list[str] = []

    balance = _terms([(1.0, f"p{i+1}") for i in range(n)])
    rows.append(f" balance: {balance} = {problem.demand!r}")

    for i, (g, w) in enumerate(zip(gens, pwls)):
        u = i + 1
        lin.append((g.b, f"p{u}"))
        const += g.c
        if g.a > 0.0:
            quad.append((2.0 * g.a, f"p{u} ^ 2"))
        k_hi = max(0, math.ceil(g.e * (g.p_max - g.p_min) / pi))
        rhs = g.e * g.p_min
        rows.append(" saw_up_%d: %s <= %r" % (
            u, _terms([(g.e, f"p{u}"), (-pi, f"k{u}"), (-1.0, f"t{u}")]), rhs))
        rows.append(" saw_dn_%d: %s >= %r" % (
            u, _terms([(g.e, f"p{u}"), (-pi, f"k{u}"), (1.0, f"t{u}")]), rhs))
        bounds.append(f" {g.p_min!r} <= p{u} <= {g.p_max!r}")
        bounds.append(f" k{u} <= {k_hi}")
        generals.append(f"k{u}")
        if simple:
            lin.append((g.d, f"t{u}"))
            continue
        X = w.breakpoints
        for j in range(w.m):
            lin.append((g.d * w.slopes[j], f"chi{u}_{j+1}"))
            lin.append((g.d * w.intercepts[j], f"eta{u}_{j+1}"))
            binaries.append(f"eta{u}_{j+1}")
            rows.append(" seg_lo_%d_%d: %s >= 0" % (
                u, j + 1,
                _terms([(1.0, f"chi{u}_{j+1}"), (-X[j], f"eta{u}_{j+1}")])))
            rows.append(" seg_hi_%d_%d: %s <= 0" % (
                u, j + 1,
                _terms([(1.0, f"chi{u}_{j+1}"), (-X[j + 1], f"eta{u}_{j+1}")])))
        rows.append(" t_sum_%d: %s = 0" % (
            u, _terms([(1.0, f"chi{u}_{j+1}") for j in range(w.m)]
                      + [(-1.0, f"t{u}")])))
        rows.append(" pick_%d: %s = 1" % (
            u, _terms([(1.0, f"eta{u}_{j+1}") for j in range(w.m)])))

    obj = _terms(lin)
    if const != 0.0:
        obj += f" + {const!r}"
    if quad:
        obj += " + [ " + _terms(quad) + " ] / 2"

    lines = [f"\\ {problem.name or 'dispatch surrogate'}"
             f" ({'compact' if simple else 'segmented'} model)",
             "Minimize", f" obj: {obj}", "Subject To"]
    lines.extend(rows)
    lines.append("Bounds")
    lines.extend(bounds)
    if generals:
        lines.append("Generals")
        lines.append(" " + " ".join(generals))
    if binaries:
        lines.append("Binaries")
        lines.append(" " + " ".join(binaries))
    lines.append("End")
    text = "\n".join(lines) + "\n"

    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8") as fh:
            fh.write(text)

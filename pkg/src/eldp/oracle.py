"""Independent brute-force references used by the test suite.

Two oracles, deliberately dumb: an exhaustive grid scan of the true cost
(with the last unit eliminated through the balance equality, so only tiny
problems are tractable) and exhaustive enumeration of one compiled piece
per generator for surrogate problems.  Neither shares code paths with the
branch-and-bound engine beyond the single-piece convex subproblem solver.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .envelope import ConvexEnvelope
from .model import DispatchProblem
from .solver import InfeasibleError, solve_separable_convex
from .surrogate import PiecewiseLinear, compile_cost

__all__ = ["GridSpec", "brute_force_true", "enumerate_pieces"]


@dataclass(frozen=True)
class GridSpec:
    """Grid resolution in MW. 0.01 suits CI; 0.001 the slow suite."""

    step: float = 0.01

    def __post_init__(self):
        if not self.step > 0.0:
            raise ValueError(f"step must be positive, got {self.step}")


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    grid = lo + step * np.arange(count)
    if hi - grid[-1] > 1e-12:
        grid = np.append(grid, hi)
    return grid


def _cost_vec(g, p: np.ndarray) -> np.ndarray:
    return (g.a * p + g.b) * p + g.c + g.d * np.abs(np.sin(g.e * (p - g.p_min)))


def brute_force_true(problem: DispatchProblem,
                     grid: GridSpec = GridSpec()) -> tuple[tuple[float, ...], float]:
    """Approximate global optimum of the true cost by exhaustive grid scan.

    Only defined for up to three units: the last unit is eliminated via the
    balance equality and the rest are scanned on the grid.  The returned
    value is the best feasible grid point, hence at most
    lipschitz_constant(problem) * (n-1) * step above the true optimum.
    """
    gens = problem.generators
    n = problem.n
    demand = problem.demand
    if n > 3:
        raise ValueError(f"grid oracle supports n <= 3, got n = {n}")
    if n == 1:
        g = gens[0]
        return (demand,), _cost_vec(g, np.array([demand]))[0].item()

    box_tol = 1e-9
    if n == 2:
        g1, g2 = gens
        p1 = _axis(g1.p_min, g1.p_max, grid.step)
        p2 = demand - p1
        mask = (p2 >= g2.p_min - box_tol) & (p2 <= g2.p_max + box_tol)
        if not mask.any():
            raise InfeasibleError("no feasible grid point")
        p1, p2 = p1[mask], np.clip(p2[mask], g2.p_min, g2.p_max)
        f = _cost_vec(g1, p1) + _cost_vec(g2, p2)
        k = int(np.argmin(f))
        return (p1[k].item(), p2[k].item()), f[k].item()

    g1, g2, g3 = gens
    ax1 = _axis(g1.p_min, g1.p_max, grid.step)
    ax2 = _axis(g2.p_min, g2.p_max, grid.step)
    c2 = _cost_vec(g2, ax2)
    best_f = math.inf
    best = None
    for p1 in ax1:
        p3 = demand - p1 - ax2
        mask = (p3 >= g3.p_min - box_tol) & (p3 <= g3.p_max + box_tol)
        if not mask.any():
            continue
        p2m = ax2[mask]
        p3m = np.clip(p3[mask], g3.p_min, g3.p_max)
        f = _cost_vec(g1, np.array([p1])) + c2[mask] + _cost_vec(g3, p3m)
        k = int(np.argmin(f))
        if f[k] < best_f:
            best_f = f[k].item()
            best = (p1.item(), p2m[k].item(), p3m[k].item())
    if best is None:
        raise InfeasibleError("no feasible grid point")
    return best, best_f


def enumerate_pieces(
    problem: DispatchProblem,
    pwls: Sequence[PiecewiseLinear],
    cap: int = 1_000_000,
) -> tuple[tuple[float, ...], float]:
    """Exact surrogate optimum by enumerating one compiled piece per unit.

    Every piece combination is a convex equality-constrained problem on the
    piece boxes, solved by the single-piece multiplier search; the best over
    all combinations is the exact surrogate optimum, independent of the
    enumeration order.
    """
    gens = problem.generators
    demand = problem.demand
    pwqs = [compile_cost(g, w) for g, w in zip(gens, pwls)]
    total = 1
    for pwq in pwqs:
        total *= len(pwq.pieces)
        if total > cap:
            raise ValueError(
                f"piece combination count exceeds the cap of {cap}")
    best_g = math.inf
    best_p = None
    for combo in itertools.product(*(range(len(pwq.pieces)) for pwq in pwqs)):
        pieces = [pwq.pieces[j] for pwq, j in zip(pwqs, combo)]
        lo = math.fsum(q.lo for q in pieces)
        hi = math.fsum(q.hi for q in pieces)
        if demand < lo or demand > hi:
            continue
        envs = [ConvexEnvelope((q,)) for q in pieces]
        p, _lam = solve_separable_convex(envs, demand)
        g = math.fsum(q.value(pi) for q, pi in zip(pieces, p))
        if g < best_g:
            best_g = g
            best_p = p
    if best_p is None:
        raise InfeasibleError("no piece combination can meet the demand")
    return best_p, best_g

"""Piecewise-linear sine surrogates and their compilation to quadratic pieces.

The ripple term |sin(e*(p - p_min))| only ever samples the sine through the
sawtooth map t(x) = min_k |x - k*pi|, the distance from x to the nearest
multiple of pi, which satisfies sin(t(x)) = |sin(x)|.  Replacing sin(t) on
[0, pi/2] by a piecewise-linear function therefore turns every generator
cost into a piecewise-quadratic function of p, which is what the solver
operates on.

Three families are provided:

* ``identity_pwl``   -- the single segment t itself (t >= sin t), the crudest
  over-estimate;
* ``tangent_pwl``    -- three segments built from tangents, a tight
  over-estimate;
* ``chord_pwl``      -- secants through points on the sine, an under-estimate
  that is exact at its breakpoints and improves monotonically under
  refinement.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .model import Generator

__all__ = [
    "HALF_PI",
    "SawtoothPoint",
    "PiecewiseLinear",
    "TangentConfig",
    "QuadPiece",
    "PiecewiseQuadratic",
    "sawtooth",
    "identity_pwl",
    "tangent_pwl",
    "chord_pwl",
    "refine",
    "compile_cost",
]

HALF_PI = 0.5 * math.pi

# Boundaries closer than this (radians) collapse to one cut when compiling.
_CUT_MERGE = 1e-10


class SawtoothPoint(NamedTuple):
    t: float  # distance to the nearest multiple of pi, in [0, pi/2]
    k: int    # index of that multiple


def sawtooth(x: float) -> SawtoothPoint:
    """Distance from ``x`` to the nearest multiple of pi.

    Ties at t == pi/2 resolve to the smaller k, so the rising flank owns its
    crest.
    """
    if not math.isfinite(x):
        raise ValueError(f"sawtooth argument must be finite, got {x!r}")
    k = math.ceil(x / math.pi - 0.5)
    return SawtoothPoint(abs(x - k * math.pi), k)


@dataclass(frozen=True)
class PiecewiseLinear:
    """A continuous piecewise-linear surrogate of sin t on [0, pi/2].

    Segment j covers [breakpoints[j], breakpoints[j+1]] with value
    slopes[j]*t + intercepts[j].  A point on an interior breakpoint belongs
    to the left segment; by continuity both segments agree there.

    ``kind`` is 'under', 'over' or 'identity'; the identity family is an
    over-estimate as well (t >= sin t on [0, pi/2]).
    """

    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]
    intercepts: tuple[float, ...]
    kind: str

    def __post_init__(self):
        X = self.breakpoints
        if len(X) < 2:
            raise ValueError("need at least two breakpoints (one segment)")
        if len(self.slopes) != len(X) - 1 or len(self.intercepts) != len(X) - 1:
            raise ValueError("need one slope and intercept per segment")
        if any(x1 <= x0 for x0, x1 in zip(X, X[1:])):
            raise ValueError(f"breakpoints not strictly increasing: {X}")
        if abs(X[0]) > 1e-12 or abs(X[-1] - HALF_PI) > 1e-12:
            raise ValueError("breakpoints must run from 0 to pi/2")
        if self.kind not in ("under", "over", "identity"):
            raise ValueError(f"unknown kind {self.kind!r}")

    @property
    def m(self) -> int:
        """Number of segments."""
        return len(self.slopes)

    @property
    def overestimates(self) -> bool:
        return self.kind in ("over", "identity")

    def segment_index(self, t: float) -> int:
        """Index of the segment containing t (left segment on a breakpoint)."""
        j = bisect_left(self.breakpoints, t) - 1
        return min(max(j, 0), self.m - 1)

    def __call__(self, t: float) -> float:
        j = self.segment_index(t)
        return self.slopes[j] * t + self.intercepts[j]


def identity_pwl() -> PiecewiseLinear:
    """The one-segment surrogate t itself (slope 1, intercept 0)."""
    return PiecewiseLinear((0.0, HALF_PI), (1.0,), (0.0,), kind="identity")


@dataclass(frozen=True)
class TangentConfig:
    """Tangency angles for the three-segment over-estimate, in radians."""

    theta1: float
    theta2: float

    def __post_init__(self):
        if not (0.0 < self.theta1 < self.theta2 < HALF_PI):
            raise ValueError(
                f"need 0 < theta1 < theta2 < pi/2, got "
                f"({self.theta1}, {self.theta2})")


def tangent_pwl(cfg: TangentConfig) -> PiecewiseLinear:
    """Three-segment over-estimate of sin t from tangents at theta1, theta2.

    The first segment is the identity near 0; the next two are the tangent
    lines at the configured angles.  Segment joints are where consecutive
    lines intersect.
    """
    t1, t2 = cfg.theta1, cfg.theta2
    a1, a2 = math.cos(t1), math.cos(t2)
    b1 = math.sin(t1) - t1 * a1
    b2 = math.sin(t2) - t2 * a2
    x1 = b1 / (1.0 - a1)
    x2 = (t2 * a2 - t1 * a1 - math.sin(t2) + math.sin(t1)) / (a2 - a1)
    if not (0.0 < x1 < x2 < HALF_PI):
        raise ValueError(
            f"tangent joints out of order: 0 < {x1} < {x2} < pi/2 fails")
    return PiecewiseLinear(
        breakpoints=(0.0, x1, x2, HALF_PI),
        slopes=(1.0, a1, a2),
        intercepts=(0.0, b1, b2),
        kind="over",
    )


def chord_pwl(breakpoints: Iterable[float]) -> PiecewiseLinear:
    """Under-estimate of sin t interpolating it at the given breakpoints.

    ``breakpoints`` must contain 0 and pi/2; since the sine is concave on
    [0, pi/2] the secants lie below it, with equality at every breakpoint.
    """
    X = sorted(breakpoints)
    if len(X) < 2:
        raise ValueError("need at least two breakpoints")
    if abs(X[0]) > 1e-12 or abs(X[-1] - HALF_PI) > 1e-12:
        raise ValueError("breakpoints must contain 0 and pi/2")
    X[0], X[-1] = 0.0, HALF_PI
    slopes, intercepts = [], []
    for x0, x1 in zip(X, X[1:]):
        s = (math.sin(x1) - math.sin(x0)) / (x1 - x0)
        slopes.append(s)
        intercepts.append(math.sin(x0) - s * x0)
    return PiecewiseLinear(tuple(X), tuple(slopes), tuple(intercepts),
                           kind="under")


def refine(breakpoints: Iterable[float], t: float,
           merge_tol: float = 1e-9) -> tuple[float, ...]:
    """Insert ``t`` into a breakpoint set unless it duplicates an entry.

    ``t`` is dropped when it lies within ``merge_tol`` of an existing
    breakpoint, which keeps repeated insertions at a converged point from
    creating zero-width segments.
    """
    if not 0.0 <= t <= HALF_PI + 1e-12:
        raise ValueError(f"breakpoint {t} outside [0, pi/2]")
    X = sorted(breakpoints)
    i = bisect_right(X, t)
    near_left = i > 0 and t - X[i - 1] <= merge_tol
    near_right = i < len(X) and X[i] - t <= merge_tol
    if near_left or near_right:
        return tuple(X)
    return tuple(X[:i] + [t] + X[i:])


class QuadPiece(NamedTuple):
    """One quadratic piece A*p**2 + B*p + C on [lo, hi]."""

    lo: float
    hi: float
    A: float
    B: float
    C: float

    def value(self, p: float) -> float:
        return (self.A * p + self.B) * p + self.C

    def slope(self, p: float) -> float:
        return 2.0 * self.A * p + self.B


@dataclass(frozen=True)
class PiecewiseQuadratic:
    """A generator's compiled surrogate cost: contiguous quadratic pieces.

    Pieces cover [lo, hi] exactly, share boundaries bit-for-bit, and each
    has A >= 0 (convex within the piece).  A point on a shared boundary
    belongs to the left piece.
    """

    pieces: tuple[QuadPiece, ...]
    boundaries: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.pieces:
            raise ValueError("need at least one piece")
        for left, right in zip(self.pieces, self.pieces[1:]):
            if left.hi != right.lo:
                raise ValueError(
                    f"pieces not contiguous at {left.hi} vs {right.lo}")
        for q in self.pieces:
            if q.hi < q.lo:
                raise ValueError(f"inverted piece {q}")
            if q.A < 0.0:
                raise ValueError(f"concave piece {q}")
        object.__setattr__(
            self, "boundaries",
            (self.pieces[0].lo,) + tuple(q.hi for q in self.pieces))

    @property
    def lo(self) -> float:
        return self.pieces[0].lo

    @property
    def hi(self) -> float:
        return self.pieces[-1].hi

    def piece_index(self, p: float) -> int:
        j = bisect_left(self.boundaries, p) - 1
        return min(max(j, 0), len(self.pieces) - 1)

    def __call__(self, p: float) -> float:
        return self.pieces[self.piece_index(p)].value(p)


def compile_cost(g: Generator, pwl: PiecewiseLinear) -> PiecewiseQuadratic:
    """Compile one generator's surrogate cost into explicit quadratic pieces.

    For every p in [p_min, p_max] the result equals
    a*p**2 + b*p + c + d * pwl(sawtooth(e*(p - p_min)).t).  Piece boundaries
    sit exactly where e*(p - p_min) crosses k*pi +- X_j: between crossings
    the sawtooth flank is affine in p, so each piece is a single quadratic.
    """
    a, b, c, d, e = g.a, g.b, g.c, g.d, g.e
    pmin, pmax = g.p_min, g.p_max
    x_end = e * (pmax - pmin)
    if d == 0.0 or x_end <= _CUT_MERGE:
        # ripple absent or domain narrower than resolution: one quadratic
        return PiecewiseQuadratic(
            (QuadPiece(pmin, pmax, a, b, c + d * pwl(0.0)),))

    # collect cut points in x = e*(p - p_min) space
    cut_set = set()
    k_hi = math.ceil(x_end / math.pi) + 1
    for k in range(k_hi + 1):
        base = k * math.pi
        for xj in pwl.breakpoints:
            for x in (base - xj, base + xj):
                if _CUT_MERGE < x < x_end - _CUT_MERGE:
                    cut_set.add(x)
    cuts = [0.0]
    for x in sorted(cut_set):
        if x - cuts[-1] > _CUT_MERGE:
            cuts.append(x)
    cuts.append(x_end)

    # p-space boundaries, forced to land exactly on the capacity bounds
    bounds = [pmin + x / e for x in cuts]
    bounds[0], bounds[-1] = pmin, pmax

    pieces = []
    for i in range(len(cuts) - 1):
        xm = 0.5 * (cuts[i] + cuts[i + 1])
        t, k = sawtooth(xm)
        sgn = 1.0 if xm >= k * math.pi else -1.0
        j = pwl.segment_index(t)
        alpha, beta = pwl.slopes[j], pwl.intercepts[j]
        # d * (alpha * sgn * (e*p - e*pmin - k*pi) + beta), folded into B, C
        B = b + d * alpha * sgn * e
        C = c + d * (beta - alpha * sgn * (e * pmin + k * math.pi))
        pieces.append(QuadPiece(bounds[i], bounds[i + 1], a, B, C))
    return PiecewiseQuadratic(tuple(pieces))

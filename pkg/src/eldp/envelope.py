"""Lower convex envelope of a univariate piecewise-quadratic function.

The envelope on [lo, hi] is the greatest convex function that never exceeds
the source.  Because every piece is itself convex (A >= 0), the envelope
consists of trimmed original pieces joined by affine bridges, each bridge
bi-tangent to the pieces it connects (or, at a kink, passing through the
kink point).  Construction is a single left-to-right hull scan over the
pieces; bridges are found in closed form, with a bisection fallback for
numerically degenerate tangency systems.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field

from .surrogate import PiecewiseQuadratic, QuadPiece

__all__ = ["ConvexEnvelope", "convex_envelope"]

# Pieces narrower than this fraction of the interval are dropped as noise.
_REL_WIDTH = 1e-13
# Slack for slope comparisons, relative to the local slope scale.
_REL_SLOPE = 1e-12


@dataclass(frozen=True)
class ConvexEnvelope:
    """A convex piecewise-quadratic minorant (bridge pieces have A == 0)."""

    pieces: tuple[QuadPiece, ...]
    boundaries: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
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

    def slopes_at(self, p: float, snap: float = 1e-9) -> tuple[float, float]:
        """One-sided slopes (left, right) at p; -inf/+inf at the domain ends.

        Points within ``snap`` (relative) of a piece boundary are treated as
        sitting exactly on it, so rounding in a caller cannot hide the slope
        jump of a kink.
        """
        b = self.boundaries
        tol = snap * (1.0 + abs(p))
        j = bisect_left(b, p)
        if j < len(b) and abs(b[j] - p) <= tol:
            p = b[j]
        elif j > 0 and abs(b[j - 1] - p) <= tol:
            p = b[j - 1]
        j = self.piece_index(p)
        q = self.pieces[j]
        left = q.slope(p) if p > self.lo else -math.inf
        if p >= self.hi:
            right = math.inf
        elif p >= q.hi and j + 1 < len(self.pieces):
            right = self.pieces[j + 1].slope(p)
        else:
            right = q.slope(p)
        return left, right

    def minimum(self) -> tuple[float, float]:
        """(argmin, min value) over the domain; convexity makes this a scan."""
        for q in self.pieces:
            if q.slope(q.hi) >= 0.0:
                if q.slope(q.lo) >= 0.0:
                    return q.lo, q.value(q.lo)
                x = -q.B / (2.0 * q.A)
                return x, q.value(x)
        p = self.hi
        return p, self.pieces[-1].value(p)


def _qv(A, B, C, x):
    return (A * x + B) * x + C


def _ratio(x0, y0, A, B, C, p):
    """Chord slope from the pivot (x0, y0) to the arc point (p, arc(p)).

    Degenerates to the arc's tangent slope when p coincides with the pivot
    and the pivot sits on the arc (the contiguous-junction limit).
    """
    num = _qv(A, B, C, p) - y0
    den = p - x0
    if abs(den) <= 1e-14 * (1.0 + abs(p)):
        if abs(num) <= 1e-9 * (1.0 + abs(y0)):
            return 2.0 * A * p + B
        return math.inf if num * den >= 0.0 else -math.inf
    return num / den


def _support_from_point(x0, y0, arc):
    """Steepest line through (x0, y0), x0 <= arc.lo, staying <= arc.

    Returns (slope, contact).  Minimizes the chord slope over contacts; the
    ratio is unimodal for convex arcs, so a clamped stationary point is
    optimal.
    """
    l, r, A, B, C = arc
    if A <= 0.0:
        rl = _ratio(x0, y0, A, B, C, l)
        rr = _ratio(x0, y0, A, B, C, r)
        return (rr, r) if rr <= rl else (rl, l)
    disc = (_qv(A, B, C, x0) - y0) / A
    if disc <= 0.0:
        v = l  # pivot on or below the parabola: ratio increases rightward
    else:
        v = x0 + math.sqrt(disc)
        v = l if v < l else (r if v > r else v)
    return _ratio(x0, y0, A, B, C, v), v


def _support_to_point(arc, x1, y1):
    """Tautest line through (x1, y1), x1 >= arc.hi, staying <= arc.

    Returns (slope, contact).  Maximizes the chord slope over contacts.
    """
    l, r, A, B, C = arc
    if A <= 0.0:
        cl = _ratio(x1, y1, A, B, C, l)
        cr = _ratio(x1, y1, A, B, C, r)
        return (cl, l) if cl >= cr else (cr, r)
    disc = (_qv(A, B, C, x1) - y1) / A
    if disc <= 0.0:
        u = r
    else:
        u = x1 - math.sqrt(disc)
        u = l if u < l else (r if u > r else u)
    return _ratio(x1, y1, A, B, C, u), u


def _solve_quadratic(a2, a1, a0):
    if a2 == 0.0:
        return [] if a1 == 0.0 else [-a0 / a1]
    disc = a1 * a1 - 4.0 * a2 * a0
    if disc < 0.0:
        return []
    sq = math.sqrt(disc)
    return [(-a1 - sq) / (2.0 * a2), (-a1 + sq) / (2.0 * a2)]


def _bridge_ok(s, c, arc, w_eps):
    """Line s*p + c must not exceed arc anywhere (checked at ends + vertex)."""
    l, r, A, B, C = arc
    tol = 1e-7 * (1.0 + abs(C) + abs(B) * (abs(l) + abs(r)))
    for x in (l, r):
        if s * x + c > _qv(A, B, C, x) + tol:
            return False
    if A > 0.0:
        x = (s - B) / (2.0 * A)
        if l < x < r and s * x + c > _qv(A, B, C, x) + tol:
            return False
    return True


def _bitangent(T, N, w_eps):
    """Bridge (u, v, slope) tangent to T in (T.lo, T.hi) and supporting N.

    Called when the contact on T is known to be interior; tries the closed
    form of the two-arc tangency system first, then endpoint contacts on N,
    then falls back to bisection on the tangency mismatch.
    """
    lT, rT, AT, BT, CT = T
    lN, rN, AN, BN, CN = N
    cands = []
    if AT > 0.0 and AN > 0.0:
        dB = BT - BN
        dC = CN - CT
        for u in _solve_quadratic(4.0 * AT * (AT - AN), 4.0 * AT * dB,
                                  dB * dB - 4.0 * AN * dC):
            s = 2.0 * AT * u + BT
            v = (s - BN) / (2.0 * AN)
            cands.append((u, v, s))
    if AT > 0.0:
        # contact at an endpoint of N (kink there, or tangency left the arc)
        for x1 in (lN, rN):
            s, u = _support_to_point(T, x1, _qv(AN, BN, CN, x1))
            cands.append((u, x1, s))
    for u, v, s in cands:
        if not (lT - w_eps <= u <= rT + w_eps and
                lN - w_eps <= v <= rN + w_eps and u <= v + w_eps):
            continue
        c = _qv(AT, BT, CT, u) - s * u
        if _bridge_ok(s, c, T, w_eps) and _bridge_ok(s, c, N, w_eps):
            u = min(max(u, lT), rT)
            v = min(max(v, lN), rN)
            return u, v, s
    return _bitangent_bisect(T, N)


def _bitangent_bisect(T, N):
    # tangency mismatch phi(u) = support slope from (u, T(u)) minus T'(u);
    # phi > 0 at T.lo and < 0 at T.hi when the contact is interior
    lT, rT, AT, BT, CT = T
    lo, hi = lT, rT
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        s, _v = _support_from_point(mid, _qv(AT, BT, CT, mid), N)
        if s >= 2.0 * AT * mid + BT:
            lo = mid
        else:
            hi = mid
    u = 0.5 * (lo + hi)
    s, v = _support_from_point(u, _qv(AT, BT, CT, u), N)
    return u, v, s


def convex_envelope(pwq: PiecewiseQuadratic, lo: float, hi: float) -> ConvexEnvelope:
    """Greatest convex minorant of ``pwq`` on [lo, hi].

    [lo, hi] must lie inside the compiled domain.  A degenerate interval
    (width below resolution) yields a single constant piece.
    """
    if lo < pwq.lo - 1e-9 or hi > pwq.hi + 1e-9 or hi < lo:
        raise ValueError(
            f"[{lo}, {hi}] not inside the domain [{pwq.lo}, {pwq.hi}]")
    span = hi - lo
    w_eps = _REL_WIDTH * max(1.0, abs(lo), abs(hi))
    if span <= w_eps:
        return ConvexEnvelope((QuadPiece(lo, hi, 0.0, 0.0, pwq(lo)),))

    # restrict the pieces to [lo, hi]
    arcs = []
    for q in pwq.pieces:
        a = max(q.lo, lo)
        b = min(q.hi, hi)
        if b - a > w_eps:
            arcs.append(QuadPiece(a, b, q.A, q.B, q.C))
    if not arcs:
        return ConvexEnvelope((QuadPiece(lo, hi, 0.0, 0.0, pwq(lo)),))

    slope_scale = max(1.0, max(abs(q.slope(q.lo)) + abs(q.slope(q.hi))
                               for q in arcs))
    s_eps = _REL_SLOPE * slope_scale
    anchor_x = arcs[0].lo
    anchor_y = arcs[0].value(anchor_x)

    stack: list[QuadPiece] = []
    for arc in arcs:
        _push(stack, (anchor_x, anchor_y), arc, w_eps, s_eps)

    # force exact contiguity; trimming kept values consistent already
    out = []
    prev_hi = None
    for q in stack:
        qlo = q.lo if prev_hi is None else prev_hi
        out.append(QuadPiece(qlo, q.hi, q.A, q.B, q.C))
        prev_hi = q.hi
    return ConvexEnvelope(tuple(out))


def _push(stack, anchor, new, w_eps, s_eps):
    while True:
        if not stack:
            x0, y0 = anchor
            if new.lo - x0 <= w_eps:
                stack.append(new)
                return
            s, v = _support_from_point(x0, y0, new)
            stack.append(QuadPiece(x0, v, 0.0, s, y0 - s * x0))
            if new.hi - v > w_eps:
                stack.append(QuadPiece(v, new.hi, new.A, new.B, new.C))
            return
        top = stack[-1]
        contiguous = new.lo - top.hi <= w_eps
        if contiguous and top.slope(top.hi) <= new.slope(new.lo) + s_eps:
            stack.append(new)
            return
        # concave junction (or a gap left by earlier pops): bridge into `new`
        s_lo, _ = _support_from_point(top.lo, top.value(top.lo), new)
        if s_lo <= top.slope(top.lo) + s_eps:
            stack.pop()  # top lies entirely above the eventual bridge
            continue
        s_hi, v_hi = _support_from_point(top.hi, top.value(top.hi), new)
        if s_hi >= top.slope(top.hi) - s_eps:
            u, v, s = top.hi, v_hi, s_hi  # pivot on the kink at top.hi
        else:
            u, v, s = _bitangent(top, new, w_eps)
        if u - top.lo <= w_eps:
            stack.pop()
            continue
        if u < top.hi:
            stack[-1] = QuadPiece(top.lo, u, top.A, top.B, top.C)
        c = top.value(u) - s * u
        if v - u > w_eps:
            stack.append(QuadPiece(u, v, 0.0, s, c))
        if new.hi - v > w_eps:
            stack.append(QuadPiece(v, new.hi, new.A, new.B, new.C))
        elif v - u <= w_eps:
            # degenerate: nothing was added; push the arc to keep coverage
            stack.append(new)
        return

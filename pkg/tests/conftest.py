"""Shared test helpers: random instances and independent geometric oracles."""

from __future__ import annotations

import random

import numpy as np
import pytest

from eldp.model import DispatchProblem, Generator


def random_generator(rng: random.Random, tiny: bool = False) -> Generator:
    """A generator with mixed coefficient scales.

    ``tiny`` keeps the operating range a few MW wide so that exhaustive
    grid scans at 0.001 MW stay tractable.
    """
    p_min = rng.uniform(0.0, 60.0)
    width = rng.uniform(1.0, 3.5) if tiny else rng.uniform(5.0, 120.0)
    a = 0.0 if rng.random() < 0.25 else rng.uniform(1e-4, 0.05)
    d = 0.0 if rng.random() < 0.15 else rng.uniform(5.0, 200.0)
    return Generator(
        a=a,
        b=rng.uniform(0.5, 40.0),
        c=rng.uniform(0.0, 500.0),
        d=d,
        e=rng.uniform(0.03, 1.5),
        p_min=p_min,
        p_max=p_min + width,
    )


def random_problem(rng: random.Random, n: int, tiny: bool = False) -> DispatchProblem:
    gens = tuple(random_generator(rng, tiny=tiny) for _ in range(n))
    lo = sum(g.p_min for g in gens)
    hi = sum(g.p_max for g in gens)
    frac = rng.uniform(0.15, 0.85)
    return DispatchProblem(gens, lo + frac * (hi - lo), name=f"rand{n}")


def lower_hull(xs, ys):
    """Vertices of the lower convex hull of the points (xs, ys).

    Independent geometric oracle (monotone scan keeping slopes increasing);
    evaluating the hull with np.interp approximates the convex envelope of
    the sampled function from above.
    """
    hx: list[float] = []
    hy: list[float] = []
    for x, y in zip(xs, ys):
        if hx and x - hx[-1] <= 1e-15:  # duplicate abscissa: keep the lower
            if y < hy[-1]:
                hx.pop()
                hy.pop()
            else:
                continue
        while len(hx) >= 2:
            s_new = (y - hy[-2]) / (x - hx[-2])
            s_old = (hy[-1] - hy[-2]) / (hx[-1] - hx[-2])
            if s_new <= s_old:
                hx.pop()
                hy.pop()
            else:
                break
        hx.append(x)
        hy.append(y)
    return np.array(hx), np.array(hy)


def envelope_slopes(env):
    """Flattened one-sided slope sequence of an envelope's pieces."""
    out = []
    for q in env.pieces:
        out.append(q.slope(q.lo))
        out.append(q.slope(q.hi))
    return out


def assert_convex_slopes(env, tol=1e-9):
    s = envelope_slopes(env)
    scale = max(1.0, max(abs(v) for v in s))
    for a, b in zip(s, s[1:]):
        assert b >= a - tol * scale, f"slope drop {a} -> {b}"


@pytest.fixture
def rng():
    return random.Random(20240901)

"""Problem data, true cost evaluation and dataset I/O for economic load dispatch.

A dispatch problem is a set of generating units that together must meet a
fixed demand.  Each unit's hourly fuel cost is a convex quadratic plus a
rectified-sine ripple created by the sequential opening of steam admission
valves::

    cost(p) = a*p**2 + b*p + c + d*|sin(e*(p - p_min))|     [$/h, p in MW]

All types are immutable and all operations are pure, so problems can be
shared freely across worker threads or processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

__all__ = [
    "DatasetError",
    "Generator",
    "DispatchProblem",
    "Feasibility",
    "unit_cost",
    "total_cost",
    "check_feasible",
    "lipschitz_constant",
    "load_problem",
    "dump_problem",
    "read_problem",
    "bundled_problem",
    "bundled_names",
]


class DatasetError(ValueError):
    """Malformed dataset text or a violated problem invariant."""


@dataclass(frozen=True)
class Generator:
    """Fuel-cost coefficients and capacity bounds of one generating unit.

    Attributes:
        a: quadratic fuel coefficient, $/MW^2/h (>= 0; 0 gives a linear curve).
        b: linear fuel coefficient, $/MWh.
        c: no-load cost, $/h.
        d: valve ripple amplitude, $/h (>= 0; 0 disables the ripple).
        e: valve ripple frequency, rad/MW (> 0).
        p_min: minimum stable output, MW.
        p_max: maximum output, MW.
    """

    a: float
    b: float
    c: float
    d: float
    e: float
    p_min: float
    p_max: float

    def __post_init__(self):
        vals = (self.a, self.b, self.c, self.d, self.e, self.p_min, self.p_max)
        if not all(math.isfinite(v) for v in vals):
            raise DatasetError(f"non-finite generator coefficient in {vals!r}")
        if self.a < 0.0:
            raise DatasetError(f"quadratic coefficient a={self.a} must be >= 0")
        if self.d < 0.0:
            raise DatasetError(f"ripple amplitude d={self.d} must be >= 0")
        if self.e <= 0.0:
            raise DatasetError(f"ripple frequency e={self.e} must be > 0")
        if self.p_min > self.p_max:
            raise DatasetError(
                f"p_min={self.p_min} exceeds p_max={self.p_max}")


@dataclass(frozen=True)
class DispatchProblem:
    """An ordered list of generators plus the system demand in MW."""

    generators: tuple[Generator, ...]
    demand: float
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if not self.generators:
            raise DatasetError("a dispatch problem needs at least one generator")
        lo = sum(g.p_min for g in self.generators)
        hi = sum(g.p_max for g in self.generators)
        if not (lo <= self.demand <= hi):
            raise DatasetError(
                f"demand {self.demand} MW outside the deliverable range "
                f"[{lo}, {hi}] MW; the feasible set is empty")

    @property
    def n(self) -> int:
        return len(self.generators)


@dataclass(frozen=True)
class Feasibility:
    """Verdict of a feasibility check, with the violations that caused it.

    ``balance_residual`` is sum(p) - demand in MW.  ``box_violations`` holds
    one ``(unit_index, overshoot)`` pair per violated capacity bound, with
    overshoot < 0 meaning below p_min and > 0 above p_max.
    """

    feasible: bool
    balance_residual: float
    box_violations: tuple[tuple[int, float], ...]

    def __bool__(self) -> bool:
        return self.feasible


def unit_cost(g: Generator, p: float) -> float:
    """Hourly cost of generator ``g`` at output ``p`` MW.

    Evaluation outside [p_min, p_max] is permitted for diagnostics.
    """
    return (g.a * p + g.b) * p + g.c + g.d * abs(math.sin(g.e * (p - g.p_min)))


def total_cost(problem: DispatchProblem, p: Sequence[float]) -> float:
    """Total hourly cost of a dispatch, the sum of the per-unit costs."""
    if len(p) != problem.n:
        raise ValueError(
            f"dispatch has {len(p)} entries for {problem.n} generators")
    return sum(unit_cost(g, pi) for g, pi in zip(problem.generators, p))


def check_feasible(
    problem: DispatchProblem,
    p: Sequence[float],
    tol_balance: float | None = None,
    tol_box: float = 1e-9,
) -> Feasibility:
    """Check power balance and capacity bounds of a dispatch.

    ``tol_balance`` defaults to 1e-6 times the demand, tight enough that
    MW values quoted to three decimals stay meaningful.
    """
    if len(p) != problem.n:
        raise ValueError(
            f"dispatch has {len(p)} entries for {problem.n} generators")
    if tol_balance is None:
        tol_balance = 1e-6 * abs(problem.demand)
    residual = math.fsum(p) - problem.demand
    violations = []
    for i, (g, pi) in enumerate(zip(problem.generators, p)):
        if pi < g.p_min - tol_box:
            violations.append((i, pi - g.p_min))
        elif pi > g.p_max + tol_box:
            violations.append((i, pi - g.p_max))
    ok = abs(residual) <= tol_balance and not violations
    return Feasibility(ok, residual, tuple(violations))


def lipschitz_constant(problem: DispatchProblem) -> float:
    """A Lipschitz constant of the total cost on the feasible box, $/MWh.

    Equals sum_i (2*a_i*p_max_i + b_i + d_i*e_i): the quadratic slope is
    largest at p_max and the ripple slope is at most d*e.
    """
    return sum(2.0 * g.a * g.p_max + g.b + g.d * g.e
               for g in problem.generators)


# ---------------------------------------------------------------------------
# Dataset text format
#
# UTF-8 text.  '#' starts a comment anywhere on a line.  The first data line
# is 'demand <MW>'; every following data line describes one unit as seven
# whitespace-separated decimal numbers: a b c d e p_min p_max.
# ---------------------------------------------------------------------------

_FIELDS = ("a", "b", "c", "d", "e", "p_min", "p_max")


def load_problem(text: str, name: str = "") -> DispatchProblem:
    """Parse dataset text into a validated :class:`DispatchProblem`."""
    demand = None
    gens: list[Generator] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if demand is None:
            parts = line.split()
            if len(parts) != 2 or parts[0].lower() != "demand":
                raise DatasetError(
                    f"line {lineno}: expected 'demand <MW>', got {line!r}")
            try:
                demand = float(parts[1])
            except ValueError:
                raise DatasetError(
                    f"line {lineno}: demand value {parts[1]!r} is not a number"
                ) from None
            continue
        parts = line.split()
        if len(parts) != len(_FIELDS):
            raise DatasetError(
                f"line {lineno}: expected {len(_FIELDS)} fields "
                f"({' '.join(_FIELDS)}), got {len(parts)}")
        values = []
        for field, part in zip(_FIELDS, parts):
            try:
                values.append(float(part))
            except ValueError:
                raise DatasetError(
                    f"line {lineno}: field {field}={part!r} is not a number"
                ) from None
        try:
            gens.append(Generator(*values))
        except DatasetError as exc:
            raise DatasetError(f"line {lineno} (unit {len(gens) + 1}): {exc}") from None
    if demand is None:
        raise DatasetError("dataset has no 'demand' line")
    if not gens:
        raise DatasetError("dataset has no generator lines")
    return DispatchProblem(tuple(gens), demand, name=name)


def dump_problem(problem: DispatchProblem) -> str:
    """Serialize a problem back to dataset text.

    Floats are written with repr, so load_problem(dump_problem(p)) returns a
    bit-identical problem.
    """
    lines = []
    if problem.name:
        lines.append(f"# {problem.name}")
    lines.append(f"demand {problem.demand!r}")
    lines.append("# a b c d e p_min p_max")
    for g in problem.generators:
        lines.append(f"{g.a!r} {g.b!r} {g.c!r} {g.d!r} {g.e!r} "
                     f"{g.p_min!r} {g.p_max!r}")
    return "\n".join(lines) + "\n"


def read_problem(path) -> DispatchProblem:
    """Load a dataset file from disk."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    import os
    stem = os.path.splitext(os.path.basename(str(path)))[0]
    return load_problem(text, name=stem)


def bundled_names() -> tuple[str, ...]:
    """Names of the benchmark datasets shipped with the package."""
    root = resources.files("eldp.datasets")
    return tuple(sorted(
        entry.name[:-4] for entry in root.iterdir()
        if entry.name.endswith(".txt")))


def bundled_problem(name: str) -> DispatchProblem:
    """Load one of the bundled benchmark datasets by name (e.g. 'case1')."""
    ref = resources.files("eldp.datasets").joinpath(f"{name}.txt")
    try:
        text = ref.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DatasetError(
            f"no bundled dataset {name!r}; available: "
            f"{', '.join(bundled_names())}") from None
    return load_problem(text, name=name)

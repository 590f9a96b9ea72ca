"""Globally certified economic load dispatch with valve-point effects.

The package solves min sum_i a_i p_i^2 + b_i p_i + c_i +
d_i |sin(e_i (p_i - p_min_i))| subject to the power balance and capacity
bounds, to a proven optimality gap, by compiling piecewise-linear sine
surrogates into piecewise-quadratic costs and running an in-process spatial
branch-and-bound with convex envelope relaxations.
"""

from .adaptive import AdaptiveConfig, IterationRecord, adaptive_solve, format_trace
from .envelope import ConvexEnvelope, convex_envelope
from .model import (
    DatasetError,
    DispatchProblem,
    Feasibility,
    Generator,
    bundled_names,
    bundled_problem,
    check_feasible,
    dump_problem,
    lipschitz_constant,
    load_problem,
    read_problem,
    total_cost,
    unit_cost,
)
from .oracle import GridSpec, brute_force_true, enumerate_pieces
from .solver import (
    InfeasibleError,
    SolveReport,
    export_lp,
    kkt_residual,
    solve_separable_convex,
    solve_surrogate,
)
from .surrogate import (
    PiecewiseLinear,
    PiecewiseQuadratic,
    QuadPiece,
    TangentConfig,
    chord_pwl,
    compile_cost,
    identity_pwl,
    refine,
    sawtooth,
    tangent_pwl,
)

__version__ = "0.1.0"

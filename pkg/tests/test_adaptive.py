"""The chord refinement loop and its convergence certificates."""

import math

import pytest

from eldp.adaptive import AdaptiveConfig, adaptive_solve, format_trace
from eldp.model import DispatchProblem, Generator, bundled_problem
from eldp.oracle import GridSpec, brute_force_true
from eldp.surrogate import chord_pwl, compile_cost, refine, sawtooth

from conftest import random_problem


def assert_trace_chain(prob, trace, tol=1e-9):
    """Monotone surrogate optima, each below the matching true cost."""
    for r in trace:
        assert r.delta >= -tol
        assert r.surrogate_value <= r.true_cost + tol
    for a, b in zip(trace, trace[1:]):
        assert b.surrogate_value >= a.surrogate_value - tol


class TestAdaptive:
    def test_no_ripple_converges_immediately(self):
        gens = (Generator(0.01, 5.0, 20.0, 0.0, 0.1, 0.0, 100.0),
                Generator(0.02, 4.0, 10.0, 0.0, 0.1, 0.0, 100.0))
        prob = DispatchProblem(gens, 90.0)
        rep, trace = adaptive_solve(prob)
        assert len(trace) == 1
        assert trace[0].delta == pytest.approx(0.0, abs=1e-9)
        assert rep.certified

    def test_small_random_instances_certify(self, rng):
        for n in (1, 2, 3):
            prob = random_problem(rng, n)
            rep, trace = adaptive_solve(prob, AdaptiveConfig(epsilon=1e-3))
            assert rep.certified
            assert rep.true_cost - rep.certified_bound < 1e-3
            assert_trace_chain(prob, trace)

    def test_next_surrogate_exact_at_current_iterate(self, rng):
        prob = random_problem(rng, 2)
        cfg = AdaptiveConfig(epsilon=1e-6, max_iterations=6)
        rep, trace = adaptive_solve(prob, cfg)
        # replay the refinement and evaluate surrogate m+1 at iterate m
        bps = [(0.0, math.pi / 2)] * prob.n
        seed = None
        for m in range(min(len(trace), 4)):
            pwls = [chord_pwl(bp) for bp in bps]
            from eldp.solver import solve_surrogate
            r = solve_surrogate(prob, pwls, warm_start=seed)
            new_bps = []
            for bp, g, pi in zip(bps, prob.generators, r.p):
                new_bps.append(refine(bp, sawtooth(g.e * (pi - g.p_min)).t))
            bps = new_bps
            seed = r.p
            g_next = sum(
                compile_cost(g, chord_pwl(bp))(pi)
                for g, bp, pi in zip(prob.generators, bps, r.p))
            scale = 1e-9 * (1.0 + sum(g.d for g in prob.generators))
            assert g_next == pytest.approx(r.true_cost, abs=1e-9 + scale)

    def test_surrogate_bound_below_brute_force(self, rng):
        # every iterate's surrogate optimum lower-bounds the true optimum
        for n in (1, 2):
            prob = random_problem(rng, n, tiny=True)
            rep, trace = adaptive_solve(prob, AdaptiveConfig(epsilon=1e-4))
            _, f_grid = brute_force_true(prob, GridSpec(0.001))
            from eldp.model import lipschitz_constant
            slack = lipschitz_constant(prob) * max(n - 1, 0) * 0.001
            for r in trace:
                assert r.surrogate_value <= f_grid + slack + 1e-9

    def test_unconverged_flagged_and_best_iterate_kept(self):
        prob = bundled_problem("case2b")
        rep, trace = adaptive_solve(prob, AdaptiveConfig(
            epsilon=1e-9, max_iterations=2))
        assert not rep.certified
        assert len(trace) == 2
        assert rep.true_cost == pytest.approx(
            min(r.true_cost for r in trace), abs=1e-9)

    def test_termination_certificate(self, rng):
        prob = random_problem(rng, 2)
        rep, trace = adaptive_solve(prob, AdaptiveConfig(epsilon=1e-3))
        assert rep.certified
        assert rep.true_cost - rep.certified_bound < 1e-3

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            AdaptiveConfig(epsilon=0.0)
        with pytest.raises(ValueError):
            AdaptiveConfig(max_iterations=0)

    def test_trace_report_format(self, rng):
        prob = random_problem(rng, 2)
        _, trace = adaptive_solve(prob)
        text = format_trace(trace)
        lines = text.strip().splitlines()
        assert lines[0].startswith("iter")
        assert len(lines) == len(trace) + 1

"""The brute-force references themselves, on instances solvable by hand."""

import math

import pytest

from eldp.model import DispatchProblem, Generator, bundled_problem, lipschitz_constant, total_cost
from eldp.oracle import GridSpec, brute_force_true, enumerate_pieces
from eldp.solver import solve_surrogate
from eldp.surrogate import HALF_PI, chord_pwl, compile_cost, identity_pwl

from conftest import random_problem


class TestBruteForce:
    def test_single_unit_is_exact(self):
        g = Generator(0.02, 5.0, 10.0, 30.0, 0.2, 10.0, 90.0)
        prob = DispatchProblem((g,), 47.3)
        p, f = brute_force_true(prob, GridSpec(0.01))
        assert p == (47.3,)
        assert f == pytest.approx(total_cost(prob, p), rel=1e-14)

    def test_two_units_unique_feasible_point(self):
        g = Generator(0.01, 2.0, 1.0, 20.0, 0.3, 10.0, 50.0)
        prob = DispatchProblem((g, g), 20.0)  # both pinned at p_min
        p, f = brute_force_true(prob, GridSpec(0.01))
        assert p == pytest.approx((10.0, 10.0), abs=1e-9)
        assert f == pytest.approx(total_cost(prob, (10.0, 10.0)), rel=1e-12)

    def test_value_never_beats_the_optimum(self, rng):
        # the scan only visits feasible points, so it upper-bounds the optimum
        prob = random_problem(rng, 2, tiny=True)
        (p, f_coarse) = brute_force_true(prob, GridSpec(0.05))
        (_, f_fine) = brute_force_true(prob, GridSpec(0.002))
        assert f_coarse >= f_fine - 1e-12
        K = lipschitz_constant(prob)
        assert f_coarse <= f_fine + K * 1 * 0.05 + 1e-9

    def test_case1_within_lipschitz_grid_error(self):
        prob = bundled_problem("case1")
        step = 0.05
        (_, f) = brute_force_true(prob, GridSpec(step))
        K = lipschitz_constant(prob)
        assert abs(f - 8234.07) <= K * 2 * step

    def test_rejects_large_problems(self):
        prob = bundled_problem("case2a")
        with pytest.raises(ValueError):
            brute_force_true(prob, GridSpec(1.0))


@pytest.mark.slow
def test_case1_fine_grid_slow():
    prob = bundled_problem("case1")
    step = 0.01
    (_, f) = brute_force_true(prob, GridSpec(step))
    assert abs(f - 8234.07) <= lipschitz_constant(prob) * 2 * step


class TestEnumeratePieces:
    def test_single_unit_minimum_over_pieces(self):
        g = Generator(0.02, 5.0, 10.0, 30.0, 0.2, 10.0, 90.0)
        prob = DispatchProblem((g,), 47.3)
        pwls = [identity_pwl()]
        p, val = enumerate_pieces(prob, pwls)
        pwq = compile_cost(g, identity_pwl())
        assert p == pytest.approx((47.3,), abs=1e-9)
        assert val == pytest.approx(pwq(47.3), rel=1e-12)

    def test_two_units_match_fine_grid(self, rng):
        prob = random_problem(rng, 2, tiny=True)
        pwls = [identity_pwl()] * 2
        _, val = enumerate_pieces(prob, pwls)
        pwqs = [compile_cost(g, identity_pwl()) for g in prob.generators]
        g1, g2 = prob.generators
        best = math.inf
        steps = 4000
        for i in range(steps + 1):
            p1 = g1.p_min + (g1.p_max - g1.p_min) * i / steps
            p2 = prob.demand - p1
            if g2.p_min - 1e-12 <= p2 <= g2.p_max + 1e-12:
                p2 = min(max(p2, g2.p_min), g2.p_max)
                best = min(best, pwqs[0](p1) + pwqs[1](p2))
        K = lipschitz_constant(prob)
        span = g1.p_max - g1.p_min
        assert val <= best + 1e-9
        assert val >= best - K * span / steps - 1e-9

    def test_order_independence(self, rng):
        # permuting the units permutes the argmin but not the value
        prob = random_problem(rng, 3, tiny=True)
        perm = [2, 0, 1]
        shuffled = DispatchProblem(
            tuple(prob.generators[i] for i in perm), prob.demand)
        pts = [0.0, 0.8, HALF_PI]
        _, v1 = enumerate_pieces(prob, [chord_pwl(pts)] * 3)
        _, v2 = enumerate_pieces(shuffled, [chord_pwl(pts)] * 3)
        assert v1 == pytest.approx(v2, abs=1e-9)

    def test_combination_cap(self):
        prob = bundled_problem("case3")
        with pytest.raises(ValueError):
            enumerate_pieces(prob, [identity_pwl()] * prob.n, cap=1000)

    def test_agrees_with_branch_and_bound(self, rng):
        for n in (1, 2, 3):
            prob = random_problem(rng, n)
            pwls = [identity_pwl()] * n
            _, v_enum = enumerate_pieces(prob, pwls)
            rep = solve_surrogate(prob, pwls)
            assert rep.surrogate_value == pytest.approx(v_enum, abs=1e-6)

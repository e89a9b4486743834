"""Dimension maximization and Birkhoff spectrum bounds."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

import carpetdim as cd


def _cycle_means(n_digits, pot_values):
    """Mean weight of every simple cycle in the digit graph of a pair potential."""
    means = []
    for size in range(1, n_digits + 1):
        for verts in itertools.permutations(range(n_digits), size):
            total = 0.0
            for k in range(size):
                i, j = verts[k], verts[(k + 1) % size]
                total += pot_values[i * n_digits + j]
            means.append(total / size)
    return means


def test_alpha_bounds_match_cycle_enumeration(three_cell, full_square, pair_weights, corner_indicator):
    means = _cycle_means(3, pair_weights.values)
    lo, hi = cd.alpha_bounds(three_cell, pair_weights)
    assert math.isclose(lo, min(means), abs_tol=1e-12)
    assert math.isclose(hi, max(means), abs_tol=1e-12)

    rng = np.random.default_rng(13)
    pot = cd.Potential(full_square, 2, rng.normal(size=16))
    means = _cycle_means(4, pot.values)
    lo, hi = cd.alpha_bounds(full_square, pot)
    assert math.isclose(lo, min(means), abs_tol=1e-12)
    assert math.isclose(hi, max(means), abs_tol=1e-12)

    # order 1: the range is just the value range
    lo, hi = cd.alpha_bounds(full_square, corner_indicator)
    assert (lo, hi) == (0.0, 1.0)


def test_full_square_dimension_exact(full_square):
    res = cd.carpet_dimension(full_square)
    assert res.converged
    assert abs(res.dimension - 2.0) <= 1e-9
    np.testing.assert_allclose(res.measure.weights, 0.25, atol=1e-9)


def test_dimension_dominates_random_bernoulli(uneven):
    res = cd.carpet_dimension(uneven)
    assert res.converged
    rng = np.random.default_rng(21)
    for _ in range(50):
        p = rng.dirichlet(np.ones(4))
        mu = cd.BlockMeasure.bernoulli(uneven, p)
        assert cd.thermo(mu).dly <= res.dimension + 1e-9


def test_two_digit_system_matches_golden_section():
    # one digit per row makes dly(p) = h(p) / lyap_v(p), a clean 1-d problem
    doc = {
        "rows": [
            {"b": 0.5, "d": 0.0, "cols": [{"a": 0.4, "c": 0.0}]},
            {"b": 0.4, "d": 0.5, "cols": [{"a": 0.3, "c": 0.2}]},
        ]
    }
    sys_ = cd.validate(doc)

    def dly(p):
        q = 1.0 - p
        h = -(p * math.log(p) + q * math.log(q))
        lyap_v = -(p * math.log(0.5) + q * math.log(0.4))
        return h / lyap_v

    lo, hi = 1e-9, 1.0 - 1e-9
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1, x2 = hi - invphi * (hi - lo), lo + invphi * (hi - lo)
    f1, f2 = dly(x1), dly(x2)
    for _ in range(200):
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = dly(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = dly(x1)
    best = max(f1, f2)

    res = cd.carpet_dimension(sys_)
    assert res.converged
    assert abs(res.dimension - best) <= 1e-9


def test_bracket_rows_tighten_with_order(three_cell, pair_weights):
    rows = bracket = cd.bracket_refine(three_cell, pair_weights, 0.45, 3)
    assert [r.m for r in rows] == [1, 2, 3]
    for r in rows:
        assert r.feasible and r.converged
        assert r.lower <= r.upper + 1e-12
        # oscillation of the averaged pair potential decays like 1/m
        assert math.isclose(r.var_width, cd.var_avg(three_cell, pair_weights, r.m), abs_tol=1e-13)
    lows = [r.lower for r in bracket]
    assert lows[0] <= lows[1] + 1e-9 <= lows[2] + 2e-9
    dim = cd.carpet_dimension(three_cell).dimension
    assert all(r.upper <= dim + 1e-9 for r in rows)


def test_lower_bound_monotone_in_block_order(three_cell, pair_weights):
    p1 = cd.spectrum_point(three_cell, pair_weights, 0.3, m=1)
    p2 = cd.spectrum_point(three_cell, pair_weights, 0.3, m=2)
    assert p1.feasible and p2.feasible
    assert p1.converged and p2.converged
    assert p1.lower <= p2.lower + 1e-9


def test_infeasible_level_round_trip(three_cell, pair_weights):
    lo, hi = cd.alpha_bounds(three_cell, pair_weights)
    pt = cd.spectrum_point(three_cell, pair_weights, hi + 0.1)
    assert not pt.feasible
    assert pt.lower is None and pt.upper is None
    assert pt.converged
    assert pt.restarts_used == 0


def test_constant_potential_spectrum_collapses(three_cell):
    pot = cd.Potential(three_cell, 1, np.full(3, 0.7))
    assert cd.alpha_bounds(three_cell, pot) == (0.7, 0.7)
    dim = cd.carpet_dimension(three_cell).dimension
    at = cd.spectrum_point(three_cell, pot, 0.7)
    assert at.feasible
    assert math.isclose(at.lower, dim, abs_tol=1e-9)
    assert math.isclose(at.upper, dim, abs_tol=1e-9)
    assert not cd.spectrum_point(three_cell, pot, 0.5).feasible


def test_single_symbol_potential_pins_upper_to_lower(full_square, corner_indicator):
    pt = cd.spectrum_point(full_square, corner_indicator, 0.25)
    assert pt.var_width == 0.0
    assert pt.upper == pt.lower  # exact float equality, no slack in the sandwich
    assert abs(pt.upper - 2.0) <= 1e-6


def test_level_ranges_nest_toward_alpha_bounds(three_cell, pair_weights):
    lo, hi = cd.alpha_bounds(three_cell, pair_weights)
    lo1, hi1 = cd.level_range(three_cell, pair_weights, 1)
    lo2, hi2 = cd.level_range(three_cell, pair_weights, 2)
    assert lo - 1e-12 <= lo2 <= lo1 + 1e-12
    assert hi1 - 1e-12 <= hi2 <= hi + 1e-12
    # the pair potential attains its cycle bounds already at order 2
    assert math.isclose(lo2, lo, abs_tol=1e-12)
    assert math.isclose(hi2, hi, abs_tol=1e-12)


def test_spectrum_curve_rows_are_consistent(three_cell, pair_weights):
    pts = cd.spectrum_curve(three_cell, pair_weights, m=1, points=9)
    assert len(pts) == 9
    alphas = [p.alpha for p in pts]
    assert alphas == sorted(alphas)
    lo, hi = cd.alpha_bounds(three_cell, pair_weights)
    assert math.isclose(alphas[0], lo, abs_tol=1e-12)
    assert math.isclose(alphas[-1], hi, abs_tol=1e-12)
    # the grid spans the full level set range; order 1 only reaches part of it
    lo1, hi1 = cd.level_range(three_cell, pair_weights, 1)
    dim = cd.carpet_dimension(three_cell).dimension
    for p in pts:
        assert p.converged
        assert p.feasible == (lo1 - 1e-12 <= p.alpha <= hi1 + 1e-12)
        if p.feasible:
            assert 0.0 <= p.lower <= p.upper + 1e-12
            assert p.upper <= dim + 1e-9
    assert sum(p.feasible for p in pts) >= 5

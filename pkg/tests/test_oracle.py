"""Independent estimators: box counting, local dimension, grids."""

from __future__ import annotations

import math

import numpy as np
import pytest

import carpetdim as cd


def test_box_count_slope_near_two_on_full_square(full_square):
    rep = cd.box_count(full_square, 20000, 25, range(3, 7), seed=0)
    assert abs(rep.slope - 2.0) <= 0.05
    assert rep.js_used == [3, 4, 5, 6]
    assert rep.points_used == 20000
    counts = np.asarray(rep.counts)
    assert np.all(np.diff(counts) > 0)
    assert np.all(counts <= 4.0 ** np.asarray(rep.js))
    # occupancy correction only inflates
    assert np.all(np.asarray(rep.counts_corrected) >= counts - 1e-9)
    assert rep.residual < 1e-3
    assert rep.boxes is None


def test_box_count_drops_saturated_scales(full_square):
    rep = cd.box_count(full_square, 300, 25, range(2, 9), seed=1)
    assert len(rep.counts) == 7
    assert set(rep.js_used) < set(rep.js)
    assert 8 not in rep.js_used  # occupancy ~ sample size, unusable


def test_box_count_collect_returns_boxes(full_square):
    rep = cd.box_count(full_square, 5000, 25, range(3, 6), seed=1, collect=True)
    assert isinstance(rep.boxes, list) and len(rep.boxes) == 3
    for js, arr2 in zip(rep.js, rep.boxes):
        assert len(arr2) == rep.counts[rep.js.index(js)]


def test_box_count_deterministic(full_square):
    a = cd.box_count(full_square, 4000, 25, range(3, 6), seed=7)
    b = cd.box_count(full_square, 4000, 25, range(3, 6), seed=7)
    assert a.counts == b.counts and a.slope == b.slope


def test_local_dimension_uniform_square_is_exactly_two(full_square):
    mu = cd.BlockMeasure.uniform(full_square)
    orbit = cd.sample_orbit(mu, 200, seed=4)
    rep = cd.local_dimension(mu, orbit, 100)
    np.testing.assert_array_equal(rep.quotients, 2.0)
    assert rep.liminf_estimate == 2.0
    np.testing.assert_array_equal(rep.ns, np.arange(1, 101))


def test_local_dimension_point_mass_is_zero(three_cell):
    mu = cd.BlockMeasure.dense(three_cell, 1, np.array([1.0, 0.0, 0.0]))
    orbit = cd.make_orbit(three_cell, [0] * 50)
    rep = cd.local_dimension(mu, orbit, 30)
    np.testing.assert_allclose(rep.quotients, 0.0, atol=0)
    assert rep.liminf_estimate == 0.0


def test_local_dimension_zero_cylinder(three_cell):
    mu = cd.BlockMeasure.dense(three_cell, 1, np.array([0.5, 0.5, 0.0]))
    orbit = cd.make_orbit(three_cell, [0, 1, 2] * 20)
    with pytest.raises(cd.ZeroCylinder, match="measure zero"):
        cd.local_dimension(mu, orbit, 20)


def test_local_dimension_needs_dense_weights(three_cell):
    mu = cd.BlockMeasure.degenerate(three_cell, [0])
    orbit = cd.make_orbit(three_cell, [0] * 20)
    with pytest.raises(ValueError, match="dense"):
        cd.local_dimension(mu, orbit, 10)


def test_empirical_level_set_fraction_monotone_in_tolerance(three_cell, pair_weights):
    reps = [
        cd.empirical_level_set(three_cell, pair_weights, 0.45, tol, orbits=40, length=1500, seed=0)
        for tol in (0.005, 0.02, 0.1)
    ]
    fracs = [r.fraction for r in reps]
    assert fracs == sorted(fracs)
    assert fracs[-1] == 1.0
    # the deviation statistic does not depend on the acceptance window
    assert reps[0].mean_deviation == reps[2].mean_deviation
    assert reps[0].mean_deviation < 0.05
    with pytest.raises(ValueError, match="infeasible"):
        cd.empirical_level_set(three_cell, pair_weights, 2.0, 0.05, orbits=5, length=100, seed=0)


def test_grid_search_guards(three_cell, uneven):
    with pytest.raises(cd.GuardExceeded, match="simplex dimension"):
        cd.grid_search_dly(cd.iterate(three_cell, 2))
    with pytest.raises(cd.GuardExceeded, match="lattice points"):
        cd.grid_search_dly(uneven, step=1e-5)


def test_closed_form_dimension_oracle(full_square, three_cell, uneven):
    assert cd.grid_carpet_dimension(full_square) == 2.0
    want = math.log2(2 ** (math.log(2) / math.log(3)) + 1)
    assert abs(cd.grid_carpet_dimension(three_cell) - want) <= 1e-12
    # heterogeneous ratios have no grid formula
    with pytest.raises(ValueError, match="uniform contraction"):
        cd.grid_carpet_dimension(uneven)


def test_unconstrained_grid_tracks_ascent(three_cell):
    coarse, arg = cd.grid_search_dly(three_cell, step=0.01)
    dim = cd.carpet_dimension(three_cell).dimension
    assert coarse <= dim + 1e-12
    assert dim - coarse <= 1e-3
    assert math.isclose(arg.sum(), 1.0, abs_tol=1e-12)
    fine, _ = cd.grid_search_dly(three_cell, step=0.002)
    assert coarse <= fine <= dim + 1e-12


def test_constrained_grid_brackets_level_ascent(three_cell, pair_weights):
    # the grid accepts a slab of width ~step around alpha, so it upper-bounds
    # the exact slice and tightens as the step shrinks
    for alpha in (0.2, 0.1):
        sp = cd.spectrum_point(three_cell, pair_weights, alpha, m=1)
        assert sp.feasible and sp.converged
        coarse, _ = cd.grid_search_dly(three_cell, pair_weights, alpha=alpha, m=1, step=0.01)
        fine, _ = cd.grid_search_dly(three_cell, pair_weights, alpha=alpha, m=1, step=0.002)
        assert coarse >= fine >= sp.lower - 1e-9
        assert fine - sp.lower <= 0.01

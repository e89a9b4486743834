"""Orbits, cutting indices, approximate squares, and return gaps."""

from __future__ import annotations

import math

import numpy as np
import pytest

import carpetdim as cd


def test_cutting_index_closed_form_on_uniform_rows(three_cell):
    # a = 1/3 and b = 1/2 everywhere, so L_n = ceil(n log2 / log3)
    orbit = cd.sample_orbit(cd.BlockMeasure.uniform(three_cell), 200, seed=3)
    for n in range(1, 60):
        assert cd.cutting_index(orbit, n) == math.ceil(n * math.log(2) / math.log(3))


def test_cutting_indices_monotone_and_bounded(uneven):
    orbit = cd.sample_orbit(cd.BlockMeasure.uniform(uneven), 300, seed=5)
    cuts = cd.cutting_indices(orbit, 120)
    assert cuts.shape == (120,)
    assert np.all(np.diff(cuts) >= 0)
    # a <= b digitwise forces L_n <= n
    assert np.all(cuts <= np.arange(1, 121))
    assert np.all(cuts >= 1)


def test_approx_square_aspect_ratio_bound(uneven):
    orbit = cd.sample_orbit(cd.BlockMeasure.uniform(uneven), 500, seed=11)
    for n in range(1, 400):
        sq = cd.approx_square(orbit, n)
        ratio = math.exp(sq.log_width - sq.log_height)
        assert uneven.a_min - 1e-12 < ratio <= 1.0 + 1e-12


def test_approx_square_contains_projected_point(uneven):
    orbit = cd.sample_orbit(cd.BlockMeasure.uniform(uneven), 500, seed=11)
    (x, y), err = cd.project_point(orbit)
    assert err < 1e-100
    for n in (1, 5, 17, 80):
        x0, y0, w, h = cd.approx_square(orbit, n).rect
        assert x0 - 1e-12 <= x <= x0 + w + 1e-12
        assert y0 - 1e-12 <= y <= y0 + h + 1e-12


def test_approx_square_splits_word_at_cut(three_cell):
    orbit = cd.sample_orbit(cd.BlockMeasure.uniform(three_cell), 100, seed=7)
    sq = cd.approx_square(orbit, 20)
    assert sq.cut == cd.cutting_index(orbit, 20)
    np.testing.assert_array_equal(sq.word_h, orbit.word[: sq.cut])
    assert len(sq.rows_v) == 20 - sq.cut


def _brute_gap(word, n, n_digits):
    first = {}
    for pos in range(n, len(word)):
        d = int(word[pos])
        first.setdefault(d, pos + 1)
        if len(first) == n_digits:
            return max(first.values()) - n
    raise AssertionError("digit missing from tail")


def test_return_gaps_match_forward_scan(three_cell):
    word = [0, 1, 2, 0, 0, 1, 2, 2, 1, 0] * 30
    orbit = cd.make_orbit(three_cell, word)
    gaps = cd.return_gaps(orbit, 50)
    for n in range(1, 51):
        want = _brute_gap(word, n, 3)
        assert gaps[n - 1] == want
        assert cd.return_gap(orbit, n) == want


def test_return_gap_missing_digit(three_cell):
    orbit = cd.make_orbit(three_cell, [0, 1, 1, 1, 1, 1, 1, 1])
    with pytest.raises(cd.DigitNeverRecurs, match="never occurs"):
        cd.return_gap(orbit, 1)
    with pytest.raises(cd.DigitNeverRecurs):
        cd.return_gaps(orbit, 3)


def test_prefix_guards(three_cell):
    orbit = cd.make_orbit(three_cell, [0, 1, 2] * 10)
    with pytest.raises(cd.PrefixTooShort):
        cd.cutting_index(orbit, 200)
    with pytest.raises(cd.PrefixTooShort):
        cd.return_gap(orbit, 30)
    with pytest.raises(cd.PrefixTooShort):
        cd.return_gaps(orbit, 30)


def test_frequency_counts_and_law_of_large_numbers(three_cell):
    word = [0, 1, 2, 0, 0, 1, 2, 2, 1, 0] * 30
    orbit = cd.make_orbit(three_cell, word)
    fv = cd.frequency(orbit, 25)
    assert fv.n == 25
    assert fv.counts.sum() == 25
    np.testing.assert_array_equal(fv.counts, np.bincount(word[:25], minlength=3))

    probs = np.array([0.6, 0.3, 0.1])
    mu = cd.BlockMeasure.bernoulli(three_cell, probs)
    big = cd.frequency(cd.sample_orbit(mu, 20000, seed=1), 20000)
    np.testing.assert_allclose(big.counts / big.n, probs, atol=0.02)


def test_sample_orbit_deterministic(three_cell):
    mu = cd.BlockMeasure.uniform(three_cell)
    a = cd.sample_orbit(mu, 64, seed=9)
    b = cd.sample_orbit(mu, 64, seed=9)
    c = cd.sample_orbit(mu, 64, seed=10)
    np.testing.assert_array_equal(a.word, b.word)
    assert not np.array_equal(a.word, c.word)
    assert a.seed == 9


def test_orbit_io_round_trip(tmp_path, three_cell, full_square):
    orbit = cd.sample_orbit(cd.BlockMeasure.uniform(full_square), 40, seed=2)
    path = tmp_path / "orbit.txt"
    cd.write_orbit(path, orbit, meta={"note": "round trip"})
    assert path.read_text().startswith("# system=sha256:")
    back = cd.read_orbit(path, full_square)
    np.testing.assert_array_equal(back.word, orbit.word)

    # a digit the smaller system lacks must be rejected
    with pytest.raises(KeyError, match=r"no digit \(2,2\)"):
        cd.read_orbit(path, three_cell)

    bad = tmp_path / "bad.txt"
    bad.write_text("not an orbit\n")
    with pytest.raises(cd.OrbitFormatError):
        cd.read_orbit(bad, three_cell)
    empty = tmp_path / "empty.txt"
    empty.write_text("# seed=1\n")
    with pytest.raises(cd.OrbitFormatError, match="empty"):
        cd.read_orbit(empty, three_cell)

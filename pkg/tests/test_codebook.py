import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from beamtrack.codebook import AngularGrid, build_codebook, coverage_probability, ideal_gain
from beamtrack.geometry import ArrayConfig, steering_vector


def _ratio_by_level(cb):
    """Minimum over beams of mean in-coverage |gain|^2 / mean out-of-coverage |gain|^2."""
    g2 = np.abs(cb.gains) ** 2
    inside = (g2 * cb.masks).sum(1) / cb.masks.sum(1)
    outside = (g2 * (1 - cb.masks)).sum(1) / (1 - cb.masks).sum(1)
    r = inside / outside
    return {l: r[cb.levels == l].min() for l in range(1, cb.n_levels + 1)}


def test_grid_centres_and_width(grid):
    assert grid.width == pytest.approx(2.8125)
    assert grid.centers[0] == pytest.approx(-180 + 2.8125 / 2)
    assert grid.centers[-1] == pytest.approx(-2.8125 / 2)
    edges = grid.lo + grid.width * np.arange(grid.n_bins + 1)
    assert edges[-1] == pytest.approx(grid.hi)


def test_grid_bin_index(grid):
    assert grid.bin_index(-180.0) == 0
    assert grid.bin_index(0.0) == 63  # right edge belongs to the last bin
    assert grid.bin_index(-180 + 2.8125) == 1
    np.testing.assert_array_equal(grid.bin_index(grid.centers), np.arange(64))
    assert grid.wrap(0.5) == pytest.approx(-179.5)


def test_grid_validation():
    with pytest.raises(ValueError):
        AngularGrid(0)
    with pytest.raises(ValueError):
        AngularGrid(8, 0, -1)


def test_codebook_shape(cb):
    assert cb.n_levels == 6
    assert len(cb.beams) == 126
    for l in range(1, 7):
        ks = cb.indices[cb.levels == l]
        np.testing.assert_array_equal(ks, np.arange(1, 2**l + 1))


def test_masks_tile_every_level(cb):
    for l in range(1, 7):
        sel = cb.levels == l
        np.testing.assert_array_equal(cb.masks[sel].sum(0), np.ones(64))
        assert np.all(cb.masks[sel].sum(1) == 64 // 2**l)
    finest = cb.masks[cb.levels == 6]
    np.testing.assert_array_equal(finest, np.eye(64))


def test_beams_unit_norm(cb, cb_ideal):
    for book in (cb, cb_ideal):
        np.testing.assert_allclose(np.linalg.norm(book.weights, axis=1), 1.0, atol=1e-9)


def test_bin_gains_are_beam_responses(cb, array, grid):
    for bid in (0, 17, 125):
        b = cb.beams[bid]
        for i in (0, 31, 63):
            assert b.bin_gains[i] == pytest.approx(np.vdot(b.weights, steering_vector(array, grid.centers[i])), abs=1e-12)
            assert cb.response(bid, grid.centers[i]) == pytest.approx(b.bin_gains[i], abs=1e-12)


def test_responses_match_response(cb, cb_ideal):
    for book in (cb, cb_ideal):
        ids = [0, 5, 70, 125]
        out = book.responses(ids, -47.3)
        np.testing.assert_allclose(out, [book.response(i, -47.3) for i in ids], atol=1e-13)


def test_ideal_mode_gains(cb_ideal):
    b = cb_ideal.beam(6, 10)
    g = b.bin_gains
    assert abs(g[9]) == pytest.approx(1.0)
    assert np.count_nonzero(g) == 1
    for l in range(1, 6):
        assert ideal_gain(l + 1, 6) ** 2 / ideal_gain(l, 6) ** 2 == pytest.approx(2.0, abs=1e-15)
    assert cb_ideal.response(cb_ideal.beam_id(6, 10), cb_ideal.grid.centers[9]) == pytest.approx(1.0)
    assert cb_ideal.response(cb_ideal.beam_id(6, 10), cb_ideal.grid.centers[10]) == 0


def test_ideal_gain_values():
    assert ideal_gain(6, 6) ** 2 == pytest.approx(1.0)
    assert ideal_gain(5, 6) ** 2 == pytest.approx(0.5)
    assert ideal_gain(1, 6) ** 2 == pytest.approx(0.03125)
    with pytest.raises(ValueError):
        ideal_gain(0, 6)
    with pytest.raises(ValueError):
        ideal_gain(7, 6)


def test_level_one_ideal_gain_is_the_right_order_of_the_built_beam(cb):
    # pseudo-inverse beams are not exactly flat; the in-coverage mean power
    # only agrees with 2^(l-S) to within a factor of two
    b = cb.beam(1, 1)
    mean_in = np.mean(np.abs(b.bin_gains[b.coverage_mask]) ** 2)
    assert 0.5 <= mean_in / ideal_gain(1, 6) ** 2 <= 2.0


def test_pseudo_inverse_level_one_dominance(cb):
    b = cb.beam(1, 1)
    g2 = np.abs(b.bin_gains) ** 2
    assert g2[b.coverage_mask].mean() >= 3 * g2[~b.coverage_mask].mean()


@pytest.mark.xfail(strict=True, reason=(
    "with half-wavelength spacing a(-180 deg) == a(0 deg): the grid wraps onto itself at endfire "
    "and beams touching either end leak into the other, so levels 1, 2, 5 and 6 only reach "
    "3.2x, 5.7x, 8.3x and 7.4x"))
def test_pseudo_inverse_tenfold_dominance_every_level(cb):
    ratios = _ratio_by_level(cb)
    assert all(r >= 10 for r in ratios.values()), ratios


def test_tenfold_dominance_without_endfire_aliasing():
    arr = ArrayConfig(spacing_ratio=0.45)
    book = build_codebook(arr, AngularGrid.for_array(arr))
    assert min(_ratio_by_level(book).values()) >= 10


def test_condition_number_reported(cb):
    assert np.isfinite(cb.condition_number) and cb.condition_number >= 1


def test_bad_inputs(array):
    with pytest.raises(ValueError):
        build_codebook(array, AngularGrid(48, -180, 0))
    with pytest.raises(ValueError):
        build_codebook(array, AngularGrid(64, -180, 0), mode="dft")


def test_covering_beam(cb):
    assert cb.covering_beam(6, 9) == cb.beam_id(6, 10)
    assert cb.covering_beam(1, 40) == cb.beam_id(1, 2)
    for l in range(1, 7):
        for i in (0, 13, 63):
            assert cb.beams[cb.covering_beam(l, i)].coverage_mask[i]
    with pytest.raises(KeyError):
        cb.beam_id(3, 9)


def test_gain_pattern_rows(cb):
    rows = list(cb.gain_pattern_rows())
    assert len(rows) == 126 * 64
    level, index, b, g2, ph = rows[0]
    assert (level, index, b) == (1, 1, 1)
    assert g2 == pytest.approx(abs(cb.beams[0].bin_gains[0]) ** 2)


def test_coverage_probability_examples(cb):
    uni = np.full(64, 1 / 64)
    assert coverage_probability(uni, cb.beam(1, 1)) == pytest.approx(0.5)
    point = np.zeros(64)
    point[5] = 1
    assert coverage_probability(point, cb.beam(3, 1)) == pytest.approx(1.0)
    assert coverage_probability([0.1, 0.2, 0.3, 0.4], np.array([0, 1, 1, 0])) == pytest.approx(0.5)


posteriors = arrays(float, 64, elements=st.floats(0, 1)).filter(lambda p: p.sum() > 1e-6).map(lambda p: p / p.sum())


@given(posteriors, posteriors, st.floats(0, 1))
def test_coverage_is_linear(p1, p2, a):
    m = np.zeros(64, bool)
    m[10:30] = True
    mix = a * p1 + (1 - a) * p2
    assert coverage_probability(mix, m) == pytest.approx(
        a * coverage_probability(p1, m) + (1 - a) * coverage_probability(p2, m), abs=1e-12)


@given(posteriors, st.integers(1, 6), st.integers(0, 63))
def test_coverage_monotone_under_mask_inclusion(cb, p, level, bin_idx):
    child = cb.beams[cb.covering_beam(level, bin_idx)]
    parent = cb.beams[cb.covering_beam(max(level - 1, 1), bin_idx)]
    assert np.all(child.coverage_mask <= parent.coverage_mask)
    assert coverage_probability(p, child) <= coverage_probability(p, parent) + 1e-12

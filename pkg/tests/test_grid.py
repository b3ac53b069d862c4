import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from advflow import ScalarField, ball_stencil, build_grid, dilate, erode
from advflow.grid import ball_offsets, inner_parallel


def brute_window(u, offsets, op):
    """Per-cell reduction over in-domain stencil neighbours, by explicit loops."""
    g = u.grid
    out = np.full(g.shape, np.nan)
    for idx in itertools.product(*(range(n) for n in g.shape)):
        if not g.omega[idx]:
            continue
        vals = []
        for o in offsets:
            y = tuple(i + int(k) for i, k in zip(idx, o))
            if all(0 <= yi < n for yi, n in zip(y, g.shape)) and g.omega[y]:
                vals.append(u.values[y])
        out[idx] = op(vals)
    return out


def test_box_grid_counts():
    g = build_grid(((-1, 1), (-1, 1)), 0.5)
    assert g.shape == (4, 4)
    assert g.n_cells == 16


def test_cell_centres_1d():
    g = build_grid(((0, 1),), 0.25)
    np.testing.assert_allclose(g.axes()[0], [0.125, 0.375, 0.625, 0.875])


def test_centered_ball_count_matches_direct_count():
    g = build_grid(((-1, 1), (-1, 1)), 0.01, "centered-ball(0.9)")
    x = (np.arange(200) + 0.5) * 0.01 - 1
    xx, yy = np.meshgrid(x, x, indexing="ij")
    assert g.n_cells == int(np.count_nonzero(xx**2 + yy**2 < 0.81))


def test_grid_errors():
    with pytest.raises(ValueError, match="multiple"):
        build_grid(((0, 1),), 0.3)
    with pytest.raises(ValueError, match="positive"):
        build_grid(((0, 1),), 0.0)
    with pytest.raises(ValueError, match="no cells"):
        build_grid(((0, 1), (0, 1)), 0.25, np.zeros((4, 4), bool))
    mask = np.zeros((4, 4), bool)
    mask[0, 0] = mask[3, 3] = True
    with pytest.raises(ValueError, match="disconnected"):
        build_grid(((0, 1), (0, 1)), 0.25, mask)


def test_field_marks_outside_cells_undefined():
    g = build_grid(((-1, 1), (-1, 1)), 0.25, "centered-ball(0.8)")
    u = ScalarField(g, np.ones(g.shape))
    assert np.all(np.isnan(u.values[~g.omega]))
    with pytest.raises(ValueError):
        ScalarField(g, np.where(g.omega, np.inf, 0.0))


def test_stencil_examples():
    g1 = build_grid(((0, 4),), 1.0)
    assert sorted(ball_stencil(g1, 1.0).offsets[:, 0].tolist()) == [-1, 0, 1]
    g2 = build_grid(((0, 4), (0, 4)), 1.0)
    offs = {tuple(o) for o in ball_stencil(g2, 1.5).offsets.tolist()}
    assert offs == {(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)}
    # lattice points with |o| <= 3.5, counted independently
    count = sum(1 for i in range(-4, 5) for j in range(-4, 5) if i * i + j * j <= 12.25)
    assert count == 37
    g3 = build_grid(((0, 1), (0, 1)), 0.1)
    assert ball_stencil(g3, 0.35).size == 37


def test_stencil_invariants_and_errors():
    offs = ball_offsets(2.7, 2)
    as_set = {tuple(o) for o in offs.tolist()}
    assert (0, 0) in as_set
    assert all((-a, -b) in as_set for a, b in as_set)
    g = build_grid(((0, 1),), 0.1)
    with pytest.raises(ValueError):
        ball_stencil(g, 0.0)
    with pytest.warns(UserWarning):
        assert ball_stencil(g, 0.05).size == 1


def test_dilate_erode_1d_example():
    g = build_grid(((0, 2.5),), 0.5)
    u = ScalarField(g, np.array([0, 0, 1, 0, 0.0]))
    s = ball_stencil(g, 0.6)
    np.testing.assert_array_equal(dilate(u, s).values, [0, 1, 1, 1, 0])
    np.testing.assert_array_equal(erode(u, s).values, [0, 0, 0, 0, 0])


def test_constant_is_fixed():
    g = build_grid(((0, 1), (0, 1)), 1 / 8)
    u = ScalarField(g, np.full(g.shape, 2.5))
    s = ball_stencil(g, 0.3)
    np.testing.assert_array_equal(dilate(u, s).values, u.values)
    np.testing.assert_array_equal(erode(u, s).values, u.values)


@pytest.mark.parametrize("omega", ["full-box", "centered-ball(0.45)"])
def test_window_operators_match_brute_force(rng, omega):
    g = build_grid(((0, 1), (0, 1)), 1 / 8, omega)
    u = ScalarField(g, rng.normal(size=g.shape))
    s = ball_stencil(g, 0.3)
    np.testing.assert_array_equal(dilate(u, s).values, brute_window(u, s.offsets, max))
    np.testing.assert_array_equal(erode(u, s).values, brute_window(u, s.offsets, min))


def test_dilate_warns_on_huge_radius():
    g = build_grid(((0, 1),), 0.25)
    u = ScalarField(g, np.arange(4.0))
    with pytest.warns(UserWarning, match="diameter"):
        dilate(u, ball_stencil(g, 5.0))


fields = arrays(np.float64, (8, 8), elements=st.floats(-5, 5, allow_nan=False))


@given(fields, st.sampled_from([0.13, 0.2, 0.3]))
def test_erode_is_negated_dilate(vals, eps):
    g = build_grid(((0, 1), (0, 1)), 1 / 8)
    u = ScalarField(g, vals)
    s = ball_stencil(g, eps)
    np.testing.assert_array_equal(erode(u, s).values, -dilate(-u, s).values)


@given(fields, arrays(np.float64, (8, 8), elements=st.floats(0, 3, allow_nan=False)))
def test_window_operators_monotone(vals, bump):
    g = build_grid(((0, 1), (0, 1)), 1 / 8)
    u, v = ScalarField(g, vals), ScalarField(g, vals + bump)
    s = ball_stencil(g, 0.25)
    assert np.all(dilate(u, s).values <= dilate(v, s).values)
    assert np.all(erode(u, s).values <= erode(v, s).values)


@given(fields)
def test_window_operators_bracket_field(vals):
    g = build_grid(((0, 1), (0, 1)), 1 / 8)
    u = ScalarField(g, vals)
    s = ball_stencil(g, 0.2)
    assert np.all(dilate(u, s).values >= u.values)
    assert np.all(erode(u, s).values <= u.values)


@given(fields, st.sampled_from([0.13, 0.2]), st.sampled_from([0.13, 0.3]))
def test_nested_dilations_dominate(vals, e1, e2):
    g = build_grid(((0, 1), (0, 1)), 1 / 8)
    u = ScalarField(g, vals)
    once = dilate(u, ball_stencil(g, e1))
    twice = dilate(once, ball_stencil(g, e2))
    assert np.all(twice.values >= once.values)


def test_translation_covariance_away_from_collar(rng):
    g = build_grid(((0, 1), (0, 1)), 1 / 32)
    vals = rng.normal(size=g.shape)
    s = ball_stencil(g, 0.1)
    a = dilate(ScalarField(g, vals), s).values
    b = dilate(ScalarField(g, np.roll(vals, 1, axis=0)), s).values
    m = s.reach + 1
    np.testing.assert_array_equal(np.roll(a, 1, axis=0)[m:-m, m:-m], b[m:-m, m:-m])


def test_inner_parallel():
    g = build_grid(((-1, 1), (-1, 1)), 0.1)
    assert inner_parallel(g, 0.0).count == g.n_cells
    x = g.coords()
    margin = 1 - np.max(np.abs(x), axis=-1)
    assert inner_parallel(g, 0.5) == g.region(margin > 0.5 + 1e-12)
    assert inner_parallel(g, 3.0).is_empty()
    with pytest.raises(ValueError):
        inner_parallel(g, -1.0)


def test_region_algebra():
    g = build_grid(((0, 1),), 0.25)
    a = g.region(np.array([1, 1, 0, 0], bool))
    b = g.region(np.array([0, 1, 1, 0], bool))
    assert (a | b).count == 3
    assert (a & b).count == 1
    assert (a & b) <= a
    assert a.complement().count == 2
    assert math.isclose(a.volume, 0.5)
    assert g.empty().is_empty() and g.full().is_full()

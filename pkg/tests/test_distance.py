import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from advflow import build_grid, dist_to_boundary, edt, signed_distance_to_complement
from advflow.analysis import disk_region


def brute_edt(mask, h):
    idx = np.argwhere(np.ones(mask.shape, bool))
    pts = np.argwhere(mask)
    diff = idx[:, None, :] - pts[None, :, :]
    return h * np.sqrt((diff**2).sum(-1)).min(axis=1).reshape(mask.shape)


def test_singleton_distance_is_radius():
    g = build_grid(((-3, 4), (-3, 4)), 1.0)
    mask = np.zeros(g.shape, bool)
    origin = g.index_of((0.5, 0.5))
    mask[origin] = True
    d = edt(g.region(mask)).values
    expected = np.linalg.norm(g.coords() - g.coords()[origin], axis=-1)
    np.testing.assert_array_equal(d, expected)


def test_full_region_distance_zero_and_empty_clamp():
    g = build_grid(((0, 1), (0, 1)), 0.125)
    assert np.all(edt(g.full()).values == 0)
    np.testing.assert_allclose(edt(g.empty()).values, g.clamp)
    np.testing.assert_allclose(dist_to_boundary(g.full()).values, g.clamp)
    np.testing.assert_allclose(signed_distance_to_complement(g.full()).values, g.clamp)
    np.testing.assert_allclose(signed_distance_to_complement(g.empty()).values, -g.clamp)


masks = arrays(bool, (16, 16), elements=st.booleans())


@given(masks)
def test_edt_matches_brute_force(mask):
    g = build_grid(((0, 1), (0, 1)), 1 / 16)
    if not mask.any():
        mask[3, 5] = True
    np.testing.assert_array_equal(edt(g.region(mask)).values, brute_edt(mask, g.h))


def test_boundary_distance_one_dimension():
    g = build_grid(((0, 4),), 1.0)
    a = g.region(g.axes()[0] < 2)
    # nearest opposite-phase centre is one spacing away on both sides of the interface
    np.testing.assert_array_equal(dist_to_boundary(a).values, [2, 1, 1, 2])


def test_disk_centre_and_half_space():
    g = build_grid(((-1, 1), (-1, 1)), 0.02)
    sd = signed_distance_to_complement(disk_region(g, 0.5))
    centre = g.index_of((0.01, 0.01))
    assert abs(sd.values[centre] - 0.5) <= g.h + 0.01 * 1.5
    half = g.region(g.coords()[..., 0] < 0)
    sd = signed_distance_to_complement(half).values
    x1 = g.coords()[..., 0]
    assert np.all(np.abs(sd - (-x1)) <= g.h)


@given(masks)
def test_distance_symmetries(mask):
    g = build_grid(((0, 1), (0, 1)), 1 / 16)
    a = g.region(mask)
    sd = signed_distance_to_complement(a).values
    np.testing.assert_array_equal(sd, -signed_distance_to_complement(a.complement()).values)
    np.testing.assert_array_equal(np.abs(sd), dist_to_boundary(a).values)
    if not (a.is_empty() or a.is_full()):
        assert np.all(sd[a.mask] > 0) and np.all(sd[~a.mask] < 0)


@given(masks)
def test_distance_is_discretely_lipschitz(mask):
    g = build_grid(((0, 1), (0, 1)), 1 / 16)
    if not mask.any() or mask.all():
        return
    a = g.region(mask)
    for v in (edt(a).values, edt(a.complement()).values, dist_to_boundary(a).values):
        for ax in (0, 1):
            assert np.all(np.abs(np.diff(v, axis=ax)) <= g.h + 1e-12)
    # the signed field jumps from +h to -h across the interface between adjacent centres
    sd = signed_distance_to_complement(a).values
    for ax in (0, 1):
        assert np.all(np.abs(np.diff(sd, axis=ax)) <= 2 * g.h + 1e-12)


@given(masks, masks)
def test_signed_distance_monotone_in_the_set(m1, m2):
    g = build_grid(((0, 1), (0, 1)), 1 / 16)
    small, big = g.region(m1 & m2), g.region(m1 | m2)
    assert np.all(signed_distance_to_complement(small).values <= signed_distance_to_complement(big).values)

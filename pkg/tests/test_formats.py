import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from advflow import ScalarField, build_grid
from advflow.formats import read_csv, read_pbm, read_pbm_mask, read_raw, write_csv, write_pbm, write_raw


@given(arrays(bool, st.tuples(st.integers(1, 13), st.integers(1, 13))), st.booleans())
def test_pbm_roundtrip(tmp_path_factory, mask, binary):
    g = build_grid(((0, mask.shape[0]), (0, mask.shape[1])), 1.0)
    path = tmp_path_factory.mktemp("pbm") / "m.pbm"
    write_pbm(g.region(mask), path, binary=binary)
    assert np.array_equal(read_pbm_mask(path), mask)
    assert read_pbm(path, g) == g.region(mask)


def test_pbm_layout_and_one_dimension(tmp_path):
    g = build_grid(((0, 3), (0, 2)), 1.0)
    m = np.array([[1, 0], [0, 0], [1, 1]], bool)
    write_pbm(g.region(m), tmp_path / "a.pbm", binary=False)
    text = (tmp_path / "a.pbm").read_text().splitlines()
    assert text[0] == "P1" and text[2] == "2 3" and text[3:] == ["1 0", "0 0", "1 1"]
    g1 = build_grid(((0, 5),), 1.0)
    line = g1.region(np.array([0, 1, 1, 0, 1], bool))
    write_pbm(line, tmp_path / "b.pbm")
    assert read_pbm(tmp_path / "b.pbm", g1) == line


def test_pbm_rejects_bad_input(tmp_path):
    p = tmp_path / "x.pbm"
    p.write_bytes(b"P5\n2 2\n0000")
    with pytest.raises(ValueError, match="not a PBM"):
        read_pbm_mask(p)
    p.write_bytes(b"P1\n3 3\n0 1 0\n")
    with pytest.raises(ValueError, match="truncated"):
        read_pbm_mask(p)
    g = build_grid(((0, 2), (0, 2)), 1.0)
    write_pbm(g.full(), p)
    with pytest.raises(ValueError, match="does not match"):
        read_pbm(p, build_grid(((0, 3), (0, 2)), 1.0))


def test_csv_and_raw_roundtrip(tmp_path, rng):
    g = build_grid(((0, 1), (0, 1)), 1 / 8)
    u = ScalarField(g, rng.normal(size=g.shape))
    write_csv(u, tmp_path / "u.csv")
    assert np.array_equal(read_csv(tmp_path / "u.csv", g).values, u.values)
    hdr = write_raw(u, tmp_path / "u.f32")
    meta = json.loads(hdr.read_text())
    assert meta["shape"] == [8, 8] and meta["dtype"] == "float32-le"
    back = read_raw(tmp_path / "u.f32", g).values
    np.testing.assert_array_equal(back, u.values.astype(np.float32))
    with pytest.raises(ValueError, match="does not match"):
        read_raw(tmp_path / "u.f32", build_grid(((0, 1), (0, 1)), 1 / 4))

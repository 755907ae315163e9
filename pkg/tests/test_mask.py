from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from slz.classes import CLASS_NAMES, class_table, predicate_name
from slz.mask import MaskError, SemanticMask, load_mask, write_ascii_grid, write_image


def _write(path, text):
    path.write_text(text)
    return path


def test_all_zero_grid(tmp_path):
    m = load_mask(_write(tmp_path / "z.txt", "4 4\n" + "0 0 0 0\n" * 4))
    assert m.size == (4, 4)
    assert (m.labels == 0).sum() == 16
    assert class_table()[0].name == "unlabeled"


def test_out_of_range_label(tmp_path):
    with pytest.raises(MaskError, match=r"label out of range at \(1,2\)"):
        load_mask(_write(tmp_path / "bad.txt", "2 3\n0 0 0\n0 0 19\n"))


def test_two_by_two_paved_water(tmp_path):
    m = load_mask(_write(tmp_path / "pw.txt", "2 2\n1 1\n5 5\n"))
    t = class_table()
    names = [t[int(v)].name for v in m.labels.ravel()]
    assert names.count("paved-area") == 2
    assert names.count("water") == 2


def test_companion_layers(tmp_path):
    _write(tmp_path / "a.txt", "1 2\n3 3\n")
    _write(tmp_path / "a.conf", "1 2\n0.5 1.0\n")
    _write(tmp_path / "a.hgt", "1 2\n2.0 2.5\n")
    m = load_mask(tmp_path / "a.txt")
    assert m.confidence.tolist() == [[0.5, 1.0]]
    assert m.height_grid.tolist() == [[2.0, 2.5]]


def test_layer_dimension_mismatch(tmp_path):
    _write(tmp_path / "a.txt", "1 2\n3 3\n")
    _write(tmp_path / "a.conf", "1 1\n0.5\n")
    with pytest.raises(MaskError):
        load_mask(tmp_path / "a.txt")


def test_confidence_range(tmp_path):
    _write(tmp_path / "a.txt", "1 2\n3 3\n")
    _write(tmp_path / "a.conf", "1 2\n0.5 1.5\n")
    with pytest.raises(MaskError):
        load_mask(tmp_path / "a.txt")


@pytest.mark.parametrize("text", ["", "2 2\n1 1\n", "2 2\n1 1\n1\n", "x y\n", "1 1\na\n", "0 3\n"])
def test_malformed_grids(tmp_path, text):
    with pytest.raises(MaskError):
        load_mask(_write(tmp_path / "m.txt", text))


def test_missing_file(tmp_path):
    with pytest.raises(MaskError):
        load_mask(tmp_path / "nope.txt")


def test_image_roundtrip(tmp_path):
    lab = np.arange(18, dtype=np.int64).reshape(3, 6)
    m = SemanticMask.from_labels(lab)
    write_image(m, tmp_path / "m.png")
    assert load_mask(tmp_path / "m.png") == m


def test_mask_is_read_only():
    m = SemanticMask.from_labels(np.zeros((2, 2), dtype=np.int64))
    with pytest.raises(ValueError):
        m.labels[0, 0] = 1


@settings(max_examples=40, deadline=None)
@given(arrays(np.int64, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.integers(0, 18)))
def test_ascii_roundtrip(tmp_path_factory, lab):
    path = tmp_path_factory.mktemp("rt") / "m.txt"
    m = SemanticMask.from_labels(lab)
    write_ascii_grid(m, path)
    assert np.array_equal(load_mask(path).labels, lab)
    assert load_mask(path) == load_mask(path)


def test_class_table():
    t = class_table()
    assert len(t) == 19
    assert [e.name for e in t] == list(CLASS_NAMES)
    assert sorted(e.id for e in t) == list(range(19))
    assert t["person"].hazard_prior == 1.0
    assert t["grass"].landable_prior == 1.0
    assert t[0].landable_prior == 0.0 and t[0].hazard_prior == 0.0
    assert t["paved_area"] is t["paved-area"]
    assert predicate_name("paved-area") == "paved_area"
    for name in ("paved-area", "dirt", "grass"):
        assert t[name].landable_prior == 1.0
    hazards = {e.name for e in t if e.hazard_prior == 1.0}
    assert hazards == {"water", "pool", "person", "dog", "car", "bicycle", "tree", "obstacle",
                       "rocks", "wall", "fence", "roof", "window", "door"}

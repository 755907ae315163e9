from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from slz.geometry import (
    ATTRIBUTES,
    AttributeParams,
    compactness_of,
    connected_components,
    extract_contour,
    grid_regions,
    point_segment_distance,
    polygon_area,
    region_id_map,
    simplify_polygon,
)
from slz.mask import SemanticMask


def M(rows, conf=None, hgt=None):
    return SemanticMask.from_labels(np.array(rows, dtype=np.int64), conf, hgt)


def test_all_unlabeled_gives_no_regions():
    assert connected_components(M([[0, 0], [0, 0]])) == []


def test_two_blocks():
    regs = connected_components(M([[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 3, 3], [0, 0, 3, 3]]))
    assert [(r.id, r.class_id, r.area) for r in regs] == [(0, 1, 4), (1, 3, 4)]
    assert regs[0].centroid == (0.5, 0.5)
    assert regs[1].centroid == (2.5, 2.5)


def test_gap_never_merges():
    regs = connected_components(M([[1, 0, 1]]))
    assert [r.area for r in regs] == [1, 1]


def test_diagonal_not_connected():
    regs = connected_components(M([[1, 0], [0, 1]]))
    assert len(regs) == 2


def test_ids_follow_raster_order_of_first_pixel():
    regs = connected_components(M([[0, 2, 2], [1, 0, 0], [1, 1, 0]]))
    assert [(r.id, r.class_id) for r in regs] == [(0, 2), (1, 1)]


def test_class_prob_is_mean_confidence():
    conf = np.array([[0.2, 0.6], [1.0, 1.0]])
    regs = connected_components(M([[4, 4], [0, 0]], conf=conf))
    assert regs[0].class_prob == pytest.approx(0.4)


def test_single_pixel_contour():
    m = M([[0] * 5 for _ in range(2)] + [[0, 0, 7, 0, 0]] + [[0] * 5 for _ in range(2)])
    (r,) = connected_components(m)
    poly = extract_contour(r, m)
    assert sorted(poly) == sorted([(1.5, 1.5), (2.5, 1.5), (2.5, 2.5), (1.5, 2.5)])
    assert polygon_area(poly) == 1.0


def test_block_contour_is_square_of_side_two():
    (r, _) = connected_components(M([[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 3, 3], [0, 0, 3, 3]]))
    poly = extract_contour(r)
    assert len(poly) == 4
    xs = {p[0] for p in poly}
    ys = {p[1] for p in poly}
    assert xs == {-0.5, 1.5} and ys == {-0.5, 1.5}
    assert polygon_area(poly) == 4.0  # positive: consistent orientation


def test_l_shape_contour():
    (r,) = connected_components(M([[1, 0], [1, 1]]))
    poly = extract_contour(r)
    assert len(poly) == 6
    assert polygon_area(poly) == 3.0
    for a, b in zip(poly, poly[1:] + poly[:1]):
        assert a[0] == b[0] or a[1] == b[1]  # rectilinear


def test_contour_with_hole_traces_outer_boundary():
    lab = np.ones((5, 5), dtype=np.int64)
    lab[2, 2] = 0
    (r,) = connected_components(M(lab))
    assert polygon_area(r.contour) == 25.0
    assert len(r.contour) == 4


def test_square_compactness():
    lab = np.zeros((6, 6), dtype=np.int64)
    lab[1:5, 1:5] = 2
    (r,) = connected_components(M(lab))
    assert r.compactness == pytest.approx(math.pi / 4)
    assert r.attributes["is_regular_shape"] == pytest.approx(math.pi / 4)


def test_disk_compactness():
    yy, xx = np.mgrid[0:51, 0:51]
    lab = ((xx - 25) ** 2 + (yy - 25) ** 2 <= 400).astype(np.int64)
    (r,) = connected_components(M(lab))
    assert r.area == int(lab.sum()) == 1257
    assert 0.9 <= r.compactness <= 1.0
    perim = sum(math.dist(a, b) for a, b in zip(r.polygon, r.polygon[1:] + r.polygon[:1]))
    assert r.compactness == pytest.approx(4 * math.pi * 1257 / perim ** 2, rel=1e-12)


def test_bar_orientation():
    (r,) = connected_components(M([[1] * 10]))
    assert r.orientation == pytest.approx(0.0, abs=1e-12)
    (r,) = connected_components(M([[1]] * 10))
    assert abs(r.orientation) == pytest.approx(math.pi / 2)


def test_degenerate_orientation_is_zero():
    (r,) = connected_components(M([[1, 1], [1, 1]]))
    assert r.orientation == 0.0


def test_compactness_clamped():
    assert compactness_of(1, [(0, 0), (1, 0), (1, 1), (0, 1)]) == pytest.approx(math.pi / 4)
    assert 0.0 < compactness_of(1000, [(0, 0), (1, 0), (1, 1)]) <= 1.0


# -- simplification


def test_simplify_eps_zero_identity():
    poly = [(0, 0), (1, 0), (2, 0), (2, 2), (0, 2)]
    assert simplify_polygon(poly, 0.0) == [tuple(map(float, p)) for p in poly]


def test_simplify_drops_collinear_midpoint():
    poly = [(0, 0), (2, 0), (4, 0), (4, 4), (0, 4)]
    out = simplify_polygon(poly, 0.5)
    assert len(out) == 4
    assert (2.0, 0.0) not in out


def _deviation_ok(poly, out, eps):
    """Brute force: every dropped vertex lies within eps of the output edge
    spanning it."""
    pts = [tuple(map(float, p)) for p in poly]
    idx = [pts.index(p) for p in out]
    assert idx == sorted(idx)  # subsequence in order
    n = len(pts)
    for a, b in zip(idx, idx[1:] + [idx[0] + n]):
        for k in range(a + 1, b):
            d = point_segment_distance(pts[k % n], pts[a], pts[b % n])
            if d > eps + 1e-12:
                return False
    return True


def test_staircase_deviation():
    stairs = []
    for i in range(49):
        stairs += [(i, i), (i + 1, i)]
    poly = stairs + [(60, 48), (60, -10)]
    assert len(poly) == 100
    out = simplify_polygon(poly, 2.0)
    assert len(out) < len(poly)
    assert _deviation_ok(poly, out, 2.0)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(-20, 20), st.integers(-20, 20)), min_size=4, max_size=40, unique=True),
       st.floats(0.0, 5.0))
def test_simplify_properties(poly, eps):
    out = simplify_polygon(poly, eps)
    assert len(out) >= 3 or len(out) == len(poly)
    assert _deviation_ok(poly, out, eps)
    assert simplify_polygon(out, eps) == out or len(simplify_polygon(out, eps)) <= len(out)


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 60), st.floats(0.1, 4.0))
def test_simplify_idempotent_on_disks(r, eps):
    yy, xx = np.mgrid[0:2 * r + 3, 0:2 * r + 3]
    lab = ((xx - r - 1) ** 2 + (yy - r - 1) ** 2 <= r * r).astype(np.int64)
    (reg,) = connected_components(M(lab))
    once = simplify_polygon(reg.contour, eps)
    assert simplify_polygon(once, eps) == once


# -- attributes


def test_large_area_saturates():
    lab = np.zeros((10, 10), dtype=np.int64)
    lab[0:2, 0:1] = 1  # area 2 == 2% of 100
    (r,) = connected_components(M(lab))
    assert r.attributes["is_large_area"] == 1.0


def test_accessible_when_surrounded_by_paved():
    lab = np.ones((5, 5), dtype=np.int64)
    lab[1:4, 1:4] = 3
    regs = connected_components(M(lab))
    grass = [r for r in regs if r.class_id == 3][0]
    assert grass.attributes["is_accessible"] == 1.0


def test_flat_with_constant_height():
    lab = np.ones((4, 4), dtype=np.int64)
    (r,) = connected_components(M(lab, hgt=np.full((4, 4), 7.0)))
    assert r.attributes["is_flat_surface"] == 1.0
    (r,) = connected_components(M(lab, hgt=np.arange(16, dtype=float).reshape(4, 4)))
    assert r.attributes["is_flat_surface"] == 0.0


def test_attribute_keys_and_placeholders():
    (r,) = connected_components(M([[5, 5]]))
    assert tuple(r.attributes) == ATTRIBUTES
    assert r.attributes["is_moving"] == 0.0
    assert r.attributes["is_safe"] == 0.0
    assert r.attributes["is_stable_surface"] == 0.0  # water


labels = arrays(np.int64, st.tuples(st.integers(1, 14), st.integers(1, 14)), elements=st.integers(0, 18))


@settings(max_examples=60, deadline=None)
@given(labels)
def test_partition_and_bounds(lab):
    m = M(lab)
    regs = connected_components(m)
    for c in range(1, 19):
        assert sum(r.area for r in regs if r.class_id == c) == int((lab == c).sum())
    for r in regs:
        assert r.area >= 1
        x0, y0, x1, y1 = r.bbox
        assert x0 <= r.centroid[0] <= x1 and y0 <= r.centroid[1] <= y1
        assert 0.0 < r.compactness <= 1.0
        assert polygon_area(r.contour) > 0
        for v in r.attributes.values():
            assert 0.0 <= v <= 1.0
    ids = region_id_map(regs, lab.shape)
    assert ((ids >= 0) == (lab != 0)).all()


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 400), st.integers(1, 400))
def test_large_area_monotone(a1, a2):
    p = AttributeParams(large_area_ref=150.0)
    m = SemanticMask.from_labels(np.zeros((30, 30), dtype=np.int64))
    f = lambda a: min(1.0, a / p.area_ref(m.size))  # noqa: E731
    lab1 = np.zeros((20, 20), dtype=np.int64).ravel()
    lab1[:a1] = 1
    lab2 = np.zeros((20, 20), dtype=np.int64).ravel()
    lab2[:a2] = 1
    (r1,) = connected_components(M(lab1.reshape(20, 20)), p)
    (r2,) = connected_components(M(lab2.reshape(20, 20)), p)
    assert r1.attributes["is_large_area"] == pytest.approx(f(a1))
    if a1 <= a2:
        assert r1.attributes["is_large_area"] <= r2.attributes["is_large_area"]


# -- grid candidates


def test_grid_cells_and_ids():
    lab = np.full((8, 8), 3, dtype=np.int64)
    lab[0:4, 4:8] = 5  # water cell
    lab[4:8, 0:2] = 0  # half-unlabeled cell: exactly 50 % landable, kept
    regs = grid_regions(M(lab), 4)
    zones = [r for r in regs if r.id < 4]
    assert [r.id for r in zones] == [0, 2, 3]
    assert {r.id: r.area for r in zones} == {0: 16, 2: 8, 3: 16}
    others = [r for r in regs if r.id >= 4]
    assert [r.class_id for r in others] == [5]


def test_grid_majority_class():
    lab = np.full((4, 4), 3, dtype=np.int64)
    lab[0, :] = 1
    (z,) = grid_regions(M(lab), 4)
    assert z.class_id == 3
    assert z.area == 16  # every landable pixel of the cell
    assert z.class_prob == pytest.approx(12 / 16)

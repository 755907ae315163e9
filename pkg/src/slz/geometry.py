"""Region extraction and per-region geometry.

Coordinates follow the image convention: ``x`` is the column, ``y`` the row,
and pixel ``(r, c)`` has its center at ``(c, r)``.  Contours run along pixel
corners, so their vertices sit on half-integer coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .classes import class_table, LANDABLE
from .mask import SemanticMask

ATTRIBUTES: tuple[str, ...] = (
    "is_large_area",
    "is_regular_shape",
    "is_flat_surface",
    "is_stable_surface",
    "is_moving",
    "is_smooth_surface",
    "is_accessible",
    "is_safe",
)

Point = tuple[float, float]


@dataclass(frozen=True)
class AttributeParams:
    large_area_ref: float | None = None  # None: 2% of image area
    smoothness_gamma: float = 0.5
    height_var_ref: float = 1.0
    simplify_eps: float = 1.0

    def area_ref(self, image_size: tuple[int, int]) -> float:
        if self.large_area_ref is not None:
            return float(self.large_area_ref)
        w, h = image_size
        return 0.02 * w * h


@dataclass
class Region:
    id: int
    class_id: int
    area: int
    centroid: Point
    bbox: tuple[int, int, int, int]
    contour: tuple[Point, ...] = ()
    polygon: tuple[Point, ...] = ()
    orientation: float = 0.0
    compactness: float = 1.0
    class_prob: float = 1.0
    attributes: dict[str, float] = field(default_factory=dict)
    rows: np.ndarray | None = field(default=None, repr=False, compare=False)
    cols: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def class_name(self) -> str:
        return class_table()[self.class_id].name

    @property
    def predicate(self) -> str:
        return class_table()[self.class_id].predicate


# ---------------------------------------------------------------------------
# polygons


def polygon_area(poly) -> float:
    """Signed shoelace area; positive for the orientation produced by
    :func:`trace_outer_boundary`."""
    n = len(poly)
    s = 0.0
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def polygon_perimeter(poly) -> float:
    n = len(poly)
    if n < 2:
        return 0.0
    return sum(math.dist(poly[i], poly[(i + 1) % n]) for i in range(n))


def point_segment_distance(p: Point, a: Point, b: Point) -> float:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        return math.dist(p, a)
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / seg2
    t = min(1.0, max(0.0, t))
    return math.hypot(p[0] - (ax + t * dx), p[1] - (ay + t * dy))


def _rdp_chain(pts: list[Point], eps: float) -> list[int]:
    # returns indices (into pts) of the kept vertices, endpoints included
    keep = [0, len(pts) - 1]
    stack = [(0, len(pts) - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        dmax, idx = -1.0, -1
        for k in range(i + 1, j):
            d = point_segment_distance(pts[k], pts[i], pts[j])
            if d > dmax:
                dmax, idx = d, k
        if dmax >= eps:
            keep.append(idx)
            stack.append((i, idx))
            stack.append((idx, j))
    return sorted(keep)


def simplify_polygon(poly, eps: float) -> list[Point]:
    """Ramer-Douglas-Peucker on a closed polygon.

    The ring is split at vertex 0 and the vertex farthest from it; both chains
    are simplified independently.  Points at distance exactly ``eps`` are kept,
    so ``eps == 0`` is the identity.  A result with fewer than three vertices
    is replaced by the input.
    """
    pts = [tuple(map(float, p)) for p in poly]
    n = len(pts)
    if n <= 3:
        return pts
    far = max(range(n), key=lambda k: (math.dist(pts[0], pts[k]), -k))
    if far == 0:
        return pts
    first = _rdp_chain(pts[: far + 1], eps)
    second = _rdp_chain(pts[far:] + [pts[0]], eps)
    idx = first + [far + k for k in second[1:-1]]
    if len(idx) < 3:
        return pts
    return [pts[k] for k in idx]


# ---------------------------------------------------------------------------
# contours


def _cross(a, b) -> int:
    return a[0] * b[1] - a[1] * b[0]


def trace_outer_boundary(rows: np.ndarray, cols: np.ndarray) -> list[Point]:
    """Outer boundary of a pixel set as a corner polygon.

    The trace starts at the top edge of the first pixel in raster order and
    keeps the region on its left-hand side, giving positive shoelace area in
    (x, y) coordinates.  Where two pixels of the set touch only at a corner the
    trace takes the right-hand turn, so the two sides stay on one loop.
    Collinear vertices are merged.
    """
    r0, c0 = int(rows.min()), int(cols.min())
    h = int(rows.max()) - r0 + 1
    w = int(cols.max()) - c0 + 1
    m = np.zeros((h + 2, w + 2), dtype=bool)
    m[rows - r0 + 1, cols - c0 + 1] = True
    inner = m[1:-1, 1:-1]
    out: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def add(mask, start_off, end_off):
        rr, cc = np.nonzero(mask)
        for r, c in zip(rr.tolist(), cc.tolist()):
            s = (c + start_off[0], r + start_off[1])
            e = (c + end_off[0], r + end_off[1])
            out.setdefault(s, []).append(e)

    add(inner & ~m[:-2, 1:-1], (0, 0), (1, 0))  # top, left -> right
    add(inner & ~m[1:-1, 2:], (1, 0), (1, 1))  # right, downward
    add(inner & ~m[2:, 1:-1], (1, 1), (0, 1))  # bottom, right -> left
    add(inner & ~m[1:-1, :-2], (0, 1), (0, 0))  # left, upward

    order = np.lexsort((cols, rows))
    fr, fc = int(rows[order[0]]) - r0, int(cols[order[0]]) - c0
    start = (fc, fr)
    first_end = (fc + 1, fr)
    verts = [start]
    prev, cur = start, first_end
    used = {(start, first_end)}
    while True:
        verts.append(cur)
        din = (cur[0] - prev[0], cur[1] - prev[1])
        options = [e for e in out[cur] if (cur, e) not in used]
        if not options:
            break
        if len(options) > 1:
            options.sort(key=lambda e: _cross(din, (e[0] - cur[0], e[1] - cur[1])))
        nxt = options[0]
        if (cur, nxt) == (start, first_end):
            break
        used.add((cur, nxt))
        prev, cur = cur, nxt
    if verts[-1] == start:
        verts.pop()
    # drop collinear vertices
    n = len(verts)
    corners = []
    for i in range(n):
        a, b, c = verts[i - 1], verts[i], verts[(i + 1) % n]
        if _cross((b[0] - a[0], b[1] - a[1]), (c[0] - b[0], c[1] - b[1])) != 0:
            corners.append(b)
    k = corners.index(min(corners, key=lambda p: (p[1], p[0])))
    corners = corners[k:] + corners[:k]
    return [(x + c0 - 0.5, y + r0 - 0.5) for x, y in corners]


def extract_contour(region: Region, mask: SemanticMask | None = None) -> list[Point]:
    return trace_outer_boundary(region.rows, region.cols)


def contour_unit_edges(contour):
    """Yield (midpoint, outward neighbour pixel (r, c)) for every unit edge."""
    n = len(contour)
    for i in range(n):
        x0, y0 = contour[i]
        x1, y1 = contour[(i + 1) % n]
        length = int(round(abs(x1 - x0) + abs(y1 - y0)))
        if length == 0:
            continue
        dx, dy = (x1 - x0) / length, (y1 - y0) / length
        for s in range(length):
            mx = x0 + dx * (s + 0.5)
            my = y0 + dy * (s + 0.5)
            # outside lies to the right of travel: normal (dy, -dx)
            yield (mx, my), (int(round(my - 0.5 * dx)), int(round(mx + 0.5 * dy)))


# ---------------------------------------------------------------------------
# moments and attributes


def _orientation(rows: np.ndarray, cols: np.ndarray) -> float:
    n = len(rows)
    x = cols.astype(np.int64)
    y = rows.astype(np.int64)
    sx, sy = int(x.sum()), int(y.sum())
    # scaled central moments (times n), exact in integers
    m20 = n * int((x * x).sum()) - sx * sx
    m02 = n * int((y * y).sum()) - sy * sy
    m11 = n * int((x * y).sum()) - sx * sy
    if m11 == 0 and m20 == m02:
        return 0.0
    return 0.5 * math.atan2(2 * m11, m20 - m02)


def compactness_of(area: float, polygon) -> float:
    per = polygon_perimeter(polygon)
    if per <= 0.0:
        return 1.0
    c = 4.0 * math.pi * area / (per * per)
    return min(1.0, max(c, 1e-12))


def moments(region: Region) -> tuple[Point, float, float]:
    """(centroid, orientation, compactness) of a region."""
    centroid = (float(region.cols.mean()), float(region.rows.mean()))
    return centroid, _orientation(region.rows, region.cols), compactness_of(region.area, region.polygon)


def attribute_vector(region: Region, mask: SemanticMask, params: AttributeParams = AttributeParams()) -> dict[str, float]:
    table = class_table()
    info = table[region.class_id]
    a_ref = params.area_ref(mask.size)
    large = min(1.0, region.area / a_ref) if a_ref > 0 else 1.0

    flat = info.flatness_prior
    if mask.height_grid is not None:
        var = float(mask.height_grid[region.rows, region.cols].var())
        flat *= 1.0 - min(1.0, var / params.height_var_ref)

    wet = region.class_prob if info.name in ("water", "pool") else 0.0
    stable = 1.0 - info.hazard_prior * wet

    smooth = info.flatness_prior * region.compactness ** params.smoothness_gamma

    landable_ids = {table[n].id for n in LANDABLE}
    total = good = 0
    h, w = mask.labels.shape
    for _, (r, c) in contour_unit_edges(region.contour):
        total += 1
        if 0 <= r < h and 0 <= c < w and int(mask.labels[r, c]) in landable_ids:
            good += 1
    access = good / total if total else 0.0

    vals = {
        "is_large_area": large,
        "is_regular_shape": region.compactness,
        "is_flat_surface": flat,
        "is_stable_surface": stable,
        "is_moving": 0.0,
        "is_smooth_surface": smooth,
        "is_accessible": access,
        "is_safe": 0.0,
    }
    return {k: min(1.0, max(0.0, float(v))) for k, v in vals.items()}


def region_from_pixels(rid: int, class_id: int, rows, cols, mask: SemanticMask,
                       params: AttributeParams = AttributeParams(), class_prob: float | None = None) -> Region:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if class_prob is None:
        class_prob = float(mask.confidence[rows, cols].mean())
    region = Region(
        id=rid,
        class_id=int(class_id),
        area=int(len(rows)),
        centroid=(float(cols.mean()), float(rows.mean())),
        bbox=(int(cols.min()), int(rows.min()), int(cols.max()), int(rows.max())),
        class_prob=min(1.0, max(0.0, class_prob)),
        rows=rows,
        cols=cols,
    )
    region.contour = tuple(trace_outer_boundary(rows, cols))
    region.polygon = tuple(simplify_polygon(region.contour, params.simplify_eps))
    region.centroid, region.orientation, region.compactness = moments(region)
    region.attributes = attribute_vector(region, mask, params)
    return region


def _components(mask: SemanticMask):
    """Yield (class_id, flat pixel indices) per 4-connected component, in
    raster order of each component's first pixel."""
    labels = mask.labels
    comp = np.full(labels.shape, -1, dtype=np.int64)
    classes = []
    n = 0
    for cls in np.unique(labels):
        if cls == 0:
            continue
        lab, k = ndimage.label(labels == cls)
        sel = lab > 0
        comp[sel] = lab[sel] - 1 + n
        classes.extend([int(cls)] * k)
        n += k
    if n == 0:
        return []
    flat = comp.ravel()
    order = np.argsort(flat, kind="stable")
    sorted_ids = flat[order]
    starts = np.searchsorted(sorted_ids, np.arange(n))
    ends = np.searchsorted(sorted_ids, np.arange(n), side="right")
    groups = [order[s:e] for s, e in zip(starts, ends)]
    groups.sort(key=lambda g: g[0])
    return [(classes[int(flat[g[0]])], g) for g in groups]


def connected_components(mask: SemanticMask, params: AttributeParams = AttributeParams()) -> list[Region]:
    w = mask.width
    regions = []
    for rid, (cls, idx) in enumerate(_components(mask)):
        regions.append(region_from_pixels(rid, cls, idx // w, idx % w, mask, params))
    return regions


def grid_regions(mask: SemanticMask, cell: int, params: AttributeParams = AttributeParams(),
                 min_fraction: float = 0.5) -> list[Region]:
    """Candidate zones on a square grid plus the non-landable components.

    A cell whose landable pixels cover at least ``min_fraction`` of it becomes
    a zone with id equal to its row-major cell index and the class of its
    majority landable label.  Non-landable components follow, numbered from
    the cell count upward.
    """
    table = class_table()
    landable_ids = sorted(table[n].id for n in LANDABLE)
    labels = mask.labels
    h, w = labels.shape
    ncx = -(-w // cell)
    ncy = -(-h // cell)
    regions = []
    for cy in range(ncy):
        for cx in range(ncx):
            sub = labels[cy * cell:(cy + 1) * cell, cx * cell:(cx + 1) * cell]
            is_land = np.isin(sub, landable_ids)
            if is_land.sum() < min_fraction * sub.size:
                continue
            counts = [int((sub == k).sum()) for k in landable_ids]
            cls = landable_ids[int(np.argmax(counts))]
            rr, cc = np.nonzero(is_land)
            rr = rr + cy * cell
            cc = cc + cx * cell
            order = np.lexsort((cc, rr))
            rr, cc = rr[order], cc[order]
            conf = mask.confidence[rr, cc]
            prob = float(np.where(labels[rr, cc] == cls, conf, 0.0).mean())
            regions.append(region_from_pixels(cy * ncx + cx, cls, rr, cc, mask, params, class_prob=prob))
    offset = ncx * ncy
    k = 0
    for cls, idx in _components(mask):
        if cls in landable_ids:
            continue
        regions.append(region_from_pixels(offset + k, cls, idx // w, idx % w, mask, params))
        k += 1
    return regions


def region_id_map(regions: list[Region], shape: tuple[int, int]) -> np.ndarray:
    """Per-pixel region id, -1 where no region claims the pixel."""
    out = np.full(shape, -1, dtype=np.int64)
    for reg in regions:
        out[reg.rows, reg.cols] = reg.id
    return out

"""Probabilistic semantic scene graph: regions as nodes, soft spatial relations
as edges."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .classes import MOVABLE, class_table
from .geometry import ATTRIBUTES, Region, contour_unit_edges

RELATIONS: tuple[str, ...] = (
    "above",
    "bottom",
    "left",
    "right",
    "adjacent_to",
    "contain",
    "on",
    "near_to",
    "far_from",
    "surrounded_by",
)


@dataclass(frozen=True)
class RelationParams:
    near_radius: float | None = None  # None: 10% of the image diagonal
    adjacency_touch: float = 3.0
    containment_floor: float = 0.5
    surround_fraction: float = 0.6
    directional_margin: float = 5.0
    fact_floor: float = 0.01

    def __post_init__(self):
        for name in ("adjacency_touch", "containment_floor", "surround_fraction", "directional_margin"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.near_radius is not None and self.near_radius <= 0:
            raise ValueError("near_radius must be positive")
        if not 0.0 < self.fact_floor < 1.0:
            raise ValueError("fact_floor must lie in (0,1)")

    def radius(self, image_size: tuple[int, int]) -> float:
        if self.near_radius is not None:
            return float(self.near_radius)
        w, h = image_size
        return 0.1 * math.hypot(w, h)


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    relation: str
    p: float
    center_distance: float = 0.0


@dataclass
class PSSG:
    nodes: list[Region]
    edges: list[Edge]
    frame_index: int = 0
    image_size: tuple[int, int] = (0, 0)
    pooled: dict[int, dict[str, float]] = field(default_factory=dict)

    def node(self, rid: int) -> Region:
        for n in self.nodes:
            if n.id == rid:
                return n
        raise KeyError(rid)

    def relation(self, src: int, dst: int, name: str) -> float:
        for e in self.edges:
            if (e.src, e.dst, e.relation) == (src, dst, name):
                return e.p
        return 0.0

    def to_json(self) -> dict:
        nodes = []
        for n in self.nodes:
            nodes.append({
                "id": n.id,
                "class": n.class_name,
                "class_id": n.class_id,
                "class_prob": n.class_prob,
                "area": n.area,
                "centroid": list(n.centroid),
                "bbox": list(n.bbox),
                "orientation": n.orientation,
                "compactness": n.compactness,
                "attributes": {k: n.attributes.get(k, 0.0) for k in ATTRIBUTES},
                "polygon": [list(p) for p in n.polygon],
                "pooled": self.pooled.get(n.id, {}),
            })
        edges = [
            {"src": e.src, "dst": e.dst, "relation": e.relation, "p": e.p,
             "center_distance": e.center_distance}
            for e in self.edges
        ]
        return {
            "frame_index": self.frame_index,
            "image_size": list(self.image_size),
            "nodes": nodes,
            "edges": edges,
        }

    @classmethod
    def from_json(cls, doc: dict) -> PSSG:
        table = class_table()
        nodes = []
        for n in doc["nodes"]:
            class_id = n["class_id"] if "class_id" in n else table[n["class"]].id
            attrs = {k: 0.0 for k in ATTRIBUTES}
            attrs.update(n.get("attributes", {}))
            unknown = set(attrs) - set(ATTRIBUTES)
            if unknown:
                raise ValueError(f"unknown attributes {sorted(unknown)}")
            bbox = n.get("bbox") or [0, 0, 0, 0]
            nodes.append(Region(
                id=int(n["id"]),
                class_id=int(class_id),
                area=int(n.get("area", 1)),
                centroid=tuple(n.get("centroid", (0.0, 0.0))),
                bbox=tuple(bbox),
                polygon=tuple(tuple(p) for p in n.get("polygon", ())),
                orientation=float(n.get("orientation", 0.0)),
                compactness=float(n.get("compactness", 1.0)),
                class_prob=float(n.get("class_prob", 1.0)),
                attributes=attrs,
            ))
        ids = {n.id for n in nodes}
        edges = []
        for e in doc.get("edges", []):
            if e["src"] not in ids or e["dst"] not in ids:
                raise ValueError(f"edge {e['src']}->{e['dst']} references a missing node")
            if e["relation"] not in RELATIONS:
                raise ValueError(f"unknown relation {e['relation']!r}")
            if not 0.0 <= e["p"] <= 1.0:
                raise ValueError(f"edge probability {e['p']} outside [0,1]")
            edges.append(Edge(int(e["src"]), int(e["dst"]), e["relation"], float(e["p"]),
                              float(e.get("center_distance", 0.0))))
        edges.sort(key=lambda e: (e.src, e.dst, e.relation))
        g = cls(nodes, edges, int(doc.get("frame_index", 0)), tuple(doc.get("image_size", (0, 0))))
        g.pooled = _pool_edges(nodes, edges)
        return g


# ---------------------------------------------------------------------------
# pixel helpers


def _boundary_points(region: Region) -> np.ndarray:
    """Centers (x, y) of region pixels having a 4-neighbour outside the region."""
    r0, c0 = region.bbox[1], region.bbox[0]
    h = region.bbox[3] - r0 + 1
    w = region.bbox[2] - c0 + 1
    m = np.zeros((h + 2, w + 2), dtype=bool)
    m[region.rows - r0 + 1, region.cols - c0 + 1] = True
    inner = m[1:-1, 1:-1]
    edge = inner & ~(m[:-2, 1:-1] & m[2:, 1:-1] & m[1:-1, :-2] & m[1:-1, 2:])
    rr, cc = np.nonzero(edge)
    return np.column_stack((cc + c0, rr + r0)).astype(np.float64)


def _bbox_separation(a: Region, b: Region) -> tuple[int, int]:
    sx = max(b.bbox[0] - a.bbox[2], a.bbox[0] - b.bbox[2], 0)
    sy = max(b.bbox[1] - a.bbox[3], a.bbox[1] - b.bbox[3], 0)
    return sx, sy


def pixel_gap(a: Region, b: Region, tree_b: cKDTree | None = None, pts_a: np.ndarray | None = None) -> float:
    """Boundary-to-boundary gap: nearest pixel-center distance minus one, so
    edge-sharing regions are at 0 and a one-pixel gap is 1."""
    if pts_a is None:
        pts_a = _boundary_points(a)
    if tree_b is None:
        tree_b = cKDTree(_boundary_points(b))
    dist, _ = tree_b.query(pts_a, k=1)
    return max(0.0, float(dist.min()) - 1.0)


def _encode(rows, cols, width):
    return rows.astype(np.int64) * width + cols.astype(np.int64)


def shared_edges(a: Region, b: Region) -> int:
    width = max(a.bbox[2], b.bbox[2]) + 3
    bset = _encode(b.rows, b.cols + 1, width)
    total = 0
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        total += int(np.isin(_encode(a.rows + dr, a.cols + dc + 1, width), bset).sum())
    return total


def points_in_polygon(xs: np.ndarray, ys: np.ndarray, poly) -> np.ndarray:
    """Even-odd rule point-in-polygon, vectorised over points."""
    inside = np.zeros(len(xs), dtype=bool)
    n = len(poly)
    if n < 3:
        return inside
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        if y0 == y1:
            continue
        crosses = (y0 > ys) != (y1 > ys)
        xint = x0 + (ys - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (xs < xint)
    return inside


# ---------------------------------------------------------------------------
# relations


def relation_near(a: Region, b: Region, radius: float) -> float:
    if a.id == b.id:
        raise ValueError("near_to needs two distinct regions")
    d = pixel_gap(a, b)
    return min(1.0, max(0.0, 1.0 - d / radius))


def relation_adjacent(a: Region, b: Region, touch: float) -> float:
    if a.id == b.id:
        raise ValueError("adjacent_to needs two distinct regions")
    return min(1.0, shared_edges(a, b) / touch)


def relation_contain(outer: Region, inner: Region) -> float:
    if outer.id == inner.id:
        raise ValueError("contain needs two distinct regions")
    sx, sy = _bbox_separation(outer, inner)
    if sx > 0 or sy > 0 or len(outer.polygon) < 3:
        return 0.0
    inside = points_in_polygon(inner.cols.astype(float), inner.rows.astype(float), outer.polygon)
    return float(inside.sum()) / inner.area


def surround_fraction(a: Region, b: Region, radius: float, tree_b: cKDTree | None = None) -> float:
    """Fraction of a's outer contour length lying within ``radius`` of b."""
    mids = np.array([m for m, _ in contour_unit_edges(a.contour)], dtype=np.float64)
    if len(mids) == 0:
        return 0.0
    if tree_b is None:
        tree_b = cKDTree(_boundary_points(b))
    dist, _ = tree_b.query(mids, k=1)
    return float((np.maximum(dist - 0.5, 0.0) <= radius).sum()) / len(mids)


def pool_relation(ps) -> float:
    """Probabilistic-sum t-conorm folded over ``ps``."""
    acc = 0.0
    for p in sorted(ps):
        acc = 1.0 if p >= 1.0 else acc + p * (1.0 - acc)
    return acc


def _pool_edges(nodes, edges) -> dict[int, dict[str, float]]:
    grouped: dict[int, dict[str, list[float]]] = {n.id: {} for n in nodes}
    for e in edges:
        grouped[e.src].setdefault(e.relation, []).append(e.p)
    return {nid: {rel: pool_relation(ps) for rel, ps in sorted(rels.items())}
            for nid, rels in grouped.items()}


def build_pssg(regions: list[Region], params: RelationParams = RelationParams(),
               image_size: tuple[int, int] = (0, 0), frame_index: int = 0) -> PSSG:
    radius = params.radius(image_size)
    floor = params.fact_floor
    movable = {class_table()[n].id for n in MOVABLE}
    nodes = sorted(regions, key=lambda r: r.id)
    bpts = {r.id: _boundary_points(r) for r in nodes}
    trees = {rid: cKDTree(p) for rid, p in bpts.items()}
    edges: list[Edge] = []

    def emit(src, dst, rel, p, cd):
        if p >= floor:
            edges.append(Edge(src, dst, rel, float(p), cd))

    for i, a in enumerate(nodes):
        for b in nodes[i + 1:]:
            cd = math.dist(a.centroid, b.centroid)
            sx, sy = _bbox_separation(a, b)
            lower = math.hypot(sx, sy) - 1.0
            if lower >= radius:
                near = 0.0
            else:
                near = min(1.0, max(0.0, 1.0 - pixel_gap(a, b, trees[b.id], bpts[a.id]) / radius))
            adj = min(1.0, shared_edges(a, b) / params.adjacency_touch) if sx <= 1 and sy <= 1 else 0.0
            for src, dst in ((a, b), (b, a)):
                emit(src.id, dst.id, "near_to", near, cd)
                emit(src.id, dst.id, "far_from", 1.0 - near, cd)
                emit(src.id, dst.id, "adjacent_to", adj, cd)
                if sx == 0 and sy == 0:
                    cont = relation_contain(src, dst)
                    emit(src.id, dst.id, "contain", cont, cd)
                    if dst.class_id in movable and cont >= params.containment_floor:
                        emit(dst.id, src.id, "on", cont, cd)
                if math.hypot(max(sx - 0.5, 0.0), max(sy - 0.5, 0.0)) - 0.5 <= radius:
                    f = surround_fraction(src, dst, radius, trees[dst.id])
                    emit(src.id, dst.id, "surrounded_by", min(1.0, f / params.surround_fraction), cd)
                dx = src.centroid[0] - dst.centroid[0]
                dy = src.centroid[1] - dst.centroid[1]
                m = params.directional_margin
                if dy < -m:
                    emit(src.id, dst.id, "above", 1.0, cd)
                if dy > m:
                    emit(src.id, dst.id, "bottom", 1.0, cd)
                if dx < -m:
                    emit(src.id, dst.id, "left", 1.0, cd)
                if dx > m:
                    emit(src.id, dst.id, "right", 1.0, cd)
    edges.sort(key=lambda e: (e.src, e.dst, e.relation))
    g = PSSG(nodes, edges, frame_index, tuple(image_size))
    g.pooled = _pool_edges(nodes, edges)
    return g

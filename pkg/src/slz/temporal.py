"""Frame-to-frame zone tracking and multiple-frame validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geometry import Region


@dataclass(frozen=True)
class MfvParams:
    window: int = 5
    tau_haz: float = 0.3
    tau_jit: float = 0.15
    iou_floor: float = 0.3

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if not 0.0 < self.tau_haz <= 1.0:
            raise ValueError("tau_haz must lie in (0,1]")
        if not 0.0 < self.iou_floor <= 1.0:
            raise ValueError("iou_floor must lie in (0,1]")
        if self.tau_jit <= 0.0:
            raise ValueError("tau_jit must be positive")


@dataclass(frozen=True)
class Instance:
    frame_index: int
    zone_id: int
    centroid: tuple[float, float]
    area: int
    risk: float


@dataclass
class Track:
    track_id: int
    class_id: int
    instances: list[Instance] = field(default_factory=list)

    @property
    def last(self) -> Instance:
        return self.instances[-1]

    def in_window(self, window: int, t0: int | None = None) -> list[Instance]:
        t0 = self.last.frame_index if t0 is None else t0
        return [i for i in self.instances if t0 - window < i.frame_index <= t0]

    def to_json(self) -> dict:
        return {
            "track_id": self.track_id,
            "class_id": self.class_id,
            "instances": [
                {"frame": i.frame_index, "zone": i.zone_id, "centroid": [round(c, 6) for c in i.centroid],
                 "area": i.area, "risk": round(i.risk, 6)}
                for i in self.instances
            ],
        }


def bbox_iou(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> float:
    """IoU of inclusive pixel bounding boxes (xmin, ymin, xmax, ymax)."""
    iw = min(a[2], b[2]) - max(a[0], b[0]) + 1
    ih = min(a[3], b[3]) - max(a[1], b[1]) + 1
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (a[2] - a[0] + 1) * (a[3] - a[1] + 1)
    area_b = (b[2] - b[0] + 1) * (b[3] - b[1] + 1)
    return inter / (area_a + area_b - inter)


def match_regions(prev: list[Region], nxt: list[Region], iou_floor: float = 0.3) -> list[tuple[int, int]]:
    """Greedy one-to-one matching by descending bbox IoU among same-class
    pairs.  Ties go to the smaller (prev id, next id)."""
    pairs = []
    for a in prev:
        for b in nxt:
            if a.class_id != b.class_id:
                continue
            v = bbox_iou(a.bbox, b.bbox)
            if v >= iou_floor and v > 0.0:
                pairs.append((-v, a.id, b.id))
    pairs.sort()
    used_a, used_b = set(), set()
    out = []
    for _, ia, ib in pairs:
        if ia in used_a or ib in used_b:
            continue
        used_a.add(ia)
        used_b.add(ib)
        out.append((ia, ib))
    return sorted(out)


def jitter(track: Track, window: int, t0: int | None = None) -> float:
    """Largest centroid excursion from the window mean, in units of
    sqrt(mean area)."""
    inst = track.in_window(window, t0)
    if len(inst) <= 1:
        return 0.0
    mx = sum(i.centroid[0] for i in inst) / len(inst)
    my = sum(i.centroid[1] for i in inst) / len(inst)
    mean_area = sum(i.area for i in inst) / len(inst)
    spread = max(math.hypot(i.centroid[0] - mx, i.centroid[1] - my) for i in inst)
    return spread / math.sqrt(mean_area)


def mfv_pass(track: Track, params: MfvParams, t0: int | None = None) -> int:
    t0 = track.last.frame_index if t0 is None else t0
    inst = track.in_window(params.window, t0)
    frames = {i.frame_index for i in inst}
    if frames != set(range(t0 - params.window + 1, t0 + 1)):
        return 0
    if max(i.risk for i in inst) > params.tau_haz:
        return 0
    if jitter(track, params.window, t0) > params.tau_jit:
        return 0
    return 1


def motion(prev: Instance, region: Region) -> float:
    """is_moving estimate: displacement per frame over sqrt(area), clamped."""
    d = math.dist(prev.centroid, region.centroid)
    return min(1.0, max(0.0, d / math.sqrt(max(region.area, 1))))


class Tracker:
    """Carries tracks across frames.  Tracks that go unmatched in a frame end;
    a reappearing zone starts a new track."""

    def __init__(self, iou_floor: float = 0.3):
        self.iou_floor = iou_floor
        self.tracks: list[Track] = []
        self._active: dict[int, Track] = {}  # zone id in the last frame -> track
        self._last_regions: list[Region] = []
        self._frame: int | None = None

    def associate(self, frame_index: int, regions: list[Region]) -> dict[int, Track | None]:
        """Match ``regions`` against the previous frame; returns zone id ->
        continuing track (None for new zones).  Call :meth:`commit` after."""
        if self._frame is not None and frame_index != self._frame + 1:
            self._active = {}
            self._last_regions = []
        pairs = match_regions(self._last_regions, regions, self.iou_floor)
        nxt = {b: self._active.get(a) for a, b in pairs}
        return {r.id: nxt.get(r.id) for r in regions}

    def commit(self, frame_index: int, regions: list[Region], risks: dict[int, float],
               assoc: dict[int, Track | None]) -> dict[int, Track]:
        active = {}
        for r in regions:
            tr = assoc.get(r.id)
            if tr is None:
                tr = Track(len(self.tracks), r.class_id)
                self.tracks.append(tr)
            tr.instances.append(Instance(frame_index, r.id, r.centroid, r.area, risks.get(r.id, 0.0)))
            active[r.id] = tr
        self._active = active
        self._last_regions = list(regions)
        self._frame = frame_index
        return active

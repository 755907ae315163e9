"""Mission-conditioned zone ranking and touchdown quality metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classes import class_table
from .geometry import Region
from .mask import SemanticMask

MISSIONS = ("emergency", "rescue", "safe_landing")
FEATURES = ("b_center", "b_target", "b_buffer", "b_area")

DEFAULT_WEIGHTS = {
    "emergency": {"b_center": 0.7, "b_buffer": 0.2, "b_area": 0.1},
    "rescue": {"b_target": 0.7, "b_buffer": 0.2, "b_area": 0.1},
    "safe_landing": {"b_buffer": 0.6, "b_area": 0.3, "b_center": 0.1},
}


class MissionError(ValueError):
    pass


@dataclass(frozen=True)
class MissionConfig:
    mission: str = "safe_landing"
    weights: dict[str, float] | None = None  # None: mission default pack
    target: tuple[float, float] | None = None
    d_max: float | None = None  # None: half the image diagonal
    rho_max: float | None = None  # None: 10% of the image diagonal
    area_ref: float | None = None  # None: 2% of the image area

    def __post_init__(self):
        if self.mission not in MISSIONS:
            raise MissionError(f"unknown mission {self.mission!r}; expected one of {', '.join(MISSIONS)}")
        w = self.resolved_weights()
        unknown = set(w) - set(FEATURES)
        if unknown:
            raise MissionError(f"unknown feature weights {sorted(unknown)}")
        if any(v < 0 for v in w.values()):
            raise MissionError("mission weights must be non-negative")
        if not any(v > 0 for v in w.values()):
            raise MissionError("at least one mission weight must be positive")
        if self.mission == "rescue" and self.target is None:
            raise MissionError("rescue mission requires a target")

    def resolved_weights(self) -> dict[str, float]:
        return dict(DEFAULT_WEIGHTS[self.mission] if self.weights is None else self.weights)

    def normalizers(self, image_size: tuple[int, int]) -> tuple[float, float, float]:
        w, h = image_size
        diag = math.hypot(w, h)
        d_max = self.d_max if self.d_max is not None else 0.5 * diag
        rho_max = self.rho_max if self.rho_max is not None else 0.1 * diag
        area_ref = self.area_ref if self.area_ref is not None else 0.02 * w * h
        return d_max, rho_max, area_ref


@dataclass(frozen=True)
class RankedZone:
    zone_id: int
    indicator: int
    features: dict[str, float]
    score: float
    rank: int


# ---------------------------------------------------------------------------
# metrics


def obstacle_pixels(mask: SemanticMask) -> np.ndarray:
    """(x, y) coordinates of every pixel whose class is a hazard."""
    hazard_ids = class_table().ids_where("hazard_prior", 1.0)
    rr, cc = np.nonzero(np.isin(mask.labels, hazard_ids))
    return np.column_stack((cc, rr)).astype(np.float64)


def metric_mod(point: tuple[float, float], obstacles) -> float:
    """Minimum Euclidean distance to any obstacle; ``inf`` when there are none."""
    obs = np.asarray(obstacles, dtype=np.float64).reshape(-1, 2)
    if len(obs) == 0:
        return math.inf
    dx = obs[:, 0] - point[0]
    dy = obs[:, 1] - point[1]
    return float(np.sqrt(dx * dx + dy * dy).min())


def metric_tcd(point: tuple[float, float], image_size: tuple[int, int]) -> float:
    w, h = image_size
    dx = point[0] - w / 2
    dy = point[1] - h / 2
    return math.sqrt(dx * dx + dy * dy)


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def features(zone: Region, image_size: tuple[int, int], cfg: MissionConfig,
             obstacles=None, mod: float | None = None) -> dict[str, float]:
    """Normalised mission features for a zone; pass either the obstacle pixel
    set or a precomputed MOD."""
    if cfg.mission == "rescue" and cfg.target is None:
        raise MissionError("rescue mission requires a target")
    d_max, rho_max, area_ref = cfg.normalizers(image_size)
    p = zone.centroid
    if mod is None:
        mod = metric_mod(p, obstacles if obstacles is not None else [])
    out = {
        "b_center": 1.0 - min(metric_tcd(p, image_size), d_max) / d_max,
        "b_target": 0.0,
        "b_buffer": 1.0 if math.isinf(mod) else min(mod, rho_max) / rho_max,
        "b_area": min(zone.area, area_ref) / area_ref,
    }
    if cfg.target is not None:
        out["b_target"] = 1.0 - min(math.dist(p, cfg.target), d_max) / d_max
    return {k: _clamp01(v) for k, v in out.items()}


def rank(zones: list[tuple], cfg: MissionConfig) -> list[RankedZone]:
    """Score ``(zone_id, indicator, features[, mod])`` tuples and sort them.

    Order: score descending, then larger b_buffer, then larger raw MOD (so a
    zone with no obstacle at all beats a saturated finite one), then smaller
    zone id.
    """
    weights = cfg.resolved_weights()
    scored = []
    for item in zones:
        zid, ind, feats = item[:3]
        mod = item[3] if len(item) > 3 and item[3] is not None else 0.0
        s = 0.0
        if ind:
            for name, w in weights.items():
                s += w * feats.get(name, 0.0)
        scored.append((zid, int(ind), feats, s, mod))
    scored.sort(key=lambda t: (-t[3], -t[2].get("b_buffer", 0.0), -t[4], t[0]))
    return [RankedZone(zid, ind, feats, s, i + 1) for i, (zid, ind, feats, s, _) in enumerate(scored)]

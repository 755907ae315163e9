"""End-to-end orchestration: mask -> regions -> scene graph -> verdicts ->
tracking -> mission ranking.  Produces the JSON documents the CLI writes."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .engine import (
    ZoneVerdict,
    _r6,
    provenance_json,
    verdict,
    verdict_deterministic,
)
from .geometry import Region, connected_components, grid_regions
from .mask import ASCII_SUFFIXES, IMAGE_SUFFIXES, SemanticMask
from .mission import features, metric_mod, metric_tcd, obstacle_pixels, rank
from .pssg import PSSG, build_pssg
from .rules import RulePack
from .temporal import Tracker, mfv_pass, motion

MASK_SUFFIXES = ASCII_SUFFIXES | IMAGE_SUFFIXES


class PipelineError(ValueError):
    pass


class InsufficientData(PipelineError):
    pass


def builtin_pack_text(name: str = "table2") -> str:
    return resources.files("slz").joinpath("data", f"{name}.slz").read_text(encoding="utf-8")


def list_masks(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise PipelineError(f"not a directory: {d}")
    return sorted(p for p in d.iterdir() if p.is_file() and p.suffix.lower() in MASK_SUFFIXES)


@dataclass
class FrameResult:
    frame_index: int
    mask: SemanticMask
    regions: list[Region]
    pssg: PSSG
    verdicts: list[ZoneVerdict]

    def verdict_for(self, zone_id: int) -> ZoneVerdict:
        for v in self.verdicts:
            if v.zone_id == zone_id:
                return v
        raise KeyError(zone_id)


def extract_regions(mask: SemanticMask, cfg: PipelineConfig) -> list[Region]:
    if cfg.grid.cell:
        return grid_regions(mask, cfg.grid.cell, cfg.attributes, cfg.grid.min_fraction)
    return connected_components(mask, cfg.attributes)


def assess(pssg: PSSG, pack: RulePack, cfg: PipelineConfig) -> list[ZoneVerdict]:
    e = cfg.engine
    floor = cfg.relations.fact_floor
    if e.deterministic:
        return verdict_deterministic(pssg, pack, e.tau_fact, e.tau_mission, floor)
    return verdict(pssg, pack, e.k, e.tau_mission, floor)


def process_frame(mask: SemanticMask, pack: RulePack, cfg: PipelineConfig, frame_index: int = 0,
                  regions: list[Region] | None = None) -> FrameResult:
    if regions is None:
        regions = extract_regions(mask, cfg)
    g = build_pssg(regions, cfg.relations, mask.size, frame_index)
    return FrameResult(frame_index, mask, regions, g, assess(g, pack, cfg))


# ---------------------------------------------------------------------------
# ranking


def _rank_frame(frame: FrameResult, cfg: PipelineConfig, indicators: dict[int, int]):
    """Return (ranking entries as JSON dicts, RankedZone list)."""
    obstacles = obstacle_pixels(frame.mask)
    by_id = {r.id: r for r in frame.regions}
    rows = []
    extra = {}
    for v in frame.verdicts:
        zone = by_id[v.zone_id]
        mod = metric_mod(zone.centroid, obstacles)
        feats = features(zone, frame.mask.size, cfg.mission, mod=mod)
        rows.append((v.zone_id, indicators.get(v.zone_id, 0), feats, mod))
        extra[v.zone_id] = (zone, mod, metric_tcd(zone.centroid, frame.mask.size))
    ranked = rank(rows, cfg.mission) if rows else []
    out = []
    for rz in ranked:
        zone, mod, tcd = extra[rz.zone_id]
        out.append({
            "zone": rz.zone_id,
            "rank": rz.rank,
            "indicator": rz.indicator,
            "score": _r6(rz.score),
            "features": {k: _r6(v) for k, v in rz.features.items()},
            "centroid": [_r6(c) for c in zone.centroid],
            "area": zone.area,
            "mod": None if math.isinf(mod) else _r6(mod),
            "tcd": _r6(tcd),
        })
    return out, ranked


def _selected(ranked) -> int | None:
    if ranked and ranked[0].score > 0.0:
        return ranked[0].zone_id
    return None


def _meta(cfg: PipelineConfig, frames: int, image_size, rules_name: str) -> dict:
    e = cfg.engine
    return {
        "mode": "deterministic" if e.deterministic else "probabilistic",
        "k": e.k,
        "tau_mission": e.tau_mission,
        "tau_fact": e.tau_fact if e.deterministic else None,
        "mission": cfg.mission.mission,
        "window": cfg.mfv.window,
        "grid": cfg.grid.cell,
        "rules": rules_name,
        "frames": frames,
        "image_size": list(image_size),
    }


def _verdict_summary(v: ZoneVerdict) -> dict:
    return {"zone": v.zone_id, "risk": _r6(v.risk), "score": _r6(v.score), "passed": v.passed_gate}


def infer(mask: SemanticMask, pack: RulePack, cfg: PipelineConfig, rules_name: str = "", top: int | None = None) -> dict:
    """Single-frame pipeline.  MFV degenerates to T = 1: a zone survives when it
    passes the gate and its risk is within the hazard bound."""
    frame = process_frame(mask, pack, cfg)
    single = dataclasses.replace(cfg.mfv, window=1)
    tracker = Tracker(cfg.mfv.iou_floor)
    assoc = tracker.associate(0, frame.regions)
    risks = {v.zone_id: v.risk for v in frame.verdicts}
    active = tracker.commit(0, frame.regions, risks, assoc)
    indicators = {
        v.zone_id: int(v.passed_gate and mfv_pass(active[v.zone_id], single))
        for v in frame.verdicts
    }
    ranking, ranked = _rank_frame(frame, cfg, indicators)
    if top is not None:
        ranking = ranking[:top]
    return {
        "meta": _meta(cfg, 1, mask.size, rules_name),
        "verdicts": [provenance_json(v) for v in frame.verdicts],
        "ranking": ranking,
        "selected": _selected(ranked),
        "passed": [v.zone_id for v in frame.verdicts if v.passed_gate],
    }


def run(masks: list[tuple[str, SemanticMask]], pack: RulePack, cfg: PipelineConfig,
        rules_name: str = "", top: int | None = None) -> dict:
    """Multi-frame pipeline over an ordered mask sequence; ranks the final
    frame's zones with the multiple-frame indicator."""
    if len(masks) < cfg.mfv.window:
        raise InsufficientData(f"need at least {cfg.mfv.window} frames, got {len(masks)}")
    tracker = Tracker(cfg.mfv.iou_floor)
    frames_out = []
    frame = None
    active = {}
    for t, (name, mask) in enumerate(masks):
        regions = extract_regions(mask, cfg)
        if frames_out and mask.size != tuple(frames_out[0]["image_size"]):
            raise PipelineError(f"frame {name} has size {mask.size}, expected {frames_out[0]['image_size']}")
        assoc = tracker.associate(t, regions)
        for r in regions:
            tr = assoc[r.id]
            if tr is not None:
                r.attributes["is_moving"] = motion(tr.last, r)
        frame = process_frame(mask, pack, cfg, t, regions)
        risks = {v.zone_id: v.risk for v in frame.verdicts}
        active = tracker.commit(t, regions, risks, assoc)
        frames_out.append({
            "frame": t,
            "file": name,
            "image_size": list(mask.size),
            "verdicts": [_verdict_summary(v) for v in frame.verdicts],
        })
    t_final = len(masks) - 1
    indicators = {
        v.zone_id: int(v.passed_gate and mfv_pass(active[v.zone_id], cfg.mfv, t_final))
        for v in frame.verdicts
    }
    ranking, ranked = _rank_frame(frame, cfg, indicators)
    if top is not None:
        ranking = ranking[:top]
    frames_out[-1]["ranking"] = ranking
    for f in frames_out:
        del f["image_size"]
    sel = _selected(ranked)
    selected = None
    if sel is not None:
        v = frame.verdict_for(sel)
        selected = {
            "zone": sel,
            "track": active[sel].track_id,
            "provenance": provenance_json(v),
        }
    return {
        "meta": _meta(cfg, len(masks), masks[-1][1].size, rules_name),
        "frames": frames_out,
        "tracks": [tr.to_json() for tr in tracker.tracks],
        "selected": selected,
    }


def evaluate(scenes: list[tuple[str, SemanticMask, int | None]], pack: RulePack, cfg: PipelineConfig) -> list[dict]:
    """Per-scene touchdown metrics of the selected zone.  Rows are sorted by
    scene name; the last row holds the means over scenes with a selection."""
    rows = []
    for name, mask, expected in sorted(scenes, key=lambda s: s[0]):
        doc = infer(mask, pack, cfg)
        sel = doc["selected"]
        row = {"scene": name, "zone_id": sel, "mission": cfg.mission.mission,
               "MOD": None, "TCD": None, "score": None, "rank": None, "expected": None}
        if sel is not None:
            entry = next(e for e in doc["ranking"] if e["zone"] == sel)
            frame_regions = {r.id: r for r in extract_regions(mask, cfg)}
            point = frame_regions[sel].centroid
            row["MOD"] = metric_mod(point, obstacle_pixels(mask))
            row["TCD"] = metric_tcd(point, mask.size)
            row["score"] = entry["score"]
            row["rank"] = entry["rank"]
        if expected is not None:
            row["expected"] = int(sel == expected)
        rows.append(row)
    picked = [r for r in rows if r["zone_id"] is not None]
    mean = {"scene": "mean", "zone_id": None, "mission": cfg.mission.mission,
            "MOD": None, "TCD": None, "score": None, "rank": None, "expected": None}
    if picked:
        mean["MOD"] = float(np.mean([r["MOD"] for r in picked]))
        mean["TCD"] = float(np.mean([r["TCD"] for r in picked]))
        mean["score"] = float(np.mean([r["score"] for r in picked]))
    scored = [r["expected"] for r in rows if r["expected"] is not None]
    if scored:
        mean["expected"] = float(np.mean(scored))
    rows.append(mean)
    return rows

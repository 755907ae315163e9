"""Pipeline configuration: one YAML document with a section per stage.

Keys set to ``null`` take image-dependent defaults (see each dataclass).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .geometry import AttributeParams
from .mission import MissionConfig
from .pssg import RelationParams
from .temporal import MfvParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EngineParams:
    k: int = 3
    tau_mission: float = 0.7
    deterministic: bool = False
    tau_fact: float = 0.5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 <= self.tau_mission <= 1.0:
            raise ValueError("tau_mission must lie in [0,1]")
        if not 0.0 <= self.tau_fact <= 1.0:
            raise ValueError("tau_fact must lie in [0,1]")


@dataclass(frozen=True)
class GridParams:
    cell: int | None = None  # None: connected-component zones
    min_fraction: float = 0.5

    def __post_init__(self):
        if self.cell is not None and self.cell < 1:
            raise ValueError("grid cell must be >= 1")


@dataclass(frozen=True)
class PipelineConfig:
    attributes: AttributeParams = field(default_factory=AttributeParams)
    relations: RelationParams = field(default_factory=RelationParams)
    mfv: MfvParams = field(default_factory=MfvParams)
    engine: EngineParams = field(default_factory=EngineParams)
    mission: MissionConfig = field(default_factory=MissionConfig)
    grid: GridParams = field(default_factory=GridParams)


_TYPES = {
    "attributes": AttributeParams,
    "relations": RelationParams,
    "mfv": MfvParams,
    "engine": EngineParams,
    "mission": MissionConfig,
    "grid": GridParams,
}


def _section(name: str, data) -> object:
    cls = _TYPES[name]
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {name}: {', '.join(unknown)}")
    kwargs = dict(data)
    if name == "mission" and kwargs.get("target") is not None:
        kwargs["target"] = tuple(float(v) for v in kwargs["target"])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name} section: {exc}") from exc


def config_from_dict(doc: dict | None) -> PipelineConfig:
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    unknown = sorted(set(doc) - set(_TYPES))
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
    return PipelineConfig(**{name: _section(name, doc.get(name)) for name in _TYPES})


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(doc)


def config_to_dict(cfg: PipelineConfig) -> dict:
    out = {}
    for name in _TYPES:
        sec = dataclasses.asdict(getattr(cfg, name))
        if name == "mission" and sec.get("target") is not None:
            sec["target"] = list(sec["target"])
        out[name] = sec
    return out


def default_config_yaml() -> str:
    return yaml.safe_dump(config_to_dict(PipelineConfig()), sort_keys=False)


def with_overrides(cfg: PipelineConfig, *, k=None, tau_mission=None, deterministic=None,
                   mission=None, target=None, grid=None) -> PipelineConfig:
    engine = cfg.engine
    if k is not None:
        engine = dataclasses.replace(engine, k=k)
    if tau_mission is not None:
        engine = dataclasses.replace(engine, tau_mission=tau_mission)
    if deterministic:
        engine = dataclasses.replace(engine, deterministic=True)
    mc = cfg.mission
    if mission is not None or target is not None:
        changes = {}
        if mission is not None and mission != mc.mission:
            changes["mission"] = mission
            changes["weights"] = None
        if target is not None:
            changes["target"] = tuple(target)
        try:
            mc = dataclasses.replace(mc, **changes)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    gp = cfg.grid if grid is None else dataclasses.replace(cfg.grid, cell=grid)
    return dataclasses.replace(cfg, engine=engine, mission=mc, grid=gp)

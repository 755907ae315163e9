"""Semantic class table for the drone-imagery label space (19 classes)."""

from __future__ import annotations

from dataclasses import dataclass

CLASS_NAMES: tuple[str, ...] = (
    "unlabeled",
    "paved-area",
    "dirt",
    "grass",
    "gravel",
    "water",
    "rocks",
    "pool",
    "roof",
    "wall",
    "window",
    "door",
    "fence",
    "person",
    "dog",
    "car",
    "bicycle",
    "tree",
    "obstacle",
)

LANDABLE = frozenset({"paved-area", "dirt", "grass"})
HAZARDS = frozenset(
    {
        "water", "pool", "person", "dog", "car", "bicycle", "tree",
        "obstacle", "rocks", "wall", "fence", "roof", "window", "door",
    }
)
BUILDING = frozenset({"roof", "wall", "window", "door"})
MOVABLE = frozenset({"person", "dog", "car", "bicycle"})

_FLATNESS = {
    "paved-area": 1.0,
    "dirt": 1.0,
    "grass": 1.0,
    "gravel": 1.0,
    "rocks": 0.3,
    "water": 0.0,
    "pool": 0.0,
}
_DEFAULT_FLATNESS = 0.5


def predicate_name(class_name: str) -> str:
    """Rule-language spelling of a class name (``paved-area`` -> ``paved_area``)."""
    return class_name.replace("-", "_")


@dataclass(frozen=True)
class ClassInfo:
    id: int
    name: str
    landable_prior: float
    hazard_prior: float
    flatness_prior: float

    @property
    def predicate(self) -> str:
        return predicate_name(self.name)


class ClassTable:
    """Bidirectional id <-> name lookup with per-class priors."""

    def __init__(self, entries: tuple[ClassInfo, ...]):
        self.entries = entries
        self._by_name = {e.name: e for e in entries}
        self._by_name.update({e.predicate: e for e in entries})

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, key: int | str) -> ClassInfo:
        if isinstance(key, str):
            try:
                return self._by_name[key]
            except KeyError:
                raise KeyError(f"unknown class name {key!r}") from None
        if not 0 <= key < len(self.entries):
            raise KeyError(f"class id {key} out of range 0..{len(self.entries) - 1}")
        return self.entries[key]

    def ids_where(self, flag: str, value: float = 1.0) -> list[int]:
        return [e.id for e in self.entries if getattr(e, flag) == value]


def _build() -> ClassTable:
    entries = []
    for i, name in enumerate(CLASS_NAMES):
        entries.append(
            ClassInfo(
                id=i,
                name=name,
                landable_prior=1.0 if name in LANDABLE else 0.0,
                hazard_prior=1.0 if name in HAZARDS else 0.0,
                flatness_prior=_FLATNESS.get(name, _DEFAULT_FLATNESS),
            )
        )
    return ClassTable(tuple(entries))


_TABLE = _build()


def class_table() -> ClassTable:
    return _TABLE

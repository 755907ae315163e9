"""Loading and validation of semantic label masks.

Two on-disk formats are supported:

* ``ascii-grid``: a header line ``H W`` followed by H rows of W integer class
  ids. Optional companions ``<name>.conf`` (per-pixel confidence) and
  ``<name>.hgt`` (elevation) share the same layout with float values.
* ``grid-image``: an 8-bit single-channel raster whose pixel value is the
  class id.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classes import CLASS_NAMES

NUM_CLASSES = len(CLASS_NAMES)
ASCII_SUFFIXES = {".txt", ".grid", ".asc"}
IMAGE_SUFFIXES = {".png", ".pgm", ".bmp", ".tif", ".tiff"}


class MaskError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SemanticMask:
    labels: np.ndarray
    confidence: np.ndarray
    height_grid: np.ndarray | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2 or labels.size == 0:
            raise MaskError("labels must be a non-empty 2-D grid")
        bad = np.argwhere((labels < 0) | (labels >= NUM_CLASSES))
        if len(bad):
            r, c = bad[0]
            raise MaskError(f"label out of range at ({r},{c}): {labels[r, c]}")
        labels = labels.astype(np.int16)
        conf = np.asarray(self.confidence, dtype=np.float64)
        if conf.shape != labels.shape:
            raise MaskError(f"confidence shape {conf.shape} does not match labels {labels.shape}")
        if np.any(~np.isfinite(conf)) or conf.min() < 0.0 or conf.max() > 1.0:
            raise MaskError("confidence values must lie in [0,1]")
        hg = None
        if self.height_grid is not None:
            hg = np.asarray(self.height_grid, dtype=np.float64)
            if hg.shape != labels.shape:
                raise MaskError(f"height grid shape {hg.shape} does not match labels {labels.shape}")
        for arr in (labels, conf, hg):
            if arr is not None:
                arr.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "confidence", conf)
        object.__setattr__(self, "height_grid", hg)

    @classmethod
    def from_labels(cls, labels, confidence=None, height_grid=None) -> SemanticMask:
        labels = np.asarray(labels)
        if confidence is None:
            confidence = np.ones(labels.shape, dtype=np.float64)
        return cls(labels, confidence, height_grid)

    @property
    def height(self) -> int:
        return int(self.labels.shape[0])

    @property
    def width(self) -> int:
        return int(self.labels.shape[1])

    @property
    def size(self) -> tuple[int, int]:
        """(W, H)."""
        return self.width, self.height

    def __eq__(self, other):
        if not isinstance(other, SemanticMask):
            return NotImplemented
        if (self.height_grid is None) != (other.height_grid is None):
            return False
        return (
            np.array_equal(self.labels, other.labels)
            and np.array_equal(self.confidence, other.confidence)
            and (self.height_grid is None or np.array_equal(self.height_grid, other.height_grid))
        )

    __hash__ = None


def _read_grid(path: Path, dtype) -> np.ndarray:
    try:
        text = path.read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise MaskError(f"cannot read {path}: {exc}") from exc
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MaskError(f"{path}: empty grid file")
    try:
        h, w = (int(v) for v in lines[0])
    except ValueError:
        raise MaskError(f"{path}: first line must be 'H W'") from None
    rows = lines[1:]
    if h <= 0 or w <= 0:
        raise MaskError(f"{path}: dimensions must be positive, got {h}x{w}")
    if len(rows) != h:
        raise MaskError(f"{path}: expected {h} rows, found {len(rows)}")
    for i, row in enumerate(rows):
        if len(row) != w:
            raise MaskError(f"{path}: row {i} has {len(row)} values, expected {w}")
    try:
        return np.array([[dtype(v) for v in row] for row in rows])
    except ValueError as exc:
        raise MaskError(f"{path}: {exc}") from None


def _read_image(path: Path) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as img:
            if img.mode not in ("L", "P", "I", "I;16"):
                raise MaskError(f"{path}: expected single-channel raster, got mode {img.mode}")
            return np.array(img, dtype=np.int64)
    except (OSError, UnidentifiedImageError) as exc:
        raise MaskError(f"cannot read {path}: {exc}") from exc


def _infer_format(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix in IMAGE_SUFFIXES:
        return "grid-image"
    return "ascii-grid"


def load_mask(path, format: str | None = None) -> SemanticMask:
    path = Path(path)
    if not path.is_file():
        raise MaskError(f"mask file not found: {path}")
    fmt = format or _infer_format(path)
    if fmt == "ascii-grid":
        labels = _read_grid(path, int)
    elif fmt == "grid-image":
        labels = _read_image(path)
    else:
        raise MaskError(f"unknown mask format {fmt!r}")
    conf_path = path.with_suffix(".conf")
    hgt_path = path.with_suffix(".hgt")
    conf = _read_grid(conf_path, float) if conf_path.is_file() else None
    hgt = _read_grid(hgt_path, float) if hgt_path.is_file() else None
    return SemanticMask.from_labels(labels, conf, hgt)


def _format_grid(arr: np.ndarray, fmt) -> str:
    h, w = arr.shape
    lines = [f"{h} {w}"]
    lines.extend(" ".join(fmt(v) for v in row) for row in arr.tolist())
    return "\n".join(lines) + "\n"


def write_ascii_grid(mask: SemanticMask, path, companions: bool = True) -> None:
    """Write ``mask`` in ascii-grid format; confidence/height companions too
    unless the confidence layer is all ones."""
    path = Path(path)
    path.write_text(_format_grid(mask.labels, str))
    if not companions:
        return
    if not np.all(mask.confidence == 1.0):
        path.with_suffix(".conf").write_text(_format_grid(mask.confidence, repr))
    if mask.height_grid is not None:
        path.with_suffix(".hgt").write_text(_format_grid(mask.height_grid, repr))


def write_image(mask: SemanticMask, path) -> None:
    from PIL import Image

    Image.fromarray(mask.labels.astype(np.uint8), mode="L").save(path)

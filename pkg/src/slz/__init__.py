"""Neuro-symbolic safe landing zone selection from semantic masks."""

from .classes import CLASS_NAMES, class_table
from .config import PipelineConfig, load_config
from .engine import infer_topk, verdict, verdict_deterministic
from .geometry import connected_components, grid_regions
from .mask import SemanticMask, load_mask
from .pssg import PSSG, build_pssg
from .rules import parse_rules

__version__ = "0.1.0"

__all__ = [
    "CLASS_NAMES",
    "PSSG",
    "PipelineConfig",
    "SemanticMask",
    "build_pssg",
    "class_table",
    "connected_components",
    "grid_regions",
    "infer_topk",
    "load_config",
    "load_mask",
    "parse_rules",
    "verdict",
    "verdict_deterministic",
]

"""Command-line entry point.

Exit codes: 0 ok, 1 invalid input (syntax, stratification, safety, bad mask or
config), 2 rule-pack findings, 3 no zone passes the gate, 4 not enough data.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

from .config import ConfigError, PipelineConfig, default_config_yaml, load_config, with_overrides
from .engine import EngineError, format_table, provenance_json
from .mask import MaskError, load_mask
from .mission import MISSIONS, MissionError
from .pipeline import (
    InsufficientData,
    PipelineError,
    assess,
    builtin_pack_text,
    evaluate,
    infer,
    list_masks,
    process_frame,
    run,
)
from .pssg import PSSG
from .rules import RuleError, RuleSyntaxError, default_catalog, parse_rules, predicate_signature_check

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_FINDINGS = 2
EXIT_NO_ZONE = 3
EXIT_NO_DATA = 4

BUILTIN_PACKS = ("table2", "table4")
CSV_COLUMNS = ("scene", "zone_id", "mission", "MOD", "TCD", "score", "rank", "expected")


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _read_rules(source: str | None) -> tuple[str, str]:
    """Return (display name, source text).  A bare pack name selects a
    bundled pack unless a file of that name exists."""
    source = source or "table2"
    path = Path(source)
    if path.is_file():
        return path.name, path.read_text(encoding="utf-8")
    if source in BUILTIN_PACKS:
        return source, builtin_pack_text(source)
    raise CliError(f"rules file not found: {source}")


def _load_pack(source: str | None):
    name, text = _read_rules(source)
    pack = parse_rules(text)
    findings = predicate_signature_check(pack, default_catalog())
    if findings:
        raise CliError("; ".join(f.message for f in findings), EXIT_FINDINGS)
    return name, pack


def _parse_target(text: str) -> tuple[float, float]:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("target must be 'x,y'") from None
    return x, y


def _config(args) -> PipelineConfig:
    path = getattr(args, "config", None) or os.environ.get("SLZ_CONFIG")
    cfg = load_config(path) if path else PipelineConfig()
    return with_overrides(
        cfg,
        k=getattr(args, "k", None),
        tau_mission=getattr(args, "tau_mission", None),
        deterministic=getattr(args, "deterministic", False),
        mission=getattr(args, "mission", None),
        target=getattr(args, "target", None),
        grid=getattr(args, "grid", None),
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_check_rules(args) -> int:
    try:
        _, text = _read_rules(args.rules)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        pack = parse_rules(text)
    except RuleSyntaxError as exc:
        print(f"syntax-error line={exc.line} col={exc.col}: {exc}")
        return EXIT_INPUT
    except RuleError as exc:
        print(f"error: {exc}")
        return EXIT_INPUT
    findings = predicate_signature_check(pack, default_catalog())
    for f in findings:
        print(f"finding kind={f.kind} rule={f.rule_id} predicate={f.predicate}: {f.message}")
    if findings:
        return EXIT_FINDINGS
    print(f"ok rules={len(pack.rules)} strata={len(pack.strata)}")
    for i, stratum in enumerate(pack.strata):
        print(f"stratum {i}: {', '.join(sorted(stratum))}")
    return EXIT_OK


def cmd_infer(args) -> int:
    cfg = _config(args)
    name, pack = _load_pack(args.rules)
    doc = infer(load_mask(args.mask), pack, cfg, name, args.top)
    _emit(_dump_json(doc), args.out)
    return EXIT_OK if doc["passed"] else EXIT_NO_ZONE


def cmd_run(args) -> int:
    cfg = _config(args)
    name, pack = _load_pack(args.rules)
    paths = list_masks(args.frames)
    if len(paths) < cfg.mfv.window:
        raise CliError(f"need at least {cfg.mfv.window} frames in {args.frames}, found {len(paths)}", EXIT_NO_DATA)
    masks = [(p.name, load_mask(p)) for p in paths]
    doc = run(masks, pack, cfg, name, args.top)
    _emit(_dump_json(doc), args.out)
    return EXIT_OK


def cmd_explain(args) -> int:
    cfg = _config(args)
    _, pack = _load_pack(args.rules)
    src = Path(args.input)
    if src.suffix.lower() == ".json":
        try:
            graph = PSSG.from_json(json.loads(src.read_text(encoding="utf-8")))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise CliError(f"cannot read scene graph {src}: {exc}") from exc
        verdicts = assess(graph, pack, cfg)
    else:
        verdicts = process_frame(load_mask(src), pack, cfg).verdicts
    match = [v for v in verdicts if v.zone_id == args.zone]
    if not match:
        known = ", ".join(str(v.zone_id) for v in verdicts) or "none"
        raise CliError(f"unknown zone id {args.zone} (candidate zones: {known})")
    v = match[0]
    text = _dump_json(provenance_json(v)) if args.json else format_table(v)
    _emit(text, args.out)
    return EXIT_OK


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.6f}"
    return str(v)


def _expected_for(mask_path: Path) -> int | None:
    exp = mask_path.with_suffix(".expected")
    if not exp.is_file():
        return None
    text = exp.read_text().strip()
    try:
        return int(text)
    except ValueError:
        raise CliError(f"{exp}: expected a zone id, got {text!r}") from None


def cmd_eval(args) -> int:
    cfg = _config(args)
    _, pack = _load_pack(args.rules)
    paths = list_masks(args.dataset)
    if not paths:
        raise CliError(f"no masks in {args.dataset}", EXIT_NO_DATA)
    scenes = [(p.stem, load_mask(p), _expected_for(p)) for p in paths]
    rows = evaluate(scenes, pack, cfg)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_config_default(args) -> int:
    _emit(default_config_yaml(), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, mission: bool = True) -> None:
    p.add_argument("--rules", help="rule file, or a bundled pack name (table2, table4); default table2")
    p.add_argument("--config", help="YAML config (default: $SLZ_CONFIG if set)")
    p.add_argument("--k", type=int, help="proofs kept per atom")
    p.add_argument("--tau-mission", type=float, dest="tau_mission", help="safety gate threshold")
    p.add_argument("--deterministic", action="store_true", help="boolean facts after thresholding")
    p.add_argument("--grid", type=int, nargs="?", const=64, metavar="G",
                   help="grid-candidate zones with G px cells (64 if G omitted)")
    if mission:
        p.add_argument("--mission", choices=MISSIONS)
        p.add_argument("--target", type=_parse_target, help="rescue target as x,y")
    p.add_argument("--out", help="output file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slz", description="Neuro-symbolic safe landing zone selection.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-rules", help="parse, stratify and signature-check a rule pack")
    p.add_argument("rules", nargs="?", default="table2")
    p.set_defaults(func=cmd_check_rules)

    p = sub.add_parser("infer", help="single-frame verdicts and ranking")
    p.add_argument("mask")
    _add_common(p)
    p.add_argument("--top", type=int, help="keep only the first N ranked zones")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("run", help="multi-frame validation over a directory of masks")
    p.add_argument("frames")
    _add_common(p)
    p.add_argument("--top", type=int, help="keep only the first N ranked zones")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("explain", help="per-rule provenance for one zone")
    p.add_argument("input", help="mask file or scene-graph JSON")
    p.add_argument("--zone", type=int, required=True)
    p.add_argument("--json", action="store_true", help="emit provenance JSON instead of a table")
    _add_common(p, mission=False)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("eval", help="MOD/TCD of selected touchdown points over a dataset")
    p.add_argument("dataset")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("config-default", help="print the default configuration")
    p.add_argument("--out")
    p.set_defaults(func=cmd_config_default)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except InsufficientData as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_DATA
    except (PipelineError, RuleError, MaskError, ConfigError, MissionError, EngineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

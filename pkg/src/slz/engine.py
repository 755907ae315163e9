"""Top-k proof provenance evaluation of a stratified rule pack.

Facts carry independent probabilities.  A proof is a set of fact ids whose
weight is the product of their probabilities; each derived atom keeps its k
heaviest proofs.  Risk of a zone is the noisy-OR over the top-k proofs of
``hazard(zone)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import NamedTuple

from .classes import BUILDING, class_table
from .geometry import ATTRIBUTES
from .pssg import PSSG
from .rules import RulePack

REQUIRED = ("landable_area", "hazard", "safe")

AtomKey = tuple[str, tuple[int, ...]]


class EngineError(ValueError):
    pass


class Fact(NamedTuple):
    predicate: str
    args: tuple[int, ...]
    prob: float
    fact_id: int

    def __str__(self) -> str:
        return f"{self.predicate}({', '.join(map(str, self.args))})[{self.prob:.6f}]"


@dataclass(frozen=True, order=True)
class Proof:
    support: tuple[int, ...]
    weight: float

    def sort_key(self):
        return (-self.weight, self.support)


def noisy_or(weights) -> float:
    # sorted fold of x + y(1 - x): order-free, and exact for [w] and for a 1
    acc = 0.0
    for w in sorted(weights):
        acc = 1.0 if w >= 1.0 else acc + w * (1.0 - acc)
    return acc


# ---------------------------------------------------------------------------
# grounding


def ground_facts(pssg: PSSG, fact_floor: float = 0.01, predicates=None) -> list[Fact]:
    """Facts for every node (class, attributes, derived helpers) followed by
    every edge, numbered in that order.

    ``predicates`` restricts which facts are materialised; ids are assigned
    as if every fact were emitted, so they do not depend on the filter.
    """
    table = class_table()
    out: list[Fact] = []
    keep = None if predicates is None else frozenset(predicates)
    next_id = 0

    def add(pred, args, p):
        nonlocal next_id
        if keep is None or pred in keep:
            out.append(Fact(pred, args, float(p), next_id))
        next_id += 1

    for node in sorted(pssg.nodes, key=lambda n: n.id):
        info = table[node.class_id]
        args = (node.id,)
        add(info.predicate, args, node.class_prob)
        attrs = node.attributes
        for name in ATTRIBUTES:
            if name == "is_safe":
                continue
            p = attrs.get(name, 0.0)
            if p > fact_floor:
                add(name, args, p)
        large = attrs.get("is_large_area", 0.0)
        smooth = attrs.get("is_smooth_surface", 0.0)
        helpers = [
            ("is_large_object", large),
            ("area_too_small", 1.0 - large),
            ("rough_surface", 1.0 - smooth),
        ]
        if info.name in BUILDING:
            helpers.append(("building", node.class_prob))
        if info.name == "tree":
            helpers.append(("vegetation", node.class_prob))
        elif info.name == "grass":
            helpers.append(("vegetation", node.class_prob * (1.0 - smooth)))
        for name, p in helpers:
            if p > fact_floor:
                add(name, args, p)
    for e in pssg.edges:
        if keep is None or e.relation in keep:
            out.append(Fact(e.relation, (e.src, e.dst), float(e.p), next_id))
        next_id += 1
    return out


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class Inference:
    proofs: dict[AtomKey, list[Proof]]
    by_rule: dict[AtomKey, dict[str, list[Proof]]]
    facts: dict[int, tuple[str, tuple[int, ...], float]]
    k: int

    def get(self, predicate: str, args: tuple[int, ...]) -> list[Proof]:
        return self.proofs.get((predicate, tuple(args)), [])

    def probability(self, predicate: str, args: tuple[int, ...]) -> float:
        return noisy_or(p.weight for p in self.get(predicate, args))

    def atoms(self, predicate: str) -> list[tuple[int, ...]]:
        return sorted(a for (p, a) in self.proofs if p == predicate)


@dataclass
class _Body:
    rule_id: str
    head: tuple
    positives: tuple
    negatives: tuple
    plans: dict = field(default_factory=dict)


def _plan(body: _Body, first: int | None) -> list[int]:
    """Greedy join order: the delta literal first, then whichever literal has
    the most bound arguments."""
    order = []
    bound: set[str] = set()
    remaining = list(range(len(body.positives)))
    if first is not None:
        order.append(first)
        remaining.remove(first)
        bound |= {a for a in body.positives[first].args if isinstance(a, str)}
    while remaining:
        def score(i):
            args = body.positives[i].args
            return (sum(1 for a in args if not isinstance(a, str) or a in bound), -i)
        best = max(remaining, key=score)
        order.append(best)
        remaining.remove(best)
        bound |= {a for a in body.positives[best].args if isinstance(a, str)}
    return order


class _Evaluator:
    def __init__(self, pack: RulePack, facts: list[Fact], k: int):
        if k < 1:
            raise EngineError("k must be at least 1")
        self.pack = pack
        self.k = k
        self.prob: dict[int, float] = {}
        self.info: dict[int, tuple[str, tuple[int, ...], float]] = {}
        self.rel: dict[str, dict[tuple, list[Proof]]] = {}
        self.by_rule: dict[AtomKey, dict[str, list[Proof]]] = {}
        self._index: dict[tuple[str, tuple[int, ...]], dict[tuple, list[tuple]]] = {}
        self._weights: dict[tuple[int, ...], float] = {}
        self._neg_ids: dict[AtomKey, int] = {}
        idb = pack.idb_predicates
        used = {a.predicate for r in pack.rules for a, _ in r.atoms()} - idb
        seen: set[int] = set()
        for f in facts:
            if f.fact_id in seen:
                raise EngineError(f"duplicate fact id {f.fact_id}")
            seen.add(f.fact_id)
            if f.predicate in idb:
                raise EngineError(f"fact for derived predicate {f.predicate}")
            if f.predicate not in used:
                continue
            if not 0.0 <= f.prob <= 1.0:
                raise EngineError(f"fact {f} has probability outside [0,1]")
            self.prob[f.fact_id] = f.prob
            self.info[f.fact_id] = (f.predicate, tuple(f.args), f.prob)
            if f.prob <= 0.0:
                continue
            rows = self.rel.setdefault(f.predicate, {})
            rows.setdefault(tuple(f.args), []).append(Proof((f.fact_id,), f.prob))
        for rows in self.rel.values():
            for args, proofs in rows.items():
                proofs.sort(key=Proof.sort_key)
                del proofs[k:]
        self._next_id = max(seen, default=-1) + 1
        self.bodies: dict[str, list[_Body]] = {}
        for r in pack.rules:
            for lits in r.expand():
                pos = tuple(l.atom for l in lits if not l.negated)
                neg = tuple(l.atom for l in lits if l.negated)
                self.bodies.setdefault(r.head.predicate, []).append(_Body(r.id, r.head, pos, neg))

    # -- storage helpers

    def _lookup(self, pred: str, pattern: tuple, key: tuple) -> list[tuple]:
        rows = self.rel.get(pred)
        if not rows:
            return []
        if len(pattern) == len(next(iter(rows))):
            return [key] if key in rows else []
        idx = self._index.get((pred, pattern))
        if idx is None:
            idx = {}
            for args in rows:
                idx.setdefault(tuple(args[i] for i in pattern), []).append(args)
            self._index[(pred, pattern)] = idx
        return idx.get(key, [])

    def _weight(self, support: tuple[int, ...]) -> float:
        w = self._weights.get(support)
        if w is None:
            w = 1.0
            for fid in support:
                w *= self.prob[fid]
            self._weights[support] = w
        return w

    def _negation_fact(self, atom: AtomKey) -> int:
        fid = self._neg_ids.get(atom)
        if fid is None:
            pred, args = atom
            proofs = self.rel.get(pred, {}).get(args, [])
            p = 1.0 - noisy_or(pr.weight for pr in proofs)
            fid = self._next_id
            self._next_id += 1
            self._neg_ids[atom] = fid
            self.prob[fid] = p
            self.info[fid] = (f"not {pred}", args, p)
        return fid

    # -- joins

    def _matches(self, body: _Body, order: list[int], delta: dict[tuple, None] | None):
        """Yield (binding, matched arg tuples aligned with body.positives)."""
        n = len(order)
        matched: list[tuple | None] = [None] * len(body.positives)

        def step(depth: int, binding: dict):
            if depth == n:
                yield binding, list(matched)
                return
            li = order[depth]
            atom = body.positives[li]
            pattern, key = [], []
            for pos, a in enumerate(atom.args):
                if not isinstance(a, str):
                    pattern.append(pos)
                    key.append(a)
                elif a in binding:
                    pattern.append(pos)
                    key.append(binding[a])
            if depth == 0 and delta is not None:
                cands = [args for args in delta
                         if all(args[p] == v for p, v in zip(pattern, key))]
            else:
                cands = self._lookup(atom.predicate, tuple(pattern), tuple(key))
            for args in cands:
                new = binding
                ok = True
                for a, v in zip(atom.args, args):
                    if isinstance(a, str):
                        bound = new.get(a)
                        if bound is None:
                            if new is binding:
                                new = dict(binding)
                            new[a] = v
                        elif bound != v:
                            ok = False
                            break
                if ok:
                    matched[li] = args
                    yield from step(depth + 1, new)

        yield from step(0, {})

    def _fire(self, body: _Body, delta_pos: int | None, delta, out: dict):
        order = body.plans.get(delta_pos)
        if order is None:
            order = body.plans[delta_pos] = _plan(body, delta_pos)
        for binding, matched in self._matches(body, order, delta):
            extra = []
            dead = False
            for atom in body.negatives:
                args = tuple(binding[a] if isinstance(a, str) else a for a in atom.args)
                fid = self._negation_fact((atom.predicate, args))
                if self.prob[fid] <= 0.0:
                    dead = True
                    break
                extra.append(fid)
            if dead:
                continue
            head = tuple(binding[a] if isinstance(a, str) else a for a in body.head.args)
            lists = [self.rel[atom.predicate][args] for atom, args in zip(body.positives, matched)]
            bucket = out.setdefault((body.head.predicate, head), {}).setdefault(body.rule_id, set())
            for combo in product(*lists):
                s = set(extra)
                for pr in combo:
                    s.update(pr.support)
                bucket.add(tuple(sorted(s)))

    def _merge(self, out: dict) -> dict[tuple, None]:
        """Fold candidate supports into stored top-k lists; return the atoms
        whose top-k list changed, keyed by predicate."""
        changed: dict[str, dict[tuple, None]] = {}
        for (pred, args), per_rule in out.items():
            atom = (pred, args)
            rules = self.by_rule.setdefault(atom, {})
            touched = False
            for rid, supports in per_rule.items():
                old = rules.get(rid, [])
                pool = {p.support: p.weight for p in old}
                for s in supports:
                    if s not in pool:
                        w = self._weight(s)
                        if w > 0.0:
                            pool[s] = w
                new = sorted((Proof(s, w) for s, w in pool.items()), key=Proof.sort_key)[: self.k]
                if new != old:
                    rules[rid] = new
                    touched = True
            if not touched:
                continue
            merged = {}
            for lst in rules.values():
                for p in lst:
                    merged[p.support] = p.weight
            top = sorted((Proof(s, w) for s, w in merged.items()), key=Proof.sort_key)[: self.k]
            if not top:
                continue
            rows = self.rel.setdefault(pred, {})
            if rows.get(args) != top:
                if args not in rows:
                    for key in [key for key in self._index if key[0] == pred]:
                        del self._index[key]
                rows[args] = top
                changed.setdefault(pred, {})[args] = None
        return changed

    def run(self) -> Inference:
        for comp in self.pack.components:
            bodies = [b for p in comp.predicates for b in self.bodies.get(p, [])]
            out: dict = {}
            for b in bodies:
                self._fire(b, None, None, out)
            delta = self._merge(out)
            if not comp.recursive:
                continue
            preds = set(comp.predicates)
            while delta:
                out = {}
                for b in bodies:
                    for i, atom in enumerate(b.positives):
                        if atom.predicate in preds and atom.predicate in delta:
                            self._fire(b, i, delta[atom.predicate], out)
                delta = self._merge(out)
        proofs = {}
        for pred in self.pack.idb_predicates:
            for args, lst in self.rel.get(pred, {}).items():
                proofs[(pred, args)] = lst
        proofs = dict(sorted(proofs.items()))
        return Inference(proofs, self.by_rule, self.info, self.k)


def infer_topk(pack: RulePack, facts: list[Fact], k: int = 3) -> Inference:
    return _Evaluator(pack, facts, k).run()


# ---------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class RuleContribution:
    rule_id: str
    p: float
    proofs: tuple[Proof, ...]

    @property
    def proof_count(self) -> int:
        return len(self.proofs)


@dataclass(frozen=True)
class ZoneVerdict:
    zone_id: int
    risk: float
    score: float
    passed_gate: bool
    per_rule: tuple[RuleContribution, ...]
    proofs: tuple[Proof, ...]
    facts: dict = field(compare=False, repr=False)

    def fact_detail(self, proof: Proof) -> list[tuple[str, tuple[int, ...], float]]:
        return [self.facts[fid] for fid in proof.support]


def _check_pack(pack: RulePack) -> None:
    missing = [p for p in REQUIRED if p not in pack.idb_predicates]
    if missing:
        raise EngineError(f"rule pack does not define required predicate(s): {', '.join(missing)}")


def verdicts_from_facts(pack: RulePack, facts: list[Fact], k: int = 3,
                        tau_mission: float = 0.7) -> list[ZoneVerdict]:
    _check_pack(pack)
    # a pack that defines a helper predicate itself overrides the grounded one
    idb = pack.idb_predicates
    facts = [f for f in facts if f.predicate not in idb]
    inf = infer_topk(pack, facts, k)
    hazard_rules = pack.rule_ids_for("hazard")
    out = []
    for args in inf.atoms("landable_area"):
        if len(args) != 1:
            continue
        atom = ("hazard", args)
        proofs = tuple(inf.proofs.get(atom, []))
        risk = noisy_or(p.weight for p in proofs)
        score = 1.0 - risk
        per_rule = []
        rule_lists = inf.by_rule.get(atom, {})
        for rid in hazard_rules:
            lst = tuple(rule_lists.get(rid, []))
            per_rule.append(RuleContribution(rid, noisy_or(p.weight for p in lst), lst))
        used = {fid for p in proofs for fid in p.support}
        used |= {fid for rc in per_rule for p in rc.proofs for fid in p.support}
        detail = {fid: inf.facts[fid] for fid in sorted(used)}
        out.append(ZoneVerdict(args[0], risk, score, score >= tau_mission, tuple(per_rule), proofs, detail))
    return out


def verdict(pssg: PSSG, pack: RulePack, k: int = 3, tau_mission: float = 0.7,
            fact_floor: float = 0.01) -> list[ZoneVerdict]:
    facts = ground_facts(pssg, fact_floor, pack.edb_predicates)
    return verdicts_from_facts(pack, facts, k, tau_mission)


def threshold_facts(facts: list[Fact], tau_fact: float) -> list[Fact]:
    """Boolean view of a fact base: facts at or above ``tau_fact`` become
    certain, the rest are dropped."""
    return [Fact(f.predicate, f.args, 1.0, f.fact_id) for f in facts if f.prob >= tau_fact]


def verdict_deterministic(pssg: PSSG, pack: RulePack, tau_fact: float = 0.5,
                          tau_mission: float = 0.7, fact_floor: float = 0.01) -> list[ZoneVerdict]:
    facts = threshold_facts(ground_facts(pssg, fact_floor, pack.edb_predicates), tau_fact)
    return verdicts_from_facts(pack, facts, k=1, tau_mission=tau_mission)


# ---------------------------------------------------------------------------
# serialisation


def _r6(x: float) -> float:
    v = round(x, 6)
    return 0.0 if v == 0 else v


def proof_json(proof: Proof, facts: dict) -> dict:
    return {
        "weight": _r6(proof.weight),
        "facts": [
            {"pred": facts[fid][0], "args": list(facts[fid][1]), "prob": _r6(facts[fid][2])}
            for fid in proof.support
        ],
    }


def provenance_json(v: ZoneVerdict) -> dict:
    return {
        "zone": v.zone_id,
        "risk": _r6(v.risk),
        "score": _r6(v.score),
        "passed": v.passed_gate,
        "rules": [
            {
                "id": rc.rule_id,
                "p": _r6(rc.p),
                "count": rc.proof_count,
                "proofs": [proof_json(p, v.facts) for p in rc.proofs],
            }
            for rc in v.per_rule
        ],
    }


def format_table(v: ZoneVerdict) -> str:
    """Fixed-width rule contribution table with per-proof fact breakdown."""
    width = max([len("rule")] + [len(rc.rule_id) for rc in v.per_rule])
    lines = [
        f"zone {v.zone_id}  risk={v.risk:.6f}  score={v.score:.6f}  "
        f"gate={'pass' if v.passed_gate else 'fail'}",
        f"{'rule':<{width}}  {'p':>8}  #proofs",
    ]
    for rc in v.per_rule:
        lines.append(f"{rc.rule_id:<{width}}  {rc.p:8.6f}  {rc.proof_count}")
    for rc in v.per_rule:
        for i, pr in enumerate(rc.proofs, 1):
            parts = " * ".join(
                f"{pred}({', '.join(map(str, args))})[{prob:.6f}]"
                for pred, args, prob in v.fact_detail(pr)
            )
            lines.append(f"  {rc.rule_id} proof {i}: {pr.weight:.6f} = {parts}")
    return "\n".join(lines) + "\n"


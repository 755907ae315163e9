"""Datalog-style rule language for landing-safety rule packs.

Grammar (one rule per ``.``)::

    rule     := atom ":-" conjunct ("," conjunct)* "."
    conjunct := ["not"] atom | "(" atom (("∨" | "or") atom)* ")"
    atom     := name "(" term ("," term)* ")"
    term     := name | integer

``%`` starts a comment.  A line ``@id <name>`` names the following rule.
Identifiers in argument position are variables; integers are constants
(region ids).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import product

import networkx as nx

from .classes import CLASS_NAMES, predicate_name
from .geometry import ATTRIBUTES
from .pssg import RELATIONS

HELPERS: tuple[str, ...] = ("is_large_object", "area_too_small", "rough_surface", "building", "vegetation")


class RuleError(ValueError):
    pass


class RuleSyntaxError(RuleError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {msg}")
        self.line = line
        self.col = col


Term = str | int


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[Term, ...]

    def variables(self) -> set[str]:
        return {a for a in self.args if isinstance(a, str)}

    def __str__(self) -> str:
        return f"{self.predicate}({', '.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class Literal:
    atom: Atom
    negated: bool = False

    def __str__(self) -> str:
        return f"not {self.atom}" if self.negated else str(self.atom)


@dataclass(frozen=True)
class Disjunction:
    atoms: tuple[Atom, ...]

    def __str__(self) -> str:
        return "(" + " ∨ ".join(str(a) for a in self.atoms) + ")"


@dataclass(frozen=True)
class Rule:
    id: str
    head: Atom
    body: tuple[Literal | Disjunction, ...]
    line: int = field(default=0, compare=False)

    def expand(self) -> list[tuple[Literal, ...]]:
        """Disjunction-free bodies equivalent to this rule's body."""
        options = []
        for c in self.body:
            if isinstance(c, Disjunction):
                options.append([Literal(a) for a in c.atoms])
            else:
                options.append([c])
        return [tuple(choice) for choice in product(*options)]

    def atoms(self):
        for c in self.body:
            if isinstance(c, Disjunction):
                yield from ((a, False) for a in c.atoms)
            else:
                yield c.atom, c.negated

    def __str__(self) -> str:
        return f"{self.head} :- {', '.join(str(c) for c in self.body)}."


@dataclass(frozen=True)
class Component:
    stratum: int
    predicates: tuple[str, ...]
    recursive: bool


@dataclass(frozen=True)
class RulePack:
    rules: tuple[Rule, ...]
    strata: tuple[frozenset[str], ...]
    edb_predicates: frozenset[str]
    arities: dict = field(compare=False, hash=False)
    components: tuple[Component, ...] = field(compare=False, hash=False, default=())

    @property
    def idb_predicates(self) -> frozenset[str]:
        return frozenset(r.head.predicate for r in self.rules)

    def rules_for(self, predicate: str) -> list[Rule]:
        return [r for r in self.rules if r.head.predicate == predicate]

    def rule_ids_for(self, predicate: str) -> list[str]:
        seen = []
        for r in self.rules_for(predicate):
            if r.id not in seen:
                seen.append(r.id)
        return seen

    def stratum_of(self, predicate: str) -> int:
        for i, s in enumerate(self.strata):
            if predicate in s:
                return i
        raise KeyError(predicate)


# ---------------------------------------------------------------------------
# tokenizer / parser

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>%[^\n]*)
  | (?P<annot>@id[ \t]+(?P<annot_name>[A-Za-z_][\w\-]*))
  | (?P<implies>:-)
  | (?P<or>∨|\|)
  | (?P<int>-?\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[(),.])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    value: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Tok]:
    toks = []
    line, line_start, pos = 1, 0, 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if not m:
            raise RuleSyntaxError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "annot_name":
            kind = "annot"
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "annot":
            toks.append(_Tok("annot", m.group("annot_name"), line, col))
        elif kind == "name" and m.group() in ("or", "not"):
            toks.append(_Tok(m.group(), m.group(), line, col))
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, col))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, source: str):
        self.toks = _tokenize(source)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind: str, value: str | None = None) -> _Tok:
        t = self.next()
        if t.kind != kind or (value is not None and t.value != value):
            want = value or kind
            got = t.value or t.kind
            raise RuleSyntaxError(f"expected {want!r}, found {got!r}", t.line, t.col)
        return t

    def parse(self) -> list[Rule]:
        rules = []
        pending_id = None
        while self.peek().kind != "eof":
            if self.peek().kind == "annot":
                t = self.next()
                if pending_id is not None:
                    raise RuleSyntaxError("annotation not followed by a rule", t.line, t.col)
                pending_id = t.value
                continue
            line = self.peek().line
            head, body = self.rule()
            rid = pending_id or f"r{len(rules) + 1}"
            pending_id = None
            rules.append(Rule(rid, head, body, line))
        if pending_id is not None:
            t = self.peek()
            raise RuleSyntaxError("annotation not followed by a rule", t.line, t.col)
        return rules

    def rule(self):
        head = self.atom()
        self.expect("implies")
        body = [self.conjunct()]
        while self.peek().kind == "punct" and self.peek().value == ",":
            self.next()
            body.append(self.conjunct())
        self.expect("punct", ".")
        return head, tuple(body)

    def conjunct(self):
        t = self.peek()
        if t.kind == "not":
            self.next()
            return Literal(self.atom(), negated=True)
        if t.kind == "punct" and t.value == "(":
            self.next()
            atoms = [self.atom()]
            while self.peek().kind in ("or",):
                self.next()
                atoms.append(self.atom())
            self.expect("punct", ")")
            if len(atoms) == 1:
                return Literal(atoms[0])
            return Disjunction(tuple(atoms))
        return Literal(self.atom())

    def atom(self) -> Atom:
        t = self.next()
        if t.kind != "name":
            raise RuleSyntaxError(f"expected predicate name, found {t.value or t.kind!r}", t.line, t.col)
        self.expect("punct", "(")
        args = [self.term()]
        while self.peek().kind == "punct" and self.peek().value == ",":
            self.next()
            args.append(self.term())
        self.expect("punct", ")")
        return Atom(t.value, tuple(args))

    def term(self) -> Term:
        t = self.next()
        if t.kind == "int":
            return int(t.value)
        if t.kind == "name":
            return t.value
        raise RuleSyntaxError(f"expected variable or integer, found {t.value or t.kind!r}", t.line, t.col)


# ---------------------------------------------------------------------------
# validation


def _arities(rules: list[Rule]) -> dict[str, int]:
    arities: dict[str, int] = {}
    for r in rules:
        for atom in [r.head] + [a for a, _ in r.atoms()]:
            n = arities.setdefault(atom.predicate, len(atom.args))
            if n != len(atom.args):
                raise RuleError(
                    f"rule {r.id} (line {r.line}): predicate {atom.predicate} used with arity "
                    f"{len(atom.args)}, elsewhere {n}"
                )
    return arities


def _check_safety(r: Rule) -> None:
    bound: set[str] = set()
    for c in r.body:
        if isinstance(c, Disjunction):
            bound |= set.intersection(*(a.variables() for a in c.atoms))
        elif not c.negated:
            bound |= c.atom.variables()
    for v in sorted(r.head.variables()):
        if v not in bound:
            raise RuleError(f"rule {r.id} (line {r.line}): head variable {v} unbound")
    for c in r.body:
        if isinstance(c, Literal) and c.negated:
            for v in sorted(c.atom.variables() - bound):
                raise RuleError(f"rule {r.id} (line {r.line}): variable {v} in negated literal unbound")


def _stratify(rules: list[Rule], idb: set[str]):
    g = nx.DiGraph()
    g.add_nodes_from(sorted(idb))
    neg_edges = set()
    for r in rules:
        for atom, negated in r.atoms():
            if atom.predicate in idb:
                g.add_edge(atom.predicate, r.head.predicate)
                if negated:
                    neg_edges.add((atom.predicate, r.head.predicate))
    cond = nx.condensation(g)
    members = cond.graph["mapping"]
    for u, v in sorted(neg_edges):
        if members[u] == members[v]:
            raise RuleError(f"unstratifiable negation cycle through {u}")
    order = list(nx.lexicographical_topological_sort(
        cond, key=lambda n: min(cond.nodes[n]["members"])))
    level: dict[int, int] = {}
    for n in order:
        lv = 0
        for pred_node in cond.predecessors(n):
            step = 0
            for u in cond.nodes[pred_node]["members"]:
                for v in cond.nodes[n]["members"]:
                    if (u, v) in neg_edges:
                        step = 1
            lv = max(lv, level[pred_node] + step)
        level[n] = lv
    nstrata = max(level.values(), default=-1) + 1
    strata = [set() for _ in range(nstrata)]
    comps = []
    for n in order:
        preds = tuple(sorted(cond.nodes[n]["members"]))
        strata[level[n]].update(preds)
        recursive = len(preds) > 1 or g.has_edge(preds[0], preds[0])
        comps.append(Component(level[n], preds, recursive))
    comps.sort(key=lambda c: c.stratum)  # stable: keeps topological order within a stratum
    return tuple(frozenset(s) for s in strata), tuple(comps)


def parse_rules(source: str, catalog: dict[str, int] | None = None) -> RulePack:
    """Parse and validate a rule pack.

    Without a catalog, every body predicate that no rule defines is taken as
    extensional.  With one, such predicates must appear in it.
    """
    rules = _Parser(source).parse()
    if not rules:
        raise RuleError("rule pack is empty")
    seen_ids: dict[str, str] = {}
    for r in rules:
        head = r.head.predicate
        if r.id in seen_ids and seen_ids[r.id] != head:
            raise RuleError(f"rule id {r.id} reused for a different head predicate")
        seen_ids[r.id] = head
    arities = _arities(rules)
    idb = {r.head.predicate for r in rules}
    edb = set()
    for r in rules:
        for atom, negated in r.atoms():
            p = atom.predicate
            if p in idb:
                continue
            if catalog is not None and p not in catalog:
                raise RuleError(f"rule {r.id} (line {r.line}): unknown predicate {p}")
            if negated:
                raise RuleError(f"rule {r.id} (line {r.line}): negation of extensional predicate {p}")
            edb.add(p)
    strata, comps = _stratify(rules, idb)
    for r in rules:
        _check_safety(r)
    return RulePack(tuple(rules), strata, frozenset(edb), arities, comps)


def format_pack(pack: RulePack) -> str:
    """Canonical text form; ``parse_rules(format_pack(p)) == p``."""
    lines = []
    for r in pack.rules:
        lines.append(f"@id {r.id}")
        lines.append(str(r))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# signature check


def default_catalog() -> dict[str, int]:
    cat = {predicate_name(n): 1 for n in CLASS_NAMES}
    cat.update({a: 1 for a in ATTRIBUTES})
    cat.update({r: 2 for r in RELATIONS})
    cat.update({h: 1 for h in HELPERS})
    return cat


@dataclass(frozen=True)
class Finding:
    kind: str  # "arity-mismatch" | "ungroundable"
    rule_id: str
    predicate: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind} rule={self.rule_id} predicate={self.predicate}: {self.message}"


def predicate_signature_check(pack: RulePack, catalog: dict[str, int] | None = None) -> list[Finding]:
    catalog = default_catalog() if catalog is None else catalog
    idb = pack.idb_predicates
    findings = []
    seen = set()
    for r in pack.rules:
        for atom, _ in r.atoms():
            p = atom.predicate
            if p in idb:
                continue
            key = (r.id, p)
            if key in seen:
                continue
            seen.add(key)
            if p not in catalog:
                findings.append(Finding("ungroundable", r.id, p, f"{p}/{len(atom.args)} is not a groundable predicate"))
            elif catalog[p] != len(atom.args):
                findings.append(Finding(
                    "arity-mismatch", r.id, p,
                    f"{p} used with arity {len(atom.args)}, catalog arity is {catalog[p]}"))
    return findings

from __future__ import annotations

import random

import pytest

from slz.pipeline import builtin_pack_text
from slz.rules import (
    Disjunction,
    RuleError,
    RuleSyntaxError,
    default_catalog,
    format_pack,
    parse_rules,
    predicate_signature_check,
)


def test_table2_strata(table2):
    assert [set(s) for s in table2.strata] == [{"landable_area", "human_related", "hazard"}, {"safe"}]
    assert len(table2.rules) == 13
    assert table2.rule_ids_for("hazard")[0] == "r_hazard_near_water"
    assert predicate_signature_check(table2, default_catalog()) == []


def test_table2_r1_disjunction(table2):
    r1 = table2.rules[0]
    assert r1.id == "r_landable"
    assert isinstance(r1.body[0], Disjunction)
    assert [a.predicate for a in r1.body[0].atoms] == ["paved_area", "dirt", "grass"]


def test_self_negation_rejected():
    with pytest.raises(RuleError, match="unstratifiable negation cycle through a"):
        parse_rules("a(x) :- not a(x).")


def test_negation_cycle_through_two_predicates():
    with pytest.raises(RuleError, match="unstratifiable negation cycle"):
        parse_rules("a(x) :- grass(x), not b(x).\nb(x) :- grass(x), not a(x).")


def test_unbound_head_variable():
    with pytest.raises(RuleError, match="head variable x unbound"):
        parse_rules("h(x) :- p(y).")


def test_negated_edb_rejected():
    with pytest.raises(RuleError, match="negation of extensional"):
        parse_rules("h(x) :- grass(x), not pool(x).")


def test_arity_mismatch_is_an_error():
    with pytest.raises(RuleError, match="arity"):
        parse_rules("h(x) :- p(x).\ng(x) :- p(x, x).")


@pytest.mark.parametrize("src,line,col", [
    ("h(x) :- p(x)", 1, 13),
    ("h(x) :- p(x),.", 1, 14),
    ("h(x) p(x).", 1, 6),
    ("\n\nh(x) :- p(x) q.", 3, 14),
    ("h(x) :- (p(x) ∨ (q(x) ∨ r(x))).", 1, 17),
])
def test_syntax_errors_report_position(src, line, col):
    with pytest.raises(RuleSyntaxError) as exc:
        parse_rules(src)
    assert (exc.value.line, exc.value.col) == (line, col)


def test_disjunction_spellings_and_comments():
    a = parse_rules("h(x) :- (p(x) ∨ q(x)).  % trailing comment")
    b = parse_rules("% header\nh(x) :- (p(x) or q(x)).")
    c = parse_rules("h(x) :- (p(x) | q(x)).")
    assert a.rules == b.rules == c.rules


def test_auto_ids_and_annotations():
    pack = parse_rules("h(x) :- p(x).\n@id named\nh(x) :- q(x).\ng(x) :- h(x).")
    assert [r.id for r in pack.rules] == ["r1", "named", "r3"]


def test_constants_in_arguments():
    pack = parse_rules("h(x) :- near_to(x, 7).")
    assert pack.rules[0].body[0].atom.args == ("x", 7)


def test_signature_findings():
    pack = parse_rules("hazard(x) :- grass(x), near_to(x).")
    (f,) = predicate_signature_check(pack, default_catalog())
    assert f.kind == "arity-mismatch" and f.predicate == "near_to"
    pack = parse_rules("hazard(x) :- grass(x), helipad(x).")
    (f,) = predicate_signature_check(pack, default_catalog())
    assert f.kind == "ungroundable" and f.predicate == "helipad"


def test_catalog_contents():
    cat = default_catalog()
    assert len(cat) == 19 + 8 + 10 + 5
    assert cat["near_to"] == 2 and cat["grass"] == 1 and cat["vegetation"] == 1


def test_unknown_predicate_with_catalog():
    with pytest.raises(RuleError, match="unknown predicate helipad"):
        parse_rules("h(x) :- helipad(x).", default_catalog())


@pytest.mark.parametrize("name", ["table2", "table4"])
def test_printer_roundtrip(name):
    pack = parse_rules(builtin_pack_text(name))
    again = parse_rules(format_pack(pack))
    assert again == pack
    assert format_pack(again) == format_pack(pack)


def test_stratification_order_insensitive(table2):
    rng = random.Random(7)
    chunks = builtin_pack_text("table2").split("@id ")[1:]
    for _ in range(10):
        rng.shuffle(chunks)
        pack = parse_rules("".join("@id " + c for c in chunks))
        assert pack.strata == table2.strata


def test_recursive_component_marked():
    pack = parse_rules("reach(x, y) :- adjacent_to(x, y).\nreach(x, z) :- reach(x, y), adjacent_to(y, z).")
    (comp,) = pack.components
    assert comp.recursive and comp.predicates == ("reach",)


def test_expand_disjunction(table2):
    r12 = [r for r in table2.rules if r.id == "r_hazard_small_or_rough"][0]
    bodies = r12.expand()
    assert len(bodies) == 2
    assert [b[1].atom.predicate for b in bodies] == ["area_too_small", "rough_surface"]

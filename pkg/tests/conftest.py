from __future__ import annotations

import json
from importlib import resources

import pytest
from jsonschema import Draft202012Validator
from referencing import Registry, Resource

from slz.pipeline import builtin_pack_text
from slz.rules import parse_rules

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def _registry():
    reg = Registry()
    docs = {}
    for entry in resources.files("slz").joinpath("schemas").iterdir():
        if entry.name.endswith(".schema.json"):
            doc = json.loads(entry.read_text())
            docs[entry.name.removesuffix(".schema.json")] = doc
            reg = reg.with_resource(doc["$id"], Resource.from_contents(doc))
    return reg, docs


@pytest.fixture(scope="session")
def validate():
    reg, docs = _registry()

    def check(doc, name):
        Draft202012Validator(docs[name], registry=reg).validate(doc)

    return check


@pytest.fixture(scope="session")
def table2():
    return parse_rules(builtin_pack_text("table2"))


@pytest.fixture(scope="session")
def table4():
    return parse_rules(builtin_pack_text("table4"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")

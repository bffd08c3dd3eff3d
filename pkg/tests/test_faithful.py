import re

import pytest

from conftest import load
from michv import corpus_contracts, corpus_path
from michv.faithful import applied_opcodes, audit, theory_text, translate_faithful, why_name
from michv.sidecar import load_sidecar, parse_sidecar
from michv.syntax import parse_source
from michv.typecheck import typecheck

GOLDEN = corpus_path("add.why").read_text()


def test_golden_add_listing(add_contract):
    assert translate_faithful(typecheck(add_contract)) == GOLDEN


def test_golden_listing_key_lines():
    lines = [line.strip() for line in GOLDEN.splitlines()]
    assert "requires { (length __stack__) = 1 }" in lines
    assert "requires { __fuel__ > 0 }" in lines
    chain = [line for line in lines if line.startswith(("let __stack__ =", "(let __stack__ =", "(pair"))]
    assert [re.search(r"(unpair|add|nil_op|pair) __stack__", x).group(1) for x in chain if "__fuel__" in x] == \
        ["unpair", "add", "nil_op", "pair"]


def test_function_name_is_configurable(add_contract):
    assert "let add_contract (__stack__: stack_t)" in translate_faithful(typecheck(add_contract), name="add_contract")


def test_annotations_add_stack_assertions(add_contract):
    text = translate_faithful(typecheck(add_contract), annotate_types=True)
    assert text.count("assert {") == 3
    assert "(length __stack__) = 2" in text


def test_loop_invariant_rendering(factorial_contract):
    tp = typecheck(factorial_contract)
    text = translate_faithful(tp, load_sidecar(corpus_path("factorial.spec")), "fact")
    assert "let rec function fact (n: int) : int" in text
    assert "while is_true" in text and "invariant {" in text
    assert "let __param__ = car (__stack__[0]) in" in text
    hole = translate_faithful(tp, parse_sidecar(""))
    assert "invariant" not in hole.replace("(* no invariant", "")
    assert "(* no invariant" in hole


@pytest.mark.parametrize("path", corpus_contracts(), ids=lambda p: p.name)
def test_every_application_has_its_contract(path):
    tp = typecheck(parse_source(path.read_text()))
    assert audit(tp) == []


def test_theory_declares_each_applied_opcode(factorial_contract):
    keys = applied_opcodes(typecheck(factorial_contract))
    text = theory_text(keys)
    for key in keys:
        assert f"val {why_name(key)} (s: stack_t) (fuel: int)" in text


def test_reserved_names_get_suffix():
    assert why_name("COMPARE") == "compare_op"
    assert why_name("NIL") == "nil_op"
    assert why_name("ADD") == "add"

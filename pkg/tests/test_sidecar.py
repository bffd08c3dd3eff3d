import math

import pytest
from hypothesis import given, strategies as st

from conftest import load
from michv import corpus_path
from michv import formula as f
from michv import model as m
from michv.errors import FormulaError, SpecError
from michv.interpreter import ExecConfig, run_contract
from michv.sidecar import entry_holds, exit_holds, load_sidecar, parse_formula, parse_sidecar, parse_term
from michv.typecheck import typecheck

FACT_SPEC = corpus_path("factorial.spec")


def test_factorial_sidecar_contents():
    spec = load_sidecar(FACT_SPEC)
    assert [spec.logic["fact"](n) for n in range(7)] == [math.factorial(n) for n in range(7)]
    assert list(spec.invariants) == [(1, 1, 1, 1, 1, 0)]
    assert f.render(spec.ensures[0]) == "num(storage_out) = fact(num(param))"


def test_equation_form_matches_if_form():
    eqs = parse_sidecar("logic fact(0) = 1\nlogic fact(n) = n * fact(n - 1)")
    ite = parse_sidecar("logic fact(n) = if n <= 0 then 1 else n * fact(n - 1)")
    assert eqs.logic["fact"].body == ite.logic["fact"].body
    for n in range(-2, 8):
        assert eqs.logic["fact"](n) == ite.logic["fact"](n)


def test_two_parameter_equations():
    spec = parse_sidecar("logic pow(b, 0) = 1\nlogic pow(b, e) = b * pow(b, e - 1)")
    assert [spec.logic["pow"](3, e) for e in range(5)] == [1, 3, 9, 27, 81]


@pytest.mark.parametrize("text", [
    "logic g(n) = g(n)",
    "logic g(n) = if n <= 0 then 0 else g(n + 1)",
    "logic g(n) = n + k",
    "logic g(0) = 1",
    "logic g(n) = 1\nlogic g(0) = 2",
    "requires: param >",
    "frobnicate: x",
    "invariant@1: true\ninvariant@1: false",
])
def test_rejected_sidecars(text):
    with pytest.raises(SpecError) as info:
        parse_sidecar(text)
    assert info.value.exit_code == 2


def test_invariant_must_name_a_loop(add_contract):
    spec = parse_sidecar("invariant@0: true")
    with pytest.raises(SpecError, match="does not name a loop"):
        spec.validate(typecheck(add_contract))


def test_loops_need_invariants_when_proving(factorial_contract):
    with pytest.raises(SpecError, match="no invariant"):
        parse_sidecar("").validate(typecheck(factorial_contract))
    parse_sidecar("").validate(typecheck(factorial_contract), require_invariants=False)


def test_formula_evaluation():
    g = parse_formula("forall i. 0 <= i < 4 -> i * i >= i")
    assert f.eval_formula(g, {})
    assert f.eval_formula(parse_formula("param + 1 = 3 and not (param < 0)"), {"param": m.NatV(2)})
    assert f.eval_formula(parse_term("7 / 2 + 7 % 2"), {}) == 4


@given(st.integers(-50, 50), st.integers(-50, 50))
def test_infix_arithmetic_matches_python(a, b):
    env = {"param": m.IntV(a), "storage_in": m.IntV(b)}
    assert f.eval_formula(parse_term("param * 2 - storage_in"), env) == 2 * a - b
    assert f.eval_formula(parse_formula("param <= storage_in <-> not (param > storage_in)"), env)


def test_render_parse_round_trip():
    text = "num(stack[2]) >= 1 and fact(num(stack[2]) - 1) = num(stack[1])"
    spec = parse_sidecar("logic fact(n) = if n <= 0 then 1 else n * fact(n - 1)")
    g = parse_formula(text, spec.logic)
    assert f.render(g) == text
    assert parse_formula(f.render(g), spec.logic) == g


def test_entry_and_exit_relations_on_real_runs():
    c = load("factorial.tz")
    spec = load_sidecar(FACT_SPEC)
    for n in range(8):
        out = run_contract(c, m.NatV(n), m.NatV(3))
        assert entry_holds(spec, m.NatV(n), m.NatV(3))
        assert exit_holds(spec, m.NatV(n), m.NatV(3), out.stack)
    wrong = (m.PairV(m.ListV((), m.OPERATION), m.NatV(7)),)
    assert not exit_holds(spec, m.NatV(3), m.NatV(0), wrong)


def test_unknown_name_is_reported():
    with pytest.raises(FormulaError):
        parse_formula("bogus + 1 = 2")

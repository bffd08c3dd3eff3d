import pytest
from hypothesis import given, settings, strategies as st

from conftest import load, needs_z3
from michv import corpus_contracts, corpus_path, gen
from michv import formula as f
from michv import model as m
from michv.errors import VCGenError
from michv.interpreter import ExecConfig, Success, run_contract
from michv.mono import generate_vcs_mono, make_vc, mono_coverage
from michv.sidecar import SpecSidecar, exit_holds, loop_paths, parse_sidecar
from michv.smt import emit_smt
from michv.solver import INVALID, VALID, check, default_config, run_all
from michv.syntax import flatten
from michv.typecheck import typecheck

Z3 = [default_config("z3", timeout=30)]


def prove(name, spec_text=""):
    return run_all(generate_vcs_mono(typecheck(load(name)), parse_sidecar(spec_text)), Z3)


def statuses(verdicts):
    return {v.name: v.status for v in verdicts}


def test_add_vc_names(add_contract):
    names = [vc.name for vc in generate_vcs_mono(typecheck(add_contract))]
    assert names == [
        "unpair@0:precondition.0", "unpair@0:precondition.1", "unpair@0:precondition.2",
        "add@1.0:precondition.0", "add@1.0:precondition.1", "add@1.0:precondition.2",
        "nil@1.1.0:precondition.0", "nil@1.1.0:precondition.1",
        "pair@1.1.1:precondition.0", "pair@1.1.1:precondition.1",
        "contract:postcondition.0", "contract:postcondition.1",
    ]


def test_trivial_vcs_can_be_dropped(add_contract):
    tp = typecheck(add_contract)
    assert len(generate_vcs_mono(tp, keep_trivial=False)) < len(generate_vcs_mono(tp))


def test_script_layout(add_contract):
    vc = generate_vcs_mono(typecheck(add_contract))[3]
    text = emit_smt(vc)
    assert text.startswith("; add@1.0:precondition.0\n(set-logic ALL)\n")
    assert text.rstrip().endswith("(check-sat)")
    assert text.count("(assert (not ") == 1
    assert text.count("(") == text.count(")")


def test_missing_invariant_is_an_error(factorial_contract):
    with pytest.raises(VCGenError) as info:
        generate_vcs_mono(typecheck(factorial_contract), SpecSidecar())
    assert info.value.exit_code == 8


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_every_applied_clause_is_encoded(seed):
    tp = typecheck(gen.random_program(gen.rng_for(seed)))
    used = mono_coverage(tp, None)
    from michv.faithful import applied_opcodes
    from michv.contracts import CONTRACTS
    for key in applied_opcodes(tp):
        for role, _ in CONTRACTS[key].clauses():
            assert (key, role) in used


@needs_z3
def test_closed_goals():
    assert check(make_vc(f.eq(f.add(1, 1), 2)), Z3).status == VALID
    assert check(make_vc(f.eq(f.lit(0), f.lit(1))), Z3).status == INVALID
    x = f.Var("x", f.INT)
    assert check(make_vc(f.gt(x, 0), hypotheses=[f.gt(x, 5)]), Z3).status == VALID
    assert check(make_vc(f.gt(x, 0), hypotheses=[f.gt(x, -5)]), Z3).status == INVALID


def test_value_equality_is_typed():
    """A nat never equals an int value, in the evaluator and the encoding alike."""
    g = f.eq(f.lit(m.NatV(1)), f.lit(m.IntV(1)))
    assert f.eval_formula(g, {}) is False
    assert make_vc(g).goal == "false"


SPECS = {
    "factorial.tz": corpus_path("factorial.spec").read_text(),
    "sum.tz": corpus_path("sum.spec").read_text(),
    "multisig.tz": corpus_path("multisig.spec").read_text(),
}


@needs_z3
@pytest.mark.parametrize("path", corpus_contracts(), ids=lambda p: p.name)
def test_corpus_proves(path):
    verdicts = prove(path.name, SPECS.get(path.name, ""))
    assert verdicts and all(v.status == VALID for v in verdicts)


@needs_z3
def test_functional_specs():
    assert all(v.status == VALID for v in prove("deposit.tz", "ensures: storage_out = storage_in + amount"))
    assert all(v.status == VALID for v in prove("abs.tz", "ensures: storage_out >= 0 and (num(storage_out) = param or storage_out = 0 - param)"))
    assert all(v.status == VALID for v in prove("max.tz", "ensures: storage_out >= car(param) and storage_out >= cdr(param)"))
    bad = statuses(prove("add.tz", "ensures: storage_out = storage_in"))
    assert bad["contract:postcondition.2"] == INVALID


@needs_z3
def test_variants_and_assertions():
    base = SPECS["factorial.tz"]
    good = base + "\nvariant@1.1.1.1.1.0: stack[3] + 1 - stack[2]\nassert@1.1.1.1.0: stack[0] = (param > 0)"
    assert all(v.status == VALID for v in prove("factorial.tz", good))
    bad = statuses(prove("factorial.tz", base + "\nvariant@1.1.1.1.1.0: stack[2]"))
    assert bad["loop@1.1.1.1.1.0:variant-decreases"] == INVALID
    wrong = statuses(prove("factorial.tz", base + "\nassert@1.1.1.1.0: stack[0] = (param > 1)"))
    assert wrong["assert@1.1.1.1.0:assert.0"] == INVALID


CANDIDATES = {
    "add.tz": ["storage_out = param + storage_in", "storage_out > storage_in", "storage_out >= storage_in",
               "storage_out = storage_in"],
    "max.tz": ["storage_out = car(param)", "storage_out >= car(param)", "storage_out > cdr(param)"],
    "counter.tz": ["storage_out <> storage_in", "is_left(param) -> storage_out >= storage_in"],
    "divide.tz": ["storage_out <= storage_in", "storage_out < storage_in", "param = 0 -> storage_out = 0"],
    "abs.tz": ["storage_out = param", "storage_out >= param"],
}


@needs_z3
@pytest.mark.parametrize("name", sorted(CANDIDATES))
def test_proved_specs_hold_on_runs(name):
    """A proved ensures must hold on every concrete run; a violated one must not be proved."""
    c = load(name)
    rng = gen.rng_for(name)
    inputs = [(gen.random_value(rng, c.parameter), gen.random_value(rng, c.storage)) for _ in range(200)]
    for text in CANDIDATES[name]:
        spec = parse_sidecar("ensures: " + text)
        proved = all(v.status == VALID for v in prove(name, "ensures: " + text))
        held = True
        for p, s in inputs:
            out = run_contract(c, p, s, ExecConfig())
            if isinstance(out, Success) and not exit_holds(spec, p, s, out.stack):
                held = False
        if proved:
            assert held, text
        if not held:
            assert not proved, text


def _loop_free(rng):
    while True:
        c = gen.random_program(rng)
        tp = typecheck(c)
        if not loop_paths(tp.code):
            return c, tp


@needs_z3
@settings(max_examples=12, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_random_programs_prove_their_storage(seed):
    """Every random program stores a pushed literal: that literal is proved, another is refuted."""
    rng = gen.rng_for(seed)
    c, tp = _loop_free(rng)
    stored = flatten(c.code)[-3].args[1]
    out = f.Var("storage_out", f.VALUE)
    quick = [default_config("z3", timeout=8)]
    good = run_all(generate_vcs_mono(tp, SpecSidecar(ensures=[f.eq(out, f.lit(stored))])), quick)
    assert all(v.status == VALID for v in good), [v for v in good if v.status != VALID]
    other = gen.random_value(rng, c.storage)
    if other != stored:
        bad = statuses(run_all(generate_vcs_mono(tp, SpecSidecar(ensures=[f.eq(out, f.lit(other))])), quick))
        assert bad["contract:postcondition.2"] == INVALID

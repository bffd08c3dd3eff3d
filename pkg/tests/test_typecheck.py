import pytest
from hypothesis import given, settings, strategies as st

from michv import corpus_contracts, gen
from michv import model as m
from michv.errors import MichelsonTypeError
from michv.interpreter import ExecConfig, run_contract
from michv.syntax import Instr, parse_source, parse_type
from michv.typecheck import BOTTOM, annotate_types, format_path, parse_path, step_type, typecheck, typecheck_code


def contract(code, p="nat", s="nat"):
    return parse_source(f"parameter {p}; storage {s}; code {code}")


def test_add_boundaries(add_contract):
    tp = typecheck(add_contract)
    got = [(format_path(p), [str(t) for t in st]) for p, st in annotate_types(tp)]
    assert got == [
        ("root", ["pair nat nat"]),
        ("0", ["nat", "nat"]),
        ("1.0", ["nat"]),
        ("1.1.0", ["list operation", "nat"]),
    ]


def test_path_text_round_trip():
    for p in [(), (0,), (1, 1, 0)]:
        assert parse_path(format_path(p)) == p


def test_wrong_final_type():
    with pytest.raises(MichelsonTypeError) as info:
        typecheck(contract("{ CAR; PUSH int 1; ADD; NIL operation; PAIR }"))
    assert info.value.exit_code == 3


def test_if_needs_bool():
    with pytest.raises(MichelsonTypeError, match="expected bool"):
        typecheck(contract("{ CAR; IF {} {}; NIL operation; PAIR }"))


def test_branch_mismatch():
    with pytest.raises(MichelsonTypeError, match="different stacks"):
        typecheck(contract("{ DROP; PUSH nat 1; PUSH bool True; IF {} { PUSH int 1 }; NIL operation; PAIR }"))


def test_failing_branch_joins():
    tp = typecheck(contract("{ CDR; PUSH bool True; IF { PUSH nat 1; ADD } { UNIT; FAILWITH }; NIL operation; PAIR }"))
    assert tp.final == (parse_type("pair (list operation) nat"),)
    assert tp.failing


def test_whole_contract_may_fail():
    tp = typecheck(contract("{ CDR; NIL operation; PAIR; UNIT; FAILWITH }"))
    assert tp.final is BOTTOM


def test_arith_table_rejects_mixed_mutez():
    with pytest.raises(MichelsonTypeError):
        typecheck_code(Instr("ADD"), (m.MUTEZ, m.NAT))


def test_loop_body_must_preserve_shape():
    with pytest.raises(MichelsonTypeError):
        typecheck(contract("{ CAR; PUSH bool True; LOOP { PUSH nat 1; PUSH bool False } ; NIL operation; PAIR }"))


def test_step_type_of_primitives():
    assert step_type(Instr("EDIV"), (m.MUTEZ, m.NAT), m.UNIT) == (parse_type("option (pair mutez mutez)"),)
    assert step_type(Instr("DIG", (2,)), (m.INT, m.NAT, m.BOOL), m.UNIT) == (m.BOOL, m.INT, m.NAT)
    assert step_type(Instr("SELF"), (), m.NAT) == (m.contract(m.NAT),)


@pytest.mark.parametrize("path", corpus_contracts(), ids=lambda p: p.name)
def test_corpus_typechecks(path):
    tp = typecheck(parse_source(path.read_text()))
    assert tp.final in (BOTTOM, (m.pair(m.list_(m.OPERATION), tp.storage),))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_static_types_predict_runtime_types(seed):
    rng = gen.rng_for(seed)
    c = gen.random_program(rng)
    tp = typecheck(c)
    seen = []
    trace = lambda event, p, i, stack: seen.append((p, stack)) if event == "exit" else None
    run_contract(c, gen.random_value(rng, c.parameter), gen.random_value(rng, c.storage),
                 ExecConfig(fuel=2000, trace=trace))
    for p, stack in seen:
        assert tuple(m.typ_infer(v) for v in stack) == tp.after(p)

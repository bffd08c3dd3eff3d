import dataclasses

import pytest
from hypothesis import given, settings, strategies as st

from michv import formula as f
from michv import gen
from michv import model as m
from michv.contracts import CONTRACTS, contract_key, contract_of, dump, frame_coverage, operand_env
from michv.errors import FormulaError
from michv.interpreter import ExecConfig, Failed, Success, exec_instr
from michv.syntax import CONTROL, SUPPORTED, Instr, parse_code

CFG = ExecConfig(fuel=10)


def env_for(instr, st):
    env = dict(CFG.context())
    env.update(operand_env(instr))
    env.update(s=st, fuel=CFG.fuel)
    return env


def sample(opcode, rng, tries=200):
    """A generated (instr, stack, env) whose requires hold and that runs normally."""
    contract = CONTRACTS[opcode]
    for _ in range(tries):
        instr, st = gen.opcode_input(opcode, rng)
        env = env_for(instr, st)
        if all(fn(env) for fn in contract.compiled("requires")):
            out = exec_instr(instr, st, CFG)
            if isinstance(out, Success):
                env["result"] = out.stack.slots
                return instr, st, env
    return None


def test_every_primitive_has_a_contract():
    assert set(CONTRACTS) == SUPPORTED - CONTROL
    with pytest.raises(FormulaError):
        contract_of("DIP")


def test_macros_are_looked_up_by_name():
    cmp_node = parse_code("{ CMPLT }")
    from michv.syntax import expand_macros
    assert contract_key(expand_macros(cmp_node)) == "CMPLT"
    assert contract_key(Instr("ADD")) == "ADD"
    assert contract_key(Instr("SEQ")) is None


def test_dump_lists_clauses():
    text = dump(CONTRACTS["ADD"])
    assert text.startswith("opcode ADD\n")
    assert "requires fuel > 0" in text
    assert "fails when" in text


def test_only_failing_opcodes_declare_failure():
    may_fail = sorted(op for op, c in CONTRACTS.items() if c.may_fail)
    assert may_fail == ["ADD", "FAILWITH", "MUL", "SUB"]


@pytest.mark.parametrize("opcode", sorted(set(CONTRACTS) - {"FAILWITH"}))
def test_result_frame_is_pinned(opcode):
    rng = gen.rng_for(opcode)
    for _ in range(20):
        got = sample(opcode, rng)
        assert got is not None
        assert frame_coverage(CONTRACTS[opcode], got[2]) == []


def perturb(rng, v):
    """A different value of the same type, or None when the type has one inhabitant."""
    ty = m.typ_infer(v)
    for _ in range(50):
        w = gen.random_value(rng, ty)
        if w != v:
            return w
    return None


# Crypto and serialisation results are opaque: their contracts fix only the result type.
ABSTRACT = {"SHA256", "SHA512", "BLAKE2B", "HASH_KEY", "CHECK_SIGNATURE", "PACK", "UNPACK"}


@pytest.mark.parametrize("opcode", sorted(set(CONTRACTS) - {"FAILWITH"} - ABSTRACT))
def test_perturbed_result_is_rejected(opcode):
    """Changing any one result slot must break some postcondition."""
    ensures = CONTRACTS[opcode].compiled("ensures")
    rng = gen.rng_for("perturb" + opcode)
    checked = 0
    for _ in range(30):
        _, _, env = sample(opcode, rng)
        for j, v in enumerate(env["result"]):
            w = perturb(rng, v)
            if w is None:
                continue
            bad = dict(env, result=env["result"][:j] + (w,) + env["result"][j + 1:])
            assert not all(fn(bad) for fn in ensures), (opcode, j)
            checked += 1
    assert checked


@pytest.mark.parametrize("opcode", sorted(ABSTRACT))
def test_abstract_contracts_constrain_only_the_type(opcode):
    rng = gen.rng_for("abstract" + opcode)
    _, _, env = sample(opcode, rng)
    ensures = CONTRACTS[opcode].compiled("ensures")
    rest = env["result"][1:]
    wrong_type = dict(env, result=(m.UNIT_V,) + rest)
    assert not all(fn(wrong_type) for fn in ensures)
    other = perturb(rng, env["result"][0]) if opcode != "UNPACK" else None
    if other is not None:
        assert all(fn(dict(env, result=(other,) + rest)) for fn in ensures)
    if rest:
        shuffled = dict(env, result=env["result"][:1] + (m.UNIT_V,) + rest[1:])
        if rest[0] != m.UNIT_V:
            assert not all(fn(shuffled) for fn in ensures)


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(sorted(CONTRACTS)), st.integers(0, 2 ** 32))
def test_step_satisfies_contract(opcode, seed):
    contract = CONTRACTS[opcode]
    instr, st = gen.opcode_input(opcode, gen.rng_for(seed))
    env = env_for(instr, st)
    if not all(fn(env) for fn in contract.compiled("requires")):
        return
    out = exec_instr(instr, st, CFG)
    fails = contract.compiled("fails_if")
    assert isinstance(out, Failed) == bool(fails is not None and fails(env))
    if isinstance(out, Success):
        env["result"] = out.stack.slots
        assert all(fn(env) for fn in contract.compiled("ensures"))

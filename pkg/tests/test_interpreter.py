import dataclasses

import pytest
from hypothesis import assume, given, settings, strategies as st

from conftest import load
from michv import formula as f
from michv import gen
from michv import model as m
from michv.contracts import CONTRACTS
from michv.interpreter import (ContractViolation, ExecConfig, Failed, FuelExhausted, InterpreterError, Success,
                               exec_instr, run_contract, result_operations, result_storage, sign)
from michv.syntax import Instr, parse_code, parse_source

ints = st.integers(-(2 ** 70), 2 ** 70)
nats = st.integers(0, 2 ** 70)


def top(instr, *stack, **cfg):
    out = exec_instr(instr, stack, ExecConfig(**cfg))
    assert isinstance(out, Success), out
    return out.stack.slots


def run_code(text, *stack, **cfg):
    return exec_instr(parse_code(text), stack, ExecConfig(**cfg))


def euclid_oracle(a, b):
    # remainder in [0, |b|), quotient chosen so that a = q * b + r
    r = a - abs(b) * (a // abs(b))
    return (a - r) // b, r


@given(ints, ints)
def test_ediv_int(a, b):
    out = top(Instr("EDIV"), m.IntV(a), m.IntV(b))[0]
    if b == 0:
        assert out == m.NoneV(m.pair(m.INT, m.NAT))
        return
    q, r = euclid_oracle(a, b)
    assert out == m.SomeV(m.PairV(m.IntV(q), m.NatV(r)))
    assert 0 <= r < abs(b) and q * b + r == a


@given(st.integers(0, m.MUTEZ_MAX), st.integers(0, 2 ** 64))
def test_ediv_mutez_by_nat(a, b):
    out = top(Instr("EDIV"), m.MutezV(a), m.NatV(b))[0]
    if b == 0:
        assert isinstance(out, m.NoneV)
    else:
        assert out == m.SomeV(m.PairV(m.MutezV(a // b), m.MutezV(a % b)))


@given(nats, nats)
def test_nat_sub_gives_int(a, b):
    assert top(Instr("SUB"), m.NatV(a), m.NatV(b)) == (m.IntV(a - b),)


@given(st.integers(0, m.MUTEZ_MAX), st.integers(0, m.MUTEZ_MAX))
def test_mutez_add_checked(a, b):
    out = exec_instr(Instr("ADD"), (m.MutezV(a), m.MutezV(b)))
    if a + b > m.MUTEZ_MAX:
        assert isinstance(out, Failed)
    else:
        assert out.stack.slots == (m.MutezV(a + b),)


@given(st.integers(0, m.MUTEZ_MAX), st.integers(0, 2 ** 64))
def test_mutez_mul_checked(a, b):
    out = exec_instr(Instr("MUL"), (m.MutezV(a), m.NatV(b)))
    assert isinstance(out, Failed) == (a * b > m.MUTEZ_MAX)


def test_mutez_boundaries():
    assert isinstance(exec_instr(Instr("ADD"), (m.MutezV(m.MUTEZ_MAX), m.MutezV(1))), Failed)
    assert isinstance(exec_instr(Instr("SUB"), (m.MutezV(0), m.MutezV(1))), Failed)
    assert top(Instr("SUB"), m.MutezV(1), m.MutezV(1)) == (m.MutezV(0),)


@given(ints)
def test_unary_int(x):
    assert top(Instr("NEG"), m.IntV(x)) == (m.IntV(-x),)
    assert top(Instr("ABS"), m.IntV(x)) == (m.NatV(abs(x)),)
    assert top(Instr("NOT"), m.IntV(x)) == (m.IntV(-x - 1),)
    want = m.SomeV(m.NatV(x)) if x >= 0 else m.NoneV(m.NAT)
    assert top(Instr("ISNAT"), m.IntV(x)) == (want,)


@given(nats, nats)
def test_bitwise_nat(a, b):
    assert top(Instr("AND"), m.NatV(a), m.NatV(b)) == (m.NatV(a & b),)
    assert top(Instr("OR"), m.NatV(a), m.NatV(b)) == (m.NatV(a | b),)
    assert top(Instr("XOR"), m.NatV(a), m.NatV(b)) == (m.NatV(a ^ b),)


@given(ints, ints)
def test_comparison_macros(a, b):
    for name, fn in [("EQ", a == b), ("NEQ", a != b), ("LT", a < b), ("LE", a <= b), ("GT", a > b), ("GE", a >= b)]:
        assert top(parse_code("{ CMP" + name + " }"), m.IntV(a), m.IntV(b)) == (m.BoolV(fn),)


@given(st.lists(st.integers(-9, 9), min_size=4, max_size=6), st.integers(0, 3))
def test_stack_shuffles(xs, n):
    stack = tuple(m.IntV(x) for x in xs)
    vals = lambda out: [v.value for v in out]
    assert vals(top(Instr("DIG", (n,)), *stack)) == [xs[n]] + xs[:n] + xs[n + 1:]
    assert vals(top(Instr("DUG", (n,)), *stack)) == xs[1:n + 1] + [xs[0]] + xs[n + 1:]
    assert vals(top(Instr("DROP", (n,)), *stack)) == xs[n:]
    if n:
        assert vals(top(Instr("DUP", (n,)), *stack)) == [xs[n - 1]] + xs
    assert vals(top(parse_code(f"{{ DIP {n} {{ DROP }} }}"), *stack)) == xs[:n] + xs[n + 1:]


@settings(max_examples=60)
@given(st.dictionaries(st.integers(-5, 5), st.text(max_size=2), max_size=5), st.integers(-6, 6),
       st.one_of(st.none(), st.text(max_size=2)))
def test_map_ops_match_dict(d, k, v):
    mp = m.make_map([(m.IntV(a), m.StringV(b)) for a, b in d.items()], m.INT, m.STRING)
    key = m.IntV(k)
    assert top(Instr("MEM"), key, mp) == (m.BoolV(k in d),)
    got = top(Instr("GET"), key, mp)[0]
    assert got == (m.SomeV(m.StringV(d[k])) if k in d else m.NoneV(m.STRING))
    opt = m.NoneV(m.STRING) if v is None else m.SomeV(m.StringV(v))
    updated = top(Instr("UPDATE"), key, opt, mp)[0]
    want = dict(d)
    if v is None:
        want.pop(k, None)
    else:
        want[k] = v
    assert {a.value: b.value for a, b in updated.items} == want
    assert m.well_formed(updated)
    assert top(Instr("SIZE"), updated) == (m.NatV(len(want)),)


@given(st.frozensets(st.integers(-5, 5), max_size=5), st.integers(-6, 6), st.booleans())
def test_set_update_matches_python(s, k, flag):
    sv = m.make_set([m.IntV(x) for x in s], m.INT)
    out = top(Instr("UPDATE"), m.IntV(k), m.BoolV(flag), sv)[0]
    assert {x.value for x in out.items} == (s | {k} if flag else s - {k})


@given(st.lists(st.text(max_size=3), max_size=4), st.binary(max_size=3), st.binary(max_size=3))
def test_concat(parts, a, b):
    lst = m.ListV(tuple(m.StringV(p) for p in parts), m.STRING)
    assert top(Instr("CONCAT"), lst) == (m.StringV("".join(parts)),)
    assert top(Instr("CONCAT"), m.BytesV(a), m.BytesV(b)) == (m.BytesV(a + b),)
    assert top(Instr("SIZE"), m.BytesV(a)) == (m.NatV(len(a)),)


def test_pack_unpack_round_trip():
    v = m.PairV(m.IntV(3), m.SomeV(m.StringV("x")))
    packed = top(Instr("PACK"), v)[0]
    assert top(Instr("UNPACK", (m.typ_infer(v),)), packed) == (m.SomeV(v),)
    assert top(Instr("UNPACK", (m.INT,)), packed) == (m.NoneV(m.INT),)
    assert top(Instr("UNPACK", (m.INT,)), m.BytesV(b"\x05")) == (m.NoneV(m.INT),)


def test_hashes_are_deterministic_and_distinct():
    a, b = m.BytesV(b"a"), m.BytesV(b"b")
    assert top(Instr("SHA256"), a) == top(Instr("SHA256"), a)
    assert top(Instr("SHA256"), a) != top(Instr("SHA256"), b)
    assert top(Instr("SHA256"), a) != top(Instr("SHA512"), a)


def test_check_signature():
    key, payload = m.KeyV("edpkA"), m.BytesV(b"msg")
    assert top(Instr("CHECK_SIGNATURE"), key, sign(key, payload), payload) == (m.TRUE,)
    assert top(Instr("CHECK_SIGNATURE"), m.KeyV("edpkB"), sign(key, payload), payload) == (m.FALSE,)


def test_context_values():
    cfg = dict(amount=m.MutezV(5), now=m.TimestampV(77), parameter_ty=m.NAT)
    assert top(Instr("AMOUNT"), **cfg) == (m.MutezV(5),)
    assert top(Instr("NOW"), **cfg) == (m.TimestampV(77),)
    assert top(Instr("SELF"), **cfg)[0].param == m.NAT


def test_control_flow():
    code = "{ IF_CONS { DIP { DROP } } { PUSH int 0 } }"
    assert run_code(code, m.ListV((m.IntV(4), m.IntV(5)), m.INT)).stack.slots == (m.IntV(4),)
    assert run_code(code, m.ListV((), m.INT)).stack.slots == (m.IntV(0),)
    countdown = "{ LEFT unit; LOOP_LEFT { PUSH int 1; SWAP; SUB; DUP; GT; IF { LEFT unit } { DROP; UNIT; RIGHT int } } }"
    assert run_code(countdown, m.IntV(3)).stack.slots == (m.UNIT_V,)
    total = "{ PUSH int 0; SWAP; ITER { CDR; ADD } }"
    mp = m.make_map([(m.NatV(1), m.IntV(10)), (m.NatV(2), m.IntV(-3))], m.NAT, m.INT)
    assert run_code(total, mp).stack.slots == (m.IntV(7),)


def test_failwith_carries_value():
    assert run_code("{ PUSH string \"no\"; FAILWITH }") == Failed(m.StringV("no"))


def test_fuel_exhaustion_and_loop_charging():
    loop = "{ PUSH bool True; LOOP { PUSH bool True } }"
    assert isinstance(run_code(loop, fuel=50), FuelExhausted)
    assert isinstance(exec_instr(Instr("UNIT"), (), ExecConfig(fuel=0)), FuelExhausted)


def iterative_factorial(n):
    acc = 1
    for k in range(1, n + 1):
        acc *= k
    return acc


@pytest.mark.parametrize("n", range(0, 13))
def test_factorial_contract(n, factorial_contract):
    out = run_contract(factorial_contract, m.NatV(n), m.NatV(99), ExecConfig(check_contracts=True))
    assert result_storage(out) == m.NatV(iterative_factorial(n))
    assert result_operations(out) == m.ListV((), m.OPERATION)


def test_multisig_accepts_threshold_signatures():
    c = load("multisig.tz")
    cfg = ExecConfig(parameter_ty=c.parameter, check_contracts=True)
    keys = [m.KeyV("edpkA"), m.KeyV("edpkB"), m.KeyV("edpkC")]
    action_ty = c.parameter.args[1].args[0].args[1]
    action = m.LeftV(m.PairV(m.MutezV(10), m.ContractV("tz1dest", m.UNIT)), action_ty.args[1])
    payload = m.PairV(m.NatV(4), action)
    packed = top(Instr("PACK"), m.PairV(m.PairV(cfg.chain_id, cfg.context()["self"]), payload))[0]
    sigs = m.ListV((m.SomeV(sign(keys[0], packed)), m.SomeV(sign(keys[1], packed)), m.NoneV(m.SIGNATURE)),
                   m.option(m.SIGNATURE))
    param = m.RightV(m.PairV(payload, sigs), m.UNIT)
    storage = m.PairV(m.NatV(4), m.PairV(m.NatV(2), m.ListV(tuple(keys), m.KEY)))
    out = run_contract(c, param, storage, cfg)
    assert isinstance(out, Success), out
    assert result_storage(out).left == m.NatV(5)
    (op,) = result_operations(out).items
    assert op.kind == "transfer_tokens"
    stale = m.PairV(m.NatV(3), storage.right)
    assert isinstance(run_contract(c, param, stale, cfg), Failed)
    forged = m.ListV((m.SomeV(sign(keys[1], packed)),) * 3, m.option(m.SIGNATURE))
    assert isinstance(run_contract(c, m.RightV(m.PairV(payload, forged), m.UNIT), storage, cfg), Failed)


def test_run_contract_checks_input_types(add_contract):
    with pytest.raises(InterpreterError):
        run_contract(add_contract, m.IntV(1), m.NatV(1))


def test_seeded_contract_fault_is_reported():
    wrong = dataclasses.replace(CONTRACTS["ADD"], ensures=(f.eq(f.slot(f.RESULT, 0), f.slot(f.S, 0)),), _compiled={})
    table = dict(CONTRACTS, ADD=wrong)
    out = exec_instr(Instr("ADD"), (m.NatV(1), m.NatV(2)), ExecConfig(check_contracts=True, contracts=table))
    assert isinstance(out, ContractViolation)
    assert out.opcode == "ADD" and "postcondition.0" in out.clause


def test_violation_of_requires_is_reported():
    out = exec_instr(Instr("CAR"), (m.IntV(1),), ExecConfig(check_contracts=True))
    assert isinstance(out, ContractViolation) and "precondition" in out.clause


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(1, 500))
def test_fuel_monotonicity_on_random_programs(seed, extra):
    rng = gen.rng_for(seed)
    c = gen.random_program(rng)
    p, s = gen.random_value(rng, c.parameter), gen.random_value(rng, c.storage)
    probe = run_contract(c, p, s, ExecConfig(fuel=5000))
    assume(not isinstance(probe, FuelExhausted))
    used = 5000 - probe.fuel_left if isinstance(probe, Success) else None
    if used is not None:
        assert run_contract(c, p, s, ExecConfig(fuel=used)) == probe
        assert run_contract(c, p, s, ExecConfig(fuel=used + extra)) == probe
        if used:
            assert isinstance(run_contract(c, p, s, ExecConfig(fuel=used - 1)), FuelExhausted)

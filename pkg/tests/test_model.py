import itertools

import pytest
from hypothesis import given, settings, strategies as st

from michv import gen
from michv import model as m
from michv.errors import MichvError
from michv.syntax import parse_type

ints = st.integers(-(2 ** 80), 2 ** 80)


@pytest.mark.parametrize("a,b,want", [(False, False, 0), (False, True, -1), (True, False, 1), (True, True, 0)])
def test_bool_order(a, b, want):
    assert m.compare(m.BoolV(a), m.BoolV(b)) == want


@given(ints, ints)
def test_int_order_matches_python(a, b):
    assert m.compare(m.IntV(a), m.IntV(b)) == (a > b) - (a < b)


@given(st.text(max_size=6), st.text(max_size=6))
def test_string_order_is_bytewise(a, b):
    ea, eb = a.encode(), b.encode()
    assert m.compare(m.StringV(a), m.StringV(b)) == (ea > eb) - (ea < eb)


@given(st.binary(max_size=6), st.binary(max_size=6), st.binary(max_size=6))
def test_bytes_order_laws(a, b, c):
    x, y, z = m.BytesV(a), m.BytesV(b), m.BytesV(c)
    assert m.compare(x, y) == -m.compare(y, x)
    assert (m.compare(x, y) == 0) == (a == b)
    if m.compare(x, y) <= 0 and m.compare(y, z) <= 0:
        assert m.compare(x, z) <= 0


@settings(max_examples=100)
@given(st.sampled_from(sorted(m.COMPARABLE)), st.integers(0, 2 ** 32))
def test_order_laws_on_random_values(name, seed):
    rng = gen.rng_for(seed)
    t = m.Ty(name)
    xs = [gen.random_value(rng, t) for _ in range(4)]
    for a, b, c in itertools.product(xs, repeat=3):
        assert m.compare(a, b) == -m.compare(b, a)
        assert (m.compare(a, b) == 0) == (a == b)
        if m.compare(a, b) <= 0 and m.compare(b, c) <= 0:
            assert m.compare(a, c) <= 0


def test_compare_rejects_mixed_or_incomparable():
    with pytest.raises(TypeError):
        m.compare(m.IntV(1), m.NatV(1))
    with pytest.raises(TypeError):
        m.compare(m.UNIT_V, m.UNIT_V)


def test_mutez_range_enforced():
    m.MutezV(m.MUTEZ_MAX)
    with pytest.raises(ValueError):
        m.MutezV(m.MUTEZ_MAX + 1)
    with pytest.raises(ValueError):
        m.NatV(-1)


def test_typ_infer_nested():
    v = m.PairV(m.SomeV(m.IntV(1)), m.LeftV(m.NatV(0), m.STRING))
    assert m.typ_infer(v) == parse_type("pair (option int) (or nat string)")
    assert m.typ_infer(m.NoneV(m.BYTES)) == m.option(m.BYTES)


def test_sets_and_maps_are_sorted_and_unique():
    s = m.make_set([m.IntV(3), m.IntV(-1)], m.INT)
    assert [x.value for x in s.items] == [-1, 3]
    with pytest.raises(ValueError):
        m.make_set([m.IntV(1), m.IntV(1)], m.INT)
    with pytest.raises(MichvError):
        m.parse_literal('{ Elt 1 "a" ; Elt 1 "b" }', m.map_(m.NAT, m.STRING))


@settings(max_examples=200)
@given(st.integers(0, 2 ** 32))
def test_literal_round_trip(seed):
    rng = gen.rng_for(seed)
    t = gen.random_type(rng, 2, pushable=True)
    v = gen.random_value(rng, t)
    assert m.well_formed(v)
    assert m.typ_infer(v) == t
    assert m.parse_literal(m.format_value(v), t) == v


def test_set_literal_needs_comparable_elements():
    with pytest.raises(MichvError):
        parse_type("set (list int)")

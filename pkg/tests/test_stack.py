import pytest
from hypothesis import given, strategies as st

from michv import model as m
from michv.stack import Stack


def test_index_zero_is_top():
    s = Stack.of(m.IntV(1), m.NatV(2)).push(m.UNIT_V)
    assert s.top() == m.UNIT_V
    assert s.at(2) == m.NatV(2)
    assert s.ty_of() == (m.UNIT, m.INT, m.NAT)


def test_out_of_range():
    s = Stack.of(m.IntV(1))
    with pytest.raises(IndexError):
        s.at(1)
    with pytest.raises(IndexError):
        s.drop_n(2)


def test_of_rejects_ill_formed():
    bad = m.SetV((m.IntV(2), m.IntV(1)), m.INT)
    with pytest.raises(ValueError):
        Stack.of(bad)


@given(st.lists(st.integers(-5, 5), max_size=6), st.integers(0, 6))
def test_drop_then_index(xs, n):
    s = Stack.of(*(m.IntV(x) for x in xs))
    if n > len(xs):
        with pytest.raises(IndexError):
            s.drop_n(n)
        return
    rest = s.drop_n(n)
    assert len(rest) == len(xs) - n
    assert [v.value for v in rest] == xs[n:]
    assert s.tail_from(n) == rest

import pytest
from hypothesis import given, settings, strategies as st

from conftest import load
from michv import corpus_contracts, gen
from michv.errors import LexError, ParseError, MichvError
from michv.lexer import TokenKind, tokenize
from michv.syntax import Instr, expand_macros, flatten, parse_code, parse_source, pretty_print, seq


def test_tokens_skip_comments():
    toks = tokenize('PUSH string "a\\n" # trailing\n/* block */ 0xff')
    assert [t.kind for t in toks] == [TokenKind.INSTR, TokenKind.TYPE, TokenKind.STRING, TokenKind.BYTES]


def test_unterminated_string_is_located():
    with pytest.raises(MichvError) as info:
        parse_source('parameter nat; storage nat; code { "abc }')
    assert info.value.exit_code == 2
    assert info.value.diagnostic("x.tz").startswith("x.tz:1:36: error:")


def test_unsupported_opcode_is_named():
    with pytest.raises(ParseError) as info:
        parse_source("parameter nat; storage nat; code { LAMBDA }")
    assert "LAMBDA" in str(info.value)


def test_missing_semicolon():
    with pytest.raises(ParseError):
        parse_source("parameter nat; storage nat code {}")


def test_negative_nat_literal_rejected():
    with pytest.raises(MichvError):
        parse_source("parameter nat; storage nat; code { PUSH nat -1 }")


def test_add_contract_shape(add_contract):
    assert [i.op for i in flatten(add_contract.code)] == ["UNPAIR", "ADD", "NIL", "PAIR"]


def test_macros_expand_in_place():
    code = parse_code("{ CMPEQ; UNPAIR }")
    items = flatten(code)
    assert [i.op for i in items] == ["CMPEQ", "UNPAIR"]
    expanded = expand_macros(code)
    cmp_node, unpair_node = expanded.blocks
    assert [i.op for i in flatten(cmp_node)] == ["COMPARE", "EQ"]
    assert cmp_node.origin == "CMPEQ" and unpair_node.origin == "UNPAIR"


def test_seq_and_flatten_are_inverse():
    items = [Instr("DUP"), Instr("DROP"), Instr("SWAP")]
    assert flatten(seq(*items)) == items
    assert seq() == Instr("NOP")


@pytest.mark.parametrize("path", corpus_contracts(), ids=lambda p: p.name)
def test_corpus_round_trip(path):
    c = parse_source(path.read_text())
    text = pretty_print(c)
    assert parse_source(text) == c
    assert pretty_print(parse_source(text)) == text


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_random_program_round_trip(seed):
    c = gen.random_program(gen.rng_for(seed))
    assert parse_source(pretty_print(c)) == c


def test_annotations_do_not_affect_equality(factorial_contract):
    bare = parse_source(pretty_print(factorial_contract).replace("@index", "").replace("@acc", ""))
    assert bare == factorial_contract

"""Michelson types and values.

Values are immutable dataclasses, one class per data constructor. Every
value has an inferable type (``typ_infer``); composite values that could not
otherwise tell their type (empty lists, ``None``, ``Left``/``Right``) carry the
missing type explicitly.
"""

import datetime
import hashlib
import calendar
from dataclasses import dataclass

from michv.errors import LiteralError
from michv.lexer import TokenKind, tokenize, unescape

# --------------------------------------------------------------------------
# Types

COMPARABLE = frozenset({
    "int", "nat", "string", "bytes", "mutez", "bool", "key_hash", "timestamp", "address",
})
NULLARY = COMPARABLE | {"key", "signature", "chain_id", "unit", "operation"}
ARITY = {
    **{name: 0 for name in NULLARY},
    "option": 1, "list": 1, "set": 1, "contract": 1,
    "pair": 2, "or": 2, "map": 2, "big_map": 2,
}
MUTEZ_MAX = 2 ** 63 - 1


@dataclass(frozen=True)
class Ty:
    name: str
    args: tuple = ()

    def __post_init__(self):
        if self.name not in ARITY:
            raise ValueError(f"unknown type {self.name!r}")
        if len(self.args) != ARITY[self.name]:
            raise ValueError(f"type {self.name} expects {ARITY[self.name]} argument(s)")
        if self.name in ("set", "map", "big_map") and not self.args[0].comparable:
            raise ValueError(f"{self.name} key type must be comparable, got {self.args[0]}")

    @property
    def comparable(self):
        return self.name in COMPARABLE

    def __str__(self):
        if not self.args:
            return self.name
        parts = [self.name]
        for a in self.args:
            parts.append(f"({a})" if a.args else str(a))
        return " ".join(parts)

    def __repr__(self):
        return f"Ty<{self}>"


INT, NAT, STRING, BYTES, MUTEZ, BOOL = (Ty(n) for n in ("int", "nat", "string", "bytes", "mutez", "bool"))
KEY_HASH, TIMESTAMP, ADDRESS = Ty("key_hash"), Ty("timestamp"), Ty("address")
KEY, SIGNATURE, CHAIN_ID, UNIT, OPERATION = (
    Ty(n) for n in ("key", "signature", "chain_id", "unit", "operation"))


def pair(a, b):
    return Ty("pair", (a, b))


def or_(a, b):
    return Ty("or", (a, b))


def option(a):
    return Ty("option", (a,))


def list_(a):
    return Ty("list", (a,))


def set_(a):
    return Ty("set", (a,))


def map_(k, v):
    return Ty("map", (k, v))


def big_map(k, v):
    return Ty("big_map", (k, v))


def contract(a):
    return Ty("contract", (a,))


def is_comparable(ty):
    return ty.comparable


# --------------------------------------------------------------------------
# Values


class Value:
    """Marker base class for all Michelson data."""

    __slots__ = ()

    def __str__(self):
        return format_value(self)


def _check_int(v):
    if not isinstance(v, int) or isinstance(v, bool):
        raise TypeError(f"expected an integer payload, got {v!r}")


@dataclass(frozen=True)
class IntV(Value):
    value: int

    def __post_init__(self):
        _check_int(self.value)


@dataclass(frozen=True)
class NatV(Value):
    value: int

    def __post_init__(self):
        _check_int(self.value)
        if self.value < 0:
            raise ValueError(f"nat must be non-negative, got {self.value}")


@dataclass(frozen=True)
class MutezV(Value):
    value: int

    def __post_init__(self):
        _check_int(self.value)
        if not 0 <= self.value <= MUTEZ_MAX:
            raise ValueError(f"mutez out of range: {self.value}")


@dataclass(frozen=True)
class TimestampV(Value):
    value: int  # seconds since the Epoch

    def __post_init__(self):
        _check_int(self.value)


@dataclass(frozen=True)
class StringV(Value):
    value: str


@dataclass(frozen=True)
class BytesV(Value):
    value: bytes


@dataclass(frozen=True)
class BoolV(Value):
    value: bool


@dataclass(frozen=True)
class KeyHashV(Value):
    value: str


@dataclass(frozen=True)
class AddressV(Value):
    value: str


@dataclass(frozen=True)
class KeyV(Value):
    value: str


@dataclass(frozen=True)
class SignatureV(Value):
    value: str


@dataclass(frozen=True)
class ChainIdV(Value):
    value: str


@dataclass(frozen=True)
class UnitV(Value):
    pass


@dataclass(frozen=True)
class SomeV(Value):
    value: Value


@dataclass(frozen=True)
class NoneV(Value):
    ty: Ty  # the type of the absent payload


@dataclass(frozen=True)
class PairV(Value):
    left: Value
    right: Value


@dataclass(frozen=True)
class LeftV(Value):
    value: Value
    right_ty: Ty


@dataclass(frozen=True)
class RightV(Value):
    value: Value
    left_ty: Ty


@dataclass(frozen=True)
class ListV(Value):
    items: tuple
    elem: Ty


@dataclass(frozen=True)
class SetV(Value):
    items: tuple
    elem: Ty


@dataclass(frozen=True)
class MapV(Value):
    items: tuple  # ((key, value), ...) sorted by key
    key: Ty
    val: Ty
    big: bool = False


@dataclass(frozen=True)
class ContractV(Value):
    address: str
    param: Ty


@dataclass(frozen=True)
class OperationV(Value):
    kind: str
    args: tuple


@dataclass(frozen=True)
class AbstractV(Value):
    """Opaque result of a cryptographic or serialisation primitive."""

    tag: str
    digest: str
    ty: Ty
    origin: Value = None  # kept so UNPACK can recover packed data; not part of equality

    def __eq__(self, other):
        return (isinstance(other, AbstractV) and self.tag == other.tag
                and self.digest == other.digest and self.ty == other.ty)

    def __hash__(self):
        return hash((self.tag, self.digest, self.ty))


UNIT_V = UnitV()
TRUE, FALSE = BoolV(True), BoolV(False)

_SCALAR_TYPES = {
    IntV: INT, NatV: NAT, MutezV: MUTEZ, TimestampV: TIMESTAMP, StringV: STRING,
    BytesV: BYTES, BoolV: BOOL, KeyHashV: KEY_HASH, AddressV: ADDRESS, KeyV: KEY,
    SignatureV: SIGNATURE, ChainIdV: CHAIN_ID, UnitV: UNIT,
}


def typ_infer(v):
    """Return the type of a value. Total on every Value."""
    t = _SCALAR_TYPES.get(type(v))
    if t is not None:
        return t
    if isinstance(v, PairV):
        return pair(typ_infer(v.left), typ_infer(v.right))
    if isinstance(v, SomeV):
        return option(typ_infer(v.value))
    if isinstance(v, NoneV):
        return option(v.ty)
    if isinstance(v, ListV):
        return list_(v.elem)
    if isinstance(v, SetV):
        return set_(v.elem)
    if isinstance(v, MapV):
        return (big_map if v.big else map_)(v.key, v.val)
    if isinstance(v, LeftV):
        return or_(typ_infer(v.value), v.right_ty)
    if isinstance(v, RightV):
        return or_(v.left_ty, typ_infer(v.value))
    if isinstance(v, OperationV):
        return OPERATION
    if isinstance(v, ContractV):
        return contract(v.param)
    if isinstance(v, AbstractV):
        return v.ty
    raise TypeError(f"not a Michelson value: {v!r}")


def _strictly_increasing(keys):
    return all(compare(a, b) < 0 for a, b in zip(keys, keys[1:]))


def well_formed(v):
    """Check the recursive data invariants: homogeneity, canonical ordering, bounds."""
    if isinstance(v, NatV):
        return v.value >= 0
    if isinstance(v, MutezV):
        return 0 <= v.value <= MUTEZ_MAX
    if isinstance(v, (SomeV, LeftV, RightV)):
        return well_formed(v.value)
    if isinstance(v, PairV):
        return well_formed(v.left) and well_formed(v.right)
    if isinstance(v, ListV):
        return all(well_formed(x) and typ_infer(x) == v.elem for x in v.items)
    if isinstance(v, SetV):
        if not v.elem.comparable:
            return False
        if not all(well_formed(x) and typ_infer(x) == v.elem for x in v.items):
            return False
        return _strictly_increasing(v.items)
    if isinstance(v, MapV):
        if not v.key.comparable:
            return False
        for k, x in v.items:
            if not (well_formed(k) and typ_infer(k) == v.key):
                return False
            if not (well_formed(x) and typ_infer(x) == v.val):
                return False
        return _strictly_increasing([k for k, _ in v.items])
    if isinstance(v, OperationV):
        return all(well_formed(a) for a in v.args)
    return isinstance(v, Value)


# --------------------------------------------------------------------------
# Comparison


def _order_key(v):
    if isinstance(v, AbstractV):
        # abstract results sort after every concrete datum of the same type
        return (1, v.tag, v.digest)
    if isinstance(v, (IntV, NatV, MutezV, TimestampV)):
        return (0, v.value)
    if isinstance(v, BoolV):
        return (0, int(v.value))
    if isinstance(v, (StringV, KeyHashV, AddressV)):
        return (0, v.value.encode("utf-8"))
    if isinstance(v, BytesV):
        return (0, v.value)
    raise TypeError(f"value is not comparable: {v!r}")


def compare(a, b):
    """Total order on comparable values of one type: -1, 0 or 1."""
    ta, tb = typ_infer(a), typ_infer(b)
    if ta != tb:
        raise TypeError(f"compare: operand types differ ({ta} vs {tb})")
    if not ta.comparable:
        raise TypeError(f"compare: type {ta} is not comparable")
    ka, kb = _order_key(a), _order_key(b)
    return (ka > kb) - (ka < kb)


# --------------------------------------------------------------------------
# Smart constructors


def make_list(items, elem):
    items = tuple(items)
    for x in items:
        if typ_infer(x) != elem or not well_formed(x):
            raise ValueError(f"list element {format_value(x)} is not a well-formed {elem}")
    return ListV(items, elem)


def _sorted_unique(items, key_of, what):
    import functools
    ordered = sorted(items, key=functools.cmp_to_key(lambda a, b: compare(key_of(a), key_of(b))))
    for a, b in zip(ordered, ordered[1:]):
        if compare(key_of(a), key_of(b)) == 0:
            raise ValueError(f"duplicate {what} {format_value(key_of(a))}")
    return tuple(ordered)


def make_set(items, elem):
    items = tuple(items)
    if not elem.comparable:
        raise ValueError(f"set element type {elem} is not comparable")
    for x in items:
        if typ_infer(x) != elem:
            raise ValueError(f"set element {format_value(x)} is not a {elem}")
    return SetV(_sorted_unique(items, lambda x: x, "set element"), elem)


def make_map(pairs, key, val, big=False):
    pairs = tuple(tuple(p) for p in pairs)
    if not key.comparable:
        raise ValueError(f"map key type {key} is not comparable")
    for k, x in pairs:
        if typ_infer(k) != key or typ_infer(x) != val or not well_formed(x):
            raise ValueError(f"map binding {format_value(k)} -> {format_value(x)} is ill-typed")
    return MapV(_sorted_unique(pairs, lambda p: p[0], "map key"), key, val, big)


def set_member(s, k):
    return any(compare(x, k) == 0 for x in s.items)


def map_get(m, k):
    for key, x in m.items:
        if compare(key, k) == 0:
            return x
    return None


# --------------------------------------------------------------------------
# Abstract digests


def digest(v):
    """Deterministic fingerprint of a value: equal values give equal digests."""
    text = f"{typ_infer(v)}|{format_value(v)}"
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# Printing


def _quote(s):
    out = s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
    return f'"{out}"'


def format_atom(v):
    """Format for argument position: compound applications get parentheses."""
    text = format_value(v)
    if isinstance(v, (PairV, SomeV, LeftV, RightV)):
        return f"({text})"
    return text


def format_value(v):
    """Render *v* in Michelson concrete syntax."""
    if isinstance(v, (IntV, NatV, MutezV, TimestampV)):
        return str(v.value)
    if isinstance(v, (StringV, KeyHashV, AddressV, KeyV, SignatureV, ChainIdV)):
        return _quote(v.value)
    if isinstance(v, BytesV):
        return "0x" + v.value.hex()
    if isinstance(v, BoolV):
        return "True" if v.value else "False"
    if isinstance(v, UnitV):
        return "Unit"
    if isinstance(v, SomeV):
        return f"Some {format_atom(v.value)}"
    if isinstance(v, NoneV):
        return "None"
    if isinstance(v, PairV):
        return f"Pair {format_atom(v.left)} {format_atom(v.right)}"
    if isinstance(v, LeftV):
        return f"Left {format_atom(v.value)}"
    if isinstance(v, RightV):
        return f"Right {format_atom(v.value)}"
    if isinstance(v, (ListV, SetV)):
        if not v.items:
            return "{}"
        return "{ " + " ; ".join(format_value(x) for x in v.items) + " }"
    if isinstance(v, MapV):
        if not v.items:
            return "{}"
        return "{ " + " ; ".join(f"Elt {format_atom(k)} {format_atom(x)}" for k, x in v.items) + " }"
    if isinstance(v, ContractV):
        return _quote(v.address)
    if isinstance(v, OperationV):
        args = " ".join(format_atom(a) for a in v.args)
        return f"<{v.kind}{' ' + args if args else ''}>"
    if isinstance(v, AbstractV):
        return f"<{v.tag}:{v.digest[:16]}>"
    raise TypeError(f"not a Michelson value: {v!r}")


# --------------------------------------------------------------------------
# Literal parsing (type-directed)

_SEQ_TYPES = ("list", "set", "map", "big_map")


def rfc3339_to_epoch(text):
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.datetime.fromisoformat(s)
    except ValueError:
        raise ValueError(f"invalid RFC3339 timestamp {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=datetime.timezone.utc)
    return calendar.timegm(dt.utctimetuple())


class DataReader:
    """Recursive-descent reader for data literals over a token list."""

    def __init__(self, tokens, source="", pos=0):
        self.tokens = tokens
        self.source = source
        self.pos = pos

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def error(self, message, tok=None):
        tok = tok or self.peek()
        span = tok.span if tok else (len(self.source), len(self.source))
        return LiteralError(message, span, self.source)

    def take(self):
        tok = self.peek()
        if tok is None:
            raise self.error("unexpected end of input in data literal")
        self.pos += 1
        return tok

    def expect_punct(self, text):
        tok = self.take()
        if tok.kind is not TokenKind.PUNCT or tok.text != text:
            raise self.error(f"expected {text!r}, found {tok.text!r}", tok)

    def at_punct(self, text):
        tok = self.peek()
        return tok is not None and tok.kind is TokenKind.PUNCT and tok.text == text

    def read(self, ty, arg_position=False):
        """Read one literal of type *ty*.

        In argument position an application (``Some 1``) must be parenthesised.
        """
        if self.at_punct("("):
            self.take()
            v = self.read(ty)
            self.expect_punct(")")
            return v
        tok = self.peek()
        if tok is None:
            raise self.error(f"expected a {ty} literal")
        if tok.kind is TokenKind.KEYWORD and tok.text in ("Pair", "Some", "Left", "Right") and arg_position:
            raise self.error(f"{tok.text} in argument position must be parenthesised", tok)
        return self._read_bare(ty)

    def _mismatch(self, ty, tok):
        return self.error(f"literal {tok.text!r} does not have type {ty}", tok)

    def _read_bare(self, ty):
        tok = self.peek()
        name = ty.name
        if name in ("int", "nat", "mutez"):
            tok = self.take()
            if tok.kind is not TokenKind.INT:
                raise self._mismatch(ty, tok)
            n = int(tok.text)
            if name == "nat" and n < 0:
                raise self.error(f"nat literal must be non-negative, got {n}", tok)
            if name == "mutez" and not 0 <= n <= MUTEZ_MAX:
                raise self.error(f"mutez literal out of range: {n}", tok)
            return {"int": IntV, "nat": NatV, "mutez": MutezV}[name](n)
        if name == "timestamp":
            tok = self.take()
            if tok.kind is TokenKind.INT:
                return TimestampV(int(tok.text))
            if tok.kind is TokenKind.STRING:
                try:
                    return TimestampV(rfc3339_to_epoch(unescape(tok.text)))
                except ValueError as exc:
                    raise self.error(str(exc), tok) from None
            raise self._mismatch(ty, tok)
        if name in ("string", "key_hash", "address", "key", "signature", "chain_id", "contract"):
            tok = self.take()
            if tok.kind is not TokenKind.STRING:
                raise self._mismatch(ty, tok)
            s = unescape(tok.text)
            if name == "contract":
                return ContractV(s, ty.args[0])
            return {"string": StringV, "key_hash": KeyHashV, "address": AddressV, "key": KeyV,
                    "signature": SignatureV, "chain_id": ChainIdV}[name](s)
        if name == "bytes":
            tok = self.take()
            if tok.kind is not TokenKind.BYTES:
                raise self._mismatch(ty, tok)
            return BytesV(bytes.fromhex(tok.text[2:]))
        if name == "bool":
            tok = self.take()
            if tok.kind is TokenKind.KEYWORD and tok.text in ("True", "False"):
                return TRUE if tok.text == "True" else FALSE
            raise self._mismatch(ty, tok)
        if name == "unit":
            tok = self.take()
            if tok.kind is TokenKind.KEYWORD and tok.text == "Unit":
                return UNIT_V
            raise self._mismatch(ty, tok)
        if name == "option":
            tok = self.take()
            if tok.kind is TokenKind.KEYWORD and tok.text == "None":
                return NoneV(ty.args[0])
            if tok.kind is TokenKind.KEYWORD and tok.text == "Some":
                return SomeV(self.read(ty.args[0], arg_position=True))
            raise self._mismatch(ty, tok)
        if name == "or":
            tok = self.take()
            if tok.kind is TokenKind.KEYWORD and tok.text == "Left":
                return LeftV(self.read(ty.args[0], arg_position=True), ty.args[1])
            if tok.kind is TokenKind.KEYWORD and tok.text == "Right":
                return RightV(self.read(ty.args[1], arg_position=True), ty.args[0])
            raise self._mismatch(ty, tok)
        if name == "pair":
            if self.at_punct("{"):
                return self._read_pair_seq(ty)
            tok = self.take()
            if not (tok.kind is TokenKind.KEYWORD and tok.text == "Pair"):
                raise self._mismatch(ty, tok)
            return self._read_pair_args(ty)
        if name in _SEQ_TYPES:
            return self._read_seq(ty)
        if name == "operation":
            raise self.error("operation values have no literal syntax", tok)
        raise self.error(f"no literal syntax for type {ty}", tok)

    def _read_pair_args(self, ty):
        # `Pair a b c` is the right comb `Pair a (Pair b c)`
        count = self._count_args()
        if count < 2:
            raise self.error("Pair needs at least two arguments")
        return self._read_comb(ty, count)

    def _read_comb(self, ty, count):
        if ty.name != "pair":
            raise self.error(f"too many Pair components for type {ty}")
        left = self.read(ty.args[0], arg_position=True)
        if count == 2:
            return PairV(left, self.read(ty.args[1], arg_position=True))
        return PairV(left, self._read_comb(ty.args[1], count - 1))

    def _count_args(self):
        """Count argument units ahead: single tokens or balanced groups."""
        i = self.pos
        count = 0
        while i < len(self.tokens):
            tok = self.tokens[i]
            if tok.kind is TokenKind.PUNCT:
                if tok.text in (")", ";", "}"):
                    break
                depth = 0
                while i < len(self.tokens):
                    t = self.tokens[i]
                    if t.kind is TokenKind.PUNCT and t.text in "({":
                        depth += 1
                    elif t.kind is TokenKind.PUNCT and t.text in ")}":
                        depth -= 1
                        if depth == 0:
                            break
                    i += 1
            count += 1
            i += 1
        return count

    def _read_pair_seq(self, ty):
        self.expect_punct("{")
        parts = []
        t = ty
        while True:
            if t.name == "pair" and not self._last_component():
                parts.append(self.read(t.args[0]))
                self.expect_punct(";")
                t = t.args[1]
            else:
                parts.append(self.read(t))
                break
        if self.at_punct(";"):
            self.take()
        self.expect_punct("}")
        v = parts[-1]
        for p in reversed(parts[:-1]):
            v = PairV(p, v)
        return v

    def _last_component(self):
        # a `{a; b}` comb ends where the closing brace is after the next element
        depth = 0
        i = self.pos
        while i < len(self.tokens):
            tok = self.tokens[i]
            if tok.kind is TokenKind.PUNCT:
                if tok.text in "({":
                    depth += 1
                elif tok.text in ")}":
                    if depth == 0:
                        return True
                    depth -= 1
                elif tok.text == ";" and depth == 0:
                    nxt = self.tokens[i + 1] if i + 1 < len(self.tokens) else None
                    return nxt is not None and nxt.kind is TokenKind.PUNCT and nxt.text == "}"
            i += 1
        return True

    def _read_seq(self, ty):
        tok = self.take()
        if not (tok.kind is TokenKind.PUNCT and tok.text == "{"):
            raise self._mismatch(ty, tok)
        items = []
        while not self.at_punct("}"):
            if ty.name in ("map", "big_map"):
                elt = self.take()
                if not (elt.kind is TokenKind.KEYWORD and elt.text == "Elt"):
                    raise self.error("expected Elt in map literal", elt)
                k = self.read(ty.args[0], arg_position=True)
                x = self.read(ty.args[1], arg_position=True)
                items.append((k, x))
            else:
                items.append(self.read(ty.args[0]))
            if self.at_punct(";"):
                self.take()
            elif not self.at_punct("}"):
                raise self.error("expected ';' or '}' in sequence literal")
        self.take()
        try:
            if ty.name == "list":
                return make_list(items, ty.args[0])
            if ty.name == "set":
                return make_set(items, ty.args[0])
            return make_map(items, ty.args[0], ty.args[1], big=ty.name == "big_map")
        except ValueError as exc:
            raise self.error(str(exc), tok) from None


def parse_literal(text, ty):
    """Parse a Michelson data literal at type *ty*."""
    tokens = [t for t in tokenize(text) if t.kind is not TokenKind.ANNOT]
    reader = DataReader(tokens, text)
    v = reader.read(ty)
    if reader.peek() is not None:
        raise reader.error(f"trailing input after literal: {reader.peek().text!r}")
    return v



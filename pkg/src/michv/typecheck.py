"""Static stack-type inference.

Every program point is identified by its *path*: the sequence of child
indices leading from the root instruction to it. A stack type is a tuple of
``Ty`` (index 0 is the top); ``None`` stands for the bottom type of a
failing instruction.
"""

from dataclasses import dataclass, field

from michv import model as m
from michv.errors import MichelsonTypeError
from michv.syntax import expand_macros

BOTTOM = None

_NUM = ("int", "nat")

ARITH = {
    "ADD": {
        ("int", "int"): m.INT, ("int", "nat"): m.INT, ("nat", "int"): m.INT, ("nat", "nat"): m.NAT,
        ("mutez", "mutez"): m.MUTEZ, ("timestamp", "int"): m.TIMESTAMP, ("int", "timestamp"): m.TIMESTAMP,
    },
    "SUB": {
        ("int", "int"): m.INT, ("int", "nat"): m.INT, ("nat", "int"): m.INT, ("nat", "nat"): m.INT,
        ("mutez", "mutez"): m.MUTEZ, ("timestamp", "int"): m.TIMESTAMP, ("timestamp", "timestamp"): m.INT,
    },
    "MUL": {
        ("int", "int"): m.INT, ("int", "nat"): m.INT, ("nat", "int"): m.INT, ("nat", "nat"): m.NAT,
        ("mutez", "nat"): m.MUTEZ, ("nat", "mutez"): m.MUTEZ,
    },
    "EDIV": {
        ("nat", "nat"): m.option(m.pair(m.NAT, m.NAT)),
        ("int", "int"): m.option(m.pair(m.INT, m.NAT)),
        ("int", "nat"): m.option(m.pair(m.INT, m.NAT)),
        ("nat", "int"): m.option(m.pair(m.INT, m.NAT)),
        ("mutez", "nat"): m.option(m.pair(m.MUTEZ, m.MUTEZ)),
        ("mutez", "mutez"): m.option(m.pair(m.NAT, m.MUTEZ)),
    },
    "AND": {("bool", "bool"): m.BOOL, ("nat", "nat"): m.NAT, ("int", "nat"): m.NAT},
    "OR": {("bool", "bool"): m.BOOL, ("nat", "nat"): m.NAT},
    "XOR": {("bool", "bool"): m.BOOL, ("nat", "nat"): m.NAT},
}

UNARY = {
    "NEG": {"int": m.INT, "nat": m.INT},
    "ABS": {"int": m.NAT},
    "ISNAT": {"int": m.option(m.NAT)},
    "INT": {"nat": m.INT},
    "NOT": {"bool": m.BOOL, "nat": m.INT, "int": m.INT},
    "EQ": {"int": m.BOOL}, "NEQ": {"int": m.BOOL}, "LT": {"int": m.BOOL},
    "LE": {"int": m.BOOL}, "GT": {"int": m.BOOL}, "GE": {"int": m.BOOL},
    "SHA256": {"bytes": m.BYTES}, "SHA512": {"bytes": m.BYTES}, "BLAKE2B": {"bytes": m.BYTES},
    "HASH_KEY": {"key": m.KEY_HASH},
}

CONTEXT = {
    "AMOUNT": m.MUTEZ, "BALANCE": m.MUTEZ, "NOW": m.TIMESTAMP,
    "SENDER": m.ADDRESS, "SOURCE": m.ADDRESS, "CHAIN_ID": m.CHAIN_ID,
}

_UNPUSHABLE = ("operation", "big_map", "contract")


def format_path(path):
    return ".".join(str(i) for i in path) if path else "root"


def parse_path(text):
    text = text.strip()
    if text in ("root", ""):
        return ()
    return tuple(int(p) for p in text.split("."))


def format_stack_ty(st):
    if st is BOTTOM:
        return "FAILED"
    return "[" + ", ".join(str(t) for t in st) + "]"


def _contains(t, name):
    return t.name == name or any(_contains(a, name) for a in t.args)


def _err(op, path, message, expected=None, found=None):
    return MichelsonTypeError(f"{op} at {format_path(path)}: {message}", path, expected, found)


def _need(op, path, st, n, expected=None):
    if len(st) < n:
        raise _err(op, path, f"needs {n} stack slot(s), found {len(st)} {format_stack_ty(st)}",
                   expected, st)


def _expect_shape(op, path, st, table):
    """Look up a binary operand-type table, raising a descriptive error."""
    _need(op, path, st, 2)
    key = (st[0].name, st[1].name)
    if key not in table:
        cases = " | ".join(f"({a}, {b})" for a, b in table)
        raise _err(op, path, f"expected operand types {cases}, found ({st[0]}, {st[1]})",
                   list(table), st[:2])
    return table[key]


def step_type(instr, st, param_ty, path=()):
    """Result stack type of a primitive (non-control) instruction."""
    op = instr.op
    a = instr.args
    if op in ARITH:
        return (_expect_shape(op, path, st, ARITH[op]),) + st[2:]
    if op in UNARY:
        _need(op, path, st, 1)
        res = UNARY[op].get(st[0].name)
        if res is None:
            raise _err(op, path, f"expected operand type {' | '.join(UNARY[op])}, found {st[0]}",
                       list(UNARY[op]), st[:1])
        return (res,) + st[1:]
    if op in CONTEXT:
        return (CONTEXT[op],) + st
    if op == "CAR" or op == "CDR":
        _need(op, path, st, 1)
        if st[0].name != "pair":
            raise _err(op, path, f"expected a pair, found {st[0]}", "pair", st[:1])
        return (st[0].args[0 if op == "CAR" else 1],) + st[1:]
    if op == "PAIR":
        _need(op, path, st, 2)
        return (m.pair(st[0], st[1]),) + st[2:]
    if op == "SWAP":
        _need(op, path, st, 2)
        return (st[1], st[0]) + st[2:]
    if op == "DUP":
        n = a[0] if a else 1
        if n < 1:
            raise _err(op, path, "DUP 0 is not allowed")
        _need(op, path, st, n)
        return (st[n - 1],) + st
    if op == "DROP":
        n = a[0] if a else 1
        _need(op, path, st, n)
        return st[n:]
    if op == "DIG":
        n = a[0]
        _need(op, path, st, n + 1)
        return (st[n],) + st[:n] + st[n + 1:]
    if op == "DUG":
        n = a[0]
        _need(op, path, st, n + 1)
        return st[1:n + 1] + (st[0],) + st[n + 1:]
    if op == "PUSH":
        ty, value = a
        if any(_contains(ty, bad) for bad in _UNPUSHABLE):
            raise _err(op, path, f"type {ty} cannot be pushed")
        if m.typ_infer(value) != ty:
            raise _err(op, path, f"literal does not have type {ty}")
        return (ty,) + st
    if op == "UNIT":
        return (m.UNIT,) + st
    if op == "NIL":
        return (m.list_(a[0]),) + st
    if op == "NONE":
        return (m.option(a[0]),) + st
    if op == "SOME":
        _need(op, path, st, 1)
        return (m.option(st[0]),) + st[1:]
    if op == "LEFT":
        _need(op, path, st, 1)
        return (m.or_(st[0], a[0]),) + st[1:]
    if op == "RIGHT":
        _need(op, path, st, 1)
        return (m.or_(a[0], st[0]),) + st[1:]
    if op == "CONS":
        _need(op, path, st, 2)
        if st[1] != m.list_(st[0]):
            raise _err(op, path, f"expected (a, list a), found ({st[0]}, {st[1]})", None, st[:2])
        return st[1:]
    if op == "COMPARE":
        _need(op, path, st, 2)
        if st[0] != st[1] or not st[0].comparable:
            raise _err(op, path, f"expected two equal comparable types, found ({st[0]}, {st[1]})",
                       "comparable", st[:2])
        return (m.INT,) + st[2:]
    if op in ("MEM", "GET"):
        _need(op, path, st, 2)
        coll = st[1]
        if coll.name not in ("set", "map", "big_map") or (op == "GET" and coll.name == "set"):
            raise _err(op, path, f"expected a {'set or ' if op == 'MEM' else ''}map, found {coll}")
        if coll.args[0] != st[0]:
            raise _err(op, path, f"key type {st[0]} does not match {coll}")
        res = m.BOOL if op == "MEM" else m.option(coll.args[1])
        return (res,) + st[2:]
    if op == "UPDATE":
        _need(op, path, st, 3)
        coll = st[2]
        if coll.name == "set" and st[0] == coll.args[0] and st[1] == m.BOOL:
            return st[2:]
        if (coll.name in ("map", "big_map") and st[0] == coll.args[0]
                and st[1] == m.option(coll.args[1])):
            return st[2:]
        raise _err(op, path, f"expected (k, bool, set k) or (k, option v, map k v), found "
                             f"({st[0]}, {st[1]}, {st[2]})", None, st[:3])
    if op == "SIZE":
        _need(op, path, st, 1)
        if st[0].name not in ("string", "bytes", "list", "set", "map"):
            raise _err(op, path, f"expected string, bytes, list, set or map, found {st[0]}")
        return (m.NAT,) + st[1:]
    if op == "CONCAT":
        _need(op, path, st, 1)
        if st[0] in (m.list_(m.STRING), m.list_(m.BYTES)):
            return (st[0].args[0],) + st[1:]
        _need(op, path, st, 2)
        if st[0] == st[1] and st[0].name in ("string", "bytes"):
            return (st[0],) + st[2:]
        raise _err(op, path, f"expected (string, string), (bytes, bytes) or a list of either, "
                             f"found {format_stack_ty(st[:2])}")
    if op == "FAILWITH":
        _need(op, path, st, 1)
        return BOTTOM
    if op == "CHECK_SIGNATURE":
        _need(op, path, st, 3)
        if st[:3] != (m.KEY, m.SIGNATURE, m.BYTES):
            raise _err(op, path, f"expected (key, signature, bytes), found {format_stack_ty(st[:3])}")
        return (m.BOOL,) + st[3:]
    if op == "PACK":
        _need(op, path, st, 1)
        if _contains(st[0], "operation") or _contains(st[0], "big_map"):
            raise _err(op, path, f"type {st[0]} cannot be packed")
        return (m.BYTES,) + st[1:]
    if op == "UNPACK":
        _need(op, path, st, 1)
        if st[0] != m.BYTES:
            raise _err(op, path, f"expected bytes, found {st[0]}")
        return (m.option(a[0]),) + st[1:]
    if op == "SELF":
        return (m.contract(param_ty),) + st
    if op == "TRANSFER_TOKENS":
        _need(op, path, st, 3)
        if st[1] != m.MUTEZ or st[2] != m.contract(st[0]):
            raise _err(op, path, f"expected (a, mutez, contract a), found {format_stack_ty(st[:3])}")
        return (m.OPERATION,) + st[3:]
    if op == "SET_DELEGATE":
        _need(op, path, st, 1)
        if st[0] != m.option(m.KEY_HASH):
            raise _err(op, path, f"expected option key_hash, found {st[0]}")
        return (m.OPERATION,) + st[1:]
    raise _err(op, path, "unknown instruction")


@dataclass
class TypedProgram:
    code: object
    entry: tuple
    at: dict = field(default_factory=dict)  # path -> (before, after)
    failing: frozenset = frozenset()
    parameter: object = None
    storage: object = None

    @property
    def final(self):
        return self.at[()][1]

    def before(self, path):
        return self.at[path][0]

    def after(self, path):
        return self.at[path][1]

    def node(self, path):
        i = self.code
        for k in path:
            i = i.blocks[k]
        return i


class _Checker:
    def __init__(self, param_ty):
        self.param_ty = param_ty
        self.at = {}
        self.failing = set()

    def join(self, op, path, a, b):
        if a is BOTTOM:
            return b
        if b is BOTTOM or a == b:
            return a
        raise _err(op, path, f"branches produce different stacks: {format_stack_ty(a)} vs "
                             f"{format_stack_ty(b)}", a, b)

    def infer(self, i, path, st):
        try:
            after = self._infer(i, path, st)
        except MichelsonTypeError as e:
            if e.span is None:
                e.span = i.span
            raise
        self.at[path] = (st, after)
        return after

    def _loop_body(self, i, path, body_in, expected):
        out = self.infer(i.blocks[0], path + (0,), body_in)
        if out is not BOTTOM and out != expected:
            raise _err(i.op, path, f"loop body must map {format_stack_ty(body_in)} to "
                                   f"{format_stack_ty(expected)}, found {format_stack_ty(out)}"
                                   + (" (body changes the stack depth)" if len(out) != len(expected) else ""),
                       expected, out)

    def _infer(self, i, path, st):
        op = i.op
        if op == "NOP":
            return st
        if op == "SEQ":
            mid = self.infer(i.blocks[0], path + (0,), st)
            if mid is BOTTOM:
                raise _err("SEQ", path + (1,), "unreachable code after a failing instruction")
            return self.infer(i.blocks[1], path + (1,), mid)
        if op == "DIP":
            n = i.args[0] if i.args else 1
            _need(op, path, st, n)
            out = self.infer(i.blocks[0], path + (0,), st[n:])
            return BOTTOM if out is BOTTOM else st[:n] + out
        if op == "IF":
            _need(op, path, st, 1)
            if st[0] != m.BOOL:
                raise _err(op, path, f"expected bool, found {st[0]}", m.BOOL, st[:1])
            a = self.infer(i.blocks[0], path + (0,), st[1:])
            b = self.infer(i.blocks[1], path + (1,), st[1:])
            return self.join(op, path, a, b)
        if op == "IF_NONE":
            _need(op, path, st, 1)
            if st[0].name != "option":
                raise _err(op, path, f"expected an option, found {st[0]}", "option", st[:1])
            a = self.infer(i.blocks[0], path + (0,), st[1:])
            b = self.infer(i.blocks[1], path + (1,), (st[0].args[0],) + st[1:])
            return self.join(op, path, a, b)
        if op == "IF_LEFT":
            _need(op, path, st, 1)
            if st[0].name != "or":
                raise _err(op, path, f"expected an or, found {st[0]}", "or", st[:1])
            a = self.infer(i.blocks[0], path + (0,), (st[0].args[0],) + st[1:])
            b = self.infer(i.blocks[1], path + (1,), (st[0].args[1],) + st[1:])
            return self.join(op, path, a, b)
        if op == "IF_CONS":
            _need(op, path, st, 1)
            if st[0].name != "list":
                raise _err(op, path, f"expected a list, found {st[0]}", "list", st[:1])
            a = self.infer(i.blocks[0], path + (0,), (st[0].args[0],) + st)
            b = self.infer(i.blocks[1], path + (1,), st[1:])
            return self.join(op, path, a, b)
        if op == "LOOP":
            _need(op, path, st, 1)
            if st[0] != m.BOOL:
                raise _err(op, path, f"expected bool, found {st[0]}", m.BOOL, st[:1])
            self._loop_body(i, path, st[1:], st)
            return st[1:]
        if op == "LOOP_LEFT":
            _need(op, path, st, 1)
            if st[0].name != "or":
                raise _err(op, path, f"expected an or, found {st[0]}", "or", st[:1])
            self._loop_body(i, path, (st[0].args[0],) + st[1:], st)
            return (st[0].args[1],) + st[1:]
        if op == "ITER":
            _need(op, path, st, 1)
            coll = st[0]
            if coll.name in ("list", "set"):
                elem = coll.args[0]
            elif coll.name == "map":
                elem = m.pair(*coll.args)
            else:
                raise _err(op, path, f"expected a list, set or map, found {coll}")
            self._loop_body(i, path, (elem,) + st[1:], st[1:])
            return st[1:]
        after = step_type(i, st, self.param_ty, path)
        if after is BOTTOM:
            self.failing.add(path)
        return after


def typecheck_code(code, entry, param_ty=m.UNIT):
    """Typecheck an instruction tree from an arbitrary entry stack type."""
    code = expand_macros(code)
    checker = _Checker(param_ty)
    checker.infer(code, (), tuple(entry))
    return TypedProgram(code, tuple(entry), checker.at, frozenset(checker.failing), param_ty)


def typecheck(c):
    """Typecheck a contract; the code must leave ``pair (list operation) storage``."""
    entry = (m.pair(c.parameter, c.storage),)
    tp = typecheck_code(c.code, entry, c.parameter)
    tp.storage = c.storage
    expected = (m.pair(m.list_(m.OPERATION), c.storage),)
    if tp.final is not BOTTOM and tp.final != expected:
        raise MichelsonTypeError(
            f"contract must end with {format_stack_ty(expected)}, found {format_stack_ty(tp.final)}",
            (), expected, tp.final)
    return tp


def annotate_types(tp):
    """Stack types at every sequence boundary, in program order.

    The first entry is the contract entry point; each following one is the
    stack after the left child of a SEQ node. Expanded macros count as a
    single instruction.
    """
    out = [((), tp.entry)]

    def walk(i, path):
        if i.origin is not None:
            return
        if i.op == "SEQ":
            mid = tp.after(path + (0,))
            walk(i.blocks[0], path + (0,))
            if mid is not BOTTOM:
                out.append((path + (0,), mid))
            walk(i.blocks[1], path + (1,))
            return
        for k, b in enumerate(i.blocks):
            walk(b, path + (k,))

    walk(tp.code, ())
    return out


@dataclass(frozen=True)
class SafetySpec:
    """The four stack conditions plus fuel positivity derivable from a contract's types."""

    entry_length: int
    entry_type: object
    result_length: int
    result_type: object

    def requires(self):
        from michv import formula as f
        return (
            f.eq(f.length(f.S), f.lit(self.entry_length)),
            f.gt(f.FUEL, f.lit(0)),
            f.eq(f.typ(f.slot(f.S, 0)), f.lit(self.entry_type)),
        )

    def ensures(self):
        from michv import formula as f
        return (
            f.eq(f.length(f.RESULT), f.lit(self.result_length)),
            f.eq(f.typ(f.slot(f.RESULT, 0)), f.lit(self.result_type)),
        )


def derive_safety_spec(c):
    typecheck(c)
    return SafetySpec(1, m.pair(c.parameter, c.storage), 1, m.pair(m.list_(m.OPERATION), c.storage))

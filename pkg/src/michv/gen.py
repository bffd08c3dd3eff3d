"""Random types, values, stacks and well-typed programs for testing."""

import random

from michv import model as m
from michv.interpreter import sign
from michv.syntax import Instr, seq
from michv.typecheck import ARITH, CONTEXT, UNARY, step_type

SIMPLE = ("int", "nat", "string", "bytes", "mutez", "bool", "key_hash", "timestamp", "address",
          "key", "signature", "chain_id", "unit")
COMPARABLE = tuple(sorted(m.COMPARABLE))

_EDGE_INTS = (0, 1, -1, 2, -2, 7, -7, 2 ** 31, -(2 ** 31), 2 ** 63, -(2 ** 63), 2 ** 64 + 3)
_ALPHABET = "abcxyz019 _"


def random_type(rng, depth=2, comparable=False, pushable=False):
    """A random type; *pushable* excludes operation, big_map and contract."""
    if comparable:
        return m.Ty(rng.choice(COMPARABLE))
    if depth <= 0 or rng.random() < 0.5:
        names = SIMPLE if pushable else SIMPLE + ("operation",)
        return m.Ty(rng.choice(names))
    kind = rng.choice(("pair", "or", "option", "list", "set", "map"))
    d = depth - 1
    if kind == "set":
        return m.set_(random_type(rng, comparable=True))
    if kind == "map":
        return m.map_(random_type(rng, comparable=True), random_type(rng, d, pushable=pushable))
    if kind in ("option", "list"):
        return m.Ty(kind, (random_type(rng, d, pushable=pushable),))
    return m.Ty(kind, (random_type(rng, d, pushable=pushable), random_type(rng, d, pushable=pushable)))


def random_int(rng, lo=None):
    r = rng.random()
    if r < 0.3:
        x = rng.choice(_EDGE_INTS)
    elif r < 0.8:
        x = rng.randint(-50, 50)
    else:
        x = rng.randint(-(2 ** 70), 2 ** 70)
    if lo is not None and x < lo:
        x = lo + abs(x - lo) - 1 if x < lo else x
        x = max(x, lo)
    return x


def random_mutez(rng):
    r = rng.random()
    if r < 0.3:
        return rng.choice((0, 1, 2, m.MUTEZ_MAX, m.MUTEZ_MAX - 1, 2 ** 62))
    if r < 0.8:
        return rng.randint(0, 1000)
    return rng.randint(0, m.MUTEZ_MAX)


def _text(rng, n=4):
    return "".join(rng.choice(_ALPHABET) for _ in range(rng.randint(0, n)))


def random_value(rng, ty, depth=2):
    """A well-formed random value of type *ty*."""
    n = ty.name
    if n == "int":
        return m.IntV(random_int(rng))
    if n == "nat":
        return m.NatV(abs(random_int(rng)))
    if n == "mutez":
        return m.MutezV(random_mutez(rng))
    if n == "timestamp":
        return m.TimestampV(random_int(rng))
    if n == "string":
        return m.StringV(_text(rng))
    if n == "bytes":
        return m.BytesV(bytes(rng.randrange(256) for _ in range(rng.randint(0, 4))))
    if n == "bool":
        return m.BoolV(rng.random() < 0.5)
    if n == "key_hash":
        return m.KeyHashV("tz1" + rng.choice("abc") * 3)
    if n == "address":
        return m.AddressV(rng.choice(("tz1", "KT1")) + rng.choice("abc") * 3)
    if n == "key":
        return m.KeyV("edpk" + rng.choice("abc") * 3)
    if n == "signature":
        return m.SignatureV("edsig" + rng.choice("abc") * 3)
    if n == "chain_id":
        return m.ChainIdV("Net" + rng.choice("abc"))
    if n == "unit":
        return m.UNIT_V
    if n == "operation":
        return m.OperationV("set_delegate", (m.NoneV(m.KEY_HASH),))
    if n == "contract":
        return m.ContractV("KT1" + rng.choice("abc") * 3, ty.args[0])
    size = rng.randint(0, 3) if depth > 0 else 0
    d = depth - 1
    if n == "pair":
        return m.PairV(random_value(rng, ty.args[0], d), random_value(rng, ty.args[1], d))
    if n == "option":
        return m.SomeV(random_value(rng, ty.args[0], d)) if rng.random() < 0.6 else m.NoneV(ty.args[0])
    if n == "or":
        if rng.random() < 0.5:
            return m.LeftV(random_value(rng, ty.args[0], d), ty.args[1])
        return m.RightV(random_value(rng, ty.args[1], d), ty.args[0])
    if n == "list":
        return m.ListV(tuple(random_value(rng, ty.args[0], d) for _ in range(size)), ty.args[0])
    if n == "set":
        items = {}
        for _ in range(size):
            x = random_value(rng, ty.args[0], d)
            items[x] = x
        return m.make_set(items.values(), ty.args[0])
    if n in ("map", "big_map"):
        items = {}
        for _ in range(size):
            items[random_value(rng, ty.args[0], d)] = random_value(rng, ty.args[1], d)
        return m.make_map(items.items(), ty.args[0], ty.args[1], big=n == "big_map")
    raise ValueError(f"cannot generate a {ty}")


def random_stack(rng, n=None, depth=1):
    n = rng.randint(0, 3) if n is None else n
    return tuple(random_value(rng, random_type(rng, depth), depth) for _ in range(n))


# ---------------------------------------------------------------------------
# Per-opcode inputs satisfying each contract's requires


# Slots below the operands only need variety, so they come from a fixed pool.
_TAIL_POOL = random_stack(random.Random("tail"), 256)


def _tail(rng):
    k = rng.random()
    if k < 1 / 3:
        return ()
    if k < 2 / 3:
        return (rng.choice(_TAIL_POOL),)
    return rng.choice(_TAIL_POOL), rng.choice(_TAIL_POOL)


def _of(rng, *tys):
    return tuple(random_value(rng, t) for t in tys)


def _arith(op):
    cases = list(ARITH[op])

    def make(rng):
        a, b = rng.choice(cases)
        return Instr(op), _of(rng, m.Ty(a), m.Ty(b)) + _tail(rng)
    return make


def _unary(op):
    cases = list(UNARY[op])

    def make(rng):
        return Instr(op), _of(rng, m.Ty(rng.choice(cases))) + _tail(rng)
    return make


def _compare(op):
    def make(rng):
        t = random_type(rng, comparable=True)
        a = random_value(rng, t)
        b = a if rng.random() < 0.25 else random_value(rng, t)
        return Instr(op, origin=op if op != "COMPARE" else None), (a, b) + _tail(rng)
    return make


def _any(n, op, args_fn=None):
    def make(rng):
        args = args_fn(rng) if args_fn else ()
        return Instr(op, args), random_stack(rng, n) + _tail(rng)
    return make


def _pair_top(op):
    def make(rng):
        t = m.pair(random_type(rng, 1), random_type(rng, 1))
        return Instr(op, origin=op if op == "UNPAIR" else None), _of(rng, t) + _tail(rng)
    return make


def _numbered(op, lo, extra):
    def make(rng):
        n = rng.randint(lo, 3)
        st = random_stack(rng, n + extra + rng.randint(0, 2))
        if op in ("DUP", "DROP") and rng.random() < 0.3:
            return Instr(op), random_stack(rng, 1 + rng.randint(0, 2))
        return Instr(op, (n,)), st
    return make


def _push(rng):
    t = random_type(rng, 2, pushable=True)
    return Instr("PUSH", (t, random_value(rng, t))), _tail(rng)


def _cons(rng):
    t = random_type(rng, 1)
    return Instr("CONS"), _of(rng, t, m.list_(t)) + _tail(rng)


def _mem(rng):
    k = random_type(rng, comparable=True)
    coll = m.set_(k) if rng.random() < 0.5 else m.map_(k, random_type(rng, 1))
    return Instr("MEM"), _lookup(rng, k, coll) + _tail(rng)


def _lookup(rng, k, coll):
    c = random_value(rng, coll)
    keys = [x for x in c.items] if coll.name == "set" else [x for x, _ in c.items]
    key = rng.choice(keys) if keys and rng.random() < 0.5 else random_value(rng, k)
    return key, c


def _get(rng):
    k = random_type(rng, comparable=True)
    return Instr("GET"), _lookup(rng, k, m.map_(k, random_type(rng, 1))) + _tail(rng)


def _update(rng):
    k = random_type(rng, comparable=True)
    if rng.random() < 0.5:
        key, c = _lookup(rng, k, m.set_(k))
        return Instr("UPDATE"), (key, random_value(rng, m.BOOL), c) + _tail(rng)
    v = random_type(rng, 1)
    key, c = _lookup(rng, k, m.map_(k, v))
    return Instr("UPDATE"), (key, random_value(rng, m.option(v)), c) + _tail(rng)


def _size(rng):
    t = rng.choice((m.STRING, m.BYTES, m.list_(random_type(rng, 1)), m.set_(random_type(rng, comparable=True)),
                    m.map_(random_type(rng, comparable=True), random_type(rng, 1))))
    return Instr("SIZE"), _of(rng, t) + _tail(rng)


def _concat(rng):
    t = rng.choice((m.STRING, m.BYTES))
    if rng.random() < 0.5:
        return Instr("CONCAT"), _of(rng, t, t) + _tail(rng)
    return Instr("CONCAT"), _of(rng, m.list_(t)) + _tail(rng)


def _check_signature(rng):
    key, payload = random_value(rng, m.KEY), random_value(rng, m.BYTES)
    sig = sign(key, payload) if rng.random() < 0.5 else random_value(rng, m.SIGNATURE)
    return Instr("CHECK_SIGNATURE"), (key, sig, payload) + _tail(rng)


def _pack(rng):
    t = random_type(rng, 1, pushable=True)
    return Instr("PACK"), _of(rng, t) + _tail(rng)


def _unpack(rng):
    t = random_type(rng, 1, pushable=True)
    return Instr("UNPACK", (t,)), _of(rng, m.BYTES) + _tail(rng)


def _transfer(rng):
    t = random_type(rng, 1, pushable=True)
    return Instr("TRANSFER_TOKENS"), _of(rng, t, m.MUTEZ, m.contract(t)) + _tail(rng)


def _build_cases():
    cases = {}
    for op in ("ADD", "SUB", "MUL", "EDIV", "AND", "OR", "XOR"):
        cases[op] = _arith(op)
    for op in UNARY:
        cases[op] = _unary(op)
    cases["COMPARE"] = _compare("COMPARE")
    for c in ("EQ", "NEQ", "LT", "LE", "GT", "GE"):
        cases["CMP" + c] = _compare("CMP" + c)
    for op in ("CAR", "CDR", "UNPAIR"):
        cases[op] = _pair_top(op)
    cases["PAIR"] = _any(2, "PAIR")
    cases["SWAP"] = _any(2, "SWAP")
    cases["DUP"] = _numbered("DUP", 1, 0)
    cases["DROP"] = _numbered("DROP", 0, 0)
    cases["DIG"] = _numbered("DIG", 0, 1)
    cases["DUG"] = _numbered("DUG", 0, 1)
    cases["PUSH"] = _push
    cases["UNIT"] = _any(0, "UNIT")
    for op in ("NIL", "NONE"):
        cases[op] = _any(0, op, lambda rng: (random_type(rng, 1),))
    cases["SOME"] = _any(1, "SOME")
    for op in ("LEFT", "RIGHT"):
        cases[op] = _any(1, op, lambda rng: (random_type(rng, 1),))
    cases["CONS"] = _cons
    cases["MEM"] = _mem
    cases["GET"] = _get
    cases["UPDATE"] = _update
    cases["SIZE"] = _size
    cases["CONCAT"] = _concat
    cases["FAILWITH"] = _any(1, "FAILWITH")
    cases["CHECK_SIGNATURE"] = _check_signature
    cases["PACK"] = _pack
    cases["UNPACK"] = _unpack
    for op in list(CONTEXT) + ["SELF"]:
        cases[op] = _any(0, op)
    cases["TRANSFER_TOKENS"] = _transfer
    cases["SET_DELEGATE"] = lambda rng: (Instr("SET_DELEGATE"), _of(rng, m.option(m.KEY_HASH)) + _tail(rng))
    return cases


OPCODE_CASES = _build_cases()


def opcode_input(opcode, rng):
    """(instruction, input stack) for *opcode*, meant to satisfy its contract's requires."""
    return OPCODE_CASES[opcode](rng)


# ---------------------------------------------------------------------------
# Well-typed programs


def _candidates(rng, st):
    """Primitive instructions applicable to stack type *st*."""
    out = []
    t = random_type(rng, 1, pushable=True)
    out.append(Instr("PUSH", (t, random_value(rng, t, 1))))
    out += [Instr("UNIT"), Instr("NIL", (random_type(rng, 1),)), Instr("NOW"), Instr("AMOUNT")]
    if st:
        out += [Instr("DUP"), Instr("DROP"), Instr("SOME"), Instr("LEFT", (random_type(rng, 0),))]
        top = st[0]
        if top.name in UNARY_BY_TYPE:
            out += [Instr(op) for op in UNARY_BY_TYPE[top.name]]
        if top.name == "pair":
            out += [Instr("CAR"), Instr("CDR"), Instr("UNPAIR", origin="UNPAIR")]
        if top.name in ("string", "bytes", "list", "set", "map"):
            out.append(Instr("SIZE"))
    if len(st) >= 2:
        out += [Instr("SWAP"), Instr("PAIR"), Instr("DIG", (1,)), Instr("DUG", (1,))]
        key = (st[0].name, st[1].name)
        out += [Instr(op) for op, table in ARITH.items() if key in table and op != "EDIV" or
                (op == "EDIV" and key in table)]
        if st[0] == st[1] and st[0].comparable:
            out += [Instr("COMPARE"), Instr(rng.choice(("CMPEQ", "CMPLT", "CMPGE")), origin=None)]
        if st[1] == m.list_(st[0]):
            out.append(Instr("CONS"))
        if st[1].name in ("set", "map") and st[1].args[0] == st[0]:
            out.append(Instr("MEM"))
    return out


UNARY_BY_TYPE = {}
for _op, _table in UNARY.items():
    for _name in _table:
        UNARY_BY_TYPE.setdefault(_name, []).append(_op)


def _expand_origin(i):
    if i.op.startswith("CMP") and i.op not in ("COMPARE",):
        return Instr(i.op)
    return i


def _primitive(rng, st):
    while True:
        i = _expand_origin(rng.choice(_candidates(rng, st)))
        if i.origin == "UNPAIR" or i.op == "UNPAIR":
            if st and st[0].name == "pair":
                return Instr("UNPAIR"), (st[0].args[0], st[0].args[1]) + st[1:]
            continue
        if i.op.startswith("CMP"):
            if len(st) >= 2 and st[0] == st[1] and st[0].comparable:
                return i, (m.BOOL,) + st[2:]
            continue
        after = step_type(i, st, m.UNIT)
        if after is not None:
            return i, after


def _neutral(rng, st):
    """A short block that leaves the stack type unchanged."""
    choices = [lambda: seq(*_push_drop(rng))]
    if st:
        choices.append(lambda: seq(Instr("DUP"), Instr("DROP")))
    if len(st) >= 2:
        choices.append(lambda: seq(Instr("SWAP"), Instr("SWAP")))
    return rng.choice(choices)()


def _push_drop(rng):
    t = random_type(rng, 1, pushable=True)
    return Instr("PUSH", (t, random_value(rng, t, 1))), Instr("DROP")


def _refresh(rng, i):
    """The same block with fresh literals."""
    if i.op == "PUSH":
        return Instr("PUSH", (i.args[0], random_value(rng, i.args[0], 1)))
    if not i.blocks:
        return i
    return Instr(i.op, i.args, tuple(_refresh(rng, b) for b in i.blocks), origin=i.origin)


def random_block(rng, st, size):
    """A random instruction tree applicable to *st*; returns (code, resulting stack type)."""
    items = []
    for _ in range(size):
        r = rng.random()
        if r < 0.08 and st:
            body, out = random_block(rng, st[1:], rng.randint(1, 2))
            items.append(Instr("DIP", (), (body,)))
            st = st[:1] + out
        elif r < 0.14:
            body, out = random_block(rng, st, rng.randint(1, 2))
            items += [Instr("PUSH", (m.BOOL, m.BoolV(rng.random() < 0.5))),
                      Instr("IF", (), (body, _refresh(rng, body)))]
            st = out
        elif r < 0.18:
            body = seq(_neutral(rng, st), Instr("PUSH", (m.BOOL, m.FALSE)))
            items += [Instr("PUSH", (m.BOOL, m.BoolV(rng.random() < 0.5))), Instr("LOOP", (), (body,))]
        elif r < 0.22:
            t = random_type(rng, 0, pushable=True)
            lst = m.ListV(tuple(random_value(rng, t) for _ in range(rng.randint(0, 3))), t)
            items += [Instr("PUSH", (m.list_(t), lst)),
                      Instr("ITER", (), (seq(Instr("DROP"), _neutral(rng, st)),))]
        else:
            i, st = _primitive(rng, st)
            items.append(i)
    return seq(*items), st


def random_program(rng, size=None):
    """A random well-typed contract (parameter, storage, code)."""
    from michv.syntax import Contract
    param = random_type(rng, 1, pushable=True)
    storage = random_type(rng, 1, pushable=True)
    body, st = random_block(rng, (m.pair(param, storage),), rng.randint(1, 8) if size is None else size)
    tail = []
    if st:
        tail.append(Instr("DROP", (len(st),)))
    tail += [Instr("PUSH", (storage, random_value(rng, storage, 1))),
             Instr("NIL", (m.OPERATION,)), Instr("PAIR")]
    return Contract(param, storage, seq(body, *tail))


def rng_for(seed):
    return random.Random(seed)

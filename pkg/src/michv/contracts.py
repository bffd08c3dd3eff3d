"""Per-opcode axiomatic contracts, kept as data.

Each contract speaks about the input stack ``s``, the output stack
``result`` and the step budget ``fuel``; operands are bound by name (``n``
for numeric arguments, ``ty`` for type arguments, ``v`` for a pushed
literal) and the chain context by ``amount``, ``balance``, ``now``,
``sender``, ``source``, ``chain_id`` and ``self``.

The same table feeds the runtime checker, the faithful emitter and the SMT
backend. Control instructions (DIP, the IF family and loops) have no entry:
their meaning is structural and every backend handles them directly.
"""

from dataclasses import dataclass, field

from michv import formula as f
from michv import model as m
from michv.errors import FormulaError
from michv.typecheck import ARITH

S, R, FUEL = f.S, f.RESULT, f.FUEL
I = f.Var("i", f.INT)
N = f.Var("n", f.INT)
TY = f.Var("ty", f.TYPE)
V = f.Var("v", f.VALUE)


def s(i):
    return f.slot(S, i)


def r(i):
    return f.slot(R, i)


def t(x):
    return f.typ(x)


def ty(x):
    return f.lit(x)


@dataclass(frozen=True)
class OpcodeContract:
    opcode: str
    requires: tuple
    ensures: tuple
    pops: object = 0     # int, or callable(operands, stack_ty) -> int
    pushes: object = 0
    may_fail: bool = False
    fails_if: object = None  # formula over s/operands: the opcode fails iff it holds
    operands: tuple = ()
    _compiled: dict = field(default_factory=dict, compare=False, repr=False)

    def shape(self, operands=None, stack_ty=None):
        """(pops, pushes) for a concrete application."""
        operands = operands or {}
        pops = self.pops(operands, stack_ty) if callable(self.pops) else self.pops
        pushes = self.pushes(operands, stack_ty) if callable(self.pushes) else self.pushes
        return pops, pushes

    def clauses(self):
        """Every clause with a stable role name: ``precondition.k`` / ``postcondition.k``."""
        out = [(f"precondition.{k}", c) for k, c in enumerate(self.requires)]
        out += [(f"postcondition.{k}", c) for k, c in enumerate(self.ensures)]
        return out

    def compiled(self, role):
        """Compiled closures for ``requires``/``ensures``/``fails_if`` (cached)."""
        if role not in self._compiled:
            if role == "fails_if":
                self._compiled[role] = None if self.fails_if is None else f.compile_formula(self.fails_if)
            else:
                self._compiled[role] = tuple(f.compile_formula(c) for c in getattr(self, role))
        return self._compiled[role]


def operand_env(instr):
    """Bind an instruction's operands to the names its contract uses."""
    op, args = instr.op, instr.args
    if op in ("DUP", "DROP"):
        return {"n": args[0] if args else 1}
    if op in ("DIG", "DUG"):
        return {"n": args[0]}
    if op == "PUSH":
        return {"ty": args[0], "v": args[1]}
    if op in ("NIL", "NONE", "LEFT", "RIGHT", "UNPACK"):
        return {"ty": args[0]}
    return {}


# ---------------------------------------------------------------------------
# Clause builders


def _base(min_len):
    return (f.gt(FUEL, 0), f.ge(f.length(S), min_len))


def _length(pops, pushes):
    rhs = f.length(S)
    if pops:
        rhs = f.sub(rhs, pops)
    if pushes:
        rhs = f.add(rhs, pushes)
    return f.eq(f.length(R), rhs)


def _frame(pops, pushes):
    """Untouched slots carry over, values and types alike."""
    def src():
        if isinstance(pops, int) and isinstance(pushes, int):
            shift = pops - pushes
            if shift == 0:
                return I
            return f.add(I, shift) if shift > 0 else f.sub(I, -shift)
        return f.add(f.sub(I, pushes), pops)
    return (
        f.forall("i", pushes, f.length(R), f.eq(f.slot(R, I), f.slot(S, src()))),
        f.forall("i", pushes, f.length(R), f.eq(t(f.slot(R, I)), t(f.slot(S, src())))),
    )


def _guard(cases):
    """Type-guard requires: one arm per admitted operand-type case."""
    return f.match(*[(g, f.TRUE) for g in cases])


def _types_are(*tys):
    return f.and_(*[f.eq(t(s(k)), ty(x)) for k, x in enumerate(tys)])


def _comparable(x):
    return f.or_(*[f.ty_is(x, c) for c in sorted(m.COMPARABLE)])


_MK = {"int": "mk_int", "nat": "mk_nat", "mutez": "mk_mutez", "timestamp": "mk_timestamp"}


def _mk(res_ty, e):
    return f.op(_MK[res_ty.name], e)


def _std(op, pops, pushes, requires=(), ensures=(), min_len=None, **kw):
    return OpcodeContract(
        op,
        _base(pops if min_len is None else min_len) + tuple(requires),
        (_length(pops, pushes),) + tuple(ensures) + _frame(pops, pushes),
        pops, pushes, **kw)


# ---------------------------------------------------------------------------
# The table

_ARITH_OP = {"ADD": "add", "SUB": "sub", "MUL": "mul"}


def _arith(op):
    cases = ARITH[op]
    guards = {k: _types_are(m.Ty(k[0]), m.Ty(k[1])) for k in cases}
    a, b = f.num(s(0)), f.num(s(1))
    types = f.match(*[(guards[k], f.eq(t(r(0)), ty(res))) for k, res in cases.items()])
    values = f.match(*[(guards[k], f.eq(r(0), _mk(res, f.op(_ARITH_OP[op], a, b))))
                       for k, res in cases.items()])
    fails = []
    for k, res in cases.items():
        if res == m.MUTEZ:
            e = f.op(_ARITH_OP[op], a, b)
            fails.append(f.and_(guards[k], f.or_(f.lt(e, 0), f.gt(e, m.MUTEZ_MAX))))
    return _std(op, 2, 1, [_guard(guards.values())], [types, values],
                may_fail=bool(fails), fails_if=f.or_(*fails) if fails else None)


def _ediv():
    cases = ARITH["EDIV"]
    a, b = f.num(s(0)), f.num(s(1))
    types, values = [], []
    for k, res in cases.items():
        g = _types_are(m.Ty(k[0]), m.Ty(k[1]))
        q_ty, r_ty = res.args[0].args
        quot = f.op("some", f.op("mk_pair", _mk(q_ty, f.op("div", a, b)), _mk(r_ty, f.op("mod", a, b))))
        types.append((g, f.eq(t(r(0)), ty(res))))
        values.append((g, f.and_(f.implies(f.eq(b, 0), f.not_(f.op("is_some", r(0)))),
                                 f.implies(f.ne(b, 0), f.eq(r(0), quot)))))
    guards = [g for g, _ in types]
    return _std("EDIV", 2, 1, [_guard(guards)], [f.match(*types), f.match(*values)])


_LOGIC = {"AND": ("and", "band"), "OR": ("or", "bor"), "XOR": ("ne", "bxor")}


def _logic(op):
    cases = ARITH[op]
    types, values = [], []
    for k, res in cases.items():
        g = _types_are(m.Ty(k[0]), m.Ty(k[1]))
        types.append((g, f.eq(t(r(0)), ty(res))))
        if res == m.BOOL:
            v = f.op("mk_bool", f.op(_LOGIC[op][0], f.op("truth", s(0)), f.op("truth", s(1))))
        else:
            v = f.op("mk_nat", f.op(_LOGIC[op][1], f.num(s(0)), f.num(s(1))))
        values.append((g, f.eq(r(0), v)))
    return _std(op, 2, 1, [_guard([g for g, _ in types])], [f.match(*types), f.match(*values)])


_SIGN = {"EQ": "eq", "NEQ": "ne", "LT": "lt", "LE": "le", "GT": "gt", "GE": "ge"}


def _unary(op, cases):
    """*cases*: list of (operand type, result type, result value formula)."""
    types, values = [], []
    for a, res, val in cases:
        g = f.eq(t(s(0)), ty(a))
        types.append((g, f.eq(t(r(0)), ty(res))))
        values.append((g, val))
    return _std(op, 1, 1, [_guard([g for g, _ in types])], [f.match(*types), f.match(*values)])


def _compare_clauses(pred=None):
    requires = [f.and_(f.eq(t(s(0)), t(s(1))), _comparable(t(s(0))))]
    c = f.op("compare", s(0), s(1))
    if pred is None:
        return requires, [f.eq(t(r(0)), ty(m.INT)), f.eq(r(0), f.op("mk_int", c))]
    return requires, [f.eq(t(r(0)), ty(m.BOOL)), f.eq(r(0), f.op("mk_bool", f.op(pred, c, 0)))]


def _abstract(op, arg_guard, res_ty, pops=1):
    return _std(op, pops, 1, [arg_guard], [f.eq(t(r(0)), ty(res_ty))])


def _context(op, name, res_ty):
    var = f.Var(name, f.VALUE)
    tclause = f.eq(t(r(0)), t(var)) if res_ty is None else f.eq(t(r(0)), ty(res_ty))
    return _std(op, 0, 1, [], [tclause, f.eq(r(0), var)])


def _dig(op):
    n1 = f.add(N, 1)
    if op == "DIG":
        moved = [f.eq(r(0), f.slot(S, N)), f.eq(t(r(0)), t(f.slot(S, N)))]
        body = [f.forall("i", 1, n1, f.eq(f.slot(R, I), f.slot(S, f.sub(I, 1)))),
                f.forall("i", 1, n1, f.eq(t(f.slot(R, I)), t(f.slot(S, f.sub(I, 1)))))]
    else:
        moved = [f.eq(f.slot(R, N), s(0)), f.eq(t(f.slot(R, N)), t(s(0)))]
        body = [f.forall("i", 0, N, f.eq(f.slot(R, I), f.slot(S, f.add(I, 1)))),
                f.forall("i", 0, N, f.eq(t(f.slot(R, I)), t(f.slot(S, f.add(I, 1)))))]
    frame = (f.forall("i", n1, f.length(R), f.eq(f.slot(R, I), f.slot(S, I))),
             f.forall("i", n1, f.length(R), f.eq(t(f.slot(R, I)), t(f.slot(S, I)))))
    count = (lambda o, st: o["n"] + 1)
    return OpcodeContract(op, (f.gt(FUEL, 0), f.ge(N, 0), f.ge(f.length(S), n1)),
                          (f.eq(f.length(R), f.length(S)),) + tuple(moved + body) + frame,
                          count, count, operands=("n",))


def _dup():
    requires = (f.gt(FUEL, 0), f.ge(N, 1), f.ge(f.length(S), N))
    picked = f.slot(S, f.sub(N, 1))
    ensures = (_length(0, 1), f.eq(r(0), picked), f.eq(t(r(0)), t(picked))) + _frame(0, 1)
    return OpcodeContract("DUP", requires, ensures, 0, 1, operands=("n",))


def _drop():
    requires = (f.gt(FUEL, 0), f.ge(N, 0), f.ge(f.length(S), N))
    ensures = (f.eq(f.length(R), f.sub(f.length(S), N)),
               f.forall("i", 0, f.length(R), f.eq(f.slot(R, I), f.slot(S, f.add(I, N)))),
               f.forall("i", 0, f.length(R), f.eq(t(f.slot(R, I)), t(f.slot(S, f.add(I, N))))))
    return OpcodeContract("DROP", requires, ensures, lambda o, st: o["n"], 0, operands=("n",))


def _collections():
    k, c = s(0), s(1)
    ck = t(c)
    set_case = f.and_(f.ty_is(ck, "set"), f.eq(f.op("ty_arg", ck, 0), t(k)))
    map_case = f.and_(f.or_(f.ty_is(ck, "map"), f.ty_is(ck, "big_map")), f.eq(f.op("ty_arg", ck, 0), t(k)))
    mem = _std("MEM", 2, 1, [_guard([set_case, map_case])],
               [f.eq(t(r(0)), ty(m.BOOL)), f.eq(r(0), f.op("mk_bool", f.op("mem", k, c)))])
    get = _std("GET", 2, 1, [_guard([map_case])],
               [f.eq(t(r(0)), f.ty_mk("option", f.op("ty_arg", ck, 1))), f.eq(r(0), f.op("get", k, c))])
    coll = t(s(2))
    upd_set = f.and_(f.ty_is(coll, "set"), f.eq(f.op("ty_arg", coll, 0), t(s(0))),
                     f.eq(t(s(1)), ty(m.BOOL)))
    upd_map = f.and_(f.or_(f.ty_is(coll, "map"), f.ty_is(coll, "big_map")),
                     f.eq(f.op("ty_arg", coll, 0), t(s(0))),
                     f.eq(t(s(1)), f.ty_mk("option", f.op("ty_arg", coll, 1))))
    update = _std("UPDATE", 3, 1, [_guard([upd_set, upd_map])],
                  [f.eq(t(r(0)), coll), f.eq(r(0), f.op("update", s(0), s(1), s(2)))])
    sized = [f.ty_is(t(s(0)), x) for x in ("string", "bytes", "list", "set", "map")]
    size = _std("SIZE", 1, 1, [_guard(sized)],
                [f.eq(t(r(0)), ty(m.NAT)), f.eq(r(0), f.op("mk_nat", f.op("size", s(0))))])
    return [mem, get, update, size]


def _concat():
    pair_case = f.and_(f.eq(t(s(0)), t(s(1))), f.or_(f.ty_is(t(s(0)), "string"), f.ty_is(t(s(0)), "bytes")))
    list_case = f.or_(f.eq(t(s(0)), ty(m.list_(m.STRING))), f.eq(t(s(0)), ty(m.list_(m.BYTES))))
    binary = (_length(2, 1), f.eq(t(r(0)), t(s(0))), f.eq(r(0), f.op("concat", s(0), s(1)))) + _frame(2, 1)
    unary = (_length(1, 1), f.eq(t(r(0)), f.op("ty_arg", t(s(0)), 0)),
             f.eq(r(0), f.op("concat_list", s(0)))) + _frame(1, 1)
    # the list form is listed first: its guard does not read s[1]
    requires = (f.gt(FUEL, 0), f.ge(f.length(S), 1),
                f.match((list_case, f.TRUE), (f.ge(f.length(S), 2), pair_case)))
    ensures = (f.match((list_case, f.and_(*unary)), (f.TRUE, f.and_(*binary))),)

    def pops(o, st):
        return 1 if st is not None and st[0].name == "list" else 2
    return OpcodeContract("CONCAT", requires, ensures, pops, 1)


def _build():
    table = {}

    def put(c):
        table[c.opcode] = c

    for op in ("ADD", "SUB", "MUL"):
        put(_arith(op))
    put(_ediv())
    for op in ("AND", "OR", "XOR"):
        put(_logic(op))
    x, bx = f.num(s(0)), f.op("truth", s(0))
    put(_unary("NEG", [(m.INT, m.INT, f.eq(r(0), f.op("mk_int", f.op("neg", x)))),
                       (m.NAT, m.INT, f.eq(r(0), f.op("mk_int", f.op("neg", x))))]))
    put(_unary("ABS", [(m.INT, m.NAT, f.eq(r(0), f.op("mk_nat", f.op("abs", x))))]))
    put(_unary("ISNAT", [(m.INT, m.option(m.NAT), f.and_(
        f.implies(f.ge(x, 0), f.eq(r(0), f.op("some", f.op("mk_nat", x)))),
        f.implies(f.lt(x, 0), f.not_(f.op("is_some", r(0))))))]))
    put(_unary("INT", [(m.NAT, m.INT, f.eq(r(0), f.op("mk_int", x)))]))
    put(_unary("NOT", [(m.BOOL, m.BOOL, f.eq(r(0), f.op("mk_bool", f.not_(bx)))),
                       (m.NAT, m.INT, f.eq(r(0), f.op("mk_int", f.sub(f.op("neg", x), 1)))),
                       (m.INT, m.INT, f.eq(r(0), f.op("mk_int", f.sub(f.op("neg", x), 1))))]))
    for op, pred in _SIGN.items():
        put(_unary(op, [(m.INT, m.BOOL, f.eq(r(0), f.op("mk_bool", f.op(pred, x, 0))))]))

    req, ens = _compare_clauses()
    put(_std("COMPARE", 2, 1, req, ens))
    for op, pred in _SIGN.items():
        req, ens = _compare_clauses(pred)
        put(_std("CMP" + op, 2, 1, req, ens))

    is_pair = f.ty_is(t(s(0)), "pair")
    for op, k in (("CAR", 0), ("CDR", 1)):
        put(_std(op, 1, 1, [is_pair], [f.eq(t(r(0)), f.op("ty_arg", t(s(0)), k)),
                                       f.eq(r(0), f.op(op.lower(), s(0)))]))
    put(_std("UNPAIR", 1, 2, [is_pair], [
        f.eq(t(r(0)), f.op("ty_arg", t(s(0)), 0)), f.eq(r(0), f.op("car", s(0))),
        f.eq(t(r(1)), f.op("ty_arg", t(s(0)), 1)), f.eq(r(1), f.op("cdr", s(0)))]))
    put(_std("PAIR", 2, 1, [], [f.eq(t(r(0)), f.ty_mk("pair", t(s(0)), t(s(1)))),
                                f.eq(r(0), f.op("mk_pair", s(0), s(1)))]))
    put(_std("SWAP", 2, 2, [], [f.eq(r(0), s(1)), f.eq(t(r(0)), t(s(1))),
                                f.eq(r(1), s(0)), f.eq(t(r(1)), t(s(0)))]))
    put(_dup())
    put(_drop())
    put(_dig("DIG"))
    put(_dig("DUG"))
    put(_std("PUSH", 0, 1, [f.eq(t(V), TY)], [f.eq(t(r(0)), TY), f.eq(r(0), V)], operands=("ty", "v")))
    put(_std("UNIT", 0, 1, [], [f.eq(t(r(0)), ty(m.UNIT)), f.eq(r(0), f.op("unit"))]))
    put(_std("NIL", 0, 1, [], [f.eq(t(r(0)), f.ty_mk("list", TY)), f.eq(r(0), f.op("nil", TY))],
             operands=("ty",)))
    put(_std("NONE", 0, 1, [], [f.eq(t(r(0)), f.ty_mk("option", TY)), f.eq(r(0), f.op("none", TY))],
             operands=("ty",)))
    put(_std("SOME", 1, 1, [], [f.eq(t(r(0)), f.ty_mk("option", t(s(0)))),
                                f.eq(r(0), f.op("some", s(0)))]))
    put(_std("LEFT", 1, 1, [], [f.eq(t(r(0)), f.ty_mk("or", t(s(0)), TY)),
                                f.eq(r(0), f.op("left", s(0), TY))], operands=("ty",)))
    put(_std("RIGHT", 1, 1, [], [f.eq(t(r(0)), f.ty_mk("or", TY, t(s(0)))),
                                 f.eq(r(0), f.op("right", s(0), TY))], operands=("ty",)))
    put(_std("CONS", 2, 1, [f.eq(t(s(1)), f.ty_mk("list", t(s(0))))],
             [f.eq(t(r(0)), t(s(1))), f.eq(r(0), f.op("cons", s(0), s(1)))]))
    for c in _collections():
        put(c)
    put(_concat())
    put(OpcodeContract("FAILWITH", _base(1), (f.FALSE,), 1, 0, may_fail=True, fails_if=f.TRUE))

    is_bytes = f.eq(t(s(0)), ty(m.BYTES))
    for op in ("SHA256", "SHA512", "BLAKE2B"):
        put(_abstract(op, is_bytes, m.BYTES))
    put(_abstract("HASH_KEY", f.eq(t(s(0)), ty(m.KEY)), m.KEY_HASH))
    put(_abstract("CHECK_SIGNATURE", _types_are(m.KEY, m.SIGNATURE, m.BYTES), m.BOOL, pops=3))
    put(_abstract("PACK", f.not_(f.ty_is(t(s(0)), "operation")), m.BYTES))
    put(_std("UNPACK", 1, 1, [is_bytes], [f.eq(t(r(0)), f.ty_mk("option", TY))], operands=("ty",)))

    for op, name, res in (("AMOUNT", "amount", m.MUTEZ), ("BALANCE", "balance", m.MUTEZ),
                          ("NOW", "now", m.TIMESTAMP), ("SENDER", "sender", m.ADDRESS),
                          ("SOURCE", "source", m.ADDRESS), ("CHAIN_ID", "chain_id", m.CHAIN_ID),
                          ("SELF", "self", None)):
        put(_context(op, name, res))

    put(_std("TRANSFER_TOKENS", 3, 1,
             [f.and_(f.eq(t(s(1)), ty(m.MUTEZ)), f.eq(t(s(2)), f.ty_mk("contract", t(s(0)))))],
             [f.eq(t(r(0)), ty(m.OPERATION)), f.eq(r(0), f.op("transfer_tokens", s(0), s(1), s(2)))]))
    put(_std("SET_DELEGATE", 1, 1, [f.eq(t(s(0)), ty(m.option(m.KEY_HASH)))],
             [f.eq(t(r(0)), ty(m.OPERATION)), f.eq(r(0), f.op("set_delegate", s(0)))]))
    return table


CONTRACTS = _build()


def contract_of(opcode):
    try:
        return CONTRACTS[opcode]
    except KeyError:
        raise FormulaError(f"no contract for opcode {opcode}") from None


def contract_key(instr):
    """The table key for an instruction node, or None for structural nodes.

    Expanded macros are looked up under the macro's own name.
    """
    if instr.origin is not None:
        return instr.origin
    if instr.op in CONTRACTS:
        return instr.op
    return None


# ---------------------------------------------------------------------------
# Rendering and audits


def dump(c):
    lines = [f"opcode {c.opcode}"]
    if c.operands:
        lines.append(f"  operands {', '.join(c.operands)}")
    lines += [f"  requires {f.render(x)}" for x in c.requires]
    lines += [f"  ensures  {f.render(x)}" for x in c.ensures]
    if c.may_fail:
        lines.append(f"  fails when {f.render(c.fails_if)}")
    return "\n".join(lines) + "\n"


def _slot_indices(clause, env):
    """Indices of ``result`` slots a clause constrains, under concrete *env*."""
    found = set()

    def visit(g, ranges):
        if isinstance(g, f.Forall):
            if g.lo is None or g.hi is None:
                return
            lo = f.compile_formula(g.lo)(env)
            hi = f.compile_formula(g.hi)(env)
            visit(g.body, {**ranges, g.var: range(lo, hi)})
            return
        if isinstance(g, f.Op) and g.name == "slot" and g.args[0] == R:
            idx = g.args[1]
            qs = [v for v in f.free_vars(idx) if v in ranges]
            if not qs:
                found.add(f.compile_formula(idx)(env))
            elif len(qs) == 1:
                fn = f.compile_formula(idx)
                for k in ranges[qs[0]]:
                    found.add(fn({**env, qs[0]: k}))
        for c in f.children(g):
            visit(c, ranges)

    visit(clause, {})
    return found


def frame_coverage(contract, env):
    """Result slots no clause mentions (empty means the contract pins every slot).

    *env* must bind ``s`` and ``result`` to concrete stacks plus any operands.
    """
    covered = set()
    for clause in contract.ensures:
        covered |= _slot_indices(clause, env)
    return sorted(set(range(len(env["result"]))) - covered)

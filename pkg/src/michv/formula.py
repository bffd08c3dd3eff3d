"""First-order assertion language over stacks, values, types and integers.

Formulas are immutable trees of six node kinds:

* ``Lit``    a constant (int, bool, Value, Ty or a string tag)
* ``Var``    a free name with a declared sort
* ``Op``     an application of a built-in operator (see ``OPS``)
* ``Call``   an application of a user logic function (int -> int)
* ``Forall`` a quantifier over an integer index, bounded ``lo <= i < hi``
  (``lo``/``hi`` may be None for an unbounded quantifier)
* ``Match``  a guarded case split; the first arm whose guard holds decides,
  and when no guard holds the match is false

The same trees feed the runtime checker (``eval_formula``), the human
renderer, the verification-language renderer and the SMT backend.
"""

from dataclasses import dataclass

from michv import model as m
from michv.errors import FormulaError

INT, BOOL, VALUE, TYPE, STACK, STR = "int", "bool", "value", "type", "stack", "str"
SORTS = (INT, BOOL, VALUE, TYPE, STACK, STR)


@dataclass(frozen=True)
class Formula:
    pass


@dataclass(frozen=True)
class Lit(Formula):
    value: object
    sort: str


@dataclass(frozen=True)
class Var(Formula):
    name: str
    sort: str


@dataclass(frozen=True)
class Op(Formula):
    name: str
    args: tuple


@dataclass(frozen=True)
class Call(Formula):
    fn: str
    args: tuple


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    lo: object  # Formula or None
    hi: object
    body: Formula


@dataclass(frozen=True)
class Match(Formula):
    arms: tuple  # ((guard, body), ...)


# name -> (argument sorts, result sort); "*" is a sort variable shared by the
# marked positions, a trailing "..." makes the operator variadic.
OPS = {
    "and": ((BOOL, "..."), BOOL),
    "or": ((BOOL, "..."), BOOL),
    "not": ((BOOL,), BOOL),
    "implies": ((BOOL, BOOL), BOOL),
    "iff": ((BOOL, BOOL), BOOL),
    "eq": (("*", "*"), BOOL),
    "ne": (("*", "*"), BOOL),
    "lt": ((INT, INT), BOOL),
    "le": ((INT, INT), BOOL),
    "gt": ((INT, INT), BOOL),
    "ge": ((INT, INT), BOOL),
    "add": ((INT, INT), INT),
    "sub": ((INT, INT), INT),
    "mul": ((INT, INT), INT),
    "div": ((INT, INT), INT),
    "mod": ((INT, INT), INT),
    "neg": ((INT,), INT),
    "abs": ((INT,), INT),
    "band": ((INT, INT), INT),
    "bor": ((INT, INT), INT),
    "bxor": ((INT, INT), INT),
    "ite": ((BOOL, "*", "*"), "*"),
    "len": ((STACK,), INT),
    "slot": ((STACK, INT), VALUE),
    "typ": ((VALUE,), TYPE),
    "ty_is": ((TYPE, STR), BOOL),
    "ty_arg": ((TYPE, INT), TYPE),
    "ty_mk": ((STR, TYPE, "..."), TYPE),
    "num": ((VALUE,), INT),
    "truth": ((VALUE,), BOOL),
    "mk_int": ((INT,), VALUE),
    "mk_nat": ((INT,), VALUE),
    "mk_mutez": ((INT,), VALUE),
    "mk_timestamp": ((INT,), VALUE),
    "mk_bool": ((BOOL,), VALUE),
    "unit": ((), VALUE),
    "car": ((VALUE,), VALUE),
    "cdr": ((VALUE,), VALUE),
    "mk_pair": ((VALUE, VALUE), VALUE),
    "some": ((VALUE,), VALUE),
    "none": ((TYPE,), VALUE),
    "is_some": ((VALUE,), BOOL),
    "unsome": ((VALUE,), VALUE),
    "left": ((VALUE, TYPE), VALUE),
    "right": ((VALUE, TYPE), VALUE),
    "is_left": ((VALUE,), BOOL),
    "unleft": ((VALUE,), VALUE),
    "unright": ((VALUE,), VALUE),
    "compare": ((VALUE, VALUE), INT),
    "nil": ((TYPE,), VALUE),
    "cons": ((VALUE, VALUE), VALUE),
    "is_cons": ((VALUE,), BOOL),
    "hd": ((VALUE,), VALUE),
    "tl": ((VALUE,), VALUE),
    "size": ((VALUE,), INT),
    "concat": ((VALUE, VALUE), VALUE),
    "concat_list": ((VALUE,), VALUE),
    "mem": ((VALUE, VALUE), BOOL),
    "get": ((VALUE, VALUE), VALUE),
    "update": ((VALUE, VALUE, VALUE), VALUE),
    "transfer_tokens": ((VALUE, VALUE, VALUE), VALUE),
    "set_delegate": ((VALUE,), VALUE),
}

# ---------------------------------------------------------------------------
# Construction helpers


def lit(v):
    if isinstance(v, bool):
        return Lit(v, BOOL)
    if isinstance(v, int):
        return Lit(v, INT)
    if isinstance(v, m.Value):
        return Lit(v, VALUE)
    if isinstance(v, m.Ty):
        return Lit(v, TYPE)
    if isinstance(v, str):
        return Lit(v, STR)
    raise FormulaError(f"cannot make a literal from {v!r}")


def _f(x):
    return x if isinstance(x, Formula) else lit(x)


def op(name, *args):
    return Op(name, tuple(_f(a) for a in args))


TRUE, FALSE = Lit(True, BOOL), Lit(False, BOOL)
S = Var("s", STACK)
RESULT = Var("result", STACK)
FUEL = Var("fuel", INT)


def length(s):
    return op("len", s)


def slot(s, i):
    return op("slot", s, i)


def typ(v):
    return op("typ", v)


def num(v):
    return op("num", v)


def eq(a, b):
    return op("eq", a, b)


def ne(a, b):
    return op("ne", a, b)


def lt(a, b):
    return op("lt", a, b)


def le(a, b):
    return op("le", a, b)


def gt(a, b):
    return op("gt", a, b)


def ge(a, b):
    return op("ge", a, b)


def add(a, b):
    return op("add", a, b)


def sub(a, b):
    return op("sub", a, b)


def mul(a, b):
    return op("mul", a, b)


def and_(*xs):
    xs = [_f(x) for x in xs]
    if len(xs) == 1:
        return xs[0]
    return Op("and", tuple(xs)) if xs else TRUE


def or_(*xs):
    xs = [_f(x) for x in xs]
    if len(xs) == 1:
        return xs[0]
    return Op("or", tuple(xs)) if xs else FALSE


def not_(a):
    return op("not", a)


def implies(a, b):
    return op("implies", a, b)


def iff(a, b):
    return op("iff", a, b)


def ite(c, a, b):
    return op("ite", c, a, b)


def call(fn, *args):
    return Call(fn, tuple(_f(a) for a in args))


def forall(var, lo, hi, body):
    return Forall(var, None if lo is None else _f(lo), None if hi is None else _f(hi), body)


def match(*arms):
    return Match(tuple((_f(g), _f(b)) for g, b in arms))


def ty_is(t, name):
    return op("ty_is", t, Lit(name, STR))


def ty_mk(name, *args):
    return Op("ty_mk", (Lit(name, STR),) + tuple(_f(a) for a in args))


# ---------------------------------------------------------------------------
# Traversal


def children(f):
    if isinstance(f, (Op, Call)):
        return f.args
    if isinstance(f, Forall):
        return tuple(x for x in (f.lo, f.hi, f.body) if x is not None)
    if isinstance(f, Match):
        return tuple(x for arm in f.arms for x in arm)
    return ()


def walk(f):
    """Pre-order iteration over every sub-formula."""
    todo = [f]
    while todo:
        g = todo.pop()
        yield g
        todo.extend(reversed(children(g)))


def free_vars(f, bound=frozenset()):
    if isinstance(f, Var):
        return set() if f.name in bound else {f.name}
    if isinstance(f, Forall):
        out = set()
        for x in (f.lo, f.hi):
            if x is not None:
                out |= free_vars(x, bound)
        return out | free_vars(f.body, bound | {f.var})
    out = set()
    for c in children(f):
        out |= free_vars(c, bound)
    return out


def calls(f):
    return {g.fn for g in walk(f) if isinstance(g, Call)}


def substitute(f, mapping):
    """Replace free variables by formulas (capture is impossible: bound names are indices)."""
    if isinstance(f, Var):
        return mapping.get(f.name, f)
    if isinstance(f, Op):
        return Op(f.name, tuple(substitute(a, mapping) for a in f.args))
    if isinstance(f, Call):
        return Call(f.fn, tuple(substitute(a, mapping) for a in f.args))
    if isinstance(f, Forall):
        inner = {k: v for k, v in mapping.items() if k != f.var}
        return Forall(f.var,
                      None if f.lo is None else substitute(f.lo, mapping),
                      None if f.hi is None else substitute(f.hi, mapping),
                      substitute(f.body, inner))
    if isinstance(f, Match):
        return Match(tuple((substitute(g, mapping), substitute(b, mapping)) for g, b in f.arms))
    return f


# ---------------------------------------------------------------------------
# Sorts


def sort_of(f, logic=None):
    """Infer and check the sort of *f*, raising FormulaError on misuse."""
    if isinstance(f, (Lit, Var)):
        if f.sort not in SORTS:
            raise FormulaError(f"unknown sort {f.sort!r}")
        return f.sort
    if isinstance(f, Call):
        fn = (logic or {}).get(f.fn)
        if fn is None:
            raise FormulaError(f"unknown logic function {f.fn}")
        if len(f.args) != len(fn.params):
            raise FormulaError(f"{f.fn} expects {len(fn.params)} argument(s), got {len(f.args)}")
        for a in f.args:
            if sort_of(a, logic) != INT:
                raise FormulaError(f"argument of {f.fn} must be an int")
        return INT
    if isinstance(f, Forall):
        for x in (f.lo, f.hi):
            if x is not None and sort_of(x, logic) != INT:
                raise FormulaError("quantifier bounds must be ints")
        if sort_of(f.body, logic) != BOOL:
            raise FormulaError("quantifier body must be a formula")
        return BOOL
    if isinstance(f, Match):
        for g, b in f.arms:
            if sort_of(g, logic) != BOOL or sort_of(b, logic) != BOOL:
                raise FormulaError("match guards and bodies must be formulas")
        return BOOL
    if isinstance(f, Op):
        sig = OPS.get(f.name)
        if sig is None:
            raise FormulaError(f"unknown operator {f.name}")
        params, result = sig
        got = [sort_of(a, logic) for a in f.args]
        if params and params[-1] == "...":
            fixed = params[:-1]
            if len(got) < len(fixed):
                raise FormulaError(f"{f.name} needs at least {len(fixed)} argument(s)")
            params = fixed + (fixed[-1],) * (len(got) - len(fixed))
        if len(params) != len(got):
            raise FormulaError(f"{f.name} expects {len(params)} argument(s), got {len(got)}")
        var = None
        for want, have in zip(params, got):
            if want == "*":
                if var is None:
                    var = have
                elif var != have:
                    raise FormulaError(f"{f.name} mixes sorts {var} and {have}")
            elif want != have:
                raise FormulaError(f"{f.name} expects {want}, got {have}")
        return var if result == "*" else result
    raise FormulaError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Evaluation


def _num(v):
    if isinstance(v, (m.IntV, m.NatV, m.MutezV, m.TimestampV)):
        return v.value
    raise FormulaError(f"num applied to non-numeric {m.format_value(v)}")


def _truth(v):
    if isinstance(v, m.BoolV):
        return v.value
    raise FormulaError(f"truth applied to non-boolean {m.format_value(v)}")


def _slot(s, i):
    if isinstance(s, m.Value) or not 0 <= i < len(s):
        raise FormulaError(f"stack index {i} out of range")
    return s[i]


def _ediv_q(a, b):
    r = a % abs(b)
    return (a - r) // b


def _ediv_r(a, b):
    return a % abs(b)


def _need(cls, v, what):
    if not isinstance(v, cls):
        raise FormulaError(f"{what} applied to {m.format_value(v)}")
    return v


def _mk(ctor):
    def build(x):
        try:
            return ctor(x)
        except (ValueError, TypeError) as e:
            raise FormulaError(str(e)) from None
    return build


def _car(v):
    return _need(m.PairV, v, "car").left


def _cdr(v):
    return _need(m.PairV, v, "cdr").right


def _unsome(v):
    return _need(m.SomeV, v, "unsome").value


def _unleft(v):
    return _need(m.LeftV, v, "unleft").value


def _unright(v):
    return _need(m.RightV, v, "unright").value


def _items(v):
    if isinstance(v, (m.ListV, m.SetV)):
        return v.items
    if isinstance(v, m.MapV):
        return v.items
    raise FormulaError(f"not a collection: {m.format_value(v)}")


def _size(v):
    if isinstance(v, (m.StringV, m.BytesV)):
        return len(v.value)
    return len(_items(v))


def _concat(a, b):
    if isinstance(a, m.StringV) and isinstance(b, m.StringV):
        return m.StringV(a.value + b.value)
    if isinstance(a, m.BytesV) and isinstance(b, m.BytesV):
        return m.BytesV(a.value + b.value)
    raise FormulaError("concat expects two strings or two byte sequences")


def _concat_list(v):
    v = _need(m.ListV, v, "concat_list")
    if v.elem == m.STRING:
        return m.StringV("".join(x.value for x in v.items))
    return m.BytesV(b"".join(x.value for x in v.items))


# collection lookups scan linearly so they stay independent of the
# interpreter's ordered-search helpers

def _mem(k, coll):
    if isinstance(coll, m.SetV):
        return any(x == k for x in coll.items)
    if isinstance(coll, m.MapV):
        return any(x == k for x, _ in coll.items)
    raise FormulaError("mem expects a set or map")


def _get(k, coll):
    coll = _need(m.MapV, coll, "get")
    for x, v in coll.items:
        if x == k:
            return m.SomeV(v)
    return m.NoneV(coll.val)


def _update(k, v, coll):
    if isinstance(coll, m.SetV):
        rest = [x for x in coll.items if x != k]
        if _truth(v):
            rest.append(k)
        rest.sort(key=_sort_key)
        return m.SetV(tuple(rest), coll.elem)
    if isinstance(coll, m.MapV):
        rest = [(x, y) for x, y in coll.items if x != k]
        if isinstance(v, m.SomeV):
            rest.append((k, v.value))
        rest.sort(key=lambda kv: _sort_key(kv[0]))
        return m.MapV(tuple(rest), coll.key, coll.val, coll.big)
    raise FormulaError("update expects a set or map")


class _Cmp:
    __slots__ = ("v",)

    def __init__(self, v):
        self.v = v

    def __lt__(self, other):
        return m.compare(self.v, other.v) < 0


def _sort_key(v):
    return _Cmp(v)


def _compare(a, b):
    try:
        return m.compare(a, b)
    except TypeError as e:
        raise FormulaError(str(e)) from None


def _cons(h, t):
    t = _need(m.ListV, t, "cons")
    return m.ListV((h,) + t.items, t.elem)


def _is_cons(v):
    return bool(_need(m.ListV, v, "is_cons").items)


def _hd(v):
    v = _need(m.ListV, v, "hd")
    if not v.items:
        raise FormulaError("hd of an empty list")
    return v.items[0]


def _tl(v):
    v = _need(m.ListV, v, "tl")
    if not v.items:
        raise FormulaError("tl of an empty list")
    return m.ListV(v.items[1:], v.elem)


def _ty_arg(t, i):
    if not 0 <= i < len(t.args):
        raise FormulaError(f"type {t} has no argument {i}")
    return t.args[i]


def _ty_mk(name, *args):
    try:
        return m.Ty(name, tuple(args))
    except (ValueError, TypeError) as e:
        raise FormulaError(str(e)) from None


def _div(a, b):
    if b == 0:
        raise FormulaError("division by zero")
    return _ediv_q(a, b)


def _mod(a, b):
    if b == 0:
        raise FormulaError("division by zero")
    return _ediv_r(a, b)


_EVAL = {
    "not": lambda a: not a,
    "iff": lambda a, b: a == b,
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
    "lt": lambda a, b: a < b,
    "le": lambda a, b: a <= b,
    "gt": lambda a, b: a > b,
    "ge": lambda a, b: a >= b,
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": _div,
    "mod": _mod,
    "neg": lambda a: -a,
    "abs": abs,
    "band": lambda a, b: a & b,
    "bor": lambda a, b: a | b,
    "bxor": lambda a, b: a ^ b,
    "len": lambda s: len(s),
    "slot": _slot,
    "typ": m.typ_infer,
    "ty_is": lambda t, name: t.name == name,
    "ty_arg": _ty_arg,
    "ty_mk": _ty_mk,
    "num": _num,
    "truth": _truth,
    "mk_int": _mk(m.IntV),
    "mk_nat": _mk(m.NatV),
    "mk_mutez": _mk(m.MutezV),
    "mk_timestamp": _mk(m.TimestampV),
    "mk_bool": m.BoolV,
    "unit": lambda: m.UNIT_V,
    "car": _car,
    "cdr": _cdr,
    "mk_pair": m.PairV,
    "some": m.SomeV,
    "none": m.NoneV,
    "is_some": lambda v: isinstance(v, m.SomeV),
    "unsome": _unsome,
    "left": m.LeftV,
    "right": m.RightV,
    "is_left": lambda v: isinstance(v, m.LeftV),
    "unleft": _unleft,
    "unright": _unright,
    "compare": _compare,
    "nil": lambda t: m.ListV((), t),
    "cons": _cons,
    "is_cons": _is_cons,
    "hd": _hd,
    "tl": _tl,
    "size": _size,
    "concat": _concat,
    "concat_list": _concat_list,
    "mem": _mem,
    "get": _get,
    "update": _update,
    "transfer_tokens": lambda p, amt, c: m.OperationV("transfer_tokens", (p, amt, c)),
    "set_delegate": lambda d: m.OperationV("set_delegate", (d,)),
}


class _Compiler:
    """Turns formulas into Python closures over an environment dict."""

    def __init__(self, logic):
        self.logic = logic or {}
        self.bodies = {}

    def function(self, name):
        fn = self.logic.get(name)
        if fn is None:
            raise FormulaError(f"unknown logic function {name}")
        if name not in self.bodies:
            self.bodies[name] = None  # placeholder so recursion finds it
            self.bodies[name] = self.compile(fn.body)
        return fn

    def compile(self, f):
        if isinstance(f, Lit):
            v = f.value
            return lambda env: v
        if isinstance(f, Var):
            name = f.name

            def var(env):
                try:
                    return env[name]
                except KeyError:
                    raise FormulaError(f"unbound name {name}") from None
            return var
        if isinstance(f, Op):
            return self._op(f)
        if isinstance(f, Call):
            return self._call(f)
        if isinstance(f, Forall):
            return self._forall(f)
        if isinstance(f, Match):
            arms = [(self.compile(g), self.compile(b)) for g, b in f.arms]

            def match_(env):
                for g, b in arms:
                    if g(env):
                        return b(env)
                return False
            return match_
        raise FormulaError(f"not a formula: {f!r}")

    def _op(self, f):
        args = [self.compile(a) for a in f.args]
        name = f.name
        if name == "and":
            if len(args) == 2:
                a, b = args
                return lambda env: bool(a(env)) and bool(b(env))
            return lambda env: all(a(env) for a in args)
        if name == "or":
            if len(args) == 2:
                a, b = args
                return lambda env: bool(a(env)) or bool(b(env))
            return lambda env: any(a(env) for a in args)
        if name == "implies":
            a, b = args
            return lambda env: (not a(env)) or b(env)
        if name == "ite":
            c, a, b = args
            return lambda env: a(env) if c(env) else b(env)
        fn = _EVAL.get(name)
        if fn is None:
            raise FormulaError(f"unknown operator {name}")
        if len(args) == 0:
            return lambda env: fn()
        if len(args) == 1:
            a, = args
            return lambda env: fn(a(env))
        if len(args) == 2:
            a, b = args
            if isinstance(f.args[1], Lit):
                v = f.args[1].value
                return lambda env: fn(a(env), v)
            if isinstance(f.args[0], Lit):
                v = f.args[0].value
                return lambda env: fn(v, b(env))
            return lambda env: fn(a(env), b(env))
        return lambda env: fn(*[a(env) for a in args])

    def _call(self, f):
        fn = self.function(f.fn)
        if len(f.args) != len(fn.params):
            raise FormulaError(f"{f.fn} expects {len(fn.params)} argument(s), got {len(f.args)}")
        args = [self.compile(a) for a in f.args]
        params = fn.params
        bodies = self.bodies
        name = f.fn

        def call_(env):
            return bodies[name](dict(zip(params, [a(env) for a in args])))
        return call_

    def _forall(self, f):
        if f.lo is None or f.hi is None:
            def unbounded(env):
                raise FormulaError("cannot evaluate an unbounded quantifier")
            return unbounded
        lo, hi = self.compile(f.lo), self.compile(f.hi)
        fast = self._frame_forall(f, lo, hi)
        if fast is not None:
            return fast
        body = self.compile(f.body)
        var = f.var

        def forall_(env):
            saved = env.get(var, _MISSING)
            try:
                for i in range(lo(env), hi(env)):
                    env[var] = i
                    if not body(env):
                        return False
                return True
            finally:
                if saved is _MISSING:
                    env.pop(var, None)
                else:
                    env[var] = saved
        return forall_


    def _shifted_slot(self, g, var):
        """(stack, offset) when *g* is ``stack[var + offset]``, else None."""
        if not (isinstance(g, Op) and g.name == "slot"):
            return None
        stack, idx = g.args
        if isinstance(idx, Var) and idx.name == var:
            return self.compile(stack), 0
        if isinstance(idx, Op) and idx.name == "add":
            a, b = idx.args
            if isinstance(b, Var) and b.name == var:
                a, b = b, a
            if isinstance(a, Var) and a.name == var and isinstance(b, Lit) and type(b.value) is int:
                return self.compile(stack), b.value
        return None

    def _frame_forall(self, f, lo, hi):
        """A direct loop for ``forall i. A[i + a] = B[i + b]``, optionally under ``typ``.

        Frame clauses of every opcode contract have this shape and dominate
        runtime checking; the result is the same as the general evaluator.
        """
        body = f.body
        if not (isinstance(body, Op) and body.name == "eq"):
            return None
        left, right = body.args
        wrap = isinstance(left, Op) and left.name == "typ"
        if wrap != (isinstance(right, Op) and right.name == "typ"):
            return None
        if wrap:
            left, right = left.args[0], right.args[0]
        a, b = self._shifted_slot(left, f.var), self._shifted_slot(right, f.var)
        if a is None or b is None:
            return None
        (sa, da), (sb, db) = a, b
        typ_of = m.typ_infer

        def frame(env):
            x, y = sa(env), sb(env)
            for i in range(lo(env), hi(env)):
                u, v = _slot(x, i + da), _slot(y, i + db)
                if wrap:
                    u, v = typ_of(u), typ_of(v)
                if u != v:
                    return False
            return True
        return frame


_MISSING = object()


def compile_formula(f, logic=None):
    """Compile *f* once; the returned callable takes an environment dict."""
    return _Compiler(logic).compile(f)


def make_env(**bindings):
    """Build an evaluation environment, unwrapping Stack objects to tuples."""
    env = {}
    for k, v in bindings.items():
        env[k] = tuple(v.slots) if hasattr(v, "slots") else v
    return env


def eval_formula(f, env, logic=None):
    """Evaluate *f* under *env* (a dict from names to ints, bools, Values, Tys or stacks)."""
    return compile_formula(f, logic)(make_env(**env))


# ---------------------------------------------------------------------------
# Logic functions


@dataclass(frozen=True)
class LogicFunction:
    name: str
    params: tuple
    body: Formula

    def __call__(self, *args, logic=None):
        ctx = dict(logic or {})
        ctx.setdefault(self.name, self)
        return compile_formula(self.body, ctx)(dict(zip(self.params, args)))


def _decreasing_arg(arg, param):
    """True iff *arg* is ``param - k`` with a literal k >= 1."""
    return (isinstance(arg, Op) and arg.name == "sub"
            and arg.args[0] == Var(param, INT)
            and isinstance(arg.args[1], Lit) and isinstance(arg.args[1].value, int)
            and arg.args[1].value >= 1)


def _lower_guard(cond, branch):
    """Parameters that *branch* of ``if cond`` guarantees to exceed a constant."""
    if not (isinstance(cond, Op) and len(cond.args) == 2):
        return set()
    a, b = cond.args
    if not (isinstance(a, Var) and isinstance(b, Lit)):
        return set()
    if branch == 2 and cond.name in ("le", "lt"):
        return {a.name}
    if branch == 1 and cond.name in ("gt", "ge"):
        return {a.name}
    return set()


def check_termination(name, params, body):
    """Reject recursion that is not a bounded descent on some parameter.

    Every recursive call must sit below an ``if p <= c`` (or ``p < c``)
    whose else-branch it lies in, and pass ``p - k`` (k >= 1) for that p.
    """
    def visit(f, guarded):
        if isinstance(f, Call) and f.fn == name:
            ok = any(_decreasing_arg(f.args[i], p) for i, p in enumerate(params) if p in guarded)
            if not ok:
                raise FormulaError(f"recursive call in {name} does not decrease a guarded argument")
        if isinstance(f, Op) and f.name == "ite":
            c, a, b = f.args
            visit(c, guarded)
            visit(a, guarded | _lower_guard(c, 1))
            visit(b, guarded | _lower_guard(c, 2))
            return
        for c in children(f):
            visit(c, guarded)
    visit(body, frozenset())


def declare_logic_function(name, params, body=None, equations=None, logic=None):
    """Declare a recursive int-valued logic function.

    Either give *body* directly or a list of *equations* ``(patterns, rhs)``
    where each pattern is an int literal or the parameter's own name. Literal
    equations are tried in order; the smallest literal for a parameter also
    covers every smaller argument so the function stays total.
    """
    params = tuple(params)
    if body is None:
        body = _from_equations(name, params, equations or [])
    ctx = dict(logic or {})
    fn = LogicFunction(name, params, body)
    ctx[name] = fn
    scope = {Var(p, INT) for p in params}
    for g in walk(body):
        if isinstance(g, Var) and g.sort == INT and g not in scope and not _bound_somewhere(body, g.name):
            raise FormulaError(f"unbound name {g.name} in {name}")
    if sort_of(body, ctx) != INT:
        raise FormulaError(f"body of {name} must be an int term")
    check_termination(name, params, body)
    return fn


def _bound_somewhere(f, name):
    return any(isinstance(g, Forall) and g.var == name for g in walk(f))


def _from_equations(name, params, equations):
    general = None
    cases = []
    for patterns, rhs in equations:
        patterns = tuple(patterns)
        if len(patterns) != len(params):
            raise FormulaError(f"equation for {name} has {len(patterns)} pattern(s), expected {len(params)}")
        if all(p == q for p, q in zip(patterns, params)):
            general = rhs
        else:
            cases.append((patterns, rhs))
    if general is None:
        if cases and not params:
            return cases[-1][1]
        raise FormulaError(f"{name} needs a catch-all equation")
    mins = {}
    for patterns, _ in cases:
        for p, q in zip(patterns, params):
            if isinstance(p, int):
                mins[q] = min(mins.get(q, p), p)
    body = general
    for patterns, rhs in reversed(cases):
        conds = []
        for p, q in zip(patterns, params):
            if isinstance(p, int):
                v = Var(q, INT)
                conds.append(le(v, p) if p == mins[q] else eq(v, p))
            elif p != q:
                raise FormulaError(f"pattern {p!r} is neither a literal nor {q}")
        body = ite(and_(*conds), rhs, body)
    return body


# ---------------------------------------------------------------------------
# Rendering

_INFIX = {
    "eq": "=", "ne": "<>", "lt": "<", "le": "<=", "gt": ">", "ge": ">=",
    "add": "+", "sub": "-", "mul": "*", "div": "/", "mod": "%",
    "implies": "->", "iff": "<->", "and": "and", "or": "or",
}
_PREC = {"implies": 1, "iff": 1, "or": 2, "and": 3, "eq": 4, "ne": 4, "lt": 4, "le": 4,
         "gt": 4, "ge": 4, "add": 5, "sub": 5, "mul": 6, "div": 6, "mod": 6}


def _render_lit(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, m.Value):
        return m.format_value(v)
    if isinstance(v, m.Ty):
        return f"'{v}'" if v.args else str(v)
    if isinstance(v, str):
        return v
    return str(v)


def render(f, prec=0):
    """Human-readable infix rendering (also accepted by the sidecar parser
    for the subset it understands)."""
    if isinstance(f, Lit):
        return _render_lit(f.value) if not (isinstance(f.value, int) and f.value < 0 and prec > 5) \
            else f"({f.value})"
    if isinstance(f, Var):
        return f.name
    if isinstance(f, Call):
        return f"{f.fn}({', '.join(render(a) for a in f.args)})"
    if isinstance(f, Forall):
        text = render(f.body, 1)
        if f.lo is not None:
            text = f"{render(f.lo, 5)} <= {f.var} < {render(f.hi, 5)} -> {text}"
        out = f"forall {f.var}. {text}"
        return f"({out})" if prec > 0 else out
    if isinstance(f, Match):
        arms = " | ".join(f"{render(g, 1)} => {render(b, 1)}" for g, b in f.arms)
        return f"match {{ {arms} | _ => false }}"
    if isinstance(f, Op):
        name = f.name
        if name == "slot":
            return f"{render(f.args[0], 9)}[{render(f.args[1])}]"
        if name == "len":
            return f"len({render(f.args[0])})"
        if name == "not":
            return f"not {render(f.args[0], 7)}"
        if name == "ite":
            c, a, b = f.args
            out = f"if {render(c)} then {render(a)} else {render(b)}"
            return f"({out})" if prec > 0 else out
        if name == "ty_is":
            return f"{render(f.args[0], 9)} is {f.args[1].value}"
        if name in _INFIX:
            p = _PREC[name]
            sep = f" {_INFIX[name]} "
            if name in ("and", "or"):
                parts = [render(a, p + 1) for a in f.args]
            else:
                # right operand binds tighter for non-associative ops
                parts = [render(f.args[0], p + (name == "implies")), render(f.args[1], p + 1)]
            out = sep.join(parts)
            return f"({out})" if prec > p else out
        return f"{name}({', '.join(render(a) for a in f.args)})"
    raise FormulaError(f"not a formula: {f!r}")


# verification-language rendering -------------------------------------------

_WHY_TY = {
    "int": "Int_t", "nat": "Nat_t", "string": "String_t", "bytes": "Bytes_t", "mutez": "Mutez_t",
    "bool": "Bool_t", "key_hash": "Key_hash_t", "timestamp": "Timestamp_t", "address": "Address_t",
    "key": "Key_t", "signature": "Signature_t", "chain_id": "Chain_id_t", "unit": "Unit_t",
    "operation": "Operation_t", "option": "Option_t", "list": "List_t", "pair": "Pair_t",
    "or": "Or_t", "set": "Set_t", "map": "Map_t", "big_map": "Big_map_t", "contract": "Contract_t",
}


def why_type(t):
    """Render a type in the verification language's constructor syntax."""
    name = _WHY_TY[t.name]
    if t.name in m.COMPARABLE:
        return f"(Comparable_t {name} )"
    if not t.args:
        return name
    if len(t.args) == 1:
        return f"({name} {why_type(t.args[0])} )"
    return f"({name} {' '.join(why_type(a) for a in t.args)})"


_WHY_INFIX = {
    "eq": "=", "ne": "<>", "lt": "<", "le": "<=", "gt": ">", "ge": ">=",
    "add": "+", "sub": "-", "mul": "*", "implies": "->", "iff": "<->", "and": "/\\", "or": "\\/",
}


def render_why(f, names=None):
    """Render in the verification language (stack indexing ``(s[i])``,
    ``(length s)``, ``(typ_infer (d (s[i])))``). *names* renames free
    variables. A top-level infix operator is printed without parentheses."""
    names = names or {}

    def r(g):
        if isinstance(g, Lit):
            v = g.value
            if isinstance(v, m.Ty):
                return why_type(v)
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, int):
                return str(v) if v >= 0 else f"({v})"
            if isinstance(v, m.Value):
                return f"(data_of {m.format_value(v)!r})"
            return f'"{v}"'
        if isinstance(g, Var):
            return names.get(g.name, g.name)
        if isinstance(g, Call):
            return f"({g.fn} {' '.join(r(a) for a in g.args)})"
        if isinstance(g, Forall):
            body = r(g.body)
            if g.lo is not None:
                body = f"{r(g.lo)} <= {g.var} < {r(g.hi)} -> {body}"
            return f"(forall {g.var}: int. {body})"
        if isinstance(g, Match):
            return "(" + " else ".join(f"if {r(a)} then {r(b)}" for a, b in g.arms) + " else false)"
        name = g.name
        if name == "slot":
            return f"({r(g.args[0])}[{r(g.args[1])}])"
        if name == "len":
            return f"(length {r(g.args[0])})"
        if name == "typ":
            return f"(typ_infer (d {r(g.args[0])}))"
        if name == "not":
            return f"(not {r(g.args[0])})"
        if name == "ite":
            c, a, b = g.args
            return f"(if {r(c)} then {r(a)} else {r(b)})"
        if name in _WHY_INFIX:
            return "(" + f" {_WHY_INFIX[name]} ".join(r(a) for a in g.args) + ")"
        if name == "div":
            return f"(div {r(g.args[0])} {r(g.args[1])})"
        if name == "mod":
            return f"(mod {r(g.args[0])} {r(g.args[1])})"
        if name == "ty_is":
            return f"(is_{g.args[1].value}_t {r(g.args[0])})"
        if not g.args:
            return name
        return f"({name} {' '.join(r(a) for a in g.args)})"

    out = r(f)
    if isinstance(f, Op) and f.name in _WHY_INFIX:
        out = out[1:-1]
    return out

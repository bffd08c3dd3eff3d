"""Monomorphic verification-condition generation.

The typed program is executed forwards over symbolic stacks. Every slot
carries its static Michelson type, so the contracts' type guards fold away
and their bounded quantifiers unroll; what remains is plain SMT-LIB2 over
integers, booleans and one datatype per instantiated type.

Each primitive instruction checks its contract's preconditions (one VC per
clause), then introduces fresh constants for the slots it pushes and
assumes its postconditions. Branches are joined through a fresh stack;
loops are cut at their invariants.
"""

from dataclasses import dataclass, field

from michv import formula as f
from michv import model as m
from michv.contracts import CONTRACTS, contract_key, operand_env
from michv.errors import VCGenError
from michv.smt import VC, SmtContext, int_lit
from michv.typecheck import BOTTOM, format_path


@dataclass(frozen=True)
class T:
    """A symbolic int or bool term."""

    text: str
    sort: str  # "Int" or "Bool"


@dataclass(frozen=True)
class SV:
    """A symbolic Michelson value of a statically known type."""

    text: str
    ty: m.Ty
    parts: tuple = field(default=(), compare=False)  # components of a known pair


_NUMERIC = ("int", "nat", "mutez", "timestamp")
_CONTEXT_TY = {"amount": m.MUTEZ, "balance": m.MUTEZ, "now": m.TIMESTAMP, "sender": m.ADDRESS,
               "source": m.ADDRESS, "chain_id": m.CHAIN_ID}
_MAX_UNROLL = 4096


def txt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return int_lit(x)
    if isinstance(x, (T, SV)):
        return x.text
    if isinstance(x, str):
        return x
    raise VCGenError(f"not an SMT term: {x!r}")


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _conj(xs):
    out = []
    for x in xs:
        if x is False:
            return False
        if x is True:
            continue
        out.append(txt(x))
    if not out:
        return True
    return T(out[0], "Bool") if len(out) == 1 else T(f"(and {' '.join(out)})", "Bool")


def _disj(xs):
    out = []
    for x in xs:
        if x is True:
            return True
        if x is False:
            continue
        out.append(txt(x))
    if not out:
        return False
    return T(out[0], "Bool") if len(out) == 1 else T(f"(or {' '.join(out)})", "Bool")


def _neg(x):
    if isinstance(x, bool):
        return not x
    return T(f"(not {txt(x)})", "Bool")


class Encoder:
    """Partial evaluator from contract formulas to SMT terms."""

    def __init__(self, ctx=None, logic=None, param_ty=None):
        self.ctx = ctx or SmtContext()
        self.logic = logic or {}
        self.param_ty = param_ty or m.UNIT
        self.context_vals = {}
        self.facts = []         # well-formedness facts of lazily declared constants
        self._defining = set()

    # well-formedness -----------------------------------------------------

    def wf(self, x, t):
        """A fact every value of type *t* satisfies, or None."""
        n = t.name
        if n == "nat":
            return f"(>= {x} 0)"
        if n == "mutez":
            return f"(and (>= {x} 0) (<= {x} {m.MUTEZ_MAX}))"
        s = self.ctx.sort(t) if n not in _NUMERIC and n != "bool" else None
        if n == "pair":
            parts = [self.wf(f"(fst_{s} {x})", t.args[0]), self.wf(f"(snd_{s} {x})", t.args[1])]
            parts = [p for p in parts if p]
            if not parts:
                return None
            return parts[0] if len(parts) == 1 else f"(and {' '.join(parts)})"
        if n == "option":
            inner = self.wf(f"(val_{s} {x})", t.args[0])
            return inner and f"(=> ((_ is some_{s}) {x}) {inner})"
        if n == "or":
            a = self.wf(f"(lval_{s} {x})", t.args[0])
            b = self.wf(f"(rval_{s} {x})", t.args[1])
            parts = [p for p in (a and f"(=> ((_ is left_{s}) {x}) {a})",
                                 b and f"(=> ((_ is right_{s}) {x}) {b})") if p]
            if not parts:
                return None
            return parts[0] if len(parts) == 1 else f"(and {' '.join(parts)})"
        if n == "list":
            inner = self.wf("(hd_{0} l)".format(s), t.args[0])
            if inner is None:
                return None
            name = f"wf_{s}"
            self.ctx.declare(name, f"(define-fun-rec {name} ((l {s})) Bool (ite ((_ is cons_{s}) l) "
                                f"(and {inner} ({name} (tl_{s} l))) true))")
            return f"({name} {x})"
        return None

    def constant(self, name, t):
        self.ctx.const(name, t)
        return SV(name, t), self.wf(name, t)

    # evaluation ---------------------------------------------------------------

    def value(self, v):
        if isinstance(v, SV):
            return v
        if isinstance(v, m.Value):
            return SV(self.ctx.literal(v), m.typ_infer(v))
        raise VCGenError(f"expected a value, found {v!r}")

    def lookup(self, name, env):
        if name in env:
            return env[name]
        if name in _CONTEXT_TY or name == "self":
            if name not in self.context_vals:
                t = _CONTEXT_TY.get(name) or m.Ty("contract", (self.param_ty,))
                sv, fact = self.constant(f"ctx_{name}", t)
                if fact:
                    self.facts.append(fact)
                self.context_vals[name] = sv
            return self.context_vals[name]
        raise VCGenError(f"unbound name {name}")

    def pe(self, g, env):
        if isinstance(g, f.Lit):
            v = g.value
            return self.value(v) if isinstance(v, m.Value) else v
        if isinstance(g, f.Var):
            return self.lookup(g.name, env)
        if isinstance(g, f.Call):
            return self.call(g, env)
        if isinstance(g, f.Forall):
            if g.lo is None or g.hi is None:
                raise VCGenError("unbounded quantifiers are not supported")
            lo, hi = self.pe(g.lo, env), self.pe(g.hi, env)
            if not (_is_int(lo) and _is_int(hi)):
                raise VCGenError("quantifier bounds must be static")
            if hi - lo > _MAX_UNROLL:
                raise VCGenError(f"quantifier range too large ({hi - lo})")
            parts = []
            for k in range(lo, hi):
                r = self.pe(g.body, {**env, g.var: k})
                if r is False:
                    return False
                parts.append(r)
            return _conj(parts)
        if isinstance(g, f.Match):
            return self.match(g.arms, env)
        if isinstance(g, f.Op):
            return self.op(g, env)
        raise VCGenError(f"not a formula: {g!r}")

    def match(self, arms, env):
        if not arms:
            return False
        (guard, body), rest = arms[0], arms[1:]
        c = self.pe(guard, env)
        if c is True:
            return self.pe(body, env)
        if c is False:
            return self.match(rest, env)
        a, b = self.pe(body, env), self.match(rest, env)
        return self.ite(c, a, b)

    def ite(self, c, a, b):
        if c is True:
            return a
        if c is False:
            return b
        if isinstance(a, SV) or isinstance(b, SV):
            a, b = self.value(a), self.value(b)
            if a.ty != b.ty:
                raise VCGenError(f"branches of different types {a.ty} and {b.ty}")
            return SV(f"(ite {txt(c)} {a.text} {b.text})", a.ty)
        if isinstance(a, bool) and isinstance(b, bool):
            if a == b:
                return a
            return c if a else _neg(c)
        sort = "Bool" if isinstance(a, bool) or (isinstance(a, T) and a.sort == "Bool") else "Int"
        return T(f"(ite {txt(c)} {txt(a)} {txt(b)})", sort)

    def call(self, g, env):
        fn = self.logic.get(g.fn)
        if fn is None:
            raise VCGenError(f"unknown logic function {g.fn}")
        self.define(fn)
        args = [self.pe(a, env) for a in g.args]
        if not args:
            return T(g.fn, "Int")
        return T(f"({g.fn} {' '.join(txt(a) for a in args)})", "Int")

    def define(self, fn):
        if fn.name in self.ctx.functions or fn.name in self._defining:
            return
        self._defining.add(fn.name)
        body = self.pe(fn.body, {p: T(p, "Int") for p in fn.params})
        self._defining.discard(fn.name)
        if fn.params:
            self.ctx.define_logic(fn.name, fn.params, txt(body))
        else:
            self.ctx.functions[fn.name] = txt(body)
            self.ctx.declare(("logic", fn.name), f"(define-fun {fn.name} () Int {txt(body)})")

    def op(self, g, env):
        name = g.name
        if name == "and":
            parts = []
            for a in g.args:
                r = self.pe(a, env)
                if r is False:
                    return False
                parts.append(r)
            return _conj(parts)
        if name == "or":
            parts = []
            for a in g.args:
                r = self.pe(a, env)
                if r is True:
                    return True
                parts.append(r)
            return _disj(parts)
        if name == "implies":
            a = self.pe(g.args[0], env)
            if a is False:
                return True
            b = self.pe(g.args[1], env)
            if a is True or b is True:
                return b
            if b is False:
                return _neg(a)
            return T(f"(=> {txt(a)} {txt(b)})", "Bool")
        if name == "ite":
            c = self.pe(g.args[0], env)
            if c is True:
                return self.pe(g.args[1], env)
            if c is False:
                return self.pe(g.args[2], env)
            return self.ite(c, self.pe(g.args[1], env), self.pe(g.args[2], env))
        args = [self.pe(a, env) for a in g.args]
        handler = getattr(self, "op_" + name, None)
        if handler is None:
            raise VCGenError(f"no SMT encoding for operator {name}")
        return handler(*args)

    # propositional and arithmetic ---------------------------------------

    def op_not(self, a):
        return _neg(a)

    def op_iff(self, a, b):
        if isinstance(a, bool) and isinstance(b, bool):
            return a == b
        return T(f"(= {txt(a)} {txt(b)})", "Bool")

    def op_eq(self, a, b):
        if isinstance(a, m.Ty) or isinstance(b, m.Ty) or isinstance(a, str):
            return a == b
        if isinstance(a, (SV, m.Value)) or isinstance(b, (SV, m.Value)):
            a, b = self.value(a), self.value(b)
            if a.ty != b.ty:
                return False
        if not isinstance(a, (T, SV)) and not isinstance(b, (T, SV)):
            return a == b
        if txt(a) == txt(b):
            return True
        return T(f"(= {txt(a)} {txt(b)})", "Bool")

    def op_ne(self, a, b):
        return _neg(self.op_eq(a, b))

    def _cmp(self, sym, fold):
        def run(a, b):
            if _is_int(a) and _is_int(b):
                return fold(a, b)
            return T(f"({sym} {txt(a)} {txt(b)})", "Bool")
        return run

    def op_lt(self, a, b):
        return self._cmp("<", lambda x, y: x < y)(a, b)

    def op_le(self, a, b):
        return self._cmp("<=", lambda x, y: x <= y)(a, b)

    def op_gt(self, a, b):
        return self._cmp(">", lambda x, y: x > y)(a, b)

    def op_ge(self, a, b):
        return self._cmp(">=", lambda x, y: x >= y)(a, b)

    def _arith(self, sym, fold, a, b):
        if _is_int(a) and _is_int(b):
            r = fold(a, b)
            if r is not None:
                return r
        return T(f"({sym} {txt(a)} {txt(b)})", "Int")

    def op_add(self, a, b):
        if b == 0 and _is_int(b):
            return a
        return self._arith("+", lambda x, y: x + y, a, b)

    def op_sub(self, a, b):
        if b == 0 and _is_int(b):
            return a
        return self._arith("-", lambda x, y: x - y, a, b)

    def op_mul(self, a, b):
        return self._arith("*", lambda x, y: x * y, a, b)

    def op_div(self, a, b):
        # SMT-LIB integer division is Euclidean, like EDIV
        return self._arith("div", lambda x, y: (x - x % abs(y)) // y if y else None, a, b)

    def op_mod(self, a, b):
        return self._arith("mod", lambda x, y: x % abs(y) if y else None, a, b)

    def op_neg(self, a):
        return -a if _is_int(a) else T(f"(- {txt(a)})", "Int")

    def op_abs(self, a):
        if _is_int(a):
            return abs(a)
        x = txt(a)
        return T(f"(ite (< {x} 0) (- {x}) {x})", "Int")

    def _bitwise(self, name, a, b):
        self.ctx.fun(name, ["Int", "Int"], "Int")
        return T(f"({name} {txt(a)} {txt(b)})", "Int")

    def op_band(self, a, b):
        return a & b if _is_int(a) and _is_int(b) else self._bitwise("band", a, b)

    def op_bor(self, a, b):
        return a | b if _is_int(a) and _is_int(b) else self._bitwise("bor", a, b)

    def op_bxor(self, a, b):
        return a ^ b if _is_int(a) and _is_int(b) else self._bitwise("bxor", a, b)

    # stacks and types -----------------------------------------------------

    def op_len(self, s):
        return len(s)

    def op_slot(self, s, i):
        if not _is_int(i):
            raise VCGenError("stack index must be static")
        if not 0 <= i < len(s):
            raise VCGenError(f"stack index {i} out of range for a stack of {len(s)}")
        return s[i]

    def op_typ(self, v):
        return self.value(v).ty

    def op_ty_is(self, t, name):
        return t.name == name

    def op_ty_arg(self, t, i):
        if not 0 <= i < len(t.args):
            raise VCGenError(f"type {t} has no argument {i}")
        return t.args[i]

    def op_ty_mk(self, name, *args):
        return m.Ty(name, tuple(args))

    # values ----------------------------------------------------------------

    def op_num(self, v):
        v = self.value(v)
        if v.ty.name not in _NUMERIC:
            raise VCGenError(f"num applied to a {v.ty}")
        return _static_num(v) if _static_num(v) is not None else T(v.text, "Int")

    def op_truth(self, v):
        v = self.value(v)
        if v.ty != m.BOOL:
            raise VCGenError(f"truth applied to a {v.ty}")
        return {"true": True, "false": False}.get(v.text, T(v.text, "Bool"))

    def op_mk_int(self, x):
        return SV(txt(x), m.INT)

    def op_mk_nat(self, x):
        return SV(txt(x), m.NAT)

    def op_mk_mutez(self, x):
        return SV(txt(x), m.MUTEZ)

    def op_mk_timestamp(self, x):
        return SV(txt(x), m.TIMESTAMP)

    def op_mk_bool(self, x):
        return SV(txt(x), m.BOOL)

    def op_unit(self):
        return self.value(m.UNIT_V)

    def _sort(self, t):
        return self.ctx.sort(t)

    def _need(self, v, kind, what):
        v = self.value(v)
        if v.ty.name != kind:
            raise VCGenError(f"{what} applied to a {v.ty}")
        return v, self._sort(v.ty)

    def op_car(self, v):
        v, s = self._need(v, "pair", "car")
        if v.parts:
            return v.parts[0]
        return SV(f"(fst_{s} {v.text})", v.ty.args[0])

    def op_cdr(self, v):
        v, s = self._need(v, "pair", "cdr")
        if v.parts:
            return v.parts[1]
        return SV(f"(snd_{s} {v.text})", v.ty.args[1])

    def op_mk_pair(self, a, b):
        a, b = self.value(a), self.value(b)
        t = m.pair(a.ty, b.ty)
        return SV(f"(mk_{self._sort(t)} {a.text} {b.text})", t, (a, b))

    def op_some(self, a):
        a = self.value(a)
        t = m.option(a.ty)
        return SV(f"(some_{self._sort(t)} {a.text})", t)

    def op_none(self, t):
        t = m.option(t)
        return SV(f"none_{self._sort(t)}", t)

    def op_is_some(self, v):
        v, s = self._need(v, "option", "is_some")
        return T(f"((_ is some_{s}) {v.text})", "Bool")

    def op_unsome(self, v):
        v, s = self._need(v, "option", "unsome")
        return SV(f"(val_{s} {v.text})", v.ty.args[0])

    def op_left(self, a, t):
        a = self.value(a)
        t = m.Ty("or", (a.ty, t))
        return SV(f"(left_{self._sort(t)} {a.text})", t)

    def op_right(self, a, t):
        a = self.value(a)
        t = m.Ty("or", (t, a.ty))
        return SV(f"(right_{self._sort(t)} {a.text})", t)

    def op_is_left(self, v):
        v, s = self._need(v, "or", "is_left")
        return T(f"((_ is left_{s}) {v.text})", "Bool")

    def op_unleft(self, v):
        v, s = self._need(v, "or", "unleft")
        return SV(f"(lval_{s} {v.text})", v.ty.args[0])

    def op_unright(self, v):
        v, s = self._need(v, "or", "unright")
        return SV(f"(rval_{s} {v.text})", v.ty.args[1])

    def op_nil(self, t):
        t = m.list_(t)
        return SV(f"nil_{self._sort(t)}", t)

    def op_cons(self, h, tl):
        h = self.value(h)
        tl, s = self._need(tl, "list", "cons")
        return SV(f"(cons_{s} {h.text} {tl.text})", tl.ty)

    def op_is_cons(self, v):
        v, s = self._need(v, "list", "is_cons")
        return T(f"((_ is cons_{s}) {v.text})", "Bool")

    def op_hd(self, v):
        v, s = self._need(v, "list", "hd")
        return SV(f"(hd_{s} {v.text})", v.ty.args[0])

    def op_tl(self, v):
        v, s = self._need(v, "list", "tl")
        return SV(f"(tl_{s} {v.text})", v.ty)

    def op_compare(self, a, b):
        a, b = self.value(a), self.value(b)
        if a.ty != b.ty:
            raise VCGenError(f"compare of {a.ty} and {b.ty}")
        return T(self.compare(a.text, b.text, a.ty), "Int")

    def compare(self, a, b, t):
        n = t.name
        if n in _NUMERIC:
            return f"(ite (< {a} {b}) (- 1) (ite (= {a} {b}) 0 1))"
        if n == "bool":
            return f"(ite (= {a} {b}) 0 (ite {b} (- 1) 1))"
        if n == "unit":
            return "0"
        s = self._sort(t)
        if n == "pair":
            first = self.compare(f"(fst_{s} {a})", f"(fst_{s} {b})", t.args[0])
            second = self.compare(f"(snd_{s} {a})", f"(snd_{s} {b})", t.args[1])
            return f"(ite (= {first} 0) {second} {first})"
        if n == "option":
            inner = self.compare(f"(val_{s} {a})", f"(val_{s} {b})", t.args[0])
            return (f"(ite ((_ is none_{s}) {a}) (ite ((_ is none_{s}) {b}) 0 (- 1)) "
                    f"(ite ((_ is none_{s}) {b}) 1 {inner}))")
        if n == "or":
            left = self.compare(f"(lval_{s} {a})", f"(lval_{s} {b})", t.args[0])
            right = self.compare(f"(rval_{s} {a})", f"(rval_{s} {b})", t.args[1])
            return (f"(ite ((_ is left_{s}) {a}) (ite ((_ is left_{s}) {b}) {left} (- 1)) "
                    f"(ite ((_ is left_{s}) {b}) 1 {right}))")
        if t.comparable:
            lt = self.ctx.order(t)
            return f"(ite ({lt} {a} {b}) (- 1) (ite (= {a} {b}) 0 1))"
        raise VCGenError(f"type {t} is not comparable")

    def op_size(self, v):
        v = self.value(v)
        n = v.ty.name
        s = self._sort(v.ty)
        if n == "list":
            return T(f"({self.ctx.list_length(v.ty)} {v.text})", "Int")
        if n in ("set", "map", "big_map"):
            return T(f"({self.ctx.collection_op(v.ty, 'size')} {v.text})", "Int")
        if n in ("string", "bytes"):
            fn = self.ctx.fun(f"size_{s}", [s], "Int", [f"(forall ((x {s})) (>= (size_{s} x) 0))"])
            return T(f"({fn} {v.text})", "Int")
        raise VCGenError(f"size of a {v.ty}")

    def op_mem(self, k, c):
        k, c = self.value(k), self.value(c)
        return T(f"({self.ctx.collection_op(c.ty, 'mem')} {k.text} {c.text})", "Bool")

    def op_get(self, k, c):
        k, c = self.value(k), self.value(c)
        return SV(f"({self.ctx.collection_op(c.ty, 'get')} {k.text} {c.text})", m.option(c.ty.args[1]))

    def op_update(self, k, v, c):
        k, c = self.value(k), self.value(c)
        return SV(f"({self.ctx.collection_op(c.ty, 'update')} {k.text} {txt(self.value(v))} {c.text})", c.ty)

    def _uninterpreted(self, name, args, res_ty):
        sorts = [self._sort(a.ty) for a in args]
        fn = self.ctx.fun(f"{name}_{'_'.join(sorts)}", sorts, self._sort(res_ty))
        return SV(f"({fn} {' '.join(a.text for a in args)})", res_ty)

    def op_concat(self, a, b):
        a, b = self.value(a), self.value(b)
        return self._uninterpreted("concat", [a, b], a.ty)

    def op_concat_list(self, v):
        v = self.value(v)
        return self._uninterpreted("concat_list", [v], v.ty.args[0])

    def op_transfer_tokens(self, p, amt, c):
        return self._uninterpreted("transfer_tokens", [self.value(x) for x in (p, amt, c)], m.OPERATION)

    def op_set_delegate(self, d):
        return self._uninterpreted("set_delegate", [self.value(d)], m.OPERATION)


def _static_num(v):
    try:
        return int(v.text)
    except ValueError:
        if v.text.startswith("(- ") and v.text[3:-1].isdigit():
            return -int(v.text[3:-1])
        return None


def as_goal(x):
    """Normalize a partially evaluated formula to True, False or SMT text."""
    if isinstance(x, bool):
        return x
    if isinstance(x, T) and x.sort == "Bool":
        return x.text
    if isinstance(x, SV) and x.ty == m.BOOL:
        return x.text
    if isinstance(x, str):
        return x
    raise VCGenError(f"expected a formula, found {x!r}")


def make_vc(goal, hypotheses=(), name="goal", logic=None):
    """A VC over no stack; free int and bool variables become constants."""
    enc = Encoder(logic=logic)
    env = {}
    for x in (goal, *hypotheses):
        for g in f.walk(x):
            if isinstance(g, f.Var) and g.name in f.free_vars(x) and g.name not in env:
                if g.sort == f.INT:
                    env[g.name] = T(enc.ctx.int_const(g.name), "Int")
                elif g.sort == f.BOOL:
                    env[g.name] = T(enc.ctx.const(g.name, m.BOOL), "Bool")
    hyps = tuple(as_goal(enc.pe(h, env)) for h in hypotheses)
    g = as_goal(enc.pe(goal, env))
    hyps = tuple(txt(h) for h in hyps if h is not True)
    return VC(name, (), "goal", tuple(enc.facts) + hyps, txt(g), enc.ctx)


# ---------------------------------------------------------------------------
# Program traversal


class _Gen:
    def __init__(self, tp, spec, keep_trivial, lenient=False):
        self.lenient = lenient
        self.tp = tp
        self.spec = spec
        self.keep_trivial = keep_trivial
        self.enc = Encoder(logic=dict(spec.logic) if spec else {}, param_ty=tp.parameter)
        self.ctx = self.enc.ctx
        self.vcs = []
        self.used = set()
        self.counter = 0
        self.globals = {}

    def fresh(self, t, hint="x"):
        self.counter += 1
        return self.enc.constant(f"{hint}{self.counter}", t)

    def fresh_stack(self, tys, hint):
        st, facts = [], []
        for t in tys:
            sv, fact = self.fresh(t, hint)
            st.append(sv)
            if fact:
                facts.append(fact)
        return tuple(st), tuple(facts)

    def emit(self, name, path, role, hyps, goal):
        g = as_goal(goal)
        if g is True and not self.keep_trivial:
            return
        self.vcs.append(VC(name, path, role, self.hyps_with_globals(hyps), txt(g), self.ctx))

    def hyps_with_globals(self, hyps):
        return tuple(self.enc.facts) + tuple(hyps)

    def env(self, **kw):
        return {**self.globals, **kw}

    def assume(self, hyps, x):
        g = as_goal(x)
        return hyps if g is True else hyps + (txt(g),)

    # -------------------------------------------------------------------

    def run(self, i, path, st, hyps):
        """Execute *i* symbolically; returns (stack or None when it always fails, hyps)."""
        st, hyps = self._run(i, path, st, hyps)
        if st is not None and self.spec:
            for k, a in enumerate(self.spec.asserts.get(path, ())):
                goal = self.enc.pe(a, self.env(stack=st, s=st))
                self.emit(f"assert@{format_path(path)}:assert.{k}", path, f"assert.{k}", hyps, goal)
                hyps = self.assume(hyps, goal)
        return st, hyps

    def _run(self, i, path, st, hyps):
        if i.origin is not None or i.op in CONTRACTS:
            return self.primitive(i, path, st, hyps)
        op = i.op
        if op == "NOP":
            return st, hyps
        if op == "SEQ":
            st, hyps = self.run(i.blocks[0], path + (0,), st, hyps)
            if st is None:
                return None, hyps
            return self.run(i.blocks[1], path + (1,), st, hyps)
        if op == "DIP":
            n = i.args[0] if i.args else 1
            out, hyps = self.run(i.blocks[0], path + (0,), st[n:], hyps)
            return (None if out is None else st[:n] + out), hyps
        if op in ("IF", "IF_NONE", "IF_LEFT", "IF_CONS"):
            return self.branch(i, path, st, hyps)
        if op in ("LOOP", "LOOP_LEFT", "ITER"):
            return self.loop(i, path, st, hyps)
        raise VCGenError(f"no VC rule for {op}")

    def primitive(self, i, path, st, hyps):
        key = contract_key(i)
        c = CONTRACTS[key]
        where = f"{key.lower()}@{format_path(path)}"
        before, after = self.tp.at[path]
        ops = {k: (self.enc.value(v) if isinstance(v, m.Value) else v) for k, v in operand_env(i).items()}
        env = self.env(s=st, **ops)
        for role, _ in c.clauses():
            self.used.add((key, role))
        for k, clause in enumerate(c.requires):
            goal = self.enc.pe(clause, env)
            self.emit(f"{where}:precondition.{k}", path, f"precondition.{k}", hyps, goal)
            hyps = self.assume(hyps, goal)
        if c.fails_if is not None:
            fails = self.enc.pe(c.fails_if, env)
            if fails is True:
                return None, hyps
            hyps = self.assume(hyps, _neg(fails))
        if after is BOTTOM:
            return None, hyps
        pops, pushes = c.shape(operand_env(i), before)
        fresh, facts = self.fresh_stack(after[:pushes], "v")
        result = fresh + tuple(st[pops:])
        if len(result) != len(after):
            raise VCGenError(f"{where}: contract shape disagrees with the typechecker")
        hyps = hyps + facts
        env["result"] = result
        for k, clause in enumerate(c.ensures):
            fact = as_goal(self.enc.pe(clause, env))
            if fact is False:
                raise VCGenError(f"{where}: postcondition.{k} is unsatisfiable")
            hyps = self.assume(hyps, fact)
        return result, hyps

    def branch(self, i, path, st, hyps):
        op, top, rest = i.op, st[0], st[1:]
        s = self.ctx.sort(top.ty) if top.ty.name not in ("bool",) else None
        if op == "IF":
            cond = top.text
            arms = ((cond, rest), (f"(not {cond})", rest))
        elif op == "IF_NONE":
            some = SV(f"(val_{s} {top.text})", top.ty.args[0])
            arms = ((f"((_ is none_{s}) {top.text})", rest),
                    (f"((_ is some_{s}) {top.text})", (some,) + rest))
        elif op == "IF_LEFT":
            arms = ((f"((_ is left_{s}) {top.text})", (SV(f"(lval_{s} {top.text})", top.ty.args[0]),) + rest),
                    (f"((_ is right_{s}) {top.text})", (SV(f"(rval_{s} {top.text})", top.ty.args[1]),) + rest))
        else:
            hd = SV(f"(hd_{s} {top.text})", top.ty.args[0])
            tl = SV(f"(tl_{s} {top.text})", top.ty)
            arms = ((f"((_ is cons_{s}) {top.text})", (hd, tl) + rest),
                    (f"((_ is nil_{s}) {top.text})", rest))
        outs = []
        for k, (cond, entry) in enumerate(arms):
            out, h = self.run(i.blocks[k], path + (k,), entry, hyps + (cond,))
            outs.append((cond, out, h[len(hyps):]))
        live = [o for o in outs if o[1] is not None]
        if not live:
            return None, hyps
        if len(live) == 1:
            cond, out, new = live[0]
            return out, hyps + new
        after = self.tp.after(path)
        joined, facts = self.fresh_stack(after, "j")
        hyps = hyps + facts
        for cond, out, new in outs:
            eqs = [f"(= {a.text} {b.text})" for a, b in zip(joined, out)]
            body = list(new) + eqs
            conj = body[0] if len(body) == 1 else f"(and {' '.join(body)})" if body else "true"
            hyps = hyps + (f"(=> {cond} {conj})",)
        return joined, hyps

    def loop(self, i, path, st, hyps):
        op = i.op
        where = f"{op.lower()}@{format_path(path)}"
        inv_f = self.spec.invariants.get(path) if self.spec else None
        if inv_f is None:
            if not self.lenient:
                raise VCGenError(f"loop at {format_path(path)} has no invariant")
            inv_f = f.TRUE
        var_f = self.spec.variants.get(path) if self.spec else None
        if op == "ITER":
            inv_stack = st[1:]
        else:
            inv_stack = st

        def inv(s):
            return self.enc.pe(inv_f, self.env(stack=s, s=s))

        self.emit(f"{where}:invariant-init", path, "invariant-init", hyps, inv(inv_stack))
        self.used.add((op, "invariant-init"))
        tys = tuple(x.ty for x in inv_stack)
        # preservation: an arbitrary stack satisfying the invariant and the continue test
        h, facts = self.fresh_stack(tys, "h")
        pre = self.assume(hyps + facts, inv(h))
        if op == "LOOP":
            pre, body_in = pre + (h[0].text,), h[1:]
        elif op == "LOOP_LEFT":
            s = self.ctx.sort(h[0].ty)
            pre = pre + (f"((_ is left_{s}) {h[0].text})",)
            body_in = (SV(f"(lval_{s} {h[0].text})", h[0].ty.args[0]),) + h[1:]
        else:
            elem = _iter_elem(st[0].ty)
            x, fact = self.fresh(elem, "e")
            pre = pre + ((fact,) if fact else ())
            body_in = (x,) + h
        out, post = self.run(i.blocks[0], path + (0,), body_in, pre)
        if out is not None:
            self.emit(f"{where}:invariant-preserved", path, "invariant-preserved", post, inv(out))
            if var_f is not None:
                before = self.enc.pe(var_f, self.env(stack=h, s=h))
                now = self.enc.pe(var_f, self.env(stack=out, s=out))
                goal = _conj([self.enc.op_ge(before, 0), self.enc.op_lt(now, before)])
                self.emit(f"{where}:variant-decreases", path, "variant-decreases", post, goal)
        # exit: an arbitrary stack satisfying the invariant and the stop test
        e, facts = self.fresh_stack(tys, "x")
        hyps = self.assume(hyps + facts, inv(e))
        if op == "LOOP":
            return e[1:], hyps + (f"(not {e[0].text})",)
        if op == "LOOP_LEFT":
            s = self.ctx.sort(e[0].ty)
            return ((SV(f"(rval_{s} {e[0].text})", e[0].ty.args[1]),) + e[1:],
                    hyps + (f"((_ is right_{s}) {e[0].text})",))
        return e, hyps

    # -------------------------------------------------------------------

    def generate(self):
        tp, spec = self.tp, self.spec
        fuel = self.ctx.int_const("fuel")
        self.globals["fuel"] = T(fuel, "Int")
        hyps = ("(> fuel 0)",)
        entry = tp.entry
        storage = getattr(tp, "storage", None)
        if storage is not None and len(entry) == 1 and entry[0] == m.pair(tp.parameter, storage):
            param, pf = self.enc.constant("param", tp.parameter)
            store, sf = self.enc.constant("storage_in", storage)
            self.globals.update(param=param, storage_in=store)
            hyps += tuple(x for x in (pf, sf) if x)
            st = (self.enc.op_mk_pair(param, store),)
        else:
            st, facts = self.fresh_stack(entry, "s")
            hyps += facts
        env = self.env(s=st, stack=st)
        for r in (spec.requires if spec else ()):
            hyps = self.assume(hyps, self.enc.pe(r, env))
        out, hyps = self.run(tp.code, (), st, hyps)
        if out is None:
            return self.vcs
        ensures = []
        if storage is not None and len(out) == 1 and out[0].ty.name == "pair":
            from michv.typecheck import SafetySpec
            safety = SafetySpec(1, entry[0], 1, out[0].ty)
            ensures += list(safety.ensures())
            self.globals["storage_out"] = self.enc.op_cdr(out[0])
        ensures += list(spec.ensures if spec else ())
        env = self.env(result=out, stack=out, s=st)
        for k, clause in enumerate(ensures):
            self.emit(f"contract:postcondition.{k}", (), f"postcondition.{k}", hyps, self.enc.pe(clause, env))
        return self.vcs


def _iter_elem(t):
    if t.name in ("list", "set"):
        return t.args[0]
    return m.pair(*t.args)


def generate_vcs_mono(tp, spec=None, keep_trivial=True):
    """All VCs for a typed program, in program order.

    Clauses that fold to ``true`` during generation are kept (their goal is
    ``true``) unless *keep_trivial* is cleared. Every loop needs an invariant in *spec*.
    """
    return _Gen(tp, spec, keep_trivial).generate()


def mono_coverage(tp, spec=None):
    """The (opcode, clause role) pairs the generator consumed."""
    g = _Gen(tp, spec, keep_trivial=True, lenient=True)
    g.generate()
    return g.used

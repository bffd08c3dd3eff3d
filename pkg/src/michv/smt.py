"""SMT-LIB2 encoding of Michelson types and script emission.

Numeric types map to ``Int`` and ``bool`` to ``Bool``. Pairs, options,
ors, lists and unit become algebraic datatypes, one per instantiation (so
``pair nat nat`` is ``Pair_Nat_Nat``). Strings, bytes and the other opaque
types are uninterpreted sorts; comparable ones get a strict total order
``lt_<Sort>`` once some comparison needs it. Sets and maps are
uninterpreted sorts too. Quantified axioms slow down refutations, so each
one is declared only when an operation that needs it appears.
"""

from dataclasses import dataclass, field

from michv import model as m
from michv.errors import VCGenError

_NUMERIC = ("int", "nat", "mutez", "timestamp")
_OPAQUE = ("string", "bytes", "key_hash", "address", "key", "signature", "chain_id", "operation")


# Sort names that would collide with SMT-LIB built-in theories.
_RESERVED = {"string": "Str"}


def mangle(t):
    """Prefix-notation sort name: unambiguous because arities are fixed."""
    head = _RESERVED.get(t.name) or "".join(w.capitalize() for w in t.name.split("_"))
    return "_".join([head] + [mangle(a) for a in t.args])


def int_lit(x):
    return str(x) if x >= 0 else f"(- {-x})"


class SmtContext:
    """Accumulates declarations in dependency order."""

    def __init__(self):
        self.decls = []
        self._seen = set()
        self.consts = {}        # name -> sort
        self.literals = {}      # (sort, canonical text) -> constant name
        self.functions = {}     # logic functions already defined
        self._literal_values = {}
        self._ordered = set()

    def declare(self, key, text):
        if key not in self._seen:
            self._seen.add(key)
            self.decls.append(text)

    # sorts ---------------------------------------------------------------

    def sort(self, t):
        n = t.name
        if n in _NUMERIC:
            return "Int"
        if n == "bool":
            return "Bool"
        name = mangle(t)
        if name in self._seen:
            return name
        if n == "unit":
            self.declare(name, "(declare-datatypes ((Unit 0)) (((unit))))")
        elif n in _OPAQUE or n == "contract":
            self.declare(name, f"(declare-sort {name} 0)")
        elif n == "pair":
            a, b = (self.sort(x) for x in t.args)
            self.declare(name, f"(declare-datatypes (({name} 0)) (((mk_{name} (fst_{name} {a}) (snd_{name} {b})))))")
        elif n == "option":
            a = self.sort(t.args[0])
            self.declare(name, f"(declare-datatypes (({name} 0)) (((none_{name}) (some_{name} (val_{name} {a})))))")
        elif n == "or":
            a, b = (self.sort(x) for x in t.args)
            self.declare(name, f"(declare-datatypes (({name} 0)) (((left_{name} (lval_{name} {a})) "
                            f"(right_{name} (rval_{name} {b})))))")
        elif n == "list":
            a = self.sort(t.args[0])
            self.declare(name, f"(declare-datatypes (({name} 0)) (((nil_{name}) "
                            f"(cons_{name} (hd_{name} {a}) (tl_{name} {name})))))")
        elif n in ("set", "map", "big_map"):
            for x in t.args:
                self.sort(x)
            self.declare(name, f"(declare-sort {name} 0)")
        else:
            raise VCGenError(f"no SMT encoding for type {t}")
        return name

    def order(self, t):
        """The strict order on an opaque comparable sort, with axioms and literal facts."""
        s = self.sort(t)
        lt = f"lt_{s}"
        if s in self._ordered:
            return lt
        self._ordered.add(s)
        self.declare(lt, "\n".join([
            f"(declare-fun {lt} ({s} {s}) Bool)",
            f"(assert (forall ((x {s})) (not ({lt} x x))))",
            f"(assert (forall ((x {s}) (y {s}) (z {s})) (=> (and ({lt} x y) ({lt} y z)) ({lt} x z))))",
            f"(assert (forall ((x {s}) (y {s})) (or ({lt} x y) (= x y) ({lt} y x))))",
        ]))
        lits = [(self._literal_values[k], c) for k, c in self.literals.items() if k[0] == s]
        for i, (v, c) in enumerate(lits):
            for w, d in lits[i + 1:]:
                self._order_fact(s, v, c, w, d)
        return lt

    def _order_fact(self, s, v, c, w, d):
        lo, hi = (c, d) if m.compare(v, w) < 0 else (d, c)
        self.declare(("order", lo, hi), f"(assert (lt_{s} {lo} {hi}))")

    # constants ------------------------------------------------------------

    def const(self, name, t):
        s = self.sort(t)
        if name in self.consts:
            raise VCGenError(f"constant {name} declared twice")
        self.consts[name] = s
        self.declare(("const", name), f"(declare-const {name} {s})")
        return name

    def int_const(self, name):
        self.consts[name] = "Int"
        self.declare(("const", name), f"(declare-const {name} Int)")
        return name

    def literal(self, v):
        """SMT term for a concrete value."""
        t = m.typ_infer(v)
        n = t.name
        if n in _NUMERIC:
            return int_lit(v.value)
        if n == "bool":
            return "true" if v.value else "false"
        if n == "unit":
            self.sort(t)
            return "unit"
        s = self.sort(t)
        if isinstance(v, m.PairV):
            return f"(mk_{s} {self.literal(v.left)} {self.literal(v.right)})"
        if isinstance(v, m.SomeV):
            return f"(some_{s} {self.literal(v.value)})"
        if isinstance(v, m.NoneV):
            return f"none_{s}"
        if isinstance(v, m.LeftV):
            return f"(left_{s} {self.literal(v.value)})"
        if isinstance(v, m.RightV):
            return f"(right_{s} {self.literal(v.value)})"
        if isinstance(v, m.ListV):
            out = f"nil_{s}"
            for x in reversed(v.items):
                out = f"(cons_{s} {self.literal(x)} {out})"
            return out
        if n in _OPAQUE and not isinstance(v, (m.OperationV, m.AbstractV)):
            return self._opaque_literal(v, t, s)
        if isinstance(v, (m.SetV, m.MapV)):
            return self._collection_literal(v, t, s)
        raise VCGenError(f"cannot encode literal {m.format_value(v)} of type {t}")

    def _opaque_literal(self, v, t, s):
        key = (s, m.format_value(v))
        if key in self.literals:
            return self.literals[key]
        name = f"lit_{s}_{len([k for k in self.literals if k[0] == s])}"
        self.literals[key] = name
        self.declare(("const", name), f"(declare-const {name} {s})")
        others = [(k, c) for k, c in self.literals.items() if k[0] == s and c != name]
        self._literal_values[key] = v
        for (_, text), c in others:
            self.declare(("distinct", c, name), f"(assert (distinct {c} {name}))")
            if s in self._ordered:
                self._order_fact(s, self._literal_values[(s, text)], c, v, name)
        return name

    def _collection_literal(self, v, t, s):
        """A named constant pinned down pointwise through mem/get and size."""
        key = (s, m.format_value(v))
        if key in self.literals:
            return self.literals[key]
        name = f"lit_{s}_{len([k for k in self.literals if k[0] == s])}"
        self.literals[key] = name
        k = self.sort(t.args[0])
        if isinstance(v, m.SetV):
            body = "false"
            for x in reversed(v.items):
                body = f"(or (= x {self.literal(x)}) {body})"
            point = f"(= ({self.collection_op(t, 'mem')} x {name}) {body})"
        else:
            opt = self.sort(m.option(t.args[1]))
            body = f"none_{opt}"
            for x, y in reversed(v.items):
                body = f"(ite (= x {self.literal(x)}) (some_{opt} {self.literal(y)}) {body})"
            point = f"(= ({self.collection_op(t, 'get')} x {name}) {body})"
        self.declare(("const", name), "\n".join([
            f"(declare-const {name} {s})",
            f"(assert (forall ((x {k})) {point}))",
            f"(assert (= ({self.collection_op(t, 'size')} {name}) {len(v.items)}))"]))
        return name

    # functions and axioms ------------------------------------------------

    def fun(self, name, args, result, axioms=()):
        """Declare an uninterpreted function once, with optional axioms."""
        if name not in self._seen:
            text = [f"(declare-fun {name} ({' '.join(args)}) {result})"]
            text += [f"(assert {a})" for a in axioms]
            self.declare(name, "\n".join(text))
        return name

    def list_length(self, t):
        s = self.sort(t)
        name = f"len_{s}"
        self.declare(name, f"(define-fun-rec {name} ((l {s})) Int (ite ((_ is cons_{s}) l) "
                        f"(+ 1 ({name} (tl_{s} l))) 0))")
        return name

    def collection_op(self, t, op):
        """Name of mem/get/update/size on a set or map sort.

        Each operation brings only the axioms it needs: the read-over-write
        axiom for update makes satisfiable goals hard for the solver, so it
        is left out unless the program updates a collection.
        """
        s = self.sort(t)
        k = self.sort(t.args[0])
        is_set = t.name == "set"
        if op == "size":
            return self.fun(f"size_{s}", [s], "Int", [f"(forall ((c {s})) (>= (size_{s} c) 0))"])
        if is_set and op == "mem":
            return self.fun(f"mem_{s}", [k, s], "Bool")
        if is_set and op == "update":
            mem = self.collection_op(t, "mem")
            return self.fun(f"update_{s}", [k, "Bool", s], s, [
                f"(forall ((x {k}) (y {k}) (b Bool) (c {s})) (= ({mem} x (update_{s} y b c)) "
                f"(ite (= x y) b ({mem} x c))))"])
        if is_set:
            raise VCGenError(f"{op} on a {t}")
        opt = self.sort(m.option(t.args[1]))
        if op == "get":
            return self.fun(f"get_{s}", [k, s], opt)
        get = self.collection_op(t, "get")
        if op == "mem":
            return self.fun(f"mem_{s}", [k, s], "Bool", [
                f"(forall ((x {k}) (c {s})) (= (mem_{s} x c) ((_ is some_{opt}) ({get} x c))))"])
        if op == "update":
            return self.fun(f"update_{s}", [k, opt, s], s, [
                f"(forall ((x {k}) (y {k}) (o {opt}) (c {s})) (= ({get} x (update_{s} y o c)) "
                f"(ite (= x y) o ({get} x c))))"])
        raise VCGenError(f"{op} on a {t}")

    def define_logic(self, name, params, body):
        if name not in self.functions:
            self.functions[name] = body
            ps = " ".join(f"({p} Int)" for p in params)
            self.declare(("logic", name), f"(define-fun-rec {name} ({ps}) Int {body})")

    def declarations(self):
        return "\n".join(self.decls)


@dataclass(frozen=True)
class VC:
    """One proof obligation: the hypotheses entail the goal."""

    name: str
    path: tuple
    role: str
    hypotheses: tuple
    goal: str
    context: SmtContext = field(compare=False, repr=False, default=None)


def emit_smt(vc):
    """A self-contained script; ``unsat`` means the VC is valid."""
    lines = [f"; {vc.name}", "(set-logic ALL)"]
    if vc.context is not None and vc.context.decls:
        lines.append(vc.context.declarations())
    for h in vc.hypotheses:
        lines.append(f"(assert {h})")
    lines.append(f"(assert (not {vc.goal}))")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"

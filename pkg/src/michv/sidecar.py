"""Specification sidecar files and their infix formula syntax.

A sidecar holds one clause per line::

    requires: param > 0
    ensures: storage_out = fact(param)
    logic fact(n) = if n <= 0 then 1 else n * fact(n - 1)
    logic sq(0) = 0
    logic sq(n) = sq(n - 1) + 2 * n - 1
    invariant@1.1.0: stack[1] >= 1
    variant@1.1.0: param - stack[2]
    assert@1.1.0.0.1.0: stack[0] = fact(stack[1] - 1)

``stack`` names the stack at the annotated point: the entry stack for
``requires``, the loop's stack (guard on top) for invariants, and the stack
right after the annotated instruction for ``assert``. ``result`` is the
final stack. Values used where an integer or a truth value is expected are
read through ``num``/``truth`` automatically.
"""

import re
from dataclasses import dataclass, field

from michv import formula as f
from michv import model as m
from michv.errors import FormulaError, SpecError
from michv.typecheck import format_path, parse_path

STACK_NAMES = {"stack": "stack", "result": "result"}
VALUE_NAMES = {"param", "storage_in", "storage_out", "amount", "balance", "now", "sender",
               "source", "chain_id", "self"}
ALIASES = {"storage": "storage_in"}

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<int>\d+)
  | (?P<op><->|->|<=|>=|<>|!=|[-+*/%()=<>\[\],.:])
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
""", re.VERBOSE)

_KEYWORDS = {"and", "or", "not", "if", "then", "else", "true", "false", "forall", "in"}


def _tokens(text):
    pos, out = 0, []
    while pos < len(text):
        mt = _TOKEN.match(text, pos)
        if mt is None:
            raise FormulaError(f"unexpected character {text[pos]!r} at column {pos + 1}")
        kind = mt.lastgroup
        if kind != "ws":
            out.append((kind, mt.group(kind), pos))
        pos = mt.end()
    out.append(("end", "", pos))
    return out


class _Parser:
    def __init__(self, text, logic, bound=()):
        self.toks = _tokens(text)
        self.i = 0
        self.logic = logic
        self.bound = set(bound)

    def peek(self):
        return self.toks[self.i][1]

    def kind(self):
        return self.toks[self.i][0]

    def take(self, expected=None):
        kind, text, pos = self.toks[self.i]
        if expected is not None and text != expected:
            raise FormulaError(f"expected {expected!r} at column {pos + 1}, found {text or 'end of input'!r}")
        self.i += 1
        return text

    def parse(self):
        e = self.expr()
        if self.kind() != "end":
            raise FormulaError(f"unexpected {self.peek()!r} at column {self.toks[self.i][2] + 1}")
        return e

    # precedence climbing -------------------------------------------------

    def expr(self):
        a = self.implication()
        while self.peek() == "<->":
            self.take()
            a = f.iff(as_bool(a), as_bool(self.implication()))
        return a

    def implication(self):
        a = self.disjunction()
        if self.peek() == "->":
            self.take()
            return f.implies(as_bool(a), as_bool(self.implication()))
        return a

    def disjunction(self):
        xs = [self.conjunction()]
        while self.peek() == "or":
            self.take()
            xs.append(self.conjunction())
        return xs[0] if len(xs) == 1 else f.or_(*[as_bool(x) for x in xs])

    def conjunction(self):
        xs = [self.negation()]
        while self.peek() == "and":
            self.take()
            xs.append(self.negation())
        return xs[0] if len(xs) == 1 else f.and_(*[as_bool(x) for x in xs])

    def negation(self):
        if self.peek() == "not":
            self.take()
            return f.not_(as_bool(self.negation()))
        return self.comparison()

    def comparison(self):
        a = self.additive()
        o = self.peek()
        if o in ("=", "<>", "!=", "<", "<=", ">", ">="):
            self.take()
            b = self.additive()
            if o in ("=", "<>", "!="):
                a, b = _unify(a, b)
                return f.eq(a, b) if o == "=" else f.ne(a, b)
            name = {"<": "lt", "<=": "le", ">": "gt", ">=": "ge"}[o]
            a, b = as_int(a), as_int(b)
            # chained bounds such as 1 <= i < n
            if self.peek() in ("<", "<="):
                o2 = {"<": "lt", "<=": "le"}[self.take()]
                c = as_int(self.additive())
                return f.and_(f.op(name, a, b), f.op(o2, b, c))
            return f.op(name, a, b)
        return a

    def additive(self):
        a = self.multiplicative()
        while self.peek() in ("+", "-"):
            o = self.take()
            a = (f.add if o == "+" else f.sub)(as_int(a), as_int(self.multiplicative()))
        return a

    def multiplicative(self):
        a = self.unary()
        while self.peek() in ("*", "/", "%"):
            o = self.take()
            a = f.op({"*": "mul", "/": "div", "%": "mod"}[o], as_int(a), as_int(self.unary()))
        return a

    def unary(self):
        if self.peek() == "-":
            self.take()
            x = self.unary()
            if isinstance(x, f.Lit) and x.sort == f.INT:
                return f.lit(-x.value)
            return f.op("neg", as_int(x))
        return self.atom()

    def atom(self):
        kind, text, pos = self.toks[self.i]
        if kind == "int":
            self.take()
            return f.lit(int(text))
        if text == "(":
            self.take()
            e = self.expr()
            self.take(")")
            return e
        if text in ("true", "false"):
            self.take()
            return f.lit(text == "true")
        if text == "if":
            self.take()
            c = as_bool(self.expr())
            self.take("then")
            a = self.expr()
            self.take("else")
            b = self.expr()
            a, b = _unify(a, b)
            return f.ite(c, a, b)
        if text == "forall":
            return self.quantifier()
        if kind != "name" or text in _KEYWORDS:
            raise FormulaError(f"unexpected {text or 'end of input'!r} at column {pos + 1}")
        self.take()
        return self.named(text)

    def quantifier(self):
        self.take("forall")
        var = self.take()
        self.take(".")
        self.bound.add(var)
        body = as_bool(self.expr())
        self.bound.discard(var)
        # recognise the bounded shape lo <= i < hi -> body
        if (isinstance(body, f.Op) and body.name == "implies"
                and isinstance(body.args[0], f.Op) and body.args[0].name == "and"
                and len(body.args[0].args) == 2):
            lo_c, hi_c = body.args[0].args
            iv = f.Var(var, f.INT)
            if (lo_c.name == "le" and lo_c.args[1] == iv and hi_c.name == "lt" and hi_c.args[0] == iv):
                return f.forall(var, lo_c.args[0], hi_c.args[1], body.args[1])
        return f.forall(var, None, None, body)

    def named(self, name):
        name = ALIASES.get(name, name)
        if name in self.bound:
            return f.Var(name, f.INT)
        if name in STACK_NAMES:
            self.take("[")
            idx = as_int(self.expr())
            self.take("]")
            return f.slot(f.Var(STACK_NAMES[name], f.STACK), idx)
        if name == "len":
            self.take("(")
            s = self.take()
            if s not in STACK_NAMES:
                raise FormulaError("len expects stack or result")
            self.take(")")
            return f.length(f.Var(STACK_NAMES[s], f.STACK))
        if name in VALUE_NAMES:
            return f.Var(name, f.VALUE)
        if name == "fuel":
            return f.Var("fuel", f.INT)
        if self.peek() != "(":
            raise FormulaError(f"unknown name {name}")
        self.take("(")
        args = []
        if self.peek() != ")":
            args.append(self.expr())
            while self.peek() == ",":
                self.take()
                args.append(self.expr())
        self.take(")")
        if name in self.logic:
            return f.Call(name, tuple(as_int(a) for a in args))
        if name not in f.OPS:
            raise FormulaError(f"unknown function {name}")
        return _builtin(name, args)


def _builtin(name, args):
    params, _ = f.OPS[name]
    if params and params[-1] == "...":
        params = params[:-1] + (params[-2],) * (len(args) - len(params) + 1)
    if len(params) != len(args):
        raise FormulaError(f"{name} expects {len(params)} argument(s)")
    out = []
    for want, a in zip(params, args):
        out.append(as_int(a) if want == f.INT else as_bool(a) if want == f.BOOL else a)
    return f.Op(name, tuple(out))


def _sort_of(x):
    if isinstance(x, f.Call):
        return f.INT
    if isinstance(x, f.Op) and x.name == "ite":
        return _sort_of(x.args[1])
    if isinstance(x, (f.Lit, f.Var)):
        return x.sort
    if isinstance(x, (f.Forall, f.Match)):
        return f.BOOL
    sig = f.OPS.get(x.name)
    if sig is None:
        return None
    res = sig[1]
    if res == "*":
        return _sort_of(x.args[-1])
    return res


def as_int(x):
    s = _sort_of(x)
    if s == f.VALUE:
        return f.num(x)
    if s != f.INT:
        raise FormulaError(f"expected an integer term, found {f.render(x)}")
    return x


def as_bool(x):
    s = _sort_of(x)
    if s == f.VALUE:
        return f.op("truth", x)
    if s != f.BOOL:
        raise FormulaError(f"expected a formula, found {f.render(x)}")
    return x


def _unify(a, b):
    sa, sb = _sort_of(a), _sort_of(b)
    if sa == sb:
        return a, b
    if f.INT in (sa, sb):
        return as_int(a), as_int(b)
    if f.BOOL in (sa, sb):
        return as_bool(a), as_bool(b)
    raise FormulaError(f"cannot compare {f.render(a)} with {f.render(b)}")


def parse_formula(text, logic=None, bound=()):
    """Parse an infix formula; the result is a bool-sorted Formula."""
    return as_bool(_Parser(text, logic or {}, bound).parse())


def parse_term(text, logic=None, bound=()):
    """Parse an infix integer term (for variants and logic-function bodies)."""
    return as_int(_Parser(text, logic or {}, bound).parse())


# ---------------------------------------------------------------------------
# Sidecar files


@dataclass
class SpecSidecar:
    requires: list = field(default_factory=list)
    ensures: list = field(default_factory=list)
    logic: dict = field(default_factory=dict)
    invariants: dict = field(default_factory=dict)  # path -> Formula
    variants: dict = field(default_factory=dict)    # path -> int term
    asserts: dict = field(default_factory=dict)     # path -> [Formula]
    source: dict = field(default_factory=dict)      # clause key -> original text

    def validate(self, tp, require_invariants=True):
        """Check paths against a typed program; loops need invariants when proving."""
        for p in list(self.invariants) + list(self.variants):
            node = _node(tp, p)
            if node is None or node.op not in ("LOOP", "LOOP_LEFT", "ITER"):
                raise SpecError(f"invariant@{format_path(p)} does not name a loop")
        for p in self.asserts:
            if _node(tp, p) is None:
                raise SpecError(f"assert@{format_path(p)} does not name an instruction")
        if require_invariants:
            for p in loop_paths(tp.code):
                if p not in self.invariants:
                    raise SpecError(f"loop at {format_path(p)} has no invariant")


def _node(tp, path):
    try:
        return tp.node(path)
    except (IndexError, AttributeError):
        return None


def loop_paths(code, path=()):
    out = []
    if code.op in ("LOOP", "LOOP_LEFT", "ITER"):
        out.append(path)
    for k, b in enumerate(code.blocks):
        out += loop_paths(b, path + (k,))
    return out


_LOGIC_LINE = re.compile(r"logic\s+([A-Za-z_]\w*)\s*\(([^)]*)\)\s*=\s*(.+)$")
_KEYED = re.compile(r"(invariant|variant|assert)@([0-9.]+|root)\s*:\s*(.+)$")


def parse_sidecar(text, filename="<spec>"):
    """Parse a sidecar.

    A logic function is given either by one ``if``-expression body or by
    defining equations, one per line, whose patterns are integer literals
    or the parameter names (the catch-all equation).
    """
    spec = SpecSidecar()
    pending = {}  # name -> (first line number, [(patterns, rhs text)])
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            _parse_line(spec, line, pending, lineno)
        except FormulaError as e:
            raise SpecError(f"{filename}:{lineno}: {e.message}") from None
    for name, (lineno, _) in pending.items():
        raise SpecError(f"{filename}:{lineno}: logic function {name} has no catch-all equation")
    return spec


def _patterns(params):
    out = []
    for p in params.split(","):
        p = p.strip()
        if p:
            out.append(int(p) if re.fullmatch(r"-?\d+", p) else p)
    return tuple(out)


def _define_by_equations(spec, name, equations):
    params = next(pats for pats, _ in equations if not any(isinstance(x, int) for x in pats))
    logic = dict(spec.logic)
    logic[name] = f.LogicFunction(name, params, f.TRUE)
    parsed = [(pats, parse_term(rhs, logic, [x for x in pats if isinstance(x, str)]))
              for pats, rhs in equations]
    spec.logic[name] = f.declare_logic_function(name, params, equations=parsed, logic=spec.logic)


def _parse_line(spec, line, pending, lineno):
    mt = _LOGIC_LINE.match(line)
    if mt:
        name, params, body = mt.groups()
        params = _patterns(params)
        if name in spec.logic:
            raise FormulaError(f"logic function {name} is already defined")
        if any(isinstance(x, int) for x in params) or name in pending:
            pending.setdefault(name, (lineno, []))[1].append((params, body))
            if not any(isinstance(x, int) for x in params):
                _define_by_equations(spec, name, pending.pop(name)[1])
            spec.source.setdefault(f"logic {name}", line)
            return
        logic = dict(spec.logic)
        logic[name] = f.LogicFunction(name, params, f.TRUE)  # allows recursive references
        term = parse_term(body, logic, params)
        spec.logic[name] = f.declare_logic_function(name, params, term, logic=spec.logic)
        spec.source[f"logic {name}"] = line
        return
    mt = _KEYED.match(line)
    if mt:
        kind, path, body = mt.groups()
        path = parse_path(path)
        if kind == "variant":
            spec.variants[path] = parse_term(body, spec.logic)
        elif kind == "invariant":
            if path in spec.invariants:
                raise FormulaError(f"duplicate invariant for {format_path(path)}")
            spec.invariants[path] = parse_formula(body, spec.logic)
        else:
            spec.asserts.setdefault(path, []).append(parse_formula(body, spec.logic))
        spec.source[f"{kind}@{format_path(path)}"] = body.strip()
        return
    head, sep, body = line.partition(":")
    head = head.strip()
    if sep and head in ("requires", "ensures"):
        getattr(spec, head).append(parse_formula(body, spec.logic))
        return
    raise FormulaError(f"unrecognised clause {line!r}")


def load_sidecar(path):
    with open(path, encoding="utf-8") as fh:
        return parse_sidecar(fh.read(), str(path))


def _contract_env(parameter, storage, cfg):
    env = dict(cfg.context()) if cfg is not None else {}
    env.update(param=parameter, storage_in=storage, stack=(m.PairV(parameter, storage),),
               s=(m.PairV(parameter, storage),), fuel=cfg.fuel if cfg is not None else 1)
    return env


def entry_holds(spec, parameter, storage, cfg=None):
    """Whether the contract-level requires hold for a concrete input."""
    env = _contract_env(parameter, storage, cfg)
    return all(f.eval_formula(c, env, spec.logic) for c in spec.requires)


def exit_holds(spec, parameter, storage, final, cfg=None):
    """Whether the contract-level ensures hold for a concrete run.

    *final* is the result stack (a Stack or a tuple of values) of a run
    that ended normally.
    """
    final = tuple(final.slots) if hasattr(final, "slots") else tuple(final)
    env = _contract_env(parameter, storage, cfg)
    env.update(result=final, storage_out=final[0].right)
    return all(f.eval_formula(c, env, spec.logic) for c in spec.ensures)

"""Faithful translation to the verification language.

Every instruction becomes one application ``op __stack__ __fuel__`` of the
opcode's axiomatised function, chained through ``let __stack__ = ... in``.
The header carries the derived safety conditions and any user clauses; the
theory text declares each applied opcode with its contract.
"""

from michv import formula as f
from michv import model as m
from michv.contracts import CONTRACTS, contract_key, operand_env
from michv.errors import VCGenError
from michv.typecheck import annotate_types, format_path, format_stack_ty

PRELUDE = ("use axiomatic.AxiomaticSem", "use dataTypes.DataTypes", "use seq.Seq", "use int.Int")
HEADER_NAMES = {"s": "__stack__", "stack": "__stack__", "fuel": "__fuel__", "result": "result"}
ENTRY_NAMES = {"param": "__param__", "storage_in": "__storage__"}
THEORY_NAMES = {"s": "s", "fuel": "fuel", "result": "result"}

# opcodes whose lowercase name clashes with a keyword or library symbol
_SUFFIXED = {"NIL", "COMPARE", "AND", "OR", "NOT", "XOR", "SHA256", "SHA512", "BLAKE2B",
             "HASH_KEY", "CHECK_SIGNATURE", "INT", "UNIT"}
_WRAP = 80


def why_name(key):
    """Function name of an opcode (or macro) in the verification language."""
    return key.lower() + "_op" if key in _SUFFIXED else key.lower()


def why_value(v):
    if isinstance(v, (m.IntV, m.NatV, m.MutezV, m.TimestampV)):
        ctor = type(v).__name__[:-1]
        return f"({ctor} {v.value})" if v.value >= 0 else f"({ctor} ({v.value}))"
    if isinstance(v, m.BoolV):
        return f"(Bool {'true' if v.value else 'false'})"
    return f"(data_of {m.format_value(v)!r})"


def _operands(i):
    out = []
    for k, v in operand_env(i).items():
        if k == "n" and i.op in ("DUP", "DROP") and not i.args:
            continue
        if isinstance(v, m.Ty):
            out.append(f.why_type(v))
        elif isinstance(v, m.Value):
            out.append(why_value(v))
        else:
            out.append(str(v))
    return "".join(f" {x} " for x in out)


def _clause(keyword, clause, names, indent=2):
    """One requires/ensures line, broken before ``=`` when it runs long."""
    text = f.render_why(clause, names)
    prefix = " " * indent + f"{keyword} {{ "
    if len(prefix) + len(text) + 2 > _WRAP and isinstance(clause, f.Op) and clause.name == "eq":
        lhs = f.render_why(clause.args[0], names)
        rhs = f.render_why(clause.args[1], names)
        return [prefix + lhs, " " * (len(prefix) + 2) + f"= {rhs} }}"]
    return [prefix + text + " }"]


def _rebind(clause, result_stack=False):
    """Express contract-level names over the entry or result stack."""
    entry = f.slot(f.S, 0)
    mapping = {"param": f.op("car", entry), "storage_in": f.op("cdr", entry)}
    if result_stack:
        mapping["storage_out"] = f.op("cdr", f.slot(f.RESULT, 0))
    return f.substitute(clause, mapping)


class _Emitter:
    def __init__(self, tp, spec, annotate):
        self.tp = tp
        self.spec = spec
        self.annotate = dict(annotate_types(tp)) if annotate else None
        self.applied = []

    def leaf(self, i, col):
        key = contract_key(i)
        if key is None:
            raise VCGenError(f"no translation for {i.op}")
        if key not in self.applied:
            self.applied.append(key)
        return [" " * col + f"{why_name(key)} __stack__ __fuel__{_operands(i)}"]

    def emit(self, i, path, col):
        lines = self._emit(i, path, col)
        checks = self.spec.asserts.get(path, ()) if self.spec else ()
        if not checks:
            return lines
        pad = " " * col
        out = self.bind(lines, col + 1)
        out[0] = pad + "(" + out[0][col + 1:]
        names = {"stack": "__stack__", "s": "__stack__", "fuel": "__fuel__", **ENTRY_NAMES}
        out += [pad + f" assert {{ {f.render_why(a, names)} }};" for a in checks]
        return out + [pad + " __stack__)"]

    def _emit(self, i, path, col):
        if i.origin is None and i.op == "SEQ":
            return self.seq(i, path, col)
        if i.origin is None and i.op == "NOP":
            return [" " * col + "__stack__"]
        if i.origin is None and i.op == "DIP":
            return self.dip(i, path, col)
        if i.origin is None and i.op in ("IF", "IF_NONE", "IF_LEFT", "IF_CONS"):
            return self.branch(i, path, col)
        if i.origin is None and i.op in ("LOOP", "LOOP_LEFT", "ITER"):
            return self.loop(i, path, col)
        return self.leaf(i, col)

    def bind(self, lines, col):
        """``let __stack__ = <lines> in`` starting at *col*."""
        head = " " * col + "let __stack__ ="
        if len(lines) == 1:
            return [head + " " + lines[0].lstrip() + " in"]
        inner = self.reindent(lines, col + 2)
        inner[-1] += " in"
        return [head] + inner

    @staticmethod
    def reindent(lines, col):
        base = len(lines[0]) - len(lines[0].lstrip())
        return [" " * col + x[base:] if x.strip() else x for x in lines]

    def seq(self, i, path, col):
        first = self.emit(i.blocks[0], path + (0,), col)
        out = self.bind(first, col)
        if self.annotate is not None and path + (0,) in self.annotate:
            out += self.assertion(self.annotate[path + (0,)], col)
        rest = self.emit(i.blocks[1], path + (1,), col + 1)
        rest[0] = " " * col + "(" + rest[0][col + 1:]
        rest[-1] += ")"
        return out + rest

    def assertion(self, st, col):
        parts = [f"(length __stack__) = {len(st)}"]
        parts += [f"(typ_infer (d (__stack__[{k}]))) = {f.why_type(t)}" for k, t in enumerate(st)]
        return [" " * col + "assert { " + " /\\ ".join(parts) + " };"]

    def dip(self, i, path, col):
        n = i.args[0] if i.args else 1
        pad = " " * col
        body = self.emit(i.blocks[0], path + (0,), col + 2)
        return ([pad + f"(let __top__ = __stack__[.. {n}] in",
                 pad + f" let __stack__ = __stack__[{n} ..] in"]
                + self.bind(self.reindent(body, col + 3), col + 1)
                + [pad + " __top__ ++ __stack__)"])

    def branch(self, i, path, col):
        pad = " " * col
        a = self.reindent(self.emit(i.blocks[0], path + (0,), 0), col + 4)
        b = self.reindent(self.emit(i.blocks[1], path + (1,), 0), col + 4)
        heads = {
            "IF": ("if is_true (d (__stack__[0])) then", "else",
                   "let __stack__ = __stack__[1 ..] in", "let __stack__ = __stack__[1 ..] in"),
            "IF_NONE": ("match d (__stack__[0]) with", "| Some x ->",
                        "let __stack__ = __stack__[1 ..] in",
                        "let __stack__ = cons (data_of_d x) __stack__[1 ..] in"),
            "IF_LEFT": ("match d (__stack__[0]) with", "| Right x ->",
                        "let __stack__ = cons (data_of_d x) __stack__[1 ..] in",
                        "let __stack__ = cons (data_of_d x) __stack__[1 ..] in"),
            "IF_CONS": ("match d (__stack__[0]) with", "| Nil ->",
                        "let __stack__ = cons (data_of_d h) (cons (data_of_d t) __stack__[1 ..]) in",
                        "let __stack__ = __stack__[1 ..] in"),
        }
        open_, sep, bind_a, bind_b = heads[i.op]
        first = {"IF": "", "IF_NONE": "| None ->", "IF_LEFT": "| Left x ->",
                 "IF_CONS": "| Cons h t ->"}[i.op]
        out = [pad + "(" + open_]
        if first:
            out.append(pad + "   " + first)
        out += [pad + "   " + bind_a] + a
        out += [pad + "   " + sep, pad + "   " + bind_b] + b
        out[-1] += (" end)" if i.op != "IF" else ")")
        return out

    def loop(self, i, path, col):
        pad = " " * col
        inv = self.spec.invariants.get(path) if self.spec else None
        names = {"stack": "(!__s__)", "s": "(!__s__)", "fuel": "__fuel__", **ENTRY_NAMES}
        body = self.reindent(self.emit(i.blocks[0], path + (0,), 0), col + 6)
        guard = {"LOOP": "is_true (d ((!__s__)[0]))", "LOOP_LEFT": "is_left (d ((!__s__)[0]))",
                 "ITER": "length (items (d ((!__s__)[0]))) > 0"}[i.op]
        out = [pad + "(let __s__ = ref __stack__ in", pad + f" while {guard} do"]
        if inv is None:
            out.append(pad + f"   (* no invariant given for the loop at {format_path(path)} *)")
        else:
            out.append(pad + f"   invariant {{ {f.render_why(inv, names)} }}")
        if self.spec and path in self.spec.variants:
            out.append(pad + f"   variant {{ {f.render_why(self.spec.variants[path], names)} }}")
        out.append(pad + "   __s__ := (let __stack__ = step_in (!__s__) in")
        body[-1] += ")"
        out += body
        out += [pad + " done;", pad + " step_out (!__s__))"]
        return out


def translate_faithful(tp, spec=None, name="test", annotate_types=False, safety=None):
    """The function text for a typed contract (header plus let-chain body)."""
    from michv.typecheck import SafetySpec
    if safety is None:
        safety = SafetySpec(len(tp.entry), tp.entry[0], len(tp.final), tp.final[0])
    em = _Emitter(tp, spec, annotate_types)
    lines = list(PRELUDE)
    for fn in (spec.logic.values() if spec else ()):
        ps = " ".join(f"({p}: int)" for p in fn.params)
        lines.append(f"let rec function {fn.name} {ps} : int = {f.render_why(fn.body)}")
    lines.append(f"let {name} (__stack__: stack_t) (__fuel__: int) : stack_t")
    for c in list(safety.requires()) + [_rebind(c) for c in (spec.requires if spec else ())]:
        lines += _clause("requires", c, HEADER_NAMES)
    ensures = list(safety.ensures()) + [_rebind(c, True) for c in (spec.ensures if spec else ())]
    for c in ensures:
        lines += _clause("ensures", c, HEADER_NAMES)
    lines[-1] += " ="
    body = em.emit(tp.code, (), 4)
    if spec and _mentions_entry(spec):
        lines.append("  let __param__ = car (__stack__[0]) in")
        lines.append("  let __storage__ = cdr (__stack__[0]) in")
    lines += em.bind(body, 2)
    lines.append("  __stack__")
    text = "\n".join(lines) + "\n"
    return text


def _mentions_entry(spec):
    loop_clauses = list(spec.invariants.values()) + list(spec.variants.values())
    loop_clauses += [a for xs in spec.asserts.values() for a in xs]
    return any(f.free_vars(c) & set(ENTRY_NAMES) for c in loop_clauses)


def applied_opcodes(tp):
    """Contract keys of every instruction node, in first-use order."""
    em = _Emitter(tp, None, False)
    em.emit(tp.code, (), 0)
    return list(em.applied)


def theory_text(keys):
    """``val`` declarations with the contracts of the given opcodes."""
    out = []
    for key in keys:
        c = CONTRACTS[key]
        params = "".join(f" ({p}: {'int' if p == 'n' else 'typ' if p == 'ty' else 'data'})" for p in c.operands)
        out.append(f"val {why_name(key)} (s: stack_t) (fuel: int){params} : stack_t")
        for clause in c.requires:
            out += _clause("requires", clause, THEORY_NAMES)
        for clause in c.ensures:
            out += _clause("ensures", clause, THEORY_NAMES)
        out.append("")
    return "\n".join(out)


def audit(tp, spec=None):
    """Clauses of applied opcodes missing from either backend.

    Returns a list of (opcode, role, backend) triples; empty when the
    faithful theory and the monomorphic generator both account for every
    clause of every applied contract.
    """
    from michv.mono import mono_coverage
    keys = applied_opcodes(tp)
    theory = theory_text(keys)
    used = mono_coverage(tp, spec)
    missing = []
    for key in keys:
        for role, clause in CONTRACTS[key].clauses():
            rendered = _clause("requires" if role.startswith("pre") else "ensures", clause, THEORY_NAMES)
            if "\n".join(rendered) not in theory:
                missing.append((key, role, "faithful"))
            if (key, role) not in used:
                missing.append((key, role, "mono"))
    return missing


def describe_types(tp):
    """Human-readable stack types at every sequence boundary."""
    return [(format_path(p), format_stack_ty(st)) for p, st in annotate_types(tp)]

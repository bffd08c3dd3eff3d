"""Fuel-bounded operational semantics.

``exec_instr`` runs an instruction tree on a stack and returns an Outcome.
Every executed instruction other than SEQ/NOP costs one unit of fuel, as
does every loop iteration; starting (or continuing) with no fuel left gives
``FuelExhausted``. With ``check_contracts`` set, each opcode's axiomatic
contract is evaluated around its execution and the first false clause
stops the run with ``ContractViolation``.
"""

from dataclasses import dataclass, field, replace

from michv import model as m
from michv.contracts import CONTRACTS, operand_env
from michv.errors import FormulaError, MichvError
from michv.formula import render
from michv.stack import Stack
from michv.syntax import expand_macros
from michv.typecheck import ARITH, format_path


class InterpreterError(MichvError):
    """An internal invariant broke (ill-typed program or input)."""

    exit_code = 1


# ---------------------------------------------------------------------------
# Outcomes


@dataclass(frozen=True)
class Success:
    stack: Stack
    fuel_left: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Failed:
    value: m.Value


@dataclass(frozen=True)
class FuelExhausted:
    pass


@dataclass(frozen=True)
class ContractViolation:
    path: tuple
    opcode: str
    clause: str
    detail: str = ""

    def describe(self):
        return f"{self.opcode} at {format_path(self.path)}: {self.clause}" + \
            (f" ({self.detail})" if self.detail else "")


@dataclass(frozen=True)
class ExecConfig:
    fuel: int = 10_000
    amount: m.Value = m.MutezV(0)
    balance: m.Value = m.MutezV(0)
    now: m.Value = m.TimestampV(0)
    sender: m.Value = m.AddressV("tz1sender")
    source: m.Value = m.AddressV("tz1source")
    self_address: m.Value = m.AddressV("KT1self")
    chain_id: m.Value = m.ChainIdV("NetXchain")
    parameter_ty: m.Ty = m.UNIT
    check_contracts: bool = False
    contracts: dict = None  # override of the contract table (fault seeding)
    trace: object = None    # callable(event, path, instr, stack tuple)

    def context(self):
        return {
            "amount": self.amount, "balance": self.balance, "now": self.now,
            "sender": self.sender, "source": self.source, "chain_id": self.chain_id,
            "self": m.ContractV(self.self_address.value, self.parameter_ty),
        }


def sign(key, payload):
    """Signature that CHECK_SIGNATURE accepts for exactly this key and payload."""
    return m.SignatureV("sig:" + m.digest(m.PairV(key, payload)))


MUTEZ_OVERFLOW = m.StringV("mutez overflow")
MUTEZ_UNDERFLOW = m.StringV("mutez underflow")


# ---------------------------------------------------------------------------
# Primitive steps


class _Fail(Exception):
    def __init__(self, value):
        self.value = value


class _OutOfFuel(Exception):
    pass


class _Violation(Exception):
    def __init__(self, outcome):
        self.outcome = outcome


_NUMERIC = {"int": m.IntV, "nat": m.NatV, "mutez": m.MutezV, "timestamp": m.TimestampV}


def _numeric(ty, x):
    if ty.name == "mutez":
        if x > m.MUTEZ_MAX:
            raise _Fail(MUTEZ_OVERFLOW)
        if x < 0:
            raise _Fail(MUTEZ_UNDERFLOW)
    return _NUMERIC[ty.name](x)


def _euclid(a, b):
    q, r = divmod(a, b)
    if r < 0:  # only when b < 0: shift the remainder into [0, |b|)
        r -= b
        q += 1
    return q, r


def _binary_arith(op, a, b):
    res = ARITH[op].get((m.typ_infer(a).name, m.typ_infer(b).name))
    if res is None:
        raise InterpreterError(f"{op} on {m.format_value(a)}, {m.format_value(b)}")
    x, y = a.value, b.value
    if op == "ADD":
        return _numeric(res, x + y)
    if op == "SUB":
        return _numeric(res, x - y)
    if op == "MUL":
        return _numeric(res, x * y)
    # EDIV
    q_ty, r_ty = res.args[0].args
    if y == 0:
        return m.NoneV(res.args[0])
    q, r = _euclid(x, y)
    return m.SomeV(m.PairV(_NUMERIC[q_ty.name](q), _NUMERIC[r_ty.name](r)))


def _bitwise(op, a, b):
    if isinstance(a, m.BoolV):
        x, y = a.value, b.value
        return m.BoolV({"AND": x and y, "OR": x or y, "XOR": x != y}[op])
    x, y = a.value, b.value
    return m.NatV({"AND": x & y, "OR": x | y, "XOR": x ^ y}[op])


_SIGNS = {
    "EQ": lambda c: c == 0, "NEQ": lambda c: c != 0, "LT": lambda c: c < 0,
    "LE": lambda c: c <= 0, "GT": lambda c: c > 0, "GE": lambda c: c >= 0,
}


def _hash(tag, v, ty=m.BYTES):
    return m.AbstractV(tag, m.digest(v), ty, origin=v)


def _update(k, v, coll):
    if isinstance(coll, m.SetV):
        present = m.set_member(coll, k)
        if v.value == present:
            return coll
        items = [x for x in coll.items if m.compare(x, k) != 0]
        if v.value:
            items.append(k)
        return m.make_set(items, coll.elem)
    items = [(x, y) for x, y in coll.items if m.compare(x, k) != 0]
    if isinstance(v, m.SomeV):
        items.append((k, v.value))
    return m.make_map(items, coll.key, coll.val, coll.big)


def _size(v):
    if isinstance(v, (m.StringV, m.BytesV)):
        return len(v.value)
    return len(v.items)


def step(instr, st, cfg):
    """Execute one primitive instruction on a tuple stack; returns the new tuple.

    Raises ``_Fail`` for a legal contract failure.
    """
    op = instr.op
    args = instr.args
    if op in ("ADD", "SUB", "MUL", "EDIV"):
        return (_binary_arith(op, st[0], st[1]),) + st[2:]
    if op in ("AND", "OR", "XOR"):
        return (_bitwise(op, st[0], st[1]),) + st[2:]
    if op in _SIGNS:
        return (m.BoolV(_SIGNS[op](st[0].value)),) + st[1:]
    if op == "COMPARE":
        return (m.IntV(m.compare(st[0], st[1])),) + st[2:]
    if op == "NEG":
        return (m.IntV(-st[0].value),) + st[1:]
    if op == "ABS":
        return (m.NatV(abs(st[0].value)),) + st[1:]
    if op == "ISNAT":
        x = st[0].value
        return ((m.SomeV(m.NatV(x)) if x >= 0 else m.NoneV(m.NAT)),) + st[1:]
    if op == "INT":
        return (m.IntV(st[0].value),) + st[1:]
    if op == "NOT":
        x = st[0]
        return ((m.BoolV(not x.value) if isinstance(x, m.BoolV) else m.IntV(~x.value)),) + st[1:]
    if op == "CAR":
        return (st[0].left,) + st[1:]
    if op == "CDR":
        return (st[0].right,) + st[1:]
    if op == "PAIR":
        return (m.PairV(st[0], st[1]),) + st[2:]
    if op == "SWAP":
        return (st[1], st[0]) + st[2:]
    if op == "DUP":
        n = args[0] if args else 1
        return (st[n - 1],) + st
    if op == "DROP":
        return st[(args[0] if args else 1):]
    if op == "DIG":
        n = args[0]
        return (st[n],) + st[:n] + st[n + 1:]
    if op == "DUG":
        n = args[0]
        return st[1:n + 1] + (st[0],) + st[n + 1:]
    if op == "PUSH":
        return (args[1],) + st
    if op == "UNIT":
        return (m.UNIT_V,) + st
    if op == "NIL":
        return (m.ListV((), args[0]),) + st
    if op == "NONE":
        return (m.NoneV(args[0]),) + st
    if op == "SOME":
        return (m.SomeV(st[0]),) + st[1:]
    if op == "LEFT":
        return (m.LeftV(st[0], args[0]),) + st[1:]
    if op == "RIGHT":
        return (m.RightV(st[0], args[0]),) + st[1:]
    if op == "CONS":
        lst = st[1]
        return (m.ListV((st[0],) + lst.items, lst.elem),) + st[2:]
    if op == "MEM":
        coll = st[1]
        found = m.set_member(coll, st[0]) if isinstance(coll, m.SetV) else m.map_get(coll, st[0]) is not None
        return (m.BoolV(found),) + st[2:]
    if op == "GET":
        x = m.map_get(st[1], st[0])
        return ((m.NoneV(st[1].val) if x is None else m.SomeV(x)),) + st[2:]
    if op == "UPDATE":
        return (_update(st[0], st[1], st[2]),) + st[3:]
    if op == "SIZE":
        return (m.NatV(_size(st[0])),) + st[1:]
    if op == "CONCAT":
        x = st[0]
        if isinstance(x, m.ListV):
            if x.elem == m.STRING:
                return (m.StringV("".join(e.value for e in x.items)),) + st[1:]
            return (m.BytesV(b"".join(e.value for e in x.items)),) + st[1:]
        return (type(x)(x.value + st[1].value),) + st[2:]
    if op == "FAILWITH":
        raise _Fail(st[0])
    if op in ("SHA256", "SHA512", "BLAKE2B"):
        return (_hash(op.lower(), st[0]),) + st[1:]
    if op == "HASH_KEY":
        return (_hash("hash_key", st[0], m.KEY_HASH),) + st[1:]
    if op == "CHECK_SIGNATURE":
        key, sig, payload = st[0], st[1], st[2]
        return (m.BoolV(sig == sign(key, payload)),) + st[3:]
    if op == "PACK":
        return (_hash("pack", st[0]),) + st[1:]
    if op == "UNPACK":
        x, want = st[0], args[0]
        ok = (isinstance(x, m.AbstractV) and x.tag == "pack" and x.origin is not None
              and m.typ_infer(x.origin) == want)
        return ((m.SomeV(x.origin) if ok else m.NoneV(want)),) + st[1:]
    if op == "AMOUNT":
        return (cfg.amount,) + st
    if op == "BALANCE":
        return (cfg.balance,) + st
    if op == "NOW":
        return (cfg.now,) + st
    if op == "SENDER":
        return (cfg.sender,) + st
    if op == "SOURCE":
        return (cfg.source,) + st
    if op == "CHAIN_ID":
        return (cfg.chain_id,) + st
    if op == "SELF":
        return (m.ContractV(cfg.self_address.value, cfg.parameter_ty),) + st
    if op == "TRANSFER_TOKENS":
        return (m.OperationV("transfer_tokens", (st[0], st[1], st[2])),) + st[3:]
    if op == "SET_DELEGATE":
        return (m.OperationV("set_delegate", (st[0],)),) + st[1:]
    raise InterpreterError(f"no semantics for {op}")


# ---------------------------------------------------------------------------
# The machine


class _Machine:
    def __init__(self, cfg):
        self.cfg = cfg
        self.fuel = cfg.fuel
        self.trace = cfg.trace
        self.table = cfg.contracts if cfg.contracts is not None else CONTRACTS
        self.ctx = cfg.context() if cfg.check_contracts else None

    def charge(self):
        if self.fuel <= 0:
            raise _OutOfFuel()
        self.fuel -= 1

    # contract checking -----------------------------------------------------

    def _env(self, instr, st, fuel):
        env = dict(self.ctx)
        env.update(operand_env(instr))
        env["s"] = st
        env["fuel"] = fuel
        return env

    def _check(self, contract, role, env, path, instr):
        for k, (fn, clause) in enumerate(zip(contract.compiled(role), getattr(contract, role))):
            try:
                ok = fn(env)
            except FormulaError as e:
                ok, why = False, str(e)
            else:
                why = ""
            if not ok:
                kind = "precondition" if role == "requires" else "postcondition"
                raise _Violation(ContractViolation(path, contract.opcode, f"{kind}.{k}: {render(clause)}", why))

    def checked(self, contract, instr, path, st, run, fuel):
        if fuel <= 0:
            raise _OutOfFuel()
        env = self._env(instr, st, fuel)
        self._check(contract, "requires", env, path, instr)
        fails = contract.compiled("fails_if")
        try:
            out = run()
        except _Fail:
            if fails is None or not fails(env):
                raise _Violation(ContractViolation(path, contract.opcode, "unexpected failure"))
            raise
        if fails is not None and fails(env):
            raise _Violation(ContractViolation(path, contract.opcode, "expected a failure"))
        env["result"] = out
        self._check(contract, "ensures", env, path, instr)
        return out

    # execution ---------------------------------------------------------------

    def run(self, instr, path, st):
        if self.trace is not None:
            self.trace("enter", path, instr, st)
        if self.ctx is not None and instr.origin is not None and instr.origin in self.table:
            out = self.checked(self.table[instr.origin], instr, path, st,
                               lambda: self._run(instr, path, st), self.fuel)
        else:
            out = self._run(instr, path, st)
        if self.trace is not None:
            self.trace("exit", path, instr, out)
        return out

    def _run(self, instr, path, st):
        op = instr.op
        if op == "SEQ":
            st = self.run(instr.blocks[0], path + (0,), st)
            return self.run(instr.blocks[1], path + (1,), st)
        if op == "NOP":
            return st
        self.charge()
        if op == "DIP":
            n = instr.args[0] if instr.args else 1
            return st[:n] + self.run(instr.blocks[0], path + (0,), st[n:])
        if op == "IF":
            branch = 0 if st[0].value else 1
            return self.run(instr.blocks[branch], path + (branch,), st[1:])
        if op == "IF_NONE":
            x = st[0]
            if isinstance(x, m.SomeV):
                return self.run(instr.blocks[1], path + (1,), (x.value,) + st[1:])
            return self.run(instr.blocks[0], path + (0,), st[1:])
        if op == "IF_LEFT":
            x = st[0]
            branch = 0 if isinstance(x, m.LeftV) else 1
            return self.run(instr.blocks[branch], path + (branch,), (x.value,) + st[1:])
        if op == "IF_CONS":
            x = st[0]
            if x.items:
                return self.run(instr.blocks[0], path + (0,),
                                (x.items[0], m.ListV(x.items[1:], x.elem)) + st[1:])
            return self.run(instr.blocks[1], path + (1,), st[1:])
        if op == "LOOP":
            body = instr.blocks[0]
            while st[0].value:
                self.charge()
                st = self.run(body, path + (0,), st[1:])
            return st[1:]
        if op == "LOOP_LEFT":
            body = instr.blocks[0]
            while isinstance(st[0], m.LeftV):
                self.charge()
                st = self.run(body, path + (0,), (st[0].value,) + st[1:])
            return (st[0].value,) + st[1:]
        if op == "ITER":
            coll, st = st[0], st[1:]
            items = coll.items
            if isinstance(coll, m.MapV):
                items = [m.PairV(k, v) for k, v in items]
            for x in items:
                self.charge()
                st = self.run(instr.blocks[0], path + (0,), (x,) + st)
            return st
        if self.ctx is not None and op in self.table:
            return self.checked(self.table[op], instr, path, st,
                                lambda: step(instr, st, self.cfg), self.fuel + 1)
        return step(instr, st, self.cfg)


def exec_instr(instr, stack, cfg=ExecConfig()):
    """Run *instr* on *stack* (a Stack or a sequence of values)."""
    st = tuple(stack.slots if isinstance(stack, Stack) else stack)
    machine = _Machine(cfg)
    try:
        if machine.fuel <= 0:
            raise _OutOfFuel()
        out = machine.run(expand_macros(instr), (), st)
    except _Fail as e:
        return Failed(e.value)
    except _OutOfFuel:
        return FuelExhausted()
    except _Violation as v:
        return v.outcome
    except (AttributeError, IndexError, TypeError, KeyError) as e:
        raise InterpreterError(f"execution of an ill-typed program: {e}") from e
    return Success(Stack(out), machine.fuel)


def run_contract(c, parameter, storage, cfg=None):
    """Run a contract on ``[Pair parameter storage]`` and check the result shape."""
    if m.typ_infer(parameter) != c.parameter:
        raise InterpreterError(f"parameter has type {m.typ_infer(parameter)}, expected {c.parameter}")
    if m.typ_infer(storage) != c.storage:
        raise InterpreterError(f"storage has type {m.typ_infer(storage)}, expected {c.storage}")
    if cfg is None:
        cfg = ExecConfig(parameter_ty=c.parameter)
    elif cfg.parameter_ty != c.parameter:
        cfg = replace(cfg, parameter_ty=c.parameter)
    out = exec_instr(c.code, (m.PairV(parameter, storage),), cfg)
    if isinstance(out, Success):
        want = (m.pair(m.list_(m.OPERATION), c.storage),)
        if out.stack.ty_of() != want:
            raise InterpreterError(f"contract returned a stack of type {out.stack.ty_of()}")
    return out


def result_storage(outcome):
    """The storage component of a successful contract run."""
    return outcome.stack.slots[0].right


def result_operations(outcome):
    return outcome.stack.slots[0].left

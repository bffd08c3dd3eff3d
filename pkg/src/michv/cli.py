"""Command-line driver: parse, typecheck, run, vcgen, prove, contracts.

Artifacts go to stdout; diagnostics go to stderr as
``file:line:col: severity: message``.
"""

import argparse
import json
import os
import sys

from michv import formula as f
from michv import model as m
from michv.contracts import CONTRACTS, dump
from michv.errors import MichvError
from michv.faithful import theory_text, applied_opcodes, translate_faithful
from michv.interpreter import ContractViolation, ExecConfig, Failed, FuelExhausted, Success, run_contract
from michv.mono import generate_vcs_mono
from michv.sidecar import SpecSidecar, load_sidecar
from michv.smt import emit_smt
from michv.solver import default_config, load_config, report, report_json, run_all
from michv.syntax import parse_source, pretty_print, expand_contract
from michv.typecheck import annotate_types, derive_safety_spec, format_path, format_stack_ty, typecheck

OK, PARSE, TYPE, FAILED, FUEL, VIOLATION, NOT_PROVED, USAGE = 0, 2, 3, 4, 5, 6, 7, 8


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="michv", description="Michelson contract checker and verifier")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("parse", help="parse and pretty-print a contract")
    sp.add_argument("file")
    sp.add_argument("--expand", action="store_true", help="expand macros before printing")

    sp = sub.add_parser("typecheck", help="print stack types and the safety specification")
    sp.add_argument("file")
    sp.add_argument("--format", choices=("text", "json"), default="text")

    sp = sub.add_parser("run", help="execute a contract")
    sp.add_argument("file")
    sp.add_argument("--parameter", required=True)
    sp.add_argument("--storage", required=True)
    sp.add_argument("--fuel", type=int, default=ExecConfig.fuel)
    sp.add_argument("--amount", type=int, default=0)
    sp.add_argument("--balance", type=int, default=0)
    sp.add_argument("--now", type=int, default=0)
    sp.add_argument("--check-contracts", action="store_true")
    sp.add_argument("--trace", action="store_true")

    sp = sub.add_parser("vcgen", help="emit verification conditions")
    sp.add_argument("file")
    sp.add_argument("--mode", choices=("faithful", "mono"), default="faithful")
    sp.add_argument("--spec")
    sp.add_argument("--name", default="test", help="function name in faithful mode")
    sp.add_argument("--annotate-types", action="store_true")
    sp.add_argument("--theory", action="store_true", help="append opcode declarations (faithful mode)")
    sp.add_argument("-o", "--output")

    sp = sub.add_parser("prove", help="generate VCs and discharge them with external solvers")
    sp.add_argument("file")
    sp.add_argument("--spec")
    sp.add_argument("--solver", action="append", default=[])
    sp.add_argument("--solver-config")
    sp.add_argument("--timeout", type=float, default=10.0)
    sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    sp.add_argument("--format", choices=("text", "json"), default="text")
    sp.add_argument("--no-times", action="store_true")

    sp = sub.add_parser("contracts", help="inspect the opcode contract table")
    sp.add_argument("action", choices=("dump", "list"))
    sp.add_argument("opcode", nargs="?")
    return p


def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _load(path):
    return parse_source(_read(path))


def _spec(args):
    return load_sidecar(args.spec) if args.spec else SpecSidecar()


def cmd_parse(args, out):
    c = _load(args.file)
    if args.expand:
        c = expand_contract(c)
    out.write(pretty_print(c))
    return OK


def cmd_typecheck(args, out):
    c = _load(args.file)
    tp = typecheck(c)
    safety = derive_safety_spec(c)
    bounds = annotate_types(tp)
    if args.format == "json":
        doc = {
            "file": args.file,
            "boundaries": [{"path": format_path(p), "stack": [str(t) for t in st]} for p, st in bounds],
            "safety": {"requires": [f.render(x) for x in safety.requires()],
                       "ensures": [f.render(x) for x in safety.ensures()]},
        }
        out.write(json.dumps(doc, indent=2) + "\n")
        return OK
    for p, st in bounds:
        out.write(f"{format_path(p)}: {format_stack_ty(st)}\n")
    for x in safety.requires():
        out.write(f"requires {f.render(x)}\n")
    for x in safety.ensures():
        out.write(f"ensures {f.render(x)}\n")
    return OK


def cmd_run(args, out, err):
    c = _load(args.file)
    typecheck(c)
    parameter = m.parse_literal(args.parameter, c.parameter)
    storage = m.parse_literal(args.storage, c.storage)

    def trace(event, path, instr, stack):
        if event == "exit" and (instr.origin or instr.op not in ("SEQ", "NOP")):
            rendered = " ; ".join(m.format_value(v) for v in stack) or "[]"
            err.write(f"{format_path(path)} {instr.origin or instr.op}: {rendered}\n")

    cfg = ExecConfig(fuel=args.fuel, amount=m.MutezV(args.amount), balance=m.MutezV(args.balance),
                     now=m.TimestampV(args.now), parameter_ty=c.parameter,
                     check_contracts=args.check_contracts, trace=trace if args.trace else None)
    outcome = run_contract(c, parameter, storage, cfg)
    if isinstance(outcome, Success):
        out.write(m.format_value(outcome.stack.slots[0]) + "\n")
        return OK
    if isinstance(outcome, Failed):
        err.write(f"{args.file}: failed with {m.format_value(outcome.value)}\n")
        return FAILED
    if isinstance(outcome, FuelExhausted):
        err.write(f"{args.file}: fuel exhausted\n")
        return FUEL
    if isinstance(outcome, ContractViolation):
        err.write(f"{args.file}: contract violation: {outcome.describe()}\n")
        return VIOLATION
    raise AssertionError(outcome)


def cmd_vcgen(args, out):
    c = _load(args.file)
    tp = typecheck(c)
    spec = _spec(args)
    spec.validate(tp, require_invariants=args.mode == "mono")
    if args.mode == "faithful":
        text = translate_faithful(tp, spec, args.name, args.annotate_types)
        if args.theory:
            text += "\n" + theory_text(applied_opcodes(tp))
        if args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            out.write(text)
        return OK
    vcs = generate_vcs_mono(tp, spec)
    if not args.output:
        for vc in vcs:
            out.write(emit_smt(vc))
        return OK
    os.makedirs(args.output, exist_ok=True)
    index = []
    for k, vc in enumerate(vcs):
        name = f"{k:04d}_{_file_safe(vc.name)}.smt2"
        with open(os.path.join(args.output, name), "w", encoding="utf-8") as fh:
            fh.write(emit_smt(vc))
        index.append({"vc": vc.name, "file": name, "path": format_path(vc.path), "role": vc.role})
    with open(os.path.join(args.output, "index.json"), "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=2)
        fh.write("\n")
    out.write(f"{len(vcs)} VCs written to {args.output}\n")
    return OK


def _file_safe(name):
    return "".join(ch if ch.isalnum() or ch in "._-" else "_" for ch in name)


def cmd_prove(args, out):
    c = _load(args.file)
    tp = typecheck(c)
    spec = _spec(args)
    spec.validate(tp, require_invariants=True)
    if args.timeout <= 0 or args.jobs < 1:
        raise UsageError("--timeout must be positive and --jobs at least 1")
    configs = []
    if args.solver_config:
        configs = load_config(args.solver_config, args.timeout, args.jobs)
        if args.solver:
            named = {cfg.name: cfg for cfg in configs}
            configs = [named[n] if n in named else default_config(n, args.timeout, args.jobs)
                       for n in args.solver]
    else:
        configs = [default_config(n, args.timeout, args.jobs) for n in (args.solver or ["z3"])]
    vcs = generate_vcs_mono(tp, spec)
    verdicts = run_all(vcs, configs, args.jobs)
    text, code = (report_json if args.format == "json" else report)(verdicts, times=not args.no_times)
    out.write(text)
    return code


def cmd_contracts(args, out):
    if args.action == "list":
        out.write("\n".join(sorted(CONTRACTS)) + "\n")
        return OK
    if not args.opcode:
        raise UsageError("contracts dump needs an opcode")
    key = args.opcode.upper()
    if key not in CONTRACTS:
        raise UsageError(f"no contract for opcode {args.opcode}")
    out.write(dump(CONTRACTS[key]))
    return OK


def _diagnose(e, args, err, fmt):
    filename = getattr(args, "file", None) or "<input>"
    if e.source is None and e.span is not None and filename != "<input>":
        try:
            e.source = _read(filename)
        except UsageError:
            pass
    if fmt == "json":
        loc = e.location() or (1, 1)
        err.write(json.dumps({"file": filename, "line": loc[0], "col": loc[1], "severity": "error",
                              "message": e.message}) + "\n")
    else:
        err.write(e.diagnostic(filename) + "\n")


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        err.write(f"michv: usage error: {e}\n")
        return USAGE
    try:
        if args.command == "parse":
            return cmd_parse(args, out)
        if args.command == "typecheck":
            return cmd_typecheck(args, out)
        if args.command == "run":
            return cmd_run(args, out, err)
        if args.command == "vcgen":
            return cmd_vcgen(args, out)
        if args.command == "prove":
            return cmd_prove(args, out)
        return cmd_contracts(args, out)
    except UsageError as e:
        err.write(f"michv: usage error: {e}\n")
        return USAGE
    except MichvError as e:
        _diagnose(e, args, err, getattr(args, "format", "text"))
        return e.exit_code


def entry():
    sys.exit(main())

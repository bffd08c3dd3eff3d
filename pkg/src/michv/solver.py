"""External SMT solver dispatch.

Each attempt writes one script to a fresh temporary file and runs one
solver process in its own session, so a timeout can kill the whole process
group. Solvers are tried in the configured order until one answers
``unsat`` (Valid) or ``sat`` (Invalid).
"""

import json
import os
import shlex
import signal
import subprocess
import tempfile
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from michv.errors import MichvError
from michv.smt import emit_smt

VALID, INVALID, UNKNOWN, TIMEOUT, SOLVER_ERROR = "Valid", "Invalid", "Unknown", "Timeout", "SolverError"
STATUSES = (VALID, INVALID, UNKNOWN, TIMEOUT, SOLVER_ERROR)
NOT_PROVED = 7

DEFAULT_COMMANDS = {
    "z3": "z3 -smt2 {file}",
    "cvc5": "cvc5 --lang=smt2 {file}",
    "cvc4": "cvc4 --lang=smt2 {file}",
}


class ConfigError(MichvError):
    exit_code = 8


@dataclass(frozen=True)
class SolverConfig:
    name: str
    command: tuple
    timeout: float = 10.0
    jobs: int = 1

    def __post_init__(self):
        if not self.timeout > 0:
            raise ConfigError(f"solver {self.name}: timeout must be positive")
        if self.jobs < 1:
            raise ConfigError(f"solver {self.name}: parallelism must be at least 1")
        if not any("{file}" in part for part in self.command):
            raise ConfigError(f"solver {self.name}: command has no {{file}} placeholder")

    @classmethod
    def from_template(cls, name, template, timeout=10.0, jobs=1):
        return cls(name, tuple(shlex.split(template)), timeout, jobs)

    def argv(self, path):
        return [part.replace("{file}", path) for part in self.command]


@dataclass(frozen=True)
class Verdict:
    name: str
    status: str
    time: float
    prover: str
    detail: str = ""

    def describe(self):
        return f"{self.status}({self.detail})" if self.status == SOLVER_ERROR and self.detail else self.status


def parse_config(text, timeout=10.0, jobs=1):
    """``solver <name> <command with {file}>`` lines; ``#`` starts a comment."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 2)
        if len(parts) < 3 or parts[0] != "solver":
            raise ConfigError(f"line {lineno}: expected 'solver <name> <command>'")
        out.append(SolverConfig.from_template(parts[1], parts[2], timeout, jobs))
    return out


def load_config(path, timeout=10.0, jobs=1):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), timeout, jobs)


def default_config(name, timeout=10.0, jobs=1):
    if name not in DEFAULT_COMMANDS:
        raise ConfigError(f"unknown solver {name}; known: {', '.join(sorted(DEFAULT_COMMANDS))}")
    return SolverConfig.from_template(name, DEFAULT_COMMANDS[name], timeout, jobs)


def _kill_group(proc):
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        pass
    proc.wait()


def solve(script, cfg):
    """Run one solver on one script; returns (status, detail, seconds)."""
    fd, path = tempfile.mkstemp(suffix=".smt2", prefix="michv-")
    start = time.monotonic()
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(script)
        try:
            proc = subprocess.Popen(cfg.argv(path), stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                                    stdin=subprocess.DEVNULL, text=True, start_new_session=True)
        except OSError as e:
            return SOLVER_ERROR, f"cannot start {cfg.command[0]}: {e.strerror or e}", time.monotonic() - start
        try:
            out, err = proc.communicate(timeout=cfg.timeout)
        except subprocess.TimeoutExpired:
            _kill_group(proc)
            return TIMEOUT, "", time.monotonic() - start
        finally:
            if proc.poll() is None:
                _kill_group(proc)
        elapsed = time.monotonic() - start
        answer = out.strip().splitlines()[0].strip() if out.strip() else ""
        if answer == "unsat":
            return VALID, "", elapsed
        if answer == "sat":
            return INVALID, "", elapsed
        if answer in ("unknown", "timeout"):
            return (UNKNOWN if answer == "unknown" else TIMEOUT), "", elapsed
        message = (err.strip() or out.strip() or f"exit status {proc.returncode}").splitlines()[0]
        return SOLVER_ERROR, message, elapsed
    finally:
        os.unlink(path)


def check(vc, configs):
    """Try *configs* in order until one decides the VC."""
    if not configs:
        return Verdict(vc.name, SOLVER_ERROR, 0.0, "-", "no solver configured")
    script = emit_smt(vc)
    total = 0.0
    verdict = None
    for cfg in configs:
        status, detail, elapsed = solve(script, cfg)
        total += elapsed
        verdict = Verdict(vc.name, status, total, cfg.name, detail)
        if status in (VALID, INVALID):
            break
    return verdict


def run_all(vcs, configs, jobs=None):
    """Verdicts for every VC, sorted by VC name."""
    vcs = list(vcs)
    if not vcs:
        return []
    configs = list(configs)
    if jobs is None:
        jobs = max((c.jobs for c in configs), default=1)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        verdicts = list(pool.map(lambda vc: check(vc, configs), vcs))
    return sorted(verdicts, key=lambda v: v.name)


def report(verdicts, times=True):
    """A verdict table with per-status and per-prover summaries, plus the exit status."""
    rows = [("VC", "status", "time", "prover")] if times else [("VC", "status", "prover")]
    for v in verdicts:
        row = (v.name, v.describe(), f"{v.time:.2f}s", v.prover) if times else (v.name, v.describe(), v.prover)
        rows.append(row)
    widths = [max(len(r[k]) for r in rows) for k in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    by_status = Counter(v.status for v in verdicts)
    by_prover = Counter(v.prover for v in verdicts if v.status == VALID)
    lines.append("")
    lines.append(f"{len(verdicts)} VCs: " + ", ".join(f"{by_status[s]} {s}" for s in STATUSES if by_status[s]))
    if by_prover:
        lines.append("proved by: " + ", ".join(f"{p} {n}" for p, n in sorted(by_prover.items())))
    failed = [v for v in verdicts if v.status != VALID]
    for v in failed:
        lines.append(f"not proved: {v.name} ({v.describe()})")
    code = 0 if not failed else NOT_PROVED
    return "\n".join(lines) + "\n", code


def report_json(verdicts, times=True):
    docs = []
    for v in verdicts:
        d = {"vc": v.name, "status": v.status, "prover": v.prover}
        if times:
            d["time"] = round(v.time, 3)
        if v.detail:
            d["detail"] = v.detail
        docs.append(d)
    code = 0 if all(v.status == VALID for v in verdicts) else NOT_PROVED
    return json.dumps(docs, indent=2) + "\n", code

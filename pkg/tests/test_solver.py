import os
import stat
import time

import pytest

from conftest import needs_z3
from michv import formula as f
from michv.mono import make_vc
from michv.solver import (INVALID, SOLVER_ERROR, TIMEOUT, UNKNOWN, VALID, ConfigError, SolverConfig, Verdict,
                          check, default_config, parse_config, report, report_json, run_all, solve)

TRUE_VC = make_vc(f.eq(f.add(1, 1), 2), name="one-plus-one")
FALSE_VC = make_vc(f.eq(f.lit(0), f.lit(1)), name="zero-is-one")


def script(tmp_path, name, body):
    path = tmp_path / name
    path.write_text("#!/bin/sh\n" + body)
    path.chmod(path.stat().st_mode | stat.S_IEXEC)
    return str(path)


def stub(tmp_path, answer, name=None):
    return SolverConfig.from_template(name or answer, script(tmp_path, answer + ".sh", f"echo {answer}\n") + " {file}")


def test_answers_map_to_statuses(tmp_path):
    assert solve("(check-sat)", stub(tmp_path, "unsat"))[0] == VALID
    assert solve("(check-sat)", stub(tmp_path, "sat"))[0] == INVALID
    assert solve("(check-sat)", stub(tmp_path, "unknown"))[0] == UNKNOWN
    status, detail, _ = solve("(check-sat)", stub(tmp_path, "gibberish"))
    assert status == SOLVER_ERROR and detail == "gibberish"


def test_missing_executable_is_a_solver_error():
    cfg = SolverConfig.from_template("ghost", "/nonexistent/solver {file}")
    status, detail, _ = solve("(check-sat)", cfg)
    assert status == SOLVER_ERROR and "cannot start" in detail


def test_script_file_is_passed_and_removed(tmp_path):
    record = tmp_path / "seen"
    cfg = SolverConfig.from_template("copy", script(tmp_path, "copy.sh", f'cp "$1" {record}\necho unsat\n') + " {file}")
    status, _, _ = solve("; hello\n(check-sat)\n", cfg)
    assert status == VALID
    assert record.read_text() == "; hello\n(check-sat)\n"


def test_timeout_kills_the_process_group(tmp_path):
    pidfile = tmp_path / "child.pid"
    body = f"sleep 60 &\necho $! > {pidfile}\nwait\n"
    cfg = SolverConfig.from_template("slow", script(tmp_path, "slow.sh", body) + " {file}", timeout=0.5)
    start = time.monotonic()
    status, _, elapsed = solve("(check-sat)", cfg)
    assert status == TIMEOUT
    assert time.monotonic() - start < 10 and elapsed >= 0.5
    child = int(pidfile.read_text())
    deadline = time.monotonic() + 5
    while time.monotonic() < deadline:
        try:
            with open(f"/proc/{child}/status") as fh:
                state = next(line for line in fh if line.startswith("State:"))
        except FileNotFoundError:
            break
        if "Z" in state:
            break
        time.sleep(0.05)
    else:
        pytest.fail("grandchild survived the timeout")


def test_fallback_chain_stops_at_first_answer(tmp_path):
    chain = [stub(tmp_path, "unknown"), stub(tmp_path, "unsat"), stub(tmp_path, "sat")]
    v = check(TRUE_VC, chain)
    assert (v.status, v.prover) == (VALID, "unsat")
    v = check(TRUE_VC, chain[:1])
    assert (v.status, v.prover) == (UNKNOWN, "unknown")
    assert check(TRUE_VC, []).status == SOLVER_ERROR


@needs_z3
def test_unknown_then_z3(tmp_path):
    chain = [stub(tmp_path, "unknown"), default_config("z3")]
    assert check(TRUE_VC, chain).prover == "z3"
    assert check(TRUE_VC, chain).status == VALID
    assert check(FALSE_VC, chain).status == INVALID


def test_config_file_parsing():
    cfgs = parse_config("# solvers\nsolver a z3 -smt2 {file}  # trailing\n\nsolver b cvc5 --lang=smt2 {file}\n",
                        timeout=3, jobs=2)
    assert [(c.name, c.command, c.timeout, c.jobs) for c in cfgs] == [
        ("a", ("z3", "-smt2", "{file}"), 3, 2), ("b", ("cvc5", "--lang=smt2", "{file}"), 3, 2)]


@pytest.mark.parametrize("text", ["solver a z3", "prover a z3 {file}", "solver onlyname"])
def test_bad_config_lines(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.exit_code == 8


def test_config_validation():
    with pytest.raises(ConfigError):
        SolverConfig.from_template("z", "z3 {file}", timeout=0)
    with pytest.raises(ConfigError):
        SolverConfig.from_template("z", "z3 {file}", jobs=0)
    with pytest.raises(ConfigError):
        default_config("vampire")


def test_run_all_sorts_by_name(tmp_path):
    vcs = [make_vc(f.TRUE, name=n) for n in ("b", "a", "c")]
    verdicts = run_all(vcs, [stub(tmp_path, "unsat")], jobs=3)
    assert [v.name for v in verdicts] == ["a", "b", "c"]
    assert run_all([], [stub(tmp_path, "unsat")]) == []


def test_report_counts_and_exit_code():
    verdicts = [Verdict("a", VALID, 0.1, "z3"), Verdict("b", VALID, 0.2, "cvc5"),
                Verdict("c", TIMEOUT, 10.0, "z3"), Verdict("d", SOLVER_ERROR, 0.0, "z3", "boom")]
    text, code = report(verdicts)
    assert code == 7
    assert "4 VCs: 2 Valid, 1 Timeout, 1 SolverError" in text
    assert "proved by: cvc5 1, z3 1" in text
    assert "not proved: c (Timeout)" in text and "not proved: d (SolverError(boom))" in text
    assert report(verdicts[:2])[1] == 0
    assert "0.10s" not in report(verdicts, times=False)[0]
    doc, code = report_json(verdicts)
    assert code == 7 and '"detail": "boom"' in doc

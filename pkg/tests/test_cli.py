import io
import json

import pytest

from conftest import needs_z3
from michv import corpus_path
from michv.cli import main
from michv.contracts import CONTRACTS


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out=out, err=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def write(tmp_path):
    def make(name, text):
        p = tmp_path / name
        p.write_text(text)
        return p
    return make


def test_parse_prints_canonical_form():
    code, out, _ = run("parse", corpus_path("add.tz"))
    assert code == 0
    again, out2, _ = run("parse", corpus_path("add.tz"))
    assert out == out2 and "UNPAIR" in out


def test_parse_expand(write):
    p = write("m.tz", "parameter int; storage int; code { UNPAIR; ADD; NIL operation; PAIR }")
    code, out, _ = run("parse", "--expand", p)
    assert code == 0


def test_typecheck_text_and_json():
    code, out, _ = run("typecheck", corpus_path("add.tz"))
    assert code == 0
    assert "requires" in out and "ensures" in out
    code, out, _ = run("typecheck", "--format", "json", corpus_path("add.tz"))
    doc = json.loads(out)
    assert code == 0 and doc["boundaries"] and len(doc["safety"]["requires"]) == 3


def test_run_success_and_trace():
    code, out, err = run("run", corpus_path("add.tz"), "--parameter", "2", "--storage", "3")
    assert (code, out) == (0, "Pair {} 5\n") and err == ""
    code, out, err = run("run", corpus_path("add.tz"), "--parameter", "2", "--storage", "3", "--trace")
    assert code == 0 and "ADD" in err and "ADD" not in out


def test_run_failure_codes(write):
    p = write("f.tz", "parameter unit; storage unit; code { PUSH string \"no\"; FAILWITH }")
    code, _, err = run("run", p, "--parameter", "Unit", "--storage", "Unit")
    assert code == 4 and '"no"' in err
    code, _, err = run("run", corpus_path("factorial.tz"), "--parameter", "9", "--storage", "0", "--fuel", "5")
    assert code == 5 and "fuel" in err


def test_run_bad_literal_is_usage_or_parse_error():
    code, _, _ = run("run", corpus_path("add.tz"), "--parameter", "-1", "--storage", "0")
    assert code in (2, 8)


def test_parse_error_diagnostic(write):
    p = write("bad.tz", "parameter nat;\nstorage nat;\ncode { UNPAIR; ADD ; }}")
    code, _, err = run("parse", p)
    assert code == 2
    assert err.startswith(f"{p}:3:")


def test_type_error_diagnostic(write):
    p = write("bad.tz", "parameter nat;\nstorage string;\ncode { UNPAIR;\n  ADD; NIL operation; PAIR }")
    code, _, err = run("typecheck", p)
    assert code == 3
    assert err.startswith(f"{p}:4:3: error:")


def test_usage_errors(tmp_path):
    assert run()[0] == 8
    assert run("frobnicate")[0] == 8
    assert run("parse", tmp_path / "missing.tz")[0] == 8
    assert run("contracts", "dump", "NOPE")[0] == 8


def test_vcgen_faithful_matches_golden(tmp_path):
    code, out, _ = run("vcgen", corpus_path("add.tz"))
    assert code == 0 and out == corpus_path("add.why").read_text()
    target = tmp_path / "add.why"
    assert run("vcgen", corpus_path("add.tz"), "-o", target)[0] == 0
    assert target.read_text() == out


def test_vcgen_mono_directory(tmp_path):
    code, out, _ = run("vcgen", "--mode", "mono", corpus_path("add.tz"), "-o", tmp_path / "vcs")
    assert code == 0
    index = json.loads((tmp_path / "vcs" / "index.json").read_text())
    assert len(index) == 12
    for entry in index:
        text = (tmp_path / "vcs" / entry["file"]).read_text()
        assert text.startswith(f"; {entry['vc']}\n") and text.rstrip().endswith("(check-sat)")


def test_vcgen_mono_needs_invariants():
    code, _, err = run("vcgen", "--mode", "mono", corpus_path("factorial.tz"))
    assert code == 2 and "invariant" in err


@needs_z3
def test_prove_exit_codes(write):
    code, out, _ = run("prove", corpus_path("add.tz"), "--no-times")
    assert code == 0 and "Valid" in out
    spec = write("wrong.spec", "ensures: storage_out = param")
    code, out, _ = run("prove", corpus_path("add.tz"), "--spec", spec, "--format", "json", "--no-times")
    assert code == 7
    assert json.loads(out)


def test_contracts_list_and_dump():
    code, out, _ = run("contracts", "list")
    assert code == 0 and out.split() == sorted(CONTRACTS)
    code, out, _ = run("contracts", "dump", "add")
    assert code == 0 and "ADD" in out

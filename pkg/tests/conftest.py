import shutil

import pytest

from michv import corpus_path
from michv.syntax import parse_source

HAVE_Z3 = shutil.which("z3") is not None
needs_z3 = pytest.mark.skipif(not HAVE_Z3, reason="z3 not on PATH")


def load(name):
    return parse_source(corpus_path(name).read_text())


@pytest.fixture
def add_contract():
    return load("add.tz")


@pytest.fixture
def factorial_contract():
    return load("factorial.tz")


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        title, ok = mod.RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}")

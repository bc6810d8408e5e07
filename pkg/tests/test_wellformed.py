from pathlib import Path

import pytest

from moverlogic.parser import parse, parse_file
from moverlogic.wellformed import well_formed

CORPUS = sorted((Path(__file__).parent.parent / "src" / "moverlogic" / "corpus").glob("*.mvl"))


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.name)
def test_corpus_is_well_formed(path):
    assert well_formed(parse_file(path)) == []


def diag(src):
    return [d.message for d in well_formed(parse(src))]


def test_multi_global_assignment():
    msgs = diag("int x; int y; init {} thread { yield; x = y; }")
    assert len(msgs) == 1 and "multi-global action" in msgs[0]


def test_local_reading_two_globals():
    msgs = diag("int x; int y; local int r; init {} thread { yield; r = x + y; }")
    assert len(msgs) == 1 and "multi-global action" in msgs[0]


def test_undeclared_function():
    msgs = diag("int x; init {} thread { yield; f(); }")
    assert len(msgs) == 1 and "undeclared function" in msgs[0]


@pytest.mark.parametrize("src,fragment", [
    ("int x; init {} thread { yield; z = 1; }", "undeclared variable"),
    ("int x; init {} thread { yield; assert z == 1; }", "undeclared variable"),
    ("int x; init {} thread { yield; acquire(x); }", "not a global lock"),
    ("int x; local int r; init {} thread { yield; x ~= r; }", "must be thread-local"),
    ("int x; init {} thread { yield; assert old(x) == 1; }", "old() is not allowed"),
    ("int x; init { x = y; } thread { yield; }", "constant"),
    ("list int s; int x; init {} thread { yield; x = head(x); }", "argument of head"),
    ("int x; int x; init {} thread { yield; }", "duplicate"),
    ("int x; int y; local int r; init {} thread { yield; if (!cas(x, y, r)) { skip; } }", "cas operands"),
    ("bits 9; int x; init {} thread { yield; }", "bits must be in 2..8"),
])
def test_diagnostics(src, fragment):
    msgs = diag(src)
    assert any(fragment in m for m in msgs), msgs


def test_diagnostics_carry_spans():
    ds = well_formed(parse("int x; int y; init {} thread {\n yield;\n x = y;\n}"))
    assert ds[0].span.line == 3

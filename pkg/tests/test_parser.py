from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moverlogic.effects import B, N, R
from moverlogic.parser import ParseError, parse, parse_expr, parse_file, print_expr, print_program
from moverlogic.syntax import (
    Binary, BoolLit, Call1, Cas, If, IntLit, NilLit, NoneLit, Test, Tid, Unary, Var, While, Wrong, walk,
)

CORPUS = sorted((Path(__file__).parent.parent / "src" / "moverlogic" / "corpus").glob("*.mvl"))

@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.name)
def test_corpus_round_trip(path):
    p = parse_file(path)
    text = print_program(p)
    q = parse(text)
    assert q == p
    assert print_program(q) == text

def test_counter_shape():
    p = parse_file(next(c for c in CORPUS if c.name == "counter.mvl"))
    assert [v.name for v in p.globals] == ["x", "m"]
    assert [v.name for v in p.locals] == ["n", "u"]
    assert [f.name for f in p.fns] == ["add", "client"]
    assert p.ntids == 2
    assert p.bits == 4

def test_empty_program():
    with pytest.raises(ParseError, match="empty program"):
        parse("")
    with pytest.raises(ParseError, match="empty program"):
        parse("  // only a comment\n")

def test_abbreviated_clause_expands():
    p = parse("int x both-mover if m == tid; lock m; init {} thread { yield; }")
    cs = p.var("x").clauses
    assert [c.kind for c in cs] == ["read", "write"]
    assert all(c.effect == B for c in cs)
    assert cs[0].cond == parse_expr("m == tid")

def test_clause_order_preserved():
    src = "int y write non-mover if m == tid read both-mover if m == tid read non-mover; lock m;" \
          " init {} thread { yield; }"
    p = parse(src)
    assert [(c.kind, c.effect) for c in p.var("y").clauses] == [("write", N), ("read", B), ("read", N)]
    assert print_program(parse(print_program(p))) == print_program(p)

def test_assert_desugars_and_resugars():
    p = parse("int x; init {} thread { yield; assert x == 0; }")
    s = p.threads[0].stmts[1]
    assert isinstance(s, If) and s.is_assert and isinstance(s.orelse, Wrong)
    assert "assert x == 0;" in print_program(p)

def test_negated_cas_swaps():
    p = parse("int x; local int r; init {} thread { yield; while (!cas(x, r, 1)) { skip; } }")
    loop = p.threads[0].stmts[1]
    assert isinstance(loop, While) and isinstance(loop.cond, Cas) and loop.cond.negated

def test_atomic_default_effect_is_non_mover():
    p = parse("atomic requires true ensures true f() { skip; } init {} thread { yield; f(); }")
    assert p.fn("f").spec.effect == N
    p = parse("atomic right-mover requires true ensures true f() { skip; } init {} thread { yield; }")
    assert p.fn("f").spec.effect == R

@pytest.mark.parametrize("src,msg", [
    ("int x; init {} thread { yield; frob x; }", "expected"),
    ("int x flying-mover; init {} thread { yield; }", "malformed mover clause"),
    ("int x; init {}", "thread"),
    ("widget x; init {} thread { yield; }", "unknown declaration"),
    ("int x; init {} thread { yield; x = ; }", ""),
])
def test_errors_are_positioned(src, msg):
    with pytest.raises(ParseError) as ei:
        parse(src)
    assert msg in str(ei.value)
    assert ei.value.span.line >= 1

def test_comments_and_spans():
    p = parse("/* header */\nint x; // trailing\ninit {}\nthread {\n  yield;\n  x = 1;\n}")
    s = p.threads[0].stmts[1]
    assert (s.span.line, s.span.col) == (6, 3)
    assert s.span.end_line >= s.span.line

def test_precedence():
    e = parse_expr("a + b * c == d && !e || f ==> g ==> h")
    assert isinstance(e, Binary) and e.op == "==>"
    assert e.right.op == "==>"
    assert parse_expr("1 :: 2 :: Nil") == Binary("::", IntLit(1), Binary("::", IntLit(2), NilLit()))
    assert parse_expr("a - b - c") == Binary("-", Binary("-", Var("a"), Var("b")), Var("c"))
    assert parse_expr("old(x)") == Var("x", True)

# -- random expressions -------------------------------------------------------

names = st.sampled_from(["x", "y", "n"])
leaves = st.one_of(
    st.integers(0, 9).map(IntLit),
    st.booleans().map(BoolLit),
    st.just(NoneLit()),
    st.just(NilLit()),
    st.just(Tid()),
    st.builds(Var, names, st.booleans()),
)

def extend(children):
    return st.one_of(
        st.builds(Unary, st.sampled_from(["!", "-"]), children),
        st.builds(Call1, st.sampled_from(["head", "tail", "even"]), children),
        st.builds(Binary, st.sampled_from(["+", "-", "*", "==", "!=", "<", "<=", ">", ">=", "&&", "||",
                                           "==>", "::"]), children, children),
    )

exprs = st.recursive(leaves, extend, max_leaves=12)

@settings(max_examples=300, deadline=None)
@given(exprs)
def test_expr_round_trip(e):
    assert parse_expr(print_expr(e)) == e

def test_walk_visits_nested():
    p = parse("int x; init {} thread { yield; if (x == 0) { while (true) { skip; } } else { wrong; } }")
    kinds = [type(s).__name__ for s in walk(p.threads[0])]
    assert kinds.count("While") == 1 and "Wrong" in kinds and "Test" not in kinds
    assert isinstance(p.threads[0].stmts[1].cond, Test)

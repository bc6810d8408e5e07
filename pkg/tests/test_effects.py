"""Effect algebra: tables, order and algebraic laws.

The tables in the package are hard-coded.  Here they are rebuilt from the
reducibility automaton: every effect is a transformer on the automaton
states pre-commit, post-commit and error.
"""

import itertools

import pytest

from moverlogic.effects import (
    B, E, EFFECTS, KEYWORDS, L, N, R, SEQ_TABLE, STAR_TABLE, Y, join, join_all, leq, parse_effect, seq,
    seq_all, star,
)

PRE, POST, ERR = 0, 1, 2  # larger is worse

# Transformer of each effect on (pre-commit, post-commit); error is absorbing.
DFA = {
    Y: (PRE, PRE),
    B: (PRE, POST),
    R: (PRE, ERR),
    L: (POST, POST),
    N: (POST, ERR),
    E: (ERR, ERR),
}


def apply(e, q):
    return ERR if q == ERR else DFA[e][q]


def fn(e):
    return tuple(apply(e, q) for q in (PRE, POST, ERR))


def oracle_leq(a, b):
    return all(x <= y for x, y in zip(fn(a), fn(b)))


def least_above(f):
    """The least effect whose transformer is pointwise no better than ``f``."""
    cands = [c for c in EFFECTS if all(x >= y for x, y in zip(fn(c), f))]
    return next(c for c in cands if all(oracle_leq(c, d) for d in cands))


def oracle_seq(a, b):
    return least_above(tuple(apply(b, apply(a, q)) for q in (PRE, POST, ERR)))


def oracle_star(a):
    # closure over one or more iterations
    powers, cur = [], a
    for _ in range(len(EFFECTS) + 1):
        powers.append(cur)
        cur = oracle_seq(cur, a)
    f = tuple(max(fn(p)[i] for p in powers) for i in range(3))
    return least_above(f)


PAIRS = list(itertools.product(EFFECTS, repeat=2))


@pytest.mark.parametrize("a,b", PAIRS)
def test_order_matches_automaton(a, b):
    assert leq(a, b) == oracle_leq(a, b)


@pytest.mark.parametrize("a,b", PAIRS)
def test_seq_table_matches_automaton(a, b):
    assert seq(a, b) == oracle_seq(a, b)


@pytest.mark.parametrize("a", EFFECTS)
def test_star_table_matches_automaton(a):
    assert star(a) == oracle_star(a)


def test_seq_table_literal():
    rows = {
        Y: "YYYLLE", B: "YBRLNE", R: "RRRNNE", L: "YLELEE", N: "RNENEE", E: "EEEEEE",
    }
    for a, row in rows.items():
        assert "".join(seq(a, b).name for b in EFFECTS) == row
    assert len(SEQ_TABLE) == 36


def test_star_table_literal():
    assert {a.name: star(a).name for a in EFFECTS} == {"Y": "Y", "B": "B", "R": "R", "L": "L", "N": "E", "E": "E"}
    assert len(STAR_TABLE) == 6


def test_examples():
    assert leq(Y, E)
    assert not leq(R, L) and not leq(L, R)
    assert leq(N, N)
    assert join(R, L) == N
    assert join(Y, B) == B
    assert join(E, B) == E
    assert seq(R, L) == N
    assert seq(N, N) == E
    assert star(N) == E and star(B) == B and star(E) == E


def test_covering_pairs():
    covers = {(a, b) for a, b in PAIRS if a != b and leq(a, b)
              and not any(c not in (a, b) and leq(a, c) and leq(c, b) for c in EFFECTS)}
    assert covers == {(Y, B), (B, R), (B, L), (R, N), (L, N), (N, E)}


def test_seq_associative():
    for a, b, c in itertools.product(EFFECTS, repeat=3):
        assert seq(seq(a, b), c) == seq(a, seq(b, c))


def test_seq_monotone():
    for a, a2, b in itertools.product(EFFECTS, repeat=3):
        if leq(a, a2):
            assert leq(seq(a, b), seq(a2, b))
            assert leq(seq(b, a), seq(b, a2))


def test_star_idempotent_and_identity():
    for a in EFFECTS:
        assert seq(star(a), star(a)) == star(a)
        assert seq(B, a) == a and seq(a, B) == a


def test_join_laws():
    for a, b in PAIRS:
        assert join(a, b) == join(b, a)
        assert leq(a, join(a, b)) and leq(b, join(a, b))
    for a, b, c in itertools.product(EFFECTS, repeat=3):
        assert join(join(a, b), c) == join(a, join(b, c))
    for a in EFFECTS:
        assert join(a, a) == a
        assert join(a, E) == E
        assert join(a, Y) == a


def test_helpers():
    assert join_all([]) == B
    assert join_all([R, L]) == N
    assert seq_all([R, B, B, B, L, B]) == N
    assert parse_effect("right-mover") == R
    assert parse_effect("N") == N
    assert set(KEYWORDS.values()) == {B, R, L, N}

"""Reduction effects: ordering, join, sequential composition and closure.

The six effects classify how a code fragment commutes with other threads:

    Y  yield             R  right-mover        N  non-mover
    B  both-mover        L  left-mover         E  error

The tables below are the normative definition.  A test re-derives them
from the reducibility automaton ``(R* [N] L*)`` separated by yields.
"""

from __future__ import annotations

from enum import IntEnum
from functools import reduce
from typing import Iterable


class Effect(IntEnum):
    Y = 0
    B = 1
    R = 2
    L = 3
    N = 4
    E = 5

    def __str__(self) -> str:
        return self.name


Y, B, R, L, N, E = Effect.Y, Effect.B, Effect.R, Effect.L, Effect.N, Effect.E

EFFECTS = tuple(Effect)

# Direct (covering) pairs of the order; leq is their reflexive-transitive closure.
_COVERS = {(Y, B), (B, R), (B, L), (R, N), (L, N), (N, E)}


def _closure(pairs):
    rel = {(a, a) for a in EFFECTS} | set(pairs)
    changed = True
    while changed:
        changed = False
        for a, b in list(rel):
            for c, d in list(rel):
                if b == c and (a, d) not in rel:
                    rel.add((a, d))
                    changed = True
    return frozenset(rel)


_LEQ = _closure(_COVERS)

# Row is the first effect, column the second, both in Y B R L N E order.
_SEQ_ROWS = {
    Y: (Y, Y, Y, L, L, E),
    B: (Y, B, R, L, N, E),
    R: (R, R, R, N, N, E),
    L: (Y, L, E, L, E, E),
    N: (R, N, E, N, E, E),
    E: (E, E, E, E, E, E),
}
SEQ_TABLE = {(a, b): _SEQ_ROWS[a][b] for a in EFFECTS for b in EFFECTS}

STAR_TABLE = {Y: Y, B: B, R: R, L: L, N: E, E: E}


def leq(a: Effect, b: Effect) -> bool:
    """True iff ``a`` is at most ``b`` in the effect order."""
    return (a, b) in _LEQ


def join(a: Effect, b: Effect) -> Effect:
    uppers = [c for c in EFFECTS if leq(a, c) and leq(b, c)]
    return next(c for c in uppers if all(leq(c, d) for d in uppers))


def join_all(effects: Iterable[Effect], default: Effect = B) -> Effect:
    effects = list(effects)
    if not effects:
        return default
    return reduce(join, effects)


def seq(a: Effect, b: Effect) -> Effect:
    return SEQ_TABLE[a, b]


def seq_all(effects: Iterable[Effect]) -> Effect:
    return reduce(seq, effects, B)


def star(a: Effect) -> Effect:
    return STAR_TABLE[a]


KEYWORDS = {"both-mover": B, "right-mover": R, "left-mover": L, "non-mover": N}
KEYWORD_OF = {v: k for k, v in KEYWORDS.items()}


def parse_effect(text: str) -> Effect:
    if text in KEYWORDS:
        return KEYWORDS[text]
    return Effect[text]

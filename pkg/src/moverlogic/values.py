"""Finite value domains and the scalar expression evaluator.

Every runtime value is an integer code so that stores can be packed into
numpy arrays:

* integers are themselves (a signed wrap-around window of ``bits`` bits),
* ``None`` is :data:`NONE`,
* an immutable list is ``LIST_BASE + id`` where ``id`` indexes the finite
  universe of lists up to the configured depth (``Nil`` has id 0),
* :data:`INVALID` marks an undefined result (a cons that overflows the
  list depth); it never lies in a declared domain.
"""

from __future__ import annotations

from functools import cached_property
from typing import Callable

import numpy as np

from .syntax import Binary, BoolLit, Call1, Expr, IntLit, NilLit, NoneLit, Tid, Unary, Var

INVALID = -1000
NONE = 1000
LIST_BASE = 2000
NIL = LIST_BASE


class Values:
    """Value universe for one program configuration."""

    def __init__(self, bits: int = 5, listdepth: int = 3, ntids: int = 1):
        if not 1 <= bits <= 9:
            raise ValueError(f"bits must be in 1..9, got {bits}")
        self.bits = bits
        self.listdepth = listdepth
        self.ntids = ntids
        self.lo = -(1 << (bits - 1))
        self.hi = (1 << (bits - 1)) - 1
        self.width = 1 << bits
        # List elements range over the non-negative half of the window.
        self.elements = tuple(range(0, self.hi + 1))
        m = len(self.elements)
        # Lists are numbered by length, then by index within their length
        # block; consing ``e`` onto block index ``j`` gives index ``j*m + e``.
        self.block_start = [0]
        for k in range(listdepth + 1):
            self.block_start.append(self.block_start[-1] + m ** k)

    @cached_property
    def nlists(self) -> int:
        return self.block_start[-1]

    def length_of(self, lid):
        starts = np.asarray(self.block_start, dtype=np.int64)
        return np.searchsorted(starts, lid, side="right") - 1

    def head_ids(self, lid):
        """Head element of each list id (0 for ``Nil``); vectorised."""
        k = self.length_of(lid)
        j = lid - np.asarray(self.block_start, dtype=np.int64)[k]
        return np.where(k > 0, j % len(self.elements), 0)

    def tail_ids(self, lid):
        """List id of the tail of each list id (``Nil`` for ``Nil``); vectorised."""
        starts = np.asarray(self.block_start, dtype=np.int64)
        k = self.length_of(lid)
        below = starts[np.maximum(k - 1, 0)]
        return np.where(k > 0, below + (lid - starts[k]) // len(self.elements), 0)

    def cons_ids(self, elem, lid):
        """List id of ``elem :: lid`` (``-1`` past the depth bound); vectorised."""
        starts = np.asarray(self.block_start, dtype=np.int64)
        k = self.length_of(lid)
        ok = k < self.listdepth
        kk = np.minimum(k + 1, self.listdepth)
        r = starts[kk] + (lid - starts[k]) * len(self.elements) + elem
        return np.where(ok, r, -1)

    @cached_property
    def lists(self) -> list[tuple[int, ...]]:
        lists: list[tuple[int, ...]] = [()]
        frontier: list[tuple[int, ...]] = [()]
        for _ in range(self.listdepth):
            frontier = [(e,) + t for t in frontier for e in self.elements]
            lists.extend(frontier)
        return lists

    # -- arithmetic --------------------------------------------------------

    def wrap(self, x):
        return (x - self.lo) % self.width + self.lo

    # -- domains -----------------------------------------------------------

    def domain(self, type_name: str) -> np.ndarray:
        """Sorted array of value codes of a declared type."""
        if type_name == "int":
            return np.arange(self.lo, self.hi + 1, dtype=np.int64)
        if type_name == "lock":
            return np.arange(0, self.ntids + 1, dtype=np.int64)
        if type_name == "optional int":
            return np.append(np.arange(self.lo, self.hi + 1, dtype=np.int64), NONE)
        if type_name == "list int":
            return LIST_BASE + np.arange(self.nlists, dtype=np.int64)
        raise ValueError(f"unknown type {type_name!r}")

    @staticmethod
    def default(type_name: str) -> int:
        return {"int": 0, "lock": 0, "optional int": NONE, "list int": NIL}[type_name]

    def fmt(self, code: int) -> str:
        code = int(code)
        if code == NONE:
            return "None"
        if code == INVALID:
            return "<undefined>"
        if code >= LIST_BASE:
            items = self.items(code - LIST_BASE)
            return "::".join([str(v) for v in items] + ["Nil"])
        return str(code)

    def list_code(self, items) -> int:
        lid = 0
        for e in reversed(list(items)):
            lid = int(self.cons_ids(e, lid))
            if lid < 0:
                raise ValueError(f"list {items!r} exceeds depth {self.listdepth}")
        return LIST_BASE + lid

    def items(self, lid: int) -> tuple[int, ...]:
        out = []
        for _ in range(int(self.length_of(lid))):
            out.append(int(self.head_ids(lid)))
            lid = int(self.tail_ids(lid))
        return tuple(out)

    # -- scalar list primitives ----------------------------------------------

    def head(self, code: int) -> int:
        if code < LIST_BASE:
            return INVALID
        return int(self.head_ids(code - LIST_BASE))

    def tail(self, code: int) -> int:
        if code < LIST_BASE:
            return INVALID
        return LIST_BASE + int(self.tail_ids(code - LIST_BASE))

    def cons(self, elem: int, code: int) -> int:
        if code < LIST_BASE or not 0 <= elem <= self.hi:
            return INVALID
        r = int(self.cons_ids(elem, code - LIST_BASE))
        return INVALID if r < 0 else LIST_BASE + r


Lookup = Callable[[str, bool], int]


def eval_scalar(e: Expr, vals: Values, lookup: Lookup, tid: int):
    """Evaluate ``e`` on a single store.

    ``lookup(name, old)`` returns the value code of ``name`` in the post-store
    (``old=False``) or pre-store (``old=True``).  Booleans come back as bool,
    everything else as an int code.
    """
    if isinstance(e, IntLit):
        return vals.wrap(e.value)
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, NoneLit):
        return NONE
    if isinstance(e, NilLit):
        return NIL
    if isinstance(e, Tid):
        return tid
    if isinstance(e, Var):
        return lookup(e.name, e.old)
    if isinstance(e, Unary):
        v = eval_scalar(e.arg, vals, lookup, tid)
        if e.op == "!":
            return not v
        return INVALID if v == INVALID else vals.wrap(-v)
    if isinstance(e, Call1):
        v = eval_scalar(e.arg, vals, lookup, tid)
        if e.fn == "even":
            return v != INVALID and v % 2 == 0
        if v == INVALID:
            return INVALID
        return vals.head(v) if e.fn == "head" else vals.tail(v)
    if isinstance(e, Binary):
        op = e.op
        if op == "&&":
            return bool(eval_scalar(e.left, vals, lookup, tid)) and bool(eval_scalar(e.right, vals, lookup, tid))
        if op == "||":
            return bool(eval_scalar(e.left, vals, lookup, tid)) or bool(eval_scalar(e.right, vals, lookup, tid))
        if op == "==>":
            return (not eval_scalar(e.left, vals, lookup, tid)) or bool(eval_scalar(e.right, vals, lookup, tid))
        a = eval_scalar(e.left, vals, lookup, tid)
        b = eval_scalar(e.right, vals, lookup, tid)
        if op in ("==", "!=", "<", "<=", ">", ">="):
            if a == INVALID or b == INVALID:
                return False
            return {
                "==": a == b, "!=": a != b, "<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b,
            }[op]
        if a == INVALID or b == INVALID:
            return INVALID
        if op == "::":
            return vals.cons(a, b)
        if op == "+":
            return vals.wrap(a + b)
        if op == "-":
            return vals.wrap(a - b)
        if op == "*":
            return vals.wrap(a * b)
    raise TypeError(f"cannot evaluate {e!r}")

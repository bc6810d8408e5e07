"""Finite-domain denotational engine.

Stores are packed into dense integers with a mixed-radix encoding over the
slots of a :class:`StateSpace`.  On top of that:

* :class:`Rel1` is a one-store predicate, a bitmask indexed by ``(tid, store)``;
* :class:`Rel2` is a two-store relation, a sparse bitset holding the sorted
  linear indices ``(tid, pre, post)`` of its members;
* :class:`ActionSem` and :class:`FormulaRel` are relations given by a
  successor function, so they never have to be materialised.

Anything exposing ``image(space, tid, idx) -> (pos, dst)`` can be composed
onto a :class:`Rel2` or closed under iteration.  ``pos[i]`` indexes into
``idx`` and ``dst[i]`` is one successor of ``idx[pos[i]]``.

Two kinds of space are used.  A *view* space holds the globals plus one copy
of each thread-local family and is shared by every thread: a local name
always denotes the executing thread's instance.  An *instance* space names
locals per thread (``n@1``, ``n@2``) and is what the explorer and the
validity check use.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .syntax import (
    Acquire,
    Assign,
    Binary,
    BoolLit,
    Call1,
    Cas,
    Expr,
    IntLit,
    NilLit,
    NoneLit,
    Program,
    Release,
    Stmt,
    Test,
    Tid,
    Unary,
    UnstableRead,
    Var,
    var_names,
)
from .values import INVALID, LIST_BASE, NIL, NONE, Values, eval_scalar

DEFAULT_BUDGET = 1 << 24


def default_budget() -> int:
    env = os.environ.get("MVL_BUDGET")
    return int(env) if env else DEFAULT_BUDGET


class BudgetExceeded(Exception):
    def __init__(self, what: str, size: int, budget: int):
        super().__init__(f"budget exceeded: {what} needs {size} elements (budget {budget})")
        self.size = size
        self.budget = budget


def check_budget(what: str, size: int, budget: int) -> None:
    if size > budget:
        raise BudgetExceeded(what, size, budget)


def instance(name: str, tid: int) -> str:
    return f"{name}@{tid}"


# ---------------------------------------------------------------------------
# State spaces
# ---------------------------------------------------------------------------


class StateSpace:
    """Bijection between stores over ``slots`` and ``range(size)``."""

    def __init__(self, program: Program, vals: Values, slots: Sequence[tuple[str, str]],
                 per_thread: bool, budget: Optional[int] = None):
        self.program = program
        self.vals = vals
        self.slots = tuple(slots)
        self.names = tuple(n for n, _ in self.slots)
        self.per_thread = per_thread
        self.budget = default_budget() if budget is None else budget
        self.domains = [vals.domain(t) for _, t in self.slots]
        self.sizes = np.array([len(d) for d in self.domains], dtype=np.int64)
        self.size = math.prod(int(s) for s in self.sizes)
        check_budget("state space", self.size, self.budget)
        strides = []
        acc = 1
        for s in reversed(self.sizes.tolist()):
            strides.append(acc)
            acc *= s
        self.strides = np.array(strides[::-1], dtype=np.int64)
        self._index = {n: i for i, n in enumerate(self.names)}

    # -- construction ------------------------------------------------------

    @classmethod
    def view(cls, program: Program, vals: Values, budget: Optional[int] = None) -> "StateSpace":
        slots = [(v.name, v.type) for v in program.globals] + [(v.name, v.type) for v in program.locals]
        return cls(program, vals, slots, per_thread=False, budget=budget)

    @classmethod
    def full(cls, program: Program, vals: Values, budget: Optional[int] = None) -> "StateSpace":
        slots = [(v.name, v.type) for v in program.globals]
        for t in program.tids:
            slots += [(instance(v.name, t), v.type) for v in program.locals]
        return cls(program, vals, slots, per_thread=True, budget=budget)

    @classmethod
    def of_instances(cls, program: Program, vals: Values, names: Iterable[str],
                     budget: Optional[int] = None) -> "StateSpace":
        """Instance space restricted to ``names`` (kept in declaration order)."""
        wanted = set(names)
        full_order = [v.name for v in program.globals]
        for t in program.tids:
            full_order += [instance(v.name, t) for v in program.locals]
        slots = [(n, type_of(program, n)) for n in full_order if n in wanted]
        return cls(program, vals, slots, per_thread=True, budget=budget)

    @classmethod
    def of_view(cls, program: Program, vals: Values, names: Iterable[str],
                budget: Optional[int] = None) -> "StateSpace":
        """View space restricted to ``names`` (kept in declaration order)."""
        wanted = set(names)
        slots = [(v.name, v.type) for v in program.globals if v.name in wanted]
        slots += [(v.name, v.type) for v in program.locals if v.name in wanted]
        return cls(program, vals, slots, per_thread=False, budget=budget)

    # -- slot access -------------------------------------------------------

    def slot(self, name: str, tid: int) -> int:
        """Slot holding variable ``name`` as seen by thread ``tid``."""
        if self.per_thread and self.program.is_local(name):
            return self._index[instance(name, tid)]
        return self._index[name]

    def has(self, name: str) -> bool:
        return name in self._index

    def digit(self, slot: int, idx):
        return (idx // self.strides[slot]) % self.sizes[slot]

    def value(self, slot: int, idx):
        return self.domains[slot][self.digit(slot, idx)]

    def with_value(self, idx, slot: int, codes):
        """Replace one slot; returns ``(new_idx, ok)`` where ``ok`` marks in-domain values."""
        dom = self.domains[slot]
        codes = np.broadcast_to(np.asarray(codes, dtype=np.int64), np.shape(idx))
        pos = np.searchsorted(dom, codes)
        pos_c = np.minimum(pos, len(dom) - 1)
        ok = dom[pos_c] == codes
        new = idx + (pos_c - self.digit(slot, idx)) * self.strides[slot]
        return new, ok

    def encode(self, store: dict) -> int:
        idx = 0
        for i, name in enumerate(self.names):
            dom = self.domains[i]
            p = int(np.searchsorted(dom, store[name]))
            if p >= len(dom) or dom[p] != store[name]:
                raise ValueError(f"value {store[name]} outside domain of {name}")
            idx += p * int(self.strides[i])
        return idx

    def decode(self, idx: int) -> dict:
        return {name: int(self.value(i, idx)) for i, name in enumerate(self.names)}

    def fmt(self, idx: int) -> str:
        return "{" + ", ".join(f"{n}={self.vals.fmt(v)}" for n, v in self.decode(idx).items()) + "}"

    def all(self) -> np.ndarray:
        return np.arange(self.size, dtype=np.int64)

    def havoc(self, idx, slots: Sequence[int]):
        """All stores that agree with ``idx`` except on ``slots``; returns ``(pos, dst)``."""
        idx = np.asarray(idx, dtype=np.int64)
        base = idx.copy()
        offsets = np.zeros(1, dtype=np.int64)
        for s in slots:
            base = base - self.digit(s, idx) * self.strides[s]
            offsets = (offsets[:, None] + np.arange(self.sizes[s]) * self.strides[s]).ravel()
        check_budget("havoc image", len(idx) * len(offsets), self.budget)
        dst = (base[:, None] + offsets[None, :]).ravel()
        pos = np.repeat(np.arange(len(idx)), len(offsets))
        return pos, dst

    def global_slots(self) -> list[int]:
        return [self._index[v.name] for v in self.program.globals if v.name in self._index]


def type_of(program: Program, instance_name: str) -> str:
    base = instance_name.split("@")[0]
    decl = program.var(base)
    if decl is None:
        raise KeyError(instance_name)
    return decl.type


def initial_store(program: Program, vals: Values) -> dict:
    """Initial values of every instance in the full space."""
    store = {}
    for v in program.globals:
        store[v.name] = vals.default(v.type)
    for t in program.tids:
        for v in program.locals:
            store[instance(v.name, t)] = vals.default(v.type)
    for name, e in program.init:
        code = eval_scalar(e, vals, lambda n, o: 0, 0)
        code = int(code) if not isinstance(code, bool) else int(code)
        if program.is_local(name):
            for t in program.tids:
                store[instance(name, t)] = code
        else:
            store[name] = code
    return store


def enumerate_space(program: Program, vals: Optional[Values] = None,
                    budget: Optional[int] = None) -> StateSpace:
    """The full instance space of ``program``; raises :class:`BudgetExceeded` when too large."""
    vals = vals or Values(program.bits, program.listdepth, program.ntids)
    return StateSpace.full(program, vals, budget)


# ---------------------------------------------------------------------------
# Vectorised formula evaluation
# ---------------------------------------------------------------------------


_CMP = {
    "==": np.equal, "!=": np.not_equal, "<": np.less, "<=": np.less_equal,
    ">": np.greater, ">=": np.greater_equal,
}


def evaluate(e: Expr, space: StateSpace, tid: int, pre, post):
    """Evaluate ``e`` on aligned arrays of pre/post store indices."""
    vals = space.vals

    def ev(e):
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
            return space.value(space.slot(e.name, tid), pre if e.old else post)
        if isinstance(e, Unary):
            a = ev(e.arg)
            if e.op == "!":
                return np.logical_not(a)
            return np.where(np.equal(a, INVALID), INVALID, vals.wrap(np.negative(a)))
        if isinstance(e, Call1):
            a = np.asarray(ev(e.arg))
            if e.fn == "even":
                return (a % 2 == 0) & (a != INVALID)
            ok = a >= LIST_BASE
            lid = np.where(ok, a - LIST_BASE, 0)
            if e.fn == "head":
                r = vals.head_ids(lid)
            else:
                r = LIST_BASE + vals.tail_ids(lid)
            return np.where(ok, r, INVALID)
        if isinstance(e, Binary):
            op = e.op
            if op in ("&&", "||", "==>"):
                a, b = ev(e.left), ev(e.right)
                if op == "&&":
                    return np.logical_and(a, b)
                if op == "||":
                    return np.logical_or(a, b)
                return np.logical_or(np.logical_not(a), b)
            a, b = np.asarray(ev(e.left)), np.asarray(ev(e.right))
            bad = (a == INVALID) | (b == INVALID)
            if op in _CMP:
                return _CMP[op](a, b) & ~bad
            if op == "::":
                ok = ~bad & (a >= 0) & (a <= vals.hi) & (b >= LIST_BASE)
                r = vals.cons_ids(np.where(ok, a, 0), np.where(ok, b - LIST_BASE, 0))
                return np.where(ok & (r >= 0), LIST_BASE + r, INVALID)
            r = {"+": np.add, "-": np.subtract, "*": np.multiply}[op](a, b)
            return np.where(bad, INVALID, vals.wrap(r))
        raise TypeError(f"cannot evaluate {e!r}")

    n = np.shape(pre)
    return np.broadcast_to(np.asarray(ev(e)), n)


def eval_bool(e: Expr, space: StateSpace, tid: int, pre, post) -> np.ndarray:
    return np.asarray(evaluate(e, space, tid, pre, post), dtype=bool)


# ---------------------------------------------------------------------------
# Index helpers
# ---------------------------------------------------------------------------


def _ranges(starts: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Concatenation of ``arange(s, s + c)`` for each pair."""
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    ends = np.cumsum(counts)
    shift = np.repeat(starts - (ends - counts), counts)
    return np.arange(total, dtype=np.int64) + shift


# ---------------------------------------------------------------------------
# One-store predicates
# ---------------------------------------------------------------------------


class Rel1:
    """Set of ``(tid, store)`` pairs as a ``(ntids, size)`` bitmask."""

    def __init__(self, space: StateSpace, mask: np.ndarray):
        self.space = space
        self.mask = np.asarray(mask, dtype=bool)

    @property
    def ntids(self) -> int:
        return self.mask.shape[0]

    @classmethod
    def empty(cls, space: StateSpace, ntids: int) -> "Rel1":
        return cls(space, np.zeros((ntids, space.size), dtype=bool))

    @classmethod
    def full(cls, space: StateSpace, ntids: int) -> "Rel1":
        return cls(space, np.ones((ntids, space.size), dtype=bool))

    @classmethod
    def from_formula(cls, space: StateSpace, ntids: int, f: Expr) -> "Rel1":
        allidx = space.all()
        mask = np.stack([eval_bool(f, space, t, allidx, allidx) for t in range(1, ntids + 1)])
        return cls(space, mask)

    @classmethod
    def from_pairs(cls, space: StateSpace, ntids: int, pairs: Iterable[tuple[int, int]]) -> "Rel1":
        r = cls.empty(space, ntids)
        for t, s in pairs:
            r.mask[t - 1, s] = True
        return r

    def pairs(self) -> set[tuple[int, int]]:
        ts, ss = np.nonzero(self.mask)
        return {(int(t) + 1, int(s)) for t, s in zip(ts, ss)}

    def __len__(self) -> int:
        return int(self.mask.sum())

    def is_empty(self) -> bool:
        return not self.mask.any()

    def __or__(self, other: "Rel1") -> "Rel1":
        return Rel1(self.space, self.mask | other.mask)

    def __and__(self, other: "Rel1") -> "Rel1":
        return Rel1(self.space, self.mask & other.mask)

    def __sub__(self, other: "Rel1") -> "Rel1":
        return Rel1(self.space, self.mask & ~other.mask)

    def __eq__(self, other) -> bool:
        return isinstance(other, Rel1) and np.array_equal(self.mask, other.mask)

    def witness_outside(self, other: "Rel1") -> Optional[tuple[int, int]]:
        diff = self.mask & ~other.mask
        if not diff.any():
            return None
        t, s = np.argwhere(diff)[0]
        return int(t) + 1, int(s)

    def restrict_formula(self, f: Expr) -> "Rel1":
        mask = self.mask.copy()
        for ti in range(self.ntids):
            idx = np.flatnonzero(mask[ti])
            keep = eval_bool(f, self.space, ti + 1, idx, idx)
            mask[ti, idx[~keep]] = False
        return Rel1(self.space, mask)


# ---------------------------------------------------------------------------
# Two-store relations
# ---------------------------------------------------------------------------


class Rel2:
    """Set of ``(tid, pre, post)`` triples stored as sorted linear indices."""

    def __init__(self, space: StateSpace, ntids: int, codes: np.ndarray, _canonical: bool = False):
        self.space = space
        self.ntids = ntids
        codes = np.asarray(codes, dtype=np.int64)
        self.codes = codes if _canonical else np.unique(codes)
        check_budget("relation", len(self.codes), space.budget)

    # -- encoding ----------------------------------------------------------

    @classmethod
    def from_arrays(cls, space, ntids, tid_idx, pre, post) -> "Rel2":
        n = space.size
        codes = (np.asarray(tid_idx, dtype=np.int64) * n + pre) * n + post
        return cls(space, ntids, codes)

    def arrays(self):
        n = self.space.size
        nn = n * n
        return self.codes // nn, (self.codes % nn) // n, self.codes % n

    def triples(self) -> set[tuple[int, int, int]]:
        t, a, b = self.arrays()
        return {(int(x) + 1, int(y), int(z)) for x, y, z in zip(t, a, b)}

    @classmethod
    def from_triples(cls, space, ntids, triples: Iterable[tuple[int, int, int]]) -> "Rel2":
        triples = list(triples)
        if not triples:
            return cls.empty(space, ntids)
        t, a, b = (np.array(c, dtype=np.int64) for c in zip(*triples))
        return cls.from_arrays(space, ntids, t - 1, a, b)

    # -- constructors --------------------------------------------------------

    @classmethod
    def empty(cls, space, ntids) -> "Rel2":
        return cls(space, ntids, np.zeros(0, dtype=np.int64), _canonical=True)

    @classmethod
    def identity(cls, space, ntids) -> "Rel2":
        return two(Rel1.full(space, ntids))

    @classmethod
    def from_formula(cls, space, ntids, f: Expr) -> "Rel2":
        n = space.size
        check_budget("formula relation", ntids * n * n, space.budget)
        pre = np.repeat(space.all(), n)
        post = np.tile(space.all(), n)
        parts = []
        for ti in range(ntids):
            keep = eval_bool(f, space, ti + 1, pre, post)
            parts.append((ti * n + pre[keep]) * n + post[keep])
        return cls(space, ntids, np.concatenate(parts))

    @classmethod
    def full(cls, space, ntids) -> "Rel2":
        return cls.from_formula(space, ntids, BoolLit(True))

    # -- set algebra ---------------------------------------------------------

    def _new(self, codes, canonical=False) -> "Rel2":
        return Rel2(self.space, self.ntids, codes, _canonical=canonical)

    def __len__(self) -> int:
        return len(self.codes)

    def is_empty(self) -> bool:
        return len(self.codes) == 0

    def __or__(self, other: "Rel2") -> "Rel2":
        return self._new(np.union1d(self.codes, other.codes), True)

    def __and__(self, other: "Rel2") -> "Rel2":
        return self._new(np.intersect1d(self.codes, other.codes, assume_unique=True), True)

    def __sub__(self, other: "Rel2") -> "Rel2":
        return self._new(np.setdiff1d(self.codes, other.codes, assume_unique=True), True)

    def __eq__(self, other) -> bool:
        return isinstance(other, Rel2) and np.array_equal(self.codes, other.codes)

    def __le__(self, other: "Rel2") -> bool:
        return self.witness_outside(other) is None

    def witness_outside(self, other: "Rel2") -> Optional[tuple[int, int, int]]:
        missing = ~np.isin(self.codes, other.codes, assume_unique=True)
        if not missing.any():
            return None
        return self._decode_one(self.codes[np.argmax(missing)])

    def _decode_one(self, code) -> tuple[int, int, int]:
        n = self.space.size
        code = int(code)
        return code // (n * n) + 1, (code % (n * n)) // n, code % n

    def restrict_tids(self, tids: Iterable[int]) -> "Rel2":
        t, _, _ = self.arrays()
        keep = np.isin(t, [x - 1 for x in tids])
        return self._new(self.codes[keep], True)

    def tids(self) -> list[int]:
        t, _, _ = self.arrays()
        return [int(x) + 1 for x in np.unique(t)]

    def by_tid(self):
        """Yield ``(tid, pre, post)`` array groups."""
        t, a, b = self.arrays()
        if len(t) == 0:
            return
        bounds = np.searchsorted(t, np.arange(self.ntids + 1))
        for ti in range(self.ntids):
            lo, hi = bounds[ti], bounds[ti + 1]
            if hi > lo:
                yield ti + 1, a[lo:hi], b[lo:hi]

    def violations(self, f: Expr, limit: int = 1) -> list[tuple[int, int, int]]:
        """Members that do not satisfy the two-store formula ``f``."""
        out = []
        for tid, pre, post in self.by_tid():
            bad = ~eval_bool(f, self.space, tid, pre, post)
            for j in np.flatnonzero(bad)[:limit]:
                out.append((tid, int(pre[j]), int(post[j])))
                if len(out) >= limit:
                    return out
        return out

    def satisfies(self, f: Expr) -> Optional[tuple[int, int, int]]:
        """``None`` if every member satisfies ``f``, else a witness triple."""
        bad = self.violations(f, 1)
        return bad[0] if bad else None

    def filter(self, f: Expr) -> "Rel2":
        keep_parts = []
        for tid, pre, post in self.by_tid():
            keep = eval_bool(f, self.space, tid, pre, post)
            n = self.space.size
            keep_parts.append(((tid - 1) * n + pre[keep]) * n + post[keep])
        if not keep_parts:
            return self
        return self._new(np.concatenate(keep_parts), True)

    def is_diagonal(self) -> bool:
        _, a, b = self.arrays()
        return bool(np.all(a == b))

    # -- as a successor relation ---------------------------------------------

    def image(self, space, tid, idx):
        idx = np.asarray(idx, dtype=np.int64)
        for t, pre, post in self.by_tid():
            if t == tid:
                lo = np.searchsorted(pre, idx, "left")
                hi = np.searchsorted(pre, idx, "right")
                counts = hi - lo
                pos = np.repeat(np.arange(len(idx)), counts)
                return pos, post[_ranges(lo, counts)]
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)

    def fmt_witness(self, w) -> str:
        return fmt_triple(self.space, w)

    def __repr__(self) -> str:
        return f"Rel2({len(self)} triples over {self.space.size} stores)"


def fmt_triple(space: StateSpace, w) -> str:
    t, a, b = w
    return f"tid={t}, pre={space.fmt(a)}, post={space.fmt(b)}"


# ---------------------------------------------------------------------------
# Supporting definitions
# ---------------------------------------------------------------------------


def two(s: Rel1) -> Rel2:
    """Diagonal relation ``{(t, σ, σ) | (t, σ) ∈ S}``."""
    n = s.space.size
    ts, ss = np.nonzero(s.mask)
    return Rel2(s.space, s.ntids, (ts.astype(np.int64) * n + ss) * n + ss, _canonical=True)


def postof(p: Rel2) -> Rel1:
    out = Rel1.empty(p.space, p.ntids)
    t, _, b = p.arrays()
    out.mask[t, b] = True
    return out


def preof(p: Rel2) -> Rel1:
    out = Rel1.empty(p.space, p.ntids)
    t, a, _ = p.arrays()
    out.mask[t, a] = True
    return out


def compose(p: Rel2, a) -> Rel2:
    """``P;A``: extend every member of ``P`` by one step of ``A``."""
    space = p.space
    n = space.size
    parts = []
    for tid, pre, post in p.by_tid():
        uposts, inv = np.unique(post, return_inverse=True)
        pos, dst = a.image(space, tid, uposts)
        order = np.argsort(pos, kind="stable")
        pos, dst = pos[order], dst[order]
        counts = np.bincount(pos, minlength=len(uposts))
        starts = np.cumsum(counts) - counts
        per = counts[inv]
        check_budget("composition", int(per.sum()), space.budget)
        flat = _ranges(starts[inv], per)
        parts.append(((tid - 1) * n + np.repeat(pre, per)) * n + dst[flat])
    if not parts:
        return Rel2.empty(space, p.ntids)
    return Rel2(space, p.ntids, np.concatenate(parts))


def reach(s: Rel1, r) -> Rel1:
    """Stores reachable from ``S`` by zero or more steps of ``R`` (per thread)."""
    mask = s.mask.copy()
    if r is None:
        return Rel1(s.space, mask)
    for ti in range(s.ntids):
        frontier = np.flatnonzero(mask[ti])
        while len(frontier):
            _, dst = r.image(s.space, ti + 1, frontier)
            dst = np.unique(dst)
            new = dst[~mask[ti, dst]]
            mask[ti, new] = True
            frontier = new
    return Rel1(s.space, mask)


def rstar(r: Rel2) -> Rel2:
    """Reflexive-transitive closure of an explicit relation."""
    closure = Rel2.identity(r.space, r.ntids)
    frontier = closure
    while not frontier.is_empty():
        step = compose(frontier, r)
        frontier = step - closure
        closure = closure | frontier
    return closure


def yield_close(p: Rel2, r) -> Rel2:
    """``Yield(P, R)``: post-stores of ``P`` closed under ``R*``, as a diagonal."""
    return two(reach(postof(p), r))


def implies(p, q) -> tuple[bool, Optional[tuple]]:
    """Subset test with a witness member of ``p`` outside ``q`` on failure."""
    w = p.witness_outside(q)
    return w is None, w


# ---------------------------------------------------------------------------
# Relations given by formulas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FormulaRel:
    """``{(t, σ, σ') | f(t, σ, σ')}`` restricted to σ' differing from σ only on ``free``.

    ``free`` lists variable names (a local name means the executing thread's
    instance); every other slot is preserved.
    """

    formula: Expr
    free: tuple[str, ...]

    def image(self, space: StateSpace, tid: int, idx):
        slots = sorted({space.slot(v, tid) for v in self.free if space.has(_slot_name(space, v, tid))})
        pos, dst = space.havoc(idx, slots)
        keep = eval_bool(self.formula, space, tid, np.asarray(idx)[pos], dst)
        return pos[keep], dst[keep]


def _slot_name(space: StateSpace, v: str, tid: int) -> str:
    if space.per_thread and space.program.is_local(v):
        return instance(v, tid)
    return v


# ---------------------------------------------------------------------------
# Actions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ActionSem:
    """A primitive action: its transition relation and which global it touches.

    ``kind`` is one of ``assign``, ``acquire``, ``release``, ``havoc`` (unstable
    read), ``test``, ``cas`` (successful compare-and-set) and ``identity``.
    ``access`` is ``("local", None)``, ``("read", x)`` or ``("write", x)``.
    """

    kind: str
    access: tuple
    source: object = None
    target: Optional[str] = None
    expr: Optional[Expr] = None
    expected: Optional[Expr] = None
    positive: bool = True

    @property
    def label(self) -> str:
        from .parser import print_cond, print_expr

        if self.kind == "assign":
            return f"{self.target} = {print_expr(self.expr)}"
        if self.kind == "acquire":
            return f"acquire({self.target})"
        if self.kind == "release":
            return f"release({self.target})"
        if self.kind == "havoc":
            return f"{self.target} ~= {self.access[1]}"
        if self.kind == "test":
            body = print_expr(self.expr)
            return body if self.positive else f"!({body})"
        if self.kind == "cas":
            return f"cas({self.target}, {print_expr(self.expected)}, {print_expr(self.expr)}) succeeds"
        if self.kind == "identity":
            src = self.source
            if isinstance(src, Cas):
                return f"{print_cond(Cas(src.var, src.expected, src.new))} fails"
            return "identity"
        return self.kind

    def key(self):
        return (self.kind, self.access, self.target, self.expr, self.expected, self.positive)

    # -- semantics ---------------------------------------------------------

    def image(self, space: StateSpace, tid: int, idx):
        idx = np.asarray(idx, dtype=np.int64)
        everything = np.arange(len(idx), dtype=np.int64)
        k = self.kind
        if k == "identity":
            return everything, idx
        if k == "test":
            keep = eval_bool(self.expr, space, tid, idx, idx)
            if not self.positive:
                keep = ~keep
            return everything[keep], idx[keep]
        if k == "havoc":
            return space.havoc(idx, [space.slot(self.target, tid)])
        if k == "release":
            new, ok = space.with_value(idx, space.slot(self.target, tid), 0)
            return everything[ok], new[ok]
        if k == "acquire":
            s = space.slot(self.target, tid)
            enabled = space.value(s, idx) == 0
            new, ok = space.with_value(idx, s, tid)
            keep = enabled & ok
            return everything[keep], new[keep]
        if k == "assign":
            v = evaluate(self.expr, space, tid, idx, idx)
            new, ok = space.with_value(idx, space.slot(self.target, tid), v)
            return everything[ok], new[ok]
        if k == "cas":
            s = space.slot(self.target, tid)
            expected = evaluate(self.expected, space, tid, idx, idx)
            enabled = (space.value(s, idx) == expected) & (expected != INVALID)
            v = evaluate(self.expr, space, tid, idx, idx)
            new, ok = space.with_value(idx, s, v)
            keep = enabled & ok
            return everything[keep], new[keep]
        raise ValueError(k)

    def post_of(self, space: StateSpace, tid: int, idx):
        """Deterministic post-store per pre-store (``-1`` where blocked).

        Only meaningful for actions with at most one successor.
        """
        pos, dst = self.image(space, tid, idx)
        out = np.full(len(idx), -1, dtype=np.int64)
        out[pos] = dst
        return out

    def enabled(self, space: StateSpace, tid: int, idx) -> np.ndarray:
        pos, _ = self.image(space, tid, idx)
        mask = np.zeros(len(idx), dtype=bool)
        mask[pos] = True
        return mask

    @property
    def deterministic(self) -> bool:
        return self.kind != "havoc"

    # -- footprint ---------------------------------------------------------

    def reads(self) -> set[str]:
        names = set()
        for e in (self.expr, self.expected):
            if e is not None:
                names |= var_names(e)
        if self.kind == "acquire":
            names.add(self.target)
        if self.kind == "cas":
            names.add(self.target)
        return names

    def writes(self) -> set[str]:
        if self.kind in ("assign", "acquire", "release", "havoc", "cas"):
            return {self.target}
        return set()

    def footprint(self) -> set[str]:
        return self.reads() | self.writes()


def denote_action(program: Program, s: Stmt) -> ActionSem:
    """Transition relation and access classification of a primitive statement."""
    if isinstance(s, Assign):
        if program.is_global(s.target):
            return ActionSem("assign", ("write", s.target), s, s.target, s.expr)
        globs = sorted(n for n in var_names(s.expr) if program.is_global(n))
        access = ("read", globs[0]) if globs else ("local", None)
        return ActionSem("assign", access, s, s.target, s.expr)
    if isinstance(s, Acquire):
        return ActionSem("acquire", ("write", s.lock), s, s.lock)
    if isinstance(s, Release):
        return ActionSem("release", ("write", s.lock), s, s.lock)
    if isinstance(s, UnstableRead):
        return ActionSem("havoc", ("read", s.source), s, s.target)
    raise TypeError(f"not a primitive action: {s!r}")


def denote_cond(program: Program, c) -> tuple[ActionSem, ActionSem]:
    """The pair ``(A1, A2)`` of a conditional action (success first)."""
    if isinstance(c, Test):
        globs = sorted(n for n in var_names(c.formula) if program.is_global(n))
        access = ("read", globs[0]) if globs else ("local", None)
        return (
            ActionSem("test", access, c, expr=c.formula, positive=True),
            ActionSem("test", access, c, expr=c.formula, positive=False),
        )
    if isinstance(c, Cas):
        success = ActionSem("cas", ("write", c.var), c, c.var, c.new, c.expected)
        failure = ActionSem("identity", ("local", None), c)
        return (failure, success) if c.negated else (success, failure)
    raise TypeError(f"not a conditional action: {c!r}")


def totality_gaps(a: ActionSem, space: StateSpace, tid: int, idx) -> np.ndarray:
    """Pre-stores in ``idx`` from which ``a`` has no transition."""
    idx = np.asarray(idx, dtype=np.int64)
    return idx[~a.enabled(space, tid, idx)]

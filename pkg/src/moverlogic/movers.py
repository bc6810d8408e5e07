"""Mover specifications: evaluating M and checking validity.

``M(A, t, σ)`` looks up the clauses of the global accessed by ``A`` and
returns the effect of the first clause whose condition holds, or ``E`` when
none does.  Read clauses are evaluated at ``(σ, σ)`` and write clauses at
``(σ, σ')`` where ``σ'`` is the action's own post-store.  Effects are only
consulted at stores where the action is enabled; a blocked action has no
effect there.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations
from typing import Optional

import numpy as np

from .effects import B, E, L, N, R, Effect, join_all, leq
from .syntax import PRIMITIVE_ACTIONS, If, Program, Span, While, var_names, walk
from .state import ActionSem, StateSpace, denote_action, denote_cond, eval_bool, instance
from .values import Values

DISABLED = -1


# ---------------------------------------------------------------------------
# Evaluating M
# ---------------------------------------------------------------------------


def clause_effects(program: Program, a: ActionSem, space: StateSpace, tid: int, pre, post) -> np.ndarray:
    """Effect codes of ``a`` on aligned transitions ``(pre, post)`` of thread ``tid``."""
    pre = np.asarray(pre, dtype=np.int64)
    kind, var = a.access
    if kind == "local":
        return np.full(len(pre), int(B), dtype=np.int64)
    decl = program.var(var)
    out = np.full(len(pre), int(E), dtype=np.int64)
    todo = np.ones(len(pre), dtype=bool)
    second = pre if kind == "read" else np.asarray(post, dtype=np.int64)
    for c in decl.clauses_for(kind):
        if not todo.any():
            break
        hit = todo & eval_bool(c.cond, space, tid, pre, second)
        out[hit] = int(c.effect)
        todo &= ~hit
    return out


def effect_table(program: Program, a: ActionSem, space: StateSpace, tid: int, idx) -> np.ndarray:
    """``M(a, tid, σ)`` for each store in ``idx``; :data:`DISABLED` where ``a`` is blocked."""
    idx = np.asarray(idx, dtype=np.int64)
    pos, dst = a.image(space, tid, idx)
    out = np.full(len(idx), DISABLED, dtype=np.int64)
    if len(pos):
        eff = clause_effects(program, a, space, tid, idx[pos], dst)
        # writes are deterministic and reads ignore the post-store, so any
        # transition from a store determines its effect
        out[pos] = eff
    return out


def effect_of(program: Program, a: ActionSem, space: StateSpace, tid: int, store: int) -> Optional[Effect]:
    """Effect of ``a`` at one store, or ``None`` where ``a`` is blocked."""
    code = int(effect_table(program, a, space, tid, [store])[0])
    return None if code == DISABLED else Effect(code)


@dataclass
class EffectOver:
    effect: Effect
    witness: Optional[tuple[int, int]] = None  # (tid, store) where E arises


def effect_over(program: Program, a: ActionSem, p) -> EffectOver:
    """Join of ``M(a, t, σ)`` over the post-stores of ``p`` where ``a`` is enabled."""
    space = p.space
    effects = []
    witness = None
    for tid, _, post in p.by_tid():
        stores = np.unique(post)
        table = effect_table(program, a, space, tid, stores)
        present = np.unique(table[table != DISABLED])
        effects += [Effect(int(x)) for x in present]
        if witness is None and int(E) in present:
            witness = (tid, int(stores[np.argmax(table == int(E))]))
    return EffectOver(join_all(effects, default=B), witness)


# ---------------------------------------------------------------------------
# Syntactic actions of a program
# ---------------------------------------------------------------------------


@dataclass
class SiteAction:
    sem: ActionSem
    span: Span
    where: str


def program_actions(program: Program) -> list[SiteAction]:
    """Every primitive and conditional action occurring in ``program``, deduplicated."""
    seen = {}
    for where, body in program.bodies():
        for s in walk(body):
            sems = []
            if isinstance(s, PRIMITIVE_ACTIONS):
                sems = [denote_action(program, s)]
            elif isinstance(s, (If, While)):
                sems = list(denote_cond(program, s.cond))
            for a in sems:
                if a.key() not in seen:
                    seen[a.key()] = SiteAction(a, s.span, where)
    return list(seen.values())


def clause_vars(program: Program, var: Optional[str]) -> set[str]:
    if var is None:
        return set()
    names = set()
    for c in program.var(var).clauses:
        names |= var_names(c.cond)
    return names


def footprint(program: Program, a: ActionSem, tid: int) -> set[str]:
    """Instance names an action and its mover clauses depend on, for thread ``tid``."""
    names = a.footprint() | clause_vars(program, a.access[1])
    return {instance(n, tid) if program.is_local(n) else n for n in names}


# ---------------------------------------------------------------------------
# Validity
# ---------------------------------------------------------------------------


@dataclass
class ValidityViolation:
    condition: int
    a1: SiteAction
    a2: SiteAction
    t: int
    u: int
    space: StateSpace = field(repr=False)
    stores: tuple[int, ...] = ()

    def witness(self) -> str:
        names = ["σ", "σ'", "σ''"]
        return ", ".join(f"{n}={self.space.fmt(s)}" for n, s in zip(names, self.stores))

    def message(self) -> str:
        parts = self.witness()
        return (
            f"validity condition ({self.condition}) violated: "
            f"thread {self.t} action [{self.a1.sem.label}] at {self.a1.span} "
            f"vs thread {self.u} action [{self.a2.sem.label}] at {self.a2.span}; witness {parts}"
        )

    def sort_key(self):
        return (self.a1.span.key(), self.a2.span.key(), self.t, self.u, self.condition)


def _pairs(space: StateSpace, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a * space.size + b


def _trans(a: ActionSem, space: StateSpace, tid: int, idx: np.ndarray):
    pos, dst = a.image(space, tid, idx)
    return idx[pos], dst


def _succ(space: StateSpace, a: ActionSem, tid: int, src: np.ndarray):
    """Transitions from ``src`` as ``(pos, dst)`` (positions into ``src``)."""
    return a.image(space, tid, src)


def check_pair(program: Program, vals: Values, x: SiteAction, y: SiteAction, t: int, u: int,
               budget: Optional[int] = None, limit: int = 1) -> list[ValidityViolation]:
    """Conditions (1)-(4) for ``x`` by thread ``t`` against ``y`` by thread ``u``."""
    a1, a2 = x.sem, y.sem
    names = footprint(program, a1, t) | footprint(program, a2, u)
    space = StateSpace.of_instances(program, vals, names, budget)
    allidx = space.all()
    e1 = effect_table(program, a1, space, t, allidx)
    e2 = effect_table(program, a2, space, u, allidx)
    s_pre, s_post = _trans(a1, space, t, allidx)  # A1 transitions (σ, σ')
    eff1 = e1[s_pre]
    out: list[ValidityViolation] = []

    def report(cond, stores):
        out.append(ValidityViolation(cond, x, y, t, u, space, tuple(int(s) for s in stores)))

    def commute(bound1: Effect, bound2: Effect, cond: int):
        # σ -A1-> σ' -A2-> σ'' must also be reachable as σ -A2-> σ''' -A1-> σ''
        keep = np.isin(eff1, [int(e) for e in Effect if leq(e, bound1)])
        p1, p2 = s_pre[keep], s_post[keep]
        keep2 = np.isin(e2[p2], [int(e) for e in Effect if leq(e, bound2)])
        p1, p2 = p1[keep2], p2[keep2]
        if not len(p1):
            return
        pos, p3 = _succ(space, a2, u, p2)
        lhs_pre, lhs_mid, lhs_post = p1[pos], p2[pos], p3
        # the other order, from the same starting stores
        starts = np.unique(lhs_pre)
        q_pos, q_mid = _succ(space, a2, u, starts)
        r_pos, r_post = _succ(space, a1, t, q_mid)
        rhs = np.unique(_pairs(space, starts[q_pos][r_pos], r_post))
        missing = ~np.isin(_pairs(space, lhs_pre, lhs_post), rhs)
        for j in np.flatnonzero(missing)[:limit]:
            report(cond, (lhs_pre[j], lhs_mid[j], lhs_post[j]))

    commute(R, N, 1)
    commute(N, L, 2)

    # (3): A1 by t never changes the effect A2 has for u
    keep = eff1 != int(E)
    p1, p2 = s_pre[keep], s_post[keep]
    both = (e2[p1] != DISABLED) & (e2[p2] != DISABLED)
    changed = both & (e2[p1] != e2[p2])
    for j in np.flatnonzero(changed)[:limit]:
        report(3, (p1[j], p2[j]))

    # (4): A1 by t never blocks a left-moving A2 of u
    p1, p2 = s_pre[keep], s_post[keep]
    left = np.isin(e2[p1], [int(e) for e in Effect if leq(e, L)])
    p1, p2 = p1[left], p2[left]
    if len(p1):
        pos, p3 = _succ(space, a2, u, p1)  # σ -A2-> σ''
        sig, sig1, sig2 = p1[pos], p2[pos], p3
        # σ''' must satisfy σ' -A2-> σ''' and σ'' -A1-> σ'''
        a_pos, a_dst = _succ(space, a2, u, sig1)
        b_pos, b_dst = _succ(space, a1, t, sig2)
        ok_codes = np.intersect1d(
            np.unique(a_pos.astype(np.int64) * space.size + a_dst),
            np.unique(b_pos.astype(np.int64) * space.size + b_dst),
        )
        fine = np.zeros(len(sig), dtype=bool)
        fine[np.unique(ok_codes // space.size)] = True
        for j in np.flatnonzero(~fine)[:limit]:
            report(4, (sig[j], sig1[j], sig2[j]))
    return out


def check_validity(program: Program, vals: Optional[Values] = None, budget: Optional[int] = None,
                   exempt_local: bool = True, limit: int = 1) -> list[ValidityViolation]:
    """All validity violations over every ordered pair of program actions and threads."""
    vals = vals or Values(program.bits, program.listdepth, program.ntids)
    actions = program_actions(program)
    out: list[ValidityViolation] = []
    for x in actions:
        for y in actions:
            if exempt_local and x.sem.access[0] == "local" and y.sem.access[0] == "local":
                continue
            for t, u in permutations(program.tids, 2):
                out += check_pair(program, vals, x, y, t, u, budget, limit)
    out.sort(key=ValidityViolation.sort_key)
    return out

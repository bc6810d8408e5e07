"""Strongest-postcondition checker for mover logic judgments.

``check_stmt`` computes, for a statement ``s`` and a two-store precondition
``P``, the exact post relation and the reduction effect of ``s`` under a
rely/guarantee context.  Consequence steps are taken implicitly: branch
posts are joined by union, loop invariants are least fixpoints, and loops
whose effect is at most a left-mover are weakened by joining with ``R``.

Relations live in the per-thread view space of :mod:`moverlogic.state`; a
rely never touches the executing thread's locals because its image only
varies the globals.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from itertools import permutations
from typing import Optional

import numpy as np

from .effects import B, E, L, R, Y, Effect, join, leq, seq, star
from .movers import check_validity, effect_over
from .parser import print_cond, print_expr, print_stmt
from .state import (
    FormulaRel,
    Rel1,
    Rel2,
    StateSpace,
    compose,
    denote_action,
    denote_cond,
    eval_bool,
    fmt_triple,
    initial_store,
    instance,
    postof,
    totality_gaps,
    two,
    yield_close,
)
from .syntax import (
    PRIMITIVE_ACTIONS,
    AtomicSpec,
    Block,
    CallStmt,
    Expr,
    FnDecl,
    If,
    NonAtomicSpec,
    Program,
    Skip,
    Span,
    Stmt,
    While,
    Wrong,
    Yield,
    first_stmt,
    var_names,
    walk,
)
from .values import Values


@dataclass
class Failure:
    rule: str
    message: str
    where: str
    span: Optional[Span] = None
    witness: str = ""

    def __str__(self) -> str:
        loc = f"{self.span}: " if self.span is not None else ""
        wit = f"\n    witness: {self.witness}" if self.witness else ""
        return f"{loc}[{self.rule}] in {self.where}: {self.message}{wit}"

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "message": self.message,
            "where": self.where,
            "span": str(self.span) if self.span is not None else None,
            "witness": self.witness,
        }


@dataclass
class EffectNote:
    where: str
    span: Span
    text: str
    effect: Effect
    kind: str
    branches: tuple = ()  # ((label, effect), ...) for conditional actions

    def to_dict(self) -> dict:
        return {
            "branches": [{"action": lab, "effect": e.name} for lab, e in self.branches],
            "where": self.where,
            "span": str(self.span),
            "line": self.span.line,
            "col": self.span.col,
            "stmt": self.text,
            "kind": self.kind,
            "effect": self.effect.name,
        }


@dataclass
class Judgment:
    post: Rel2
    effect: Effect
    promoted: bool = False


@dataclass
class Context:
    where: str
    rely: Optional[Expr]  # None means the empty relation
    guarantee: Optional[Expr]
    rely_rel: Optional[FormulaRel] = None


@dataclass
class Report:
    program: Program
    failures: list[Failure] = field(default_factory=list)
    effects: list[EffectNote] = field(default_factory=list)
    verdicts: dict[str, bool] = field(default_factory=dict)
    fn_effects: dict[str, Effect] = field(default_factory=dict)
    posts: dict[str, Rel2] = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @property
    def verified(self) -> bool:
        return not self.failures

    @property
    def verdict(self) -> str:
        return "verified" if self.verified else "failed"

    def effects_of(self, where: str) -> list[Effect]:
        return [n.effect for n in self.effects if n.where == where and n.kind != "compound"]

    def rules(self) -> list[str]:
        return [f.rule for f in self.failures]


def _one_line(s: Stmt) -> str:
    if isinstance(s, If) and s.is_assert:
        return f"assert {print_expr(s.cond.formula)};"
    if isinstance(s, (If, While)):
        head = "if" if isinstance(s, If) else "while"
        return f"{head} ({print_cond(s.cond)})"
    if isinstance(s, Block):
        return "{ ... }"
    return print_stmt(s)[0].strip()


class Checker:
    def __init__(self, program: Program, vals: Optional[Values] = None,
                 budget: Optional[int] = None, totality: str = "global"):
        if totality not in ("global", "reachable"):
            raise ValueError(f"unknown totality mode {totality!r}")
        self.program = program
        self.vals = vals or Values(program.bits, program.listdepth, program.ntids)
        self.budget = budget
        self.space = StateSpace.view(program, self.vals, budget)
        self.ntids = program.ntids
        self.totality = totality
        self.report = Report(program)
        self._quiet = 0
        self._mute = 0
        self._globals = tuple(v.name for v in program.globals)

    # -- bookkeeping -------------------------------------------------------

    def fail(self, rule: str, message: str, ctx_where: str, span: Optional[Span] = None, witness: str = ""):
        if not self._quiet:
            self.report.failures.append(Failure(rule, message, ctx_where, span, witness))

    def note(self, ctx: Context, s: Stmt, effect: Effect, kind: str, branches: tuple = ()):
        if not self._quiet and not self._mute:
            self.report.effects.append(EffectNote(ctx.where, s.span, _one_line(s), effect, kind, branches))

    def store1(self, w) -> str:
        t, s = w
        return f"tid={t}, store={self.space.fmt(s)}"

    def triple(self, w) -> str:
        return fmt_triple(self.space, w)

    def rel1(self, f: Expr) -> Rel1:
        return Rel1.from_formula(self.space, self.ntids, f)

    def rely_of(self, f: Optional[Expr]) -> Optional[FormulaRel]:
        return None if f is None else FormulaRel(f, self._globals)

    # -- statements --------------------------------------------------------

    def check_stmt(self, s: Stmt, p: Rel2, ctx: Context) -> Judgment:
        if isinstance(s, Block):
            return self._block(s, p, ctx)
        if isinstance(s, Skip):
            self.note(ctx, s, B, "skip")
            return Judgment(p, B)
        if isinstance(s, Wrong):
            if not p.is_empty():
                self.fail("M-wrong", "wrong is reachable: precondition is not empty", ctx.where, s.span,
                          self.triple(_first(p)[0]))
            self.note(ctx, s, B, "wrong")
            return Judgment(Rel2.empty(self.space, self.ntids), B)
        if isinstance(s, Yield):
            return self._yield(s, p, ctx)
        if isinstance(s, PRIMITIVE_ACTIONS):
            return self._action(s, p, ctx)
        if isinstance(s, If):
            return self._if(s, p, ctx)
        if isinstance(s, While):
            return self._while(s, p, ctx)
        if isinstance(s, CallStmt):
            return self._call(s, p, ctx)
        raise TypeError(f"unknown statement {s!r}")

    def _block(self, s: Block, p: Rel2, ctx: Context) -> Judgment:
        acc = B
        for c in s.stmts:
            j = self.check_stmt(c, p, ctx)
            new = seq(acc, j.effect)
            if new == E and acc != E and j.effect != E:
                if j.promoted:
                    self.fail("M-while", "left-mover termination: a loop after the commit point of a reducible "
                              f"sequence must terminate (sequence effect {acc} ; loop effect {j.effect} = E)",
                              ctx.where, c.span, self._some_witness(p))
                else:
                    self.fail("M-seq", f"sequence is not reducible: effect {acc} ; {j.effect} = E "
                              "(a yield is required here)", ctx.where, c.span, self._some_witness(p))
            acc = new
            p = j.post
        return Judgment(p, acc)

    def _some_witness(self, p: Rel2) -> str:
        return self.triple(_first(p)[0]) if not p.is_empty() else "(no reachable state)"

    def _yield(self, s: Yield, p: Rel2, ctx: Context) -> Judgment:
        if ctx.guarantee is None:
            if not p.is_empty():
                self.fail("M-yield", "yield inside an atomic context: P is not contained in the empty guarantee",
                          ctx.where, s.span, self.triple(_first(p)[0]))
        else:
            w = p.satisfies(ctx.guarantee)
            if w is not None:
                self.fail("M-yield", f"P does not imply the guarantee {print_expr(ctx.guarantee)}",
                          ctx.where, s.span, self.triple(w))
        self.note(ctx, s, Y, "yield")
        return Judgment(yield_close(p, ctx.rely_rel), Y)

    def _action_effect(self, a, p: Rel2, ctx: Context, s: Stmt, what: str) -> Effect:
        eo = effect_over(self.program, a, p)
        if eo.effect == E:
            kind, var = a.access
            access = f"write to {var}" if kind == "write" else f"read of {var}"
            self.fail("M-action", f"effect E at {access} ({what}): no mover clause applies",
                      ctx.where, s.span, self.store1(eo.witness) if eo.witness else "")
        return eo.effect

    def _action(self, s: Stmt, p: Rel2, ctx: Context) -> Judgment:
        a = denote_action(self.program, s)
        label = print_stmt(s)[0].strip()
        e = self._action_effect(a, p, ctx, s, label)
        if leq(e, L):
            for tid in p.tids():
                stores = self.space.all() if self.totality == "global" else np.flatnonzero(postof(p).mask[tid - 1])
                gaps = totality_gaps(a, self.space, tid, stores)
                if len(gaps):
                    self.fail("M-action", f"left-mover action {label} (effect {e}) is not total",
                              ctx.where, s.span, self.store1((tid, int(gaps[0]))))
                    break
        self.note(ctx, s, e, "action")
        return Judgment(compose(p, a), e)

    def _if(self, s: If, p: Rel2, ctx: Context) -> Judgment:
        a1, a2 = denote_cond(self.program, s.cond)
        what = print_cond(s.cond)
        e1 = self._action_effect(a1, p, ctx, s, what)
        e2 = self._action_effect(a2, p, ctx, s, f"negation of {what}")
        self.note(ctx, s, join(e1, e2), "action", ((a1.label, e1), (a2.label, e2)))
        # the branches of an assert are not source statements
        self._mute += s.is_assert
        try:
            j1 = self.check_stmt(s.then, compose(p, a1), ctx)
            j2 = self.check_stmt(s.orelse, compose(p, a2), ctx)
        finally:
            self._mute -= s.is_assert
        left, right = seq(e1, j1.effect), seq(e2, j2.effect)
        for (ea, eb, branch) in ((e1, j1.effect, "then"), (e2, j2.effect, "else")):
            if seq(ea, eb) == E and ea != E and eb != E:
                self.fail("M-if", f"{branch} branch is not reducible: {ea} ; {eb} = E", ctx.where, s.span,
                          self._some_witness(p))
        return Judgment(j1.post | j2.post, join(left, right))

    def _while(self, s: While, p: Rel2, ctx: Context) -> Judgment:
        a1, a2 = denote_cond(self.program, s.cond)
        what = print_cond(s.cond)
        if s.invariant is not None:
            inv = self._user_invariant(s, p, ctx)
        else:
            inv = p
            self._quiet += 1
            try:
                while True:
                    body = self.check_stmt(s.body, compose(inv, a1), ctx)
                    grown = inv | body.post
                    if grown == inv:
                        break
                    inv = grown
            finally:
                self._quiet -= 1
        e1 = self._action_effect(a1, inv, ctx, s, what)
        e2 = self._action_effect(a2, inv, ctx, s, f"negation of {what}")
        self.note(ctx, s, join(e1, e2), "action", ((a1.label, e1), (a2.label, e2)))
        body = self.check_stmt(s.body, compose(inv, a1), ctx)
        if s.invariant is not None:
            w = body.post.witness_outside(inv)
            if w is not None:
                self.fail("M-while", "loop invariant is not inductive", ctx.where, s.span, self.triple(w))
        it = seq(e1, body.effect)
        e = seq(star(it), e2)
        if e == E and it != E and e2 != E:
            self.fail("M-while", f"loop is not reducible: ({e1} ; {body.effect})* ; {e2} = E",
                      ctx.where, s.span, self._some_witness(inv))
        promoted = False
        if leq(e, L):
            e = join(e, R)
            promoted = True
        return Judgment(compose(inv, a2), e, promoted)

    def _user_invariant(self, s: While, p: Rel2, ctx: Context) -> Rel2:
        """Pairs satisfying the annotation whose pre-store occurs in ``p``."""
        n = self.space.size
        parts = []
        for tid, pre, _ in p.by_tid():
            starts = np.unique(pre)
            a = np.repeat(starts, n)
            b = np.tile(self.space.all(), len(starts))
            keep = eval_bool(s.invariant, self.space, tid, a, b)
            parts.append(((tid - 1) * n + a[keep]) * n + b[keep])
        inv = Rel2(self.space, self.ntids, np.concatenate(parts)) if parts else Rel2.empty(self.space, self.ntids)
        w = p.witness_outside(inv)
        if w is not None:
            self.fail("M-while", "loop invariant does not hold on entry", ctx.where, s.span, self.triple(w))
        return inv

    def _call(self, s: CallStmt, p: Rel2, ctx: Context) -> Judgment:
        f = self.program.fn(s.name)
        if isinstance(f.spec, AtomicSpec):
            w = _outside_formula(postof(p), f.spec.requires)
            if w is not None:
                self.fail("M-call-atomic", f"precondition of {f.name} may not hold at the call",
                          ctx.where, s.span, self.store1(w))
            frame = FormulaRel(f.spec.ensures, tuple(sorted(write_set(self.program, f))))
            self.note(ctx, s, f.spec.effect, "call")
            return Judgment(compose(p, frame), f.spec.effect)
        spec: NonAtomicSpec = f.spec
        outside = _first(p - two(self.rel1(spec.requires)))
        if outside:
            self.fail("M-call-non-atomic", f"caller precondition is not contained in Two(S) for {f.name}",
                      ctx.where, s.span, self.triple(outside[0]))
        if ctx.rely is None or ctx.guarantee is None:
            self.fail("M-call-non-atomic", f"non-atomic {f.name} called from an atomic context",
                      ctx.where, s.span, self._some_witness(p))
        else:
            w = self.pair_implies(ctx.rely, spec.relies, locals_frozen=True)
            if w is not None:
                self.fail("M-call-non-atomic", f"caller rely does not imply the rely of {f.name}",
                          ctx.where, s.span, w)
            w = self.pair_implies(spec.guarantees, ctx.guarantee, locals_frozen=False)
            if w is not None:
                self.fail("M-call-non-atomic", f"guarantee of {f.name} is not contained in the caller guarantee",
                          ctx.where, s.span, w)
        post = two(Rel1(self.space, self.rel1(spec.ensures).mask & _tid_mask(p)))
        self.note(ctx, s, R, "call")
        return Judgment(post, R)

    # -- implications between two-store formulas ------------------------------

    def pair_implies(self, lhs: Expr, rhs: Expr, locals_frozen: bool) -> Optional[str]:
        """Witness for ``lhs ⇒ rhs`` failing on the view space, or ``None``."""
        names = var_names(lhs) | var_names(rhs)
        space = StateSpace.of_view(self.program, self.vals, names, self.budget)
        free = [i for i, n in enumerate(space.names) if not (locals_frozen and self.program.is_local(n))]
        allidx = space.all()
        pos, post = space.havoc(allidx, free)
        pre = allidx[pos]
        for tid in self.program.tids:
            bad = eval_bool(lhs, space, tid, pre, post) & ~eval_bool(rhs, space, tid, pre, post)
            if bad.any():
                j = int(np.argmax(bad))
                return fmt_triple(space, (tid, int(pre[j]), int(post[j])))
        return None

    # -- functions ---------------------------------------------------------

    def check_fn(self, f: FnDecl) -> bool:
        before = len(self.report.failures)
        where = f"function {f.name}"
        if isinstance(f.spec, AtomicSpec):
            if f.name in reachable_calls(self.program, f.name):
                self.fail("M-def-atomic", f"atomic function {f.name} is recursive", where, f.span,
                          "call cycle " + " -> ".join(call_cycle(self.program, f.name)))
            ctx = Context(where, None, None, None)
            p0 = two(self.rel1(f.spec.requires))
            j = self.check_stmt(f.body, p0, ctx)
            w = j.post.satisfies(f.spec.ensures)
            if w is not None:
                self.fail("M-def-atomic", f"postcondition {print_expr(f.spec.ensures)} does not hold",
                          where, f.span, self.triple(w))
            if not leq(j.effect, f.spec.effect):
                self.fail("M-def-atomic", f"body effect {j.effect} is not below the declared effect "
                          f"{f.spec.effect}", where, f.span, self._some_witness(p0))
        else:
            spec = f.spec
            ctx = Context(where, spec.relies, spec.guarantees, self.rely_of(spec.relies))
            if self._empty_pair_formula(spec.guarantees):
                self.fail("M-def-non-atomic", "guarantee G is empty", where, f.span,
                          f"no (tid, pre, post) satisfies {print_expr(spec.guarantees)}")
            p0 = two(self.rel1(spec.requires))
            j = self.check_stmt(f.body, p0, ctx)
            if not leq(j.effect, R):
                self.fail("M-def-non-atomic", f"effect {j.effect} is not below R: the body must end in a yield",
                          where, f.span, self._some_witness(j.post))
            target = two(self.rel1(spec.ensures))
            w = j.post.witness_outside(target)
            if w is not None:
                self.fail("M-def-non-atomic", f"post is not contained in Two({print_expr(spec.ensures)})",
                          where, f.span, self.triple(w))
        self.report.fn_effects[where] = j.effect
        self.report.posts[where] = j.post
        ok = len(self.report.failures) == before
        self.report.verdicts[where] = ok
        return ok

    def _empty_pair_formula(self, g: Expr) -> bool:
        diag = self.space.all()
        for tid in self.program.tids:
            if eval_bool(g, self.space, tid, diag, diag).any():
                return False
        names = var_names(g)
        space = StateSpace.of_view(self.program, self.vals, names, self.budget)
        pos, post = space.havoc(space.all(), list(range(len(space.names))))
        pre = space.all()[pos]
        return not any(eval_bool(g, space, t, pre, post).any() for t in self.program.tids)

    # -- whole program -----------------------------------------------------

    def check_program(self, validity: bool = True) -> Report:
        t0 = time.perf_counter()
        prog = self.program
        for f in prog.fns:
            self.check_fn(f)
        t1 = time.perf_counter()
        if validity:
            for v in check_validity(prog, self.vals, self.budget):
                self.fail(f"validity ({v.condition})", v.message(), "mover specification", v.a1.span,
                          v.witness())
        t2 = time.perf_counter()
        g = prog.guarantees
        diag = self.space.all()
        for tid in prog.tids:
            bad = ~eval_bool(g, self.space, tid, diag, diag)
            if bad.any():
                self.fail("M-state", "I ⇒ G fails: the guarantee is not reflexive", "program", None,
                          self.store1((tid, int(diag[np.argmax(bad)]))))
                break
        init = initial_store(prog, self.vals)
        for tid, body in zip(prog.tids, prog.threads):
            where = f"thread {tid}"
            before = len(self.report.failures)
            view = {v.name: init[v.name] for v in prog.globals}
            view.update({v.name: init[instance(v.name, tid)] for v in prog.locals})
            s0 = self.space.encode(view)
            if not isinstance(first_stmt(body), Yield):
                self.fail("M-state", "thread body must start with yield", where, body.span, self.store1((tid, s0)))
            p0 = Rel2.from_triples(self.space, self.ntids, [(tid, s0, s0)])
            ctx = Context(where, prog.relies, g, self.rely_of(prog.relies))
            j = self.check_stmt(body, p0, ctx)
            if j.effect == E:
                self.fail("M-state", "thread effect is E", where, body.span, self._some_witness(p0))
            w = j.post.satisfies(g)
            if w is not None:
                self.fail("M-state", "final post of the thread does not imply the guarantee", where, body.span,
                          self.triple(w))
            self.report.fn_effects[where] = j.effect
            self.report.posts[where] = j.post
            self.report.verdicts[where] = len(self.report.failures) == before
        for t, u in permutations(prog.tids, 2):
            w = self.cross_thread(t, u)
            if w is not None:
                self.fail("M-state", f"guarantee of thread {t} is not contained in the rely of thread {u}",
                          "program", None, w)
                break
        t3 = time.perf_counter()
        self.report.stats.update({
            "view_space": self.space.size,
            "functions_s": round(t1 - t0, 3),
            "validity_s": round(t2 - t1, 3),
            "threads_s": round(t3 - t2, 3),
        })
        return self.report

    def cross_thread(self, t: int, u: int) -> Optional[str]:
        """Witness for ``G[t] ∧ (other locals unchanged) ⇒ R[u]`` failing, or ``None``."""
        prog = self.program
        names = set()
        for f, tid in ((prog.guarantees, t), (prog.relies, u)):
            names |= {instance(n, tid) if prog.is_local(n) else n for n in var_names(f)}
        space = StateSpace.of_instances(prog, self.vals, names, self.budget)
        free = [i for i, n in enumerate(space.names) if "@" not in n or n.endswith(f"@{t}")]
        allidx = space.all()
        pos, post = space.havoc(allidx, free)
        pre = allidx[pos]
        bad = eval_bool(prog.guarantees, space, t, pre, post) & ~eval_bool(prog.relies, space, u, pre, post)
        if bad.any():
            j = int(np.argmax(bad))
            return f"t={t}, u={u}, pre={space.fmt(int(pre[j]))}, post={space.fmt(int(post[j]))}"
        return None


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _first(p: Rel2) -> list[tuple[int, int, int]]:
    t, a, b = p.arrays()
    return [(int(t[0]) + 1, int(a[0]), int(b[0]))] if len(t) else []


def _outside_formula(s: Rel1, f: Expr) -> Optional[tuple[int, int]]:
    for ti in range(s.ntids):
        idx = np.flatnonzero(s.mask[ti])
        bad = ~eval_bool(f, s.space, ti + 1, idx, idx)
        if bad.any():
            return ti + 1, int(idx[np.argmax(bad)])
    return None


def _tid_mask(p: Rel2) -> np.ndarray:
    present = np.zeros((p.ntids, 1), dtype=bool)
    for t in p.tids():
        present[t - 1] = True
    return present


def calls_in(s: Stmt) -> set[str]:
    return {c.name for c in walk(s) if isinstance(c, CallStmt)}


def call_cycle(program: Program, name: str) -> list[str]:
    """A shortest call path from ``name`` back to itself (empty if there is none)."""
    parent = {g: name for g in sorted(calls_in(program.fn(name).body))}
    queue = list(parent)
    while queue:
        g = queue.pop(0)
        if g == name:
            path = [g]
            cur = parent[g]
            while cur != name:
                path.append(cur)
                cur = parent[cur]
            return [name] + path[::-1]
        if program.fn(g) is None:
            continue
        for h in sorted(calls_in(program.fn(g).body)):
            if h not in parent:
                parent[h] = g
                queue.append(h)
    return []


def reachable_calls(program: Program, name: str) -> set[str]:
    """Functions reachable from ``name`` through one or more calls."""
    seen: set[str] = set()
    todo = list(calls_in(program.fn(name).body))
    while todo:
        g = todo.pop()
        if g in seen or program.fn(g) is None:
            continue
        seen.add(g)
        todo += calls_in(program.fn(g).body)
    return seen


def write_set(program: Program, f: FnDecl) -> set[str]:
    """Variables the body of ``f`` may write, following calls transitively."""
    out: set[str] = set()
    for g in {f.name} | reachable_calls(program, f.name):
        for s in walk(program.fn(g).body):
            if isinstance(s, PRIMITIVE_ACTIONS):
                out |= denote_action(program, s).writes()
            elif isinstance(s, (If, While)):
                for a in denote_cond(program, s.cond):
                    out |= a.writes()
    return out


def check_program(program: Program, vals: Optional[Values] = None, budget: Optional[int] = None,
                  totality: str = "global", validity: bool = True) -> Report:
    return Checker(program, vals, budget, totality).check_program(validity)

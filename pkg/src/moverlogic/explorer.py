"""Exhaustive exploration of the small-step semantics.

Execution states pair one continuation per thread (a tuple of statements
still to run) with a shared store over every variable instance.  Statements
are interpreted directly with the scalar evaluator; specifications are never
consulted, so results here are an independent check on the checker.

Two schedulers are supported.  Under ``preemptive`` any thread with a
successor may step.  Under ``nonpreemptive`` the thread that stepped last
keeps running until its next statement is a yield, it finishes or it
blocks; only then may another thread be chosen.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .effects import B, E, L, N, R, Effect
from .parser import print_stmt
from .syntax import (
    Acquire,
    Assign,
    Block,
    CallStmt,
    Cas,
    If,
    Program,
    Skip,
    Span,
    Stmt,
    Test,
    UnstableRead,
    Release,
    While,
    Wrong,
    Yield,
)
from .state import BudgetExceeded, default_budget, initial_store, instance
from .values import INVALID, Values, eval_scalar

SCHEDULERS = ("preemptive", "nonpreemptive")

Cont = tuple  # tuple[Stmt, ...]


@dataclass(frozen=True)
class ExecState:
    conts: tuple[Cont, ...]
    store: tuple[int, ...]
    running: int = 0  # thread holding the processor (nonpreemptive), 0 if free
    phases: tuple[int, ...] = ()  # reducibility automaton state per thread (instrumented)

    def finished(self) -> bool:
        return all(not c for c in self.conts)

    def wrong_thread(self) -> Optional[int]:
        for i, c in enumerate(self.conts, 1):
            if c and isinstance(c[0], Wrong):
                return i
        return None


@dataclass
class Step:
    tid: int
    rule: str
    span: Span
    label: str
    delta: tuple[tuple[str, int, int], ...]


@dataclass
class ExploreResult:
    scheduler: str
    terminals: set[tuple[int, ...]] = field(default_factory=set)
    wrong: bool = False
    wrong_trace: list[Step] = field(default_factory=list)
    wrong_state: Optional[ExecState] = None
    deadlocks: list[ExecState] = field(default_factory=list)
    deadlock_trace: list[Step] = field(default_factory=list)
    states: int = 0
    transitions: int = 0
    flags: set[tuple[str, str]] = field(default_factory=set)
    names: tuple[str, ...] = ()

    @property
    def safe(self) -> bool:
        return not self.wrong

    def stats(self) -> dict:
        return {
            "scheduler": self.scheduler,
            "states": self.states,
            "transitions": self.transitions,
            "terminal_stores": len(self.terminals),
            "wrong": self.wrong,
            "deadlocks": len(self.deadlocks),
        }


def normalize(stmts) -> Cont:
    """Flatten leading blocks so the head of a continuation is never a block."""
    out = list(stmts)
    while out and isinstance(out[0], Block):
        out[:1] = list(out[0].stmts)
    return tuple(out)


class Machine:
    """Successor function of the operational semantics for one program."""

    def __init__(self, program: Program, vals: Optional[Values] = None, instrument: bool = False):
        self.program = program
        self.vals = vals or Values(program.bits, program.listdepth, program.ntids)
        init = initial_store(program, self.vals)
        self.names = tuple(init)
        self.index = {n: i for i, n in enumerate(self.names)}
        self.init_store = tuple(init[n] for n in self.names)
        self.instrument = instrument
        self._domains = {}
        for n in self.names:
            decl = program.var(n.split("@")[0])
            self._domains[n] = tuple(int(v) for v in self.vals.domain(decl.type))
        self._domsets = {n: frozenset(d) for n, d in self._domains.items()}

    def initial(self) -> ExecState:
        conts = tuple(normalize(t.stmts) for t in self.program.threads)
        phases = (0,) * self.program.ntids if self.instrument else ()
        return ExecState(conts, self.init_store, 0, phases)

    # -- stores --------------------------------------------------------------

    def slot(self, name: str, tid: int) -> int:
        if self.program.is_local(name):
            return self.index[instance(name, tid)]
        return self.index[name]

    def lookup(self, store, tid: int):
        return lambda name, old: store[self.slot(name, tid)]

    def eval(self, e, store, tid: int):
        return eval_scalar(e, self.vals, self.lookup(store, tid), tid)

    def assign(self, store, tid: int, name: str, value) -> Optional[tuple]:
        """Store with ``name`` set, or ``None`` when the value is outside its domain."""
        i = self.slot(name, tid)
        if value is True or value is False or int(value) not in self._domsets[self.names[i]]:
            return None
        s = list(store)
        s[i] = int(value)
        return tuple(s)

    def delta(self, a, b) -> tuple[tuple[str, int, int], ...]:
        return tuple((self.names[i], x, y) for i, (x, y) in enumerate(zip(a, b)) if x != y)

    # -- actions -------------------------------------------------------------

    def action(self, s: Stmt, store, tid: int) -> list[tuple]:
        if isinstance(s, Assign):
            new = self.assign(store, tid, s.target, self.eval(s.expr, store, tid))
            return [new] if new is not None else []
        if isinstance(s, Acquire):
            if store[self.slot(s.lock, tid)] != 0:
                return []
            new = self.assign(store, tid, s.lock, tid)
            return [new] if new is not None else []
        if isinstance(s, Release):
            return [self.assign(store, tid, s.lock, 0)]
        if isinstance(s, UnstableRead):
            name = self.names[self.slot(s.target, tid)]
            return [self.assign(store, tid, s.target, v) for v in self._domains[name]]
        raise TypeError(s)

    def cond(self, c, store, tid: int) -> tuple[list[tuple], list[tuple]]:
        """Successor stores of the two components of a conditional action."""
        if isinstance(c, Test):
            ok = bool(self.eval(c.formula, store, tid))
            return ([store], []) if ok else ([], [store])
        if isinstance(c, Cas):
            cur = store[self.slot(c.var, tid)]
            expected = self.eval(c.expected, store, tid)
            success = []
            if expected != INVALID and cur == expected:
                new = self.assign(store, tid, c.var, self.eval(c.new, store, tid))
                if new is not None:
                    success = [new]
            failure = [store]
            return (failure, success) if c.negated else (success, failure)
        raise TypeError(c)

    # -- one thread ----------------------------------------------------------

    def thread_steps(self, st: ExecState, tid: int) -> Iterator[tuple[Cont, tuple, str, Stmt, Optional[object]]]:
        """Successors ``(cont, store, rule, stmt, action)`` of thread ``tid``."""
        cont = st.conts[tid - 1]
        if not cont:
            return
        s, rest = cont[0], cont[1:]
        store = st.store
        if isinstance(s, Wrong):
            return
        if isinstance(s, (Skip, Yield)):
            yield normalize(rest), store, "yield" if isinstance(s, Yield) else "skip", s, None
        elif isinstance(s, CallStmt):
            body = self.program.fn(s.name).body
            yield normalize((body,) + rest), store, "call", s, None
        elif isinstance(s, If):
            good, bad = self.cond(s.cond, store, tid)
            for new in good:
                yield normalize((s.then,) + rest), new, "if-then", s, (s.cond, 0)
            for new in bad:
                yield normalize((s.orelse,) + rest), new, "if-else", s, (s.cond, 1)
        elif isinstance(s, While):
            good, bad = self.cond(s.cond, store, tid)
            for new in good:
                yield normalize((s.body, s) + rest), new, "while-iterate", s, (s.cond, 0)
            for new in bad:
                yield normalize(rest), new, "while-exit", s, (s.cond, 1)
        else:
            for new in self.action(s, store, tid):
                yield normalize(rest), new, "action", s, s

    # -- instrumentation -----------------------------------------------------

    def effect_at(self, act, store, new, tid: int) -> Effect:
        """``M`` of an executed action, evaluated on the concrete transition."""
        from .state import denote_action, denote_cond

        if isinstance(act, tuple):
            sem = denote_cond(self.program, act[0])[act[1]]
        else:
            sem = denote_action(self.program, act)
        kind, var = sem.access
        if kind == "local":
            return B
        post = store if kind == "read" else new

        def lookup(name, old):
            return (store if old else post)[self.slot(name, tid)]

        for c in self.program.var(var).clauses_for(kind):
            if eval_scalar(c.cond, self.vals, lookup, tid):
                return c.effect
        return E

    # -- whole machine -------------------------------------------------------

    def successors(self, st: ExecState, scheduler: str):
        """Yield ``(state, step)`` pairs, in canonical order."""
        candidates = self.program.tids
        if scheduler == "nonpreemptive" and st.running:
            own = list(self._expand(st, st.running, scheduler))
            if own:
                yield from own
                return
        for tid in candidates:
            yield from self._expand(st, tid, scheduler)

    def _expand(self, st: ExecState, tid: int, scheduler: str):
        for cont, store, rule, s, act in self.thread_steps(st, tid):
            conts = st.conts[: tid - 1] + (cont,) + st.conts[tid:]
            running = 0
            if scheduler == "nonpreemptive" and cont and not isinstance(cont[0], Yield):
                running = tid
            phases = st.phases
            if self.instrument:
                phases = self._phase_step(st, tid, s, act, st.store, store)
            label = print_stmt(s)[0].strip() if not isinstance(s, (If, While)) else rule
            step = Step(tid, rule, s.span, label, self.delta(st.store, store))
            yield ExecState(conts, store, running, phases), step

    def _phase_step(self, st, tid, s, act, store, new):
        phase = st.phases[tid - 1]
        if isinstance(s, Yield):
            phase = 0
        elif act is not None:
            e = self.effect_at(act, store, new, tid)
            if e == E:
                phase = 3
            elif phase == 0 and e in (L, N):
                phase = 1
            elif phase == 1 and e in (R, N):
                phase = 2
        return st.phases[: tid - 1] + (phase,) + st.phases[tid:]


def explore(program: Program, scheduler: str = "preemptive", budget: Optional[int] = None,
            vals: Optional[Values] = None, instrument: bool = False) -> ExploreResult:
    """Breadth-first search of every reachable execution state."""
    if scheduler not in SCHEDULERS:
        raise ValueError(f"unknown scheduler {scheduler!r}")
    budget = default_budget() if budget is None else budget
    m = Machine(program, vals, instrument)
    res = ExploreResult(scheduler, names=m.names)
    start = m.initial()
    parent: dict[ExecState, Optional[tuple[ExecState, Step]]] = {start: None}
    queue = deque([start])
    while queue:
        st = queue.popleft()
        if st.wrong_thread() is not None:
            if not res.wrong:
                res.wrong = True
                res.wrong_state = st
                res.wrong_trace = trace_to(parent, st)
            continue
        if instrument:
            for i, ph in enumerate(st.phases, 1):
                if ph == 3:
                    res.flags.add(("effect E", f"thread {i}"))
                elif ph == 2:
                    res.flags.add(("not reducible", f"thread {i}"))
        if st.finished():
            res.terminals.add(st.store)
            continue
        any_step = False
        for nxt, step in m.successors(st, scheduler):
            any_step = True
            res.transitions += 1
            if nxt not in parent:
                parent[nxt] = (st, step)
                queue.append(nxt)
                if len(parent) > budget:
                    raise BudgetExceeded("exploration", len(parent), budget)
        if not any_step:
            if not res.deadlocks:
                res.deadlock_trace = trace_to(parent, st)
            res.deadlocks.append(st)
    res.states = len(parent)
    return res


def trace_to(parent, st) -> list[Step]:
    steps = []
    while parent[st] is not None:
        st, step = parent[st]
        steps.append(step)
    return steps[::-1]


def replay(program: Program, trace: list[Step], vals: Optional[Values] = None) -> tuple[int, ...]:
    """Re-execute a trace with the preemptive semantics; returns the final store.

    Each step must be a successor of the previous state for the named thread
    with exactly the recorded store change, otherwise ``ValueError`` is raised.
    """
    m = Machine(program, vals)
    st = m.initial()
    for k, step in enumerate(trace):
        for nxt, s in m.successors(st, "preemptive"):
            if s.tid == step.tid and s.rule == step.rule and s.delta == step.delta and s.span == step.span:
                st = nxt
                break
        else:
            raise ValueError(f"trace step {k} does not replay: {format_step(step, m.vals)}")
    return st.store


def format_step(step: Step, vals: Values) -> str:
    delta = ", ".join(f"{n}: {vals.fmt(a)} -> {vals.fmt(b)}" for n, a, b in step.delta) or "-"
    return f"{step.tid} | {step.rule} | {step.span} | {delta}"


def format_trace(trace: list[Step], vals: Values) -> str:
    return "\n".join(format_step(s, vals) for s in trace)


@dataclass
class Comparison:
    preemptive: ExploreResult
    nonpreemptive: ExploreResult

    @property
    def only_preemptive(self) -> set:
        return self.preemptive.terminals - self.nonpreemptive.terminals

    @property
    def only_nonpreemptive(self) -> set:
        return self.nonpreemptive.terminals - self.preemptive.terminals

    @property
    def equivalent(self) -> bool:
        return (
            not self.only_preemptive
            and not self.only_nonpreemptive
            and self.preemptive.wrong == self.nonpreemptive.wrong
            and bool(self.preemptive.deadlocks) == bool(self.nonpreemptive.deadlocks)
        )

    def differences(self) -> list[str]:
        out = []
        p, n = self.preemptive, self.nonpreemptive
        if self.only_preemptive:
            out.append(f"{len(self.only_preemptive)} terminal store(s) reachable only preemptively")
        if self.only_nonpreemptive:
            out.append(f"{len(self.only_nonpreemptive)} terminal store(s) reachable only nonpreemptively")
        if p.wrong != n.wrong:
            out.append(f"wrong reachable: preemptive={p.wrong}, nonpreemptive={n.wrong}")
        if bool(p.deadlocks) != bool(n.deadlocks):
            out.append(f"deadlock reachable: preemptive={bool(p.deadlocks)}, nonpreemptive={bool(n.deadlocks)}")
        return out


def compare_schedulers(program: Program, budget: Optional[int] = None,
                       vals: Optional[Values] = None) -> Comparison:
    return Comparison(
        explore(program, "preemptive", budget, vals),
        explore(program, "nonpreemptive", budget, vals),
    )

"""Abstract syntax of mover logic programs.

Every node is an immutable dataclass.  Source spans never take part in
equality so that ``parse(print(p)) == p`` holds for any parsed program.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .effects import Effect


@dataclass(frozen=True)
class Span:
    file: str = "<input>"
    line: int = 0
    col: int = 0
    end_line: int = 0
    end_col: int = 0

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}"

    def key(self):
        return (self.file, self.line, self.col)


NOSPAN = Span()


def _span():
    return field(default=NOSPAN, compare=False, repr=False)


# ---------------------------------------------------------------------------
# Expressions and formulas (one grammar; formulas are boolean expressions)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntLit:
    value: int
    span: Span = _span()


@dataclass(frozen=True)
class BoolLit:
    value: bool
    span: Span = _span()


@dataclass(frozen=True)
class NoneLit:
    span: Span = _span()


@dataclass(frozen=True)
class NilLit:
    span: Span = _span()


@dataclass(frozen=True)
class Tid:
    span: Span = _span()


@dataclass(frozen=True)
class Var:
    name: str
    old: bool = False
    span: Span = _span()


@dataclass(frozen=True)
class Unary:
    op: str  # "!" or "-"
    arg: "Expr"
    span: Span = _span()


@dataclass(frozen=True)
class Binary:
    op: str  # + - * == != < <= > >= && || ==> ::
    left: "Expr"
    right: "Expr"
    span: Span = _span()


@dataclass(frozen=True)
class Call1:
    """Built-in unary function: head, tail, even."""

    fn: str
    arg: "Expr"
    span: Span = _span()


Expr = Union[IntLit, BoolLit, NoneLit, NilLit, Tid, Var, Unary, Binary, Call1]

TRUE = BoolLit(True)


def subexprs(e: Expr) -> Iterator[Expr]:
    yield e
    if isinstance(e, Unary) or isinstance(e, Call1):
        yield from subexprs(e.arg)
    elif isinstance(e, Binary):
        yield from subexprs(e.left)
        yield from subexprs(e.right)


def variables(e: Expr) -> set[tuple[str, bool]]:
    """Set of ``(name, is_old)`` references in ``e``."""
    return {(x.name, x.old) for x in subexprs(e) if isinstance(x, Var)}


def var_names(e: Expr) -> set[str]:
    return {name for name, _ in variables(e)}


def uses_old(e: Expr) -> bool:
    return any(old for _, old in variables(e))


# ---------------------------------------------------------------------------
# Declarations
# ---------------------------------------------------------------------------

TYPES = ("int", "lock", "optional int", "list int")


@dataclass(frozen=True)
class MoverClause:
    kind: str  # "read" | "write"
    effect: Effect
    cond: Expr = TRUE
    span: Span = _span()


@dataclass(frozen=True)
class VarDecl:
    name: str
    type: str
    local: bool = False
    clauses: tuple[MoverClause, ...] = ()
    span: Span = _span()

    def clauses_for(self, kind: str) -> tuple[MoverClause, ...]:
        return tuple(c for c in self.clauses if c.kind == kind)


@dataclass(frozen=True)
class AtomicSpec:
    effect: Effect
    requires: Expr
    ensures: Expr
    explicit_effect: bool = True


@dataclass(frozen=True)
class NonAtomicSpec:
    relies: Expr
    guarantees: Expr
    requires: Expr
    ensures: Expr


@dataclass(frozen=True)
class FnDecl:
    name: str
    spec: Union[AtomicSpec, NonAtomicSpec]
    body: "Block"
    span: Span = _span()

    @property
    def atomic(self) -> bool:
        return isinstance(self.spec, AtomicSpec)


# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Skip:
    span: Span = _span()


@dataclass(frozen=True)
class Wrong:
    span: Span = _span()


@dataclass(frozen=True)
class Yield:
    span: Span = _span()


@dataclass(frozen=True)
class Assign:
    target: str
    expr: Expr
    span: Span = _span()


@dataclass(frozen=True)
class UnstableRead:
    target: str
    source: str
    span: Span = _span()


@dataclass(frozen=True)
class Acquire:
    lock: str
    span: Span = _span()


@dataclass(frozen=True)
class Release:
    lock: str
    span: Span = _span()


@dataclass(frozen=True)
class Test:
    """Conditional action of a state predicate."""

    __test__ = False  # keep pytest from collecting it

    formula: Expr
    span: Span = _span()


@dataclass(frozen=True)
class Cas:
    """``cas(var, expected, new)``; ``negated`` swaps success and failure."""

    var: str
    expected: Expr
    new: Expr
    negated: bool = False
    span: Span = _span()


Cond = Union[Test, Cas]


@dataclass(frozen=True)
class If:
    cond: Cond
    then: "Stmt"
    orelse: "Stmt"
    is_assert: bool = False
    span: Span = _span()


@dataclass(frozen=True)
class While:
    cond: Cond
    body: "Stmt"
    invariant: Optional[Expr] = None
    span: Span = _span()


@dataclass(frozen=True)
class Block:
    stmts: tuple["Stmt", ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class CallStmt:
    name: str
    span: Span = _span()


Stmt = Union[Skip, Wrong, Yield, Assign, UnstableRead, Acquire, Release, If, While, Block, CallStmt]

PRIMITIVE_ACTIONS = (Assign, UnstableRead, Acquire, Release)


def make_assert(formula: Expr, span: Span = NOSPAN) -> If:
    """``assert B`` abbreviates ``if B skip else wrong``."""
    return If(Test(formula, span), Skip(span), Wrong(span), is_assert=True, span=span)


def walk(s: Stmt) -> Iterator[Stmt]:
    yield s
    if isinstance(s, Block):
        for c in s.stmts:
            yield from walk(c)
    elif isinstance(s, If):
        yield from walk(s.then)
        yield from walk(s.orelse)
    elif isinstance(s, While):
        yield from walk(s.body)


def first_stmt(s: Stmt) -> Optional[Stmt]:
    """First non-block statement executed by ``s`` (None for an empty block)."""
    while isinstance(s, Block):
        if not s.stmts:
            return None
        s = s.stmts[0]
    return s


# ---------------------------------------------------------------------------
# Program
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Program:
    vars: tuple[VarDecl, ...]
    fns: tuple[FnDecl, ...]
    init: tuple[tuple[str, Expr], ...]
    threads: tuple[Block, ...]
    relies: Expr = TRUE
    guarantees: Expr = TRUE
    bits: int = 5
    listdepth: int = 3
    name: str = field(default="<input>", compare=False)

    @property
    def ntids(self) -> int:
        return len(self.threads)

    @property
    def tids(self) -> range:
        return range(1, len(self.threads) + 1)

    def var(self, name: str) -> Optional[VarDecl]:
        for v in self.vars:
            if v.name == name:
                return v
        return None

    def fn(self, name: str) -> Optional[FnDecl]:
        for f in self.fns:
            if f.name == name:
                return f
        return None

    @property
    def globals(self) -> tuple[VarDecl, ...]:
        return tuple(v for v in self.vars if not v.local)

    @property
    def locals(self) -> tuple[VarDecl, ...]:
        return tuple(v for v in self.vars if v.local)

    def is_global(self, name: str) -> bool:
        v = self.var(name)
        return v is not None and not v.local

    def is_local(self, name: str) -> bool:
        v = self.var(name)
        return v is not None and v.local

    def bodies(self) -> Iterator[tuple[str, Stmt]]:
        for f in self.fns:
            yield f.name, f.body
        for i, t in enumerate(self.threads, 1):
            yield f"thread {i}", t

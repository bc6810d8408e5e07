"""Static well-formedness checks on parsed programs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .syntax import (
    Acquire,
    Assign,
    AtomicSpec,
    Binary,
    BoolLit,
    Call1,
    CallStmt,
    Cas,
    Expr,
    If,
    IntLit,
    NilLit,
    NoneLit,
    Program,
    Release,
    Span,
    Test,
    Tid,
    Unary,
    UnstableRead,
    Var,
    While,
    uses_old,
    var_names,
    walk,
)


@dataclass(frozen=True)
class Diagnostic:
    span: Optional[Span]
    message: str

    def __str__(self) -> str:
        return f"{self.span}: {self.message}" if self.span else self.message


# Expression types: "int", "bool", "none", "list"; optional ints are "opt".
_DECL_TYPE = {"int": "int", "lock": "int", "optional int": "opt", "list int": "list"}


def _compatible(a: str, b: str) -> bool:
    if a == b:
        return True
    nums = {"int", "opt", "none"}
    return a in nums and b in nums


class _Typer:
    def __init__(self, program: Program, out: list[Diagnostic], span: Optional[Span]):
        self.program = program
        self.out = out
        self.span = span

    def err(self, e: Expr, msg: str):
        sp = getattr(e, "span", None)
        self.out.append(Diagnostic(sp if sp and sp.line else self.span, msg))

    def type(self, e: Expr) -> str:
        if isinstance(e, IntLit) or isinstance(e, Tid):
            return "int"
        if isinstance(e, BoolLit):
            return "bool"
        if isinstance(e, NoneLit):
            return "none"
        if isinstance(e, NilLit):
            return "list"
        if isinstance(e, Var):
            d = self.program.var(e.name)
            if d is None:
                self.err(e, f"undeclared variable {e.name!r}")
                return "any"
            return _DECL_TYPE[d.type]
        if isinstance(e, Unary):
            t = self.type(e.arg)
            want = "bool" if e.op == "!" else "int"
            self.expect(e.arg, t, want, f"operand of {e.op}")
            return want
        if isinstance(e, Call1):
            t = self.type(e.arg)
            if e.fn == "even":
                self.expect(e.arg, t, "int", "argument of even")
                return "bool"
            self.expect(e.arg, t, "list", f"argument of {e.fn}")
            return "int" if e.fn == "head" else "list"
        if isinstance(e, Binary):
            a, b = self.type(e.left), self.type(e.right)
            if e.op in ("&&", "||", "==>"):
                self.expect(e.left, a, "bool", f"operand of {e.op}")
                self.expect(e.right, b, "bool", f"operand of {e.op}")
                return "bool"
            if e.op in ("==", "!="):
                if "any" not in (a, b) and not _compatible(a, b):
                    self.err(e, f"cannot compare {a} with {b}")
                return "bool"
            if e.op in ("<", "<=", ">", ">="):
                self.expect(e.left, a, "int", f"operand of {e.op}")
                self.expect(e.right, b, "int", f"operand of {e.op}")
                return "bool"
            if e.op == "::":
                self.expect(e.left, a, "int", "head of ::")
                self.expect(e.right, b, "list", "tail of ::")
                return "list"
            self.expect(e.left, a, "int", f"operand of {e.op}")
            self.expect(e.right, b, "int", f"operand of {e.op}")
            return "int"
        self.err(e, f"unknown expression {e!r}")
        return "any"

    def expect(self, e: Expr, got: str, want: str, what: str):
        if got == "any":
            return
        ok = got == want or (want == "int" and got == "opt")
        if not ok:
            self.err(e, f"{what} must be {want}, found {got}")


def _is_constant(e: Expr) -> bool:
    return not var_names(e)


def well_formed(p: Program) -> list[Diagnostic]:
    """All violations of the static rules; an empty list means well-formed."""
    out: list[Diagnostic] = []

    def typed(e: Expr, span, want: Optional[str], two_store: bool, what: str):
        t = _Typer(p, out, span).type(e)
        if want and t != "any" and not (t == want or _compatible(t, want) and want != "bool"):
            out.append(Diagnostic(span, f"{what} must be {want}, found {t}"))
        if not two_store and uses_old(e):
            out.append(Diagnostic(span, f"old() is not allowed in {what} (a one-store predicate)"))
        return t

    if not 2 <= p.bits <= 8:
        out.append(Diagnostic(None, f"bits must be in 2..8, got {p.bits}"))
    if not 1 <= p.listdepth <= 4:
        out.append(Diagnostic(None, f"listdepth must be in 1..4, got {p.listdepth}"))

    seen: dict[str, Span] = {}
    for v in p.vars:
        if v.name in seen:
            out.append(Diagnostic(v.span, f"duplicate declaration of {v.name!r}"))
        seen[v.name] = v.span
        for c in v.clauses:
            typed(c.cond, c.span, "bool", True, f"mover clause of {v.name}")
    fn_names: set[str] = set()
    for f in p.fns:
        if f.name in fn_names or f.name in seen:
            out.append(Diagnostic(f.span, f"duplicate declaration of {f.name!r}"))
        fn_names.add(f.name)
        if isinstance(f.spec, AtomicSpec):
            typed(f.spec.requires, f.span, "bool", False, f"requires of {f.name}")
            typed(f.spec.ensures, f.span, "bool", True, f"ensures of {f.name}")
        else:
            typed(f.spec.relies, f.span, "bool", True, f"relies of {f.name}")
            typed(f.spec.guarantees, f.span, "bool", True, f"guarantees of {f.name}")
            typed(f.spec.requires, f.span, "bool", False, f"requires of {f.name}")
            typed(f.spec.ensures, f.span, "bool", False, f"ensures of {f.name}")
    typed(p.relies, None, "bool", True, "program relies")
    typed(p.guarantees, None, "bool", True, "program guarantees")

    for name, e in p.init:
        if p.var(name) is None:
            out.append(Diagnostic(None, f"init assigns undeclared variable {name!r}"))
        elif not _is_constant(e):
            out.append(Diagnostic(None, f"init value of {name!r} must be a constant"))
        else:
            typed(e, None, _DECL_TYPE[p.var(name).type], False, f"init value of {name}")

    def globals_in(e: Expr) -> list[str]:
        return sorted(n for n in var_names(e) if p.is_global(n))

    for where, body in p.bodies():
        for s in walk(body):
            sp = s.span
            if isinstance(s, Assign):
                d = p.var(s.target)
                if d is None:
                    out.append(Diagnostic(sp, f"assignment to undeclared variable {s.target!r}"))
                    continue
                typed(s.expr, sp, _DECL_TYPE[d.type], False, f"value assigned to {s.target}")
                g = globals_in(s.expr)
                if (not d.local and g) or len(g) > 1:
                    out.append(Diagnostic(sp, "multi-global action: an action may touch at most one global"))
            elif isinstance(s, UnstableRead):
                dt, ds = p.var(s.target), p.var(s.source)
                if dt is None or ds is None:
                    missing = s.target if dt is None else s.source
                    out.append(Diagnostic(sp, f"undeclared variable {missing!r}"))
                    continue
                if not dt.local:
                    out.append(Diagnostic(sp, "the target of an unstable read must be thread-local"))
                if ds.local:
                    out.append(Diagnostic(sp, "the source of an unstable read must be global"))
                if dt.type != ds.type:
                    out.append(Diagnostic(sp, f"unstable read from {ds.type} into {dt.type}"))
            elif isinstance(s, (Acquire, Release)):
                d = p.var(s.lock)
                if d is None:
                    out.append(Diagnostic(sp, f"undeclared lock {s.lock!r}"))
                elif d.type != "lock" or d.local:
                    out.append(Diagnostic(sp, f"{s.lock!r} is not a global lock"))
            elif isinstance(s, (If, While)):
                c = s.cond
                if isinstance(c, Test):
                    typed(c.formula, sp, "bool", False, "condition")
                    if len(globals_in(c.formula)) > 1:
                        out.append(Diagnostic(sp, "multi-global action: a condition may read at most one global"))
                elif isinstance(c, Cas):
                    d = p.var(c.var)
                    if d is None:
                        out.append(Diagnostic(sp, f"undeclared variable {c.var!r}"))
                        continue
                    if d.local:
                        out.append(Diagnostic(sp, "cas needs a global variable"))
                    for e in (c.expected, c.new):
                        typed(e, sp, _DECL_TYPE[d.type], False, f"cas operand for {c.var}")
                        if globals_in(e):
                            out.append(Diagnostic(sp, "multi-global action: cas operands may read only locals"))
                if isinstance(s, While) and s.invariant is not None:
                    typed(s.invariant, sp, "bool", True, "loop invariant")
            elif isinstance(s, CallStmt):
                if p.fn(s.name) is None:
                    out.append(Diagnostic(sp, f"call to undeclared function {s.name!r}"))
    return out

"""Concrete syntax for ``.mvl`` files: lexer, recursive-descent parser, printer."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .effects import KEYWORD_OF, KEYWORDS, N
from .syntax import (
    Acquire,
    AtomicSpec,
    Assign,
    Binary,
    Block,
    BoolLit,
    Call1,
    CallStmt,
    Cas,
    Expr,
    FnDecl,
    If,
    IntLit,
    MoverClause,
    NilLit,
    NonAtomicSpec,
    NoneLit,
    Program,
    Release,
    Skip,
    Span,
    Stmt,
    Test,
    Tid,
    TRUE,
    Unary,
    UnstableRead,
    Var,
    VarDecl,
    While,
    Wrong,
    Yield,
    make_assert,
)


class ParseError(Exception):
    def __init__(self, message: str, span: Span):
        super().__init__(f"{span}: {message}")
        self.message = message
        self.span = span


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "ident", "mover", "op", "eof"
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<line_comment>//[^\n]*)
  | (?P<block_comment>/\*.*?\*/)
  | (?P<mover>(?:both|right|left|non)-mover\b)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>==>|==|!=|<=|>=|&&|\|\||::|~=|[<>+\-*!=(){};,])
    """,
    re.VERBOSE | re.DOTALL,
)


def tokenize(text: str, file: str = "<input>") -> list[Token]:
    tokens = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", Span(file, line, col, line, col))
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "line_comment", "block_comment"):
            tokens.append(Token(kind, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


TYPE_WORDS = ("int", "lock", "optional", "list")
BUILTINS = ("head", "tail", "even")
CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")
RESERVED = {
    "bits", "listdepth", "int", "lock", "optional", "list", "local", "read", "write", "if",
    "else", "while", "invariant", "atomic", "requires", "ensures", "relies", "guarantees",
    "init", "thread", "skip", "wrong", "yield", "acquire", "release", "assert", "cas",
    "true", "false", "None", "Nil", "tid", "old", "head", "tail", "even",
}


class Parser:
    def __init__(self, text: str, file: str = "<input>"):
        self.file = file
        self.toks = tokenize(text, file)
        self.i = 0

    # -- token helpers -----------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, *texts: str) -> bool:
        return self.tok.kind in ("op", "ident") and self.tok.text in texts

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    def ident(self) -> Token:
        t = self.tok
        if t.kind != "ident" or t.text in RESERVED:
            self.error(f"expected identifier, found {t.text or 'end of input'!r}")
        return self.advance()

    def error(self, message: str, tok: Optional[Token] = None):
        t = tok or self.tok
        raise ParseError(message, Span(self.file, t.line, t.col, t.line, t.col + len(t.text)))

    def span_from(self, start: Token) -> Span:
        last = self.toks[max(self.i - 1, 0)]
        return Span(self.file, start.line, start.col, last.line, last.col + len(last.text))

    # -- program -----------------------------------------------------------

    def program(self) -> Program:
        if self.tok.kind == "eof":
            self.error("empty program")
        bits, depth = 5, 3
        if self.at("bits"):
            self.advance()
            bits = int(self.expect_int().text)
            self.expect(";")
        if self.at("listdepth"):
            self.advance()
            depth = int(self.expect_int().text)
            self.expect(";")
        vars_, fns = [], []
        while not self.at("init"):
            if self.tok.kind == "eof":
                self.error("expected 'init' block")
            if self.at("local", *TYPE_WORDS):
                vars_.append(self.vardecl())
            elif self.at("atomic", "relies"):
                fns.append(self.fndecl())
            else:
                self.error(f"unknown declaration keyword {self.tok.text!r}")
        self.expect("init")
        self.expect("{")
        init = []
        while not self.at("}"):
            name = self.ident().text
            self.expect("=")
            init.append((name, self.expr()))
            self.expect(";")
        self.expect("}")
        relies = guarantees = TRUE
        if self.at("relies"):
            self.advance()
            relies = self.expr()
            self.expect(";")
        if self.at("guarantees"):
            self.advance()
            guarantees = self.expr()
            self.expect(";")
        threads = []
        while self.at("thread"):
            self.advance()
            threads.append(self.block())
        if not threads:
            self.error("expected at least one 'thread' block")
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r} after threads")
        return Program(
            vars=tuple(vars_),
            fns=tuple(fns),
            init=tuple(init),
            threads=tuple(threads),
            relies=relies,
            guarantees=guarantees,
            bits=bits,
            listdepth=depth,
            name=self.file,
        )

    def expect_int(self) -> Token:
        if self.tok.kind != "int":
            self.error("expected integer literal")
        return self.advance()

    def type_name(self) -> str:
        t = self.tok
        if self.at("int", "lock"):
            return self.advance().text
        if self.at("optional", "list"):
            word = self.advance().text
            self.expect("int")
            return f"{word} int"
        self.error(f"expected a type, found {t.text!r}")

    def vardecl(self) -> VarDecl:
        start = self.tok
        local = False
        if self.at("local"):
            self.advance()
            local = True
        typ = self.type_name()
        name = self.ident().text
        clauses = []
        while not self.at(";"):
            if local:
                self.error("thread-local variables take no mover clauses")
            clauses.extend(self.clause())
        self.expect(";")
        return VarDecl(name, typ, local, tuple(clauses), self.span_from(start))

    def clause(self) -> list[MoverClause]:
        start = self.tok
        kinds = ("read", "write")
        if self.at("read", "write"):
            kinds = (self.advance().text,)
        if self.tok.kind != "mover":
            self.error(f"malformed mover clause: expected a mover keyword, found {self.tok.text!r}")
        effect = KEYWORDS[self.advance().text]
        cond: Expr = TRUE
        if self.at("if"):
            self.advance()
            cond = self.expr()
        span = self.span_from(start)
        return [MoverClause(k, effect, cond, span) for k in kinds]

    def fndecl(self) -> FnDecl:
        start = self.tok
        if self.at("atomic"):
            self.advance()
            effect, explicit = N, False
            if self.tok.kind == "mover":
                effect, explicit = KEYWORDS[self.advance().text], True
            self.expect("requires")
            req = self.expr()
            self.expect("ensures")
            ens = self.expr()
            spec = AtomicSpec(effect, req, ens, explicit)
        else:
            self.expect("relies")
            rel = self.expr()
            self.expect("guarantees")
            gua = self.expr()
            self.expect("requires")
            req = self.expr()
            self.expect("ensures")
            ens = self.expr()
            spec = NonAtomicSpec(rel, gua, req, ens)
        name = self.ident().text
        self.expect("(")
        self.expect(")")
        body = self.block()
        return FnDecl(name, spec, body, self.span_from(start))

    # -- statements --------------------------------------------------------

    def block(self) -> Block:
        start = self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("unterminated block", start)
            stmts.append(self.stmt())
        self.expect("}")
        return Block(tuple(stmts), self.span_from(start))

    def stmt(self) -> Stmt:
        start = self.tok
        if self.at("skip", "wrong", "yield"):
            word = self.advance().text
            self.expect(";")
            cls = {"skip": Skip, "wrong": Wrong, "yield": Yield}[word]
            return cls(self.span_from(start))
        if self.at("acquire", "release"):
            word = self.advance().text
            self.expect("(")
            lock = self.ident().text
            self.expect(")")
            self.expect(";")
            cls = Acquire if word == "acquire" else Release
            return cls(lock, self.span_from(start))
        if self.at("assert"):
            self.advance()
            f = self.expr()
            self.expect(";")
            return make_assert(f, self.span_from(start))
        if self.at("if"):
            self.advance()
            self.expect("(")
            cond = self.cond()
            self.expect(")")
            then = self.block()
            orelse: Stmt = Skip(self.span_from(start))
            if self.at("else"):
                self.advance()
                orelse = self.block()
            return If(cond, then, orelse, False, self.span_from(start))
        if self.at("while"):
            self.advance()
            self.expect("(")
            cond = self.cond()
            self.expect(")")
            inv = None
            if self.at("invariant"):
                self.advance()
                inv = self.expr()
            body = self.block()
            return While(cond, body, inv, self.span_from(start))
        if self.tok.kind == "ident" and self.tok.text not in RESERVED:
            name = self.advance().text
            if self.at("("):
                self.advance()
                self.expect(")")
                self.expect(";")
                return CallStmt(name, self.span_from(start))
            if self.at("~="):
                self.advance()
                src = self.ident().text
                self.expect(";")
                return UnstableRead(name, src, self.span_from(start))
            self.expect("=")
            e = self.expr()
            self.expect(";")
            return Assign(name, e, self.span_from(start))
        self.error(f"unknown statement keyword {self.tok.text!r}")

    def cond(self):
        start = self.tok
        negated = False
        if self.at("!") and self.peek().text == "cas":
            self.advance()
            negated = True
        if self.at("cas"):
            self.advance()
            self.expect("(")
            var = self.ident().text
            self.expect(",")
            expected = self.expr()
            self.expect(",")
            new = self.expr()
            self.expect(")")
            return Cas(var, expected, new, negated, self.span_from(start))
        f = self.expr()
        return Test(f, self.span_from(start))

    # -- expressions -------------------------------------------------------

    def expr(self) -> Expr:
        start = self.tok
        left = self.disj()
        if self.at("==>"):
            self.advance()
            right = self.expr()
            return Binary("==>", left, right, self.span_from(start))
        return left

    def disj(self) -> Expr:
        start = self.tok
        e = self.conj()
        while self.at("||"):
            self.advance()
            e = Binary("||", e, self.conj(), self.span_from(start))
        return e

    def conj(self) -> Expr:
        start = self.tok
        e = self.negation()
        while self.at("&&"):
            self.advance()
            e = Binary("&&", e, self.negation(), self.span_from(start))
        return e

    def negation(self) -> Expr:
        start = self.tok
        if self.at("!"):
            self.advance()
            return Unary("!", self.negation(), self.span_from(start))
        return self.comparison()

    def comparison(self) -> Expr:
        start = self.tok
        e = self.cons()
        if self.at(*CMP_OPS):
            op = self.advance().text
            e = Binary(op, e, self.cons(), self.span_from(start))
            if self.at(*CMP_OPS):
                self.error("comparison operators do not chain")
        return e

    def cons(self) -> Expr:
        start = self.tok
        e = self.additive()
        if self.at("::"):
            self.advance()
            return Binary("::", e, self.cons(), self.span_from(start))
        return e

    def additive(self) -> Expr:
        start = self.tok
        e = self.term()
        while self.at("+", "-"):
            op = self.advance().text
            e = Binary(op, e, self.term(), self.span_from(start))
        return e

    def term(self) -> Expr:
        start = self.tok
        e = self.unary()
        while self.at("*"):
            self.advance()
            e = Binary("*", e, self.unary(), self.span_from(start))
        return e

    def unary(self) -> Expr:
        start = self.tok
        if self.at("-"):
            self.advance()
            return Unary("-", self.unary(), self.span_from(start))
        return self.atom()

    def atom(self) -> Expr:
        start = self.tok
        t = self.tok
        if t.kind == "int":
            self.advance()
            return IntLit(int(t.text), self.span_from(start))
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if self.at("true", "false"):
            self.advance()
            return BoolLit(t.text == "true", self.span_from(start))
        if self.at("None"):
            self.advance()
            return NoneLit(self.span_from(start))
        if self.at("Nil"):
            self.advance()
            return NilLit(self.span_from(start))
        if self.at("tid"):
            self.advance()
            return Tid(self.span_from(start))
        if self.at("old"):
            self.advance()
            self.expect("(")
            name = self.ident().text
            self.expect(")")
            return Var(name, True, self.span_from(start))
        if self.at(*BUILTINS):
            fn = self.advance().text
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Call1(fn, arg, self.span_from(start))
        if t.kind == "ident" and t.text not in RESERVED:
            self.advance()
            return Var(t.text, False, self.span_from(start))
        self.error(f"expected an expression, found {t.text or 'end of input'!r}")


def parse(text: str, file: str = "<input>") -> Program:
    """Parse ``.mvl`` source text into a :class:`Program`.

    Raises :class:`ParseError` with a source position on malformed input.
    """
    return Parser(text, file).program()


def parse_expr(text: str) -> Expr:
    p = Parser(text)
    e = p.expr()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r}")
    return e


def parse_file(path) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), str(path))


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

_PREC = {"==>": 1, "||": 2, "&&": 3, "::": 6, "+": 7, "-": 7, "*": 8}
for _op in CMP_OPS:
    _PREC[_op] = 5
_RIGHT_ASSOC = {"==>", "::"}


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary):
        return 4 if e.op == "!" else 9
    return 10


def print_expr(e: Expr) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, NoneLit):
        return "None"
    if isinstance(e, NilLit):
        return "Nil"
    if isinstance(e, Tid):
        return "tid"
    if isinstance(e, Var):
        return f"old({e.name})" if e.old else e.name
    if isinstance(e, Call1):
        return f"{e.fn}({print_expr(e.arg)})"
    if isinstance(e, Unary):
        inner = print_expr(e.arg)
        need = 4 if e.op == "!" else 9
        if _prec(e.arg) < need:
            inner = f"({inner})"
        return f"{e.op}{inner}"
    if isinstance(e, Binary):
        p = _PREC[e.op]
        left, right = print_expr(e.left), print_expr(e.right)
        lp, rp = _prec(e.left), _prec(e.right)
        if e.op in _RIGHT_ASSOC:
            lneed, rneed = lp <= p, rp < p
        elif p == 5:
            lneed, rneed = lp <= p, rp <= p
        else:
            lneed, rneed = lp < p, rp <= p
        if lneed:
            left = f"({left})"
        if rneed:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression: {e!r}")


def print_cond(c) -> str:
    if isinstance(c, Test):
        return print_expr(c.formula)
    bang = "!" if c.negated else ""
    return f"{bang}cas({c.var}, {print_expr(c.expected)}, {print_expr(c.new)})"


def _print_block(b: Stmt, indent: int) -> list[str]:
    pad = "    " * indent
    stmts = b.stmts if isinstance(b, Block) else (b,)
    lines = ["{"]
    for s in stmts:
        lines.extend(print_stmt(s, indent + 1))
    lines.append(pad + "}")
    return lines


def _attach(head: str, block_lines: list[str]) -> list[str]:
    return [head + block_lines[0]] + block_lines[1:]


def print_stmt(s: Stmt, indent: int = 0) -> list[str]:
    pad = "    " * indent
    if isinstance(s, Skip):
        return [pad + "skip;"]
    if isinstance(s, Wrong):
        return [pad + "wrong;"]
    if isinstance(s, Yield):
        return [pad + "yield;"]
    if isinstance(s, Assign):
        return [f"{pad}{s.target} = {print_expr(s.expr)};"]
    if isinstance(s, UnstableRead):
        return [f"{pad}{s.target} ~= {s.source};"]
    if isinstance(s, Acquire):
        return [f"{pad}acquire({s.lock});"]
    if isinstance(s, Release):
        return [f"{pad}release({s.lock});"]
    if isinstance(s, CallStmt):
        return [f"{pad}{s.name}();"]
    if isinstance(s, Block):
        return [ln for c in s.stmts for ln in print_stmt(c, indent)]
    if isinstance(s, If):
        if s.is_assert:
            return [f"{pad}assert {print_expr(s.cond.formula)};"]
        lines = _attach(f"{pad}if ({print_cond(s.cond)}) ", _print_block(s.then, indent))
        lines[-1] += " else " + _print_block(s.orelse, indent)[0]
        lines.extend(_print_block(s.orelse, indent)[1:])
        return lines
    if isinstance(s, While):
        head = f"{pad}while ({print_cond(s.cond)}) "
        if s.invariant is not None:
            head += f"invariant {print_expr(s.invariant)} "
        return _attach(head, _print_block(s.body, indent))
    raise TypeError(f"not a statement: {s!r}")


def print_clause(c: MoverClause) -> str:
    return f"{c.kind} {KEYWORD_OF[c.effect]} if {print_expr(c.cond)}"


def print_program(p: Program) -> str:
    out = [f"bits {p.bits};", f"listdepth {p.listdepth};", ""]
    for v in p.vars:
        prefix = "local " if v.local else ""
        if not v.clauses:
            out.append(f"{prefix}{v.type} {v.name};")
            continue
        out.append(f"{prefix}{v.type} {v.name}")
        for i, c in enumerate(v.clauses):
            end = ";" if i == len(v.clauses) - 1 else ""
            out.append(f"    {print_clause(c)}{end}")
    for f in p.fns:
        out.append("")
        spec = f.spec
        if isinstance(spec, AtomicSpec):
            mover = f" {KEYWORD_OF[spec.effect]}" if spec.explicit_effect else ""
            out.append(f"atomic{mover}")
        else:
            out.append(f"relies {print_expr(spec.relies)}")
            out.append(f"guarantees {print_expr(spec.guarantees)}")
        out.append(f"requires {print_expr(spec.requires)}")
        out.append(f"ensures {print_expr(spec.ensures)}")
        out.extend(_attach(f"{f.name}() ", _print_block(f.body, 0)))
    out.append("")
    out.append("init {")
    for name, e in p.init:
        out.append(f"    {name} = {print_expr(e)};")
    out.append("}")
    out.append(f"relies {print_expr(p.relies)};")
    out.append(f"guarantees {print_expr(p.guarantees)};")
    for t in p.threads:
        out.append("")
        out.extend(_attach("thread ", _print_block(t, 0)))
    return "\n".join(out) + "\n"


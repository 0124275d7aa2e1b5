"""Text syntax for STL formulas.

Grammar, loosest binding first::

    formula := disj ('U' interval? formula)?        # right associative
    disj    := conj ('|' conj)*
    conj    := unary ('&' unary)*
    unary   := '!' unary | ('F' | 'G') interval? unary | atom
    atom    := 'true' | pred | '(' formula ')'
    pred    := IDENT ('>' | '<') NUMBER                # parentheses optional
    interval:= '[' NUMBER ',' (NUMBER | 'inf') ']'

``print_formula`` emits a canonical, fully parenthesized form that parses
back to an identical tree.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .ast import (
    UNBOUNDED,
    Always,
    And,
    Eventually,
    Formula,
    Interval,
    Not,
    Or,
    Predicate,
    Top,
    Until,
)

KEYWORDS = {"true", "F", "G", "U", "inf"}


class STLSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int, expected: str | None = None):
        self.line = line
        self.column = column
        self.expected = expected
        self.reason = message
        super().__init__(f"line {line}, column {column}: {message}")


@dataclass
class Token:
    kind: str
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<number>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[()\[\],<>!&|])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise STLSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind == "ws":
            for i, ch in enumerate(chunk):
                if ch == "\n":
                    line += 1
                    line_start = pos + i + 1
        else:
            tokens.append(Token(kind if kind != "punct" else chunk, chunk, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, len(text) - line_start + 1))
    return tokens


def _describe(tok: Token) -> str:
    return "end of input" if tok.kind == "eof" else repr(tok.text)


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, expected: str, tok: Token | None = None):
        tok = tok or self.tok
        raise STLSyntaxError(f"expected {expected}, found {_describe(tok)}", tok.line, tok.column, expected)

    def expect(self, kind: str, expected: str | None = None) -> Token:
        if self.tok.kind != kind:
            self.fail(expected or repr(kind))
        return self.advance()

    def is_kw(self, word: str, tok: Token | None = None) -> bool:
        tok = tok or self.tok
        return tok.kind == "ident" and tok.text == word

    def parse(self) -> Formula:
        f = self.formula()
        if self.tok.kind != "eof":
            self.fail("binary operator or end of input")
        return f

    def formula(self) -> Formula:
        left = self.disj()
        if self.is_kw("U"):
            self.advance()
            interval = self.interval_opt()
            right = self.formula()
            return Until(left, right, interval)
        return left

    def disj(self) -> Formula:
        f = self.conj()
        while self.tok.kind == "|":
            self.advance()
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.unary()
        while self.tok.kind == "&":
            self.advance()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        tok = self.tok
        if tok.kind == "!":
            self.advance()
            return Not(self.unary())
        if self.is_kw("F") or self.is_kw("G"):
            self.advance()
            interval = self.interval_opt()
            arg = self.unary()
            return Eventually(arg, interval) if tok.text == "F" else Always(arg, interval)
        return self.atom()

    def atom(self) -> Formula:
        tok = self.tok
        if self.is_kw("true"):
            self.advance()
            return Top()
        if tok.kind == "(":
            self.advance()
            f = self.formula()
            self.expect(")", "')'")
            return f
        if tok.kind == "ident" and tok.text not in KEYWORDS:
            if self.peek().kind in (">", "<"):
                return self.predicate()
            raise STLSyntaxError(f"unknown operator {tok.text!r}", tok.line, tok.column, "formula")
        self.fail("formula")

    def predicate(self) -> Predicate:
        name = self.advance().text
        op = self.advance().text
        num_tok = self.tok
        value = self.number("threshold")
        if not math.isfinite(value):
            raise STLSyntaxError("predicate threshold must be finite", num_tok.line, num_tok.column, "number")
        return Predicate(name, op, value)

    def number(self, what: str, allow_inf: bool = False) -> float:
        tok = self.tok
        if tok.kind == "number":
            self.advance()
            return float(tok.text)
        if allow_inf and self.is_kw("inf"):
            self.advance()
            return math.inf
        self.fail(f"{what} (number)")

    def interval_opt(self) -> Interval:
        if self.tok.kind != "[":
            return UNBOUNDED
        open_tok = self.advance()
        lo = self.number("interval lower bound")
        self.expect(",", "','")
        hi = self.number("interval upper bound", allow_inf=True)
        self.expect("]", "']'")
        try:
            return Interval(lo, hi)
        except ValueError:
            raise STLSyntaxError(
                f"invalid interval [{lo}, {hi}]; need 0 <= lower <= upper",
                open_tok.line,
                open_tok.column,
                "interval",
            ) from None


def parse_formula(text: str) -> Formula:
    return _Parser(text).parse()


def _num(x: float) -> str:
    if math.isinf(x):
        return "inf"
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _interval(iv: Interval) -> str:
    if iv == UNBOUNDED:
        return ""
    return f"[{_num(iv.lower)},{_num(iv.upper)}]"


def print_formula(f: Formula) -> str:
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Predicate):
        return f"({f.signal} {f.op} {_num(f.threshold)})"
    if isinstance(f, Not):
        return f"! {print_formula(f.arg)}"
    if isinstance(f, And):
        return f"({print_formula(f.left)} & {print_formula(f.right)})"
    if isinstance(f, Or):
        return f"({print_formula(f.left)} | {print_formula(f.right)})"
    if isinstance(f, Eventually):
        return f"F{_interval(f.interval)} {print_formula(f.arg)}"
    if isinstance(f, Always):
        return f"G{_interval(f.interval)} {print_formula(f.arg)}"
    if isinstance(f, Until):
        return f"({print_formula(f.left)} U{_interval(f.interval)} {print_formula(f.right)})"
    raise TypeError(f"not a formula: {f!r}")

"""Text format for simple reward machines.

One declaration per line, ``#`` starts a comment::

    props: c o d
    state: u0 init
    state: u1
    state: done terminal
    state: fail terminal bad
    edge: u0 -> u1 if "c & !d" reward 0
    edge: u0 -> fail if "d" reward 0
    edge: u0 -> u0 otherwise reward 0

Guards use ``!`` > ``&`` > ``|`` (binary operators associate left), parentheses,
and the constants ``true``/``false``. Rewards are integer or decimal literals;
scientific notation is rejected.
"""

from __future__ import annotations

import math
import re
from collections.abc import Collection
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import RmError
from .formula import OTHERWISE, And, Atom, Const, Formula, Guard, Not, Or
from .machine import Edge, InvalidMachine, RmState, SimpleRewardMachine, validate


class ParseErrorKind(str, Enum):
    LEX = "Lex"
    SYNTAX = "Syntax"
    UNKNOWN_NAME = "UnknownName"
    DUPLICATE = "Duplicate"
    STRUCTURE = "Structure"


class ParseError(RmError):
    """Malformed machine or formula text; line and column are 1-based."""

    def __init__(self, line: int, column: int, kind: ParseErrorKind, message: str) -> None:
        super().__init__(f"{line}:{column}: {kind.value}: {message}")
        self.line = line
        self.column = column
        self.kind = kind
        self.message = message


_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*")
_NUMBER = re.compile(r"-?[0-9]+(?:\.[0-9]+)?")
_RESERVED = frozenset({"props", "state", "edge", "if", "otherwise", "reward", "init", "terminal", "bad", "true", "false"})


@dataclass(frozen=True, slots=True)
class _Token:
    kind: str
    text: str
    column: int


# ── Formulas ──────────────────────────────────────────────────

_OPERATORS = {"!": "NOT", "&": "AND", "|": "OR", "(": "LPAREN", ")": "RPAREN"}


def _lex_formula(text: str, line: int, col0: int) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in " \t":
            i += 1
        elif ch in _OPERATORS:
            tokens.append(_Token(_OPERATORS[ch], ch, col0 + i))
            i += 1
        else:
            m = _IDENT.match(text, i)
            if m is None:
                raise ParseError(line, col0 + i, ParseErrorKind.LEX, f"unexpected character {ch!r}")
            tokens.append(_Token("IDENT", m.group(), col0 + i))
            i = m.end()
    tokens.append(_Token("END", "", col0 + len(text)))
    return tokens


class _FormulaParser:
    def __init__(self, tokens: list[_Token], line: int, props: Collection[str] | None) -> None:
        self._tokens = tokens
        self._pos = 0
        self._line = line
        self._props = props

    def _peek(self) -> _Token:
        return self._tokens[self._pos]

    def _next(self) -> _Token:
        tok = self._tokens[self._pos]
        self._pos += 1
        return tok

    def _error(self, tok: _Token, message: str) -> ParseError:
        return ParseError(self._line, tok.column, ParseErrorKind.SYNTAX, message)

    def parse(self) -> Formula:
        if self._peek().kind == "END":
            raise self._error(self._peek(), "empty formula")
        f = self._disj()
        tok = self._peek()
        if tok.kind != "END":
            raise self._error(tok, f"unexpected {tok.text!r}")
        return f

    def _disj(self) -> Formula:
        left = self._conj()
        while self._peek().kind == "OR":
            self._next()
            left = Or(left, self._conj())
        return left

    def _conj(self) -> Formula:
        left = self._unary()
        while self._peek().kind == "AND":
            self._next()
            left = And(left, self._unary())
        return left

    def _unary(self) -> Formula:
        if self._peek().kind == "NOT":
            self._next()
            return Not(self._unary())
        return self._atom()

    def _atom(self) -> Formula:
        tok = self._peek()
        if tok.kind == "END":
            # report at the operator left dangling
            prev = self._tokens[self._pos - 1]
            raise self._error(prev, f"expected operand after {prev.text!r}")
        self._next()
        if tok.kind == "IDENT":
            if tok.text == "true":
                return Const(True)
            if tok.text == "false":
                return Const(False)
            if self._props is not None and tok.text not in self._props:
                raise ParseError(
                    self._line, tok.column, ParseErrorKind.UNKNOWN_NAME,
                    f"proposition {tok.text!r} is not declared",
                )
            return Atom(tok.text)
        if tok.kind == "LPAREN":
            inner = self._disj()
            close = self._peek()
            if close.kind != "RPAREN":
                raise self._error(close if close.kind != "END" else tok, "unbalanced '('")
            self._next()
            return inner
        raise self._error(tok, f"unexpected {tok.text!r}")


def parse_formula(
    text: str,
    props: Collection[str] | None = None,
    *,
    line: int = 1,
    column: int = 1,
) -> Formula:
    """Parse a propositional guard. line/column locate text inside a larger file."""
    tokens = _lex_formula(text, line, column)
    try:
        return _FormulaParser(tokens, line, props).parse()
    except RecursionError:
        raise ParseError(line, column, ParseErrorKind.SYNTAX, "formula nested too deeply") from None


# ── Machine files ─────────────────────────────────────────────


def _lex_line(text: str, line: int) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    while i < len(text):
        ch = text[i]
        col = i + 1
        if ch in " \t\r":
            i += 1
        elif ch == "#":
            break
        elif ch == ":":
            tokens.append(_Token("COLON", ch, col))
            i += 1
        elif text.startswith("->", i):
            tokens.append(_Token("ARROW", "->", col))
            i += 2
        elif ch == '"':
            end = text.find('"', i + 1)
            if end == -1:
                raise ParseError(line, col, ParseErrorKind.LEX, "unterminated string")
            tokens.append(_Token("STRING", text[i + 1:end], col))
            i = end + 1
        elif ch == "-" or ch.isdigit():
            m = _NUMBER.match(text, i)
            if m is None:
                raise ParseError(line, col, ParseErrorKind.LEX, f"unexpected character {ch!r}")
            follow = text[m.end():m.end() + 1]
            if follow and (follow.isalnum() or follow in "._"):
                raise ParseError(line, col, ParseErrorKind.LEX, f"malformed number {text[i:m.end() + 1]!r}")
            tokens.append(_Token("NUMBER", m.group(), col))
            i = m.end()
        else:
            m = _IDENT.match(text, i)
            if m is None:
                raise ParseError(line, col, ParseErrorKind.LEX, f"unexpected character {ch!r}")
            tokens.append(_Token("IDENT", m.group(), col))
            i = m.end()
    tokens.append(_Token("END", "", len(text) + 1))
    return tokens


@dataclass
class _PendingState:
    name: str
    initial: bool
    terminal: bool
    bad: bool
    line: int


@dataclass
class _PendingEdge:
    source: str
    target: str
    guard: Guard
    reward: float


class _LineCursor:
    def __init__(self, tokens: list[_Token], line: int) -> None:
        self.tokens = tokens
        self.pos = 0
        self.line = line

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def take(self, kind: str, what: str) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != kind:
            found = repr(tok.text) if tok.text else "end of line"
            raise ParseError(self.line, tok.column, ParseErrorKind.SYNTAX, f"expected {what}, found {found}")
        self.pos += 1
        return tok

    def keyword(self, word: str) -> _Token:
        tok = self.peek()
        if tok.kind != "IDENT" or tok.text != word:
            found = repr(tok.text) if tok.text else "end of line"
            raise ParseError(self.line, tok.column, ParseErrorKind.SYNTAX, f"expected {word!r}, found {found}")
        self.pos += 1
        return tok

    def name(self, what: str) -> _Token:
        tok = self.take("IDENT", what)
        if tok.text in _RESERVED:
            raise ParseError(self.line, tok.column, ParseErrorKind.SYNTAX, f"{tok.text!r} is a reserved word")
        return tok

    def end(self) -> None:
        self.take("END", "end of line")


class _RmParser:
    def __init__(self) -> None:
        self.props: list[str] | None = None
        self.states: dict[str, _PendingState] = {}
        self.edges: list[_PendingEdge] = []

    def feed(self, text: str, line: int) -> None:
        tokens = _lex_line(text, line)
        cur = _LineCursor(tokens, line)
        head = cur.peek()
        if head.kind == "END":
            return
        if head.kind != "IDENT" or head.text not in ("props", "state", "edge"):
            raise ParseError(line, head.column, ParseErrorKind.SYNTAX, "expected 'props:', 'state:' or 'edge:'")
        cur.pos += 1
        cur.take("COLON", "':'")
        if head.text == "props":
            self._props(cur, head)
        elif head.text == "state":
            self._state(cur, head)
        else:
            self._edge(cur, head)

    def _props(self, cur: _LineCursor, head: _Token) -> None:
        if self.props is not None:
            raise ParseError(cur.line, head.column, ParseErrorKind.STRUCTURE, "props declared twice")
        if self.states:
            raise ParseError(cur.line, head.column, ParseErrorKind.STRUCTURE, "props must be declared before states")
        names: list[str] = []
        while cur.peek().kind != "END":
            tok = cur.name("proposition name")
            if tok.text in names:
                raise ParseError(cur.line, tok.column, ParseErrorKind.DUPLICATE, f"proposition {tok.text!r} declared twice")
            names.append(tok.text)
        self.props = names

    def _state(self, cur: _LineCursor, head: _Token) -> None:
        if self.props is None:
            raise ParseError(cur.line, head.column, ParseErrorKind.STRUCTURE, "states must follow the props declaration")
        if self.edges:
            raise ParseError(cur.line, head.column, ParseErrorKind.STRUCTURE, "states must be declared before edges")
        name = cur.name("state name")
        if name.text in self.states:
            raise ParseError(cur.line, name.column, ParseErrorKind.DUPLICATE, f"state {name.text!r} declared twice")
        flags: dict[str, _Token] = {}
        while cur.peek().kind != "END":
            tok = cur.take("IDENT", "state flag")
            if tok.text not in ("init", "terminal", "bad"):
                raise ParseError(cur.line, tok.column, ParseErrorKind.SYNTAX, f"unknown state flag {tok.text!r}")
            if tok.text in flags:
                raise ParseError(cur.line, tok.column, ParseErrorKind.DUPLICATE, f"flag {tok.text!r} repeated")
            flags[tok.text] = tok
        if "init" in flags:
            if "terminal" in flags:
                raise ParseError(cur.line, flags["init"].column, ParseErrorKind.STRUCTURE, "initial state cannot be terminal")
            if any(s.initial for s in self.states.values()):
                raise ParseError(cur.line, flags["init"].column, ParseErrorKind.STRUCTURE, "more than one init state")
        if "bad" in flags and "terminal" not in flags:
            raise ParseError(cur.line, flags["bad"].column, ParseErrorKind.STRUCTURE, "only terminal states can be bad")
        self.states[name.text] = _PendingState(
            name.text, "init" in flags, "terminal" in flags, "bad" in flags, cur.line
        )

    def _known_state(self, cur: _LineCursor, tok: _Token) -> str:
        if tok.text not in self.states:
            raise ParseError(cur.line, tok.column, ParseErrorKind.UNKNOWN_NAME, f"state {tok.text!r} is not declared")
        return tok.text

    def _edge(self, cur: _LineCursor, head: _Token) -> None:
        if not self.states:
            raise ParseError(cur.line, head.column, ParseErrorKind.STRUCTURE, "edges must follow the state declarations")
        source = self._known_state(cur, cur.take("IDENT", "source state"))
        cur.take("ARROW", "'->'")
        target = self._known_state(cur, cur.take("IDENT", "target state"))
        tok = cur.take("IDENT", "'if' or 'otherwise'")
        guard: Guard
        if tok.text == "otherwise":
            guard = OTHERWISE
        elif tok.text == "if":
            lit = cur.take("STRING", "quoted formula")
            guard = parse_formula(lit.text, self.props, line=cur.line, column=lit.column + 1)
        else:
            raise ParseError(cur.line, tok.column, ParseErrorKind.SYNTAX, f"expected 'if' or 'otherwise', found {tok.text!r}")
        cur.keyword("reward")
        lit = cur.take("NUMBER", "reward literal")
        reward = float(lit.text)
        if not math.isfinite(reward):
            raise ParseError(cur.line, lit.column, ParseErrorKind.LEX, f"reward literal out of range: {lit.text[:20]}...")
        cur.end()
        self.edges.append(_PendingEdge(source, target, guard, reward))

    def finish(self, last_line: int, name: str) -> SimpleRewardMachine:
        if self.props is None:
            raise ParseError(1, 1, ParseErrorKind.STRUCTURE, "missing props declaration")
        if not self.states:
            raise ParseError(last_line, 1, ParseErrorKind.STRUCTURE, "no states declared")
        initial = [s for s in self.states.values() if s.initial]
        if not initial:
            first = next(iter(self.states.values()))
            raise ParseError(first.line, 1, ParseErrorKind.STRUCTURE, "no init state")
        # interior states take the low indices, terminals follow, declaration order within each
        ordered = [s for s in self.states.values() if not s.terminal] + [s for s in self.states.values() if s.terminal]
        index = {s.name: i for i, s in enumerate(ordered)}
        states = [RmState(index[s.name], s.name, s.terminal, s.bad) for s in ordered]
        edges = [Edge(index[e.source], e.guard, index[e.target], e.reward) for e in self.edges]
        machine = SimpleRewardMachine(self.props, states, index[initial[0].name], edges, name=name)
        report = validate(machine)
        if not report.ok:
            raise InvalidMachine(report)
        return machine


def parse_rm(src: str, name: str = "") -> SimpleRewardMachine:
    """Parse and validate a machine from .rm text."""
    parser = _RmParser()
    lines = src.split("\n")
    for i, text in enumerate(lines, start=1):
        parser.feed(text, i)
    return parser.finish(len(lines), name)


def load_rm(path: str | Path) -> SimpleRewardMachine:
    path = Path(path)
    return parse_rm(path.read_text(encoding="utf-8"), name=path.stem)


def format_reward(value: float) -> str:
    """Shortest positional literal that reads back to the same float."""
    return np.format_float_positional(float(value), trim="-")


def serialize_rm(m: SimpleRewardMachine) -> str:
    """Canonical .rm text; parse_rm(serialize_rm(m)) steps identically to m."""
    lines = ["props: " + " ".join(m.props) if m.props else "props:"]
    for st in m.states:
        flags = []
        if st.index == m.initial:
            flags.append("init")
        if st.terminal:
            flags.append("terminal")
        if st.bad:
            flags.append("bad")
        lines.append(" ".join(["state:", st.name, *flags]))
    order = sorted(range(len(m.edges)), key=lambda i: (m.edges[i].source, i))
    for i in order:
        e = m.edges[i]
        src, dst = m.states[e.source].name, m.states[e.target].name
        cond = "otherwise" if e.guard is OTHERWISE else f'if "{e.guard}"'
        lines.append(f"edge: {src} -> {dst} {cond} reward {format_reward(e.reward)}")
    return "\n".join(lines) + "\n"

"""Concrete syntax for the logic.

Expressions (whitespace-insensitive), loosest binding first::

    e1 -> e2                      implication (right associative)
    e1 | e2,   e1 & e2            disjunction, conjunction
    e1 U[a,b] e2                  classic until
    e1 U[a,b]^d e2                sample until / time-point until (by operand type)
    Max t U[a,b]^d e              aggregate until (also Min, Forall, Exists)
    e1 Uavg[a,b] e2               average until
    t1 > t2  (<, >=, <=)          comparisons, desugared to ``t > 0``
    t1 + t2, t1 - t2, t1 * t2, t1 / t2, -t
    !e,  G[a,b] e,  F[a,b] e
    On[a,b] Max t  (Min, Forall, Exists)
    D[a]^d e                      lookup
    c | inf | true | false | time | name | f(t, ...) | ite(e, t1, t2) | (e)

A specification is a sequence of ``name := expression`` definitions
separated by newlines or ``;``.  Later definitions may reference earlier
names; identical subexpressions are shared.  ``#`` starts a comment.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from . import ast as A

KEYWORDS = {"true", "false", "time", "ite", "On", "Max", "Min", "Forall", "Exists",
            "G", "F", "U", "Uavg", "D", "inf"}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>:=|->|>=|<=|[-+*/()<>\[\],^&|!;=])
""", re.VERBOSE)


class STLSyntaxError(A.STLError, ValueError):
    def __init__(self, message: str, text: str = "", pos: int = 0):
        self.pos = pos
        self.line = text.count("\n", 0, pos) + 1
        self.column = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{message} (line {self.line}, column {self.column})")


@dataclass
class Token:
    kind: str
    text: str
    pos: int


def tokenize(text: str) -> list:
    tokens, pos, depth = [], 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise STLSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        value = m.group()
        if kind == "op" and value in "([":
            depth += 1
        elif kind == "op" and value in ")]":
            depth -= 1
        if kind == "nl" and depth <= 0:
            tokens.append(Token("sep", value, pos))
        elif kind == "op" and value == ";":
            tokens.append(Token("sep", value, pos))
        elif kind in ("num", "ident", "op"):
            tokens.append(Token(kind, value, pos))
        pos = m.end()
    tokens.append(Token("eof", "", len(text)))
    return tokens


@dataclass(frozen=True)
class _Agg:
    """Aggregate without a window yet: operand of ``On`` or an until."""
    kind: str
    body: A.Node
    pos: int


@dataclass
class Specification:
    """Named terms and formulas in definition order."""
    definitions: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> A.Node:
        return self.definitions[name]

    def __contains__(self, name: str) -> bool:
        return name in self.definitions

    def __iter__(self):
        return iter(self.definitions)

    def __len__(self):
        return len(self.definitions)

    def items(self):
        return self.definitions.items()

    def formulas(self) -> dict:
        return {k: v for k, v in self.definitions.items() if isinstance(v, A.Formula)}

    def terms(self) -> dict:
        return {k: v for k, v in self.definitions.items() if isinstance(v, A.Term)}


class _Parser:
    def __init__(self, text: str, signals: Iterable[str] | None, constants: Mapping[str, float] | None,
                 interner: A.Interner):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0
        self.signals = None if signals is None else set(signals)
        self.constants = dict(constants or {})
        self.names: dict = {}
        self.intern = interner

    # -- token helpers --------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        return STLSyntaxError(message, self.text, tok.pos)

    def at(self, *texts: str) -> bool:
        return self.tok.kind in ("op", "ident") and self.tok.text in texts

    def advance(self) -> Token:
        tok = self.tok
        self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return self.advance()

    def skip_separators(self):
        while self.tok.kind == "sep":
            self.advance()

    # -- type helpers -----------------------------------------------------

    def as_term(self, node, tok: Token) -> A.Term:
        if isinstance(node, A.Term):
            return node
        raise self.error("expected a term, found a formula" if isinstance(node, A.Formula)
                         else "aggregate needs a window (On[a,b] or U[a,b])", tok)

    def as_formula(self, node, tok: Token) -> A.Formula:
        if isinstance(node, A.Formula):
            return node
        raise self.error("expected a formula, found a term" if isinstance(node, A.Term)
                         else "aggregate needs a window (On[a,b] or U[a,b])", tok)

    def make(self, cls, *args):
        try:
            return self.intern(cls(*args))
        except A.WindowError as exc:
            raise self.error(str(exc)) from None
        except A.STLError as exc:
            raise self.error(str(exc)) from None

    def share(self, node):
        """Re-intern a node built by a derived-operator helper."""
        if isinstance(node, A.Node) and not isinstance(node, (A.NumAgg, A.LogAgg)):
            for child in A.children(node):
                self.share(child)
        return self.intern(node)

    # -- numbers, windows, defaults ----------------------------------------

    def number(self) -> float:
        sign = 1.0
        while self.at("-", "+"):
            if self.advance().text == "-":
                sign = -sign
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return sign * float(tok.text)
        if tok.kind == "ident" and tok.text == "inf":
            self.advance()
            return sign * math.inf
        if tok.kind == "ident" and tok.text in self.constants:
            self.advance()
            return sign * float(self.constants[tok.text])
        raise self.error(f"expected a number, found {tok.text or 'end of input'!r}")

    def window(self) -> tuple:
        self.expect("[")
        a = self.number()
        self.expect(",")
        b = self.number()
        self.expect("]")
        return a, b

    def default(self):
        self.expect("^")
        if self.at("true"):
            self.advance()
            return True
        if self.at("false"):
            self.advance()
            return False
        return self.number()

    # -- grammar ----------------------------------------------------------------

    def specification(self) -> Specification:
        spec = Specification()
        self.skip_separators()
        # a bare expression is accepted as a one-entry specification
        if not (self.tok.kind == "ident" and self.peek().text in (":=", "=")):
            node = self.expression()
            self.skip_separators()
            if self.tok.kind != "eof":
                raise self.error(f"unexpected {self.tok.text!r}")
            spec.definitions["main"] = self.finish(node)
            return spec
        while self.tok.kind != "eof":
            name_tok = self.advance()
            if name_tok.kind != "ident" or name_tok.text in KEYWORDS:
                raise self.error("expected a definition name", name_tok)
            if not self.at(":=", "="):
                raise self.error("expected ':=' after definition name")
            self.advance()
            node = self.finish(self.expression())
            if name_tok.text in self.names:
                raise self.error(f"duplicate definition {name_tok.text!r}", name_tok)
            self.names[name_tok.text] = node
            spec.definitions[name_tok.text] = node
            if self.tok.kind not in ("sep", "eof"):
                raise self.error(f"unexpected {self.tok.text!r}")
            self.skip_separators()
        return spec

    def finish(self, node):
        if isinstance(node, _Agg):
            raise self.error("aggregate needs a window (On[a,b] or U[a,b])")
        return node

    def expression(self):
        return self.implication()

    def implication(self):
        tok = self.tok
        left = self.disjunction()
        if self.at("->"):
            op = self.advance()
            right = self.implication()
            return self.share(A.implies(self.as_formula(left, tok), self.as_formula(right, op)))
        return left

    def disjunction(self):
        tok = self.tok
        left = self.conjunction()
        while self.at("|"):
            op = self.advance()
            right = self.conjunction()
            left = self.make(A.Or, self.as_formula(left, tok), self.as_formula(right, op))
        return left

    def conjunction(self):
        tok = self.tok
        left = self.until()
        while self.at("&"):
            op = self.advance()
            right = self.until()
            left = self.make(A.And, self.as_formula(left, tok), self.as_formula(right, op))
        return left

    def until(self):
        tok = self.tok
        left = self.comparison()
        if not self.at("U", "Uavg"):
            return left
        op = self.advance()
        a, b = self.window()
        has_default = self.at("^")
        default = self.default() if has_default else None
        rtok = self.tok
        right = self.as_formula(self.comparison(), rtok)
        if op.text == "Uavg":
            if has_default:
                raise self.error("average until takes no default", op)
            return self.make(A.AvgUntil, self.as_formula(left, tok), a, b, right)
        if isinstance(left, _Agg):
            if not has_default:
                raise self.error("aggregate until needs a default (^d)", op)
            if left.kind in ("Max", "Min"):
                agg = self.make(A.NumAgg, left.kind.lower(), left.body)
                return self.make(A.AggUntilTerm, agg, a, b, self._real_default(default, op), right)
            agg = self.make(A.LogAgg, left.kind.lower(), left.body)
            return self.make(A.AggUntilFormula, agg, a, b, self._bool_default(default, op), right)
        if isinstance(left, A.Term):
            if not has_default:
                raise self.error("time-point until on a term needs a default (^d)", op)
            return self.make(A.TimepointUntil, left, a, b, self._real_default(default, op), right)
        if not has_default:
            return self.share(A.until(left, a, b, right))
        return self.make(A.SampleUntil, left, a, b, self._bool_default(default, op), right)

    def _real_default(self, default, tok) -> float:
        if isinstance(default, bool):
            raise self.error("numeric operator needs a numeric default", tok)
        return float(default)

    def _bool_default(self, default, tok) -> bool:
        if not isinstance(default, bool):
            raise self.error("formula operator needs a true/false default", tok)
        return default

    def comparison(self):
        tok = self.tok
        left = self.additive()
        if self.at(">", "<", ">=", "<="):
            op = self.advance()
            right = self.as_term(self.additive(), op)
            left = self.as_term(left, tok)
            builder = {">": A.gt, "<": A.lt, ">=": A.ge, "<=": A.le}[op.text]
            return self.share(builder(left, right))
        return left

    def additive(self):
        tok = self.tok
        left = self.multiplicative()
        while self.at("+", "-"):
            op = self.advance()
            right = self.as_term(self.multiplicative(), op)
            left = self.share(A.apply(op.text, self.as_term(left, tok), right))
        return left

    def multiplicative(self):
        tok = self.tok
        left = self.unary()
        while self.at("*", "/"):
            op = self.advance()
            right = self.as_term(self.unary(), op)
            left = self.share(A.apply(op.text, self.as_term(left, tok), right))
        return left

    def unary(self):
        tok = self.tok
        if self.at("-"):
            self.advance()
            operand = self.as_term(self.unary(), tok)
            if isinstance(operand, A.Const):
                return self.make(A.Const, -operand.value)
            return self.share(A.neg(operand))
        if self.at("!"):
            self.advance()
            rtok = self.tok
            return self.make(A.Not, self.as_formula(self.comparison(), rtok))
        if self.at("G", "F") and self.peek().text == "[":
            self.advance()
            a, b = self.window()
            rtok = self.tok
            body = self.as_formula(self.comparison(), rtok)
            self._check(a, b, tok)
            builder = A.globally if tok.text == "G" else A.finally_
            return self.share(builder(a, b, body))
        if self.at("On"):
            self.advance()
            a, b = self.window()
            self._check(a, b, tok)
            if self.at("Max", "Min"):
                kind = self.advance().text.lower()
                rtok = self.tok
                body = self.as_term(self.unary(), rtok)
                return self.make(A.OnTerm, a, b, self.make(A.NumAgg, kind, body))
            if self.at("Forall", "Exists"):
                kind = self.advance().text.lower()
                rtok = self.tok
                body = self.as_formula(self.comparison(), rtok)
                return self.make(A.OnFormula, a, b, self.make(A.LogAgg, kind, body))
            raise self.error("expected Max, Min, Forall or Exists after On[a,b]")
        if self.at("Max", "Min"):
            kind = self.advance().text
            rtok = self.tok
            return _Agg(kind, self.as_term(self.unary(), rtok), tok.pos)
        if self.at("Forall", "Exists"):
            kind = self.advance().text
            rtok = self.tok
            return _Agg(kind, self.as_formula(self.comparison(), rtok), tok.pos)
        if self.at("D") and self.peek().text == "[":
            self.advance()
            self.expect("[")
            a = self.number()
            self.expect("]")
            default = self.default()
            rtok = self.tok
            body = self.finish(self.unary())
            if isinstance(body, A.Term):
                return self.share(A.lookup(a, self._real_default(default, tok), body))
            return self.share(A.lookup(a, self._bool_default(default, tok), body))
        return self.primary()

    def _check(self, a: float, b: float, tok: Token):
        try:
            A._check_window(a, b)
        except A.WindowError as exc:
            raise self.error(str(exc), tok) from None

    def primary(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return self.make(A.Const, float(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expression()
            self.expect(")")
            return node
        if tok.kind != "ident":
            raise self.error(f"unexpected {tok.text or 'end of input'!r}")
        name = tok.text
        if name == "true":
            self.advance()
            return self.intern(A.TRUE)
        if name == "false":
            self.advance()
            return self.intern(A.FALSE)
        if name == "inf":
            self.advance()
            return self.make(A.Const, math.inf)
        if name == "time":
            self.advance()
            return self.make(A.Time)
        if name == "ite":
            self.advance()
            self.expect("(")
            ctok = self.tok
            cond = self.as_formula(self.expression(), ctok)
            self.expect(",")
            ttok = self.tok
            then = self.as_term(self.expression(), ttok)
            self.expect(",")
            etok = self.tok
            orelse = self.as_term(self.expression(), etok)
            self.expect(")")
            return self.make(A.Ite, cond, then, orelse)
        if name in KEYWORDS:
            raise self.error(f"unexpected keyword {name!r}")
        self.advance()
        if self.at("("):
            if name not in A.FUNCTIONS:
                raise self.error(f"unknown function {name!r}", tok)
            self.advance()
            args = []
            if not self.at(")"):
                while True:
                    atok = self.tok
                    args.append(self.as_term(self.expression(), atok))
                    if not self.at(","):
                        break
                    self.advance()
            self.expect(")")
            try:
                return self.share(A.apply(name, *args))
            except A.STLError as exc:
                raise self.error(str(exc), tok) from None
        if name in self.names:
            return self.names[name]
        if name in self.constants:
            return self.make(A.Const, float(self.constants[name]))
        if self.signals is not None and name not in self.signals:
            raise self.error(f"unknown signal {name!r}", tok)
        return self.make(A.Signal, name)


def parse(text: str, signals: Iterable[str] | None = None,
          constants: Mapping[str, float] | None = None) -> Specification:
    """Parse a specification (or a single bare expression, stored as ``main``).

    ``signals`` restricts the identifiers accepted as signal references;
    ``constants`` binds names to numbers usable in terms and windows.
    """
    return _Parser(text, signals, constants, A.Interner()).specification()


def parse_expr(text: str, signals: Iterable[str] | None = None,
               constants: Mapping[str, float] | None = None) -> A.Node:
    """Parse one expression and return its term or formula node."""
    spec = parse(text, signals, constants)
    if list(spec) != ["main"]:
        raise STLSyntaxError("expected a single expression, found definitions", text, 0)
    return spec["main"]

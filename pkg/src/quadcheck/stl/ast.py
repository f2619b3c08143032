"""Abstract syntax for signal temporal logic with aggregates.

Terms denote reals, formulas denote booleans.  Derived operators
(globally, finally, classic until, lookups, comparisons, implication) are
plain constructor functions that desugar into the core nodes below.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass
from typing import Callable

INF = math.inf


class STLError(Exception):
    """Base class for logic errors."""


class WindowError(STLError, ValueError):
    """Window bounds are out of order or not finite."""


class EvaluationError(STLError, ArithmeticError):
    """Raised by a function application that cannot be evaluated (e.g. x / 0)."""


class Node:
    __slots__ = ()


class Term(Node):
    __slots__ = ()


class Formula(Node):
    __slots__ = ()


def _check_window(a: float, b: float) -> None:
    if not (math.isfinite(a) and math.isfinite(b)):
        raise WindowError(f"window bounds must be finite, got [{a}, {b}]")
    if a > b:
        raise WindowError(f"malformed window [{a}, {b}]: lower bound exceeds upper bound")


# -- function catalog -----------------------------------------------------

def _div(x: float, y: float) -> float:
    if y == 0:
        raise EvaluationError(f"division by zero ({x} / {y})")
    return x / y


FUNCTIONS: dict[str, tuple[Callable, int | None]] = {
    "+": (operator.add, 2),
    "-": (operator.sub, 2),
    "*": (operator.mul, 2),
    "/": (_div, 2),
    "neg": (operator.neg, 1),
    "abs": (abs, 1),
    "min": (min, None),
    "max": (max, None),
}


def register_function(name: str, fn: Callable, arity: int | None = None) -> None:
    """Add ``fn`` to the catalog usable in function applications."""
    FUNCTIONS[name] = (fn, arity)


# -- terms -----------------------------------------------------------------

@dataclass(frozen=True, repr=False)
class Const(Term):
    value: float

    def __repr__(self):
        return repr(self.value)


@dataclass(frozen=True, repr=False)
class Signal(Term):
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True, repr=False)
class Time(Term):
    def __repr__(self):
        return "time"


@dataclass(frozen=True, repr=False)
class Apply(Term):
    fn: str
    args: tuple

    def __post_init__(self):
        if self.fn not in FUNCTIONS:
            raise STLError(f"unknown function {self.fn!r}")
        arity = FUNCTIONS[self.fn][1]
        if arity is not None and len(self.args) != arity:
            raise STLError(f"function {self.fn!r} takes {arity} arguments, got {len(self.args)}")
        if not self.args:
            raise STLError(f"function {self.fn!r} needs arguments")

    def __repr__(self):
        if self.fn in "+-*/" and len(self.args) == 2:
            return f"({self.args[0]!r} {self.fn} {self.args[1]!r})"
        return f"{self.fn}({', '.join(map(repr, self.args))})"


@dataclass(frozen=True, repr=False)
class Ite(Term):
    cond: Formula
    then: Term
    orelse: Term

    def __repr__(self):
        return f"ite({self.cond!r}, {self.then!r}, {self.orelse!r})"


@dataclass(frozen=True, repr=False)
class NumAgg(Node):
    kind: str
    term: Term

    def __post_init__(self):
        if self.kind not in ("max", "min"):
            raise STLError(f"numeric aggregate must be max or min, got {self.kind!r}")

    def __repr__(self):
        return f"{self.kind.capitalize()} {self.term!r}"


@dataclass(frozen=True, repr=False)
class LogAgg(Node):
    kind: str
    formula: Formula

    def __post_init__(self):
        if self.kind not in ("forall", "exists"):
            raise STLError(f"logic aggregate must be forall or exists, got {self.kind!r}")

    def __repr__(self):
        return f"{self.kind.capitalize()} {self.formula!r}"


@dataclass(frozen=True, repr=False)
class OnTerm(Term):
    a: float
    b: float
    agg: NumAgg

    def __post_init__(self):
        _check_window(self.a, self.b)

    def __repr__(self):
        return f"(On[{self.a},{self.b}] {self.agg!r})"


@dataclass(frozen=True, repr=False)
class AggUntilTerm(Term):
    agg: NumAgg
    a: float
    b: float
    default: float
    trigger: Formula

    def __post_init__(self):
        _check_window(self.a, self.b)

    def __repr__(self):
        return f"({self.agg!r} U[{self.a},{self.b}]^{self.default} {self.trigger!r})"


@dataclass(frozen=True, repr=False)
class TimepointUntil(Term):
    term: Term
    a: float
    b: float
    default: float
    trigger: Formula

    def __post_init__(self):
        _check_window(self.a, self.b)

    def __repr__(self):
        return f"({self.term!r} U[{self.a},{self.b}]^{self.default} {self.trigger!r})"


# -- formulas --------------------------------------------------------------

@dataclass(frozen=True, repr=False)
class TrueF(Formula):
    def __repr__(self):
        return "true"


@dataclass(frozen=True, repr=False)
class FalseF(Formula):
    def __repr__(self):
        return "false"


@dataclass(frozen=True, repr=False)
class Positive(Formula):
    term: Term

    def __repr__(self):
        return f"({self.term!r} > 0)"


@dataclass(frozen=True, repr=False)
class Not(Formula):
    arg: Formula

    def __repr__(self):
        return f"!{self.arg!r}"


@dataclass(frozen=True, repr=False)
class And(Formula):
    left: Formula
    right: Formula

    def __repr__(self):
        return f"({self.left!r} & {self.right!r})"


@dataclass(frozen=True, repr=False)
class Or(Formula):
    left: Formula
    right: Formula

    def __repr__(self):
        return f"({self.left!r} | {self.right!r})"


@dataclass(frozen=True, repr=False)
class OnFormula(Formula):
    a: float
    b: float
    agg: LogAgg

    def __post_init__(self):
        _check_window(self.a, self.b)

    def __repr__(self):
        return f"(On[{self.a},{self.b}] {self.agg!r})"


@dataclass(frozen=True, repr=False)
class AggUntilFormula(Formula):
    agg: LogAgg
    a: float
    b: float
    default: bool
    trigger: Formula

    def __post_init__(self):
        _check_window(self.a, self.b)

    def __repr__(self):
        return f"({self.agg!r} U[{self.a},{self.b}]^{str(self.default).lower()} {self.trigger!r})"


@dataclass(frozen=True, repr=False)
class SampleUntil(Formula):
    payload: Formula
    a: float
    b: float
    default: bool
    trigger: Formula

    def __post_init__(self):
        _check_window(self.a, self.b)

    def __repr__(self):
        return f"({self.payload!r} U[{self.a},{self.b}]^{str(self.default).lower()} {self.trigger!r})"


@dataclass(frozen=True, repr=False)
class AvgUntil(Formula):
    left: Formula
    a: float
    b: float
    right: Formula

    def __post_init__(self):
        _check_window(self.a, self.b)

    def __repr__(self):
        return f"({self.left!r} Uavg[{self.a},{self.b}] {self.right!r})"


TRUE = TrueF()
FALSE = FalseF()


# -- derived operators and smart constructors ------------------------------

def apply(fn: str, *args: Term) -> Term:
    """Function application with constant folding."""
    node = Apply(fn, tuple(args))
    if all(isinstance(a, Const) for a in args):
        try:
            return Const(float(FUNCTIONS[fn][0](*(a.value for a in args))))
        except EvaluationError:
            return node
    return node


def add(x: Term, y: Term) -> Term:
    return apply("+", x, y)


def sub(x: Term, y: Term) -> Term:
    return apply("-", x, y)


def mul(x: Term, y: Term) -> Term:
    return apply("*", x, y)


def div(x: Term, y: Term) -> Term:
    return apply("/", x, y)


def neg(x: Term) -> Term:
    return apply("neg", x)


def gt(x: Term, y: Term) -> Formula:
    """x > y"""
    return Positive(x if y == Const(0.0) else sub(x, y))


def lt(x: Term, y: Term) -> Formula:
    """x < y"""
    return gt(y, x)


def ge(x: Term, y: Term) -> Formula:
    """x >= y, i.e. not (y > x)"""
    return Not(gt(y, x))


def le(x: Term, y: Term) -> Formula:
    """x <= y, i.e. not (x > y)"""
    return Not(gt(x, y))


def implies(x: Formula, y: Formula) -> Formula:
    return Or(Not(x), y)


def globally(a: float, b: float, phi: Formula) -> Formula:
    return OnFormula(a, b, LogAgg("forall", phi))


def finally_(a: float, b: float, phi: Formula) -> Formula:
    return OnFormula(a, b, LogAgg("exists", phi))


def until(phi1: Formula, a: float, b: float, phi2: Formula) -> Formula:
    """Classic STL until: phi1 holds throughout until phi2 first holds."""
    return AggUntilFormula(LogAgg("forall", phi1), a, b, False, phi2)


def lookup(a: float, default, node: Node) -> Node:
    """Value of ``node`` at ``t + a`` (term or formula lookup)."""
    if isinstance(node, Term):
        return TimepointUntil(node, a, a, float(default), TRUE)
    return SampleUntil(node, a, a, bool(default), TRUE)


def children(node: Node) -> tuple:
    if isinstance(node, (Const, Signal, Time, TrueF, FalseF)):
        return ()
    if isinstance(node, Apply):
        return node.args
    if isinstance(node, Ite):
        return (node.cond, node.then, node.orelse)
    if isinstance(node, NumAgg):
        return (node.term,)
    if isinstance(node, LogAgg):
        return (node.formula,)
    if isinstance(node, (OnTerm, OnFormula)):
        return (node.agg,)
    if isinstance(node, (AggUntilTerm, AggUntilFormula)):
        return (node.agg, node.trigger)
    if isinstance(node, TimepointUntil):
        return (node.term, node.trigger)
    if isinstance(node, SampleUntil):
        return (node.payload, node.trigger)
    if isinstance(node, (Positive,)):
        return (node.term,)
    if isinstance(node, Not):
        return (node.arg,)
    if isinstance(node, (And, Or, AvgUntil)):
        return (node.left, node.right)
    raise TypeError(f"not a logic node: {node!r}")


def signals(node: Node) -> set:
    """Names of all signals referenced under ``node``."""
    found, stack = set(), [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Signal):
            found.add(n.name)
        stack.extend(children(n))
    return found


def depth(node: Node) -> int:
    kids = children(node)
    return 1 + max((depth(k) for k in kids), default=0)


class Interner:
    """Hash-consing table: structurally equal nodes map to one shared object."""

    def __init__(self):
        self._table: dict = {}

    def __call__(self, node):
        return self._table.setdefault(node, node)

    def __len__(self):
        return len(self._table)

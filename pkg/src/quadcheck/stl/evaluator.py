"""Standard and robust semantics over piecewise-constant traces.

Windows ``[lo, hi]`` are sampled on the evaluation grid: the left endpoint
``lo`` plus every breakpoint in ``(lo, hi]``.  Between two grid points a
signal is constant, so aggregates over signals are exact.  Until-style
operators look for the smallest grid point in ``[t+a, t+b]`` where the
trigger holds under the standard semantics.

Every evaluator memoizes values per ``(node, t)`` and keeps one sliding
extremum cache per window-aggregate node, so evaluating a formula at
increasing times reuses work.  An evaluator is not thread-safe.
"""

from __future__ import annotations

import math
from typing import Iterable

from . import ast as A
from .sliding import SlidingExtremum
from .trace import Trace

INF = math.inf


def _scale(weight: float, value: float) -> float:
    """weight * value over the extended reals with 0 * inf = 0."""
    if weight == 0 or value == 0:
        return 0.0
    return weight * value


class Evaluator:
    def __init__(self, trace: Trace):
        self.trace = trace
        self._term_memo: dict = {}
        self._sat_memo: dict = {}
        self._rob_memo: dict = {}
        self._slides: dict = {}
        self._pinned: dict = {}
        self._term_rules = {
            A.Const: self._t_const,
            A.Signal: self._t_signal,
            A.Time: self._t_time,
            A.Apply: self._t_apply,
            A.Ite: self._t_ite,
            A.OnTerm: self._t_on,
            A.AggUntilTerm: self._t_agg_until,
            A.TimepointUntil: self._t_timepoint_until,
        }
        self._sat_rules = {
            A.TrueF: lambda n, t: True,
            A.FalseF: lambda n, t: False,
            A.Positive: lambda n, t: self.term(n.term, t) > 0,
            A.Not: lambda n, t: not self.sat(n.arg, t),
            A.And: lambda n, t: self.sat(n.left, t) and self.sat(n.right, t),
            A.Or: lambda n, t: self.sat(n.left, t) or self.sat(n.right, t),
            A.OnFormula: self._s_on,
            A.AggUntilFormula: self._s_agg_until,
            A.SampleUntil: self._s_sample_until,
            A.AvgUntil: self._s_avg_until,
        }
        self._rob_rules = {
            A.TrueF: lambda n, t: INF,
            A.FalseF: lambda n, t: -INF,
            A.Positive: lambda n, t: self.term(n.term, t),
            A.Not: lambda n, t: -self.robust(n.arg, t),
            A.And: lambda n, t: min(self.robust(n.left, t), self.robust(n.right, t)),
            A.Or: lambda n, t: max(self.robust(n.left, t), self.robust(n.right, t)),
            A.OnFormula: self._r_on,
            A.AggUntilFormula: self._r_agg_until,
            A.SampleUntil: self._r_sample_until,
            A.AvgUntil: self._r_avg_until,
        }

    # -- public entry points ---------------------------------------------

    def term(self, node: A.Term, t: float) -> float:
        key = (id(node), t)
        try:
            return self._term_memo[key]
        except KeyError:
            pass
        self._pinned[id(node)] = node
        try:
            rule = self._term_rules[type(node)]
        except KeyError:
            raise TypeError(f"not a term: {node!r}") from None
        value = rule(node, t)
        self._term_memo[key] = value
        return value

    def sat(self, node: A.Formula, t: float) -> bool:
        key = (id(node), t)
        try:
            return self._sat_memo[key]
        except KeyError:
            pass
        self._pinned[id(node)] = node
        try:
            rule = self._sat_rules[type(node)]
        except KeyError:
            raise TypeError(f"not a formula: {node!r}") from None
        value = rule(node, t)
        self._sat_memo[key] = value
        return value

    def robust(self, node: A.Formula, t: float) -> float:
        key = (id(node), t)
        try:
            return self._rob_memo[key]
        except KeyError:
            pass
        self._pinned[id(node)] = node
        try:
            rule = self._rob_rules[type(node)]
        except KeyError:
            raise TypeError(f"not a formula: {node!r}") from None
        value = float(rule(node, t))
        self._rob_memo[key] = value
        return value

    def evaluate(self, node: A.Node, t: float):
        """Term value, or ``(satisfied, robustness)`` for a formula."""
        if isinstance(node, A.Term):
            return self.term(node, t)
        return self.sat(node, t), self.robust(node, t)

    # -- grid helpers -------------------------------------------------------

    def grid(self, lo: float, hi: float) -> list:
        """Evaluation grid of the window [lo, hi] in increasing order."""
        i, j = self.trace.window_indices(lo, hi)
        return [lo, *self.trace._times_list[i:j]]

    def _witness(self, trigger: A.Formula, lo: float, hi: float):
        """Smallest grid time in [lo, hi] where ``trigger`` holds, else None."""
        if self.sat(trigger, lo):
            return lo
        i, j = self.trace.window_indices(lo, hi)
        times = self.trace._times_list
        for k in range(i, j):
            if self.sat(trigger, times[k]):
                return times[k]
        return None

    def _window_extremum(self, node: A.Node, mode: str, value_at, is_max: bool, lo: float, hi: float):
        """Extremum of ``value_at(time)`` over the grid of [lo, hi] using the sliding cache."""
        key = (id(node), mode)
        slide = self._slides.get(key)
        if slide is None:
            times = self.trace._times_list
            slide = SlidingExtremum(lambda j: value_at(times[j]), "max" if is_max else "min")
            self._slides[key] = slide
        i, j = self.trace.window_indices(lo, hi)
        inner = slide.query(i, j)
        left = value_at(lo)
        if inner is None:
            return left
        return max(inner, left) if is_max else min(inner, left)

    def _interval_extremum(self, value_at, is_max: bool, t: float, t_end: float):
        """Extremum over the grid between two instants in either order (no caching)."""
        lo, hi = (t, t_end) if t <= t_end else (t_end, t)
        values = [value_at(s) for s in self.grid(lo, hi)]
        return max(values) if is_max else min(values)

    # -- term rules -----------------------------------------------------------

    def _t_const(self, n, t):
        return float(n.value)

    def _t_signal(self, n, t):
        return self.trace.value(n.name, t)

    def _t_time(self, n, t):
        return float(t)

    def _t_apply(self, n, t):
        fn = A.FUNCTIONS[n.fn][0]
        return float(fn(*(self.term(arg, t) for arg in n.args)))

    def _t_ite(self, n, t):
        return self.term(n.then, t) if self.sat(n.cond, t) else self.term(n.orelse, t)

    def _t_on(self, n, t):
        inner = n.agg.term
        return self._window_extremum(n, "term", lambda s: self.term(inner, s),
                                     n.agg.kind == "max", t + n.a, t + n.b)

    def _t_agg_until(self, n, t):
        w = self._witness(n.trigger, t + n.a, t + n.b)
        if w is None:
            return float(n.default)
        inner = n.agg.term
        return self._interval_extremum(lambda s: self.term(inner, s), n.agg.kind == "max", t, w)

    def _t_timepoint_until(self, n, t):
        w = self._witness(n.trigger, t + n.a, t + n.b)
        return float(n.default) if w is None else self.term(n.term, w)

    # -- standard formula rules ---------------------------------------------

    def _bool_at(self, phi):
        return lambda s: 1.0 if self.sat(phi, s) else 0.0

    def _s_on(self, n, t):
        is_forall = n.agg.kind == "forall"
        v = self._window_extremum(n, "sat", self._bool_at(n.agg.formula), not is_forall, t + n.a, t + n.b)
        return v == 1.0

    def _s_agg_until(self, n, t):
        w = self._witness(n.trigger, t + n.a, t + n.b)
        if w is None:
            return bool(n.default)
        is_forall = n.agg.kind == "forall"
        return self._interval_extremum(self._bool_at(n.agg.formula), not is_forall, t, w) == 1.0

    def _s_sample_until(self, n, t):
        w = self._witness(n.trigger, t + n.a, t + n.b)
        return bool(n.default) if w is None else self.sat(n.payload, w)

    def _s_avg_until(self, n, t):
        w = self._witness(n.right, t + n.a, t + n.b)
        if w is None:
            return False
        return self._interval_extremum(self._bool_at(n.left), False, t, w) == 1.0

    # -- robust formula rules -------------------------------------------------

    def _rob_at(self, phi):
        return lambda s: self.robust(phi, s)

    def _r_on(self, n, t):
        is_forall = n.agg.kind == "forall"
        return self._window_extremum(n, "rob", self._rob_at(n.agg.formula), not is_forall, t + n.a, t + n.b)

    def _r_agg_until(self, n, t):
        w = self._witness(n.trigger, t + n.a, t + n.b)
        if w is None:
            return INF if n.default else -INF
        is_forall = n.agg.kind == "forall"
        return self._interval_extremum(self._rob_at(n.agg.formula), not is_forall, t, w)

    def _r_sample_until(self, n, t):
        w = self._witness(n.trigger, t + n.a, t + n.b)
        if w is None:
            return INF if n.default else -INF
        return self.robust(n.payload, w)

    def _r_avg_until(self, n, t):
        w = self._witness(n.right, t + n.a, t + n.b)
        if w is None:
            return -INF
        # weight = time left in the window after the witness
        weight = (t + n.b) - w
        return _scale(weight, self._interval_extremum(self._rob_at(n.left), False, t, w))


def evaluate_many(node: A.Node, trace: Trace, times: Iterable[float]):
    """Evaluate ``node`` at each time with one shared evaluator."""
    ev = Evaluator(trace)
    return [ev.evaluate(node, t) for t in times]


def eval_term(term: A.Term, trace: Trace, t: float) -> float:
    return Evaluator(trace).term(term, t)


def eval_formula(formula: A.Formula, trace: Trace, t: float) -> bool:
    return Evaluator(trace).sat(formula, t)


def eval_robust(formula: A.Formula, trace: Trace, t: float) -> float:
    return Evaluator(trace).robust(formula, t)

"""Independent reference implementations used as test oracles.

Nothing here imports the package's evaluator, sliding-window or trace
lookup code: values are recomputed from first principles with plain
Python lists and ``bisect``.
"""

from __future__ import annotations

import bisect
import math
import random

from quadcheck.stl import ast as A

TOL = 1e-9


class NaiveTrace:
    def __init__(self, times, columns: dict, default: dict):
        self.times = [float(t) for t in times]
        self.columns = {k: [float(v) for v in vs] for k, vs in columns.items()}
        self.default = {k: float(default.get(k, 0.0)) for k in columns}

    def value(self, name, t):
        j = bisect.bisect_right(self.times, t + TOL) - 1
        return self.default[name] if j < 0 else self.columns[name][j]

    def grid(self, lo, hi):
        return [lo] + [s for s in self.times if lo + TOL < s <= hi + TOL]


def _funcs():
    def div(x, y):
        if y == 0:
            raise ZeroDivisionError
        return x / y
    return {"+": lambda x, y: x + y, "-": lambda x, y: x - y, "*": lambda x, y: x * y, "/": div,
            "neg": lambda x: -x, "abs": abs, "min": min, "max": max}


FUNCS = _funcs()


class Naive:
    """Direct recursive semantics with no caching."""

    def __init__(self, trace: NaiveTrace):
        self.tr = trace

    def witness(self, phi, lo, hi):
        for s in self.tr.grid(lo, hi):
            if self.sat(phi, s):
                return s
        return None

    def between(self, t, w):
        lo, hi = min(t, w), max(t, w)
        return self.tr.grid(lo, hi)

    def term(self, n, t):
        tr = self.tr
        if isinstance(n, A.Const):
            return n.value
        if isinstance(n, A.Signal):
            return tr.value(n.name, t)
        if isinstance(n, A.Time):
            return t
        if isinstance(n, A.Apply):
            return float(FUNCS[n.fn](*[self.term(a, t) for a in n.args]))
        if isinstance(n, A.Ite):
            return self.term(n.then, t) if self.sat(n.cond, t) else self.term(n.orelse, t)
        if isinstance(n, A.OnTerm):
            vals = [self.term(n.agg.term, s) for s in tr.grid(t + n.a, t + n.b)]
            return max(vals) if n.agg.kind == "max" else min(vals)
        if isinstance(n, A.AggUntilTerm):
            w = self.witness(n.trigger, t + n.a, t + n.b)
            if w is None:
                return n.default
            vals = [self.term(n.agg.term, s) for s in self.between(t, w)]
            return max(vals) if n.agg.kind == "max" else min(vals)
        if isinstance(n, A.TimepointUntil):
            w = self.witness(n.trigger, t + n.a, t + n.b)
            return n.default if w is None else self.term(n.term, w)
        raise TypeError(n)

    def sat(self, n, t):
        tr = self.tr
        if isinstance(n, A.TrueF):
            return True
        if isinstance(n, A.FalseF):
            return False
        if isinstance(n, A.Positive):
            return self.term(n.term, t) > 0
        if isinstance(n, A.Not):
            return not self.sat(n.arg, t)
        if isinstance(n, A.And):
            return self.sat(n.left, t) and self.sat(n.right, t)
        if isinstance(n, A.Or):
            return self.sat(n.left, t) or self.sat(n.right, t)
        if isinstance(n, A.OnFormula):
            vals = [self.sat(n.agg.formula, s) for s in tr.grid(t + n.a, t + n.b)]
            return all(vals) if n.agg.kind == "forall" else any(vals)
        if isinstance(n, A.AggUntilFormula):
            w = self.witness(n.trigger, t + n.a, t + n.b)
            if w is None:
                return n.default
            vals = [self.sat(n.agg.formula, s) for s in self.between(t, w)]
            return all(vals) if n.agg.kind == "forall" else any(vals)
        if isinstance(n, A.SampleUntil):
            w = self.witness(n.trigger, t + n.a, t + n.b)
            return n.default if w is None else self.sat(n.payload, w)
        if isinstance(n, A.AvgUntil):
            w = self.witness(n.right, t + n.a, t + n.b)
            return w is not None and all(self.sat(n.left, s) for s in self.between(t, w))
        raise TypeError(n)

    def robust(self, n, t):
        tr = self.tr
        if isinstance(n, A.TrueF):
            return math.inf
        if isinstance(n, A.FalseF):
            return -math.inf
        if isinstance(n, A.Positive):
            return self.term(n.term, t)
        if isinstance(n, A.Not):
            return -self.robust(n.arg, t)
        if isinstance(n, A.And):
            return min(self.robust(n.left, t), self.robust(n.right, t))
        if isinstance(n, A.Or):
            return max(self.robust(n.left, t), self.robust(n.right, t))
        if isinstance(n, A.OnFormula):
            vals = [self.robust(n.agg.formula, s) for s in tr.grid(t + n.a, t + n.b)]
            return min(vals) if n.agg.kind == "forall" else max(vals)
        if isinstance(n, A.AggUntilFormula):
            w = self.witness(n.trigger, t + n.a, t + n.b)
            if w is None:
                return math.inf if n.default else -math.inf
            vals = [self.robust(n.agg.formula, s) for s in self.between(t, w)]
            return min(vals) if n.agg.kind == "forall" else max(vals)
        if isinstance(n, A.SampleUntil):
            w = self.witness(n.trigger, t + n.a, t + n.b)
            if w is None:
                return math.inf if n.default else -math.inf
            return self.robust(n.payload, w)
        if isinstance(n, A.AvgUntil):
            w = self.witness(n.right, t + n.a, t + n.b)
            if w is None:
                return -math.inf
            inner = min(self.robust(n.left, s) for s in self.between(t, w))
            weight = t + n.b - w
            return 0.0 if weight == 0 or inner == 0 else weight * inner
        raise TypeError(n)


# -- classic STL, implemented directly on sampled Boolean signals ------------

def classic_globally(sat_at, trace: NaiveTrace, a, b, t):
    return all(sat_at(s) for s in trace.grid(t + a, t + b))


def classic_finally(sat_at, trace: NaiveTrace, a, b, t):
    return any(sat_at(s) for s in trace.grid(t + a, t + b))


def classic_until(sat1, sat2, trace: NaiveTrace, a, b, t):
    """phi1 U[a,b] phi2: first phi2 instant in the window, phi1 on [t, that instant]."""
    for s in trace.grid(t + a, t + b):
        if sat2(s):
            lo, hi = min(t, s), max(t, s)
            return all(sat1(r) for r in trace.grid(lo, hi))
    return False


# -- random corpora -------------------------------------------------------------

SIGNALS = ("x", "y")


def random_trace(rng: random.Random, n: int = 12, step: float = 0.5):
    times, t = [], 0.0
    for _ in range(n):
        times.append(round(t, 6))
        t += rng.choice([step, step / 2, step * 2])
    cols = {s: [round(rng.uniform(-2, 2), 3) for _ in times] for s in SIGNALS}
    # exact zeros exercise the tie cases
    for s in SIGNALS:
        for k in range(len(times)):
            if rng.random() < 0.1:
                cols[s][k] = 0.0
    default = {s: round(rng.uniform(-1, 1), 3) for s in SIGNALS}
    return times, cols, default


def _window(rng):
    a = rng.choice([-1.0, -0.5, 0.0, 0.0, 0.5, 1.0])
    return a, a + rng.choice([0.0, 0.5, 1.0, 2.0, 3.0])


def random_term(rng: random.Random, depth: int):
    if depth <= 1:
        r = rng.random()
        if r < 0.5:
            return A.Signal(rng.choice(SIGNALS))
        if r < 0.9:
            return A.Const(round(rng.uniform(-1.5, 1.5), 2))
        return A.Time()
    kind = rng.choice(["apply", "apply", "ite", "on", "agguntil", "tpuntil", "leaf"])
    if kind == "leaf":
        return random_term(rng, 1)
    if kind == "apply":
        fn = rng.choice(["+", "-", "*", "neg", "abs", "min", "max"])
        arity = 1 if fn in ("neg", "abs") else 2
        return A.Apply(fn, tuple(random_term(rng, depth - 1) for _ in range(arity)))
    if kind == "ite":
        return A.Ite(random_formula(rng, depth - 1), random_term(rng, depth - 1), random_term(rng, depth - 1))
    a, b = _window(rng)
    if kind == "on":
        return A.OnTerm(a, b, A.NumAgg(rng.choice(["max", "min"]), random_term(rng, depth - 1)))
    default = rng.choice([-1.0, 0.0, 2.0, math.inf, -math.inf])
    if kind == "agguntil":
        return A.AggUntilTerm(A.NumAgg(rng.choice(["max", "min"]), random_term(rng, depth - 1)),
                              a, b, default, random_formula(rng, depth - 1))
    return A.TimepointUntil(random_term(rng, depth - 1), a, b, default, random_formula(rng, depth - 1))


def random_formula(rng: random.Random, depth: int):
    if depth <= 1:
        r = rng.random()
        if r < 0.85:
            return A.Positive(random_term(rng, 1))
        return A.TRUE if r < 0.93 else A.FALSE
    kind = rng.choice(["pos", "not", "and", "or", "on", "agguntil", "sample", "avg"])
    if kind == "pos":
        return A.Positive(random_term(rng, depth - 1))
    if kind == "not":
        return A.Not(random_formula(rng, depth - 1))
    if kind in ("and", "or"):
        cls = A.And if kind == "and" else A.Or
        return cls(random_formula(rng, depth - 1), random_formula(rng, depth - 1))
    a, b = _window(rng)
    if kind == "on":
        return A.OnFormula(a, b, A.LogAgg(rng.choice(["forall", "exists"]), random_formula(rng, depth - 1)))
    if kind == "agguntil":
        return A.AggUntilFormula(A.LogAgg(rng.choice(["forall", "exists"]), random_formula(rng, depth - 1)),
                                 a, b, rng.random() < 0.5, random_formula(rng, depth - 1))
    if kind == "sample":
        return A.SampleUntil(random_formula(rng, depth - 1), a, b, rng.random() < 0.5,
                             random_formula(rng, depth - 1))
    return A.AvgUntil(random_formula(rng, depth - 1), a, b, random_formula(rng, depth - 1))


# -- numeric oracles --------------------------------------------------------------

def mlp_forward(layers, obs, scale):
    """Plain-Python forward pass: ReLU hidden layers, tanh output."""
    x = list(obs)
    for k, (w, b) in enumerate(layers):
        y = [sum(x[i] * w[i][j] for i in range(len(x))) + b[j] for j in range(len(b))]
        x = [math.tanh(v) for v in y] if k == len(layers) - 1 else [max(v, 0.0) for v in y]
    return [v * s for v, s in zip(x, scale)]


def bisect_root(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- constructed step responses ----------------------------------------------------

def sampled(x_of, q_of, t_end, dt=0.01):
    """Sample two closed-form signals on a uniform grid (piecewise-constant hold)."""
    n = int(round(t_end / dt))
    times = [round(k * dt, 10) for k in range(n + 1)]
    return times, [x_of(t) for t in times], [q_of(t) for t in times]


STEP_AT, STEP = 1.0, 0.5


def step_query(t):
    return STEP if t >= STEP_AT - 1e-12 else 0.0


def perfect_response():
    return sampled(step_query, step_query, 2.0)


def first_order_response(tau=0.05):
    def x(t):
        if t < STEP_AT - 1e-12:
            return 0.0
        return STEP * (1.0 - math.exp(-(t - STEP_AT) / tau))
    return sampled(x, step_query, 2.0)


def first_order_rising_time(tau=0.05, gamma=0.05, dt=0.01):
    """First grid offset where the exponential error drops strictly below gamma."""
    k = 0
    while not math.exp(-k * dt / tau) < gamma:
        k += 1
    return k * dt


def overshoot_pulse(peak=0.12, width=0.1):
    def x(t):
        if t < STEP_AT - 1e-12:
            return 0.0
        return STEP * (1 + peak) if t < STEP_AT + width - 1e-12 else STEP
    return sampled(x, step_query, 2.0)


def three_plateaus():
    """Hand-built 3 s trace: a clean rise, a violating descent, a near-perfect step."""
    def q(t):
        return 0.4 if t < 1 - 1e-12 else (-0.2 if t < 2 - 1e-12 else 0.2)

    def x(t):
        if t < 0.2 - 1e-12:
            return 0.0
        if t < 1 - 1e-12:
            return 0.4
        if t < 1.1 - 1e-12:
            return -0.3
        if t < 2 - 1e-12:
            return -0.15
        return 0.204
    return sampled(x, q, 3.0)


# per-plateau (step, overshoot %, offset %, rising time) worked out by hand
THREE_PLATEAU_GOLDEN = [
    (0.4, 0.0, 0.0, 0.2),
    (-0.6, 100 * 0.1 / 0.6, 100 * 0.05 / 0.6, math.inf),
    (0.4, 100 * 0.004 / 0.4, 100 * 0.004 / 0.4, 0.0),
]

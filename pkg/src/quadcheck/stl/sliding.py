"""Incremental sliding-window extrema over breakpoint-indexed values.

For monotonically advancing windows the extremum and the index where it
was attained are cached.  When the window moves forward and the cached
witness is still inside it, only the newly covered suffix is scanned;
when the witness has dropped out the whole window is rescanned.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

from .trace import Trace


class ContractError(ValueError):
    """Caller violated a documented precondition."""


class SlidingExtremum:
    """Max (or min) of ``value_at(j)`` over index windows ``[lo, hi)``.

    Windows must advance monotonically (``lo`` and ``hi`` never decrease)
    for the cache to be reused; otherwise the query falls back to a full
    scan and the cache is rebuilt from there.
    """

    def __init__(self, value_at: Callable[[int], float], mode: str = "max"):
        if mode not in ("max", "min"):
            raise ValueError("mode must be 'max' or 'min'")
        self.value_at = value_at
        self.is_max = mode == "max"
        self._lo = self._hi = 0
        self._witness = -1
        self._best = None
        self.rescans = 0

    def reset(self) -> None:
        self._lo = self._hi = 0
        self._witness = -1
        self._best = None

    def _scan(self, start: int, stop: int, witness: int, best):
        value_at, is_max = self.value_at, self.is_max
        for j in range(start, stop):
            v = value_at(j)
            # ties move the witness right so it survives longer
            if best is None or (v >= best if is_max else v <= best):
                best, witness = v, j
        return witness, best

    def query(self, lo: int, hi: int):
        """Extremum over ``[lo, hi)``, or ``None`` when the range is empty."""
        if hi <= lo:
            # remember the position so a later window can still extend incrementally
            self._lo, self._hi, self._witness, self._best = lo, hi, -1, None
            return None
        if lo >= self._lo and hi >= self._hi and self._best is not None and self._witness >= lo:
            witness, best = self._scan(self._hi, hi, self._witness, self._best)
        else:
            self.rescans += 1
            witness, best = self._scan(lo, hi, -1, None)
        self._lo, self._hi, self._witness, self._best = lo, hi, witness, best
        return best


def _combine(x, y, is_max: bool):
    if x is None:
        return y
    if y is None:
        return x
    return max(x, y) if is_max else min(x, y)


def sliding_aggregate(kind: str, trace: Trace, signal: str, window: tuple, times: Sequence[float]) -> list:
    """Windowed Max/Min of ``signal`` at strictly increasing query times.

    The window ``[t+a, t+b]`` is sampled at its left endpoint and at every
    breakpoint inside it.  Results match a naive per-query recomputation
    exactly.
    """
    kind = kind.lower()
    if kind not in ("max", "min"):
        raise ValueError("kind must be 'max' or 'min'")
    a, b = window
    if a > b:
        raise ContractError(f"malformed window [{a}, {b}]")
    column = trace.column(signal)
    slide = SlidingExtremum(column.__getitem__, kind)
    is_max = kind == "max"
    out = []
    prev = -math.inf
    for t in times:
        if not t > prev:
            raise ContractError("query times must be strictly increasing")
        prev = t
        lo, hi = trace.window_indices(t + a, t + b)
        inner = slide.query(lo, hi)
        out.append(float(_combine(inner, trace.value(signal, t + a), is_max)))
    return out

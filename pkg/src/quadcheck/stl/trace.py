"""Total piecewise-constant traces defined by breakpoints and a default value."""

from __future__ import annotations

import csv
from typing import Mapping, Sequence

import numpy as np

# Slack used when matching window endpoints against breakpoint times.
TIME_TOL = 1e-9


class Trace:
    """Piecewise-constant signal tuple.

    ``values[j]`` holds on ``[times[j], times[j+1])``, the last row holds
    forever, and ``default`` holds before the first breakpoint.
    """

    def __init__(self, times, values, default, names: Sequence[str], tol: float = TIME_TOL):
        self.names = tuple(names)
        if not self.names:
            raise ValueError("a trace needs at least one signal")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate signal names")
        self.times = np.asarray(times, dtype=float).reshape(-1)
        self.values = np.asarray(values, dtype=float).reshape(len(self.times), len(self.names))
        self.default = np.asarray(default, dtype=float).reshape(len(self.names))
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("breakpoint times must be strictly increasing")
        if not np.all(np.isfinite(self.times)):
            raise ValueError("breakpoint times must be finite")
        self.tol = tol
        self._index = {name: k for k, name in enumerate(self.names)}
        self._columns = [self.values[:, k].copy() for k in range(len(self.names))]
        self._times_list = self.times.tolist()

    @classmethod
    def from_columns(cls, times, columns: Mapping[str, Sequence[float]],
                     default: Mapping[str, float] | None = None, tol: float = TIME_TOL) -> "Trace":
        names = list(columns)
        values = np.column_stack([np.asarray(columns[n], dtype=float) for n in names]) if len(times) else \
            np.zeros((0, len(names)))
        default = default or {}
        return cls(times, values, [float(default.get(n, 0.0)) for n in names], names, tol)

    def __len__(self) -> int:
        return len(self.times)

    def __repr__(self) -> str:
        return f"Trace(signals={self.names}, breakpoints={len(self.times)})"

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown signal {name!r}; trace has {self.names}") from None

    def column(self, name: str) -> np.ndarray:
        return self._columns[self.index(name)]

    def position(self, t: float) -> int:
        """Index of the breakpoint governing time ``t`` (-1 for the default)."""
        return int(np.searchsorted(self.times, t + self.tol, side="right")) - 1

    def value(self, name: str, t: float) -> float:
        j = self.position(t)
        k = self.index(name)
        return float(self.default[k] if j < 0 else self._columns[k][j])

    def lookup(self, t: float) -> np.ndarray:
        j = self.position(t)
        return self.default.copy() if j < 0 else self.values[j].copy()

    def window_indices(self, lo: float, hi: float) -> tuple:
        """Half-open index range of breakpoints strictly after ``lo`` and up to ``hi``.

        The left endpoint itself is always sampled separately by the
        evaluator, so breakpoints coinciding with it are excluded.
        """
        i = int(np.searchsorted(self.times, lo + self.tol, side="right"))
        j = int(np.searchsorted(self.times, hi + self.tol, side="right"))
        return i, max(i, j)

    def time_at(self, j: int) -> float:
        return self._times_list[j]

    # -- CSV ---------------------------------------------------------------

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", *self.names])
            w.writerow(["default", *(repr(float(x)) for x in self.default)])
            for t, row in zip(self.times, self.values):
                w.writerow([repr(float(t)), *(repr(float(x)) for x in row)])

    @classmethod
    def read_csv(cls, path, tol: float = TIME_TOL) -> "Trace":
        """Read ``time,<signals...>`` rows; an optional ``default`` row sets the default."""
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        if not rows:
            raise ValueError(f"{path}: empty trace file")
        header = [c.strip() for c in rows[0]]
        if header[0] != "time" or len(header) < 2:
            raise ValueError(f"{path}: header must be 'time,<signal>,...'")
        names = header[1:]
        default = [0.0] * len(names)
        times, values = [], []
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
            if row[0].strip() == "default":
                default = [float(x) for x in row[1:]]
                continue
            times.append(float(row[0]))
            values.append([float(x) for x in row[1:]])
        return cls(times, np.array(values).reshape(len(times), len(names)), default, names, tol)

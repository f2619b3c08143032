"""Random piecewise-constant angular-rate queries and the tracking reward."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import P, Q, R
from .stl.trace import Trace

AXES = ("p", "q", "r")
SINGULARITY_MARGIN = 0.2
MAX_REJECTIONS = 1000


class QueryGenerationError(RuntimeError):
    """Rejection sampling could not find an admissible plateau."""


@dataclass(frozen=True)
class QueryClass:
    """Uniform supports for plateau amplitude, duration and step size."""
    name: str
    amplitude: tuple
    duration: tuple
    step: tuple

    def __post_init__(self):
        for label, (lo, hi) in (("amplitude", self.amplitude), ("duration", self.duration), ("step", self.step)):
            if lo > hi:
                raise ValueError(f"{label} support [{lo}, {hi}] is empty")
        if self.duration[0] <= 0:
            raise ValueError("plateau durations must be positive")
        if self.step[0] < 0:
            raise ValueError("step sizes are magnitudes and must be >= 0")

    @classmethod
    def named(cls, name: str) -> "QueryClass":
        try:
            return PRESETS[name]
        except KeyError:
            raise ValueError(f"unknown query class {name!r}; choose from {sorted(PRESETS)}") from None

    def to_dict(self) -> dict:
        return {"name": self.name, "amplitude": list(self.amplitude),
                "duration": list(self.duration), "step": list(self.step)}

    @classmethod
    def from_dict(cls, data) -> "QueryClass":
        if isinstance(data, str):
            return cls.named(data)
        return cls(data.get("name", "custom"), tuple(data["amplitude"]), tuple(data["duration"]),
                   tuple(data.get("step", (0.0, math.inf))))


EASY = QueryClass("easy", (-0.2, 0.2), (0.5, 0.8), (0.0, 0.3))
MEDIUM = QueryClass("medium", (-0.4, 0.4), (0.2, 0.5), (0.0, 0.6))
HARD = QueryClass("hard", (-0.6, 0.6), (0.1, 0.2), (0.0, 0.9))
# 1 s training episodes: one plateau, then zero
TRAINING = QueryClass("training", (-0.6, 0.6), (0.1, 1.0), (0.0, 1.2))
PRESETS = {c.name: c for c in (EASY, MEDIUM, HARD, TRAINING)}


@dataclass(frozen=True)
class QuerySignal:
    """Per-axis setpoint breakpoints; each axis is 0 before its first breakpoint."""
    times: tuple      # per axis, 1-D arrays of plateau start times
    values: tuple     # per axis, plateau values
    horizon: float

    def axis_trace(self, axis: str) -> Trace:
        k = AXES.index(axis)
        return Trace(self.times[k], np.reshape(self.values[k], (-1, 1)), [0.0], [f"{axis}_sp"])

    def at(self, t: float) -> np.ndarray:
        out = np.zeros(3)
        for k in range(3):
            j = int(np.searchsorted(self.times[k], t, side="right")) - 1
            if j >= 0:
                out[k] = self.values[k][j]
        return out

    def plateaus(self, axis: str) -> list:
        """(start, duration, value) for every plateau of ``axis`` (last one truncated at the horizon)."""
        k = AXES.index(axis)
        starts = list(self.times[k])
        ends = starts[1:] + [self.horizon]
        return [(s, e - s, float(v)) for s, e, v in zip(starts, ends, self.values[k])]

    def to_trace(self) -> Trace:
        """All three axes on the union of their breakpoints."""
        times = np.unique(np.concatenate(self.times))
        values = np.array([self.at(t) for t in times]).reshape(len(times), 3)
        return Trace(times, values, [0.0, 0.0, 0.0], [f"{a}_sp" for a in AXES])

    def to_csv(self, path) -> None:
        self.to_trace().to_csv(path)


def _sample_axis(cls: QueryClass, horizon: float, rng: np.random.Generator, track_angle: bool,
                 single_plateau: bool, max_rejections: int):
    limit = math.pi / 2 - SINGULARITY_MARGIN
    times, values = [], []
    t, previous, angle = 0.0, 0.0, 0.0
    while t < horizon:
        for _ in range(max_rejections):
            duration = float(rng.uniform(*cls.duration))
            value = float(rng.uniform(*cls.amplitude))
            step = abs(value - previous)
            if not cls.step[0] <= step <= cls.step[1]:
                continue
            # crude Euler-angle estimate from integrating the requested rate
            if track_angle and abs(angle + value * min(duration, horizon - t)) > limit:
                continue
            break
        else:
            raise QueryGenerationError(
                f"no admissible plateau after {max_rejections} attempts at t={t:.3f} (class {cls.name})")
        times.append(t)
        values.append(value)
        angle += value * min(duration, horizon - t)
        previous = value
        t += duration
        if single_plateau:
            if t < horizon:
                times.append(t)
                values.append(0.0)
            break
    return np.array(times), np.array(values)


def sample_query(cls: QueryClass | str, horizon: float, rng: np.random.Generator,
                 single_plateau: bool = False, max_rejections: int = MAX_REJECTIONS) -> QuerySignal:
    """Independent random plateau sequences on the p, q and r axes.

    Roll and pitch plateaus are rejected when the integrated rate would push
    the corresponding Euler angle past pi/2 - 0.2 rad.  With
    ``single_plateau`` each axis gets one plateau followed by zero, the
    training-episode shape.
    """
    if isinstance(cls, str):
        cls = QueryClass.named(cls)
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    axes = [_sample_axis(cls, horizon, rng, axis != "r", single_plateau, max_rejections) for axis in AXES]
    return QuerySignal(tuple(a[0] for a in axes), tuple(a[1] for a in axes), float(horizon))


@dataclass(frozen=True)
class RewardParams:
    omega_max: float = 0.6

    def __post_init__(self):
        if not self.omega_max > 0:
            raise ValueError("omega_max must be positive")


def reward(state, setpoint, params: RewardParams = RewardParams()) -> float:
    """Negative clipped distance between target and actual body rates, in [-1, 0]."""
    omega = np.array([state[P], state[Q], state[R]], dtype=float)
    dist = math.hypot(*(np.asarray(setpoint, dtype=float) - omega))   # no underflow on tiny errors
    return -min(1.0, dist / (3.0 * params.omega_max))

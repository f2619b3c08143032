"""Non-nominal conditions: partial power loss on motor 1 and discrete wind gusts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import QuadParams

SCENARIO_MODES = ("nominal", "saturation", "wind")


@dataclass(frozen=True)
class MotorFailure:
    factor: float
    affected_motor: int = 1

    def __post_init__(self):
        if not 0.8 <= self.factor <= 1.0:
            raise ValueError(f"failure factor must lie in [0.8, 1.0], got {self.factor}")
        if self.affected_motor != 1:
            raise ValueError("only motor 1 can fail")


@dataclass(frozen=True)
class GustSpec:
    amplitude: float
    delta: float
    t0: float
    direction: tuple

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("gust amplitude must be >= 0")
        if not self.delta > 0:
            raise ValueError("gust half-life must be > 0")
        if len(self.direction) != 3 or abs(math.sqrt(sum(c * c for c in self.direction)) - 1.0) > 1e-9:
            raise ValueError("gust direction must be a unit 3-vector")

    @property
    def end(self) -> float:
        return self.t0 + 2.0 * self.delta


def apply_saturation(pwm, failure: MotorFailure | None = None, params: QuadParams = QuadParams()) -> np.ndarray:
    """Clip every PWM to [0, p_max]; the failed motor is capped at factor * p_max."""
    upper = np.full(4, params.p_max)
    if failure is not None:
        upper[failure.affected_motor - 1] = failure.factor * params.p_max
    return np.clip(np.asarray(pwm, dtype=float), 0.0, upper)


def gust_velocity(t: float, gust: GustSpec) -> np.ndarray:
    if gust.t0 <= t <= gust.end:
        scale = 0.5 * gust.amplitude * (1.0 - math.cos(math.pi * (t - gust.t0) / gust.delta))
        return scale * np.asarray(gust.direction, dtype=float)
    return np.zeros(3)


def sample_direction(rng: np.random.Generator) -> tuple:
    while True:
        v = rng.standard_normal(3)
        n = float(np.linalg.norm(v))
        if n > 1e-12:
            return tuple(float(c) for c in v / n)


def sample_gust(rng: np.random.Generator, max_magnitude: float, t0: float = 0.0,
                delta_range: tuple = (0.5, 2.0)) -> GustSpec:
    if max_magnitude < 0:
        raise ValueError("max_magnitude must be >= 0")
    amplitude = float(rng.uniform(0.0, max_magnitude)) if max_magnitude > 0 else 0.0
    delta = float(rng.uniform(*delta_range))
    return GustSpec(amplitude, delta, float(t0), sample_direction(rng))


def sample_failure(rng: np.random.Generator, factor_range: tuple = (0.8, 1.0)) -> MotorFailure:
    lo, hi = factor_range
    return MotorFailure(float(rng.uniform(lo, hi)) if hi > lo else float(lo))


class WindSchedule:
    """Sequence of non-overlapping gusts over an episode."""

    def __init__(self, gusts=()):
        self.gusts = sorted(gusts, key=lambda g: g.t0)

    def velocity(self, t: float) -> np.ndarray:
        for g in self.gusts:
            if g.t0 <= t <= g.end:
                return gust_velocity(t, g)
        return np.zeros(3)

    def current(self, t: float) -> GustSpec | None:
        """Most recently started gust at time ``t`` (None before the first)."""
        latest = None
        for g in self.gusts:
            if g.t0 <= t:
                latest = g
        return latest

    @classmethod
    def at_onsets(cls, rng: np.random.Generator, onsets, max_magnitude: float,
                  delta_range: tuple = (0.5, 2.0)) -> "WindSchedule":
        """Start a gust at each onset time unless the previous one is still blowing."""
        gusts = []
        busy_until = -math.inf
        for t0 in sorted(onsets):
            if t0 <= busy_until:
                continue
            g = sample_gust(rng, max_magnitude, t0, delta_range)
            gusts.append(g)
            busy_until = g.end
        return cls(gusts)


@dataclass
class Scenario:
    mode: str = "nominal"
    saturation_range: tuple = (0.8, 1.0)
    gust_cap: float = 10.0
    gust_delta_range: tuple = (0.5, 2.0)
    # rotor drag; None means "only in wind mode"
    aerodynamics: bool | None = None

    def __post_init__(self):
        if self.mode not in SCENARIO_MODES:
            raise ValueError(f"scenario mode must be one of {SCENARIO_MODES}, got {self.mode!r}")
        self.saturation_range = tuple(float(x) for x in self.saturation_range)
        self.gust_delta_range = tuple(float(x) for x in self.gust_delta_range)
        lo, hi = self.saturation_range
        if not 0.8 <= lo <= hi <= 1.0:
            raise ValueError("saturation range must satisfy 0.8 <= lo <= hi <= 1.0")
        if self.gust_cap < 0:
            raise ValueError("gust cap must be >= 0")

    @property
    def aero_enabled(self) -> bool:
        return self.mode == "wind" if self.aerodynamics is None else bool(self.aerodynamics)

    @classmethod
    def from_dict(cls, d) -> "Scenario":
        if isinstance(d, str):
            return cls(d)
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "saturation_range": list(self.saturation_range),
            "gust_cap": self.gust_cap,
            "gust_delta_range": list(self.gust_delta_range),
            "aerodynamics": self.aerodynamics,
        }

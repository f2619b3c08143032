"""Step-response properties (overshoot, offset, rising time) as logic observers.

Each property is evaluated per axis over a two-signal trace: ``x`` is the
measured body rate and ``q`` the requested one.  Statistics are collected
at the instants where the query becomes stable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .stl.evaluator import Evaluator
from .stl.parser import Specification, parse
from .stl.trace import TIME_TOL, Trace

AXES = ("p", "q", "r")
TABLE_COLUMNS = ("ok_rising", "ok_offset", "ok_overshoot",
                 "avg_rising", "avg_offset", "avg_overshoot",
                 "max_rising", "max_offset", "max_overshoot")


@dataclass(frozen=True)
class ObserverParams:
    alpha: float = 0.10
    beta: float = 0.05
    gamma: float = 0.05
    T: float = 0.5
    T1: float = 0.25
    epsilon: float = 0.01
    d: float = 0.005

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if not self.T1 < self.T:
            raise ValueError("T1 must be smaller than T")

    @classmethod
    def from_dict(cls, data: dict) -> "ObserverParams":
        return cls(**data)


OBSERVER_SOURCE = """
stable := (On[0,T] Max q) - (On[0,T] Min q) < d
becomesstable := (D[-epsilon]^false !stable) & stable
up := q - D[-epsilon]^0 q > 0
down := q - D[-epsilon]^0 q <= 0
stepsize := ite(becomesstable, q - D[-epsilon]^0 q, 0)
stepmag := abs(stepsize)

overshoot_up_value := On[0,T1] Max (x - q)
overshoot_down_value := On[0,T1] Max (q - x)
offset_value := On[T1,T] Max abs(x - q)

overshoot_up := becomesstable & up -> overshoot_up_value < alpha * stepmag
overshoot_down := becomesstable & down -> overshoot_down_value < alpha * stepmag
overshoot := overshoot_up & overshoot_down
offset := becomesstable -> offset_value < beta * stepmag
reached_at := time U[0,T]^inf (abs(x - q) < gamma * abs(q))
rising_time := ite(becomesstable, reached_at - time, inf)
"""


def build_observers(params: ObserverParams = ObserverParams(), episode_length: float | None = None) -> Specification:
    """Parse the observer definitions over signals ``x`` and ``q``.

    With ``episode_length`` the overshoot and offset properties are also
    provided wrapped in ``G[0, episode_length]`` as ``G_overshoot`` etc.
    """
    source = OBSERVER_SOURCE
    constants = asdict(params)
    if episode_length is not None:
        constants["L"] = float(episode_length)
        source += "\n".join(f"G_{name} := G[0,L] {name}"
                            for name in ("overshoot_up", "overshoot_down", "overshoot", "offset")) + "\n"
    return parse(source, signals=("x", "q"), constants=constants)


@dataclass(frozen=True)
class PlateauRecord:
    axis: str
    time: float
    setpoint: float
    step: float
    overshoot: float        # % of |step|, clipped below at 0; NaN when step is 0
    offset: float           # % of |step|; NaN when step is 0
    rising_time: float      # seconds, inf when the band is never reached within T
    ok_overshoot: bool
    ok_offset: bool
    ok_rising: bool
    rho_overshoot: float
    rho_offset: float


def _nan_stats(values) -> tuple:
    values = [v for v in values if not math.isnan(v)]
    if not values:
        return math.nan, math.nan
    return float(np.mean(values)), float(np.max(values))


def _pct(flags) -> float:
    flags = list(flags)
    return 100.0 * sum(flags) / len(flags) if flags else math.nan


@dataclass
class EpisodeMetrics:
    records: list = field(default_factory=list)

    @property
    def plateaus(self) -> int:
        return len(self.records)

    @property
    def empty(self) -> bool:
        return not self.records

    def summary(self, axis: str | None = None) -> dict:
        """Table columns over the plateaus of ``axis`` (all axes when None); NaN when none."""
        recs = [r for r in self.records if axis is None or r.axis == axis]
        stepped = [r for r in recs if r.step != 0]
        rising = [r.rising_time for r in recs if math.isfinite(r.rising_time)]
        avg_rt, max_rt = _nan_stats(rising)
        avg_ov, max_ov = _nan_stats(r.overshoot for r in stepped)
        avg_off, max_off = _nan_stats(r.offset for r in stepped)
        return {
            "ok_rising": _pct(r.ok_rising for r in recs),
            "ok_offset": _pct(r.ok_offset for r in stepped),
            "ok_overshoot": _pct(r.ok_overshoot for r in stepped),
            "avg_rising": avg_rt, "avg_offset": avg_off, "avg_overshoot": avg_ov,
            "max_rising": max_rt, "max_offset": max_off, "max_overshoot": max_ov,
            "plateaus": len(recs),
        }

    def write_detail_csv(self, path) -> None:
        names = list(PlateauRecord.__dataclass_fields__)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for r in self.records:
                w.writerow([_fmt(getattr(r, n)) for n in names])


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def stable_instants(times, q, params: ObserverParams, horizon: float) -> list:
    """Candidate instants for ``becomesstable``: first sample and every change of ``q``.

    Between changes of ``q`` the stability window only loses old values on
    the left, so the property cannot switch from false to true there.
    Instants whose window runs past the horizon are dropped.
    """
    times = np.asarray(times, dtype=float)
    q = np.asarray(q, dtype=float)
    if len(times) == 0:
        return []
    change = np.flatnonzero(np.diff(q) != 0) + 1
    idx = np.concatenate([[0], change])
    return [float(times[i]) for i in idx if times[i] + params.T <= horizon + TIME_TOL]


def axis_records(axis: str, trace: Trace, params: ObserverParams, spec: Specification,
                 horizon: float) -> list:
    """Per-plateau records for one axis of a two-signal (x, q) trace."""
    ev = Evaluator(trace)
    out = []
    for t in stable_instants(trace.times, trace.column("q"), params, horizon):
        if not ev.sat(spec["becomesstable"], t):
            continue
        step = ev.term(spec["stepsize"], t)
        setpoint = trace.value("q", t)
        up = ev.sat(spec["up"], t)
        raw_overshoot = ev.term(spec["overshoot_up_value" if up else "overshoot_down_value"], t)
        raw_offset = ev.term(spec["offset_value"], t)
        rising = ev.term(spec["rising_time"], t)
        rho_ov = ev.robust(spec["overshoot"], t)
        rho_off = ev.robust(spec["offset"], t)
        mag = abs(step)
        out.append(PlateauRecord(
            axis=axis, time=t, setpoint=setpoint, step=step,
            overshoot=100.0 * max(raw_overshoot, 0.0) / mag if mag else math.nan,
            offset=100.0 * raw_offset / mag if mag else math.nan,
            rising_time=rising,
            ok_overshoot=rho_ov > 0,
            ok_offset=rho_off > 0,
            ok_rising=math.isfinite(rising),
            rho_overshoot=rho_ov,
            rho_offset=rho_off,
        ))
    return out


def axis_trace(times, x, q) -> Trace:
    return Trace(times, np.column_stack([x, q]), [0.0, 0.0], ("x", "q"))


def episode_metrics(trace: Trace, params: ObserverParams = ObserverParams(), horizon: float | None = None,
                    axes=AXES, spec: Specification | None = None) -> EpisodeMetrics:
    """Observer statistics for an episode trace holding ``<axis>`` and ``<axis>_sp`` signals."""
    if horizon is None:
        horizon = float(trace.times[-1]) if len(trace) else 0.0
    spec = spec or build_observers(params)
    records = []
    for axis in axes:
        sub = axis_trace(trace.times, trace.column(axis), trace.column(f"{axis}_sp"))
        records.extend(axis_records(axis, sub, params, spec, horizon))
    return EpisodeMetrics(records)


def aggregate_runs(episodes, axis: str | None = None) -> dict:
    """Per-episode averages of the table columns (episodes without plateaus are skipped)."""
    episodes = list(episodes)
    if not episodes:
        raise ValueError("aggregate_runs needs at least one episode")
    summaries = [e.summary(axis) if isinstance(e, EpisodeMetrics) else e for e in episodes]
    out = {}
    for col in TABLE_COLUMNS:
        vals = np.array([s[col] for s in summaries], dtype=float)
        vals = vals[~np.isnan(vals)]
        out[col] = float(np.mean(vals)) if len(vals) else math.nan
    out["episodes"] = len(summaries)
    out["plateaus"] = int(sum(s["plateaus"] for s in summaries))
    return out

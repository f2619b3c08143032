"""Closed-loop episodes, evaluation campaigns, report assembly and a stepping environment."""

from __future__ import annotations

import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from .controllers import (OBSERVATION_DIMS, MlpPolicy, PidState, build_observation, load_policy,
                          pid1_step, policy_from_dict, policy_step, PID_STEPS)
from .faults import MotorFailure, Scenario, WindSchedule, apply_saturation, sample_failure
from .observers import (AXES, TABLE_COLUMNS, ObserverParams, aggregate_runs,
                        build_observers, episode_metrics)
from .queries import TRAINING, QueryClass, QuerySignal, RewardParams, reward, sample_query
from .stl.trace import Trace

ANGLE_BOUND = math.pi
RATE_BOUND = 5 * math.pi
ACTION_SCALE = np.array([dyn.CMD_ATTITUDE_BOUND, dyn.CMD_ATTITUDE_BOUND, dyn.CMD_YAW_BOUND])
SETPOINT_COLUMNS = ("p_sp", "q_sp", "r_sp")
COMMAND_COLUMNS = ("thrust", "cmd_phi", "cmd_theta", "cmd_psi")
WIND_COLUMNS = ("wind_x", "wind_y", "wind_z")
TRACE_COLUMNS = (*dyn.STATE_FIELDS, *SETPOINT_COLUMNS, *COMMAND_COLUMNS, "reward", *WIND_COLUMNS)


class SessionError(RuntimeError):
    """Stepping interface used out of order (e.g. step after the episode ended)."""


@dataclass
class EpisodeConfig:
    controller: str = "pid2"
    query_class: str | dict = "medium"
    horizon: float = 20.0
    scenario: Scenario = field(default_factory=Scenario)
    seed: int = 0
    control_period: float = 0.03
    sim_step: float = 0.01
    init_angle: float = 0.1       # angles ~ U[-init_angle, init_angle] (rad)
    init_rate: float = 0.3        # body rates ~ U[-init_rate, init_rate] (rad/s)
    init_velocity: float = 0.0    # body velocities ~ U[-init_velocity, init_velocity] (m/s)
    z0: float = 0.0
    z_setpoint: float = 0.0
    single_plateau: bool = False
    policy: dict | None = None    # inline weights, used when controller == "mlp"
    params: dict | None = None    # overrides of the physical parameters
    reward_omega_max: float = 0.6

    def __post_init__(self):
        if isinstance(self.scenario, (dict, str)):
            self.scenario = Scenario.from_dict(self.scenario)
        if not (self.sim_step > 0 and self.control_period > 0 and self.horizon > 0):
            raise ValueError("horizon, control period and sim step must be positive")
        ratio = self.control_period / self.sim_step
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("control period must be an integer multiple of the sim step")
        if not 0 <= self.init_angle <= ANGLE_BOUND or not 0 <= self.init_rate <= RATE_BOUND:
            raise ValueError("initial-state ranges exceed the state bounds")
        kind = self.controller_kind
        if kind not in ("pid1", "pid2", "mlp"):
            raise ValueError(f"unknown controller {self.controller!r}; use pid1, pid2 or mlp:<path>")
        if kind == "mlp" and self.policy is None and not self.controller.startswith("mlp:"):
            raise ValueError("mlp controller needs a weights path (mlp:<path>) or inline policy")
        QueryClass.from_dict(self.query_class)

    @property
    def controller_kind(self) -> str:
        return self.controller.split(":", 1)[0]

    @property
    def substeps(self) -> int:
        return int(round(self.control_period / self.sim_step))

    def quad_params(self) -> dyn.QuadParams:
        return dyn.QuadParams.from_dict(self.params) if self.params else dyn.QuadParams()

    def load_policy(self) -> MlpPolicy | None:
        if self.controller_kind != "mlp":
            return None
        if self.policy is not None:
            return policy_from_dict(self.policy)
        return load_policy(self.controller.split(":", 1)[1])

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["scenario"] = self.scenario.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "EpisodeConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_json(cls, path) -> "EpisodeConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def episode_seed(master: int, index: int) -> int:
    """Counter-based per-episode seed, independent of scheduling order."""
    return int(np.random.SeedSequence([master, index]).generate_state(1, np.uint64)[0])


def episode_streams(seed: int):
    """Independent generators for queries, initial state and faults."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]


def sample_initial_state(config: EpisodeConfig, rng: np.random.Generator) -> np.ndarray:
    angles = rng.uniform(-config.init_angle, config.init_angle, 3)
    rates = rng.uniform(-config.init_rate, config.init_rate, 3)
    vel = rng.uniform(-config.init_velocity, config.init_velocity, 3)
    return dyn.make_state(z=config.z0, u=vel[0], v=vel[1], w=vel[2], phi=angles[0], theta=angles[1],
                          psi=angles[2], p=rates[0], q=rates[1], r=rates[2])


class Plant:
    """Quadcopter plus fault injection, advanced with commands held per control period."""

    def __init__(self, state, params: dyn.QuadParams = dyn.QuadParams(), failure: MotorFailure | None = None,
                 wind: WindSchedule | None = None, aero: bool = False,
                 aero_params: dyn.AeroParams = dyn.AeroParams(), t: float = 0.0):
        self.state = np.asarray(state, dtype=float).copy()
        self.params = params
        self.failure = failure
        self.wind = wind or WindSchedule()
        self.aero = aero
        self.aero_params = aero_params
        self.t = t

    def rotor_speeds(self, cmd: dyn.Command) -> np.ndarray:
        pwm = apply_saturation(dyn.mix_pwm(cmd.clamped()), self.failure, self.params)
        return dyn.pwm_to_omega(pwm, self.params)

    def _wrench_fn(self, omegas):
        F, Mx, My, Mz = dyn.rotor_wrench(omegas, self.params)
        if not self.aero:
            fixed = dyn.WrenchInput(F, Mx, My, Mz)
            return lambda t, x: fixed

        def wrench(t, x):
            Fa, Ma = dyn.aero_wrench(x, omegas, self.wind.velocity(t), self.aero_params, self.params)
            return dyn.WrenchInput(F, Mx, My, Mz, Fa, Ma)
        return wrench

    def prepare(self, cmd: dyn.Command):
        """Wrench provider for a command held over the next steps."""
        return self._wrench_fn(self.rotor_speeds(cmd))

    def step(self, wrench_fn, dt: float) -> np.ndarray:
        """One RK4 step; SingularAttitudeError leaves the state untouched."""
        nxt = dyn.rk4_step(self.state, wrench_fn, dt, self.params, self.t)
        if not np.all(np.isfinite(nxt)):
            raise dyn.SingularAttitudeError(f"non-finite state at t={self.t + dt:.4f}")
        dyn.check_attitude(nxt[dyn.THETA])
        self.state = nxt
        self.t = round(self.t + dt, 12)
        return nxt

    def advance(self, cmd: dyn.Command, dt: float, steps: int) -> np.ndarray:
        fn = self.prepare(cmd)
        for _ in range(steps):
            self.step(fn, dt)
        return self.state


class Controller:
    """Uniform per-tick interface over the PID and MLP controllers."""

    def __init__(self, config: EpisodeConfig, policy: MlpPolicy | None = None):
        self.kind = config.controller_kind
        self.policy = policy if policy is not None else config.load_policy()
        self.z_sp = config.z_setpoint
        self.dt = config.control_period
        self.pid = PidState()
        self.altitude = PidState()

    @property
    def observation_kind(self) -> str:
        return self.policy.observation if self.policy is not None else "dim7"

    def reset(self) -> None:
        self.pid.reset()
        self.altitude.reset()

    def altitude_thrust(self, state, sp, commit: bool = True) -> float:
        pid = self.altitude if commit else PidState(self.altitude.integral.copy(), self.altitude.previous)
        return pid1_step(state, sp, pid, self.dt).thrust

    def command(self, plant: Plant, setpoint):
        """Command for this tick and the observation the policy saw (None for PIDs)."""
        sp = (self.z_sp, *(float(s) for s in setpoint))
        if self.kind != "mlp":
            return PID_STEPS[self.kind](plant.state, sp, self.pid, self.dt), None
        thrust = self.altitude_thrust(plant.state, sp)
        obs = build_observation(self.observation_kind, plant.state, setpoint, thrust,
                                plant.failure, plant.wind.current(plant.t), gust_known=True)
        a = policy_step(self.policy, obs)
        return dyn.Command(thrust, float(a[0]), float(a[1]), float(a[2])), obs


@dataclass
class EpisodeTrace:
    trace: Trace
    observations: np.ndarray
    query: QuerySignal
    config: EpisodeConfig
    failure: MotorFailure | None = None
    gusts: tuple = ()
    fault: dict | None = None

    @property
    def horizon(self) -> float:
        return float(self.trace.times[-1])

    @property
    def completed(self) -> bool:
        return self.fault is None

    def to_csv(self, path) -> None:
        self.trace.to_csv(path)


def _episode_setup(config: EpisodeConfig, policy: MlpPolicy | None = None):
    params = config.quad_params()
    rng_query, rng_init, rng_fault = episode_streams(config.seed)
    cls = QueryClass.from_dict(config.query_class)
    query = sample_query(cls, config.horizon, rng_query, single_plateau=config.single_plateau)
    state = sample_initial_state(config, rng_init)
    scenario = config.scenario
    failure = sample_failure(rng_fault, scenario.saturation_range) if scenario.mode == "saturation" else None
    wind = WindSchedule()
    if scenario.mode == "wind":
        onsets = sorted(set(float(t) for axis in query.times for t in axis))
        wind = WindSchedule.at_onsets(rng_fault, onsets, scenario.gust_cap, scenario.gust_delta_range)
    plant = Plant(state, params, failure, wind, scenario.aero_enabled)
    return plant, query, Controller(config, policy)


def run_episode(config: EpisodeConfig, policy: MlpPolicy | None = None) -> EpisodeTrace:
    """Closed-loop simulation on the ``sim_step`` grid.

    Commands are computed at every control tick and held for
    ``control_period``.  A singular attitude ends the episode early: the
    trace stops at the last valid state and ``fault`` records the time.
    """
    plant, query, ctrl = _episode_setup(config, policy)
    dt, sub = config.sim_step, config.substeps
    n_grid = int(round(config.horizon / dt))
    rparams = RewardParams(config.reward_omega_max)
    rows, observations = [], []
    fault = None

    def record(k, setpoint, cmd_row):
        t = round(k * dt, 10)
        s = plant.state
        rows.append([t, *s, *setpoint, *cmd_row, reward(s, setpoint, rparams), *plant.wind.velocity(t)])

    k = 0
    while k < n_grid and fault is None:
        setpoint = query.at(k * dt + 1e-12)
        cmd, obs = ctrl.command(plant, setpoint)
        if obs is not None:
            observations.append(obs)
        cmd_row = cmd.clamped().as_array()
        fn = plant.prepare(cmd)
        for _ in range(min(sub, n_grid - k)):
            record(k, setpoint, cmd_row)
            try:
                plant.step(fn, dt)
            except dyn.SingularAttitudeError as exc:
                fault = {"time": round((k + 1) * dt, 10), "message": str(exc)}
                break
            k += 1
    if fault is None:
        record(n_grid, setpoint, cmd_row)
    data = np.array(rows)
    trace = Trace(data[:, 0], data[:, 1:], np.zeros(len(TRACE_COLUMNS)), TRACE_COLUMNS)
    dim = OBSERVATION_DIMS[ctrl.observation_kind] if ctrl.kind == "mlp" else 0
    obs_arr = np.array(observations).reshape(len(observations), dim)
    return EpisodeTrace(trace, obs_arr, query, config, plant.failure, tuple(plant.wind.gusts), fault)


# -- campaigns ----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _episode_job(args):
    config, index, out_dir, obs_params = args
    row = {"episode": index, "seed": config.seed}
    try:
        ep = run_episode(config)
        horizon = config.horizon if ep.fault is None else ep.horizon
        metrics = episode_metrics(ep.trace, obs_params, horizon)
        if out_dir is not None:
            ep.to_csv(Path(out_dir) / "episodes" / f"episode_{index:04d}.csv")
            metrics.write_detail_csv(Path(out_dir) / "episodes" / f"episode_{index:04d}_plateaus.csv")
        row["status"] = "ok" if ep.fault is None else f"fault@{ep.fault['time']}"
        row.update(metrics.summary())
        return row, metrics
    except Exception as exc:  # reported per episode; the campaign continues
        row["status"] = f"error: {type(exc).__name__}: {exc}"
        row.update({c: math.nan for c in TABLE_COLUMNS}, plateaus=0)
        return row, None


METRIC_FIELDS = ("episode", "seed", "status", "plateaus", *TABLE_COLUMNS)


@dataclass
class CampaignResult:
    report: dict
    rows: list
    metrics: list
    by_axis: dict

    def failures(self) -> list:
        return [r for r in self.rows if r["status"] != "ok"]


def run_campaign(template: EpisodeConfig, n_episodes: int, parallelism: int = 1, out_dir=None,
                 observer_params: ObserverParams = ObserverParams(), master_seed: int | None = None) -> CampaignResult:
    """Run ``n_episodes`` seeded episodes and aggregate their observer statistics.

    Episode ``i`` uses seed ``episode_seed(master_seed, i)`` (master seed
    defaults to the template's seed), so the outcome does not depend on
    ``parallelism``.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    master = template.seed if master_seed is None else master_seed
    configs = [replace(template, seed=episode_seed(master, i)) for i in range(n_episodes)]
    if out_dir is not None:
        out_dir = Path(out_dir)
        (out_dir / "episodes").mkdir(parents=True, exist_ok=True)
        (out_dir / "config.json").write_text(json.dumps(
            {"template": template.to_dict(), "episodes": n_episodes, "master_seed": master,
             "observer": observer_params.__dict__}, indent=2, sort_keys=True) + "\n")
    jobs = [(c, i, out_dir, observer_params) for i, c in enumerate(configs)]
    if parallelism <= 1:
        results = [_episode_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_episode_job, jobs, chunksize=max(1, n_episodes // (4 * parallelism))))
    rows = [r for r, _ in results]
    metrics = [m for _, m in results if m is not None]
    report = aggregate_runs(metrics) if metrics else {c: math.nan for c in TABLE_COLUMNS}
    by_axis = {axis: aggregate_runs(metrics, axis) for axis in AXES} if metrics else {}
    result = CampaignResult(report, rows, metrics, by_axis)
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result


def write_metrics_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_FIELDS)
        for r in rows:
            w.writerow([_fmt(r.get(k, "")) for k in METRIC_FIELDS])


def write_report_csv(report: dict, by_axis: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scope", *TABLE_COLUMNS, "episodes", "plateaus"])
        for scope, rep in [("all", report), *by_axis.items()]:
            w.writerow([scope, *(_fmt(rep.get(c, math.nan)) for c in (*TABLE_COLUMNS, "episodes", "plateaus"))])


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def write_outputs(result: CampaignResult, out_dir) -> None:
    out_dir = Path(out_dir)
    write_metrics_csv(result.rows, out_dir / "metrics.csv")
    write_report_csv(result.report, result.by_axis, out_dir / "report.csv")
    summary = {"report": result.report, "by_axis": result.by_axis,
               "failures": [{"episode": r["episode"], "status": r["status"]} for r in result.failures()]}
    (out_dir / "summary.json").write_text(json.dumps(_json_safe(summary), indent=2, sort_keys=True) + "\n")


def report(run_dir, out_dir=None) -> dict:
    """Recompute the metrics table from the episode traces in ``run_dir``.

    Writes ``report.csv`` and per-episode, per-axis ``(time, x, q)`` series
    under ``plots/``.  Unreadable episode files are listed under
    ``"bad_files"`` and skipped.
    """
    run_dir = Path(run_dir)
    files = sorted(p for p in (run_dir / "episodes").glob("episode_*.csv") if not p.stem.endswith("_plateaus")) \
        if (run_dir / "episodes").is_dir() else []
    if not files:
        raise FileNotFoundError(f"{run_dir}: no episode traces found")
    params = ObserverParams()
    config_path = run_dir / "config.json"
    if config_path.exists():
        params = ObserverParams(**json.loads(config_path.read_text()).get("observer", {}))
    out_dir = Path(out_dir) if out_dir else run_dir
    plots = out_dir / "plots"
    plots.mkdir(parents=True, exist_ok=True)
    spec = build_observers(params)
    metrics, bad = [], []
    for f in files:
        try:
            trace = Trace.read_csv(f)
            m = episode_metrics(trace, params, float(trace.times[-1]), spec=spec)
        except (ValueError, KeyError, OSError) as exc:
            bad.append({"file": f.name, "error": str(exc)})
            continue
        metrics.append(m)
        for axis in AXES:
            with open(plots / f"{f.stem}_{axis}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["time", "x", "q"])
                for t, x, q in zip(trace.times, trace.column(axis), trace.column(f"{axis}_sp")):
                    w.writerow([repr(float(t)), repr(float(x)), repr(float(q))])
    if not metrics:
        raise ValueError(f"{run_dir}: no readable episode traces ({len(bad)} bad files)")
    table = aggregate_runs(metrics)
    by_axis = {axis: aggregate_runs(metrics, axis) for axis in AXES}
    write_report_csv(table, by_axis, out_dir / "report.csv")
    return {"table": table, "by_axis": by_axis, "bad_files": bad}


# -- stepping environment -------------------------------------------------------

def training_config(**overrides) -> EpisodeConfig:
    """1 s episodes with one plateau per axis followed by zero."""
    base = dict(controller="pid2", query_class=TRAINING.to_dict(), horizon=1.0, single_plateau=True)
    base.update(overrides)
    return EpisodeConfig(**base)


class EnvSession:
    """reset()/step() interface over the plant for external trainers.

    Actions are normalized attitude commands in [-1, 1]^3, scaled to the
    action bounds; thrust comes from the altitude PID.
    """

    def __init__(self, config: EpisodeConfig | None = None, observation: str = "dim3"):
        self.config = config or training_config()
        if observation not in OBSERVATION_DIMS:
            raise ValueError(f"unknown observation kind {observation!r}")
        self.observation_kind = observation
        self.rparams = RewardParams(self.config.reward_omega_max)
        self._episodes = 0
        self.plant = None
        self.done = True

    @property
    def observation_dim(self) -> int:
        return OBSERVATION_DIMS[self.observation_kind]

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is None:
            seed = episode_seed(self.config.seed, self._episodes)
        self._episodes += 1
        cfg = replace(self.config, seed=int(seed), controller="pid1", policy=None)
        self.plant, self.query, ctrl = _episode_setup(cfg)
        self.altitude = ctrl
        self.steps = 0
        self.n_steps = int(math.ceil(cfg.horizon / cfg.control_period - 1e-9))
        self.done = False
        self.fault = None
        return self._observation()

    def _setpoint(self):
        return self.query.at(self.plant.t + 1e-12)

    def _observation(self) -> np.ndarray:
        sp = self._setpoint()
        thrust = 0.0
        if self.observation_kind == "dim7":
            # the thrust the altitude loop is about to apply, without advancing it
            thrust = self.altitude.altitude_thrust(self.plant.state, (self.config.z_setpoint, *sp), commit=False)
        return build_observation(self.observation_kind, self.plant.state, sp, thrust,
                                 self.plant.failure, self.plant.wind.current(self.plant.t), gust_known=True)

    def step(self, action):
        if self.plant is None:
            raise SessionError("call reset() before step()")
        if self.done:
            raise SessionError("episode is over; call reset()")
        a = np.clip(np.asarray(action, dtype=float).reshape(3), -1.0, 1.0) * ACTION_SCALE
        sp = self._setpoint()
        thrust = self.altitude.altitude_thrust(self.plant.state, (self.config.z_setpoint, *sp))
        cmd = dyn.Command(thrust, float(a[0]), float(a[1]), float(a[2]))
        info = {}
        try:
            self.plant.advance(cmd, self.config.sim_step, self.config.substeps)
        except dyn.SingularAttitudeError as exc:
            self.fault = {"time": self.plant.t, "message": str(exc)}
            info["fault"] = self.fault
            self.done = True
            return self._observation(), -1.0, True, info
        self.steps += 1
        self.done = self.steps >= self.n_steps
        r = reward(self.plant.state, self._setpoint(), self.rparams)
        info["time"] = self.plant.t
        return self._observation(), r, self.done, info


def serve(session: EnvSession, stdin=None, stdout=None) -> None:
    """Newline-delimited JSON loop.

    Requests: ``{"op": "reset", "seed": 3}``, ``{"op": "step", "action": [..]}``,
    ``{"op": "close"}``.  Every request gets one JSON reply line.
    """
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout

    def reply(obj):
        stdout.write(json.dumps(_json_safe(obj)) + "\n")
        stdout.flush()

    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
            op = msg.get("op")
            if op == "reset":
                obs = session.reset(msg.get("seed"))
                reply({"observation": obs.tolist(), "dim": session.observation_dim})
            elif op == "step":
                obs, r, done, info = session.step(msg["action"])
                reply({"observation": obs.tolist(), "reward": r, "done": done, "info": info})
            elif op == "close":
                reply({"closed": True})
                return
            else:
                reply({"error": f"unknown op {op!r}"})
        except (SessionError, ValueError, KeyError, TypeError) as exc:
            reply({"error": str(exc)})

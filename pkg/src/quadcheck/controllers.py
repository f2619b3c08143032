"""PID attitude/altitude controllers, MLP policies and observation vectors."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dynamics import CMD_ATTITUDE_BOUND, CMD_YAW_BOUND, Command, P, Q, R, U, V, W, Z
from .faults import GustSpec, MotorFailure

OBSERVATION_DIMS = {"dim3": 3, "dim7": 7, "dim3+failure": 4, "dim3+wind": 10}
HIDDEN_WIDTHS = (4, 8, 16, 32, 64)
MAX_HIDDEN_LAYERS = 4
DEFAULT_OUTPUT_SCALE = (CMD_ATTITUDE_BOUND, CMD_ATTITUDE_BOUND, CMD_YAW_BOUND)


class PolicyError(ValueError):
    """Malformed or inconsistent policy weights."""


@dataclass
class PidState:
    """Integral accumulators and previous measurements for channels (z, p, q, r)."""
    integral: np.ndarray = field(default_factory=lambda: np.zeros(4))
    previous: np.ndarray | None = None

    def reset(self) -> None:
        self.integral = np.zeros(4)
        self.previous = None


def _measurements(state) -> np.ndarray:
    return np.array([state[Z], state[P], state[Q], state[R]], dtype=float)


def pid1_step(state, setpoints, pid: PidState, dt: float) -> Command:
    """Crazyflie altitude/attitude PID.  ``setpoints`` is (z_sp, p_sp, q_sp, r_sp)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    z_sp, p_sp, q_sp, r_sp = setpoints
    err = np.array([
        2.0 * (z_sp - state[Z]) - state[W],
        p_sp - state[P],
        q_sp - state[Q],
        r_sp - state[R],
    ])
    pid.integral = pid.integral + err * dt
    pid.previous = _measurements(state)
    i = pid.integral
    return Command(
        1000.0 * (25.0 * err[0] + 15.0 * i[0]) + 36000.0,
        250.0 * err[1] + 500.0 * i[1],
        250.0 * err[2] + 500.0 * i[2],
        120.0 * err[3] + 16.7 * i[3],
    )


def pid2_step(state, setpoints, pid: PidState, dt: float) -> Command:
    """Reactive PID with derivative action on the measured signals.

    Derivatives are backward differences at the control rate (zero on the
    first call after a reset).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    z_sp, p_sp, q_sp, r_sp = setpoints
    meas = _measurements(state)
    err = np.array([z_sp, p_sp, q_sp, r_sp]) - meas
    rate = np.zeros(4) if pid.previous is None else (meas - pid.previous) / dt
    pid.integral = pid.integral + err * dt
    pid.previous = meas
    i = pid.integral
    return Command(
        3000.0 * err[0] + 300.0 * i[0] - 500.0 * rate[0] + 48500.0,
        1000.0 * err[1] + 400.0 * i[1] - 40.0 * rate[1],
        1000.0 * err[2] + 400.0 * i[2] - 40.0 * rate[2],
        2000.0 * err[3] + 1000.0 * i[3] - 100.0 * rate[3],
    )


PID_STEPS = {"pid1": pid1_step, "pid2": pid2_step}


@dataclass(frozen=True)
class MlpPolicy:
    weights: tuple
    biases: tuple
    hidden_activation: str = "relu"
    output_activation: str = "tanh"
    output_scale: tuple = DEFAULT_OUTPUT_SCALE
    observation: str = "dim3"

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def to_dict(self) -> dict:
        return {
            "layers": [{"w": w.tolist(), "b": b.tolist()} for w, b in zip(self.weights, self.biases)],
            "hidden_activation": self.hidden_activation,
            "output_activation": self.output_activation,
            "output_scale": list(self.output_scale),
            "observation": self.observation,
        }


def policy_from_dict(data: dict) -> MlpPolicy:
    try:
        layers = data["layers"]
        weights = tuple(np.asarray(layer["w"], dtype=float) for layer in layers)
        biases = tuple(np.asarray(layer["b"], dtype=float) for layer in layers)
    except (KeyError, TypeError, ValueError) as exc:
        raise PolicyError(f"malformed layer list: {exc}") from exc
    hidden = data.get("hidden_activation", "relu")
    output = data.get("output_activation", "tanh")
    if hidden != "relu":
        raise PolicyError(f"unknown hidden activation {hidden!r}")
    if output != "tanh":
        raise PolicyError(f"unknown output activation {output!r}")
    observation = data.get("observation", "dim3")
    if observation not in OBSERVATION_DIMS:
        raise PolicyError(f"unknown observation kind {observation!r}")
    scale = tuple(float(s) for s in data.get("output_scale", DEFAULT_OUTPUT_SCALE))
    if len(scale) != 3:
        raise PolicyError("output_scale must have 3 entries")

    if not weights:
        raise PolicyError("policy needs at least one layer")
    if len(weights) - 1 > MAX_HIDDEN_LAYERS:
        raise PolicyError(f"at most {MAX_HIDDEN_LAYERS} hidden layers are supported")
    for k, (w, b) in enumerate(zip(weights, biases)):
        if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
            raise PolicyError(f"layer {k}: weight {w.shape} and bias {b.shape} do not match")
        if k > 0 and weights[k - 1].shape[1] != w.shape[0]:
            raise PolicyError(
                f"layer {k}: input width {w.shape[0]} does not chain with previous output {weights[k - 1].shape[1]}")
        if k < len(weights) - 1 and w.shape[1] not in HIDDEN_WIDTHS:
            raise PolicyError(f"hidden width {w.shape[1]} not in {HIDDEN_WIDTHS}")
    if weights[-1].shape[1] != 3:
        raise PolicyError(f"output dimension must be 3, got {weights[-1].shape[1]}")
    if weights[0].shape[0] != OBSERVATION_DIMS[observation]:
        raise PolicyError(
            f"input width {weights[0].shape[0]} does not match observation {observation!r}")
    return MlpPolicy(weights, biases, hidden, output, scale, observation)


def load_policy(path) -> MlpPolicy:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise PolicyError(f"{path}: {exc}") from exc
    return policy_from_dict(data)


def policy_step(policy: MlpPolicy, obs) -> np.ndarray:
    """Scaled attitude commands (cmd_phi, cmd_theta, cmd_psi)."""
    x = np.asarray(obs, dtype=float)
    if x.shape != (policy.input_dim,):
        raise PolicyError(f"observation shape {x.shape} does not match input width {policy.input_dim}")
    last = len(policy.weights) - 1
    for k, (w, b) in enumerate(zip(policy.weights, policy.biases)):
        x = x @ w + b
        x = np.tanh(x) if k == last else np.maximum(x, 0.0)
    return x * np.asarray(policy.output_scale)


def random_policy(rng: np.random.Generator, hidden=(16, 16), observation: str = "dim3",
                  scale: float = 0.5) -> MlpPolicy:
    """Fixed random network, used as a stand-in for trained weights."""
    dims = [OBSERVATION_DIMS[observation], *hidden, 3]
    weights = tuple(rng.normal(0.0, scale, size=(a, b)) for a, b in zip(dims[:-1], dims[1:]))
    biases = tuple(rng.normal(0.0, 0.1 * scale, size=b) for b in dims[1:])
    return policy_from_dict(MlpPolicy(weights, biases, observation=observation).to_dict())


def proportional_policy(observation: str = "dim3", gain=(2.5, 2.5, 2.0), width: int = 8,
                        rng: np.random.Generator | None = None, noise: float = 0.0) -> MlpPolicy:
    """One-hidden-layer ReLU network computing ``scale * tanh(gain * error)``.

    The rate errors pass through ``relu(e) - relu(-e)``, so the network is
    an exact proportional controller before the optional Gaussian
    ``noise`` is added to every weight.  Inputs other than the three
    errors get zero weight.
    """
    if width not in HIDDEN_WIDTHS or width < 6:
        raise PolicyError("width must be an allowed hidden width of at least 6")
    dim = OBSERVATION_DIMS[observation]
    offset = 4 if observation == "dim7" else 0   # errors follow (thrust, p, q, r)
    w1 = np.zeros((dim, width))
    w2 = np.zeros((width, 3))
    for k in range(3):
        w1[offset + k, 2 * k] = 1.0
        w1[offset + k, 2 * k + 1] = -1.0
        w2[2 * k, k] = gain[k]
        w2[2 * k + 1, k] = -gain[k]
    b1, b2 = np.zeros(width), np.zeros(3)
    if rng is not None and noise > 0:
        w1 = w1 + rng.normal(0.0, noise, w1.shape)
        w2 = w2 + rng.normal(0.0, noise, w2.shape)
        if observation == "dim7":
            w1[0] = 0.0   # keep the raw thrust input from swamping the net
    return policy_from_dict(MlpPolicy((w1, w2), (b1, b2), observation=observation).to_dict())


def build_observation(kind: str, state, setpoints, last_thrust: float = 0.0,
                      failure: MotorFailure | None = None, gust: GustSpec | None = None,
                      gust_known: bool = False) -> np.ndarray:
    """Observation vector for ``kind``.

    ``setpoints`` holds the angular-rate targets (p_sp, q_sp, r_sp).  The
    wind variant needs ``gust`` or ``gust_known=True`` (calm air before the
    first gust is encoded as zeros).
    """
    if kind not in OBSERVATION_DIMS:
        raise ValueError(f"unknown observation kind {kind!r}")
    p_sp, q_sp, r_sp = setpoints
    p, q, r = float(state[P]), float(state[Q]), float(state[R])
    errors = [p_sp - p, q_sp - q, r_sp - r]
    if kind == "dim3":
        out = errors
    elif kind == "dim7":
        out = [last_thrust, p, q, r, *errors]
    elif kind == "dim3+failure":
        if failure is None:
            raise ValueError("dim3+failure observation needs the motor failure factor")
        out = [*errors, failure.factor]
    else:
        if gust is None and not gust_known:
            raise ValueError("dim3+wind observation needs gust information")
        gust_part = [0.0, 0.0, 0.0, 0.0] if gust is None else [gust.amplitude, *gust.direction]
        out = [*errors, *gust_part, float(state[U]), float(state[V]), float(state[W])]
    return np.array(out, dtype=float)

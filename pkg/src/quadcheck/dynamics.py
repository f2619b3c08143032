"""
Crazyflie 2.0 rigid-body model.

State vector layout (length 10):
  x[0]     = z              altitude                 (m)
  x[1:4]   = [u, v, w]      body-frame velocities    (m/s)
  x[4:7]   = [phi, theta, psi]  Euler angles         (rad)
  x[7:10]  = [p, q, r]      body angular rates       (rad/s)

Motor PWMs are obtained from the four abstract commands (thrust, cmd_phi,
cmd_theta, cmd_psi) by a fixed mixing matrix, mapped affinely to rotor
speeds, and turned into a total thrust and three body moments.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Callable, Sequence

import numpy as np

STATE_FIELDS = ("z", "u", "v", "w", "phi", "theta", "psi", "p", "q", "r")
Z, U, V, W, PHI, THETA, PSI, P, Q, R = range(10)

# Euler singularity guard on |cos(theta)|
COS_THETA_TOL = 1e-6

# Table-2 action bounds
CMD_ATTITUDE_BOUND = 400.0
CMD_YAW_BOUND = 1000.0
THRUST_BOUNDS = (0.0, 52428.0)

MIX_MATRIX = np.array([
    [1.0, -0.5, -0.5, -1.0],
    [1.0, -0.5,  0.5,  1.0],
    [1.0,  0.5,  0.5, -1.0],
    [1.0,  0.5, -0.5,  1.0],
])


class SingularAttitudeError(ArithmeticError):
    """Raised when the pitch angle reaches the Euler-angle singularity."""


def make_state(**values: float) -> np.ndarray:
    """Build a state vector from keyword fields; missing fields are zero."""
    unknown = set(values) - set(STATE_FIELDS)
    if unknown:
        raise ValueError(f"unknown state fields: {sorted(unknown)}")
    return np.array([float(values.get(name, 0.0)) for name in STATE_FIELDS])


@dataclass(frozen=True)
class QuadParams:
    Ix: float = 1.657171e-5
    Iy: float = 1.6655602e-5
    Iz: float = 2.9261652e-5
    m: float = 0.028
    g: float = 9.81
    CT: float = 1.285e-8
    CD: float = 7.645e-11
    C1: float = 0.04076521
    C2: float = 380.8359
    h: float = 0.005
    d: float = 0.046 / math.sqrt(2.0)
    p_max: float = 65535.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"parameter {f.name} must be finite and > 0, got {value}")

    @classmethod
    def from_dict(cls, overrides: dict) -> "QuadParams":
        names = {f.name for f in fields(cls)}
        unknown = set(overrides) - names
        if unknown:
            raise ValueError(f"unknown parameters: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in overrides.items()})

    @classmethod
    def from_json(cls, path) -> "QuadParams":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AeroParams:
    """Diagonal of the rotor drag matrix K (kg/rad)."""
    K: tuple = (-9.1785e-7, -9.1785e-7, -10.311e-7)

    def __post_init__(self):
        if len(self.K) != 3 or any(not (k < 0) for k in self.K):
            raise ValueError("drag diagonal must hold three negative entries")


@dataclass(frozen=True)
class Command:
    thrust: float
    cmd_phi: float = 0.0
    cmd_theta: float = 0.0
    cmd_psi: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.thrust, self.cmd_phi, self.cmd_theta, self.cmd_psi])

    def clamped(self) -> "Command":
        """Clip every channel to the action-space bounds."""
        return Command(
            min(max(self.thrust, THRUST_BOUNDS[0]), THRUST_BOUNDS[1]),
            min(max(self.cmd_phi, -CMD_ATTITUDE_BOUND), CMD_ATTITUDE_BOUND),
            min(max(self.cmd_theta, -CMD_ATTITUDE_BOUND), CMD_ATTITUDE_BOUND),
            min(max(self.cmd_psi, -CMD_YAW_BOUND), CMD_YAW_BOUND),
        )


@dataclass(frozen=True)
class WrenchInput:
    F: float
    Mx: float = 0.0
    My: float = 0.0
    Mz: float = 0.0
    Fa: tuple = (0.0, 0.0, 0.0)
    Ma: tuple = (0.0, 0.0, 0.0)


HOVER_FREE = WrenchInput(0.0)


def mix_pwm(cmd: Command) -> np.ndarray:
    """Per-motor PWM values; no saturation is applied here."""
    return MIX_MATRIX @ cmd.as_array()


def pwm_to_omega(pwm: Sequence[float], params: QuadParams = QuadParams()) -> np.ndarray:
    return params.C1 * np.asarray(pwm, dtype=float) + params.C2


def force_moments(cmd: Command, params: QuadParams = QuadParams()):
    """Closed-form thrust and moments as polynomials of the commands.

    Only valid when the mixed PWMs are not saturated; the plant itself uses
    :func:`rotor_wrench` on the saturated rotor speeds.
    """
    C1, C2, CT, CD, d = params.C1, params.C2, params.CT, params.CD, params.d
    T, a, b, c = cmd.thrust, cmd.cmd_phi, cmd.cmd_theta, cmd.cmd_psi
    F = CT * (C1**2 * (b * b + a * a + 4 * c * c + 4 * T * T) + 8 * C1 * C2 * T + 4 * C2**2)
    Mx = 4 * CT * d * (C1**2 * (a * T - b * c) + C1 * C2 * a)
    My = 4 * CT * d * (C1**2 * (b * T - a * c) + C1 * C2 * b)
    Mz = 2 * CD * (C1**2 * (4 * c * T - a * b) + 4 * C1 * C2 * c)
    return F, Mx, My, Mz


def rotor_wrench(omegas: Sequence[float], params: QuadParams = QuadParams()):
    """Thrust and moments from individual rotor speeds (rad/s)."""
    w1, w2, w3, w4 = (float(o) * float(o) for o in omegas)
    F = params.CT * (w1 + w2 + w3 + w4)
    Mx = params.CT * params.d * (-w1 - w2 + w3 + w4)
    My = params.CT * params.d * (-w1 + w2 + w3 - w4)
    Mz = params.CD * (-w1 + w2 - w3 + w4)
    return F, Mx, My, Mz


def hover_thrust(params: QuadParams = QuadParams()) -> float:
    """Thrust command balancing gravity with zero attitude commands."""
    omega = math.sqrt(params.m * params.g / (4.0 * params.CT))
    return (omega - params.C2) / params.C1


def rotation_matrix(phi: float, theta: float, psi: float) -> np.ndarray:
    """Body-to-inertial rotation."""
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    return np.array([
        [cp * ct, cp * st * sf - cf * sp, sp * sf + cp * cf * st],
        [ct * sp, cp * cf + sp * st * sf, cf * sp * st - cp * sf],
        [-st, ct * sf, ct * cf],
    ])


def _rotor_angles(j: int):
    angle = math.pi / 2 * (j - 1) + 3 * math.pi / 4
    return math.sin(angle), math.cos(angle)


# (c_j, s_j) for rotors 1..4
ROTOR_DIRECTIONS = tuple(_rotor_angles(j) for j in range(1, 5))


def rotor_velocity(state: Sequence[float], rotor_index: int, params: QuadParams = QuadParams()) -> np.ndarray:
    """Body-frame linear velocity of rotor ``rotor_index`` (1-based)."""
    if rotor_index not in (1, 2, 3, 4):
        raise ValueError(f"rotor index must be in 1..4, got {rotor_index}")
    c, s = ROTOR_DIRECTIONS[rotor_index - 1]
    _, u, v, w, _, _, _, p, q, r = (float(x) for x in state)
    d, h = params.d, params.h
    return np.array([
        q * h - r * d * s + u,
        -p * h + r * d * c + v,
        p * d * s - q * d * c + w,
    ])


def check_attitude(theta: float) -> None:
    """Fault unless the pitch stays inside (-pi/2, pi/2) with margin.

    The test is signed so that an integration step jumping over the
    singularity is caught as well as one landing on it.
    """
    if not math.cos(theta) > COS_THETA_TOL:
        raise SingularAttitudeError(f"pitch angle {theta!r} at or beyond the Euler singularity")


def aero_wrench(state, omegas, wind_abs, aero: AeroParams = AeroParams(), params: QuadParams = QuadParams()):
    """Rotor-induced drag force and moment in the body frame.

    Returns ``(Fa, Ma)`` as 3-tuples.
    """
    _, u, v, w, phi, theta, psi, p, q, r = (float(x) for x in state)
    check_attitude(theta)
    wx, wy, wz = (float(x) for x in wind_abs)
    if wx or wy or wz:
        Rt = rotation_matrix(phi, theta, psi).T
        bw = Rt @ np.array([wx, wy, wz])
        bwx, bwy, bwz = float(bw[0]), float(bw[1]), float(bw[2])
    else:
        bwx = bwy = bwz = 0.0
    kx, ky, kz = aero.K
    d, h = params.d, params.h
    fx = fy = fz = mx = my = mz = 0.0
    for (c, s), om in zip(ROTOR_DIRECTIONS, omegas):
        om = abs(float(om))
        rx = q * h - r * d * s + u - bwx
        ry = -p * h + r * d * c + v - bwy
        rz = p * d * s - q * d * c + w - bwz
        f1, f2, f3 = om * kx * rx, om * ky * ry, om * kz * rz
        px, py = d * c, d * s
        fx += f1
        fy += f2
        fz += f3
        mx += py * f3 - h * f2
        my += h * f1 - px * f3
        mz += px * f2 - py * f1
    return (fx, fy, fz), (mx, my, mz)


def state_derivative(state, wrench: WrenchInput, params: QuadParams = QuadParams()) -> np.ndarray:
    _, u, v, w, phi, theta, _, p, q, r = (float(x) for x in state)
    check_attitude(theta)
    g, m = params.g, params.m
    Ix, Iy, Iz = params.Ix, params.Iy, params.Iz
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    tt = st / ct
    fax, fay, faz = wrench.Fa
    max_, may, maz = wrench.Ma
    return np.array([
        -st * u + ct * sf * v + ct * cf * w,
        r * v - q * w + st * g + fax / m,
        -r * u + p * w - ct * sf * g + fay / m,
        q * u - p * v - ct * cf * g + (wrench.F + faz) / m,
        p + cf * tt * r + tt * sf * q,
        cf * q - sf * r,
        cf / ct * r + sf / ct * q,
        (Iy - Iz) / Ix * q * r + (wrench.Mx + max_) / Ix,
        (Iz - Ix) / Iy * p * r + (wrench.My + may) / Iy,
        (Ix - Iy) / Iz * p * q + (wrench.Mz + maz) / Iz,
    ])


WrenchProvider = Callable[[float, np.ndarray], WrenchInput]


def rk4_step(state, wrench_fn: WrenchProvider, dt: float, params: QuadParams = QuadParams(), t: float = 0.0) -> np.ndarray:
    """Advance ``state`` by one classical RK4 step.

    ``wrench_fn(t, x)`` is queried at every stage so that state-dependent
    aerodynamic terms are re-evaluated while the commands stay held.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(state, dtype=float)
    half = 0.5 * dt
    k1 = state_derivative(x, wrench_fn(t, x), params)
    x2 = x + half * k1
    k2 = state_derivative(x2, wrench_fn(t + half, x2), params)
    x3 = x + half * k2
    k3 = state_derivative(x3, wrench_fn(t + half, x3), params)
    x4 = x + dt * k3
    k4 = state_derivative(x4, wrench_fn(t + dt, x4), params)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def constant_wrench(wrench: WrenchInput) -> WrenchProvider:
    return lambda t, x: wrench

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quadcheck import dynamics as dyn
from quadcheck.dynamics import (AeroParams, Command, QuadParams, WrenchInput, aero_wrench, constant_wrench,
                                force_moments, hover_thrust, make_state, mix_pwm, pwm_to_omega, rk4_step,
                                rotor_velocity, rotor_wrench, state_derivative)

from oracles import bisect_root

P0 = QuadParams()

# rows of the published mixing matrix, transcribed by hand
MIX_ORACLE = [[1, -0.5, -0.5, -1], [1, -0.5, 0.5, 1], [1, 0.5, 0.5, -1], [1, 0.5, -0.5, 1]]

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_mix_examples():
    assert np.allclose(mix_pwm(Command(100)), [100] * 4)
    assert np.allclose(mix_pwm(Command(0, 2)), [-1, -1, 1, 1])
    assert np.allclose(mix_pwm(Command(100, 10, 20, 4)), [81, 109, 111, 99])


@given(st.tuples(finite, finite, finite, finite))
def test_mix_matches_matrix_oracle(c):
    expected = [sum(row[k] * c[k] for k in range(4)) for row in MIX_ORACLE]
    assert np.allclose(mix_pwm(Command(*c)), expected, atol=1e-9)


def test_pwm_to_omega():
    assert np.allclose(pwm_to_omega([0] * 4), 380.8359)
    assert np.allclose(pwm_to_omega([65535] * 4), 0.04076521 * 65535 + 380.8359)
    assert abs(pwm_to_omega([65535] * 4)[0] - 3052.4) < 0.1
    assert np.allclose(pwm_to_omega([1] * 4) - pwm_to_omega([0] * 4), 0.04076521)


def test_force_zero_command():
    F, Mx, My, Mz = force_moments(Command(0))
    assert F == pytest.approx(4 * 1.285e-8 * 380.8359**2)
    assert F == pytest.approx(7.455e-3, rel=1e-3)
    assert Mx == My == Mz == 0


def test_hover_thrust_root():
    def residual(T):
        return P0.CT * (4 * P0.C1**2 * T**2 + 8 * P0.C1 * P0.C2 * T + 4 * P0.C2**2) - P0.m * P0.g
    root = bisect_root(residual, 0.0, 65535.0)
    assert hover_thrust() == pytest.approx(root, rel=1e-9)
    assert hover_thrust() == pytest.approx(4.74e4, rel=5e-3)


@given(st.floats(0, 50000), st.floats(0, 400))
def test_mx_odd_in_cmd_phi(T, a):
    f1 = force_moments(Command(T, a))
    f2 = force_moments(Command(T, -a))
    assert f1[0] == pytest.approx(f2[0])
    assert f1[1] == pytest.approx(-f2[1], abs=1e-15)


@given(st.floats(2000, 50000), st.floats(-400, 400), st.floats(-400, 400), st.floats(-1000, 1000))
def test_polynomial_matches_per_rotor_wrench(T, a, b, c):
    cmd = Command(T, a, b, c)
    omegas = pwm_to_omega(mix_pwm(cmd))
    poly = force_moments(cmd)
    rotor = rotor_wrench(omegas)
    for x, y in zip(poly, rotor):
        assert x == pytest.approx(y, rel=1e-9, abs=1e-14)


def test_rotor_velocity():
    rest = make_state()
    for j in range(1, 5):
        assert np.allclose(rotor_velocity(rest, j), 0)
    r = 0.7
    # the published convention names c_j = sin(angle_j), s_j = cos(angle_j)
    c1, s1 = math.sin(3 * math.pi / 4), math.cos(3 * math.pi / 4)
    assert np.allclose(rotor_velocity(make_state(r=r), 1), [-r * P0.d * s1, r * P0.d * c1, 0])
    for j in range(1, 5):
        assert np.allclose(rotor_velocity(make_state(u=1.3), j), [1.3, 0, 0])
    with pytest.raises(ValueError):
        rotor_velocity(rest, 5)


def test_rotor_velocity_is_cross_product():
    s = make_state(u=0.1, v=-0.2, w=0.3, p=1.0, q=-2.0, r=0.5)
    for j in range(1, 5):
        ang = math.pi / 2 * (j - 1) + 3 * math.pi / 4
        arm = np.array([P0.d * math.sin(ang), P0.d * math.cos(ang), P0.h])
        expected = np.cross([1.0, -2.0, 0.5], arm) + [0.1, -0.2, 0.3]
        assert np.allclose(rotor_velocity(s, j), expected)


def test_aero_rest_is_zero():
    Fa, Ma = aero_wrench(make_state(), [2000] * 4, (0, 0, 0))
    assert Fa == (0, 0, 0) and Ma == (0, 0, 0)


def test_aero_descent_drag_opposes_motion():
    w, om = -1.5, 2000.0
    Fa, Ma = aero_wrench(make_state(w=w), [om] * 4, (0, 0, 0))
    K33 = AeroParams().K[2]
    assert Fa[2] == pytest.approx(4 * om * K33 * w)
    assert Fa[2] > 0
    assert np.allclose(Ma, 0, atol=1e-18)


def test_aero_linear_in_omega_and_wind():
    s = make_state(u=0.3, w=-0.2, phi=0.1, theta=-0.2, p=0.5, r=-1)
    om = np.array([1800.0, 2100.0, 1900.0, 2000.0])
    Fa1, Ma1 = aero_wrench(s, om, (1, 2, 0))
    Fa2, Ma2 = aero_wrench(s, 2 * om, (1, 2, 0))
    assert np.allclose(np.array(Fa2), 2 * np.array(Fa1))
    assert np.allclose(np.array(Ma2), 2 * np.array(Ma1))
    f = lambda wind: np.concatenate(aero_wrench(s, om, wind))
    base = f((0, 0, 0))
    w1, w2 = np.array([1.0, -2.0, 0.5]), np.array([0.3, 4.0, -1.0])
    assert np.allclose(f(w1 + w2) - base, (f(w1) - base) + (f(w2) - base), atol=1e-15)


def test_derivative_examples():
    hover = WrenchInput(P0.m * P0.g)
    assert np.all(state_derivative(make_state(z=3.0), hover) == 0)
    d = state_derivative(make_state(), WrenchInput(0.0))
    expected = np.zeros(10)
    expected[dyn.W] = -9.81
    assert np.allclose(d, expected)
    d = state_derivative(make_state(q=1.0), WrenchInput(0.0))
    assert d[dyn.THETA] == 1.0
    assert d[dyn.P] == 0 and d[dyn.R] == 0 and d[dyn.U] == 0 and d[dyn.V] == 0


def test_singular_attitude_raises():
    with pytest.raises(dyn.SingularAttitudeError):
        state_derivative(make_state(theta=math.pi / 2), WrenchInput(0.0))
    # a step that jumps past the singularity is caught too
    with pytest.raises(dyn.SingularAttitudeError):
        state_derivative(make_state(theta=1.6), WrenchInput(0.0))
    state_derivative(make_state(theta=-1.5), WrenchInput(0.0))


def test_rk4_free_fall_step():
    x = rk4_step(make_state(), constant_wrench(WrenchInput(0.0)), 0.01)
    assert x[dyn.Z] == pytest.approx(-0.5 * 9.81 * 0.01**2, rel=1e-12)
    assert x[dyn.W] == pytest.approx(-0.0981, rel=1e-12)


def test_rk4_rejects_bad_dt():
    with pytest.raises(ValueError):
        rk4_step(make_state(), constant_wrench(WrenchInput(0.0)), 0.0)


def test_rk4_hover_unchanged():
    x0 = make_state(z=1.0)
    x = rk4_step(x0, constant_wrench(WrenchInput(P0.m * P0.g)), 0.01)
    assert np.array_equal(x, x0)


def _mirror(x):
    y = np.array(x, dtype=float)
    for k in (dyn.V, dyn.PHI, dyn.PSI, dyn.P, dyn.R):
        y[k] = -y[k]
    return y


@given(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(-1, 1), st.floats(-1, 1), st.floats(-200, 200),
       st.floats(-200, 200), st.floats(-500, 500))
def test_mirror_symmetry(phi, theta, p, q, a, b, c):
    x = make_state(phi=phi, theta=theta, p=p, q=q, v=0.2, u=-0.1)
    y = _mirror(x)
    T = 45000.0
    for _ in range(5):
        wx = WrenchInput(*force_moments(Command(T, a, b, c)))
        wy = WrenchInput(*force_moments(Command(T, -a, b, -c)))
        x = rk4_step(x, constant_wrench(wx), 0.01)
        y = rk4_step(y, constant_wrench(wy), 0.01)
    assert np.allclose(_mirror(x), y, rtol=1e-9, atol=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        QuadParams(m=-1)
    with pytest.raises(ValueError):
        QuadParams.from_dict({"mass": 1})
    assert QuadParams.from_dict({"m": 0.03}).m == 0.03
    with pytest.raises(ValueError):
        AeroParams((1.0, -1.0, -1.0))
    with pytest.raises(ValueError):
        make_state(alpha=1)


def test_command_clamp():
    c = Command(1e6, -1e4, 1e4, 5000).clamped()
    assert (c.thrust, c.cmd_phi, c.cmd_theta, c.cmd_psi) == (52428, -400, 400, 1000)

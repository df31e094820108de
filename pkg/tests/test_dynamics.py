from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cargo_esc.dynamics import (
    ActuatorDynamics,
    ActuatorState,
    DivergenceBounds,
    NoiseConfig,
    RigidState,
    check_divergence,
    euler_to_quat,
    quat_to_euler,
    quat_to_rotation,
    sample_sensors,
    step_actuators,
    step_dynamics,
)
from cargo_esc.vehicle import ActuatorCommand, VehicleParams

P = VehicleParams()
IDLE = ActuatorState(np.zeros(4))


def run(state, act, params, seconds, dt=0.001):
    for _ in range(int(round(seconds / dt))):
        state = step_dynamics(state, act, params, dt)
    return state


def test_free_fall():
    s = run(RigidState(), IDLE, P, 1.0)
    np.testing.assert_allclose(s.position, [0, 0, 0.5 * P.gravity_g], atol=1e-12)
    np.testing.assert_allclose(s.velocity, [0, 0, P.gravity_g], atol=1e-12)


def test_hover_is_stationary_for_10s():
    act = ActuatorState(np.full(4, P.hover_thrust))
    s = run(RigidState(), act, P, 10.0)
    assert np.abs(s.position).max() < 1e-6
    assert np.abs(s.body_rates).max() < 1e-6


def test_yaw_spin_up_closed_form():
    # Differential pairs give pure yaw torque 2*xi*(b - a) with no roll/pitch.
    a, b = 5.0, 7.0
    act = ActuatorState(np.array([a, b, a, b]))
    s = run(RigidState(), act, P, 1.0)
    tau_z = 2 * P.yaw_thrust_ratio_xi * (b - a)
    assert s.body_rates[2] == pytest.approx(tau_z / P.inertia[2, 2], rel=1e-9)
    assert s.euler[2] == pytest.approx(0.5 * tau_z / P.inertia[2, 2], rel=1e-6)


def test_torque_free_conservation():
    params = VehicleParams(inertia=np.diag([0.03, 0.05, 0.07]), gravity_g=0.0)
    s0 = RigidState(body_rates=np.array([1.0, 0.2, -0.5]))

    def energy(s):
        return 0.5 * s.body_rates @ params.inertia @ s.body_rates

    def momentum(s):
        return s.rotation @ (params.inertia @ s.body_rates)

    s = run(s0, IDLE, params, 5.0)
    assert energy(s) == pytest.approx(energy(s0), rel=1e-8)
    np.testing.assert_allclose(momentum(s), momentum(s0), atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_quaternion_stays_unit(rates):
    s = run(RigidState(body_rates=np.array(rates)), IDLE, P, 0.2)
    assert np.linalg.norm(s.attitude) == pytest.approx(1.0, abs=1e-12)


def test_step_is_deterministic():
    act = ActuatorState(np.array([6.0, 5.5, 6.2, 5.9]), np.array([0.1, -0.05]))
    s0 = RigidState(body_rates=np.array([0.1, -0.2, 0.3]))
    a = step_dynamics(s0, act, P, 0.001).to_vector()
    b = step_dynamics(s0, act, P, 0.001).to_vector()
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("dt", [0.0, -0.001, 0.01])
def test_step_rejects_bad_dt(dt):
    with pytest.raises(ValueError):
        step_dynamics(RigidState(), IDLE, P, dt)


@settings(max_examples=50)
@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(-3.1, 3.1))
def test_euler_round_trip(roll, pitch, yaw):
    q = euler_to_quat(roll, pitch, yaw)
    np.testing.assert_allclose(quat_to_euler(q), [roll, pitch, yaw], atol=1e-9)
    r = quat_to_rotation(q)
    np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-12)


def test_rotor_lag_time_constant():
    lags = ActuatorDynamics()
    act = ActuatorState(np.zeros(4))
    cmd = ActuatorCommand(np.full(4, 10.0), np.zeros(2))
    for _ in range(20):
        act = step_actuators(act, cmd, 0.001, P, lags)
    np.testing.assert_allclose(act.rotor_thrusts_actual, 10 * (1 - math.exp(-1)), rtol=1e-12)


def test_servo_lag_unsaturated_rate():
    # Initial rate 0.3/0.08 = 3.75 rad/s stays below the 4 rad/s limit.
    act = ActuatorState(np.zeros(4))
    cmd = ActuatorCommand(np.zeros(4), np.array([0.3, -0.3]))
    for _ in range(50):
        act = step_actuators(act, cmd, 0.001, P)
    expected = 0.3 * (1 - math.exp(-0.05 / 0.08))
    np.testing.assert_allclose(act.servo_angles_actual, [expected, -expected], rtol=1e-12)


def test_servo_rate_limit_binds():
    lags = ActuatorDynamics(servo_rate_max=1.0)
    act = ActuatorState(np.zeros(4))
    cmd = ActuatorCommand(np.zeros(4), np.array([0.3, 0.0]))
    for _ in range(50):
        act = step_actuators(act, cmd, 0.001, P, lags)
    assert act.servo_angles_actual[0] == pytest.approx(0.05, rel=1e-12)
    assert act.servo_rates_actual[0] == pytest.approx(1.0)


def test_actuator_lag_validation():
    with pytest.raises(ValueError):
        ActuatorDynamics(tau_rotor=0.1, tau_servo=0.05)


def test_sensor_noise_sigma():
    rng = np.random.default_rng(3)
    noise = NoiseConfig(enabled=True, gyro=0.01, position=0.05)
    samples = [sample_sensors(RigidState(), IDLE, 0.0, noise, rng) for _ in range(20000)]
    gyro = np.array([s.gyro for s in samples])
    pos = np.array([s.position_meas for s in samples])
    np.testing.assert_allclose(gyro.std(axis=0), 0.01, rtol=0.05)
    np.testing.assert_allclose(pos.std(axis=0), 0.05, rtol=0.05)


def test_noise_free_sensors_are_exact():
    s = RigidState(position=np.array([1.0, 2.0, 3.0]), body_rates=np.array([0.1, 0.2, 0.3]))
    m = sample_sensors(s, IDLE, 1.5)
    np.testing.assert_array_equal(m.gyro, s.body_rates)
    np.testing.assert_array_equal(m.position_meas, s.position)
    assert m.timestamp == 1.5


def test_noise_requires_rng():
    with pytest.raises(ValueError):
        sample_sensors(RigidState(), IDLE, 0.0, NoiseConfig(enabled=True))


def test_divergence_causes():
    bounds = DivergenceBounds()
    assert check_divergence(RigidState(), bounds) is None
    tilted = RigidState(attitude=euler_to_quat(0.0, 1.1, 0.0))
    assert check_divergence(tilted, bounds) == "attitude_divergence"
    far = RigidState(position=np.array([40.0, 40.0, 0.0]))
    assert check_divergence(far, bounds) == "position_bound"
    bad = RigidState(velocity=np.array([np.nan, 0, 0]))
    assert check_divergence(bad, bounds) == "non_finite_state"

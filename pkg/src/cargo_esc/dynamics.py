"""Rigid-body plant, actuator lags and emulated sensors.

Global frame is north-east-down (gravity along +z); the attitude quaternion
is scalar-first and rotates body vectors into the global frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .vehicle import ActuatorCommand, Vec, VehicleParams, body_wrench

MAX_DT = 0.005


# ---------------------------------------------------------------- quaternions


def quat_multiply(a: Vec, b: Vec) -> Vec:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_to_rotation(q: Vec) -> Vec:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def euler_to_quat(roll: float, pitch: float, yaw: float) -> Vec:
    """Z-Y-X (yaw, pitch, roll) Euler angles to a unit quaternion."""
    cr, sr = math.cos(roll / 2), math.sin(roll / 2)
    cp, sp = math.cos(pitch / 2), math.sin(pitch / 2)
    cy, sy = math.cos(yaw / 2), math.sin(yaw / 2)
    return np.array(
        [
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        ]
    )


def quat_to_euler(q: Vec) -> Vec:
    """Unit quaternion to Z-Y-X Euler angles ``[roll, pitch, yaw]``."""
    w, x, y, z = q
    roll = math.atan2(2 * (w * x + y * z), 1 - 2 * (x * x + y * y))
    pitch = math.asin(max(-1.0, min(1.0, 2 * (w * y - z * x))))
    yaw = math.atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z))
    return np.array([roll, pitch, yaw])


# ---------------------------------------------------------------- state types


@dataclass(frozen=True)
class RigidState:
    position: Vec = field(default_factory=lambda: np.zeros(3))
    velocity: Vec = field(default_factory=lambda: np.zeros(3))
    attitude: Vec = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    body_rates: Vec = field(default_factory=lambda: np.zeros(3))

    @property
    def euler(self) -> Vec:
        return quat_to_euler(self.attitude)

    @property
    def rotation(self) -> Vec:
        return quat_to_rotation(self.attitude)

    def to_vector(self) -> Vec:
        return np.concatenate([self.position, self.velocity, self.attitude, self.body_rates])

    @classmethod
    def from_vector(cls, x: Vec) -> RigidState:
        w, qx, qy, qz = x[6:10].tolist()
        q = x[6:10] / math.sqrt(w * w + qx * qx + qy * qy + qz * qz)
        return cls(x[0:3].copy(), x[3:6].copy(), q, x[10:13].copy())


@dataclass(frozen=True)
class ActuatorState:
    rotor_thrusts_actual: Vec
    servo_angles_actual: Vec = field(default_factory=lambda: np.zeros(2))
    servo_rates_actual: Vec = field(default_factory=lambda: np.zeros(2))

    @classmethod
    def hover(cls, params: VehicleParams, mass: float | None = None) -> ActuatorState:
        m = params.mass if mass is None else mass
        return cls(np.full(4, m * params.gravity_g / 4.0))

    def as_command(self) -> ActuatorCommand:
        return ActuatorCommand(self.rotor_thrusts_actual, self.servo_angles_actual)


@dataclass(frozen=True)
class ActuatorDynamics:
    """Lag constants; the rotor must be markedly faster than the servo."""

    tau_rotor: float = 0.02
    tau_servo: float = 0.08
    servo_rate_max: float = 4.0

    def __post_init__(self) -> None:
        if min(self.tau_rotor, self.tau_servo, self.servo_rate_max) <= 0:
            raise ValueError("actuator time constants and rate limit must be positive")
        if self.tau_rotor >= self.tau_servo:
            raise ValueError("rotor lag must be faster than servo lag")


@dataclass(frozen=True)
class SensorSample:
    gyro: Vec
    attitude_meas: Vec
    position_meas: Vec
    velocity_meas: Vec
    servo_angle_meas: Vec
    timestamp: float

    @property
    def euler(self) -> Vec:
        return quat_to_euler(self.attitude_meas)


@dataclass(frozen=True)
class NoiseConfig:
    """Per-channel standard deviations of additive Gaussian sensor noise."""

    enabled: bool = False
    gyro: float = 0.002
    attitude: float = 0.0
    position: float = 0.0
    velocity: float = 0.0
    servo_angle: float = 0.0


@dataclass(frozen=True)
class DivergenceBounds:
    max_tilt: float = 1.0
    max_distance: float = 50.0


# ---------------------------------------------------------------- dynamics


def _derivative(x: list[float], force_b: list[float], torque_b: list[float], mass: float,
                inertia: list[list[float]], inertia_inv: list[list[float]], g: float) -> list[float]:
    # Scalar arithmetic: this runs four times per inner tick.
    _, _, _, vx, vy, vz, w, qx, qy, qz, p, q, r = x
    fx, fy, fz = force_b
    ax = ((1 - 2 * (qy * qy + qz * qz)) * fx + 2 * (qx * qy - w * qz) * fy + 2 * (qx * qz + w * qy) * fz) / mass
    ay = (2 * (qx * qy + w * qz) * fx + (1 - 2 * (qx * qx + qz * qz)) * fy + 2 * (qy * qz - w * qx) * fz) / mass
    az = (2 * (qx * qz - w * qy) * fx + 2 * (qy * qz + w * qx) * fy + (1 - 2 * (qx * qx + qy * qy)) * fz) / mass + g
    qw_d = 0.5 * (-qx * p - qy * q - qz * r)
    qx_d = 0.5 * (w * p + qy * r - qz * q)
    qy_d = 0.5 * (w * q - qx * r + qz * p)
    qz_d = 0.5 * (w * r + qx * q - qy * p)
    (j00, j01, j02), (j10, j11, j12), (j20, j21, j22) = inertia
    hx = j00 * p + j01 * q + j02 * r
    hy = j10 * p + j11 * q + j12 * r
    hz = j20 * p + j21 * q + j22 * r
    mx = torque_b[0] - (q * hz - r * hy)
    my = torque_b[1] - (r * hx - p * hz)
    mz = torque_b[2] - (p * hy - q * hx)
    (i00, i01, i02), (i10, i11, i12), (i20, i21, i22) = inertia_inv
    return [vx, vy, vz, ax, ay, az, qw_d, qx_d, qy_d, qz_d,
            i00 * mx + i01 * my + i02 * mz, i10 * mx + i11 * my + i12 * mz, i20 * mx + i21 * my + i22 * mz]


def _axpy(x: list[float], a: float, k: list[float]) -> list[float]:
    return [xi + a * ki for xi, ki in zip(x, k)]


def step_dynamics(state: RigidState, act: ActuatorState, params: VehicleParams, dt: float) -> RigidState:
    """Advance the rigid body by ``dt`` with one classical RK4 step.

    The wrench is evaluated from the actual actuator outputs about
    ``params.com_true`` and held over the step. The gyroscopic term is kept.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if dt > MAX_DT:
        raise ValueError(f"dt={dt} exceeds the {MAX_DT} s stability limit")
    w = body_wrench(act.as_command(), params.com_true, params)
    args = (w.force.tolist(), w.torque.tolist(), params.mass, params.inertia.tolist(),
            params.inertia_inv.tolist(), params.gravity_g)

    x = state.to_vector().tolist()
    k1 = _derivative(x, *args)
    k2 = _derivative(_axpy(x, 0.5 * dt, k1), *args)
    k3 = _derivative(_axpy(x, 0.5 * dt, k2), *args)
    k4 = _derivative(_axpy(x, dt, k3), *args)
    h = dt / 6.0
    out = [xi + h * (a + 2 * b + 2 * c + d) for xi, a, b, c, d in zip(x, k1, k2, k3, k4)]
    return RigidState.from_vector(np.array(out))


def check_divergence(state: RigidState, bounds: DivergenceBounds) -> str | None:
    """Name of the violated bound, or None while the flight is recoverable."""
    x = state.to_vector()
    if not math.isfinite(float(x.sum())):
        return "non_finite_state"
    roll, pitch, _ = state.euler
    if abs(roll) > bounds.max_tilt or abs(pitch) > bounds.max_tilt:
        return "attitude_divergence"
    px, py, pz = x[0:3].tolist()
    if math.sqrt(px * px + py * py + pz * pz) > bounds.max_distance:
        return "position_bound"
    return None


def _servo_lag(angle: float, target: float, dt: float, tau: float, rate_max: float) -> tuple[float, float]:
    """Exact solution of ``d(angle)/dt = clip((target - angle)/tau, +-rate_max)``."""
    err = target - angle
    remaining = dt
    if abs(err) > rate_max * tau:
        # Rate-limited segment lasts until |err| drops to rate_max * tau.
        t_sat = (abs(err) - rate_max * tau) / rate_max
        if t_sat >= remaining:
            step = math.copysign(rate_max * remaining, err)
            return angle + step, math.copysign(rate_max, err)
        angle += math.copysign(rate_max * t_sat, err)
        remaining -= t_sat
        err = target - angle
    decay = math.exp(-remaining / tau)
    new_err = err * decay
    return target - new_err, new_err / tau


def step_actuators(act: ActuatorState, cmd: ActuatorCommand, dt: float, params: VehicleParams,
                   lags: ActuatorDynamics = ActuatorDynamics()) -> ActuatorState:
    """Propagate rotor (first-order) and servo (rate-limited first-order) lags."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    lo, hi = params.thrust_min, params.thrust_max
    lim = params.servo_angle_limit
    alpha = 1.0 - math.exp(-dt / lags.tau_rotor)
    thrusts = []
    for f_act, f_cmd in zip(act.rotor_thrusts_actual.tolist(), cmd.thrusts.tolist()):
        f_cmd = min(max(f_cmd, lo), hi)
        thrusts.append(min(max(f_act + alpha * (f_cmd - f_act), lo), hi))

    angles = []
    rates = []
    for a_act, a_cmd in zip(act.servo_angles_actual.tolist(), cmd.servo_angles.tolist()):
        a, r = _servo_lag(a_act, min(max(a_cmd, -lim), lim), dt, lags.tau_servo, lags.servo_rate_max)
        angles.append(min(max(a, -lim), lim))
        rates.append(r)
    return ActuatorState(np.array(thrusts), np.array(angles), np.array(rates))


def _perturb_attitude(q: Vec, sigma: float, rng: np.random.Generator) -> Vec:
    half = 0.5 * rng.normal(0.0, sigma, 3)
    dq = np.array([1.0, *half])
    out = quat_multiply(q, dq)
    return out / np.linalg.norm(out)


def sample_sensors(state: RigidState, act: ActuatorState, t: float,
                   noise: NoiseConfig = NoiseConfig(),
                   rng: np.random.Generator | None = None) -> SensorSample:
    """Measure the true state, optionally with additive zero-mean noise."""
    if not noise.enabled:
        return SensorSample(
            state.body_rates.copy(), state.attitude.copy(), state.position.copy(),
            state.velocity.copy(), act.servo_angles_actual.copy(), t,
        )
    if rng is None:
        raise ValueError("noise enabled but no random generator supplied")
    return SensorSample(
        state.body_rates + rng.normal(0.0, noise.gyro, 3),
        _perturb_attitude(state.attitude, noise.attitude, rng),
        state.position + rng.normal(0.0, noise.position, 3),
        state.velocity + rng.normal(0.0, noise.velocity, 3),
        act.servo_angles_actual + rng.normal(0.0, noise.servo_angle, 2),
        t,
    )

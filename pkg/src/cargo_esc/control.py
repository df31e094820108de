"""Cascaded pose controllers producing the desired body wrench."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import SensorSample, quat_to_rotation
from .vehicle import Vec, Wrench


def _vec3(values) -> Vec:
    return np.asarray(values, dtype=float).reshape(3)


@dataclass(frozen=True)
class ControllerGains:
    # z position and yaw gains are not published; see README for defaults.
    pos_p: Vec = field(default_factory=lambda: np.array([2.0, 2.0, 2.0]))
    pos_i: Vec = field(default_factory=lambda: np.array([0.5, 0.5, 0.5]))
    pos_d: Vec = field(default_factory=lambda: np.array([0.7, 0.7, 0.7]))
    att_p: Vec = field(default_factory=lambda: np.array([2.0, 2.0, 1.0]))
    att_d: Vec = field(default_factory=lambda: np.array([0.45, 0.45, 0.3]))
    integrator_limit: Vec = field(default_factory=lambda: np.array([2.0, 2.0, 2.0]))
    # Slow attitude integral action trims static torque offsets (limit in N*m).
    att_i: Vec = field(default_factory=lambda: np.array([1.0, 1.0, 0.5]))
    att_integrator_limit: Vec = field(default_factory=lambda: np.array([0.6, 0.6, 0.3]))

    def __post_init__(self) -> None:
        for name in ("pos_p", "pos_i", "pos_d", "att_p", "att_d", "integrator_limit", "att_i",
                     "att_integrator_limit"):
            value = _vec3(getattr(self, name))
            object.__setattr__(self, name, value)
            if np.any(value < 0):
                raise ValueError(f"{name} must be non-negative")
        if np.any(self.integrator_limit <= 0) or np.any(self.att_integrator_limit <= 0):
            raise ValueError("integrator limits must be positive")


@dataclass(frozen=True)
class Setpoint:
    position_des: Vec = field(default_factory=lambda: np.zeros(3))
    velocity_des: Vec = field(default_factory=lambda: np.zeros(3))
    attitude_des: Vec = field(default_factory=lambda: np.zeros(3))

    @property
    def yaw_des(self) -> float:
        return float(self.attitude_des[2])


def wrap_angle(a: Vec) -> Vec:
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a, dtype=float), 2 * np.pi)


class PositionController:
    """Per-axis PID on position with velocity-error damping and gravity feed-forward."""

    def __init__(self, gains: ControllerGains, mass_nominal: float, gravity: float = 9.81):
        self.gains = gains
        self.mass_nominal = mass_nominal
        self.gravity = np.array([0.0, 0.0, gravity])
        self.integral = np.zeros(3)

    def reset(self) -> None:
        self.integral = np.zeros(3)

    def update(self, sp: Setpoint, meas: SensorSample, dt: float, freeze_integrator: bool = False) -> Vec:
        """Desired global-frame force."""
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        g = self.gains
        e_pos = sp.position_des - meas.position_meas
        e_vel = sp.velocity_des - meas.velocity_meas
        if not freeze_integrator:
            self.integral = np.clip(self.integral + e_pos * dt, -g.integrator_limit, g.integrator_limit)
        a_des = g.pos_p * e_pos + g.pos_i * self.integral + g.pos_d * e_vel
        return self.mass_nominal * (a_des - self.gravity)


def position_control(sp: Setpoint, meas: SensorSample, gains: ControllerGains, mass_nominal: float,
                     dt: float, integral: Vec | None = None) -> Vec:
    """Stateless form: one PID evaluation starting from ``integral``."""
    ctl = PositionController(gains, mass_nominal)
    if integral is not None:
        ctl.integral = np.array(integral, dtype=float)
    return ctl.update(sp, meas, dt)


def attitude_control(sp: Setpoint, meas: SensorSample, gains: ControllerGains) -> Vec:
    """Desired body torque: PD on the Euler error with gyro rate damping."""
    e_att = wrap_angle(sp.attitude_des - meas.euler)
    return gains.att_p * e_att - gains.att_d * meas.gyro


class AttitudeController:
    """PD attitude law plus a clamped integral term.

    The integral state is stored as torque so that the clamp is a direct
    bound on how much static torque the loop may trim.
    """

    def __init__(self, gains: ControllerGains):
        self.gains = gains
        self.integral = np.zeros(3)

    def reset(self) -> None:
        self.integral = np.zeros(3)

    def update(self, sp: Setpoint, meas: SensorSample, dt: float) -> Vec:
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        g = self.gains
        e_att = wrap_angle(sp.attitude_des - meas.euler)
        lim = g.att_integrator_limit
        self.integral = np.clip(self.integral + g.att_i * e_att * dt, -lim, lim)
        return g.att_p * e_att - g.att_d * meas.gyro + self.integral


def compose_wrench(force_global: Vec, torque_des: Vec, attitude_meas: Vec) -> Wrench:
    """Rotate the global force demand into the body frame."""
    rot = quat_to_rotation(attitude_meas)
    return Wrench(torque_des, rot.T @ force_global)


def attitude_loop_poles(inertia_axis: float, kp: float, kd: float) -> Vec:
    """Closed-loop poles of ``J s^2 + kd s + kp`` for one linearised axis."""
    return np.roots([inertia_axis, kd, kp])


def reciprocation_setpoint(t: float, axis: int, amplitude: float, period: float,
                           start: float = 0.0) -> Setpoint:
    """Smooth back-and-forth reference: ``A/2 (1 - cos(2 pi (t - start)/period))``.

    Before ``start`` the reference holds the origin.
    """
    pos = np.zeros(3)
    vel = np.zeros(3)
    if t > start:
        w = 2 * math.pi / period
        tau = t - start
        pos[axis] = 0.5 * amplitude * (1 - math.cos(w * tau))
        vel[axis] = 0.5 * amplitude * w * math.sin(w * tau)
    return Setpoint(pos, vel)

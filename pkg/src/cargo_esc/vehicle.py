"""Vehicle geometry and the kinematic maps from actuator outputs to body wrench.

Frames: body x forward, y right, z down. At zero servo tilt every rotor
thrusts along body -z. Thrusters 1 and 3 sit on the axis-1 arm and tilt
with ``theta1`` (force along body y); thrusters 2 and 4 sit on the axis-2
arm and tilt with ``theta2`` (force along body -x).
"""

from __future__ import annotations

import math

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

Vec = NDArray[np.float64]


@dataclass(frozen=True)
class VehicleParams:
    """Physical constants of the simulated plant.

    ``com_true`` is the body-frame centre of mass the plant actually uses;
    controllers never read it.
    """

    mass: float = 2.405
    inertia: Vec = field(default_factory=lambda: np.diag([0.035, 0.035, 0.045]))
    arm_length_r: float = 0.109
    servo_offset_l: float = 0.015
    yaw_thrust_ratio_xi: float = 0.01
    com_true: Vec = field(default_factory=lambda: np.zeros(3))
    gravity_g: float = 9.81
    servo_angle_limit: float = 0.3
    thrust_min: float = 0.0
    thrust_max: float = 15.0
    inertia_inv: Vec = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        inertia = np.asarray(self.inertia, dtype=float)
        com = np.asarray(self.com_true, dtype=float)
        object.__setattr__(self, "inertia", inertia)
        object.__setattr__(self, "com_true", com)
        if self.mass <= 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if inertia.shape != (3, 3) or not np.allclose(inertia, inertia.T):
            raise ValueError("inertia must be a symmetric 3x3 matrix")
        if np.any(np.linalg.eigvalsh(inertia) <= 0):
            raise ValueError("inertia must be positive definite")
        if com.shape != (3,):
            raise ValueError("com_true must be a 3-vector")
        if self.arm_length_r <= 0:
            raise ValueError("arm_length_r must be positive")
        if self.servo_offset_l < 0:
            raise ValueError("servo_offset_l must be non-negative")
        if self.yaw_thrust_ratio_xi < 0:
            raise ValueError("yaw_thrust_ratio_xi must be non-negative")
        if not (0 <= self.thrust_min < self.thrust_max):
            raise ValueError("need 0 <= thrust_min < thrust_max")
        if not (0 < self.servo_angle_limit < np.pi / 2):
            raise ValueError("servo_angle_limit must lie in (0, pi/2)")
        object.__setattr__(self, "inertia_inv", np.linalg.inv(inertia))

    @property
    def hover_thrust(self) -> float:
        """Per-rotor thrust that balances gravity at zero tilt."""
        return self.mass * self.gravity_g / 4.0


@dataclass(frozen=True)
class ActuatorCommand:
    thrusts: Vec
    servo_angles: Vec

    def __post_init__(self) -> None:
        object.__setattr__(self, "thrusts", np.asarray(self.thrusts, dtype=float).reshape(4))
        object.__setattr__(self, "servo_angles", np.asarray(self.servo_angles, dtype=float).reshape(2))

    @property
    def axis_forces(self) -> tuple[float, float]:
        """Collective thrust of each servo axis, ``(F1 + F3, F2 + F4)``."""
        f = self.thrusts
        return float(f[0] + f[2]), float(f[1] + f[3])

    def saturated(self, params: VehicleParams) -> ActuatorCommand:
        return ActuatorCommand(
            np.clip(self.thrusts, params.thrust_min, params.thrust_max),
            np.clip(self.servo_angles, -params.servo_angle_limit, params.servo_angle_limit),
        )


@dataclass(frozen=True)
class Wrench:
    torque: Vec
    force: Vec

    def __post_init__(self) -> None:
        torque = np.asarray(self.torque, dtype=float).reshape(3)
        force = np.asarray(self.force, dtype=float).reshape(3)
        # A sum is finite only if every term is; cheaper than two isfinite reductions.
        if not math.isfinite(float(torque.sum() + force.sum())):
            raise ValueError("wrench components must be finite")
        object.__setattr__(self, "torque", torque)
        object.__setattr__(self, "force", force)

    def as_vector(self) -> Vec:
        return np.concatenate([self.torque, self.force])


def thruster_positions(params: VehicleParams) -> Vec:
    """Body-frame thruster locations, one row per rotor.

    This is the placement for which the cross-product torque sum reproduces
    the closed-form mapping matrix entry by entry.
    """
    r, l = params.arm_length_r, params.servo_offset_l
    return np.array([[r, 0.0, l], [0.0, -r, -l], [-r, 0.0, l], [0.0, r, -l]])


# Reaction-torque sign per rotor (rotors 1,3 and 2,4 spin in opposite senses).
YAW_SIGNS = np.array([1.0, -1.0, 1.0, -1.0])


def thruster_force_vectors(cmd: ActuatorCommand) -> Vec:
    """Per-rotor body-frame thrust vectors as a (4, 3) array."""
    f = cmd.thrusts
    t1, t2 = cmd.servo_angles
    axis1 = np.array([0.0, np.sin(t1), -np.cos(t1)])
    axis2 = np.array([-np.sin(t2), 0.0, -np.cos(t2)])
    return np.stack([axis1 * f[0], axis2 * f[1], axis1 * f[2], axis2 * f[3]])


def net_force(cmd: ActuatorCommand) -> Vec:
    fa1, fa2 = cmd.axis_forces
    t1, t2 = float(cmd.servo_angles[0]), float(cmd.servo_angles[1])
    return np.array([-fa2 * math.sin(t2), fa1 * math.sin(t1), -fa1 * math.cos(t1) - fa2 * math.cos(t2)])


def torque_mapping_matrix(com: Vec, servo_angles: Vec, params: VehicleParams) -> Vec:
    """3x4 matrix taking rotor thrusts to body torque about ``com``."""
    xc, yc, zc = com
    t1, t2 = float(servo_angles[0]), float(servo_angles[1])
    s1, c1 = math.sin(t1), math.cos(t1)
    s2, c2 = math.sin(t2), math.cos(t2)
    r, l, xi = params.arm_length_r, params.servo_offset_l, params.yaw_thrust_ratio_xi
    return np.array(
        [
            [
                -(l - zc) * s1 + yc * c1,
                (r + yc) * c2 + xi * s2,
                -(l - zc) * s1 + yc * c1,
                -(r - yc) * c2 + xi * s2,
            ],
            [
                (r - xc) * c1 + xi * s1,
                (l + zc) * s2 - xc * c2,
                -(r + xc) * c1 + xi * s1,
                (l + zc) * s2 - xc * c2,
            ],
            [
                (r - xc) * s1 - xi * c1,
                -(r + yc) * s2 + xi * c2,
                -(r + xc) * s1 - xi * c1,
                (r - yc) * s2 + xi * c2,
            ],
        ]
    )


def body_wrench(cmd: ActuatorCommand, com: Vec, params: VehicleParams) -> Wrench:
    torque = torque_mapping_matrix(com, cmd.servo_angles, params) @ cmd.thrusts
    return Wrench(torque, net_force(cmd))

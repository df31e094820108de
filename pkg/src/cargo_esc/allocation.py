"""Sequential two-step control allocation.

Step 1 inverts the 4x4 map from rotor thrusts to ``[torque; Fz]`` with the
servo angles frozen at their last known values (rotors respond much faster
than the servos). Step 2 then picks servo angles from the resulting axis
thrust sums so that the lateral force demands are met.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .vehicle import ActuatorCommand, Vec, VehicleParams, Wrench, torque_mapping_matrix

SINGULARITY_THRESHOLD = 1e6
MIN_AXIS_THRUST = 0.1


class AllocationError(RuntimeError):
    pass


class SingularMapping(AllocationError):
    pass


class DegenerateThrust(AllocationError):
    pass


@dataclass
class AllocationState:
    last_servo_angles: Vec = field(default_factory=lambda: np.zeros(2))
    mapping_condition: float = 1.0


@dataclass(frozen=True)
class AllocationResult:
    command: ActuatorCommand
    thrust_saturated: bool
    servo_saturated: bool
    unclamped_thrusts: Vec
    unclamped_servo_angles: Vec

    @property
    def saturated(self) -> bool:
        return self.thrust_saturated or self.servo_saturated


def mapping_matrix(com_est: Vec, servo_angles: Vec, params: VehicleParams) -> Vec:
    """Torque mapping stacked over the body-z force row."""
    c1, c2 = math.cos(servo_angles[0]), math.cos(servo_angles[1])
    m_tau = torque_mapping_matrix(com_est, servo_angles, params)
    return np.vstack([m_tau, [-c1, -c2, -c1, -c2]])


def allocate_step1(torque_des: Vec, fz_des: float, com_est: Vec, servo_angles: Vec,
                   params: VehicleParams, threshold: float = SINGULARITY_THRESHOLD,
                   ) -> tuple[Vec, Vec, bool, float]:
    """Rotor thrusts for the desired torque and body-z force.

    Returns ``(clamped, unclamped, saturated, condition_number)``.
    """
    m = mapping_matrix(com_est, servo_angles, params)
    # 1-norm condition number; the inverse is needed for the solve anyway.
    try:
        m_inv = np.linalg.inv(m)
        cond = float(np.abs(m).sum(axis=0).max() * np.abs(m_inv).sum(axis=0).max())
    except np.linalg.LinAlgError:
        cond = math.inf
    if not np.isfinite(cond) or cond > threshold:
        raise SingularMapping(f"mapping matrix condition number {cond:.3g} exceeds {threshold:.3g}")
    rhs = np.append(np.asarray(torque_des, dtype=float), fz_des)
    raw = m_inv @ rhs
    clamped = np.clip(raw, params.thrust_min, params.thrust_max)
    return clamped, raw, bool(np.any(clamped != raw)), cond


def allocate_step2(fx_des: float, fy_des: float, thrusts_cmd: Vec, params: VehicleParams,
                   ) -> tuple[Vec, Vec, bool]:
    """Servo angles from lateral force demands and the step-1 axis thrusts.

    Returns ``(clamped, unclamped, saturated)``; the unclamped angles use an
    arcsin argument limited to +-1 so they stay defined for reporting.
    """
    fa1 = float(thrusts_cmd[0] + thrusts_cmd[2])
    fa2 = float(thrusts_cmd[1] + thrusts_cmd[3])
    if fa1 <= MIN_AXIS_THRUST or fa2 <= MIN_AXIS_THRUST:
        raise DegenerateThrust(f"axis thrust sums ({fa1:.3g}, {fa2:.3g}) N below {MIN_AXIS_THRUST} N")
    ratios = (float(fy_des) / fa1, float(fx_des) / -fa2)
    raw = np.array([math.asin(min(max(r, -1.0), 1.0)) for r in ratios])
    lim = params.servo_angle_limit
    s_bar = math.sin(lim)
    angles = np.array([min(max(math.asin(min(max(r, -s_bar), s_bar)), -lim), lim) for r in ratios])
    return angles, raw, any(abs(r) > s_bar for r in ratios)


class Allocator:
    """Per-vehicle allocator; remembers the servo angles that froze ``M``."""

    def __init__(self, params: VehicleParams, threshold: float = SINGULARITY_THRESHOLD):
        self.params = params
        self.threshold = threshold
        self.state = AllocationState()

    def allocate(self, wrench_des: Wrench, com_est: Vec, measured_servo: Vec) -> AllocationResult:
        thrusts, raw_thrusts, t_sat, cond = allocate_step1(
            wrench_des.torque, wrench_des.force[2], com_est, measured_servo, self.params, self.threshold
        )
        self.state.last_servo_angles = np.array(measured_servo, dtype=float)
        self.state.mapping_condition = cond
        angles, raw_angles, s_sat = allocate_step2(
            wrench_des.force[0], wrench_des.force[1], thrusts, self.params
        )
        return AllocationResult(ActuatorCommand(thrusts, angles), t_sat, s_sat, raw_thrusts, raw_angles)


def allocate(wrench_des: Wrench, com_est: Vec, measured_servo: Vec, params: VehicleParams) -> AllocationResult:
    return Allocator(params).allocate(wrench_des, com_est, measured_servo)

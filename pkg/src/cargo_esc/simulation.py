"""Closed-loop scenario runner.

One clock ticks at the inner rate; the outer position loop, the estimator
and the logger fire on integer multiples of that tick. Crashes and
allocation faults end the run and are recorded, never raised.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .allocation import AllocationError, Allocator
from .config import ScenarioConfig
from .control import AttitudeController, PositionController, Setpoint, compose_wrench, reciprocation_setpoint
from .dynamics import (
    ActuatorState,
    RigidState,
    check_divergence,
    sample_sensors,
    step_actuators,
    step_dynamics,
)
from .estimator import CoMEstimator, dither
from .vehicle import ActuatorCommand, Vec, VehicleParams, Wrench, body_wrench, torque_mapping_matrix

log = logging.getLogger(__name__)

# Fixed CSV column order.
LOG_COLUMNS = (
    "t_s",
    "pos_x", "pos_y", "pos_z",
    "vel_x", "vel_y", "vel_z",
    "roll", "pitch", "yaw",
    "rate_p", "rate_q", "rate_r",
    "pos_des_x", "pos_des_y", "pos_des_z",
    "F1_cmd", "F2_cmd", "F3_cmd", "F4_cmd",
    "theta1_cmd", "theta2_cmd",
    "theta1", "theta2",
    "tau_des_x", "tau_des_y", "tau_des_z",
    "force_des_x", "force_des_y", "force_des_z",
    "tau_real_x", "tau_real_y", "tau_real_z",
    "force_real_x", "force_real_y", "force_real_z",
    "gamma_1", "gamma_2", "gamma_3",
    "v_1", "v_2", "v_3",
    "k_tilde_1", "k_tilde_2", "k_tilde_3",
    "com_est_x", "com_est_y", "com_est_z",
    "thrust_saturated", "servo_saturated",
    "dither_on", "transport",
)


@dataclass
class RunLog:
    columns: tuple[str, ...] = LOG_COLUMNS
    rows: list[list[float]] = field(default_factory=list)
    termination_cause: str = "completed"
    termination_time: float | None = None
    termination_detail: str = ""
    convergence_time: float | None = None
    com_true: Vec = field(default_factory=lambda: np.zeros(3))
    transport_start: float | None = None
    scenario_id: str = "custom"

    def array(self) -> np.ndarray:
        return np.asarray(self.rows, dtype=float).reshape(-1, len(self.columns))

    def column(self, name: str) -> np.ndarray:
        return self.array()[:, self.columns.index(name)]

    def __len__(self) -> int:
        return len(self.rows)


def composite_com(empty: VehicleParams, payload_mass: float, attach: Vec) -> tuple[Vec, float, Vec]:
    """CoM, mass and inertia (about the new CoM) of vehicle plus point payload."""
    if payload_mass < 0:
        raise ValueError("payload mass must be non-negative")
    attach = np.asarray(attach, dtype=float)
    m_v = empty.mass
    total = m_v + payload_mass
    com = (m_v * empty.com_true + payload_mass * attach) / total

    def shift(m: float, d: Vec) -> Vec:
        return m * (np.dot(d, d) * np.eye(3) - np.outer(d, d))

    inertia = empty.inertia + shift(m_v, empty.com_true - com) + shift(payload_mass, attach - com)
    return com, total, inertia


def detect_convergence(times: np.ndarray, com_trace: np.ndarray, window: float = 5.0,
                       tolerance: float = 1e-3) -> tuple[bool, float | None]:
    """First time at which every component varied less than ``tolerance`` over the trailing window."""
    if window < 5.0:
        raise ValueError("window must be at least 5 s")
    times = np.asarray(times, dtype=float)
    trace = np.asarray(com_trace, dtype=float).reshape(len(times), -1)
    tracker = ConvergenceTracker(window, tolerance)
    for t, row in zip(times, trace):
        if tracker.push(t, row):
            return True, tracker.time
    return False, None


class ConvergenceTracker:
    """Streaming version of :func:`detect_convergence`."""

    def __init__(self, window: float, tolerance: float):
        self.window = window
        self.tolerance = tolerance
        self.buffer: deque[tuple[float, np.ndarray]] = deque()
        self.start: float | None = None
        self.time: float | None = None

    def push(self, t: float, value: Vec) -> bool:
        if self.time is not None:
            return True
        if self.start is None:
            self.start = t
        self.buffer.append((t, np.array(value, dtype=float)))
        while self.buffer and self.buffer[0][0] < t - self.window - 1e-9:
            self.buffer.popleft()
        if t - self.start < self.window - 1e-9:
            return False
        values = np.array([v for _, v in self.buffer])
        if np.all(values.max(axis=0) - values.min(axis=0) < self.tolerance):
            self.time = t
            return True
        return False


def plant_params(cfg: ScenarioConfig) -> VehicleParams:
    com, mass, inertia = composite_com(cfg.vehicle, cfg.payload.mass, cfg.payload.attach_position)
    v = cfg.vehicle
    return VehicleParams(
        mass=mass, inertia=inertia, arm_length_r=v.arm_length_r, servo_offset_l=v.servo_offset_l,
        yaw_thrust_ratio_xi=v.yaw_thrust_ratio_xi, com_true=com, gravity_g=v.gravity_g,
        servo_angle_limit=v.servo_angle_limit, thrust_min=v.thrust_min, thrust_max=v.thrust_max,
    )


def run_scenario(cfg: ScenarioConfig, initial_state: RigidState | None = None) -> RunLog:
    """Execute the multi-rate closed loop for ``cfg.duration`` seconds."""
    plant = plant_params(cfg)
    nominal = cfg.vehicle
    rates = cfg.rates
    dt = rates.dt
    outer_div = rates.divisor(rates.outer)
    est_div = rates.divisor(rates.estimator)
    log_div = rates.divisor(rates.log)
    n_ticks = int(round(cfg.duration * rates.inner))

    rng = np.random.default_rng(cfg.seed)
    state = initial_state or RigidState()
    allocator = Allocator(nominal)
    com_est = np.array(cfg.initial_com, dtype=float)
    # Start with the rotors at the controller's own hover trim.
    trim = allocator.allocate(Wrench(np.zeros(3), [0.0, 0.0, -nominal.mass * nominal.gravity_g]),
                              com_est, np.zeros(2))
    act = ActuatorState(trim.command.saturated(plant).thrusts)
    pos_ctl = PositionController(cfg.gains, nominal.mass, nominal.gravity_g)
    att_ctl = AttitudeController(cfg.gains)
    estimator = None
    if cfg.estimator_enabled:
        estimator = CoMEstimator(cfg.estimator, 1.0 / rates.estimator, cfg.initial_com,
                                 nominal.inertia * cfg.inertia_scale)
    recip = cfg.reciprocation
    transport_start = recip.start if recip.enabled else None
    tracker = ConvergenceTracker(cfg.convergence_window, cfg.convergence_tolerance)

    runlog = RunLog(com_true=plant.com_true.copy(), transport_start=transport_start, scenario_id=cfg.scenario_id)
    force_global = np.zeros(3)
    # Flight-side copy of the rotor lag, used to predict the delivered torque.
    rotor_model = act.rotor_thrusts_actual.copy()
    rotor_alpha = 1.0 - math.exp(-dt / cfg.actuators.tau_rotor)
    saturated = False
    estimating = estimator is not None
    track_from = cfg.estimator.start_time + cfg.estimator.warmup_time

    for tick in range(n_ticks + 1):
        t = tick / rates.inner
        if recip.enabled:
            sp = reciprocation_setpoint(t, recip.axis, recip.amplitude, recip.period, recip.start)
        else:
            sp = Setpoint()
        transporting = transport_start is not None and t >= transport_start
        if estimating and transporting and cfg.estimator_freeze_after_convergence:
            # Estimation always finishes before translation starts.
            estimator.freeze()
            estimating = False

        meas = sample_sensors(state, act, t, cfg.noise, rng)
        if tick % outer_div == 0:
            force_global = pos_ctl.update(sp, meas, outer_div * dt, freeze_integrator=saturated)
        torque_des = att_ctl.update(sp, meas, dt)

        if estimating and tick % est_div == 0:
            t_nom = torque_des
            if cfg.nominal_torque_source == "actuator_model":
                t_nom = torque_mapping_matrix(com_est, meas.servo_angle_meas, nominal) @ rotor_model
            estimator.update(meas.gyro, t_nom, t)
            com_est = estimator.com_est.copy()
        dither_on = estimating and estimator.dither_active(t)

        wrench = compose_wrench(force_global, torque_des, meas.attitude_meas)
        if dither_on:
            wrench = Wrench(wrench.torque, wrench.force + dither(t, cfg.estimator.dither))

        try:
            result = allocator.allocate(wrench, com_est, meas.servo_angle_meas)
        except AllocationError as exc:
            runlog.termination_cause = "fault"
            runlog.termination_time = t
            runlog.termination_detail = f"{type(exc).__name__}: {exc}"
            log.warning("allocation fault at t=%.3f s: %s", t, exc)
            break
        saturated = result.saturated

        if tick % log_div == 0:
            _record(runlog, t, state, sp, result.command, act, wrench, plant, estimator, com_est,
                    result.thrust_saturated, result.servo_saturated, dither_on, transporting)
            if estimating and t >= track_from - 1e-9 and tracker.push(t, com_est):
                if runlog.convergence_time is None:
                    runlog.convergence_time = tracker.time
                if cfg.estimator_freeze_after_convergence:
                    estimator.freeze()
                    estimating = False

        if tick == n_ticks:
            break
        act = step_actuators(act, result.command, dt, plant, cfg.actuators)
        rotor_model = rotor_model + rotor_alpha * (result.command.thrusts - rotor_model)
        state = step_dynamics(state, act, plant, dt)
        cause = check_divergence(state, cfg.divergence)
        if cause is not None:
            runlog.termination_cause = "crashed"
            runlog.termination_time = (tick + 1) / rates.inner
            runlog.termination_detail = cause
            log.info("run crashed at t=%.3f s (%s)", runlog.termination_time, cause)
            break

    if runlog.termination_time is None:
        runlog.termination_time = cfg.duration
    return runlog


def _record(runlog: RunLog, t: float, state: RigidState, sp: Setpoint, cmd: ActuatorCommand,
            act: ActuatorState, wrench_des: Wrench, plant: VehicleParams, estimator: CoMEstimator | None,
            com_est: Vec, thrust_sat: bool, servo_sat: bool, dither_on: bool, transporting: bool) -> None:
    realized = body_wrench(act.as_command(), plant.com_true, plant)
    if estimator is not None:
        st = estimator.state
        internals = [*st.gamma, *st.v, *st.k_tilde]
    else:
        internals = [0.0] * 9
    runlog.rows.append([
        t,
        *state.position, *state.velocity, *state.euler, *state.body_rates,
        *sp.position_des,
        *cmd.thrusts, *cmd.servo_angles, *act.servo_angles_actual,
        *wrench_des.torque, *wrench_des.force,
        *realized.torque, *realized.force,
        *internals,
        *com_est,
        float(thrust_sat), float(servo_sat), float(dither_on), float(transporting),
    ])

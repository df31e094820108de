"""Scenario configuration: YAML schema, defaults and ``key=value`` overrides.

The file is a nested mapping; every key is optional and falls back to
:data:`DEFAULTS`. Overrides use dotted paths, e.g.
``estimator.k3_source=neg_tau_y`` or ``payload.mass=0.3``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .control import ControllerGains
from .dynamics import ActuatorDynamics, DivergenceBounds, NoiseConfig
from .estimator import DitherConfig, EstimatorConfig, validate_stability
from .vehicle import Vec, VehicleParams

SCHEMA_VERSION = 1
SCENARIOS = ("estimate_fixed_payload", "transport_no_esc", "transport_with_esc", "custom")

# CoM of vehicle + 0.2 kg payload and the payload attachment point.
COMPOSITE_COM = np.array([0.0175, 0.0085, -0.0430])
PAYLOAD_MASS = 0.2
PAYLOAD_ATTACH = np.array([0.184, 0.0, -0.121])
VEHICLE_MASS = 2.405


def back_solve_empty_com(composite_com: Vec, vehicle_mass: float, payload_mass: float, attach: Vec) -> Vec:
    """Empty-vehicle CoM that yields ``composite_com`` once the payload is added."""
    total = vehicle_mass + payload_mass
    return (total * np.asarray(composite_com) - payload_mass * np.asarray(attach)) / vehicle_mass


EMPTY_COM = back_solve_empty_com(COMPOSITE_COM, VEHICLE_MASS, PAYLOAD_MASS, PAYLOAD_ATTACH)


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, Any] = {
    "schema_version": SCHEMA_VERSION,
    "scenario_id": "custom",
    "duration": 150.0,
    "seed": 0,
    "vehicle": {
        "mass": VEHICLE_MASS,
        "inertia": [0.035, 0.035, 0.045],
        "arm_length_r": 0.109,
        "servo_offset_l": 0.015,
        "yaw_thrust_ratio_xi": 0.01,
        "com": EMPTY_COM.tolist(),
        "gravity_g": 9.81,
        "servo_angle_limit": 0.3,
        "thrust_min": 0.0,
        "thrust_max": 15.0,
    },
    "payload": {"mass": PAYLOAD_MASS, "attach_position": PAYLOAD_ATTACH.tolist()},
    "reciprocation": {"enabled": False, "axis": "y", "amplitude": 3.0, "period": 20.0, "start": 100.0},
    "estimator": {
        "enabled": True,
        "freeze_after_convergence": False,
        "a1": 0.3,
        "a2": 0.7,
        "w1": 5.0,
        "w2": 3.0,
        "g1": 1.5,
        "g2": 0.5,
        "w_lowpass": 0.5,
        "q_factor": 20.0,
        "w_diff": 20.0,
        "k3_source": "tau_x",
        "envelope": 0.15,
        "delta_max": 0.35,
        "warmup_periods": 2.0,
        "start_time": 2.0,
        "inertia_scale": 1.0,
        "initial_com": None,
        "nominal_torque": "actuator_model",
    },
    "convergence": {"window": 20.0, "tolerance": 0.001},
    "rates": {"inner": 1000, "outer": 250, "estimator": 250, "log": 50},
    "actuators": {"tau_rotor": 0.02, "tau_servo": 0.08, "servo_rate_max": 4.0},
    "controller": {
        "pos_p": [2.0, 2.0, 2.0],
        "pos_i": [0.5, 0.5, 0.5],
        "pos_d": [0.7, 0.7, 0.7],
        "att_p": [2.0, 2.0, 1.0],
        "att_d": [0.45, 0.45, 0.3],
        "integrator_limit": [2.0, 2.0, 2.0],
        "att_i": [1.0, 1.0, 0.5],
        "att_integrator_limit": [0.6, 0.6, 0.3],
    },
    "noise": {"enabled": False, "gyro": 0.002, "attitude": 0.0, "position": 0.0, "velocity": 0.0, "servo_angle": 0.0},
    "divergence": {"max_tilt": 1.0, "max_distance": 50.0},
}

SCENARIO_PRESETS: dict[str, dict[str, Any]] = {
    "estimate_fixed_payload": {
        "duration": 150.0,
        "reciprocation": {"enabled": False},
        "estimator": {"enabled": True, "freeze_after_convergence": False},
    },
    "transport_no_esc": {
        "duration": 140.0,
        "reciprocation": {"enabled": True},
        "estimator": {"enabled": False, "freeze_after_convergence": True},
    },
    "transport_with_esc": {
        "duration": 140.0,
        "reciprocation": {"enabled": True},
        "estimator": {"enabled": True, "freeze_after_convergence": True},
    },
    "custom": {},
}

AXES = {"x": 0, "y": 1, "z": 2}


def _merge(base: dict, update: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        where = f"{path}{key}"
        if key not in out:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be a mapping")
            out[key] = _merge(out[key], value, where + ".")
        else:
            out[key] = value
    return out


def parse_override(text: str) -> dict[str, Any]:
    """Turn ``a.b.c=value`` into a nested mapping; the value is parsed as YAML."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    parts = key.strip().split(".")
    if not all(parts):
        raise ConfigError(f"malformed override key {key!r}")
    value: Any = yaml.safe_load(raw)
    for part in reversed(parts):
        value = {part: value}
    return value


@dataclass(frozen=True)
class Payload:
    mass: float
    attach_position: Vec


@dataclass(frozen=True)
class Reciprocation:
    enabled: bool
    axis: int
    amplitude: float
    period: float
    start: float


@dataclass(frozen=True)
class Rates:
    inner: int
    outer: int
    estimator: int
    log: int

    @property
    def dt(self) -> float:
        return 1.0 / self.inner

    def divisor(self, rate: int) -> int:
        return self.inner // rate


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_id: str
    duration: float
    seed: int
    vehicle: VehicleParams
    payload: Payload
    reciprocation: Reciprocation
    estimator_enabled: bool
    estimator_freeze_after_convergence: bool
    estimator: EstimatorConfig
    inertia_scale: float
    initial_com: Vec
    nominal_torque_source: str
    convergence_window: float
    convergence_tolerance: float
    rates: Rates
    actuators: ActuatorDynamics
    gains: ControllerGains
    noise: NoiseConfig
    divergence: DivergenceBounds
    raw: dict

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioConfig:
        try:
            return cls._build(data)
        except ConfigError:
            raise
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def _build(cls, data: dict) -> ScenarioConfig:
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {data.get('schema_version')!r}")
        sid = data["scenario_id"]
        if sid not in SCENARIOS:
            raise ConfigError(f"scenario_id must be one of {SCENARIOS}, got {sid!r}")
        duration = float(data["duration"])
        if not duration > 0:
            raise ConfigError(f"duration must be positive, got {duration}")

        v = data["vehicle"]
        inertia = np.asarray(v["inertia"], dtype=float)
        if inertia.shape == (3,):
            inertia = np.diag(inertia)
        vehicle = VehicleParams(
            mass=float(v["mass"]), inertia=inertia, arm_length_r=float(v["arm_length_r"]),
            servo_offset_l=float(v["servo_offset_l"]), yaw_thrust_ratio_xi=float(v["yaw_thrust_ratio_xi"]),
            com_true=np.asarray(v["com"], dtype=float), gravity_g=float(v["gravity_g"]),
            servo_angle_limit=float(v["servo_angle_limit"]), thrust_min=float(v["thrust_min"]),
            thrust_max=float(v["thrust_max"]),
        )

        p = data["payload"]
        payload = Payload(float(p["mass"]), np.asarray(p["attach_position"], dtype=float).reshape(3))
        if payload.mass < 0:
            raise ConfigError("payload mass must be non-negative")
        ax, ay, az = payload.attach_position
        if max(abs(ax), abs(ay)) > 0.25 or not -0.3 <= az <= 0.0:
            raise ConfigError(f"payload attach position {payload.attach_position} is off the fuselage top")

        rc = data["reciprocation"]
        axis = rc["axis"]
        if axis not in AXES:
            raise ConfigError(f"reciprocation axis must be one of {list(AXES)}")
        recip = Reciprocation(bool(rc["enabled"]), AXES[axis], float(rc["amplitude"]),
                              float(rc["period"]), float(rc["start"]))
        if recip.period <= 0:
            raise ConfigError("reciprocation period must be positive")

        e = data["estimator"]
        dither = DitherConfig(float(e["a1"]), float(e["a2"]), float(e["w1"]), float(e["w2"]))
        dither.check_amplitude(vehicle.mass, vehicle.gravity_g)
        est = EstimatorConfig(
            dither=dither, g1=float(e["g1"]), g2=float(e["g2"]), w_lowpass=float(e["w_lowpass"]),
            q_factor=float(e["q_factor"]), w_diff=float(e["w_diff"]), k3_source=e["k3_source"],
            envelope=float(e["envelope"]), delta_max=float(e["delta_max"]),
            warmup_periods=float(e["warmup_periods"]), start_time=float(e["start_time"]),
        )
        if est.k3_source not in ("tau_x", "neg_tau_y"):
            raise ConfigError(f"estimator.k3_source must be 'tau_x' or 'neg_tau_y', got {est.k3_source!r}")
        if e["enabled"]:
            report = validate_stability(est.g1, est.g2, est.w_lowpass, est.dither, est.delta_max)
            if not report.ok:
                raise ConfigError(f"estimator parameters rejected: {report}")
        if e["nominal_torque"] not in ("actuator_model", "commanded"):
            raise ConfigError("estimator.nominal_torque must be 'actuator_model' or 'commanded', "
                              f"got {e['nominal_torque']!r}")
        initial = vehicle.com_true if e["initial_com"] is None else np.asarray(e["initial_com"], dtype=float)

        r = data["rates"]
        rates = Rates(int(r["inner"]), int(r["outer"]), int(r["estimator"]), int(r["log"]))
        for name in ("outer", "estimator", "log"):
            rate = getattr(rates, name)
            if rate <= 0 or rates.inner % rate:
                raise ConfigError(f"rates.{name}={rate} must divide rates.inner={rates.inner}")
        if rates.inner < 200:
            raise ConfigError("rates.inner must be at least 200 Hz (plant step <= 5 ms)")
        log_div = rates.divisor(rates.log)
        if log_div % rates.divisor(rates.outer) or log_div % rates.divisor(rates.estimator):
            raise ConfigError("log period must be a multiple of the outer and estimator periods")

        conv = data["convergence"]
        if float(conv["window"]) < 5.0:
            raise ConfigError("convergence.window must be at least 5 s")

        return cls(
            scenario_id=sid, duration=duration, seed=int(data["seed"]), vehicle=vehicle, payload=payload,
            reciprocation=recip, estimator_enabled=bool(e["enabled"]),
            estimator_freeze_after_convergence=bool(e["freeze_after_convergence"]), estimator=est,
            inertia_scale=float(e["inertia_scale"]), initial_com=initial,
            nominal_torque_source=e["nominal_torque"],
            convergence_window=float(conv["window"]), convergence_tolerance=float(conv["tolerance"]),
            rates=rates, actuators=ActuatorDynamics(**{k: float(x) for k, x in data["actuators"].items()}),
            gains=ControllerGains(**data["controller"]),
            noise=NoiseConfig(**data["noise"]),
            divergence=DivergenceBounds(**{k: float(x) for k, x in data["divergence"].items()}),
            raw=data,
        )


def build_config(scenario: str | None = None, file_data: dict | None = None,
                 overrides: list[str] | tuple[str, ...] = (), **updates: Any) -> ScenarioConfig:
    """Layer defaults, scenario preset, file contents, overrides and keyword updates."""
    data = copy.deepcopy(DEFAULTS)
    file_data = dict(file_data or {})
    sid = scenario or file_data.get("scenario_id") or "custom"
    if sid not in SCENARIO_PRESETS:
        raise ConfigError(f"unknown scenario {sid!r}; choose from {SCENARIOS}")
    data = _merge(data, SCENARIO_PRESETS[sid])
    data = _merge(data, file_data)
    data["scenario_id"] = sid
    for text in overrides:
        data = _merge(data, parse_override(text))
    if updates:
        data = _merge(data, updates)
    return ScenarioConfig.from_dict(data)


def load_config(path: str | Path, scenario: str | None = None,
                overrides: list[str] | tuple[str, ...] = ()) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return build_config(scenario, data, overrides)


def dump_defaults(scenario: str = "custom") -> str:
    data = _merge(copy.deepcopy(DEFAULTS), SCENARIO_PRESETS[scenario])
    data["scenario_id"] = scenario
    return yaml.safe_dump(data, sort_keys=False)

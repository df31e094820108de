"""Model-free online centre-of-mass estimation by dither and demodulation.

A small sinusoidal force dither is injected into the body force demand. An
offset between the true and the assumed CoM turns that force into a torque
at the dither frequency. The estimator recovers the applied torque from the
gyro, subtracts the commanded torque, isolates each dither line with a
band-pass, demodulates, low-passes to a DC gradient and integrates it into
the CoM estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .filters import BandPassFilter, LowPassFilter
from .vehicle import Vec

K3Source = Literal["tau_x", "neg_tau_y"]


@dataclass(frozen=True)
class DitherConfig:
    a1: float = 0.3
    a2: float = 0.7
    w1: float = 5.0
    w2: float = 3.0
    q_margin: float = 20.0

    def __post_init__(self) -> None:
        if self.w1 <= 0 or self.w2 <= 0:
            raise ValueError("dither frequencies must be positive")
        if self.w1 == self.w2:
            raise ValueError("dither frequencies must differ")
        if abs(self.w1 - self.w2) < max(self.w1, self.w2) / self.q_margin:
            raise ValueError("dither frequencies too close for the band-pass filters to separate")
        if self.a1 < 0 or self.a2 < 0:
            raise ValueError("dither amplitudes must be non-negative")

    def check_amplitude(self, mass: float, gravity: float = 9.81) -> None:
        limit = 0.1 * mass * gravity
        if max(self.a1, self.a2) > limit:
            raise ValueError(f"dither amplitude exceeds 10% of hover thrust ({limit:.3g} N)")


@dataclass(frozen=True)
class EstimatorConfig:
    dither: DitherConfig = field(default_factory=DitherConfig)
    g1: float = 1.5
    g2: float = 0.5
    w_lowpass: float = 0.5
    q_factor: float = 20.0
    w_diff: float = 20.0
    k3_source: K3Source = "tau_x"
    envelope: float = 0.15
    delta_max: float = 0.35
    warmup_periods: float = 2.0
    start_time: float = 2.0

    @property
    def warmup_time(self) -> float:
        return self.warmup_periods * 2 * math.pi / min(self.dither.w1, self.dither.w2)

    @property
    def channel_gains(self) -> Vec:
        # x and y are demodulated by d2, z by d1.
        return np.array([self.g2, self.g2, self.g1])


def dither(t: float, cfg: DitherConfig) -> Vec:
    """Force dither ``[d1, d1, d2]``."""
    d1 = cfg.a1 * math.sin(cfg.w1 * t)
    d2 = cfg.a2 * math.sin(cfg.w2 * t)
    return np.array([d1, d1, d2])


def demodulation_signal(t: float, cfg: DitherConfig) -> Vec:
    """Per-channel reference ``[d2, d2, d1]``."""
    d1 = cfg.a1 * math.sin(cfg.w1 * t)
    d2 = cfg.a2 * math.sin(cfg.w2 * t)
    return np.array([d2, d2, d1])


def estimate_applied_torque(gyro_now: Vec, gyro_prev: Vec, dt: float, inertia_est: Vec) -> Vec:
    """Raw differentiator estimate ``J_hat (w_now - w_prev)/dt``.

    The gyroscopic term is neglected. Smoothing is applied by the caller
    (see :class:`CoMEstimator`).
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return inertia_est @ ((np.asarray(gyro_now) - np.asarray(gyro_prev)) / dt)


def torque_residual(t_hat: Vec, t_nominal: Vec) -> Vec:
    return np.asarray(t_hat, dtype=float) - np.asarray(t_nominal, dtype=float)


def k_map(delta_t: Vec, k3_source: K3Source = "tau_x") -> Vec:
    """Rearrange the torque residual so each entry carries one CoM axis."""
    tx, ty, _ = delta_t
    if k3_source == "tau_x":
        k3 = tx
    elif k3_source == "neg_tau_y":
        k3 = -ty
    else:
        raise ValueError(f"unknown k3_source {k3_source!r}")
    return np.array([ty, -tx, k3])


# ---------------------------------------------------------------- stability


@dataclass(frozen=True)
class ChannelReport:
    name: str
    gain: float
    w_lowpass: float
    amplitude: float
    w_demod: float
    delta: float
    eigenvalues: tuple[complex, complex]

    @property
    def hurwitz(self) -> bool:
        return all(ev.real < 0 for ev in self.eigenvalues)


@dataclass(frozen=True)
class StabilityReport:
    channels: tuple[ChannelReport, ...]
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "stable: " + ", ".join(
                f"{c.name} delta={c.delta:.3f} eig={[f'{e.real:.4f}' for e in c.eigenvalues]}" for c in self.channels
            )
        return "unstable: " + "; ".join(self.violations)


class UnstableEstimatorConfig(ValueError):
    def __init__(self, report: StabilityReport):
        super().__init__(str(report))
        self.report = report


def averaged_matrix(gain: float, w_lowpass: float, amplitude: float) -> Vec:
    """Averaged error/gradient dynamics in physical time.

    State ``[dp, v]`` with ``d(dp)/dt = -g v`` and ``dv/dt = w_L (a^2/2 dp - v)``.
    Dividing by ``w_demod * delta`` gives the normalised matrix.
    """
    return np.array([[0.0, -gain], [0.5 * w_lowpass * amplitude**2, -w_lowpass]])


def validate_stability(g1: float, g2: float, w_lowpass: float, dither_cfg: DitherConfig,
                       delta_max: float = 0.35) -> StabilityReport:
    """Check positivity, smallness and Hurwitz conditions for each channel."""
    violations: list[str] = []
    for name, value in (("g1", g1), ("g2", g2)):
        if not value > 0:
            violations.append(f"gain_positive[{name}]: {name}={value} must be > 0")
    if not w_lowpass > 0:
        violations.append(f"lowpass_positive: w_L={w_lowpass} must be > 0")

    channels = []
    specs = (
        ("x", g2, dither_cfg.a2, dither_cfg.w2),
        ("y", g2, dither_cfg.a2, dither_cfg.w2),
        ("z", g1, dither_cfg.a1, dither_cfg.w1),
    )
    for name, gain, amp, w in specs:
        delta = max(gain / w, w_lowpass / w)
        eig = np.linalg.eigvals(averaged_matrix(gain, w_lowpass, amp))
        report = ChannelReport(name, gain, w_lowpass, amp, w, delta, (complex(eig[0]), complex(eig[1])))
        channels.append(report)
        if delta > delta_max:
            violations.append(f"smallness[{name}]: delta={delta:.3f} exceeds {delta_max}")
        if not report.hurwitz:
            violations.append(f"hurwitz[{name}]: averaged matrix eigenvalues {eig} not in left half-plane")
    return StabilityReport(tuple(channels), tuple(violations))


# ---------------------------------------------------------------- estimator


@dataclass
class EstimatorState:
    com_est: Vec
    gamma: Vec = field(default_factory=lambda: np.zeros(3))
    v: Vec = field(default_factory=lambda: np.zeros(3))
    k: Vec = field(default_factory=lambda: np.zeros(3))
    k_tilde: Vec = field(default_factory=lambda: np.zeros(3))
    delta_t: Vec = field(default_factory=lambda: np.zeros(3))
    t_hat: Vec = field(default_factory=lambda: np.zeros(3))
    prev_gyro: Vec | None = None
    prev_time: float | None = None
    start_time: float | None = None
    frozen: bool = False


class CoMEstimator:
    """Runs the dither/demodulation pipeline at a fixed rate ``dt``.

    ``update`` must be called once per estimator tick with the gyro sample
    and the torque the attitude controller commanded on that tick.
    """

    def __init__(self, cfg: EstimatorConfig, dt: float, com_initial: Vec, inertia_est: Vec):
        report = validate_stability(cfg.g1, cfg.g2, cfg.w_lowpass, cfg.dither, cfg.delta_max)
        if not report.ok:
            raise UnstableEstimatorConfig(report)
        self.cfg = cfg
        self.dt = dt
        self.inertia_est = np.asarray(inertia_est, dtype=float)
        self.gains = cfg.channel_gains
        d = cfg.dither
        self.bandpass = (
            BandPassFilter(d.w2, cfg.q_factor, dt),
            BandPassFilter(d.w2, cfg.q_factor, dt),
            BandPassFilter(d.w1, cfg.q_factor, dt),
        )
        self.lowpass = LowPassFilter(cfg.w_lowpass, dt)
        # The same smoothing runs on the differentiated gyro and on the
        # commanded torque so the two stay phase-matched.
        self.smooth_hat = LowPassFilter(cfg.w_diff, dt)
        self.smooth_nominal = LowPassFilter(cfg.w_diff, dt)
        self.state = EstimatorState(com_est=np.array(com_initial, dtype=float))
        self._primed = False

    @property
    def com_est(self) -> Vec:
        return self.state.com_est

    def freeze(self) -> None:
        self.state.frozen = True

    def applied_torque(self, gyro: Vec, t: float) -> Vec:
        st = self.state
        if st.prev_gyro is None:
            raw = np.zeros(3)
        else:
            raw = estimate_applied_torque(gyro, st.prev_gyro, t - st.prev_time, self.inertia_est)
        st.prev_gyro = np.array(gyro, dtype=float)
        st.prev_time = t
        return self.smooth_hat.step(raw)

    def update(self, gyro: Vec, torque_nominal: Vec, t: float) -> EstimatorState:
        st = self.state
        if st.prev_gyro is None:
            self.smooth_nominal.reset(torque_nominal)
        t_hat = self.applied_torque(gyro, t)
        nominal = self.smooth_nominal.step(torque_nominal)
        st.t_hat = t_hat
        if t < self.cfg.start_time - 1e-12:
            # Differentiator and smoothing settle before the dither starts.
            return st
        return self.esc_update(torque_residual(t_hat, nominal), t)

    def dither_active(self, t: float) -> bool:
        return not self.state.frozen and t >= self.cfg.start_time - 1e-12

    def esc_update(self, delta_t: Vec, t: float) -> EstimatorState:
        """Band-pass, demodulate, low-pass and integrate one residual sample."""
        st = self.state
        if st.start_time is None:
            st.start_time = t
        st.delta_t = np.asarray(delta_t, dtype=float)
        st.k = k_map(st.delta_t, self.cfg.k3_source)
        if not self._primed:
            # A residual offset present at start-up would otherwise ring
            # through the narrow band-pass in phase with the dither.
            for bp, k in zip(self.bandpass, st.k):
                bp.prime(k)
            self._primed = True
        st.k_tilde = np.array([bp.step(k) for bp, k in zip(self.bandpass, st.k)])
        st.gamma = st.k_tilde * demodulation_signal(t, self.cfg.dither)
        st.v = self.lowpass.step(st.gamma).copy()
        warming = t - st.start_time < self.cfg.warmup_time
        if not (warming or st.frozen):
            # d(dp)/dt = -g v with dp = true - estimate, so the estimate
            # moves along +g v.
            st.com_est = np.clip(st.com_est + self.dt * self.gains * st.v, -self.cfg.envelope, self.cfg.envelope)
        return st


def simulate_reduced_loop(gain: float, w_lowpass: float, amplitude: float, w_demod: float,
                          dx0: float = 0.01, duration: float = 200.0, dt: float = 0.004,
                          ) -> tuple[np.ndarray, np.ndarray]:
    """One CoM channel with an ideal band-pass: ``gamma = d^2 dx``, low-pass, integrate.

    Returns sample times and the ``dx`` trace. Used to check the averaged
    model against the time-varying loop it approximates.
    """
    lp = LowPassFilter(w_lowpass, dt, size=1)
    n = int(round(duration / dt))
    times = np.arange(n + 1) * dt
    trace = np.empty(n + 1)
    dx = dx0
    for i, t in enumerate(times):
        trace[i] = dx
        d = amplitude * math.sin(w_demod * t)
        v = float(lp.step(np.array([d * d * dx]))[0])
        dx -= dt * gain * v
    return times, trace

"""Discrete filters used by the CoM estimator.

Both filters are bilinear-transform realisations with frequency prewarping,
so the band-pass has exactly unit gain at its centre and the low-pass has
exactly -3 dB at its cutoff.
"""

from __future__ import annotations

import math

import numpy as np


class BandPassFilter:
    """Second-order band-pass ``(w/Q) s / (s^2 + (w/Q) s + w^2)`` as a biquad."""

    def __init__(self, center_w: float, q_factor: float, dt: float):
        if center_w <= 0 or q_factor <= 0 or dt <= 0:
            raise ValueError("center_w, q_factor and dt must be positive")
        if center_w * dt >= math.pi:
            raise ValueError("center frequency must lie below Nyquist")
        self.center_w = center_w
        self.q_factor = q_factor
        self.dt = dt
        k = center_w / math.tan(center_w * dt / 2)
        bw = center_w / q_factor
        a0 = k * k + bw * k + center_w**2
        self.b = np.array([bw * k, 0.0, -bw * k]) / a0
        self.a = np.array([1.0, (2 * center_w**2 - 2 * k * k) / a0, (k * k - bw * k + center_w**2) / a0])
        self.reset()

    def reset(self) -> None:
        # Transposed direct form II state.
        self._z1 = 0.0
        self._z2 = 0.0

    def prime(self, x0: float) -> None:
        """Set the state to the steady state for a constant input ``x0`` (zero output)."""
        self._z1 = self._z2 = -self.b[0] * x0

    def step(self, x: float) -> float:
        b0, _, b2 = self.b
        _, a1, a2 = self.a
        y = b0 * x + self._z1
        self._z1 = -a1 * y + self._z2
        self._z2 = b2 * x - a2 * y
        return y

    def frequency_response(self, w: float) -> complex:
        """Discrete response at analogue frequency ``w`` [rad/s]."""
        z = np.exp(1j * w * self.dt)
        return complex(np.polyval(self.b[::-1], 1 / z) / np.polyval(self.a[::-1], 1 / z))

    @staticmethod
    def analog_response(center_w: float, q_factor: float, w: float) -> complex:
        s = 1j * w
        bw = center_w / q_factor
        return bw * s / (s * s + bw * s + center_w**2)


def bandpass_step(filt: BandPassFilter, sample: float) -> float:
    return filt.step(sample)


class LowPassFilter:
    """First-order low-pass ``w / (s + w)`` on a vector signal."""

    def __init__(self, cutoff_w: float, dt: float, size: int = 3):
        if cutoff_w <= 0 or dt <= 0:
            raise ValueError("cutoff_w and dt must be positive")
        self.cutoff_w = cutoff_w
        self.dt = dt
        k = cutoff_w / math.tan(cutoff_w * dt / 2)
        self.b0 = cutoff_w / (k + cutoff_w)
        self.a1 = (cutoff_w - k) / (k + cutoff_w)
        self.size = size
        self.reset()

    def reset(self, value: np.ndarray | None = None) -> None:
        """Start from a steady state at ``value`` (zero by default)."""
        v = np.zeros(self.size) if value is None else np.asarray(value, dtype=float).copy()
        self.y = v
        self._x_prev = v.copy()

    def step(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        self.y = self.b0 * (x + self._x_prev) - self.a1 * self.y
        self._x_prev = x.copy()
        return self.y

    def frequency_response(self, w: float) -> complex:
        z = np.exp(1j * w * self.dt)
        return complex(self.b0 * (1 + 1 / z) / (1 + self.a1 / z))

"""Polar range/azimuth measurements with dwell- and range-dependent noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_MEASURABLE_RANGE_M = 1.0


@dataclass(frozen=True)
class SensorModel:
    sigma_r0_sq: float      # m^2, range noise at the calibration point
    sigma_theta0_sq: float  # rad^2, azimuth noise at the calibration point
    r_ref: float            # m, calibration range
    tau_nom: float          # s, calibration dwell
    tau_min: float          # s, shortest dwell that still yields a measurement

    def __post_init__(self):
        for name in ("sigma_r0_sq", "sigma_theta0_sq", "r_ref", "tau_nom",
                     "tau_min"):
            if getattr(self, name) <= 0:
                raise ValueError(f"SensorModel.{name} must be > 0")


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.remainder(theta, 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    return w


def cartesian_to_polar(state: np.ndarray) -> np.ndarray:
    """Noise-free measurement function: [range, azimuth]."""
    x, y = float(state[0]), float(state[1])
    return np.array([math.hypot(x, y), math.atan2(y, x)])


def measurement_noise_cov(sensor: SensorModel, tau: float,
                          r_true: float) -> np.ndarray:
    """Diagonal noise covariance scaled by (r/r_ref)^4 / (tau/tau_nom).

    Matches reciprocal-SNR scaling: returned power grows with the fourth
    power of range and shrinks linearly with dwell.
    """
    if tau < sensor.tau_min:
        raise ValueError(
            f"dwell {tau} below tau_min {sensor.tau_min}: no measurement")
    scale = (r_true / sensor.r_ref) ** 4 * (sensor.tau_nom / tau)
    return np.diag([sensor.sigma_r0_sq * scale,
                    sensor.sigma_theta0_sq * scale])


def polar_measurement(state: np.ndarray, noise_cov: np.ndarray,
                      rng: np.random.Generator | None = None,
                      z2: np.ndarray | None = None) -> np.ndarray:
    """Noisy polar measurement of a Cartesian state.

    Noise can come from rng or from two externally supplied standard
    normals (z2), which lets paired rollouts share draws.
    """
    r = math.hypot(float(state[0]), float(state[1]))
    if r < MIN_MEASURABLE_RANGE_M:
        raise ValueError("singular geometry: target within 1 m of the radar")
    z = cartesian_to_polar(state)
    if z2 is None:
        z2 = rng.standard_normal(2) if rng is not None else np.zeros(2)
    z = z + np.sqrt(np.diag(noise_cov)) * z2
    z[1] = wrap_angle(z[1])
    return z


def polar_to_cartesian(z: np.ndarray) -> np.ndarray:
    """Position implied by a [range, azimuth] measurement."""
    return np.array([z[0] * math.cos(z[1]), z[0] * math.sin(z[1])])

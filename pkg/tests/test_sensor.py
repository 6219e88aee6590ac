import math

import numpy as np
import pytest

from radarrm.sensor import (SensorModel, cartesian_to_polar,
                            measurement_noise_cov, polar_measurement,
                            polar_to_cartesian, wrap_angle)


def sensor():
    return SensorModel(sigma_r0_sq=16.0, sigma_theta0_sq=1e-6,
                       r_ref=10_000.0, tau_nom=0.45, tau_min=0.01)


def test_measurement_on_x_axis():
    z = polar_measurement(np.array([1000.0, 0.0, 0.0, 0.0]), np.zeros((2, 2)))
    assert np.allclose(z, [1000.0, 0.0])


def test_measurement_on_y_axis():
    z = polar_measurement(np.array([0.0, 2000.0, 0.0, 0.0]), np.zeros((2, 2)))
    assert np.allclose(z, [2000.0, math.pi / 2])


def test_measurement_345_triangle():
    z = polar_measurement(np.array([3000.0, 4000.0, 1.0, 1.0]),
                          np.zeros((2, 2)))
    assert z[0] == pytest.approx(5000.0, abs=1e-9)
    assert z[1] == pytest.approx(0.9272952180016122, abs=1e-12)


def test_degenerate_position_rejected():
    with pytest.raises(ValueError, match="singular"):
        polar_measurement(np.array([0.1, 0.2, 0.0, 0.0]), np.zeros((2, 2)))


def test_noise_cov_at_calibration_point():
    r = measurement_noise_cov(sensor(), tau=0.45, r_true=10_000.0)
    assert np.allclose(r, np.diag([16.0, 1e-6]))


def test_noise_cov_fourth_power_range_scaling():
    base = measurement_noise_cov(sensor(), 0.45, 10_000.0)
    double = measurement_noise_cov(sensor(), 0.45, 20_000.0)
    assert np.allclose(double, 16.0 * base)


def test_noise_cov_inverse_dwell_scaling():
    base = measurement_noise_cov(sensor(), 0.45, 10_000.0)
    long_dwell = measurement_noise_cov(sensor(), 0.9, 10_000.0)
    assert np.allclose(long_dwell, 0.5 * base)


def test_short_dwell_means_no_measurement():
    with pytest.raises(ValueError, match="tau_min"):
        measurement_noise_cov(sensor(), 0.005, 10_000.0)


def test_sensor_fields_must_be_positive():
    with pytest.raises(ValueError):
        SensorModel(sigma_r0_sq=-1.0, sigma_theta0_sq=1e-6, r_ref=1.0,
                    tau_nom=1.0, tau_min=0.1)


def test_wrap_angle_range():
    rng = np.random.default_rng(5)
    for theta in rng.uniform(-50, 50, size=500):
        w = wrap_angle(theta)
        assert -math.pi < w <= math.pi
        # same direction modulo full turns
        assert math.isclose(math.cos(w), math.cos(theta), abs_tol=1e-9)
        assert math.isclose(math.sin(w), math.sin(theta), abs_tol=1e-9)


def test_polar_roundtrip():
    rng = np.random.default_rng(6)
    for _ in range(100):
        pos = rng.uniform(-10_000, 10_000, size=2)
        if np.hypot(*pos) < 1.0:
            continue
        z = cartesian_to_polar(np.array([pos[0], pos[1], 0.0, 0.0]))
        back = polar_to_cartesian(z)
        assert np.allclose(back, pos, atol=1e-6)


def test_measurement_noise_statistics():
    cov = np.diag([9.0, 0.01])
    rng = np.random.default_rng(7)
    zs = np.array([polar_measurement(np.array([5000.0, 0.0, 0, 0]), cov,
                                     rng=rng) for _ in range(20_000)])
    assert np.var(zs[:, 0]) == pytest.approx(9.0, rel=0.05)
    assert np.var(zs[:, 1]) == pytest.approx(0.01, rel=0.05)

import math

import numpy as np
import pytest

from radarrm.scanning import (ScanModel, beam_duration, detection_probability,
                              detection_trial, required_snr,
                              scan_effectiveness)


def calibrated():
    return ScanModel(p_false_alarm=1e-3, p_detection=0.9, r_0=10_000.0,
                     mode="calibrated", tau_s_ref=0.25)


def test_beam_duration():
    assert beam_duration(0.36, 1.0) == pytest.approx(0.001)
    assert beam_duration(1.7, 360.0) == pytest.approx(1.7)
    assert beam_duration(0.0, 5.0) == 0.0
    with pytest.raises(ValueError):
        beam_duration(-1.0, 1.0)
    with pytest.raises(ValueError):
        beam_duration(1.0, 0.0)


def test_required_snr_reference_point():
    assert required_snr(1e-3, 0.9) == pytest.approx(64.5630359803485,
                                                    abs=1e-10)


def test_required_snr_log_doubling_identity():
    base = required_snr(1e-3, 0.9)
    assert required_snr(1e-6, 0.9) == pytest.approx(2 * base + 1, rel=1e-12)


def test_required_snr_vanishes_as_pd_approaches_pf():
    assert required_snr(0.5, 0.5 + 1e-9) < 1e-6


def test_required_snr_rejects_bad_probabilities():
    for pf, pd in ((0.9, 0.5), (0.0, 0.5), (1e-3, 1.0), (-0.1, 0.5)):
        with pytest.raises(ValueError):
            required_snr(pf, pd)


def test_calibration_point():
    gamma, r_max = scan_effectiveness(calibrated(), 0.25)
    assert gamma == pytest.approx(1.0)
    assert r_max == pytest.approx(10_000.0)


def test_fourth_root_scaling():
    gamma, r_max = scan_effectiveness(calibrated(), 16 * 0.25)
    assert gamma == pytest.approx(4.0)
    assert r_max == pytest.approx(20_000.0)


def test_zero_scan_time_gives_zero():
    gamma, r_max = scan_effectiveness(calibrated(), 0.0)
    assert gamma == 0.0 and r_max == 0.0


def test_gamma_strictly_increasing():
    scan = calibrated()
    taus = np.linspace(0.01, 2.5, 40)
    gammas = [scan_effectiveness(scan, t)[0] for t in taus]
    assert all(a < b for a, b in zip(gammas, gammas[1:]))


def test_physical_mode_unit_constants():
    scan = ScanModel(p_false_alarm=1e-3, p_detection=0.9, r_0=1.0,
                     mode="physical", phase_delay_deg=360.0,
                     boltzmann=1.0, system_temp=1.0)
    # with every constant 1 the SNR at r=1 is tau_beam / (4 pi)^3
    from radarrm.scanning import snr_at_range
    tau_beam = 0.7
    assert snr_at_range(scan, tau_beam, 1.0) == pytest.approx(
        tau_beam / 1984.4017075391882, rel=1e-12)
    # r_max solves snr(r_max) = snr_min
    gamma, r_max = scan_effectiveness(scan, tau_beam)
    assert snr_at_range(scan, tau_beam, r_max) == pytest.approx(scan.snr_min,
                                                                rel=1e-9)
    assert gamma == pytest.approx(r_max ** 2, rel=1e-12)


def test_detection_probability_at_design_range():
    scan = calibrated()
    assert detection_probability(8_000.0, 8_000.0, scan) == pytest.approx(0.9)


def test_detection_probability_floor_is_false_alarm_rate():
    scan = calibrated()
    assert detection_probability(5_000.0, 0.0, scan) == pytest.approx(1e-3)


def test_detection_probability_at_half_range():
    scan = calibrated()
    snr = scan.snr_min
    expected = (1e-3) ** (1.0 / (1.0 + 16.0 * snr))
    got = detection_probability(4_000.0, 8_000.0, scan)
    assert got == pytest.approx(expected, rel=1e-12)
    assert got == pytest.approx(0.9933417063417872, rel=1e-9)


def test_detection_beyond_surveillance_horizon_is_zero():
    scan = calibrated()
    assert detection_probability(20_001.0, 50_000.0, scan) == 0.0


def test_detection_trial_statistics():
    scan = calibrated()
    rng = np.random.default_rng(9)
    hits = sum(detection_trial(8000.0, 8000.0, scan, rng=rng)
               for _ in range(20_000))
    assert hits / 20_000 == pytest.approx(0.9, abs=0.01)


def test_scan_model_validation():
    with pytest.raises(ValueError):
        ScanModel(p_false_alarm=1e-3, p_detection=0.9, r_0=1.0, mode="laser")
    with pytest.raises(ValueError):
        ScanModel(p_false_alarm=0.95, p_detection=0.9, r_0=1.0)

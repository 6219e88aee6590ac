"""Scan-beam geometry, detectability, and scan effectiveness."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.constants

SURVEILLANCE_RADIUS_M = 20_000.0


def required_snr(p_false_alarm: float, p_detection: float) -> float:
    """Minimum linear SNR so a fluctuating target is detected at p_detection.

    Inverts p_d = p_f^(1 / (1 + snr)).
    """
    if not (0.0 < p_false_alarm < p_detection < 1.0):
        raise ValueError("need 0 < p_false_alarm < p_detection < 1")
    return math.log(p_false_alarm) / math.log(p_detection) - 1.0


def beam_duration(tau_s: float, phase_delay_deg: float) -> float:
    """Per-beam time when tau_s seconds cover 360/phase_delay beams."""
    if tau_s < 0 or phase_delay_deg <= 0:
        raise ValueError("need tau_s >= 0 and phase_delay_deg > 0")
    return tau_s * phase_delay_deg / 360.0


@dataclass(frozen=True)
class ScanModel:
    """Scan geometry in one of two modes.

    calibrated: r_max = r_0 * (tau_s / tau_s_ref)^(1/4), so effectiveness
    is exactly 1 when tau_s = tau_s_ref.
    physical: r_max solves the radar range equation for the minimum
    detectable SNR.
    """
    p_false_alarm: float
    p_detection: float
    r_0: float
    mode: str = "calibrated"
    tau_s_ref: float = 0.25
    phase_delay_deg: float = 1.0
    # physical-mode constants
    tx_power: float = 1.0
    tx_gain: float = 1.0
    rx_gain: float = 1.0
    wavelength: float = 1.0
    cross_section: float = 1.0
    loss: float = 1.0
    system_temp: float = 1.0
    boltzmann: float = scipy.constants.k

    def __post_init__(self):
        if self.mode not in ("calibrated", "physical"):
            raise ValueError(f"unknown scan mode {self.mode!r}")
        if self.mode == "calibrated" and self.tau_s_ref <= 0:
            raise ValueError("calibrated mode needs tau_s_ref > 0")
        if self.r_0 <= 0:
            raise ValueError("need r_0 > 0")
        self.snr_min  # validates the probability pair

    @property
    def snr_min(self) -> float:
        return required_snr(self.p_false_alarm, self.p_detection)


def snr_at_range(scan: ScanModel, tau_beam: float, r: float) -> float:
    """Received linear SNR of the scan beam at range r (physical mode)."""
    if r <= 0:
        raise ValueError("need r > 0")
    num = (scan.tx_power * tau_beam * scan.tx_gain * scan.rx_gain
           * scan.wavelength ** 2 * scan.cross_section)
    den = ((4.0 * math.pi) ** 3 * r ** 4 * scan.loss
           * scan.boltzmann * scan.system_temp)
    return num / den


def scan_effectiveness(scan: ScanModel, tau_s: float) -> tuple[float, float]:
    """Return (gamma, r_max) for a scan of tau_s seconds.

    gamma = (r_max / r_0)^2 is the detectable-area ratio; it is 0 at
    tau_s = 0 and strictly increasing in tau_s.
    """
    if tau_s < 0:
        raise ValueError("need tau_s >= 0")
    if scan.mode == "calibrated":
        r_max = scan.r_0 * (tau_s / scan.tau_s_ref) ** 0.25
    else:
        tau_beam = beam_duration(tau_s, scan.phase_delay_deg)
        if tau_beam == 0.0:
            r_max = 0.0
        else:
            num = (scan.tx_power * tau_beam * scan.tx_gain * scan.rx_gain
                   * scan.wavelength ** 2 * scan.cross_section)
            den = ((4.0 * math.pi) ** 3 * scan.loss * scan.boltzmann
                   * scan.system_temp * scan.snr_min)
            r_max = (num / den) ** 0.25
    gamma = (r_max / scan.r_0) ** 2
    return gamma, r_max


def detection_probability(r_true: float, r_max: float, scan: ScanModel,
                          horizon: float = SURVEILLANCE_RADIUS_M) -> float:
    """Single-scan detection probability for a target at r_true.

    Equals p_detection exactly at r_true = r_max and decays with the
    fourth power of range beyond it; targets past the surveillance
    horizon are never detected.
    """
    if r_true <= 0:
        raise ValueError("need r_true > 0")
    if r_true > horizon:
        return 0.0
    snr = scan.snr_min * (r_max / r_true) ** 4
    return scan.p_false_alarm ** (1.0 / (1.0 + snr))


def detection_trial(r_true: float, r_max: float, scan: ScanModel,
                    rng: np.random.Generator | None = None,
                    u: float | None = None) -> bool:
    """Bernoulli detection draw; u may supply the uniform externally."""
    p = detection_probability(r_true, r_max, scan)
    if u is None:
        u = float(rng.uniform())
    return u < p

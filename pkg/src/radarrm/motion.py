"""Constant-velocity target motion with white-acceleration process noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TargetTruth:
    """Ground-truth kinematics: state = [x, y, vx, vy] (m, m/s)."""
    id: int
    state: np.ndarray
    birth_slot: int

    def range_to_origin(self) -> float:
        return float(np.hypot(self.state[0], self.state[1]))


def cv_transition(t0: float) -> np.ndarray:
    """Constant-velocity transition matrix for a step of t0 seconds."""
    f = np.eye(4)
    f[0, 2] = t0
    f[1, 3] = t0
    return f


def accel_noise_gain(t0: float) -> np.ndarray:
    """Maps a 2-vector of per-axis accelerations into the 4-d state."""
    return np.array([
        [0.5 * t0 ** 2, 0.0],
        [0.0, 0.5 * t0 ** 2],
        [t0, 0.0],
        [0.0, t0],
    ])


def dwna_cov(t0: float, sigma_w_sq: float) -> np.ndarray:
    """Discrete white-noise-acceleration covariance (rank 2, PSD)."""
    g = accel_noise_gain(t0)
    return sigma_w_sq * (g @ g.T)


@dataclass(frozen=True)
class MotionModel:
    f: np.ndarray       # 4x4 transition
    q: np.ndarray       # 4x4 process-noise covariance
    t0: float
    sigma_w_sq: float

    @classmethod
    def constant_velocity(cls, t0: float, sigma_w_sq: float) -> "MotionModel":
        if t0 <= 0 or sigma_w_sq < 0:
            raise ValueError("need t0 > 0 and sigma_w_sq >= 0")
        return cls(f=cv_transition(t0), q=dwna_cov(t0, sigma_w_sq),
                   t0=t0, sigma_w_sq=sigma_w_sq)


def process_noise(model: MotionModel, z2: np.ndarray) -> np.ndarray:
    """Exact N(0, Q) draw from two standard normals (Q is rank 2)."""
    return accel_noise_gain(model.t0) @ (np.sqrt(model.sigma_w_sq) * z2)


def propagate_state(state: np.ndarray, model: MotionModel,
                    z2: np.ndarray | None = None) -> np.ndarray:
    """One motion step; z2 are the two standard-normal acceleration draws."""
    out = model.f @ state
    if z2 is not None:
        out = out + process_noise(model, z2)
    return out


def propagate_targets(truths: list[TargetTruth], model: MotionModel,
                      rng: np.random.Generator) -> list[TargetTruth]:
    """Advance every truth one step, drawing process noise from rng."""
    out = []
    for t in truths:
        z2 = rng.standard_normal(2)
        out.append(TargetTruth(id=t.id,
                               state=propagate_state(t.state, model, z2),
                               birth_slot=t.birth_slot))
    return out

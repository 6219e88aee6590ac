"""Extended Kalman filter for the polar measurement model, plus tracks."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .motion import MotionModel
from .sensor import wrap_angle

# Extracts the position block from the 4-d state.
POSITION_SELECTOR = np.array([[1.0, 0.0, 0.0, 0.0],
                              [0.0, 1.0, 0.0, 0.0]])


class TrackStatus(enum.Enum):
    UNTRACKED = "untracked"
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"


@dataclass
class Track:
    """Per-target estimate. Tentative tracks hold only a position fix."""
    target_id: int
    x: np.ndarray                   # 4-vector estimate
    p: np.ndarray                   # 4x4 covariance
    history: list[int] = field(default_factory=list)  # last-4 detection bits
    status: TrackStatus = TrackStatus.TENTATIVE
    cost: float = 0.0               # position-covariance trace, m^2


def symmetrize(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def tracking_cost(p: np.ndarray) -> float:
    """Trace of the position block of the covariance: p[0,0] + p[1,1]."""
    return float(p[0, 0] + p[1, 1])


def measurement_jacobian(x: np.ndarray) -> np.ndarray:
    """Jacobian of [range, azimuth] at the state estimate."""
    px, py = float(x[0]), float(x[1])
    r2 = px * px + py * py
    r = math.sqrt(r2)
    if r2 == 0.0:
        raise ValueError("measurement jacobian undefined at the origin")
    return np.array([
        [px / r, py / r, 0.0, 0.0],
        [-py / r2, px / r2, 0.0, 0.0],
    ])


def predict(x: np.ndarray, p: np.ndarray,
            model: MotionModel) -> tuple[np.ndarray, np.ndarray]:
    """Time update: x <- F x, P <- F P F^T + Q (symmetrized)."""
    x2 = model.f @ x
    p2 = symmetrize(model.f @ p @ model.f.T + model.q)
    return x2, p2


def kalman_update(x: np.ndarray, p: np.ndarray, innovation: np.ndarray,
                  h: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Linear measurement update shared by the EKF and any linear readout.

    Raises numpy.linalg.LinAlgError when the innovation covariance is
    singular.
    """
    s = h @ p @ h.T + r
    k = np.linalg.solve(s, h @ p).T
    x2 = x + k @ innovation
    p2 = symmetrize((np.eye(p.shape[0]) - k @ h) @ p)
    return x2, p2


def update(x: np.ndarray, p: np.ndarray, z: np.ndarray,
           r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """EKF measurement update with the polar model linearized at x."""
    h = measurement_jacobian(x)
    px, py = float(x[0]), float(x[1])
    predicted = np.array([math.hypot(px, py), math.atan2(py, px)])
    innovation = z - predicted
    innovation[1] = wrap_angle(float(innovation[1]))
    return kalman_update(x, p, innovation, h, r)


def ekf_predict(track: Track, model: MotionModel) -> Track:
    if track.status is TrackStatus.UNTRACKED:
        raise ValueError("cannot predict an untracked target")
    x2, p2 = predict(track.x, track.p, model)
    return replace(track, x=x2, p=p2, cost=tracking_cost(p2))


def ekf_update(track: Track, z: np.ndarray, r: np.ndarray) -> Track:
    x2, p2 = update(track.x, track.p, z, r)
    return replace(track, x=x2, p=p2, cost=tracking_cost(p2))

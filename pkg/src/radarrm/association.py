"""Global-nearest-neighbor assignment of measurements to tracks."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .sensor import polar_to_cartesian


def gnn_associate(measurements: list[np.ndarray], tracks: list,
                  gate: float) -> dict[int, int]:
    """One-to-one measurement-to-track assignment.

    Converts polar measurements to Cartesian positions, finds the
    complete matching of minimum total Euclidean distance to the track
    position estimates, then discards matched pairs farther apart than
    the gate. Returns {measurement index: track index}.
    """
    if not measurements or not tracks:
        return {}
    meas_xy = np.array([polar_to_cartesian(z) for z in measurements])
    track_xy = np.array([t.x[:2] for t in tracks])
    dist = np.linalg.norm(meas_xy[:, None, :] - track_xy[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(dist)
    return {int(i): int(j) for i, j in zip(rows, cols)
            if dist[i, j] <= gate}

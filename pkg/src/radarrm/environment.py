"""Multi-target radar environment: scan, track, and score dwell allocations.

Each step spends a fixed T0-second cycle: per-target tracking dwells plus
whatever is left for scanning. Random draws follow a fixed per-slot quota
(motion, measurement, and detection draws for every live target whether or
not they end up used), so environments built from the same seed consume
their streams identically regardless of the policy driving them. That is
what makes common-random-number policy comparisons exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .association import gnn_associate
from .config import ExperimentConfig
from .ekf import Track, TrackStatus, ekf_predict, ekf_update, tracking_cost
from .motion import MotionModel, TargetTruth, propagate_state
from .scanning import (SURVEILLANCE_RADIUS_M, ScanModel, detection_probability,
                       scan_effectiveness)
from .sensor import (SensorModel, measurement_noise_cov, polar_measurement,
                     polar_to_cartesian)

SPAWN_PERIOD_SLOTS = 100
MAX_TARGET_AGE_SLOTS = 3_000
SPAWN_RANGE_M = (2_000.0, 15_000.0)
SPAWN_SPEED_MPS = (50.0, 300.0)
TRACK_INIT_POS_STD_M = 100.0
TRACK_INIT_VEL_STD_MPS = 50.0
CONFIRM_HITS = 3
CONFIRM_WINDOW = 4


@dataclass(frozen=True)
class RewardConfig:
    beta: float
    theta_max: float
    t0: float
    n_targets: int

    def __post_init__(self):
        if not (0.0 < self.theta_max <= 1.0):
            raise ValueError("theta_max must be in (0, 1]")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")


@dataclass
class StepOutcome:
    costs: np.ndarray        # (N,) m^2, zero for slots without a confirmed track
    estimates: np.ndarray    # (N, 2) m, zero rows for absent tracks
    gamma: float             # scan effectiveness
    utility: float           # -sum(costs) + beta * gamma
    reward: float            # utility - lambda * (usage - theta_max)
    usage: float             # sum(raw dwells) / t0
    tau_s: float             # executed scan time, seconds


def confirmed_by_history(history: list[int]) -> bool:
    """Track-initiation rule: 3 hits within the last 4 scans."""
    return sum(history[-CONFIRM_WINDOW:]) >= CONFIRM_HITS


def push_history(history: list[int], bit: int) -> list[int]:
    """Append a detection bit, keeping the sliding 4-scan window."""
    return (history + [bit])[-CONFIRM_WINDOW:]


def initial_track_cov() -> np.ndarray:
    return np.diag([TRACK_INIT_POS_STD_M ** 2, TRACK_INIT_POS_STD_M ** 2,
                    TRACK_INIT_VEL_STD_MPS ** 2, TRACK_INIT_VEL_STD_MPS ** 2])


def start_tentative(target_id: int, z: np.ndarray) -> Track:
    """Tentative track seeded by one measurement: position fix, zero velocity."""
    pos = polar_to_cartesian(z)
    return Track(target_id=target_id,
                 x=np.array([pos[0], pos[1], 0.0, 0.0]),
                 p=initial_track_cov(),
                 history=[1],
                 status=TrackStatus.TENTATIVE,
                 cost=0.0)


def confirm(track: Track) -> Track:
    """Promote a tentative track; EKF starts from its last position fix."""
    p0 = initial_track_cov()
    track.status = TrackStatus.CONFIRMED
    track.p = p0
    track.x = np.array([track.x[0], track.x[1], 0.0, 0.0])
    track.cost = tracking_cost(p0)
    return track


@dataclass(frozen=True)
class EnvParams:
    n_targets: int
    t0: float
    theta_max: float
    beta: float
    join_prob: float
    tau_min: float
    gate: float
    motion: MotionModel
    sensor: SensorModel
    scan: ScanModel


def build_env_params(cfg: ExperimentConfig) -> EnvParams:
    motion = MotionModel.constant_velocity(cfg.t0, cfg.sigma_w)
    sensor = SensorModel(sigma_r0_sq=cfg.sigma_r0_sq,
                         sigma_theta0_sq=cfg.sigma_theta0_sq,
                         r_ref=cfg.r_0, tau_nom=cfg.tau_nom,
                         tau_min=cfg.tau_min)
    scan = ScanModel(p_false_alarm=cfg.p_false_alarm,
                     p_detection=cfg.p_detection,
                     r_0=cfg.r_0, mode=cfg.scan_mode,
                     tau_s_ref=cfg.tau_s_ref,
                     phase_delay_deg=cfg.phase_delay_deg)
    return EnvParams(n_targets=cfg.n_targets, t0=cfg.t0,
                     theta_max=cfg.theta_max, beta=cfg.beta,
                     join_prob=cfg.join_prob, tau_min=cfg.tau_min,
                     gate=cfg.gate, motion=motion, sensor=sensor, scan=scan)


def build_environment(cfg: ExperimentConfig, seed: int) -> "RadarEnv":
    return RadarEnv(build_env_params(cfg), seed)


class RadarEnv:
    """Deterministic-given-seed environment over N target slots.

    Four independent streams (spawn, motion, measurement, detection) are
    derived from the seed in a fixed order; instances never share state,
    so many environments may run concurrently.
    """

    def __init__(self, params: EnvParams, seed: int | np.random.SeedSequence):
        self.params = params
        ss = (seed if isinstance(seed, np.random.SeedSequence)
              else np.random.SeedSequence(seed))
        spawn_ss, motion_ss, meas_ss, detect_ss = ss.spawn(4)
        self._rng_spawn = np.random.default_rng(spawn_ss)
        self._rng_motion = np.random.default_rng(motion_ss)
        self._rng_meas = np.random.default_rng(meas_ss)
        self._rng_detect = np.random.default_rng(detect_ss)

        n = params.n_targets
        self.slot = 0
        self.truths: list[TargetTruth | None] = [None] * n
        self.tracks: list[Track | None] = [None] * n
        self._next_id = 1

    # -- observation helpers -------------------------------------------------

    def confirmed_mask(self) -> np.ndarray:
        return np.array([t is not None and t.status is TrackStatus.CONFIRMED
                         for t in self.tracks])

    def track_estimates(self) -> np.ndarray:
        """(N, 2) position estimates; zero rows for unconfirmed slots."""
        out = np.zeros((self.params.n_targets, 2))
        for i, t in enumerate(self.tracks):
            if t is not None and t.status is TrackStatus.CONFIRMED:
                out[i] = t.x[:2]
        return out

    def track_costs(self) -> np.ndarray:
        out = np.zeros(self.params.n_targets)
        for i, t in enumerate(self.tracks):
            if t is not None and t.status is TrackStatus.CONFIRMED:
                out[i] = t.cost
        return out

    # -- core dynamics --------------------------------------------------------

    def step(self, action: np.ndarray, lam: float) -> StepOutcome:
        """Run one T0-second cycle.

        Order: budget feasibility, scanning and track initiation, per-track
        dwell measurements and EKF updates, truth propagation, then target
        spawn/retire. The raw action drives the budget penalty; dwells are
        rescaled only for execution when they oversubscribe T0.
        """
        p = self.params
        action = np.asarray(action, dtype=float)
        if action.shape != (p.n_targets,):
            raise ValueError(f"action must have shape ({p.n_targets},)")
        if np.any(action < 0) or np.any(action > p.t0):
            raise ValueError("action components must lie in [0, t0]")

        # Fixed per-slot draw quota (see module docstring).
        alive = [i for i, t in enumerate(self.truths) if t is not None]
        z_motion = {i: self._rng_motion.standard_normal(2) for i in alive}
        z_meas = {i: self._rng_meas.standard_normal(2) for i in alive}
        u_detect = {i: float(self._rng_detect.uniform()) for i in alive}

        raw_sum = float(action.sum())
        usage = raw_sum / p.t0
        if raw_sum > p.t0:
            executed = action * (p.t0 / raw_sum)
        else:
            executed = action.copy()
        tau_s = max(0.0, p.t0 - float(executed.sum()))

        # Scan: detection trials for targets without a confirmed track.
        gamma, r_max = scan_effectiveness(p.scan, tau_s)
        self._scan_and_initiate(r_max, z_meas, u_detect)

        # Track: dwell measurement + EKF cycle per confirmed track.
        costs = np.zeros(p.n_targets)
        estimates = np.zeros((p.n_targets, 2))
        for i in alive:
            track = self.tracks[i]
            if track is None or track.status is not TrackStatus.CONFIRMED:
                continue
            track = ekf_predict(track, p.motion)
            if executed[i] >= p.tau_min:
                r_true = self.truths[i].range_to_origin()
                noise_cov = measurement_noise_cov(p.sensor, executed[i], r_true)
                z = polar_measurement(self.truths[i].state, noise_cov,
                                      z2=z_meas[i])
                track = ekf_update(track, z, noise_cov)
            self.tracks[i] = track
            costs[i] = track.cost
            estimates[i] = track.x[:2]

        utility = -float(costs.sum()) + p.beta * gamma
        reward = utility - lam * (usage - p.theta_max)

        # Truth evolution, then population churn.
        for i in alive:
            t = self.truths[i]
            self.truths[i] = TargetTruth(
                id=t.id, state=propagate_state(t.state, p.motion, z_motion[i]),
                birth_slot=t.birth_slot)
        self._spawn_and_retire()

        self.slot += 1
        return StepOutcome(costs=costs, estimates=estimates, gamma=gamma,
                           utility=utility, reward=reward, usage=usage,
                           tau_s=tau_s)

    def _scan_and_initiate(self, r_max: float, z_meas: dict[int, np.ndarray],
                           u_detect: dict[int, float]) -> None:
        """Detection trials, GNN association, and the 3-of-4 promotion rule."""
        p = self.params
        meas: list[np.ndarray] = []
        sources: list[int] = []
        for i, truth in enumerate(self.truths):
            if truth is None:
                continue
            track = self.tracks[i]
            if track is not None and track.status is TrackStatus.CONFIRMED:
                continue
            r_true = truth.range_to_origin()
            if r_true < 1.0:
                continue
            if u_detect[i] < detection_probability(r_true, r_max, p.scan):
                noise_cov = measurement_noise_cov(p.sensor, p.sensor.tau_nom,
                                                  r_true)
                meas.append(polar_measurement(truth.state, noise_cov,
                                              z2=z_meas[i]))
                sources.append(i)

        tent_slots = [i for i, t in enumerate(self.tracks)
                      if t is not None and t.status is TrackStatus.TENTATIVE]
        tentative = [self.tracks[i] for i in tent_slots]
        assignment = gnn_associate(meas, tentative, p.gate)

        hits: dict[int, np.ndarray] = {}
        for m_idx, t_idx in assignment.items():
            hits[tent_slots[t_idx]] = meas[m_idx]
        for m_idx, src in enumerate(sources):
            if m_idx in assignment:
                continue
            if self.tracks[src] is None:
                self.tracks[src] = start_tentative(self.truths[src].id,
                                                   meas[m_idx])
            elif src not in hits:
                # measurement fell outside every gate; credit its own slot
                hits[src] = meas[m_idx]

        for i in tent_slots:
            track = self.tracks[i]
            bit = 1 if i in hits else 0
            if bit:
                pos = polar_to_cartesian(hits[i])
                track.x = np.array([pos[0], pos[1], 0.0, 0.0])
            track.history = push_history(track.history, bit)
            if confirmed_by_history(track.history):
                confirm(track)

    def _spawn_and_retire(self) -> None:
        p = self.params
        for i, truth in enumerate(self.truths):
            if truth is None:
                continue
            age = self.slot - truth.birth_slot
            if age > MAX_TARGET_AGE_SLOTS or \
                    truth.range_to_origin() > SURVEILLANCE_RADIUS_M:
                self.truths[i] = None
                self.tracks[i] = None

        if self.slot % SPAWN_PERIOD_SLOTS == 0:
            u = float(self._rng_spawn.uniform())
            free = [i for i, t in enumerate(self.truths) if t is None]
            if u < p.join_prob and free:
                r = self._rng_spawn.uniform(*SPAWN_RANGE_M)
                angle = self._rng_spawn.uniform(0.0, 2.0 * math.pi)
                speed = self._rng_spawn.uniform(*SPAWN_SPEED_MPS)
                heading = self._rng_spawn.uniform(0.0, 2.0 * math.pi)
                state = np.array([r * math.cos(angle), r * math.sin(angle),
                                  speed * math.cos(heading),
                                  speed * math.sin(heading)])
                # random free slot so every state dimension sees targets
                slot_i = free[int(self._rng_spawn.integers(len(free)))]
                self.truths[slot_i] = TargetTruth(id=self._next_id,
                                                  state=state,
                                                  birth_slot=self.slot)
                self._next_id += 1


def trajectory_columns(n_targets: int) -> list[str]:
    cols = ["slot"]
    for i in range(1, n_targets + 1):
        cols += [f"true_x_{i}", f"true_y_{i}", f"est_x_{i}", f"est_y_{i}",
                 f"cost_{i}"]
    cols += ["gamma", "utility", "reward", "usage", "tau_s"]
    return cols


def trajectory_row(env: RadarEnv, slot: int, outcome: StepOutcome,
                   truths_before: list[TargetTruth | None]) -> list[float]:
    """One trajectory-log row; absent targets log zeros."""
    row: list[float] = [float(slot)]
    for i in range(env.params.n_targets):
        t = truths_before[i]
        tx, ty = (float(t.state[0]), float(t.state[1])) if t else (0.0, 0.0)
        row += [tx, ty, float(outcome.estimates[i][0]),
                float(outcome.estimates[i][1]), float(outcome.costs[i])]
    row += [outcome.gamma, outcome.utility, outcome.reward, outcome.usage,
            outcome.tau_s]
    return row

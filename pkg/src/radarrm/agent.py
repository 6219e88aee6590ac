"""Constrained DDPG dwell-time allocator with a dual-ascent budget variable."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .ekf import TrackStatus
from .environment import RadarEnv
from .nn import AdamState, DenseNet, adam_step, flat_grads, load_net, save_net

ACTOR_HIDDEN = [256, 128]
CRITIC_HIDDEN = [100, 100]


def encode_state(tracks, lam: float, eta: float, n_targets: int) -> np.ndarray:
    """Normalized observation: [x1, y1, ..., costs..., lambda] / eta.

    Slots without a confirmed track contribute exact zeros.
    """
    s = np.zeros(3 * n_targets + 1)
    for i, track in enumerate(tracks):
        if track is None or track.status is not TrackStatus.CONFIRMED:
            continue
        s[2 * i] = track.x[0] / eta
        s[2 * i + 1] = track.x[1] / eta
        s[2 * n_targets + i] = track.cost / eta
    s[3 * n_targets] = lam / eta
    return s


def tracked_mask(states: np.ndarray, n_targets: int) -> np.ndarray:
    """Per-slot mask from the state's zero pattern (positions both zero)."""
    single = states.ndim == 1
    s = states[None, :] if single else states
    xs = s[:, 0:2 * n_targets:2]
    ys = s[:, 1:2 * n_targets:2]
    mask = ~((xs == 0.0) & (ys == 0.0))
    return mask[0] if single else mask


@dataclass
class DualVariable:
    value: float
    step_size: float
    theta_max: float

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("dual variable must be >= 0")


def dual_update(dual: DualVariable, usage: float) -> DualVariable:
    """Ascend on budget violation, projected onto [0, inf)."""
    if usage < 0:
        raise ValueError("usage must be >= 0")
    nxt = max(0.0, dual.value + dual.step_size * (usage - dual.theta_max))
    return DualVariable(value=nxt, step_size=dual.step_size,
                        theta_max=dual.theta_max)


class ReplayBuffer:
    """Fixed-capacity ring of (s, a, r, s') transitions, uniform sampling."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.size = 0
        self._head = 0

    def push(self, s, a, r, s2) -> None:
        i = self._head
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_states[i] = s2
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=batch_size)
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_states[idx])


@dataclass
class DdpgNets:
    actor: DenseNet
    critic: DenseNet
    actor_target: DenseNet
    critic_target: DenseNet
    gamma: float
    rho: float
    n_targets: int
    action_bound: float
    reward_scale: float = 1.0
    tau_min: float = 0.0

    @classmethod
    def create(cls, cfg: ExperimentConfig,
               rng: np.random.Generator) -> "DdpgNets":
        state_dim = 3 * cfg.n_targets + 1
        # linear head + execution-time clipping instead of a sigmoid head:
        # squashed heads rail against their saturated tails under the
        # penalty transients and never recover (dead gradients)
        actor = DenseNet.create(state_dim, ACTOR_HIDDEN, cfg.n_targets,
                                "relu", "identity", rng)
        # start at the budget-feasible uniform allocation (usage = theta_max)
        # so the dual variable sees no constraint shock on the first slots
        out = actor.layers[-1]
        out.w *= 1e-2
        out.b[:] = cfg.tau_nom
        critic = DenseNet.create(state_dim + cfg.n_targets, CRITIC_HIDDEN, 1,
                                 "relu", "identity", rng)
        return cls(actor=actor, critic=critic,
                   actor_target=actor.copy(), critic_target=critic.copy(),
                   gamma=cfg.discount, rho=cfg.soft_update_rho,
                   n_targets=cfg.n_targets, action_bound=cfg.action_bound,
                   reward_scale=cfg.reward_scale, tau_min=cfg.tau_min)

    def bound_action(self, a: np.ndarray, states: np.ndarray) -> np.ndarray:
        """Deployed action mapping: untracked slots 0, tracked ones at least
        tau_min (a shorter dwell takes no measurement, so it is pure waste,
        and the unmeasured covariance growth destabilizes everything fed
        from the state).
        """
        a = np.clip(a, self.tau_min, self.action_bound)
        return a * tracked_mask(states, self.n_targets)

    def policy(self, states: np.ndarray) -> np.ndarray:
        """Greedy deployed policy: bounded actor output."""
        return self.bound_action(self.actor.forward(states), states)

    def save(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_net(self.actor, out / "actor.net")
        save_net(self.critic, out / "critic.net")
        save_net(self.actor_target, out / "actor_target.net")
        save_net(self.critic_target, out / "critic_target.net")

    @classmethod
    def load(cls, out_dir: str | Path, cfg: ExperimentConfig) -> "DdpgNets":
        out = Path(out_dir)
        return cls(actor=load_net(out / "actor.net"),
                   critic=load_net(out / "critic.net"),
                   actor_target=load_net(out / "actor_target.net"),
                   critic_target=load_net(out / "critic_target.net"),
                   gamma=cfg.discount, rho=cfg.soft_update_rho,
                   n_targets=cfg.n_targets, action_bound=cfg.action_bound)


def select_action(nets: DdpgNets, state: np.ndarray, noise_sigma: float,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Actor output plus exploration noise, clipped and masked.

    noise_sigma = 0 gives the deterministic evaluation-mode action.
    """
    a = nets.actor.forward(state)
    if noise_sigma > 0.0:
        a = a + noise_sigma * rng.standard_normal(a.shape)
    return nets.bound_action(a, state)


def ddpg_update(nets: DdpgNets, batch, actor_opt: AdamState,
                critic_opt: AdamState) -> tuple[float, float]:
    """One actor-critic step on a replay batch.

    Critic regresses toward r + gamma * Q'(s', actor'(s')); the actor
    follows the critic's action gradient; targets then blend toward the
    live networks by rho. Rewards enter the critic divided by
    reward_scale: per-slot returns sit at the utility scale (~1e5) and a
    freshly initialized network cannot reach that range within the
    training budget, while positive rescaling leaves the induced policy
    unchanged.
    """
    s, a, r, s2 = batch
    n = s.shape[0]
    a2 = nets.bound_action(nets.actor_target.forward(s2), s2)
    q2 = nets.critic_target.forward(np.hstack([s2, a2]))[:, 0]
    y = r / nets.reward_scale + nets.gamma * q2

    q, cache = nets.critic.forward_full(np.hstack([s, a]))
    err = q[:, 0] - y
    critic_loss = float(np.mean(err ** 2))
    upstream = (2.0 * err / n)[:, None]
    grads, _ = nets.critic.backward(cache, upstream)
    adam_step(critic_opt, nets.critic.parameters(), flat_grads(grads))

    mask = tracked_mask(s, nets.n_targets)
    a_pred, actor_cache = nets.actor.forward_full(s)
    a_exec = nets.bound_action(a_pred, s)
    q_pred, critic_cache = nets.critic.forward_full(np.hstack([s, a_exec]))
    actor_objective = float(np.mean(q_pred))
    # ascend Q: upstream -1/n through the critic, take the action slice
    _, dx = nets.critic.backward(critic_cache, np.full((n, 1), -1.0 / n))
    da = dx[:, s.shape[1]:] * mask
    # attenuate pushes into the action bounds, keep full pull back inside;
    # a railed linear head then recovers instead of drifting further out
    move = -da
    headroom = np.where(move > 0,
                        (nets.action_bound - a_pred) / nets.action_bound,
                        a_pred / nets.action_bound)
    da = da * np.clip(headroom, 0.0, 1.0)
    actor_grads, _ = nets.actor.backward(actor_cache, da)
    adam_step(actor_opt, nets.actor.parameters(), flat_grads(actor_grads))

    nets.actor_target.blend_from(nets.actor, nets.rho)
    nets.critic_target.blend_from(nets.critic, nets.rho)
    return critic_loss, actor_objective


def noise_schedule(cfg: ExperimentConfig, slot: int, total_slots: int) -> float:
    """Linear decay from sigma_start to sigma_end over the first fraction."""
    horizon = max(1, int(total_slots * cfg.noise_decay_fraction))
    frac = min(1.0, slot / horizon)
    return cfg.noise_sigma_start + frac * (cfg.noise_sigma_end
                                           - cfg.noise_sigma_start)


@dataclass
class TrainResult:
    nets: DdpgNets
    lambda_trace: np.ndarray
    reward_trace: np.ndarray
    utility_trace: np.ndarray
    usage_trace: np.ndarray
    final_lambda: float
    critic_loss_trace: np.ndarray = field(default=None)


def train(env: RadarEnv, cfg: ExperimentConfig, seed: int,
          slots: int | None = None) -> TrainResult:
    """Run the per-slot loop: encode, act, step, dual update, learn."""
    slots = cfg.slots if slots is None else slots
    ss = np.random.SeedSequence(seed)
    init_ss, explore_ss, replay_ss = ss.spawn(3)
    nets = DdpgNets.create(cfg, np.random.default_rng(init_ss))
    rng_explore = np.random.default_rng(explore_ss)
    rng_replay = np.random.default_rng(replay_ss)

    buffer = ReplayBuffer(cfg.replay_capacity, cfg.state_dim, cfg.action_dim)
    actor_opt = AdamState.for_params(nets.actor.parameters(), cfg.actor_lr)
    critic_opt = AdamState.for_params(nets.critic.parameters(), cfg.critic_lr)

    dual = DualVariable(cfg.lambda0, cfg.alpha_lambda, cfg.theta_max)
    lam_trace = np.zeros(slots)
    reward_trace = np.zeros(slots)
    utility_trace = np.zeros(slots)
    usage_trace = np.zeros(slots)
    loss_trace = np.zeros(slots)

    s = encode_state(env.tracks, dual.value, cfg.eta, cfg.n_targets)
    for t in range(slots):
        sigma = noise_schedule(cfg, t, slots)
        a = select_action(nets, s, sigma, rng_explore)
        out = env.step(a, dual.value)
        dual = dual_update(dual, out.usage)
        s2 = encode_state(env.tracks, dual.value, cfg.eta, cfg.n_targets)
        buffer.push(s, a, out.reward, s2)
        if buffer.size >= cfg.batch_size:
            loss, _ = ddpg_update(nets, buffer.sample(cfg.batch_size,
                                                      rng_replay),
                                  actor_opt, critic_opt)
            loss_trace[t] = loss
        lam_trace[t] = dual.value
        reward_trace[t] = out.reward
        utility_trace[t] = out.utility
        usage_trace[t] = out.usage
        s = s2

    return TrainResult(nets=nets, lambda_trace=lam_trace,
                       reward_trace=reward_trace,
                       utility_trace=utility_trace, usage_trace=usage_trace,
                       final_lambda=dual.value,
                       critic_loss_trace=loss_trace)

"""Local surrogate explanations of a dwell-allocation policy.

Two samplers share the same kernel/ridge machinery: plain perturbation of
every non-zero state component, and a correlation-aware variant that
perturbs only the non-cost components and reconstructs the tracking
costs with a regressor trained on experienced states (costs and target
ranges are strongly coupled, so independent cost noise produces states
the policy never sees).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .nn import DenseNet, fit_regression


def feature_names(n_targets: int) -> list[str]:
    names = []
    for i in range(1, n_targets + 1):
        names += [f"x_hat_{i}", f"y_hat_{i}"]
    names += [f"cost_{i}" for i in range(1, n_targets + 1)]
    names.append("lambda")
    return names


def cost_indices(n_targets: int) -> np.ndarray:
    return np.arange(2 * n_targets, 3 * n_targets)


def non_cost_indices(n_targets: int) -> np.ndarray:
    return np.concatenate([np.arange(2 * n_targets), [3 * n_targets]])


@dataclass(frozen=True)
class EmpiricalMoments:
    mean: np.ndarray
    var: np.ndarray


def empirical_moments(states: np.ndarray) -> EmpiricalMoments:
    """Componentwise mean and variance over recorded states."""
    states = np.asarray(states, dtype=float)
    if states.ndim != 2 or states.shape[0] < 2:
        raise ValueError("need at least two recorded states")
    return EmpiricalMoments(mean=states.mean(axis=0),
                            var=states.var(axis=0))


@dataclass(frozen=True)
class KernelConfig:
    width: float            # kernel width in the normalized state space
    ridge_c: float
    num_samples: int

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("kernel width must be > 0")
        if self.ridge_c < 0:
            raise ValueError("ridge_c must be >= 0")


def lime_perturb(anchor: np.ndarray, moments: EmpiricalMoments, k: int,
                 rng: np.random.Generator) -> np.ndarray:
    """k samples around the anchor; zero-valued components stay exactly 0."""
    anchor = np.asarray(anchor, dtype=float)
    noise = rng.standard_normal((k, anchor.size)) * np.sqrt(moments.var)
    noise[:, anchor == 0.0] = 0.0
    return anchor + noise


def dl_lime_perturb(anchor: np.ndarray, moments: EmpiricalMoments,
                    costnet: DenseNet, k: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Perturb non-cost components; costs come from the regressor.

    Cost entries of untracked slots (zero position pair in the anchor)
    are masked to exactly 0 so the zero-padding convention survives.
    """
    anchor = np.asarray(anchor, dtype=float)
    n_targets = (anchor.size - 1) // 3
    nc_idx = non_cost_indices(n_targets)
    if costnet.in_dim != nc_idx.size or costnet.out_dim != n_targets:
        raise ValueError("costnet dimensions do not match the state layout")

    nc_anchor = anchor[nc_idx]
    # draw the full state width and slice the non-cost columns: with a
    # shared seed the two samplers then perturb shared components with
    # identical draws, so paired fidelity comparisons isolate the one
    # methodological difference (how cost components are filled in)
    noise = rng.standard_normal((k, anchor.size))[:, nc_idx] \
        * np.sqrt(moments.var[nc_idx])
    noise[:, nc_anchor == 0.0] = 0.0
    nc_samples = nc_anchor + noise

    costs = costnet.forward(nc_samples)
    untracked = (anchor[0:2 * n_targets:2] == 0.0) & \
                (anchor[1:2 * n_targets:2] == 0.0)
    costs[:, untracked] = 0.0

    samples = np.empty((k, anchor.size))
    samples[:, nc_idx] = nc_samples
    samples[:, cost_indices(n_targets)] = costs
    return samples


def similarity_weights(anchor: np.ndarray, samples: np.ndarray,
                       width: float) -> np.ndarray:
    """sqrt(exp(-D^2 / width^2)) with D the Euclidean state distance."""
    if width <= 0:
        raise ValueError("kernel width must be > 0")
    d2 = np.sum((samples - anchor) ** 2, axis=1)
    return np.sqrt(np.exp(-d2 / width ** 2))


@dataclass
class LocalModel:
    weights: np.ndarray     # (actions, features)
    bias: np.ndarray        # (actions,)
    ridge_c: float
    weighted_mse: float

    def predict(self, states: np.ndarray) -> np.ndarray:
        return states @ self.weights.T + self.bias


def fit_local_model(samples: np.ndarray, actions: np.ndarray,
                    weights: np.ndarray, ridge_c: float) -> LocalModel:
    """Closed-form weighted ridge with an unpenalized intercept.

    Solves (X~^T W X~ + c I') theta = X~^T W Y where X~ appends the
    intercept column and I' leaves the intercept row unpenalized. The
    vector-valued loss separates across action dimensions, so one solve
    handles all of them.
    """
    x = np.asarray(samples, dtype=float)
    y = np.asarray(actions, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    w = np.asarray(weights, dtype=float)
    k, d = x.shape
    xa = np.hstack([x, np.ones((k, 1))])
    wx = xa * w[:, None]
    normal = xa.T @ wx
    penalty = ridge_c * np.eye(d + 1)
    penalty[d, d] = 0.0
    a = normal + penalty
    rhs = xa.T @ (y * w[:, None])
    # Jacobi equilibration: state components span many decades (positions
    # vs diverged tracking costs), which otherwise wrecks the LU solve
    scale = np.sqrt(np.maximum(np.diag(a), 1e-300))
    a_eq = a / scale[:, None] / scale[None, :]
    rhs_eq = rhs / scale[:, None]
    try:
        theta = np.linalg.solve(a_eq, rhs_eq) / scale[:, None]
    except np.linalg.LinAlgError:
        if ridge_c <= 0:
            raise
        # exactly collinear design (reconstructed costs are locally linear
        # in the perturbed components): take the minimum-norm solution
        theta = np.linalg.lstsq(a_eq, rhs_eq, rcond=None)[0] / scale[:, None]
    model = LocalModel(weights=theta[:d].T, bias=theta[d],
                       ridge_c=ridge_c, weighted_mse=0.0)
    resid = model.predict(x) - y
    model.weighted_mse = float(np.sum(w[:, None] * resid ** 2) / np.sum(w))
    return model


@dataclass
class Explanation:
    anchor: np.ndarray
    method: str                     # "lime" or "dl-lime"
    model: LocalModel
    policy_action: np.ndarray
    num_samples: int
    seconds: float

    @property
    def predicted_action(self) -> np.ndarray:
        return self.model.predict(self.anchor[None, :])[0]

    def ranked_importances(self, action: int) -> list[tuple[int, float]]:
        """Features sorted by |weight| for one action dimension."""
        row = self.model.weights[action]
        order = np.argsort(-np.abs(row), kind="stable")
        return [(int(m), float(row[m])) for m in order]

    def to_text(self, names: list[str] | None = None) -> str:
        n_actions = self.model.weights.shape[0]
        if names is None:
            names = feature_names((self.anchor.size - 1) // 3)
        lines = [
            f"method {self.method}",
            f"samples {self.num_samples}",
            f"wall_clock_s {self.seconds!r}",
            "anchor " + " ".join(repr(v) for v in self.anchor),
            "policy_action " + " ".join(repr(v) for v in self.policy_action),
            "surrogate_action " + " ".join(repr(v) for v in
                                           self.predicted_action),
        ]
        for n in range(n_actions):
            lines.append(f"[action_{n + 1}]")
            for rank, (m, wgt) in enumerate(self.ranked_importances(n), 1):
                lines.append(f"{rank} {m} {names[m]} {wgt!r}")
        return "\n".join(lines) + "\n"


def explain(policy, anchor: np.ndarray, method: str, kcfg: KernelConfig,
            moments: EmpiricalMoments, rng: np.random.Generator,
            costnet: DenseNet | None = None) -> Explanation:
    """Fit a local linear surrogate of `policy` around one state.

    policy maps a (k, d) batch of states to (k, actions); the recorded
    wall clock covers sampling, policy queries, and the fit.
    """
    if method not in ("lime", "dl-lime"):
        raise ValueError(f"unknown method {method!r}")
    if method == "dl-lime" and costnet is None:
        raise ValueError("dl-lime requires a costnet")
    start = time.perf_counter()
    if method == "lime":
        samples = lime_perturb(anchor, moments, kcfg.num_samples, rng)
    else:
        samples = dl_lime_perturb(anchor, moments, costnet,
                                  kcfg.num_samples, rng)
    actions = policy(samples)
    weights = similarity_weights(anchor, samples, kcfg.width)
    model = fit_local_model(samples, actions, weights, kcfg.ridge_c)
    seconds = time.perf_counter() - start
    anchor = np.asarray(anchor, dtype=float)
    return Explanation(anchor=anchor, method=method, model=model,
                       policy_action=np.asarray(policy(anchor[None, :]))[0],
                       num_samples=kcfg.num_samples, seconds=seconds)


# -- cost regressor --------------------------------------------------------------

COSTNET_HIDDEN = [128, 64]


@dataclass
class CostNetReport:
    val_mse: float
    val_target_variance: float
    pearson_cost_vs_range: float
    mse_trace: list[float]


def _fold_standardization(net: DenseNet, in_mean, in_std, out_mean,
                          out_std) -> None:
    """Rewrite edge layers so the net maps raw units directly.

    Training happens on standardized copies for conditioning (raw state
    components sit at ~1e-3 after normalization); composing the affine
    scalings into the first and last layers keeps the published
    contract: raw non-cost components in, raw cost components out.
    """
    first, last = net.layers[0], net.layers[-1]
    first.b = first.b - first.w @ (in_mean / in_std)
    first.w = first.w / in_std
    last.b = last.b * out_std + out_mean
    last.w = last.w * out_std[:, None]


def train_costnet(states: np.ndarray, n_targets: int, epochs: int, lr: float,
                  seed: int, val_fraction: float = 0.1,
                  min_rows: int = 1000) -> tuple[DenseNet, CostNetReport]:
    """Fit the cost regressor on experienced states (normalized units).

    Inputs are the 2N+1 non-cost components, targets the N cost
    components. The report includes the validation Pearson correlation
    between predicted cost and target range, the signature the sampler
    relies on.
    """
    states = np.asarray(states, dtype=float)
    if states.shape[0] < min_rows:
        raise ValueError(f"need at least {min_rows} states, "
                         f"got {states.shape[0]}")
    nc_idx = non_cost_indices(n_targets)
    c_idx = cost_indices(n_targets)
    inputs = states[:, nc_idx]
    targets = states[:, c_idx]

    ss = np.random.SeedSequence(seed)
    init_ss, fit_ss, split_ss = ss.spawn(3)
    net = DenseNet.create(nc_idx.size, COSTNET_HIDDEN, n_targets,
                          "relu", "identity", np.random.default_rng(init_ss))

    rng_split = np.random.default_rng(split_ss)
    order = rng_split.permutation(states.shape[0])
    n_val = max(1, int(round(states.shape[0] * val_fraction)))
    val_idx, train_idx = order[:n_val], order[n_val:]

    in_mean = inputs[train_idx].mean(axis=0)
    in_std = np.maximum(inputs[train_idx].std(axis=0), 1e-12)
    out_mean = targets[train_idx].mean(axis=0)
    out_std = np.maximum(targets[train_idx].std(axis=0), 1e-12)

    # trace stays in standardized units; val_mse below is in raw units
    trace = fit_regression(net, (inputs[train_idx] - in_mean) / in_std,
                           (targets[train_idx] - out_mean) / out_std,
                           epochs=epochs, lr=lr,
                           rng=np.random.default_rng(fit_ss),
                           val_fraction=0.1)
    _fold_standardization(net, in_mean, in_std, out_mean, out_std)

    pred = net.forward(inputs[val_idx])
    val_err = pred - targets[val_idx]
    val_mse = float(np.mean(val_err ** 2))
    val_var = float(np.var(targets[val_idx]))

    # cost-vs-range correlation over tracked (nonzero-position) entries
    xs = states[val_idx][:, 0:2 * n_targets:2]
    ys = states[val_idx][:, 1:2 * n_targets:2]
    tracked = ~((xs == 0.0) & (ys == 0.0))
    ranges = np.hypot(xs, ys)[tracked]
    pred_costs = pred[tracked]
    if ranges.size >= 2 and np.std(ranges) > 0 and np.std(pred_costs) > 0:
        pearson = float(np.corrcoef(ranges, pred_costs)[0, 1])
    else:
        pearson = float("nan")

    return net, CostNetReport(val_mse=val_mse, val_target_variance=val_var,
                              pearson_cost_vs_range=pearson, mse_trace=trace)

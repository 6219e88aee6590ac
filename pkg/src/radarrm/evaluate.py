"""Evaluation harness: datasets, fidelity checkpoints, CRN rollouts, reports.

Policy comparisons share common random numbers: every replica is built
from the same seed, and the environment's fixed per-slot draw quota keeps
the underlying noise streams aligned no matter which policy is acting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agent import DdpgNets, DualVariable, dual_update, encode_state, \
    tracked_mask
from .environment import EnvParams, RadarEnv
from .explain import (EmpiricalMoments, KernelConfig, explain,
                      empirical_moments)
from .nn import DenseNet

METHOD_ORDER = ("ddpg", "lime", "dl-lime")


@dataclass
class Dataset:
    """Rows of one greedy rollout: (slot, state, action, costs, utility)."""
    slots: np.ndarray        # (n,)
    states: np.ndarray       # (n, 3N+1)
    actions: np.ndarray      # (n, N)
    costs: np.ndarray        # (n, N) raw m^2
    utilities: np.ndarray    # (n,)
    source_run_id: str = ""


def collect_dataset(nets: DdpgNets, env: RadarEnv, slots: int,
                    lam0: float, alpha_lambda: float, theta_max: float,
                    eta: float, source_run_id: str = "") -> Dataset:
    """Noise-free rollout of the deployed policy, every slot recorded."""
    n = env.params.n_targets
    rows_s = np.zeros((slots, 3 * n + 1))
    rows_a = np.zeros((slots, n))
    rows_c = np.zeros((slots, n))
    rows_u = np.zeros(slots)
    dual = DualVariable(lam0, alpha_lambda, theta_max)
    for t in range(slots):
        s = encode_state(env.tracks, dual.value, eta, n)
        a = nets.policy(s)
        out = env.step(a, dual.value)
        dual = dual_update(dual, out.usage)
        rows_s[t] = s
        rows_a[t] = a
        rows_c[t] = out.costs
        rows_u[t] = out.utility
    return Dataset(slots=np.arange(slots), states=rows_s, actions=rows_a,
                   costs=rows_c, utilities=rows_u,
                   source_run_id=source_run_id)


def save_dataset(dataset: Dataset, path: str | Path,
                 header_comment: str) -> None:
    """CSV schema: slot, s_0..s_{3N}, a_0..a_{N-1}, c_0..c_{N-1}, utility."""
    n = dataset.actions.shape[1]
    d = dataset.states.shape[1]
    columns = (["slot"] + [f"s_{i}" for i in range(d)]
               + [f"a_{i}" for i in range(n)]
               + [f"c_{i}" for i in range(n)] + ["utility"])
    rows = []
    for t in range(dataset.states.shape[0]):
        rows.append([int(dataset.slots[t])]
                    + [float(v) for v in dataset.states[t]]
                    + [float(v) for v in dataset.actions[t]]
                    + [float(v) for v in dataset.costs[t]]
                    + [float(dataset.utilities[t])])
    _write_csv(Path(path), header_comment, columns, rows)


def load_dataset(path: str | Path) -> Dataset:
    lines = [ln for ln in Path(path).read_text().splitlines()
             if ln and not ln.startswith("#")]
    columns = lines[0].split(",")
    n = sum(1 for c in columns if c.startswith("a_"))
    d = sum(1 for c in columns if c.startswith("s_"))
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    if data.shape[1] != 1 + d + 2 * n + 1:
        raise ValueError(f"dataset {path} has unexpected column count")
    return Dataset(slots=data[:, 0].astype(int),
                   states=data[:, 1:1 + d],
                   actions=data[:, 1 + d:1 + d + n],
                   costs=data[:, 1 + d + n:1 + d + 2 * n],
                   utilities=data[:, -1])


def mae(a: np.ndarray, b: np.ndarray) -> float:
    """Mean absolute difference between two action vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("action vectors must have equal length")
    return float(np.mean(np.abs(a - b)))


@dataclass
class FidelityRecord:
    slot: int
    mae_lime: float
    mae_dl_lime: float
    runtime_lime: float
    runtime_dl_lime: float
    top_features: dict = field(default_factory=dict)


def checkpoint_fidelity(nets: DdpgNets, env: RadarEnv, slots: int,
                        interval: int, kcfg: KernelConfig,
                        moments: EmpiricalMoments, costnet: DenseNet,
                        lam0: float, alpha_lambda: float, theta_max: float,
                        eta: float, seed: int,
                        keep_ranks: int = 5) -> list[FidelityRecord]:
    """Greedy rollout; every `interval` slots explain the current state
    with both methods (paired anchors) and score fidelity to the policy.
    """
    if interval < 1:
        raise ValueError("interval must be >= 1")
    n = env.params.n_targets
    dual = DualVariable(lam0, alpha_lambda, theta_max)
    records = []
    for t in range(slots):
        s = encode_state(env.tracks, dual.value, eta, n)
        # mid-interval grid, slots/interval checkpoints in total; a grid
        # anchored at multiples of the interval would phase-lock with the
        # spawn gate and oversample freshly emptied states
        if t % interval == interval // 2:
            a_policy = nets.policy(s)
            rec = FidelityRecord(slot=t, mae_lime=0.0, mae_dl_lime=0.0,
                                 runtime_lime=0.0, runtime_dl_lime=0.0)
            for method in ("lime", "dl-lime"):
                # same seed for both methods: shared perturbation draws on
                # shared components (paired comparison, common random numbers)
                rng = np.random.default_rng(np.random.SeedSequence((seed, t)))
                exp = explain(nets.policy, s, method, kcfg, moments, rng,
                              costnet=costnet)
                err = mae(a_policy, exp.predicted_action)
                if method == "lime":
                    rec.mae_lime, rec.runtime_lime = err, exp.seconds
                else:
                    rec.mae_dl_lime, rec.runtime_dl_lime = err, exp.seconds
                rec.top_features[method] = [
                    exp.ranked_importances(i)[:keep_ranks] for i in range(n)]
            records.append(rec)
        a = nets.policy(s)
        out = env.step(a, dual.value)
        dual = dual_update(dual, out.usage)
    return records


class SurrogatePolicy:
    """Acts through a local model refit at the decision state.

    refit_interval = 1 fits a fresh surrogate every slot; larger values
    reuse the last fit in between (desk-scale thinning).
    """

    def __init__(self, nets: DdpgNets, method: str, kcfg: KernelConfig,
                 moments: EmpiricalMoments, costnet: DenseNet | None,
                 refit_interval: int, seed: int):
        self.nets = nets
        self.method = method
        self.kcfg = kcfg
        self.moments = moments
        self.costnet = costnet
        self.refit_interval = max(1, refit_interval)
        self.seed = seed
        self._model = None

    def act(self, state: np.ndarray, slot: int) -> np.ndarray:
        if self._model is None or slot % self.refit_interval == 0:
            rng = np.random.default_rng(
                np.random.SeedSequence(
                    (self.seed, slot, METHOD_ORDER.index(self.method))))
            exp = explain(self.nets.policy, state, self.method, self.kcfg,
                          self.moments, rng, costnet=self.costnet)
            self._model = exp.model
        a = self._model.predict(state[None, :])[0]
        # execute in the same bounded action space as the deployed policy
        return self.nets.bound_action(a, state)


class DdpgPolicy:
    def __init__(self, nets: DdpgNets):
        self.nets = nets

    def act(self, state: np.ndarray, slot: int) -> np.ndarray:
        return self.nets.policy(state)


@dataclass
class RolloutTrace:
    utilities: np.ndarray      # (slots,)
    usages: np.ndarray
    lambdas: np.ndarray
    actions: np.ndarray        # (slots, N)
    states: np.ndarray         # (slots, 3N+1)
    true_ranges: np.ndarray    # (slots, N), 0 when absent
    est_ranges: np.ndarray     # (slots, N), 0 when untracked


def crn_rollouts(policies: dict, env_params: EnvParams, slots: int,
                 seed: int, lam0: float, alpha_lambda: float,
                 theta_max: float, eta: float) -> dict[str, RolloutTrace]:
    """Run each policy on its own replica built from the same seed.

    Replicas share spawn schedules and underlying standard-normal and
    uniform draws; each evolves its own dual variable from its own
    executed actions.
    """
    n = env_params.n_targets
    traces = {}
    for name, policy in policies.items():
        env = RadarEnv(env_params, seed)
        dual = DualVariable(lam0, alpha_lambda, theta_max)
        tr = RolloutTrace(utilities=np.zeros(slots), usages=np.zeros(slots),
                          lambdas=np.zeros(slots),
                          actions=np.zeros((slots, n)),
                          states=np.zeros((slots, 3 * n + 1)),
                          true_ranges=np.zeros((slots, n)),
                          est_ranges=np.zeros((slots, n)))
        for t in range(slots):
            s = encode_state(env.tracks, dual.value, eta, n)
            for i, truth in enumerate(env.truths):
                if truth is not None:
                    tr.true_ranges[t, i] = truth.range_to_origin()
            a = policy.act(s, t)
            out = env.step(a, dual.value)
            dual = dual_update(dual, out.usage)
            tr.states[t] = s
            tr.actions[t] = a
            tr.utilities[t] = out.utility
            tr.usages[t] = out.usage
            tr.lambdas[t] = dual.value
            tr.est_ranges[t] = np.hypot(out.estimates[:, 0],
                                        out.estimates[:, 1])
        traces[name] = tr
    return traces


def peak_performance(utilities: dict[str, np.ndarray]) -> dict[str, float]:
    """Fraction of slots each method attains the best utility.

    Ties go to the earlier method in METHOD_ORDER, so the fractions
    always partition exactly 1.0.
    """
    names = [m for m in METHOD_ORDER if m in utilities]
    if len({np.asarray(u).shape for u in utilities.values()}) != 1:
        raise ValueError("traces must share one length")
    stacked = np.stack([utilities[m] for m in names])
    winners = np.argmax(stacked, axis=0)  # argmax takes the first on ties
    total = stacked.shape[1]
    return {m: float(np.count_nonzero(winners == i)) / total
            for i, m in enumerate(names)}


def tradeoff_sweep(nets: DdpgNets, anchor_states: np.ndarray,
                   k_values: list[int], width: float, ridge_c: float,
                   moments: EmpiricalMoments, costnet: DenseNet,
                   seed: int) -> list[dict]:
    """Mean fidelity and runtime of dl-lime at several sample counts."""
    if len(k_values) < 2:
        raise ValueError("need at least two sample counts")
    rows = []
    for k in k_values:
        kcfg = KernelConfig(width=width, ridge_c=ridge_c, num_samples=k)
        errs, secs = [], []
        for j, s in enumerate(anchor_states):
            rng = np.random.default_rng(np.random.SeedSequence((seed, k, j)))
            exp = explain(nets.policy, s, "dl-lime", kcfg, moments, rng,
                          costnet=costnet)
            errs.append(mae(exp.policy_action, exp.predicted_action))
            secs.append(exp.seconds)
        rows.append({"samples": k, "mean_mae": float(np.mean(errs)),
                     "mean_runtime_s": float(np.mean(secs))})
    return rows


def paired_bootstrap_ci(diffs: np.ndarray, n_boot: int = 2000,
                        level: float = 0.95,
                        seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean of paired differences."""
    diffs = np.asarray(diffs, dtype=float)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, diffs.size, size=(n_boot, diffs.size))
    means = diffs[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    return (float(np.quantile(means, alpha)),
            float(np.quantile(means, 1.0 - alpha)))


# -- report emission ---------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header_comment: str, columns: list[str],
               rows: list[list]) -> None:
    lines = [header_comment.rstrip("\n"), ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def build_records(fidelity: list[FidelityRecord],
                  traces: dict[str, RolloutTrace],
                  sweep: list[dict],
                  dataset: Dataset | None) -> dict:
    """Assemble the raw, JSON-serializable evaluation record."""
    peak = peak_performance({m: tr.utilities for m, tr in traces.items()})
    checkpoints = []
    for rec in fidelity:
        t = rec.slot
        utils = {m: float(traces[m].utilities[t]) for m in traces}
        winner = max(METHOD_ORDER, key=lambda m: (utils.get(m, -np.inf),
                                                  -METHOD_ORDER.index(m)))
        checkpoints.append({
            "slot": t,
            "mae": {"lime": rec.mae_lime, "dl-lime": rec.mae_dl_lime},
            "runtime_s": {"lime": rec.runtime_lime,
                          "dl-lime": rec.runtime_dl_lime},
            "utility": utils,
            "winner": winner,
            "top_features": rec.top_features,
        })
    summary = {}
    for m in METHOD_ORDER:
        if m not in traces:
            continue
        entry = {"utility": float(np.mean(traces[m].utilities)),
                 "peak_fraction": peak[m]}
        if m != "ddpg" and fidelity:
            key = "mae_lime" if m == "lime" else "mae_dl_lime"
            rkey = "runtime_lime" if m == "lime" else "runtime_dl_lime"
            entry["mae"] = float(np.mean([getattr(r, key) for r in fidelity]))
            entry["runtime_s"] = float(np.mean([getattr(r, rkey)
                                                for r in fidelity]))
        summary[m] = entry
    records = {
        "checkpoints": checkpoints,
        "summary": summary,
        "peak_fractions": peak,
        "sweep": sweep,
        "traces": {m: {"utilities": tr.utilities.tolist(),
                       "usages": tr.usages.tolist(),
                       "lambdas": tr.lambdas.tolist(),
                       "actions": tr.actions.tolist(),
                       "true_ranges": tr.true_ranges.tolist(),
                       "est_ranges": tr.est_ranges.tolist()}
                   for m, tr in traces.items()},
    }
    if dataset is not None:
        records["dataset_scatter"] = dataset_scatter(dataset)
    return records


def dataset_scatter(dataset: Dataset) -> list[list[float]]:
    """(estimated range, cost) pairs over tracked entries of the dataset."""
    n = dataset.actions.shape[1]
    pairs = []
    for t in range(dataset.states.shape[0]):
        s = dataset.states[t]
        for i in range(n):
            x, y = s[2 * i], s[2 * i + 1]
            if x == 0.0 and y == 0.0:
                continue
            pairs.append([float(np.hypot(x, y)), float(dataset.costs[t, i])])
    return pairs


def emit_report(records: dict, out_dir: str | Path,
                header_comment: str) -> list[Path]:
    """Write the metrics, summary, and figure-ready CSVs.

    Re-emitting the same records produces byte-identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    rows = []
    for cp in records["checkpoints"]:
        for m in METHOD_ORDER:
            rows.append([cp["slot"], m,
                         _fmt(cp["mae"].get(m, "")) if m != "ddpg" else "",
                         _fmt(cp["utility"][m]),
                         _fmt(cp["runtime_s"].get(m, "")) if m != "ddpg" else "",
                         cp["winner"]])
    path = out / "metrics.csv"
    _write_csv(path, header_comment,
               ["slot", "method", "mae", "utility", "runtime_s", "winner"],
               rows)
    written.append(path)

    rows = []
    for m in METHOD_ORDER:
        if m not in records["summary"]:
            continue
        entry = records["summary"][m]
        rows.append([m, _fmt(entry.get("mae", "")),
                     _fmt(entry["utility"]),
                     _fmt(entry.get("runtime_s", "")),
                     _fmt(entry["peak_fraction"])])
    path = out / "summary.csv"
    _write_csv(path, header_comment,
               ["method", "mae", "utility", "runtime_s", "peak_fraction"],
               rows)
    written.append(path)

    if "dataset_scatter" in records:
        path = out / "fig1_cost_vs_range.csv"
        _write_csv(path, header_comment, ["range_normalized", "cost_m2"],
                   records["dataset_scatter"])
        written.append(path)

    if "ddpg" in records["traces"]:
        tr = records["traces"]["ddpg"]
        n = len(tr["true_ranges"][0])
        rows = []
        for t, (true_r, est_r) in enumerate(zip(tr["true_ranges"],
                                                tr["est_ranges"])):
            for i in range(n):
                if true_r[i] == 0.0 and est_r[i] == 0.0:
                    continue
                rows.append([t, i + 1, _fmt(true_r[i]), _fmt(est_r[i])])
        path = out / "fig2_target_ranges.csv"
        _write_csv(path, header_comment,
                   ["slot", "target", "true_range_m", "est_range_m"], rows)
        written.append(path)

    rows = []
    for m in METHOD_ORDER:
        if m not in records["traces"]:
            continue
        actions = records["traces"][m]["actions"]
        for t, a in enumerate(actions):
            rows.append([t, m] + [_fmt(v) for v in a])
    n_actions = len(records["traces"][next(iter(records["traces"]))]
                    ["actions"][0])
    path = out / "fig3_dwell_traces.csv"
    _write_csv(path, header_comment,
               ["slot", "method"] + [f"tau_{i + 1}" for i in range(n_actions)],
               rows)
    written.append(path)

    rows = []
    for cp in records["checkpoints"]:
        for m, per_action in cp["top_features"].items():
            for action_i, ranked in enumerate(per_action):
                for rank, (feat, weight) in enumerate(ranked, 1):
                    rows.append([cp["slot"], m, action_i + 1, rank, feat,
                                 _fmt(weight)])
    path = out / "fig4_importances.csv"
    _write_csv(path, header_comment,
               ["slot", "method", "action", "rank", "feature_index",
                "weight"], rows)
    written.append(path)

    if records.get("sweep"):
        rows = [[r["samples"], _fmt(r["mean_mae"]), _fmt(r["mean_runtime_s"])]
                for r in records["sweep"]]
        path = out / "fig5_tradeoff.csv"
        _write_csv(path, header_comment,
                   ["samples", "mean_mae", "mean_runtime_s"], rows)
        written.append(path)

    path = out / "records.json"
    path.write_text(json.dumps(records, sort_keys=True, indent=1) + "\n")
    written.append(path)
    return written

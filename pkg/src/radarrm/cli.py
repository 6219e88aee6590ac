"""Command-line pipeline: train, collect, train-costnet, explain, evaluate,
report.

Every output is stamped with the resolved config hash, the seed, and the
source version, so any artifact can be traced back to the run that made
it. RADARRM_<KEY> environment variables override config-file values.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .agent import DdpgNets, train
from .config import (ExperimentConfig, artifact_header, config_hash,
                     echo_config, load_config)
from .environment import build_env_params, build_environment
from .evaluate import (DdpgPolicy, SurrogatePolicy, build_records,
                       checkpoint_fidelity, collect_dataset, crn_rollouts,
                       emit_report, load_dataset, save_dataset,
                       tradeoff_sweep)
from .explain import (KernelConfig, empirical_moments, explain,
                      feature_names, train_costnet)
from .nn import load_net, save_net

REFIT_EVERY_SLOT_LIMIT = 5000


def _load(args) -> ExperimentConfig:
    return load_config(args.config)


def _write_with_header(path: Path, cfg: ExperimentConfig, seed: int,
                       body: str) -> None:
    path.write_text(artifact_header(cfg, seed) + body)


def _save_checkpoint(out: Path, cfg: ExperimentConfig, seed: int,
                     nets: DdpgNets, final_lambda: float) -> None:
    nets.save(out)
    state = {"lambda": final_lambda, "config_hash": config_hash(cfg),
             "seed": seed, "version": __version__}
    (out / "state.json").write_text(json.dumps(state, sort_keys=True,
                                               indent=1) + "\n")
    (out / "config.ini").write_text(echo_config(cfg))


def _load_checkpoint(model_dir: str, cfg: ExperimentConfig):
    path = Path(model_dir)
    if not path.is_dir() or not (path / "actor.net").exists():
        raise FileNotFoundError(
            f"no trained model at {model_dir!r}: expected a checkpoint "
            "directory written by `radarrm train` (actor.net etc.)")
    nets = DdpgNets.load(path, cfg)
    state = json.loads((path / "state.json").read_text())
    return nets, float(state["lambda"])


def cmd_train(args) -> int:
    cfg = _load(args)
    seed = args.seed if args.seed is not None else cfg.seed_train
    slots = args.slots if args.slots is not None else cfg.slots
    env = build_environment(cfg, seed)
    result = train(env, cfg, seed, slots=slots)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _save_checkpoint(out, cfg, seed, result.nets, result.final_lambda)
    lines = ["slot,reward,utility,usage,lambda"]
    for t in range(slots):
        lines.append(f"{t},{result.reward_trace[t]!r},"
                     f"{result.utility_trace[t]!r},"
                     f"{result.usage_trace[t]!r},{result.lambda_trace[t]!r}")
    _write_with_header(out / "train_trace.csv", cfg, seed,
                       "\n".join(lines) + "\n")
    print(f"trained {slots} slots -> {out}")
    return 0


def cmd_collect(args) -> int:
    cfg = _load(args)
    seed = args.seed if args.seed is not None else cfg.seed_collect
    slots = args.slots if args.slots is not None else cfg.slots
    nets, lam = _load_checkpoint(args.model, cfg)
    env = build_environment(cfg, seed)
    dataset = collect_dataset(nets, env, slots, lam, cfg.alpha_lambda,
                              cfg.theta_max, cfg.eta,
                              source_run_id=f"{config_hash(cfg)}:{seed}")
    save_dataset(dataset, args.out, artifact_header(cfg, seed))
    print(f"collected {slots} slots -> {args.out}")
    return 0


def cmd_train_costnet(args) -> int:
    cfg = _load(args)
    seed = args.seed if args.seed is not None else cfg.seed_train
    dataset = load_dataset(args.dataset)
    net, report = train_costnet(dataset.states, cfg.n_targets,
                                epochs=cfg.costnet_epochs, lr=cfg.costnet_lr,
                                seed=seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_net(net, out / "costnet.net")
    body = json.dumps({"val_mse": report.val_mse,
                       "val_target_variance": report.val_target_variance,
                       "pearson_cost_vs_range": report.pearson_cost_vs_range,
                       "mse_trace": report.mse_trace},
                      sort_keys=True, indent=1) + "\n"
    (out / "costnet_report.json").write_text(body)
    print(f"costnet val_mse={report.val_mse:.3e} "
          f"pearson={report.pearson_cost_vs_range:.3f} -> {out}")
    return 0


def cmd_explain(args) -> int:
    cfg = _load(args)
    seed = args.seed if args.seed is not None else cfg.seed_explain
    samples = args.samples if args.samples is not None else cfg.lime_samples
    nets, _ = _load_checkpoint(args.model, cfg)
    dataset = load_dataset(args.dataset)
    moments = empirical_moments(dataset.states)
    costnet = None
    if args.method == "dl-lime":
        if not args.costnet:
            raise FileNotFoundError("--costnet is required for dl-lime")
        costnet = load_net(Path(args.costnet) / "costnet.net"
                           if Path(args.costnet).is_dir() else args.costnet)
    row = args.row if args.row is not None else dataset.states.shape[0] - 1
    anchor = dataset.states[row]
    kcfg = KernelConfig(width=cfg.kernel_width, ridge_c=cfg.ridge_c,
                        num_samples=samples)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    exp = explain(nets.policy, anchor, args.method, kcfg, moments, rng,
                  costnet=costnet)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_with_header(out, cfg, seed,
                       exp.to_text(feature_names(cfg.n_targets)))
    print(f"{args.method} explanation of dataset row {row} -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load(args)
    seed = args.seed if args.seed is not None else cfg.seed_evaluate
    slots = args.slots if args.slots is not None else cfg.slots
    interval = (args.checkpoint_interval if args.checkpoint_interval
                is not None else 500)
    nets, lam = _load_checkpoint(args.model, cfg)
    dataset = load_dataset(args.dataset)
    moments = empirical_moments(dataset.states)
    costnet_path = Path(args.costnet)
    costnet = load_net(costnet_path / "costnet.net"
                       if costnet_path.is_dir() else costnet_path)

    params = build_env_params(cfg)
    kcfg = KernelConfig(width=cfg.kernel_width, ridge_c=cfg.ridge_c,
                        num_samples=cfg.lime_samples)
    refit = 1 if slots <= REFIT_EVERY_SLOT_LIMIT else interval
    policies = {
        "ddpg": DdpgPolicy(nets),
        "lime": SurrogatePolicy(nets, "lime", kcfg, moments, None, refit,
                                seed),
        "dl-lime": SurrogatePolicy(nets, "dl-lime", kcfg, moments, costnet,
                                   refit, seed),
    }
    traces = crn_rollouts(policies, params, slots, seed, lam,
                          cfg.alpha_lambda, cfg.theta_max, cfg.eta)
    env = build_environment(cfg, seed)
    fidelity = checkpoint_fidelity(nets, env, slots, interval, kcfg, moments,
                                   costnet, lam, cfg.alpha_lambda,
                                   cfg.theta_max, cfg.eta, seed)

    anchor_rows = _sweep_anchors(dataset, cfg.n_targets)
    sweep = tradeoff_sweep(nets, anchor_rows, [100, 1000, cfg.lime_samples],
                           cfg.kernel_width, cfg.ridge_c, moments, costnet,
                           seed) if args.sweep else []

    records = build_records(fidelity, traces, sweep, dataset)
    written = emit_report(records, args.out, artifact_header(cfg, seed))
    (Path(args.out) / "config.ini").write_text(echo_config(cfg))
    print(f"evaluation over {slots} slots -> {args.out} "
          f"({len(written)} files)")
    return 0


def _sweep_anchors(dataset, n_targets: int, count: int = 60) -> np.ndarray:
    """Evenly spaced dataset states, preferring rows with tracked targets."""
    states = dataset.states
    tracked = np.any(states[:, :2 * n_targets] != 0.0, axis=1)
    pool = states[tracked] if np.count_nonzero(tracked) >= count else states
    idx = np.linspace(0, pool.shape[0] - 1, min(count, pool.shape[0]))
    return pool[idx.astype(int)]


def cmd_report(args) -> int:
    cfg = _load(args)
    seed = args.seed if args.seed is not None else cfg.seed_evaluate
    records = json.loads(Path(args.records).read_text())
    written = emit_report(records, args.out, artifact_header(cfg, seed))
    print(f"re-emitted {len(written)} files -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radarrm",
        description="Radar dwell-time RL with local surrogate explanations")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None,
                       help="INI config; omit for defaults")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("train", help="train the dwell-allocation agent")
    common(p)
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--slots", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("collect", help="record a greedy-rollout dataset")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="dataset CSV path")
    p.add_argument("--slots", type=int, default=None)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train-costnet", help="fit the cost regressor")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="costnet directory")
    p.set_defaults(func=cmd_train_costnet)

    p = sub.add_parser("explain", help="explain one decision state")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--costnet", default=None)
    p.add_argument("--method", choices=["lime", "dl-lime"], default="lime")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--row", type=int, default=None,
                   help="dataset row to explain (default: last)")
    p.add_argument("--out", required=True, help="explanation text path")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evaluate", help="CRN rollouts + fidelity checkpoints")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--costnet", required=True)
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--slots", type=int, default=None)
    p.add_argument("--checkpoint-interval", type=int, default=None)
    p.add_argument("--sweep", action="store_true",
                   help="also run the samples/runtime tradeoff sweep")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="re-emit report files from records.json")
    common(p)
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()

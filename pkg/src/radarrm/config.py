"""Experiment configuration: INI-style files, validation, echo, hashing.

Defaults reproduce the reference operating point (five targets, 2.5 s
measurement cycle, 0.9 tracking budget). Unknown keys are rejected so a
typo never silently falls back to a default.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import os
import subprocess
from dataclasses import dataclass, field, fields
from pathlib import Path

ENV_PREFIX = "RADARRM_"

# Fields whose default is derived from other fields when not given explicitly.
_DERIVED = ("state_dim", "action_dim", "tau_s_ref", "tau_nom")


@dataclass
class ExperimentConfig:
    # agent
    eta: float = 1e7                    # state normalization factor
    discount: float = 0.9
    action_bound: float = 2.5           # seconds, per-target dwell ceiling
    lambda0: float = 5000.0             # initial dual variable
    alpha_lambda: float = 15000.0       # dual-variable step size
    state_dim: int = -1                 # derived: 3 * n_targets + 1
    action_dim: int = -1                # derived: n_targets
    actor_lr: float = 2e-4
    critic_lr: float = 2e-4
    replay_capacity: int = 100_000
    batch_size: int = 64
    soft_update_rho: float = 0.005      # target-network mixing toward live nets
    noise_sigma_start: float = 0.5
    noise_sigma_end: float = 0.05
    noise_decay_fraction: float = 0.2   # fraction of slots spent decaying
    reward_scale: float = 1e4           # critic-side reward divisor

    # environment
    n_targets: int = 5
    slots: int = 50_000
    p_false_alarm: float = 1e-3
    p_detection: float = 0.9
    theta_max: float = 0.9              # tracking time budget, fraction of T0
    join_prob: float = 0.03             # spawn probability at each 100-slot gate

    # lime
    kernel_width: float = 2.5
    lime_samples: int = 10_000
    ridge_c: float = 1e-3
    costnet_lr: float = 1e-4
    costnet_epochs: int = 40

    # radar
    sigma_r0_sq: float = 16.0           # m^2 range noise at calibration point
    sigma_theta0_sq: float = 1e-6       # rad^2 azimuth noise at calibration point
    sigma_w: float = 16.0               # (m/s^2)^2 maneuverability (acceleration) variance
    t0: float = 2.5                     # seconds per measurement cycle
    beta: float = 1e5                   # tracking-vs-scanning tradeoff coefficient
    tau_min: float = 0.01               # below this dwell no measurement is taken
    gate: float = 500.0                 # m, association gate
    tau_s_ref: float = -1.0             # derived: (1 - theta_max) * t0
    tau_nom: float = -1.0               # derived: theta_max * t0 / n_targets
    r_0: float = 10_000.0               # m, reference scan range
    scan_mode: str = "calibrated"       # "calibrated" or "physical"
    phase_delay_deg: float = 1.0        # beam phase delay (physical mode)

    # seeds
    seed_train: int = 1
    seed_collect: int = 2
    seed_evaluate: int = 3
    seed_explain: int = 4


_SECTIONS = {
    "agent": (
        "eta", "discount", "action_bound", "lambda0", "alpha_lambda",
        "state_dim", "action_dim", "actor_lr", "critic_lr",
        "replay_capacity", "batch_size", "soft_update_rho",
        "noise_sigma_start", "noise_sigma_end", "noise_decay_fraction",
        "reward_scale",
    ),
    "environment": (
        "n_targets", "slots", "p_false_alarm", "p_detection",
        "theta_max", "join_prob",
    ),
    "lime": (
        "kernel_width", "lime_samples", "ridge_c", "costnet_lr",
        "costnet_epochs",
    ),
    "radar": (
        "sigma_r0_sq", "sigma_theta0_sq", "sigma_w", "t0", "beta",
        "tau_min", "gate", "tau_s_ref", "tau_nom", "r_0", "scan_mode",
        "phase_delay_deg",
    ),
    "seeds": ("seed_train", "seed_collect", "seed_evaluate", "seed_explain"),
}

_KEY_TO_SECTION = {k: s for s, keys in _SECTIONS.items() for k in keys}
_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


class ConfigError(ValueError):
    """Bad key, unparsable value, or a violated constraint."""


def _parse_value(key: str, raw: str):
    ftype = _FIELD_TYPES[key]
    try:
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"config key '{key}': cannot parse {raw!r}") from exc


def _resolve_derived(cfg: ExperimentConfig, given: set[str]) -> None:
    if "state_dim" not in given:
        cfg.state_dim = 3 * cfg.n_targets + 1
    if "action_dim" not in given:
        cfg.action_dim = cfg.n_targets
    if "tau_s_ref" not in given:
        cfg.tau_s_ref = (1.0 - cfg.theta_max) * cfg.t0
    if "tau_nom" not in given:
        cfg.tau_nom = cfg.theta_max * cfg.t0 / cfg.n_targets


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Check every cross-field constraint; raise ConfigError naming the key."""
    def require(ok: bool, key: str, msg: str) -> None:
        if not ok:
            raise ConfigError(f"config key '{key}': {msg}")

    require(0.0 < cfg.theta_max <= 1.0, "theta_max", "must be in (0, 1]")
    require(0.0 < cfg.p_false_alarm < cfg.p_detection < 1.0,
            "p_false_alarm", "need 0 < p_false_alarm < p_detection < 1")
    require(0.0 <= cfg.join_prob <= 1.0, "join_prob", "must be in [0, 1]")
    require(cfg.n_targets >= 1, "n_targets", "must be >= 1")
    require(cfg.slots >= 1, "slots", "must be >= 1")
    require(cfg.eta > 0, "eta", "must be > 0")
    require(0.0 < cfg.discount < 1.0, "discount", "must be in (0, 1)")
    require(cfg.action_bound > 0, "action_bound", "must be > 0")
    require(cfg.lambda0 >= 0, "lambda0", "must be >= 0")
    require(cfg.alpha_lambda >= 0, "alpha_lambda", "must be >= 0")
    require(cfg.kernel_width > 0, "kernel_width", "must be > 0")
    require(cfg.lime_samples >= 1, "lime_samples", "must be >= 1")
    require(cfg.ridge_c >= 0, "ridge_c", "must be >= 0")
    for key in ("sigma_r0_sq", "sigma_theta0_sq", "sigma_w", "t0", "beta",
                "tau_min", "gate", "tau_s_ref", "tau_nom", "r_0",
                "actor_lr", "critic_lr", "costnet_lr", "reward_scale"):
        require(getattr(cfg, key) > 0, key, "must be > 0")
    require(cfg.scan_mode in ("calibrated", "physical"), "scan_mode",
            "must be 'calibrated' or 'physical'")
    require(cfg.state_dim == 3 * cfg.n_targets + 1, "state_dim",
            f"must equal 3*n_targets+1 = {3 * cfg.n_targets + 1}")
    require(cfg.action_dim == cfg.n_targets, "action_dim",
            f"must equal n_targets = {cfg.n_targets}")
    require(cfg.replay_capacity >= cfg.batch_size, "replay_capacity",
            "must be >= batch_size")
    require(0.0 < cfg.soft_update_rho <= 1.0, "soft_update_rho",
            "must be in (0, 1]")
    require(0.0 < cfg.noise_decay_fraction <= 1.0, "noise_decay_fraction",
            "must be in (0, 1]")
    require(cfg.tau_min < cfg.action_bound, "tau_min",
            "must be below action_bound")
    return cfg


def load_config(path: str | Path | None = None,
                overrides: dict[str, str] | None = None,
                environ: dict[str, str] | None = None) -> ExperimentConfig:
    """Parse an INI file, apply RADARRM_* env overrides, validate.

    A missing or empty file yields the full default configuration.
    """
    cfg = ExperimentConfig()
    given: set[str] = set()

    if path is not None:
        parser = configparser.ConfigParser()
        text = Path(path).read_text()
        parser.read_string(text)
        for section in parser.sections():
            if section not in _SECTIONS:
                raise ConfigError(f"unknown config section '{section}'")
            for key, raw in parser.items(section):
                if key not in _SECTIONS[section]:
                    raise ConfigError(
                        f"unknown config key '{key}' in section [{section}]")
                setattr(cfg, key, _parse_value(key, raw))
                given.add(key)

    env = os.environ if environ is None else environ
    for name, raw in sorted(env.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower()
        if key not in _KEY_TO_SECTION:
            raise ConfigError(f"unknown config key '{key}' from {name}")
        setattr(cfg, key, _parse_value(key, raw))
        given.add(key)

    if overrides:
        for key, raw in overrides.items():
            if key not in _KEY_TO_SECTION:
                raise ConfigError(f"unknown config key '{key}' in overrides")
            setattr(cfg, key, _parse_value(key, str(raw)))
            given.add(key)

    _resolve_derived(cfg, given)
    return validate(cfg)


def _format_value(value) -> str:
    # repr keeps full float precision so load(echo(cfg)) == cfg bit-exactly
    return repr(value) if isinstance(value, float) else str(value)


def echo_config(cfg: ExperimentConfig) -> str:
    """Render the fully resolved configuration as canonical INI text."""
    out = io.StringIO()
    for section, keys in _SECTIONS.items():
        out.write(f"[{section}]\n")
        for key in keys:
            out.write(f"{key} = {_format_value(getattr(cfg, key))}\n")
        out.write("\n")
    return out.getvalue()


def config_hash(cfg: ExperimentConfig) -> str:
    """Short stable digest of the resolved configuration."""
    return hashlib.sha256(echo_config(cfg).encode()).hexdigest()[:12]


def describe_version() -> str:
    """Best-effort source version: git describe, else the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
            cwd=Path(__file__).parent)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    from . import __version__
    return __version__


def artifact_header(cfg: ExperimentConfig, seed: int) -> str:
    """Provenance comment block stamped at the top of every output file."""
    return (f"# config_hash={config_hash(cfg)} seed={seed} "
            f"version={describe_version()}\n")

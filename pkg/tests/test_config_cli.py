import json
from pathlib import Path

import numpy as np
import pytest

from radarrm.cli import dispatch
from radarrm.config import (ConfigError, ExperimentConfig, config_hash,
                            echo_config, load_config)


def test_empty_file_gives_reference_defaults(tmp_path):
    path = tmp_path / "empty.ini"
    path.write_text("")
    cfg = load_config(path)
    assert cfg.eta == 1e7
    assert cfg.discount == 0.9
    assert cfg.kernel_width == 2.5
    assert cfg.lime_samples == 10_000
    assert cfg.ridge_c == 1e-3
    assert cfg.beta == 1e5
    assert cfg.t0 == 2.5
    assert cfg.theta_max == 0.9
    assert cfg.lambda0 == 5000.0
    assert cfg.alpha_lambda == 15_000.0
    assert cfg.n_targets == 5
    assert cfg.slots == 50_000
    assert cfg.p_false_alarm == 1e-3
    assert cfg.p_detection == 0.9
    assert cfg.join_prob == 0.03
    assert cfg.sigma_r0_sq == 16.0
    assert cfg.sigma_theta0_sq == 1e-6
    assert cfg.sigma_w == 16.0
    assert cfg.state_dim == 16
    assert cfg.action_dim == 5


def test_missing_config_means_defaults():
    assert load_config(None) == load_config(None)


def test_section_values_parsed(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[environment]\nn_targets = 3\ntheta_max = 0.8\n")
    cfg = load_config(path)
    assert cfg.n_targets == 3
    assert cfg.state_dim == 10
    assert cfg.action_dim == 3
    assert cfg.tau_s_ref == pytest.approx(0.2 * 2.5)
    assert cfg.tau_nom == pytest.approx(0.8 * 2.5 / 3)


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[environment]\nn_tragets = 3\n")
    with pytest.raises(ConfigError, match="n_tragets"):
        load_config(path)


def test_unknown_section_rejected(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[radarz]\nbeta = 1\n")
    with pytest.raises(ConfigError, match="radarz"):
        load_config(path)


def test_constraint_violation_names_key(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[environment]\ntheta_max = 1.5\n")
    with pytest.raises(ConfigError, match="theta_max"):
        load_config(path)


def test_type_error_names_key(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[environment]\nslots = many\n")
    with pytest.raises(ConfigError, match="slots"):
        load_config(path)


def test_state_dim_consistency_checked(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[agent]\nstate_dim = 12\n")
    with pytest.raises(ConfigError, match="state_dim"):
        load_config(path)


def test_echo_roundtrip(tmp_path):
    src = tmp_path / "c.ini"
    src.write_text("[environment]\nn_targets = 4\njoin_prob = 0.25\n"
                   "[lime]\nkernel_width = 1.25\n")
    cfg = load_config(src)
    echoed = tmp_path / "echo.ini"
    echoed.write_text(echo_config(cfg))
    assert load_config(echoed) == cfg
    assert config_hash(load_config(echoed)) == config_hash(cfg)


def test_env_var_override():
    cfg = load_config(None, environ={"RADARRM_THETA_MAX": "0.7",
                                     "HOME": "/root"})
    assert cfg.theta_max == 0.7
    with pytest.raises(ConfigError, match="thta_max"):
        load_config(None, environ={"RADARRM_THTA_MAX": "0.7"})


def fast_ini(tmp_path) -> Path:
    path = tmp_path / "fast.ini"
    path.write_text(
        "[environment]\nslots = 200\njoin_prob = 1.0\n"
        "[agent]\nreplay_capacity = 1000\nbatch_size = 32\n"
        "[lime]\nlime_samples = 150\ncostnet_epochs = 5\n"
        "costnet_lr = 0.001\n")
    return path


def run_pipeline(tmp_path, ini):
    model = tmp_path / "model"
    data = tmp_path / "dataset.csv"
    cnet = tmp_path / "costnet"
    assert dispatch(["train", "--config", str(ini), "--out", str(model),
                     "--slots", "200"]) == 0
    assert dispatch(["collect", "--config", str(ini), "--model", str(model),
                     "--out", str(data), "--slots", "1200"]) == 0
    assert dispatch(["train-costnet", "--config", str(ini), "--dataset",
                     str(data), "--out", str(cnet)]) == 0
    return model, data, cnet


def test_cli_full_pipeline(tmp_path):
    ini = fast_ini(tmp_path)
    model, data, cnet = run_pipeline(tmp_path, ini)
    for name in ("actor.net", "critic.net", "actor_target.net",
                 "critic_target.net", "state.json", "config.ini",
                 "train_trace.csv"):
        assert (model / name).exists()

    exp_path = tmp_path / "explanation.txt"
    assert dispatch(["explain", "--config", str(ini), "--model", str(model),
                     "--dataset", str(data), "--costnet", str(cnet),
                     "--method", "dl-lime", "--samples", "500",
                     "--out", str(exp_path)]) == 0
    text = exp_path.read_text()
    assert "method dl-lime" in text
    assert "samples 500" in text
    assert "config_hash=" in text
    assert "lambda" in text

    out = tmp_path / "report"
    assert dispatch(["evaluate", "--config", str(ini), "--model", str(model),
                     "--dataset", str(data), "--costnet", str(cnet),
                     "--out", str(out), "--slots", "150",
                     "--checkpoint-interval", "50"]) == 0
    assert (out / "metrics.csv").exists()
    assert (out / "summary.csv").exists()
    assert (out / "records.json").exists()

    re_out = tmp_path / "report2"
    assert dispatch(["report", "--config", str(ini), "--records",
                     str(out / "records.json"), "--out", str(re_out)]) == 0
    for name in ("metrics.csv", "summary.csv", "fig1_cost_vs_range.csv"):
        assert (re_out / name).read_bytes() == (out / name).read_bytes()


def test_cli_train_deterministic(tmp_path):
    ini = fast_ini(tmp_path)
    outs = []
    for run in ("a", "b"):
        model = tmp_path / f"model_{run}"
        assert dispatch(["train", "--config", str(ini), "--seed", "9",
                         "--out", str(model), "--slots", "150"]) == 0
        outs.append((model / "actor.net").read_bytes())
        trace = (model / "train_trace.csv").read_bytes()
        outs.append(trace)
    assert outs[0] == outs[2]
    assert outs[1] == outs[3]


def test_cli_artifact_headers_traceable(tmp_path):
    ini = fast_ini(tmp_path)
    model = tmp_path / "model"
    assert dispatch(["train", "--config", str(ini), "--out", str(model),
                     "--slots", "120"]) == 0
    head = (model / "train_trace.csv").read_text().splitlines()[0]
    assert head.startswith("# config_hash=")
    assert "seed=" in head and "version=" in head
    state = json.loads((model / "state.json").read_text())
    assert state["config_hash"] == config_hash(load_config(ini))


def test_cli_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as err:
        dispatch(["frobnicate"])
    assert err.value.code == 2


def test_cli_evaluate_without_model_errors(tmp_path, capsys):
    ini = fast_ini(tmp_path)
    rc = dispatch(["evaluate", "--config", str(ini), "--model",
                   str(tmp_path / "nope"), "--dataset",
                   str(tmp_path / "nope.csv"), "--costnet",
                   str(tmp_path / "nope2"), "--out", str(tmp_path / "o")])
    assert rc == 1
    assert "no trained model" in capsys.readouterr().err


def test_cli_bad_config_errors(tmp_path):
    ini = tmp_path / "bad.ini"
    ini.write_text("[environment]\ntheta_max = 7\n")
    rc = dispatch(["train", "--config", str(ini),
                   "--out", str(tmp_path / "m")])
    assert rc == 1

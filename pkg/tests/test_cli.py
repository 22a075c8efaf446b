"""End-to-end CLI tests: every subcommand, artifacts on disk, exit codes,
config-file precedence, and figure rendering alongside delimited output."""

import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from plreg.cli import EXIT_MODULE, EXIT_PARSE, main
from plreg.datasets import synthetic_pl
from plreg.rng import RngStream


@pytest.fixture()
def runner():
    return CliRunner()


def _write_csv(path, data, label_names=("u", "v", "w")):
    with open(path, "w") as fh:
        cols = [f"x{j+1}" for j in range(data.d)]
        fh.write(",".join(cols + ["cls"]) + "\n")
        for i in range(data.n):
            row = [repr(float(v)) for v in data.X[i]] + [label_names[data.y[i]]]
            fh.write(",".join(row) + "\n")
    return str(path)


@pytest.fixture()
def train_csv(tmp_path):
    data, _ = synthetic_pl(60, 2, 3, RngStream(300))
    return _write_csv(tmp_path / "train.csv", data)


@pytest.fixture()
def binary_csv(tmp_path):
    data, _ = synthetic_pl(60, 1, 2, RngStream(301))
    return _write_csv(tmp_path / "binary.csv", data)


def test_fit_em_then_predict_round_trip(runner, tmp_path, train_csv):
    model = str(tmp_path / "em.json")
    res = runner.invoke(main, ["fit-em", "--data", train_csv, "--label", "cls",
                               "--a", "1.0", "--b", "1.0", "--out", model])
    assert res.exit_code == 0, res.output
    doc = json.load(open(model))
    assert doc["kind"] == "pl-em" and doc["schema_version"] == 1
    assert doc["standardization"] is not None

    pred = str(tmp_path / "pred.csv")
    res = runner.invoke(main, ["predict", "--model", model, "--data", train_csv,
                               "--label", "cls", "--out", pred])
    assert res.exit_code == 0, res.output
    assert "misclassification" in res.output
    first = open(pred).read()
    # bitwise-reproducible predictions from the stored artifact
    runner.invoke(main, ["predict", "--model", model, "--data", train_csv,
                         "--label", "cls", "--out", pred])
    assert open(pred).read() == first
    header = first.splitlines()[0].split(",")
    # probability columns follow the first-appearance label order
    assert sorted(header) == sorted(["prob_u", "prob_v", "prob_w", "predicted"])


def test_fit_gibbs_writes_chain_and_predicts(runner, tmp_path, train_csv):
    model = str(tmp_path / "g.json")
    res = runner.invoke(main, ["fit-gibbs", "--data", train_csv, "--label", "cls",
                               "--burn-in", "30", "--samples", "50", "--seed", "5",
                               "--out", model])
    assert res.exit_code == 0, res.output
    chain_csv = str(tmp_path / "g.chain.csv")
    assert os.path.exists(chain_csv)
    doc = json.load(open(model))
    assert doc["kind"] == "pl-gibbs" and doc["chain_csv"] == chain_csv
    res = runner.invoke(main, ["predict", "--model", model, "--data", train_csv,
                               "--label", "cls", "--out", str(tmp_path / "p.csv")])
    assert res.exit_code == 0, res.output


def test_fit_vb_and_estimate_a(runner, tmp_path, train_csv):
    model = str(tmp_path / "vb.json")
    res = runner.invoke(main, ["fit-vb", "--data", train_csv, "--label", "cls",
                               "--max-iters", "200", "--out", model])
    assert res.exit_code == 0, res.output
    doc = json.load(open(model))
    assert doc["kind"] == "pl-vb" and "variational" in doc
    trace = doc["elbo_trace"]
    assert all(b >= a - 1e-8 * max(1, abs(b)) for a, b in zip(trace, trace[1:]))


def test_fit_logit_and_predict(runner, tmp_path, binary_csv):
    model = str(tmp_path / "logit.json")
    res = runner.invoke(main, ["fit-logit", "--data", binary_csv, "--label", "cls",
                               "--burn-in", "20", "--samples", "30", "--out", model])
    assert res.exit_code == 0, res.output
    doc = json.load(open(model))
    assert doc["kind"] == "logit-gibbs"
    res = runner.invoke(main, ["predict", "--model", model, "--data", binary_csv,
                               "--label", "cls", "--out", str(tmp_path / "p.csv")])
    assert res.exit_code == 0, res.output


def test_predict_roc_outputs_csv_and_figure(runner, tmp_path, binary_csv):
    model = str(tmp_path / "em.json")
    assert runner.invoke(main, ["fit-em", "--data", binary_csv, "--label", "cls",
                                "--out", model]).exit_code == 0
    roc_png = str(tmp_path / "roc.png")
    res = runner.invoke(main, ["predict", "--model", model, "--data", binary_csv,
                               "--label", "cls", "--out", str(tmp_path / "p.csv"),
                               "--roc-out", roc_png])
    assert res.exit_code == 0, res.output
    assert os.path.getsize(roc_png) > 0
    roc_csv = str(tmp_path / "roc.csv")
    assert open(roc_csv).readline().strip() == "fpr,tpr"


def test_regpath_writes_long_csv_and_figure(runner, tmp_path, train_csv):
    out = str(tmp_path / "path.csv")
    res = runner.invoke(main, ["regpath", "--data", train_csv, "--label", "cls",
                               "--a-grid", "1.0,0.9,0.8", "--out", out])
    assert res.exit_code == 0, res.output
    header = open(out).readline().strip()
    assert header == "a,class,feature,value,estimator"
    assert os.path.getsize(str(tmp_path / "path.png")) > 0


def test_benchmark_command_outputs_tables(runner, tmp_path, train_csv):
    prefix = str(tmp_path / "bench")
    res = runner.invoke(main, ["benchmark", "--datasets", f"toy={train_csv}:cls",
                               "--methods", "pl-gibbs,pl-em", "--replications", "2",
                               "--burn-in", "20", "--samples", "40",
                               "--out-prefix", prefix])
    assert res.exit_code == 0, res.output
    assert "Dataset\tpl-gibbs\tpl-em" in res.output
    for suffix in ("_misclass.csv", "_misclass.txt", "_efficiency.csv", "_efficiency.txt"):
        assert os.path.getsize(prefix + suffix) > 0
    eff = open(prefix + "_efficiency.txt").read()
    assert eff.splitlines()[0].startswith("Dataset\tMethod\tTime\tESS")


def test_diagnose_ess_command(runner, tmp_path, train_csv):
    model = str(tmp_path / "g.json")
    assert runner.invoke(main, ["fit-gibbs", "--data", train_csv, "--label", "cls",
                                "--burn-in", "10", "--samples", "60",
                                "--out", model]).exit_code == 0
    out = str(tmp_path / "ess.csv")
    res = runner.invoke(main, ["diagnose-ess", "--chain", str(tmp_path / "g.chain.csv"),
                               "--classes", "3", "--out", out])
    assert res.exit_code == 0, res.output
    assert "min ESS" in res.output
    assert open(out).readline().strip() == "coordinate,ess"
    assert os.path.getsize(str(tmp_path / "ess.png")) > 0


def test_config_file_fills_defaults_but_flags_win(runner, tmp_path, train_csv):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"data": train_csv, "label": "cls", "a": 0.9}))
    model = str(tmp_path / "m.json")
    res = runner.invoke(main, ["fit-em", "--config", str(cfg), "--a", "1.3",
                               "--out", model])
    assert res.exit_code == 0, res.output
    assert json.load(open(model))["hyperparameters"]["a"] == 1.3
    res = runner.invoke(main, ["fit-em", "--config", str(cfg), "--out", model])
    assert res.exit_code == 0
    assert json.load(open(model))["hyperparameters"]["a"] == 0.9


def test_unknown_config_key_is_a_parse_error(runner, tmp_path, train_csv):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"data": train_csv, "label": "cls", "bogus": 1}))
    res = runner.invoke(main, ["fit-em", "--config", str(cfg)])
    assert res.exit_code == EXIT_PARSE
    err = json.loads(res.output.strip().splitlines()[-1])
    assert err["error"] == "ParseError" and "bogus" in err["message"]


def test_missing_data_file_exit_code(runner, tmp_path):
    res = runner.invoke(main, ["fit-em", "--data", "/nope.csv", "--label", "cls",
                               "--out", str(tmp_path / "m.json")])
    assert res.exit_code == EXIT_PARSE


def test_module_error_exit_code(runner, tmp_path, train_csv):
    res = runner.invoke(main, ["fit-em", "--data", train_csv, "--label", "cls",
                               "--a", "-1.0", "--out", str(tmp_path / "m.json")])
    assert res.exit_code == EXIT_MODULE
    err = json.loads(res.output.strip().splitlines()[-1])
    assert err["error"] == "InvalidParameterError"


def test_usage_error_exit_code(runner):
    res = runner.invoke(main, ["fit-em", "--no-such-flag"])
    assert res.exit_code == 2


def test_seed_env_var_recorded(runner, tmp_path, train_csv, monkeypatch):
    monkeypatch.setenv("PLREG_SEED", "777")
    model = str(tmp_path / "m.json")
    res = runner.invoke(main, ["fit-em", "--data", train_csv, "--label", "cls",
                               "--out", model])
    assert res.exit_code == 0, res.output
    assert json.load(open(model))["seed"] == 777


def test_help_lists_all_subcommands(runner):
    res = runner.invoke(main, ["--help"])
    for cmd in ("fit-em", "fit-gibbs", "fit-vb", "fit-logit", "predict",
                "regpath", "benchmark", "diagnose-ess"):
        assert cmd in res.output
    assert runner.invoke(main, ["--version"]).exit_code == 0

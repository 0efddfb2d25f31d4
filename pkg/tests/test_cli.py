import json

import numpy as np
import pytest

from eerlab.cli import main

CONFIG = """\
[experiment]
strategy = random
n_seed = 20
n_val = 30
n_pool = 60
n_query = 5
n_test = 50
K = 2
L = 10
J = 40
T = 6

[model]
hidden = 16
train_iterations = 40
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text(CONFIG)
    return str(path)


def test_run_writes_files(config, tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", config, "--out", str(out), "--seed", "2"]) == 0
    assert (out / "random_seed2.csv").is_file()
    summary = json.loads((out / "random_seed2.json").read_text())
    assert summary["config"]["seed"] == 2
    assert len(summary["selections"]) == 3


def test_rerun_is_byte_identical(config, tmp_path):
    for name in ("a", "b"):
        assert main(["run", "--config", config, "--out", str(tmp_path / name), "--override", "strategy=mell"]) == 0
    assert (tmp_path / "a" / "mell_seed0.csv").read_bytes() == (tmp_path / "b" / "mell_seed0.csv").read_bytes()


def test_override_round_trips_into_echo(config, tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", config, "--out", str(out), "--override", "model.hidden=12",
                 "--override", "T=4"]) == 0
    echo = json.loads((out / "random_seed0.json").read_text())["config"]
    assert echo["hidden"] == 12 and echo["T"] == 4


def test_env_var_sets_default_outdir(config, tmp_path, monkeypatch):
    monkeypatch.setenv("EERLAB_OUT", str(tmp_path / "env"))
    assert main(["run", "--config", config]) == 0
    assert (tmp_path / "env" / "random_seed0.csv").is_file()


@pytest.mark.parametrize("argv", [
    ["run", "--override", "strategy=nope"],
    ["run", "--override", "bogus=1"],
    ["run", "--config", "/definitely/missing.ini"],
    ["analyze", "nope"],
    ["sweep", "--seeds", "a,b"],
])
def test_config_errors_exit_2(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)]) == 2


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_runtime_failure_exits_1(config, tmp_path, monkeypatch):
    import eerlab.cli as cli

    def boom(cfg):
        raise RuntimeError("simulated failure")
    monkeypatch.setattr(cli, "run_experiment", boom)
    assert main(["run", "--config", config, "--out", str(tmp_path)]) == 1
    assert main(["sweep", "--config", config, "--out", str(tmp_path / "s"), "--seeds", "0,1"]) == 1
    assert json.loads((tmp_path / "s" / "failures.json").read_text())[0]["seed"] == 0


def test_sweep_outputs(config, tmp_path):
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", config, "--out", str(out), "--seeds", "0,1,2",
                 "--strategies", "random,entropy"]) == 0
    assert len(list(out.glob("*_seed*.csv"))) == 6
    agg = (out / "aggregate.csv").read_text().splitlines()
    assert agg[0] == "strategy,mean_auc,std_auc" and len(agg) == 3
    for line in agg[1:]:
        name, mean, _ = line.split(",")
        aucs = [json.loads((out / f"{name}_seed{k}.json").read_text())["auc"] for k in range(3)]
        assert float(mean) == pytest.approx(np.mean(aucs), abs=1e-15)
    matrix = (out / "comparison.csv").read_text().splitlines()
    assert matrix[0] == "strategy,random,entropy"
    assert matrix[1].split(",")[1] == "tie"


def test_sweep_is_deterministic_across_parallelism(config, tmp_path):
    args = ["sweep", "--config", config, "--seeds", "0,1", "--strategies", "random,mell"]
    assert main(args + ["--out", str(tmp_path / "a"), "--parallel", "2"]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for f in sorted((tmp_path / "a").glob("*.csv")):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_analyze_all(tmp_path):
    assert main(["analyze", "all", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "analysis_xor.json").read_text())
    assert max(rep["single_step_spread"].values()) < 1e-12
    assert all(json.loads(p.read_text())["passed"] for p in tmp_path.glob("analysis_*.json"))


def test_report(config, tmp_path):
    runs = tmp_path / "runs"
    assert main(["sweep", "--config", config, "--out", str(runs), "--seeds", "0,1,2"]) == 0
    out = tmp_path / "report"
    assert main(["report", str(runs), "--out", str(out)]) == 0
    svgs = list(out.glob("*.svg"))
    assert len(svgs) == 1 and svgs[0].read_text().startswith("<svg")
    rows = (out / "auc_table.csv").read_text().splitlines()
    assert len(rows) == 2
    _, strategy, n, mean, std = rows[1].split(",")
    agg = (runs / "aggregate.csv").read_text().splitlines()[1].split(",")
    assert strategy == "random" and n == "3"
    assert float(mean) == float(agg[1]) and float(std) == float(agg[2])


def test_report_identical_runs_have_zero_std(config, tmp_path):
    for name in ("a", "b"):
        assert main(["run", "--config", config, "--out", str(tmp_path / name)]) == 0
    out = tmp_path / "rep"
    assert main(["report", str(tmp_path / "a"), str(tmp_path / "b"), "--out", str(out)]) == 0
    assert float((out / "auc_table.csv").read_text().splitlines()[1].split(",")[4]) == 0.0


def test_report_rejects_mismatched_budgets(config, tmp_path):
    assert main(["run", "--config", config, "--out", str(tmp_path / "a")]) == 0
    summary = json.loads((tmp_path / "a" / "random_seed0.json").read_text())
    summary["config"]["seed"] = 1
    summary["budgets"][-1] += 1
    (tmp_path / "a" / "random_seed1.json").write_text(json.dumps(summary))
    assert main(["report", str(tmp_path / "a"), "--out", str(tmp_path / "rep")]) == 2


def test_report_without_runs(tmp_path):
    assert main(["report", str(tmp_path), "--out", str(tmp_path / "rep")]) == 2

import json

import numpy as np
import pandas as pd
import pytest

from app.config import config
from app.exceptions import ConvergenceError
from app.harness import commands
from app.harness.commands import (
    EXIT_FAILED,
    EXIT_OK,
    EXIT_USAGE,
    cmd_constants,
    cmd_run,
    cmd_sweep,
    cmd_verify,
)
from app.mdp.benchmarks import random_mdp
from app.mdp.core import save_mdp
from app.optimizer import runner
from app.optimizer.runner import ROW_COLUMNS
from app.utils.files_utils import read_json
from main import main


RUN_CONFIG = {
    "mdp": "random3",
    "estimator": "gpomdp",
    "m": 2,
    "H": 5,
    "T": 3,
    "schedule": {"eta": 0.01},
    "seeds": [0, 1],
}


@pytest.fixture
def small_verify(monkeypatch):
    monkeypatch.setattr(config.verify, "n_pairs", 10)
    monkeypatch.setattr(config.verify, "n_samples", 200)


def _write(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def test_run_writes_outputs(tmp_path):
    """Tests that a run leaves the echo, constants and per-seed records"""
    out = tmp_path / "out"
    code = cmd_run(_write(tmp_path / "exp.json", RUN_CONFIG), output_dir=str(out), jobs=1)
    assert code == EXIT_OK

    for name in ("config.json", "constants.json", "run_meta.json", "run.log"):
        assert (out / name).exists()
    assert "Wrote 2 run(s)" in (out / "run.log").read_text(encoding="utf-8")
    for seed in (0, 1):
        for suffix in (".jsonl", ".csv", "_summary.json"):
            assert (out / f"run_seed{seed}{suffix}").exists()

    frame = pd.read_csv(out / "run_seed0.csv")
    assert tuple(frame.columns) == ROW_COLUMNS
    assert len(frame) == 3
    assert list(frame["trajectories"]) == [2, 4, 6]

    lines = (out / "run_seed1.jsonl").read_text().splitlines()
    assert len(lines) == 3
    summary = read_json(out / "run_seed0_summary.json")
    assert summary["T"] == 3
    assert read_json(out / "config.json")["seeds"] == [0, 1]
    assert "L" in read_json(out / "constants.json")["constants"]


def test_run_seed_override(tmp_path):
    out = tmp_path / "out"
    cmd_run(_write(tmp_path / "exp.json", RUN_CONFIG), output_dir=str(out), seed=9, jobs=1)
    assert (out / "run_seed9.csv").exists()
    assert not (out / "run_seed0.csv").exists()


def test_run_is_independent_of_jobs(tmp_path):
    config_path = _write(tmp_path / "exp.json", {**RUN_CONFIG, "m": 16, "seeds": [3]})
    cmd_run(config_path, output_dir=str(tmp_path / "a"), jobs=1)
    cmd_run(config_path, output_dir=str(tmp_path / "b"), jobs=4)
    for name in ("run_seed3.csv", "run_seed3.jsonl", "run_seed3_summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_auto_config_echo_is_materialized(tmp_path):
    data = {"mdp": "random3", "epsilon": 0.9, "m": "auto", "H": "auto", "T": 2}
    out = tmp_path / "out"
    assert cmd_run(_write(tmp_path / "exp.json", data), output_dir=str(out), jobs=1) == EXIT_OK
    echo = read_json(out / "config.json")
    assert echo["m"] == 1
    assert isinstance(echo["schedule"]["eta"], float)
    assert "recipe" in read_json(out / "constants.json")


def test_run_divergence_flushes_partial_records(tmp_path, monkeypatch):
    """Tests that a diverged seed still leaves its completed rows and exits 1"""
    direction = runner._direction

    def poisoned(mdp, policy, estimator, exact, exact_mode, base_seed, t, jobs):
        grad = direction(mdp, policy, estimator, exact, exact_mode, base_seed, t, jobs)
        return grad * np.inf if base_seed == 1 and t == 1 else grad

    monkeypatch.setattr(runner, "_direction", poisoned)
    out = tmp_path / "out"
    code = cmd_run(_write(tmp_path / "exp.json", RUN_CONFIG), output_dir=str(out), jobs=1)
    assert code == EXIT_FAILED

    assert len(pd.read_csv(out / "run_seed0.csv")) == 3
    assert read_json(out / "run_seed0_summary.json")["diverged_at"] is None
    assert len(pd.read_csv(out / "run_seed1.csv")) == 2
    assert len((out / "run_seed1.jsonl").read_text().splitlines()) == 2
    summary = read_json(out / "run_seed1_summary.json")
    assert summary["diverged_at"] == 1
    assert summary["T"] == 2
    assert (out / "config.json").exists()
    assert (out / "run_meta.json").exists()


def test_run_convergence_error_exits_failed(tmp_path, monkeypatch):
    def stalled(resolved, seed, jobs=None):
        raise ConvergenceError("policy evaluation did not converge")

    monkeypatch.setattr(commands, "run_one", stalled)
    code = cmd_run(_write(tmp_path / "exp.json", RUN_CONFIG), output_dir=str(tmp_path / "out"))
    assert code == EXIT_FAILED


def test_run_missing_mdp_leaves_no_output(tmp_path):
    out = tmp_path / "out"
    code = cmd_run(
        _write(tmp_path / "exp.json", {**RUN_CONFIG, "mdp": "missing.json"}),
        output_dir=str(out),
    )
    assert code == EXIT_USAGE
    assert not out.exists()


def test_run_bad_config(tmp_path):
    code = cmd_run(_write(tmp_path / "exp.json", {**RUN_CONFIG, "m": 0}))
    assert code == EXIT_USAGE
    assert cmd_run(str(tmp_path / "nope.json")) == EXIT_USAGE


def test_constants(tmp_path):
    assert cmd_constants(output_dir=str(tmp_path)) == EXIT_OK
    payload = read_json(tmp_path / "constants.json")
    assert payload["L"] == pytest.approx(150.0)
    assert payload["nu"] == pytest.approx(500.0)


def test_constants_with_recipe(tmp_path):
    assert cmd_constants(epsilon=0.5, m=4, output_dir=str(tmp_path)) == EXIT_OK
    assert read_json(tmp_path / "constants.json")["fosp"]["m_max"] == 4000


def test_constants_rejects_gamma_one():
    assert cmd_constants(gamma=1.0) == EXIT_USAGE


def test_verify_single_check(tmp_path, small_verify):
    assert cmd_verify("els", output_dir=str(tmp_path), jobs=1) == EXIT_OK
    reports = read_json(tmp_path / "verify_reports.json")
    assert [report["check_name"] for report in reports] == ["els"]
    assert reports[0]["pass"] is True
    assert len((tmp_path / "verify_reports.jsonl").read_text().splitlines()) == 1


def test_verify_mutation_fails(tmp_path):
    """Tests that an injected estimator bug makes its target check fail"""
    code = cmd_verify(mutation="off_by_one_discount", output_dir=str(tmp_path), jobs=1)
    assert code == EXIT_FAILED
    reports = read_json(tmp_path / "verify_reports.json")
    assert reports[0]["check_name"] == "unbiasedness"
    assert reports[0]["status"] == "fail"


def test_verify_unknown_check(tmp_path):
    assert cmd_verify("convexity", output_dir=str(tmp_path)) == EXIT_USAGE
    assert cmd_verify(mutation="flip_sign", output_dir=str(tmp_path)) == EXIT_USAGE


def test_verify_enumeration_too_large(tmp_path):
    mdp_path = tmp_path / "big.json"
    save_mdp(random_mdp(4, 4, 0.9, seed=1), mdp_path)
    code = cmd_verify(
        "unbiasedness", mdp=str(mdp_path), horizon=20, output_dir=str(tmp_path / "out")
    )
    assert code == EXIT_USAGE


def test_sweep(tmp_path):
    spec = {
        "base": {"mdp": "random3", "H": 4, "T": 2, "schedule": {"eta": 0.01}, "seeds": [0, 1]},
        "axis": "m",
        "values": [1, 2],
    }
    out = tmp_path / "out"
    assert cmd_sweep(_write(tmp_path / "sweep.json", spec), output_dir=str(out), jobs=2) == EXIT_OK

    runs = pd.read_csv(out / "sweep_runs.csv")
    assert len(runs) == 4
    assert list(runs["m"]) == [1, 1, 2, 2]
    assert list(runs["seed"]) == [0, 1, 0, 1]
    aggregate = pd.read_csv(out / "sweep_aggregate.csv")
    assert len(aggregate) == 2
    assert list(aggregate["n_seeds"]) == [2, 2]
    assert read_json(out / "sweep.json")["axis"] == "m"


def test_sweep_bad_value(tmp_path):
    spec = {"base": {"T": 2, "schedule": {"eta": 0.01}}, "axis": "eta", "values": [-0.1]}
    assert cmd_sweep(_write(tmp_path / "sweep.json", spec)) == EXIT_USAGE


def test_main_usage_errors():
    assert main(["run"]) == EXIT_USAGE
    assert main(["sweep"]) == EXIT_USAGE
    assert main(["bogus"]) == EXIT_USAGE


def test_main_constants():
    assert main(["constants", "--actions", "3", "--gamma", "0.5"]) == EXIT_OK


def test_main_run(tmp_path):
    config_path = _write(tmp_path / "exp.json", RUN_CONFIG)
    out = tmp_path / "out"
    assert main(["run", "--config", config_path, "--output-dir", str(out), "--jobs", "1"]) == EXIT_OK
    assert (out / "run_seed0.csv").exists()

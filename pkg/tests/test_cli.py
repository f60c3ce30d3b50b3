#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""End-to-end tests for the command line, run through main(argv)."""

import json

import pandas as pd
import pytest

from rcis_cli import build_parser, main

INTEGRATOR_N2 = {"name": "integrator_n2", "plant": {"preset": "integrator", "n": 2, "d_max": 0.1},
                 "machine": {"kind": "tree", "L": 4}}

SCALAR = {
    "name": "scalar",
    "plant": {
        "A": [[0.0]], "B": [[1.0]], "D": {"vertices": [[-0.1], [0.1]]},
        "S": {"G": [[1, 0], [-1, 0], [0, 1], [0, -1]], "h": [1, 1, 1, 1]},
    },
    "machine": {"kind": "tree", "L": 1},
    "compare": {"machines": [{"kind": "tree", "L": 1}, {"kind": "simple_loop", "L": 1}]},
    "oracle": {"N_mc": 500, "seed": 1},
}

# |d| = 0.5 cannot be cancelled inside |x| <= 0.1 by an action-blind input
UNSAFE_SCALAR = {
    "name": "unsafe",
    "plant": {
        "A": [[0.0]], "B": [[1.0]], "D": {"vertices": [[-0.5], [0.5]]},
        "S": {"G": [[1, 0], [-1, 0], [0, 1], [0, -1]], "h": [0.1, 0.1, 1, 1]},
    },
    "machine": {"kind": "simple_loop", "L": 1},
}

NO_DOMINANCE = {
    "name": "no_dominance",
    "plant": {
        "A": [[0.0]], "B": [[1.0]], "D": {"vertices": [[-0.1], [0.0], [0.1]]},
        "S": {"G": [[1, 0], [-1, 0], [0, 1], [0, -1]], "h": [1, 1, 1, 1]},
    },
    "machine": {"kind": "custom", "states": ["p", "q"],
                "transition": [[0, 0, 0], [1, 1, 1]], "output": [[0, 0, 1], [2, 3, 3]]},
}


@pytest.fixture(autouse=True)
def run_log_dir(tmp_path, monkeypatch):
    log_dir = tmp_path / "logs"
    monkeypatch.setenv("RCIS_LOG_DIR", str(log_dir))
    return log_dir


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def log_records(log_dir):
    lines = (log_dir / "rcis_runs.jsonl").read_text(encoding="utf-8").splitlines()
    return [json.loads(line) for line in lines]


@pytest.fixture(scope="module")
def built_n2(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("build")
    config = write_config(tmp, INTEGRATOR_N2)
    out = tmp / "out"
    with pytest.MonkeyPatch.context() as mp:
        mp.setenv("RCIS_LOG_DIR", str(tmp / "logs"))
        code = main(["build", "--config", config, "--out", str(out), "--explicit"])
    return code, out


def test_build_integrator_n2(built_n2):
    code, out = built_n2
    assert code == 0
    rcis = json.loads((out / "rcis.json").read_text(encoding="utf-8"))
    assert rcis["kind"] == "single_csub"
    assert rcis["empty"] is False
    assert rcis["plant"]["feedback_K"] is not None
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["machine"] == "tree(L=4)" and "elapsed_s" in report
    assert (out / "explicit.json").exists()


def test_check_membership(built_n2, capsys, run_log_dir):
    _, out = built_n2
    assert main(["check", "--rcis", str(out / "rcis.json"), "--point", "0,0"]) == 0
    printed = capsys.readouterr().out
    assert "is a member" in printed and "theta" in printed
    assert main(["check", "--rcis", str(out / "rcis.json"), "--point", "2,0"]) == 0
    assert "is not a member" in capsys.readouterr().out
    records = log_records(run_log_dir)
    assert [r["results"]["member"] for r in records] == [True, False]
    assert all(r["scenario"] == "check" for r in records)


@pytest.mark.parametrize("point", ["a,b", "0,0,0", ""])
def test_check_rejects_bad_points(built_n2, point):
    _, out = built_n2
    assert main(["check", "--rcis", str(out / "rcis.json"), "--point", point]) == 2


def test_check_missing_file(tmp_path):
    assert main(["check", "--rcis", str(tmp_path / "nope.json"), "--point", "0"]) == 2


def test_empty_set_is_a_successful_build(tmp_path, capsys, run_log_dir):
    out = tmp_path / "out"
    assert main(["build", "--config", write_config(tmp_path, UNSAFE_SCALAR), "--out", str(out)]) == 0
    assert "EMPTY" in capsys.readouterr().out
    assert json.loads((out / "rcis.json").read_text(encoding="utf-8"))["empty"] is True
    assert json.loads((out / "report.json").read_text(encoding="utf-8"))["empty"] is True
    (record,) = log_records(run_log_dir)
    assert record["scenario"] == "build:unsafe" and record["results"]["empty"] is True


def test_build_audits_member_samples(tmp_path, capsys, run_log_dir):
    out = tmp_path / "out"
    config = write_config(tmp_path, SCALAR)
    assert main(["build", "--config", config, "--out", str(out), "--samples", "40"]) == 0
    assert "invariance audit: 0 of 80 checks failed" in capsys.readouterr().out
    audit = json.loads((out / "report.json").read_text(encoding="utf-8"))["audit"]
    assert audit["samples"] == 40 and audit["checks"] == 80
    assert audit["passed"] is True
    (record,) = log_records(run_log_dir)
    assert record["results"]["audit_violations"] == 0


def test_not_nilpotent_without_prefeedback(tmp_path):
    data = dict(INTEGRATOR_N2, plant={"preset": "integrator", "n": 2, "prefeedback": "none"})
    assert main(["build", "--config", write_config(tmp_path, data), "--out", str(tmp_path)]) == 4


def test_schema_violation_exit_code(tmp_path, capsys):
    data = dict(INTEGRATOR_N2, oracle={"maxiter": 3})
    assert main(["build", "--config", write_config(tmp_path, data)]) == 2
    assert "$.oracle" in capsys.readouterr().err


def test_machine_override(tmp_path):
    out = tmp_path / "out"
    config = write_config(tmp_path, SCALAR)
    assert main(["build", "--config", config, "--out", str(out), "--machine", "simple_loop:2"]) == 0
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["machine"] == "simple_loop(L=2)"
    assert main(["build", "--config", config, "--machine", "loop"]) == 2


def test_compare_writes_table(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["compare", "--config", write_config(tmp_path, SCALAR), "--out", str(out),
                 "--samples", "400", "--seed", "3"]) == 0
    table = pd.read_csv(out / "comparison.csv")
    assert list(table.columns) == ["method", "time_s", "vol_pct"]
    assert list(table["method"]) == ["tree(L=1)", "simple_loop(L=1)", "oracle"]
    assert list(table["vol_pct"]) == [100.0, 100.0, 100.0]
    summary = json.loads((out / "compare.json").read_text(encoding="utf-8"))
    assert summary["samples"] == 400 and summary["seed"] == 3
    assert summary["oracle"]["converged"] is True
    assert "vol_pct" in capsys.readouterr().out


def test_simulate_writes_artifacts(tmp_path, run_log_dir):
    data = dict(INTEGRATOR_N2, simulation={
        "T": 20, "x0": [0.1, 0.0], "policy": {"gain": [[0.5, 0.5]]},
        "disturbance": {"kind": "vertex_switching", "seed": 2},
    })
    out = tmp_path / "out"
    assert main(["simulate", "--config", write_config(tmp_path, data), "--out", str(out)]) == 0
    frame = pd.read_csv(out / "trajectory.csv")
    assert len(frame) == 20 and set(frame["qp_status"]) == {"Feasible"}
    assert "<svg" in (out / "trajectory.svg").read_text(encoding="utf-8")
    summary = json.loads((out / "simulation.json").read_text(encoding="utf-8"))
    assert summary["steps"] == 20 and summary["infeasible"] == 0
    (record,) = log_records(run_log_dir)
    assert record["scenario"] == "simulate:integrator_n2"


def test_simulate_scenario_override(tmp_path):
    scenario = tmp_path / "scenario.yaml"
    scenario.write_text("T: 8\ndisturbance:\n  kind: zero\n", encoding="utf-8")
    out = tmp_path / "out"
    config = write_config(tmp_path, SCALAR)
    assert main(["simulate", "--config", config, "--scenario", str(scenario), "--out", str(out)]) == 0
    assert len(pd.read_csv(out / "trajectory.csv")) == 8


def test_simulate_rejects_non_member_start(tmp_path):
    data = dict(SCALAR, simulation={"T": 5, "x0": [3.0]})
    assert main(["simulate", "--config", write_config(tmp_path, data), "--out", str(tmp_path)]) == 2


def test_inspect_simple_loop(capsys):
    assert main(["inspect-machine", "--machine", "simple_loop:5"]) == 0
    printed = capsys.readouterr().out
    assert "|Q| = 5" in printed
    assert "dominant: s1 (all mutually dominant)" in printed


def test_inspect_tree(capsys):
    assert main(["inspect-machine", "--machine", "tree:2", "--actions", "2", "--matrix"]) == 0
    printed = capsys.readouterr().out
    assert "|Q| = 7" in printed and "dominant: s0" in printed
    assert "mutually" not in printed


def test_inspect_no_dominant_state(tmp_path, capsys, run_log_dir):
    assert main(["inspect-machine", "--config", write_config(tmp_path, NO_DOMINANCE)]) == 0
    assert "no dominant state; Q0 = {p, q}" in capsys.readouterr().out
    (record,) = log_records(run_log_dir)
    assert record["results"]["Q0"] == ["p", "q"]


def test_presets_lists_the_builtin_plants(capsys):
    assert main(["presets"]) == 0
    printed = capsys.readouterr().out
    assert "  integrator" in printed and "  lane_keeping" in printed


def test_inspect_needs_a_machine():
    assert main(["inspect-machine"]) == 2


def test_parser_documents_exit_codes():
    help_text = build_parser().format_help()
    assert "Exit codes:" in help_text and "contract breach" in help_text
    with pytest.raises(SystemExit):
        build_parser().parse_args(["frobnicate"])

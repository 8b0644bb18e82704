import json

import pytest

from sigsdp.cli import main


def run(tmp_path, *argv):
    return main(["--output-dir", str(tmp_path), *argv])


@pytest.fixture(scope="module")
def scenario_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("scn")
    assert main(["--output-dir", str(d), "generate", "--side-m", "60", "--seed", "2"]) == 0
    return d / "scenario.json"


def test_generate_summary(tmp_path, capsys):
    assert run(tmp_path, "generate", "--side-m", "100", "--density", "0.0075", "--seed", "1") == 0
    assert "users=75" in capsys.readouterr().out
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "generate" and manifest["seed"] == 1
    assert manifest["kernel_backend"] in ("compiled", "python")
    assert "generate" in manifest["timings_s"]
    assert manifest["argv"][-1] == "1"


def test_generate_rejects_bad_side(tmp_path, capsys):
    assert run(tmp_path, "generate", "--side-m", "30") == 2
    assert "multiple" in capsys.readouterr().err


def test_generate_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["--output-dir", str(d), "generate", "--side-m", "40", "--seed", "9"]) == 0
    assert (a / "scenario.json").read_bytes() == (b / "scenario.json").read_bytes()


def test_bad_flag_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as info:
        run(tmp_path, "generate", "--side-m", "abc")
    assert info.value.code == 2


def test_missing_input(tmp_path):
    assert run(tmp_path, "solve", "--scenario", str(tmp_path / "nope.json")) == 3


def test_corrupt_input(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(tmp_path, "solve", "--scenario", str(bad)) == 3


def test_solve_mmw_stays_in_bracket(tmp_path, scenario_file):
    assert run(tmp_path, "solve", "--scenario", str(scenario_file), "--iters", "40",
               "--trace-normalization", "squared") == 0
    m = json.loads((tmp_path / "manifest.json").read_text())
    lo, hi = m["bounds"]
    asg = json.loads((tmp_path / "assignment.json").read_text())
    assert lo <= asg["z_slots"] <= hi and asg["complete"]
    assert asg["manifest"] == "manifest.json"
    assert m["solver_calls"] == len(m["calls"])
    trace = (tmp_path / "trace.csv").read_text().splitlines()
    assert trace[0] == "# manifest: manifest.json" and trace[1].startswith("n,")


@pytest.mark.parametrize("solver,calls", [("rand", None), ("greedy-mintp", 0), ("greedy-masso", 0)])
def test_solve_other_paths(tmp_path, scenario_file, solver, calls):
    assert run(tmp_path, "solve", "--scenario", str(scenario_file), "--solver", solver) == 0
    m = json.loads((tmp_path / "manifest.json").read_text())
    if calls is not None:
        assert m["solver_calls"] == calls and "calls" not in m


def test_solve_is_deterministic(tmp_path, scenario_file):
    outs = []
    for name in ("x", "y"):
        d = tmp_path / name
        assert main(["--output-dir", str(d), "solve", "--scenario", str(scenario_file), "--iters", "30"]) == 0
        outs.append((d / "assignment.json").read_text())
    assert outs[0] == outs[1]


def test_evaluate(tmp_path, scenario_file):
    assert run(tmp_path, "solve", "--scenario", str(scenario_file), "--iters", "30") == 0
    assert run(tmp_path, "evaluate", "--scenario", str(scenario_file),
               "--assignment", str(tmp_path / "assignment.json")) == 0
    ev = json.loads((tmp_path / "evaluation.json").read_text())
    assert 0 <= ev["mean_error"] <= 1
    rows = (tmp_path / "errors.csv").read_text().splitlines()
    assert rows[1] == "user,slot,sinr,error_rate"


def test_online_zero_latency(tmp_path, scenario_file):
    assert run(tmp_path, "online", "--scenario", str(scenario_file), "--latency", "0",
               "--horizon-slots", "100", "--iters", "20") == 0
    assert (tmp_path / "timeseries.csv").exists()


def test_online_rejects_negative_latency(tmp_path, scenario_file):
    with pytest.raises(SystemExit):
        run(tmp_path, "online", "--scenario", str(scenario_file), "--latency", "-1")


def test_bench(tmp_path):
    assert run(tmp_path, "bench", "--sides", "40", "--reps", "1", "--iters", "10") == 0
    rows = (tmp_path / "bench.csv").read_text().splitlines()
    assert len(rows) == 1 + 1 + 2


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("SIGSDP_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["generate", "--side-m", "20"]) == 0
    assert (tmp_path / "env" / "manifest.json").exists()

import json

import numpy as np
import pytest

from signalgame.cli import (
    ConfigError,
    RunConfig,
    builtin_example,
    main,
    run,
)
from signalgame.evaluator import simulate
from signalgame.game import save_spec
from signalgame.solver import solve


def test_builtin_quickest_detection_matrices():
    spec = builtin_example("quickest_detection", 0.2, 0.1, 4)
    assert spec.horizon == 4
    assert spec.states[0] == ("1", "2")
    assert spec.actions[0] == ("declare_1", "declare_2")
    assert spec.terminating[0] == frozenset({1})
    assert np.allclose(spec.kernels[0][:, 0, :], [[0.8, 0.2], [0.0, 1.0]])
    assert np.allclose(spec.kernels[0][:, 1, :], [[0.8, 0.2], [0.0, 1.0]])
    assert np.allclose(spec.rewards_principal[0], [[1.0, 0.0], [1.0, 0.0]])
    assert np.allclose(spec.rewards_receiver[0], [[0.0, -1.0], [-0.1, 0.0]])
    assert np.allclose(spec.prior, [1.0, 0.0])


def test_builtin_detector_matrices():
    spec = builtin_example("detector", 0.3, 0.15, 2)
    assert spec.states[0] == ("-1", "1")
    assert spec.actions[0] == ("declare_-1", "wait", "declare_1")
    assert spec.terminating[0] == frozenset({0, 2})
    for u in range(3):
        assert np.allclose(spec.kernels[0][:, u, :], [[0.7, 0.3], [0.3, 0.7]])
    assert np.allclose(spec.rewards_principal[0], [[0.0, 1.0, 0.0], [0.0, 1.0, 0.0]])
    assert np.allclose(spec.rewards_receiver[0], [[1.0, -0.15, 0.0], [0.0, -0.15, 1.0]])
    assert np.allclose(spec.prior, [0.5, 0.5])


def test_builtin_parameter_errors():
    for bad in ({"p": 0.0}, {"p": 1.0}, {"c": -0.1}, {"c": 1.5}, {"horizon": 0}):
        with pytest.raises(ConfigError):
            builtin_example("detector", **bad)
    with pytest.raises(ConfigError):
        builtin_example("unknown_game")


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(command="optimize")
    with pytest.raises(ConfigError):
        RunConfig(command="solve")  # neither input nor builtin
    with pytest.raises(ConfigError):
        RunConfig(command="solve", input_path="a.json", builtin="detector")
    with pytest.raises(ConfigError):
        RunConfig(command="envelope")  # envelope requires an input file
    with pytest.raises(ConfigError):
        RunConfig(command="solve", builtin="detector", tie_tol=0.0)
    with pytest.raises(ConfigError):
        RunConfig(command="simulate", builtin="detector", trajectories=1)
    with pytest.raises(ConfigError):
        RunConfig(command="sweep", builtin="detector", depth=-1)
    cfg = RunConfig(command="solve", builtin="detector")
    assert cfg.horizon == 14 and cfg.p == 0.2


def test_main_reports_config_errors(capsys):
    code = main(["solve", "--builtin", "quickest_detection", "--p", "1.5"])
    assert code == 2
    assert capsys.readouterr().err.startswith("error:")
    code = main(["sweep", "--builtin", "detector", "--horizon", "3", "--depth", "9"])
    assert code == 2
    assert "depth" in capsys.readouterr().err


def test_solve_payload_contains_last_stage_table(tmp_path):
    out = tmp_path / "sol.json"
    code = main([
        "solve", "--builtin", "quickest_detection", "--p", "0.2", "--c", "0.1",
        "--horizon", "3", "--out", str(out),
    ])
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["format"] == "signalgame-solution-v1"
    assert payload["horizon"] == 3
    assert payload["prior"] == [1.0, 0.0]
    last = payload["stages"][-1]
    assert last["stage"] == 3
    coords = [v["belief"][0] for v in last["vertices"]]
    assert coords[0] == pytest.approx(0.0)
    assert coords[1] == pytest.approx(1.0 / 11.0)
    assert coords[2] == pytest.approx(1.0)
    assert [v["value_principal"] for v in last["vertices"]] == [0.0, 1.0, 1.0]
    assert last["vertices"][1]["action_label"] == "declare_1"
    assert last["vertices"][0]["action_label"] == "declare_2"


def test_sweep_layout(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main([
        "sweep", "--builtin", "quickest_detection", "--horizon", "14",
        "--depth", "13", "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# signalgame-sweep-v1")
    assert lines[1] == "stage,pi(1),value_principal,value_receiver,action"
    stages = [int(row.split(",")[0]) for row in lines[2:]]
    assert sorted(set(stages)) == list(range(1, 15))
    assert stages[0] == 14 and stages[-1] == 1
    # vertex rows parse back to floats exactly
    first = lines[2].split(",")
    assert float(first[1]) == 0.0
    assert first[4] in ("declare_1", "declare_2")


def test_sweep_default_depth_reaches_stage_one(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--builtin", "detector", "--horizon", "5", "--out", str(out)]) == 0
    stages = {int(r.split(",")[0]) for r in out.read_text().splitlines()[2:]}
    assert stages == {1, 2, 3, 4, 5}


def test_artifacts_are_byte_identical(tmp_path):
    pairs = []
    for name in ("a", "b"):
        sol = tmp_path / f"sol_{name}.json"
        swp = tmp_path / f"swp_{name}.csv"
        sim = tmp_path / f"sim_{name}.json"
        ev = tmp_path / f"ev_{name}.json"
        base = ["--builtin", "detector", "--p", "0.2", "--c", "0.15", "--horizon", "6"]
        assert main(["solve", *base, "--out", str(sol)]) == 0
        assert main(["sweep", *base, "--depth", "5", "--out", str(swp)]) == 0
        assert main(["simulate", *base, "--seed", "9", "--trajectories", "2000",
                     "--out", str(sim)]) == 0
        assert main(["evaluate", *base, "--seed", "9", "--out", str(ev)]) == 0
        pairs.append((sol.read_bytes(), swp.read_bytes(), sim.read_bytes(), ev.read_bytes()))
    assert pairs[0] == pairs[1]


def test_evaluate_payload_and_exit_code(tmp_path):
    out = tmp_path / "eval.json"
    code = main([
        "evaluate", "--builtin", "quickest_detection", "--horizon", "8",
        "--out", str(out),
    ])
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["format"] == "signalgame-evaluation-v1"
    assert payload["violations"] == []
    assert payload["value_gap"] <= 1e-9
    assert payload["max_receiver_gain"] <= 1e-9
    assert payload["max_principal_gain"] <= 1e-9
    assert payload["receiver_checked"] > 0
    assert payload["value_principal"] == pytest.approx(payload["exact_principal"], abs=1e-9)


def test_simulate_payload_matches_library_call(tmp_path):
    out = tmp_path / "sim.json"
    code = main([
        "simulate", "--builtin", "detector", "--horizon", "5", "--seed", "21",
        "--trajectories", "3000", "--out", str(out),
    ])
    assert code == 0
    payload = json.loads(out.read_text())
    report = simulate(solve(builtin_example("detector", 0.2, 0.1, 5)), seed=21, trajectories=3000)
    assert payload["mean_principal"] == report.mean_principal
    assert payload["mean_receiver"] == report.mean_receiver
    assert payload["stderr_principal"] == report.stderr_principal
    assert payload["seed"] == 21 and payload["trajectories"] == 3000


def test_envelope_two_state_oracle(tmp_path):
    src = tmp_path / "objective.json"
    src.write_text(json.dumps({
        "states": 2,
        "pieces": [{"min_of": [
            {"weights": [1.0, 0.0], "offset": 0.0},
            {"weights": [0.0, 1.0], "offset": 0.0},
        ]}],
    }))
    out = tmp_path / "envelope.json"
    assert main(["envelope", "--input", str(src), "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["format"] == "signalgame-envelope-v1"
    assert payload["states"] == 2
    order = np.argsort([v[0] for v in payload["vertices"]])
    verts = np.asarray(payload["vertices"])[order]
    vals = np.asarray(payload["values"])[order]
    assert np.allclose(verts, [[0.0, 1.0], [0.5, 0.5], [1.0, 0.0]], atol=1e-12)
    assert np.allclose(vals, [0.0, 0.5, 0.0], atol=1e-12)


def test_envelope_input_errors(tmp_path, capsys):
    missing = tmp_path / "missing.json"
    assert main(["envelope", "--input", str(missing)]) == 2
    assert "cannot read" in capsys.readouterr().err

    broken = tmp_path / "broken.json"
    broken.write_text("{\n  \"states\": 2,\n")
    assert main(["envelope", "--input", str(broken)]) == 2
    assert ":3:" in capsys.readouterr().err

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"states": 2, "pieces": [{"weights": [1.0]}]}))
    assert main(["envelope", "--input", str(bad)]) == 2
    assert "pieces[0]" in capsys.readouterr().err


def test_saved_builtin_solves_identically(tmp_path):
    spec = builtin_example("detector", 0.2, 0.15, 5)
    path = tmp_path / "game.json"
    save_spec(spec, path)
    from_builtin = tmp_path / "builtin.json"
    from_file = tmp_path / "file.json"
    base = ["--p", "0.2", "--c", "0.15", "--horizon", "5"]
    assert main(["solve", "--builtin", "detector", *base, "--out", str(from_builtin)]) == 0
    assert main(["solve", "--input", str(path), "--out", str(from_file)]) == 0
    assert from_builtin.read_bytes() == from_file.read_bytes()


def test_run_writes_to_stdout_without_out(capsys):
    cfg = RunConfig(command="solve", builtin="quickest_detection", horizon=2)
    assert run(cfg) == 0
    text = capsys.readouterr().out
    payload = json.loads(text)
    assert payload["format"] == "signalgame-solution-v1"

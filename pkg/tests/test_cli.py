from __future__ import annotations

import json
import subprocess
import sys

import yaml

from cpdengine.cli import main
from cpdengine.fixtures import fixture_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def game(name):
    return fixture_path(name)


def test_validate_ok(capsys):
    code, out, _ = run(capsys, "validate", "--game", game("geometric"))
    doc = json.loads(out)
    assert code == 0 and doc["result"]["violations"] == [] and doc["config"]["command"] == "validate"


def test_validate_reports_violations(capsys, tmp_path):
    d = yaml.safe_load(open(game("geometric")))
    d["transitions"][0]["dist"] = {"s0": "0.5", "F": "0.25"}
    p = tmp_path / "bad.yaml"
    p.write_text(yaml.safe_dump(d))
    code, out, _ = run(capsys, "validate", "--game", p)
    assert code == 1
    assert json.loads(out)["result"]["violations"][0]["kind"] == "stochasticity"


def test_continuation_csv(capsys):
    code, out, _ = run(capsys, "continuation", "--game", game("geometric"), "--horizon", 8, "--format", "csv")
    lines = out.splitlines()
    assert code == 0 and lines[0].startswith("# config: ") and lines[1] == "n,survival"
    vals = [float(x.split(",")[1]) for x in lines[2:]]
    assert vals == [0.5**n for n in range(1, 9)]


def test_stochastic_commands_need_seed(capsys):
    code, _, err = run(capsys, "bankrun-simulate", "--runs", 10)
    assert code == 1 and "--seed" in err and len(err.strip().splitlines()) == 1
    code, _, err = run(capsys, "evaluate", "--game", game("risky_branch"), "--mc")
    assert code == 1


def test_bad_input_exit_one(capsys):
    assert run(capsys, "nosuch")[0] == 1
    assert run(capsys, "continuation", "--game", "missing.yaml")[0] == 1
    assert run(capsys, "continuation", "--game", game("geometric"), "--horizon", 0)[0] == 1
    assert run(capsys, "penalty-sweep", "--game", game("penalty_limit"), "--penalties", "5,1")[0] == 1
    assert run(capsys, "evaluate", "--game", game("geometric"), "--completion", "bogus")[0] == 1
    code, _, err = run(capsys, "continuation", "--game", game("geometric"), "--profile", 99)
    assert code == 1 and "out of range" in err


def test_enumeration_cap_is_analysis_error(capsys, monkeypatch):
    import cpdengine.equilibrium as eq

    original = eq.pure_nash
    monkeypatch.setattr("cpdengine.cli.pure_nash", lambda g, o: original(g, o, cap=1))
    assert run(capsys, "equilibria", "--game", game("penalty_limit"))[0] == 2


def test_equilibria_with_limit_check(capsys):
    code, out, _ = run(capsys, "equilibria", "--game", game("penalty_limit"), "--penalties", "0,1,10,100,1000,10000",
                       "--admissible")
    res = json.loads(out)["result"]
    assert code == 0 and res["equilibria"] == [0] and res["admissible"] == [0]
    assert res["penalty_limit"]["verdict"] is True


def test_evaluate_compares_profiles(capsys):
    code, out, _ = run(capsys, "evaluate", "--game", game("completion_flip"), "--profile", 0, "--other", 1,
                       "--penalties", "1,2")
    res = json.loads(out)["result"]
    assert code == 0 and res["comparison"]["p1"] == "less"
    assert res["profiles"][1]["players"]["p1"]["conditional"]["value"] == "-inf"


def test_profile_json_file(capsys, tmp_path):
    p = tmp_path / "prof.json"
    p.write_text(json.dumps({"p1": {"s0": "grab"}}))
    code, out, _ = run(capsys, "continuation", "--game", game("completion_flip"), "--profile", p, "--horizon", 3)
    assert code == 0 and json.loads(out)["result"]["survival"] == [1.0, 0.0, 0.0]


def test_completion_flip_command(capsys):
    code, out, _ = run(capsys, "completion-flip", "--game", game("completion_flip"), "--profile", 0, "--other", 1)
    res = json.loads(out)["result"]
    assert code == 0 and res["flip"] is True
    assert [o["ordering"] for o in res["orderings"]] == ["less", "greater"]


def test_penalty_sweep_csv(capsys, tmp_path):
    out_file = tmp_path / "sweep.csv"
    code, _, _ = run(capsys, "penalty-sweep", "--game", game("penalty_limit"), "--penalties", "0,10",
                     "--format", "csv", "--out", out_file)
    lines = out_file.read_text().splitlines()
    assert code == 0 and lines[1] == "profile_id,M,U,L_mid,L_lo,L_hi,penalty_value,rank" and len(lines) == 10


def test_viability_command(capsys):
    code, out, _ = run(capsys, "viability", "--game", game("empty_kernel"))
    res = json.loads(out)["result"]
    assert code == 0 and res["kernel"] == [] and res["initial_viable"] is False


def test_bankrun_simulate_csv(capsys):
    code, out, _ = run(capsys, "bankrun-simulate", "--seed", 1, "--runs", 2000, "--T-max", 3, "--format", "csv")
    lines = out.splitlines()
    assert code == 0 and lines[1] == "t,survival,failures" and len(lines) == 5


def test_knife_edge_command_passes(capsys):
    code, out, _ = run(capsys, "bankrun-knife-edge", "--seed", 3, "--runs", 100000, "--q", "0.5")
    res = json.loads(out)["result"]
    assert code == 0 and res["passed"] is True
    assert all(leg["pass"] for leg in res["legs"].values())


def test_outputs_are_deterministic_modulo_timestamp(capsys):
    argv = ["bankrun-knife-edge", "--seed", 9, "--runs", 5000, "--q", "simulation"]
    a = json.loads(run(capsys, *argv)[1])
    b = json.loads(run(capsys, *argv)[1])
    a.pop("timestamp"), b.pop("timestamp")
    assert a == b and a["config"]["seed"] == 9 and a["config"]["runs"] == 5000


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cpdengine", "validate", "--game", str(game("geometric"))],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and '"violations": []' in proc.stdout

import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from buavc import cli
from buavc.sim import RobotSpec, Scenario, gen_antipodal_circle
from buavc.sim import montecarlo as mc
from buavc.sim.io import dumps_scenario, load_scenario, read_trajectory, save_scenario


@pytest.fixture
def pair_doc(tmp_path):
    p = tmp_path / "pair.json"
    save_scenario(gen_antipodal_circle(2, 2.0, Scenario(max_steps=400)), p)
    return p


def test_help_lists_verbs():
    out = subprocess.run([sys.executable, "-m", "buavc.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for verb in ("run", "batch", "gen", "verify", cli.OUT_ENV):
        assert verb in out.stdout


def test_run_writes_outputs(pair_doc, tmp_path, capsys):
    out = tmp_path / "o"
    assert cli.main(["run", str(pair_doc), "--out", str(out)]) == cli.EXIT_OK
    m = json.loads((out / "metrics.json").read_text())
    assert m["collision_rate"] == 0.0 and m["seed"] == 0 and len(m["scenario_sha256"]) == 64
    rows = list(csv.DictReader(open(out / "trajectory.csv")))
    assert len(rows) == (m["steps"] + 1) * 2
    recs = read_trajectory(out / "trajectory.csv", 2)
    from buavc.sim import metrics_from_records

    again = metrics_from_records(recs, 0.1)
    assert again.min_inter_robot_distance == m["min_inter_robot_distance"]
    assert json.loads(capsys.readouterr().out)["n_arrived"] == 2


def test_run_byte_identical(pair_doc, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["run", str(pair_doc), "--out", str(a)])
    cli.main(["run", str(pair_doc), "--out", str(b)])
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()


def test_run_override_and_seed(pair_doc, tmp_path):
    out = tmp_path / "o"
    cli.main(["run", str(pair_doc), "--out", str(out), "--override", "delta=0.3", "--seed", "5"])
    sc = load_scenario(out / "scenario.json")
    assert sc.delta == 0.3 and sc.seed == 5
    assert load_scenario(pair_doc).delta == 0.05


def test_run_env_out_dir(pair_doc, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["run", str(pair_doc)]) == 0
    assert (tmp_path / "env" / "trajectory.csv").exists()


def test_run_malformed(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "version": 1,\n  "dt": oops\n}\n')
    assert cli.main(["run", str(bad), "--out", str(tmp_path / "o")]) == cli.EXIT_IO
    assert "line 3" in capsys.readouterr().err
    assert cli.main(["run", str(tmp_path / "missing.json")]) == cli.EXIT_IO


def test_run_exit_codes(tmp_path):
    crash = Scenario(robots=(RobotSpec((-0.25, 0.0), (3.0, 0.0)), RobotSpec((0.25, 0.0), (-3.0, 0.0))),
                     method="bvc", bvc_inflation=-0.9, max_steps=50)
    save_scenario(crash, tmp_path / "c.json")
    assert cli.main(["run", str(tmp_path / "c.json"), "--out", str(tmp_path / "c")]) == cli.EXIT_COLLISION
    slow = gen_antipodal_circle(2, 4.0, Scenario(max_steps=5))
    save_scenario(slow, tmp_path / "s.json")
    assert cli.main(["run", str(tmp_path / "s.json"), "--out", str(tmp_path / "s")]) == cli.EXIT_DEADLOCK


def test_batch_rows_and_aggregate(pair_doc, tmp_path):
    out = tmp_path / "b"
    assert cli.main(["batch", str(pair_doc), "--seeds", "0-9", "--out", str(out)]) == 0
    lines = list(csv.reader(open(out / "batch.csv")))
    assert len(lines) == 1 + 10 + 1 and lines[-1][0] == "mean"
    agg = json.loads((out / "aggregate.json").read_text())
    docs = [json.loads((out / f"seed_{s}" / "metrics.json").read_text()) for s in range(10)]
    for k in ("min_inter_robot_distance", "avg_travelled_distance", "completion_time"):
        mean = math.fsum(d[k] for d in docs) / 10
        assert abs(agg[k + "_mean"] - mean) <= 1e-12
        assert abs(agg[k + "_std"] - float(np.std([d[k] for d in docs]))) <= 1e-12
    again = tmp_path / "b2"
    cli.main(["batch", str(pair_doc), "--repeat", "10", "--seed", "0", "--out", str(again)])
    assert (again / "aggregate.json").read_text() == (out / "aggregate.json").read_text()


def test_gen_kinds(tmp_path):
    p = tmp_path / "c.json"
    assert cli.main(["gen", "circle", "--n", "8", "--radius", "4", "--out", str(p)]) == 0
    sc = load_scenario(p)
    assert len(sc.robots) == 8
    # documents carry 12 significant digits
    assert all(abs(math.hypot(*r.start) - 4.0) < 1e-10 for r in sc.robots)
    assert dumps_scenario(load_scenario(p)) == p.read_text()
    a, b = tmp_path / "r1.json", tmp_path / "r2.json"
    cli.main(["gen", "random", "--density", "0.10", "--seed", "7", "--n", "4", "--out", str(a)])
    cli.main(["gen", "random", "--density", "0.10", "--seed", "7", "--n", "4", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes() and load_scenario(a).obstacles
    s = tmp_path / "a.json"
    assert cli.main(["gen", "asymmetric", "--n", "16", "--seed", "1", "--out", str(s)]) == 0
    assert len(load_scenario(s).robots) == 16
    assert cli.main(["gen", "circle", "--n", "1", "--out", str(tmp_path / "x.json")]) == cli.EXIT_IO
    assert cli.main(["gen", "random", "--density", "0.5", "--out", str(tmp_path / "x.json")]) == cli.EXIT_IO


def test_verify_passes(capsys):
    assert cli.main(["verify", "lemma1", "--samples", "100000", "--eps", "0.1"]) == cli.EXIT_OK
    line = capsys.readouterr().out
    assert "PASS" in line
    for kind in ("theorem2", "theorem3", "lemma2", "separator-minimax"):
        assert cli.main(["verify", kind, "--samples", "100000"]) == cli.EXIT_OK


def test_verify_lemma1_value(capsys):
    assert cli.main(["verify", "lemma1", "--samples", "1000000", "--eps", "0.1", "--dim", "2"]) == 0
    out = capsys.readouterr().out
    emp = float(out.split("empirical=")[1].split()[0])
    assert abs(emp - 0.9) <= 0.001


def test_verify_sample_floor_and_bound_exit(monkeypatch, capsys):
    assert cli.main(["verify", "theorem2", "--samples", "10"]) == cli.EXIT_IO
    bad = mc.MCResult("forced", 0.5, 0.05, 0.001, 10000, False)
    monkeypatch.setattr(mc, "mc_verify_theorem", lambda *a, **k: bad)
    assert cli.main(["verify", "theorem2", "--samples", "10000"]) == cli.EXIT_BOUND

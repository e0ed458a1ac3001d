import json
import re
import shutil
import subprocess
import sys

import pytest

from poisson_sigma import PoissonStructure, cli
from poisson_sigma.fixtures import FIXTURE_DIR, load_fixture
from poisson_sigma.graphs import enumerate_boundary_graphs
from poisson_sigma.weights import WeightResult


def run(capsys, *argv):
    code = cli.dispatch(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def files(tmp_path):
    wedge = tmp_path / "wedge.json"
    wedge.write_text(json.dumps(enumerate_boundary_graphs(1)[0].to_json()))
    so3 = tmp_path / "so3.json"
    so3.write_text(json.dumps(PoissonStructure.so3().to_json()))
    return {"wedge": str(wedge), "so3": str(so3), "cache": str(tmp_path / "cache.jsonl"), "dir": tmp_path}


def test_surface_info(capsys):
    code, out, _ = run(capsys, "surface", "info", "--genus", "0", "--boundaries", "2")
    doc = json.loads(out)
    assert code == 0 and doc["euler_characteristic"] == 0 and doc["tadpole_admissible"] is True
    assert doc["version"] == 1 and doc["normalization"] == "angle2pi-aut-v1"
    code, _, err = run(capsys, "surface", "info", "--genus", "1", "--boundaries", "0")
    assert code == 1 and "closed" in err


def test_star_eval_moyal(capsys):
    code, out, _ = run(capsys, "star", "eval", "--order", "1", "--f", "x1", "--g", "x2")
    doc = json.loads(out)
    assert code == 0 and doc["series"] == "x1*x2 + (1/2) ħ" and doc["weights"] == "exact"
    code, out, _ = run(capsys, "star", "eval", "--order", "1", "--f", "x1", "--g", "x2", "--format", "table")
    assert out.strip() == "x1*x2 + (1/2) ħ"


def test_graphs_enumerate_matches_fixture(capsys):
    code, out, _ = run(capsys, "graphs", "enumerate", "--ext", "2", "--loops", "0")
    doc = json.loads(out)
    assert code == 0
    assert [c["hash"] for c in doc["classes"]] == load_fixture("graphs")["cases"]["ext2-loops0"]
    code, out, _ = run(capsys, "graphs", "enumerate", "--boundary", "2", "--pi-cap", "2")
    assert json.loads(out)["count"] == 6


def test_usage_errors_exit_one(capsys):
    assert run(capsys, "graphs", "enumerate", "--bogus")[0] == 1
    assert run(capsys, "nonsense")[0] == 1
    assert run(capsys, "star", "eval", "--order", "1", "--f", "x9", "--g", "x1")[0] == 1


def test_weights_compute_and_cache(capsys, files):
    argv = ["weights", "compute", "--graph", files["wedge"], "--samples", "50000", "--seed", "3"]
    code, out, _ = run(capsys, *argv, "--cache", files["cache"])
    doc = json.loads(out)
    assert code == 0 and doc["seed"] == 3 and doc["normalization"] == "angle2pi-aut-v1"
    assert not doc["cached"] and abs(doc["result"]["estimate"] - 0.5) < 0.02
    code, out2, _ = run(capsys, *argv, "--cache", files["cache"])
    assert json.loads(out2)["cached"] and json.loads(out2)["result"] == doc["result"]


def test_identical_runs_are_byte_identical(capsys, files):
    argv = ["weights", "compute", "--graph", files["wedge"], "--samples", "20000", "--seed", "8"]
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_non_convergence_exit_code(capsys, files, monkeypatch):
    def fake(gc, positions, samples, seed, threads):
        return WeightResult(gc.hash, 0.1, 0.5, samples, seed, converged=False, reason="non-convergent")
    monkeypatch.setattr(cli, "graph_weight_mc", fake)
    code, out, _ = run(capsys, "weights", "compute", "--graph", files["wedge"], "--samples", "10", "--seed", "1")
    assert code == 2 and json.loads(out)["result"]["converged"] is False


def test_star_assoc(capsys, files):
    code, out, _ = run(capsys, "star", "assoc", "--order", "2")
    assert code == 0 and json.loads(out)["ok"]
    code, out, _ = run(capsys, "star", "assoc", "--poisson", files["so3"], "--order", "2", "--weights", "mc",
                       "--samples", "100000", "--seed", "2", "--cache", files["cache"])
    doc = json.loads(out)
    assert code == 0 and doc["ok"] and len(doc["cases"]) == 5 and doc["seed"] == 2
    code, out, _ = run(capsys, "star", "eval", "--poisson", files["so3"], "--order", "1", "--f", "x1", "--g", "x2",
                       "--cache", files["cache"])
    m = re.fullmatch(r"x1\*x2 \+ ([0-9.]+)\*x3 ħ", json.loads(out)["series"])
    assert code == 0 and m and abs(float(m.group(1)) - 0.5) < 0.02
    code, _, err = run(capsys, "star", "eval", "--poisson", files["so3"], "--order", "1", "--f", "x1", "--g", "x2",
                       "--weights", "exact")
    assert code == 1


def test_star_eval_missing_weights(capsys, files):
    code, _, err = run(capsys, "star", "eval", "--poisson", files["so3"], "--order", "1", "--f", "x1", "--g", "x2",
                       "--cache", str(files["dir"] / "empty.jsonl"))
    assert code == 1 and "missing weights" in err and enumerate_boundary_graphs(1)[0].hash in err


def test_linfty_commands(capsys):
    code, out, _ = run(capsys, "linfty", "build", "--order", "2")
    doc = json.loads(out)
    assert code == 0 and doc["format"] == "linfty-brackets" and doc["components"]
    code, out, _ = run(capsys, "linfty", "check", "--order", "4")
    doc = json.loads(out)
    assert code == 0 and doc["ok"] and doc["gauge"] == "hamiltonian"


def test_audit_qme(capsys, files):
    code, out, _ = run(capsys, "audit", "qme", "--graph", files["wedge"])
    kinds = sorted(s["classification"] for s in json.loads(out)["strata"])
    assert code == 0 and kinds == ["dirichlet-zero", "product", "product"]


def test_fixture_regen(capsys, tmp_path):
    code, out, _ = run(capsys, "fixtures", "regen", "moyal")
    rep = json.loads(out)["reports"][0]
    assert code == 0 and rep["changed"] == rep["added"] == rep["removed"] == []
    assert run(capsys, "fixtures", "regen", "nosuch")[0] == 1

    d = tmp_path / "fx"
    shutil.copytree(FIXTURE_DIR, d)
    doc = json.loads((d / "moyal.json").read_text())
    doc["cases"]["x1 | x2"][1] = "-(1/2)"
    (d / "moyal.json").write_text(json.dumps(doc))
    code, out, _ = run(capsys, "fixtures", "regen", "moyal", "--dir", str(d), "--format", "table")
    assert code == 1 and "changed x1 | x2" in out
    # not overwritten without --write
    assert json.loads((d / "moyal.json").read_text())["cases"]["x1 | x2"][1] == "-(1/2)"
    assert run(capsys, "fixtures", "regen", "moyal", "--dir", str(d), "--write")[0] == 0
    assert run(capsys, "fixtures", "regen", "moyal", "--dir", str(d))[0] == 0


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "poisson_sigma", "star", "eval", "--order", "1", "--f", "x1",
                          "--g", "x2", "--format", "table"], capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "x1*x2 + (1/2) ħ"

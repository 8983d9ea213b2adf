import json

import pytest

from locgn.cli import family_main, main


@pytest.fixture
def tadpole_file(tmp_path):
    p = tmp_path / "tad.json"
    assert main(["family", "--name", "tadpole", "--circle", "2", "--emit", str(p)]) == 0
    return p


def test_family_emits_valid_graph(tmp_path):
    p = tmp_path / "sp.json"
    assert family_main(["--name", "signpost", "--l", "1.0", "--circle", "2.0", "--emit", str(p)]) == 0
    data = json.loads(p.read_text())
    assert {e["id"] for e in data["edges"]} >= {"B"}
    assert len(data["halflines"]) == 2


def test_gn_constant(tadpole_file, tmp_path):
    out = tmp_path / "report.json"
    assert main(["gn-constant", "--graph", str(tadpole_file), "--mesh-h", "0.02", "--starts", "4",
                 "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert 1.0 < rep["C_K_estimate"] < 1.62
    assert rep["converged"] and rep["mesh"]["n_dofs"] > 0


def test_ground_state(tadpole_file, tmp_path):
    out = tmp_path / "gs.json"
    assert main(["ground-state", "--graph", str(tadpole_file), "--mass", "2.6", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["status"] == "NegativeMinimizerFound"


def test_ground_state_unbounded_has_certificate(tadpole_file, tmp_path):
    out = tmp_path / "gs.json"
    assert main(["ground-state", "--graph", str(tadpole_file), "--mass", "3.0", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["status"] == "UnboundedDiagnosed" and d["blowup_certificate"]["valid"]


def test_threshold(tadpole_file, capsys):
    assert main(["threshold", "--graph", str(tadpole_file), "--lo", "1.4", "--hi", "2.7", "--tol", "1e-2"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert 1.36 < d["bracket"][0] < d["bracket"][1] < 1.7321


def test_sweep_exit_code(tmp_path, capsys):
    code = main(["sweep", "--experiment", "signpost", "--grid", "1,2", "--mesh-h", "0.02", "--starts", "4",
                 "--out", str(tmp_path / "sw")])
    assert code == 0
    assert (tmp_path / "sw" / "signpost.csv").exists()
    assert "PASS" in capsys.readouterr().out


def test_missing_graph_file(tmp_path, capsys):
    assert main(["gn-constant", "--graph", str(tmp_path / "nope.json")]) == 1
    assert "error" in capsys.readouterr().err

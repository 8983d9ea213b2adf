import csv
import json

import numpy as np
import pytest

from locgn.constants import C_R, C_R_PLUS, MU_R, MU_R_PLUS, SQRT3
from locgn.experiments import (SweepConfig, SweepResult, core_constant_test_function, cut_edge_test_function,
                               parse_grid, sweep_intricate_core, sweep_long_cut_edge, sweep_signpost,
                               case_table)
from locgn.families import CycleCovered, LongCutEdge, Signpost, Tadpole
from locgn.gn import soliton
from locgn.mesh import Mesh, MeshConfig, quotient_Q

FAST = SweepConfig(h=0.02, n_starts=4)


def test_parse_grid():
    assert parse_grid("2^-2..2^1") == [0.25, 0.5, 1.0, 2.0]
    assert parse_grid("1..8") == [1.0, 2.0, 4.0, 8.0]
    assert parse_grid("4, 1,2") == [1.0, 2.0, 4.0]


def test_grid_must_increase():
    with pytest.raises(ValueError):
        sweep_signpost([1.0, 1.0], FAST)


@pytest.fixture(scope="module")
def signpost_sweep():
    return sweep_signpost([0.25, 1.0, 4.0], FAST)


def test_signpost_sweep_rows(signpost_sweep):
    res = signpost_sweep
    assert res.grid == [0.25, 1.0, 4.0]
    assert all(r["case"] == "NoCoverTwoHalfLines" for r in res.rows)
    assert all(r["mesh"]["n_dofs"] > 0 for r in res.rows)
    assert res.verdicts["nondecreasing"]
    assert res.verdicts["test_family_below_estimate"]
    assert not res.failed


def test_sweep_is_reproducible(signpost_sweep):
    again = sweep_signpost([0.25, 1.0, 4.0], FAST)
    assert again.rows == signpost_sweep.rows


def test_parallel_sweep_matches_serial(signpost_sweep):
    par = sweep_signpost([0.25, 1.0, 4.0], SweepConfig(h=0.02, n_starts=4, workers=2))
    assert par.rows == signpost_sweep.rows


def test_worker_env(monkeypatch, signpost_sweep):
    monkeypatch.setenv("LOCGN_WORKERS", "2")
    res = sweep_signpost([0.25, 1.0, 4.0], FAST)
    assert res.metadata["workers"] == 2
    assert res.rows == signpost_sweep.rows


def test_write_outputs(tmp_path, signpost_sweep):
    csv_path, manifest = signpost_sweep.write(tmp_path / "out")
    rows = list(csv.DictReader(open(csv_path)))
    assert [float(r["param"]) for r in rows] == [0.25, 1.0, 4.0]
    meta = json.loads(manifest.read_text())
    assert meta["metadata"]["config"]["seed"] == 0
    assert meta["verdicts"] == signpost_sweep.verdicts


def test_failed_flag():
    res = SweepResult("x", [1.0], [], {"ok": True, "bad": False})
    assert res.failed
    assert not SweepResult("x", [1.0], [], {"ok": True}).failed


def test_small_sweeps():
    lce = sweep_long_cut_edge([1.0, 4.0], FAST)
    assert lce.verdicts["nondecreasing"] and lce.verdicts["below_C_R_plus"]
    ic = sweep_intricate_core([1, 2], FAST)
    assert ic.verdicts["above_one"] and ic.verdicts["gap_decreasing"]


# --- explicit test functions -----------------------------------------------------


@pytest.mark.parametrize("ell", [0.5, 4.0, 64.0])
def test_cut_edge_test_function_profile(ell):
    g = LongCutEdge(ell).build()
    m = Mesh.from_graph(g, MeshConfig(h=0.05))
    u = cut_edge_test_function(m, ell)
    assert 0 < quotient_Q(u) < C_R_PLUS
    lam = ell ** -0.5
    # half-soliton along the cut edge, continued onto the half-line, flat on both circles
    xs, vals = u.on_edge("B")
    assert np.allclose(vals, soliton(xs, lam), rtol=1e-12)
    xs, vals = u.on_edge("h")
    assert np.allclose(vals[:-1], soliton(ell + xs[:-1], lam), rtol=1e-12)
    for eid, at in (("G11", 0.0), ("G21", ell)):
        _, vals = u.on_edge(eid)
        assert np.allclose(vals, soliton(at, lam), rtol=1e-12)


def test_signpost_test_function_grows_with_cut_edge():
    qs = []
    for ell in (1.0, 8.0, 64.0):
        m = Mesh.from_graph(Signpost(ell).build(), MeshConfig(h=0.05))
        qs.append(quotient_Q(cut_edge_test_function(m, ell)))
    assert qs[0] < qs[1] < qs[2]
    assert C_R_PLUS - qs[2] <= 0.05


def test_core_constant_test_function(tadpole):
    m = Mesh.from_graph(tadpole, MeshConfig(h=0.01))
    assert quotient_Q(core_constant_test_function(m)) == pytest.approx(1.0, abs=1e-3)


# --- summary table -------------------------------------------------------------------


def test_case_table_rows():
    graphs = [("tadpole", Tadpole(2.0).build()), ("cycle_covered", CycleCovered().build())]
    rows = case_table(graphs, scan=True, tol=2e-3)
    tad, cc = rows
    assert tad["case"] == "OneHalfLineNoTerminal"
    assert MU_R_PLUS < tad["mu_K_estimate"] < SQRT3
    assert tad["in_bounds"] and not tad["scan_inconsistent"]
    assert tad["consistency_delta"] <= 2e-2
    assert cc["case"] == "CycleCovering"
    assert abs(cc["mu_K_estimate"] - MU_R) <= 1e-2
    assert abs(cc["C_K_estimate"] - C_R) <= 5e-3


def test_long_signpost_row_near_half_line_mass():
    (row,) = case_table([("signpost(64)", Signpost(64.0).build())], scan=False)
    assert abs(row["mu_K_estimate"] - MU_R_PLUS) <= 0.02
    assert row["in_bounds"]

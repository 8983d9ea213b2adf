import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import line_graph
from locgn.constants import C_R, C_R_PLUS, SQRT3
from locgn.families import IntricateCore, Tadpole
from locgn.gn import (ascend_Q, c_infty_estimate, c_infty_quotient, family_value,
                      maximize_gn, mu_from_C, restricted_family_max, soliton, start_portfolio)
from locgn.mesh import Mesh, MeshConfig, quotient_Q
from locgn.rearrangement import rearranged_quotient


@pytest.fixture(scope="module")
def tadpole_report(tadpole):
    return maximize_gn(tadpole, check_truncation=True)


# --- closed-form family --------------------------------------------------------------


@pytest.mark.parametrize("L, abar", [(1.0, 0.5), (2.0, 0.25)])
def test_restricted_family_optimum(L, abar):
    r = restricted_family_max(Tadpole(L).build())
    assert r.params["alpha_bar"] == abar
    assert r.value == pytest.approx(1.0, abs=1e-15)
    assert r.discrete_value == pytest.approx(1.0, abs=1e-4)


def test_restricted_family_wrong_class(signpost):
    with pytest.raises(ValueError):
        restricted_family_max(signpost)


@given(st.floats(0.01, 10.0), st.floats(0.1, 10.0))
def test_family_value_below_one(alpha, L):
    v = family_value(alpha, L)
    assert v == pytest.approx(8 * alpha * L / (2 * alpha * L + 1) ** 2, rel=1e-14)
    assert v <= 1.0 + 1e-15


def test_soliton_profile():
    assert soliton(0.0, 1.0) == 1.0
    assert soliton(0.0, 4.0) == pytest.approx(2.0)
    assert np.isfinite(soliton(1e4, 1.0)) and soliton(1e4, 1.0) >= 0


# --- maximization ----------------------------------------------------------------------


def test_tadpole_estimate_strictly_inside(tadpole_report):
    r = tadpole_report
    assert r.converged
    assert 1.0 + 0.01 < r.C_K_estimate < C_R_PLUS - 0.01
    assert r.mu_K_estimate * math.sqrt(r.C_K_estimate) == pytest.approx(SQRT3, rel=1e-15)
    assert r.EL_residual <= 1e-6
    assert r.kirchhoff_flux_max <= 1e-5


def test_tadpole_truncation_is_adequate(tadpole_report):
    assert tadpole_report.truncation_rel_change <= 1e-6


def test_starts_never_exceed_estimate(tadpole_report):
    assert max(tadpole_report.start_values.values()) <= tadpole_report.C_K_estimate + 1e-12
    assert tadpole_report.multistart_count == len(tadpole_report.start_values)


def test_rescaled_restart_reproduces_value(tadpole_report):
    u = tadpole_report.optimizer.scaled(3.0)
    _, q, _ = ascend_Q(u)
    assert q == pytest.approx(tadpole_report.C_K_estimate, abs=1e-10)


def test_optimizer_obeys_rearrangement_chain(tadpole_report):
    q = rearranged_quotient(tadpole_report.optimizer)
    assert q["Q"] == pytest.approx(tadpole_report.C_K_estimate, rel=1e-12)
    assert q["Q"] <= q["Q_star_bound"] * (1 + 1e-6)
    assert q["Q_star"] <= C_R_PLUS + 5e-3


def test_optimizer_has_one_sign(tadpole_report):
    c = tadpole_report.optimizer.coef
    assert np.all(c >= 0) or np.all(c <= 0)


def test_cycle_covered_matches_line_constant(cycle_covered):
    r = maximize_gn(cycle_covered)
    assert abs(r.C_K_estimate - C_R) <= 5e-3


def test_terminal_pendant_reaches_half_line_constant(pendant):
    r = maximize_gn(pendant)
    assert abs(r.C_K_estimate - C_R_PLUS) <= 2e-2
    assert r.C_K_estimate <= C_R_PLUS + 1e-6


def test_report_contains_mesh_metadata(tadpole_report):
    d = tadpole_report.to_dict()
    assert d["mesh"]["n_dofs"] > 0
    assert d["classification"]["case_label"] == "OneHalfLineNoTerminal"


def test_portfolio_is_deterministic(signpost):
    m = Mesh.from_graph(signpost, MeshConfig(h=0.05))
    a = start_portfolio(m, 8, seed=7)
    b = start_portfolio(m, 8, seed=7)
    assert [x[0] for x in a] == [x[0] for x in b]
    assert all(np.array_equal(x[1].coef, y[1].coef) for x, y in zip(a, b))
    labels = [x[0] for x in a]
    assert labels[0].startswith("family") and any(l.startswith("random") for l in labels)


@given(st.floats(0.2, 3.0), st.integers(0, 2 ** 16))
def test_constant_on_core_stays_below_one(L, seed):
    # constant on the core, arbitrary nonnegative tail on the single half-line
    g = IntricateCore(1, L).build() if seed % 2 else Tadpole(L).build()
    m = Mesh.from_graph(g, MeshConfig(h=0.05, growth=1.05))
    rng = np.random.default_rng(seed)
    rates, amps = rng.uniform(0.05, 3.0, 3), rng.uniform(0.0, 1.0, 3)

    def f(eid, x):
        if not m.is_half[eid]:
            return np.ones_like(x)
        tail = sum(a * np.exp(-r * x) for a, r in zip(amps, rates))
        return (1.0 + tail) / (1.0 + amps.sum()) if amps.sum() > 0 else np.exp(-x)

    assert quotient_Q(m.interpolate(f)) <= 1.0 + 1e-6


def test_mu_from_C_is_consistent():
    assert mu_from_C(C_R) == pytest.approx(math.pi * SQRT3 / 2, rel=1e-14)


# --- C_infinity --------------------------------------------------------------------


def test_c_infty_line():
    assert c_infty_estimate(line_graph(0.5)) == pytest.approx(1.0, abs=2e-2)


def test_c_infty_tadpole(tadpole):
    assert c_infty_estimate(tadpole) == pytest.approx(math.sqrt(2.0), abs=2e-2)
    assert c_infty_estimate(tadpole) <= math.sqrt(2.0) + 2e-2


def test_c_infty_exponential_quotient():
    m = Mesh.from_graph(line_graph(0.002), MeshConfig(h=0.002, L_trunc=30.0, growth=1.0))
    u = m.interpolate(lambda eid, x: np.exp(-np.abs(x - 0.001)) if eid == "e" else np.exp(-(x + 0.001)))
    assert c_infty_quotient(u) == pytest.approx(1.0, abs=1e-3)

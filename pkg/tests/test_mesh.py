import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import line_graph, sech_mass_oracle
from locgn.constants import C_R_PLUS, MU_R
from locgn.families import Tadpole
from locgn.gn import constant_exponential, family_value, phi1, random_field
from locgn.graph import MetricGraph
from locgn.ground_state import minimize_at_mass
from locgn.mesh import (GraphFunction, Mesh, MeshConfig, QUndefined, energy, kirchhoff_residual, load_snapshot,
                        norms, quotient_Q, save_snapshot)
from test_graph import random_graphs


def soliton_on_line(h: float, L: float = 30.0, core: float | None = None):
    """phi_1 centred in the middle of a core edge (default length h) on a uniform mesh."""
    core = h if core is None else core
    g = line_graph(core)
    m = Mesh.from_graph(g, MeshConfig(h=h, L_trunc=L, growth=1.0))
    return m.interpolate(lambda eid, x: phi1(x - core / 2 if eid == "e" else core / 2 + x))


def test_soliton_mass_matches_quadrature_oracle():
    oracle = sech_mass_oracle()
    assert oracle == pytest.approx(MU_R, abs=1e-12)
    u = soliton_on_line(0.002)
    assert abs(energy(u).mass - oracle) <= 1e-6


def test_mass_converges_at_second_order():
    errs = [abs(energy(soliton_on_line(h)).mass - MU_R) for h in (0.02, 0.01, 0.005)]
    rates = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(1.8 < r < 2.2 for r in rates)


def test_norms_converge_at_second_order():
    ref = norms(soliton_on_line(0.0025, core=2.0))
    diffs = []
    for h in (0.02, 0.01):
        n = norms(soliton_on_line(h, core=2.0))
        diffs.append(np.abs(np.array(n[:4]) - np.array(ref[:4])))
    ratio = diffs[0] / diffs[1]
    assert np.all(ratio > 3.0)


def test_zero_function():
    m = Mesh.from_graph(Tadpole().build(), MeshConfig(h=0.1))
    u = GraphFunction(m, np.zeros(m.n))
    assert all(v == 0 for v in norms(u))
    assert energy(u).total == 0
    with pytest.raises(QUndefined):
        quotient_Q(u)


def test_constant_core_l6():
    g = Tadpole(3.0).build()
    c = 1.3
    for h in (0.1, 0.01):
        m = Mesh.from_graph(g, MeshConfig(h=h, L_trunc=5.0, growth=1.0))
        u = m.interpolate(lambda eid, x: np.full_like(x, c) if eid != "h" else np.where(x == 0, c, 0.0))
        assert norms(u).l6_core ** 6 == pytest.approx(c ** 6 * 3.0, rel=1e-13)
        assert norms(u).sup == c


def test_dilation_scales_energy_by_lambda_squared():
    g = line_graph(4.0)

    def dilated(lam):
        inner = np.linspace(0.0, 1.0 / lam, 301)
        nodes = {"e": np.concatenate([inner, np.linspace(1.0 / lam, 4.0, 41)[1:]]),
                 "h1": np.linspace(0.0, 2.0, 5), "h2": np.linspace(0.0, 2.0, 5)}
        m = Mesh.from_nodes(g, nodes)
        bump = lambda y: np.where(y <= 1.0, np.sin(np.pi * np.clip(y, 0, 1)) ** 2, 0.0)
        return m.interpolate(lambda eid, x: 3.0 * math.sqrt(lam) * bump(lam * x) if eid == "e" else 0 * x)

    e1 = energy(dilated(1.0)).total
    for lam in (2.0, 4.0):
        assert energy(dilated(lam)).total == pytest.approx(lam ** 2 * e1, rel=1e-8)


def test_soliton_energy_vanishes_with_full_core():
    # core edge of length 40 centred on the soliton; the half-lines carry a negligible tail
    h, L = 0.005, 40.0
    g = line_graph(L)
    m = Mesh.from_graph(g, MeshConfig(h=h, L_trunc=2.0, growth=1.0))
    u = m.interpolate(lambda eid, x: phi1(x - L / 2) if eid == "e" else phi1(L / 2 + x))
    assert abs(energy(u).total) <= 1e-4


@given(st.floats(1.01, 5.0), st.integers(0, 2 ** 16))
def test_amplitude_scaling_is_exact(sigma, seed):
    m = Mesh.from_graph(Tadpole().build(), MeshConfig(h=0.1, L_trunc=6.0))
    u = random_field(m, np.random.default_rng(seed))
    e, es = energy(u), energy(u.scaled(sigma))
    assert es.total == pytest.approx(sigma ** 2 * e.kinetic - sigma ** 6 * e.potential, rel=1e-12, abs=1e-12)
    assert e.total == e.kinetic - e.potential
    assert quotient_Q(u.scaled(sigma)) == pytest.approx(quotient_Q(u), rel=1e-13)
    assert quotient_Q(u.scaled(2.0)) == quotient_Q(u)


@pytest.mark.parametrize("L", [0.5, 1.0, 2.0, 5.0])
def test_constant_exponential_at_optimal_rate(L):
    g = Tadpole(L).build()
    m = Mesh.from_graph(g, MeshConfig(h=0.005))
    assert quotient_Q(constant_exponential(m, 1.0 / (2 * L))) == pytest.approx(1.0, abs=1e-4)


def test_constant_exponential_off_optimum():
    g = Tadpole(1.0).build()
    m = Mesh.from_graph(g, MeshConfig(h=0.005))
    assert quotient_Q(constant_exponential(m, 1.0)) == pytest.approx(8 / 9, abs=1e-4)
    assert family_value(1.0, 1.0) == pytest.approx(8 / 9, abs=1e-15)


@given(random_graphs(max_vertices=4, max_edges=5), st.integers(0, 2 ** 16))
def test_quotient_below_half_line_constant(g, seed):
    m = Mesh.from_graph(g, MeshConfig(h=0.05, L_trunc=10.0, growth=1.05))
    u = random_field(m, np.random.default_rng(seed))
    assert quotient_Q(u) <= C_R_PLUS + 5e-3


# --- subdivision ----------------------------------------------------------------------


def test_identical_remesh_is_bit_identical():
    m = Mesh.from_graph(Tadpole().build(), MeshConfig(h=0.05))
    u = random_field(m, np.random.default_rng(1))
    m2 = m.refine(np.zeros(m.n_cells, dtype=bool))
    u2 = m2.transfer(u)
    assert norms(u2) == norms(u)
    assert energy(u2) == energy(u)


@given(st.integers(1, 39), st.integers(0, 2 ** 16))
def test_subdivision_at_a_node_preserves_norms(k, seed):
    g = MetricGraph.build(["a", "b"], [("e", "a", "b", 2.0), ("f", "a", "b", 1.0)], [("h", "a")])
    m = Mesh.from_graph(g, MeshConfig(h=0.05, L_trunc=4.0, growth=1.0))
    u = random_field(m, np.random.default_rng(seed))
    xs = m.nodes["e"]
    at = xs[k]
    gs = g.subdivided("e", at, new_vertex="w")
    nodes = {eid: v for eid, v in m.nodes.items() if eid != "e"}
    nodes["e.a"], nodes["e.b"] = xs[: k + 1], xs[k:] - at
    ms = Mesh.from_nodes(gs, nodes)
    vals = m.values_on(u.coef, "e")
    us = ms.interpolate(lambda eid, x: vals[: k + 1] if eid == "e.a" else vals[k:] if eid == "e.b"
                        else m.values_on(u.coef, eid))
    a, b = np.array(norms(u)), np.array(norms(us))
    assert np.allclose(a, b, rtol=1e-12, atol=0)


def test_mesh_rejects_bad_nodes():
    g = Tadpole().build()
    m = Mesh.from_graph(g, MeshConfig(h=0.1))
    nodes = dict(m.nodes)
    nodes["loop1"] = nodes["loop1"][::-1]
    with pytest.raises(ValueError):
        Mesh.from_nodes(g, nodes)
    nodes = dict(m.nodes)
    nodes["loop1"] = nodes["loop1"] * 1.5
    with pytest.raises(ValueError):
        Mesh.from_nodes(g, nodes)
    with pytest.raises(ValueError):
        GraphFunction(m, np.zeros(m.n + 1))
    with pytest.raises(ValueError):
        GraphFunction(m, np.full(m.n, np.nan))


def test_half_line_far_end_is_dirichlet():
    m = Mesh.from_graph(Tadpole().build(), MeshConfig(h=0.1))
    u = GraphFunction(m, np.ones(m.n))
    _, vals = u.on_edge("h")
    assert vals[-1] == 0.0 and vals[0] == 1.0


def test_default_truncation_follows_decay_rate():
    short = Mesh.from_graph(Tadpole(2.0).build())
    long = Mesh.from_graph(Tadpole(40.0).build())
    assert short.L_trunc == pytest.approx(12.0 * 4.0)
    assert long.L_trunc == pytest.approx(12.0 * 80.0)


# --- Kirchhoff residual ---------------------------------------------------------------


def test_flux_of_constant_vanishes():
    m = Mesh.from_graph(Tadpole().build(), MeshConfig(h=0.05, L_trunc=6.0, growth=1.0))
    u = m.interpolate(lambda eid, x: np.where(x < 5.0, 0.7, 0.7 * (6.0 - x)) if eid == "h" else 0.7 + 0 * x)
    kr = kirchhoff_residual(u, 0.0)
    assert all(abs(v) < 1e-12 for v in kr.flux.values())


def test_flux_of_constant_exponential_is_obstructed():
    c, L = 1.0, 2.0
    alpha = 1 / (2 * L)
    m = Mesh.from_graph(Tadpole(L).build(), MeshConfig(h=0.001))
    u = constant_exponential(m, alpha, c)
    flux = kirchhoff_residual(u, 0.0).flux["v"]
    assert flux == pytest.approx(-c * alpha, rel=1e-3)


def test_ground_state_residual_small(tadpole):
    r = minimize_at_mass(tadpole, 2.6)
    kr = kirchhoff_residual(r.minimizer, r.lagrange_multiplier)
    assert kr.residual_norm <= 1e-5
    assert max(abs(v) for v in kr.consistent_flux.values()) <= 1e-5


def test_snapshot_roundtrip(tmp_path, signpost):
    m = Mesh.from_graph(signpost, MeshConfig(h=0.1))
    u = random_field(m, np.random.default_rng(3))
    p = tmp_path / "u.csv"
    save_snapshot(u, p)
    v = load_snapshot(p, signpost)
    assert np.array_equal(v.coef, u.coef)
    assert norms(v) == norms(u)

"""Continuous piecewise-linear functions on a metric graph.

Every bounded edge and every (truncated) half-line is cut into cells.
Vertex nodes carry one shared degree of freedom, which is what makes the
discrete functions continuous; the far end of a truncated half-line is a
homogeneous Dirichlet node.  Because discrete functions are genuine
H^1(G) functions (extended by zero past the truncation) and all norms
below are computed exactly, every discrete quotient value is a valid lower
bound for the corresponding sharp constant.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graph import MetricGraph

# 4-point Gauss-Legendre on [0, 1]; exact for degree <= 7, so for u^6 with u linear.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)
GAUSS_S = 0.5 * (_GL_X + 1.0)
GAUSS_W = 0.5 * _GL_W


class QUndefined(ValueError):
    """Raised when the Gagliardo-Nirenberg quotient has a vanishing denominator."""


@dataclass(frozen=True)
class MeshConfig:
    """Discretization policy.

    ``h`` is the target cell size on bounded edges (and the first cell on
    half-lines).  Half-line cells grow geometrically by ``growth`` up to
    ``hmax`` (``None``: a hundredth of the expected decay length).
    ``L_trunc=None`` picks ``12 / expected decay rate`` (see
    :func:`default_truncation`).  Relative quadrature/refinement tolerance
    for the truncation doubling check is ``rtol``.
    """

    h: float = 0.01
    L_trunc: float | None = None
    growth: float = 1.02
    hmax: float | None = None
    min_cells: int = 4
    rtol: float = 1e-6


def expected_decay_rate(g: MetricGraph) -> float:
    """Decay rate of the constant-on-core exponential competitor, capped at 1."""
    return min(1.0, max(g.n_halflines, 1) / (2.0 * g.core_length))


def default_truncation(g: MetricGraph) -> float:
    return 12.0 / expected_decay_rate(g)


def _uniform_nodes(length: float, h: float, min_cells: int) -> np.ndarray:
    n = max(min_cells, int(math.ceil(length / h - 1e-9)))
    return np.linspace(0.0, length, n + 1)


def _graded_nodes(L: float, h: float, growth: float, hmax: float | None, min_cells: int) -> np.ndarray:
    if growth <= 1.0 and hmax is None:
        return _uniform_nodes(L, h, min_cells)
    hmax = hmax if hmax is not None else L
    xs = [0.0]
    step = h
    while xs[-1] + step < L:
        xs.append(xs[-1] + step)
        step = min(step * growth, hmax)
    if L - xs[-1] < 0.5 * step and len(xs) > 1:
        xs[-1] = L
    else:
        xs.append(L)
    xs = np.asarray(xs)
    if len(xs) - 1 < min_cells:
        return _uniform_nodes(L, L / min_cells, min_cells)
    return xs


class Mesh:
    """P1 discretization of a metric graph.

    Attributes of interest: ``n`` (number of free DOFs), ``nodes`` (edge id
    -> local node coordinates), ``dofs`` (edge id -> DOF per node, with
    ``n`` standing for the Dirichlet zero), and the cell arrays ``c0, c1,
    ch, core`` used by the vectorized assembly.
    """

    def __init__(self, graph: MetricGraph, nodes: dict[str, np.ndarray], L_trunc: float):
        self.graph = graph
        self.L_trunc = float(L_trunc)
        self.nodes = {k: np.asarray(v, dtype=float) for k, v in nodes.items()}
        self.edge_ids = [e.id for e in graph.edges] + [h.id for h in graph.halflines]
        self.is_half = {e.id: False for e in graph.edges} | {h.id: True for h in graph.halflines}
        self.vertex_dof = {v: i for i, v in enumerate(graph.vertices)}
        nxt = len(graph.vertices)
        interior = {}
        for eid in self.edge_ids:
            xs = self.nodes[eid]
            if xs[0] != 0.0 or np.any(np.diff(xs) <= 0):
                raise ValueError(f"nodes of {eid!r} must start at 0 and increase")
            k = len(xs) - 2
            interior[eid] = np.arange(nxt, nxt + k)
            nxt += k
        self.n = nxt
        ghost = self.n
        self.dofs = {}
        for e in graph.edges:
            if abs(self.nodes[e.id][-1] - e.length) > 1e-9 * max(1.0, e.length):
                raise ValueError(f"nodes of {e.id!r} must end at the edge length")
            self.dofs[e.id] = np.concatenate(
                [[self.vertex_dof[e.tail]], interior[e.id], [self.vertex_dof[e.head]]]).astype(int)
        for hl in graph.halflines:
            self.dofs[hl.id] = np.concatenate([[self.vertex_dof[hl.anchor]], interior[hl.id], [ghost]]).astype(int)

        c0, c1, ch, core, ce, cx = [], [], [], [], [], []
        for k, eid in enumerate(self.edge_ids):
            d, xs = self.dofs[eid], self.nodes[eid]
            c0.append(d[:-1])
            c1.append(d[1:])
            ch.append(np.diff(xs))
            core.append(np.full(len(xs) - 1, not self.is_half[eid]))
            ce.append(np.full(len(xs) - 1, k))
            cx.append(xs[:-1])
        self.c0 = np.concatenate(c0)
        self.c1 = np.concatenate(c1)
        self.ch = np.concatenate(ch)
        self.core = np.concatenate(core)
        self.cell_edge = np.concatenate(ce)
        self.cell_x0 = np.concatenate(cx)
        self._core_idx = np.flatnonzero(self.core)
        self._assemble()

    # --- construction ---------------------------------------------------------

    @classmethod
    def from_graph(cls, g: MetricGraph, config: MeshConfig | None = None) -> "Mesh":
        config = config or MeshConfig()
        L = config.L_trunc if config.L_trunc is not None else default_truncation(g)
        nodes = {}
        for e in g.edges:
            n_min = max(config.min_cells, 2 if e.is_loop else 1)
            nodes[e.id] = _uniform_nodes(e.length, config.h, n_min)
        hmax = config.hmax
        if hmax is None and config.growth > 1.0:
            hmax = max(config.h, 0.01 / expected_decay_rate(g))
        for hl in g.halflines:
            nodes[hl.id] = _graded_nodes(L, config.h, config.growth, hmax, config.min_cells)
        mesh = cls(g, nodes, L)
        mesh.config = config
        return mesh

    @classmethod
    def from_nodes(cls, g: MetricGraph, nodes: dict[str, np.ndarray]) -> "Mesh":
        Ls = {float(nodes[h.id][-1]) for h in g.halflines}
        if len(Ls) != 1:
            raise ValueError("all half-lines must share one truncation length")
        return cls(g, nodes, Ls.pop())

    def refine(self, cell_mask: np.ndarray) -> "Mesh":
        """Bisect the flagged cells; node positions of other cells are unchanged."""
        new_nodes = {}
        for k, eid in enumerate(self.edge_ids):
            xs = self.nodes[eid]
            flags = cell_mask[self.cell_edge == k]
            mids = 0.5 * (xs[:-1] + xs[1:])[flags]
            new_nodes[eid] = np.sort(np.concatenate([xs, mids]))
        mesh = Mesh(self.graph, new_nodes, self.L_trunc)
        mesh.config = getattr(self, "config", None)
        return mesh

    def with_truncation(self, L_new: float) -> "Mesh":
        """Same mesh with half-lines extended (or cut) to ``L_new``; extra cells use the last cell size."""
        new_nodes = dict(self.nodes)
        for hl in self.graph.halflines:
            xs = self.nodes[hl.id]
            if L_new > xs[-1]:
                step = xs[-1] - xs[-2]
                extra = np.arange(xs[-1] + step, L_new, step)
                xs = np.concatenate([xs, extra])
                xs[-1] = L_new if L_new - xs[-1] < 0.5 * step else xs[-1]
                if xs[-1] != L_new:
                    xs = np.append(xs, L_new)
            else:
                xs = np.append(xs[xs < L_new], L_new)
            new_nodes[hl.id] = xs
        return Mesh(self.graph, new_nodes, L_new)

    # --- assembly ----------------------------------------------------------------

    def _assemble(self):
        n = ghost = self.n
        c0, c1, h = self.c0, self.c1, self.ch
        rows, cols, kv, mv = [], [], [], []
        for (i, j, kk, mm) in ((c0, c0, 1 / h, h / 3), (c1, c1, 1 / h, h / 3),
                               (c0, c1, -1 / h, h / 6), (c1, c0, -1 / h, h / 6)):
            m = (i != ghost) & (j != ghost)
            rows.append(i[m])
            cols.append(j[m])
            kv.append(kk[m])
            mv.append(mm[m])
        rows, cols = np.concatenate(rows), np.concatenate(cols)
        self.K = sp.csc_matrix((np.concatenate(kv), (rows, cols)), shape=(n, n))
        self.M = sp.csc_matrix((np.concatenate(mv), (rows, cols)), shape=(n, n))
        self.A = (self.K + self.M).tocsc()
        self._A_lu = None

    def solve_A(self, rhs: np.ndarray) -> np.ndarray:
        """Apply the inverse of the H^1 Gram matrix ``K + M``."""
        if self._A_lu is None:
            self._A_lu = spla.splu(self.A)
        return self._A_lu.solve(rhs)

    # --- exact integrals on coefficient vectors --------------------------------

    def _ends(self, u: np.ndarray):
        ue = np.append(u, 0.0)
        return ue[self.c0], ue[self.c1]

    def mass(self, u: np.ndarray) -> float:
        return float(u @ (self.M @ u))

    def kinetic(self, u: np.ndarray) -> float:
        return float(u @ (self.K @ u))

    def _lp_cells(self, a, b, h, p):
        v = a[:, None] * (1.0 - GAUSS_S) + b[:, None] * GAUSS_S
        return h * (np.abs(v) ** p @ GAUSS_W)

    def l6_core(self, u: np.ndarray) -> float:
        """``||u||_{6,K}^6`` (exact for P1)."""
        a, b = self._ends(u)
        idx = self._core_idx
        return float(self._lp_cells(a[idx], b[idx], self.ch[idx], 6).sum())

    def l6_all(self, u: np.ndarray) -> float:
        a, b = self._ends(u)
        return float(self._lp_cells(a, b, self.ch, 6).sum())

    def lp_core(self, u: np.ndarray, p: float) -> float:
        a, b = self._ends(u)
        idx = self._core_idx
        return float(self._lp_cells(a[idx], b[idx], self.ch[idx], p).sum())

    def l6_core_grad(self, u: np.ndarray) -> tuple[float, np.ndarray]:
        """Value of ``||u||_{6,K}^6`` and its gradient w.r.t. the coefficients."""
        a, b = self._ends(u)
        idx = self._core_idx
        a, b, h = a[idx], b[idx], self.ch[idx]
        v = a[:, None] * (1.0 - GAUSS_S) + b[:, None] * GAUSS_S
        val = float((h * (v**6 @ GAUSS_W)).sum())
        w5 = 6.0 * v**5 * GAUSS_W
        ga = h * (w5 @ (1.0 - GAUSS_S))
        gb = h * (w5 @ GAUSS_S)
        g = np.bincount(self.c0[idx], ga, minlength=self.n + 1) + np.bincount(self.c1[idx], gb, minlength=self.n + 1)
        return val, g[: self.n]

    # --- node-level helpers ----------------------------------------------------

    def values_on(self, u: np.ndarray, eid: str) -> np.ndarray:
        return np.append(u, 0.0)[self.dofs[eid]]

    def interpolate(self, f: Callable[[str, np.ndarray], np.ndarray]) -> "GraphFunction":
        """Nodal interpolation of ``f(edge_id, local_x)``; vertex values are averaged over incident edges."""
        acc = np.zeros(self.n + 1)
        cnt = np.zeros(self.n + 1)
        for eid in self.edge_ids:
            vals = np.asarray(f(eid, self.nodes[eid]), dtype=float)
            np.add.at(acc, self.dofs[eid], vals)
            np.add.at(cnt, self.dofs[eid], 1.0)
        u = acc[: self.n] / cnt[: self.n]
        return GraphFunction(self, u)

    def transfer(self, u: "GraphFunction") -> "GraphFunction":
        """Evaluate a function living on another mesh of the same graph at this mesh's nodes."""
        src = u.mesh

        def f(eid, x):
            return np.interp(x, src.nodes[eid], src.values_on(u.coef, eid), right=0.0)

        return self.interpolate(f)

    @property
    def n_cells(self) -> int:
        return len(self.ch)

    def metadata(self) -> dict:
        cfg = getattr(self, "config", None)
        return {
            "n_dofs": int(self.n),
            "n_cells": int(self.n_cells),
            "h_min": float(self.ch.min()),
            "h_max_core": float(self.ch[self.core].max()),
            "L_trunc": self.L_trunc,
            "config": None if cfg is None else cfg.__dict__,
        }


@dataclass(frozen=True)
class GraphFunction:
    mesh: Mesh
    coef: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coef, dtype=float)
        if c.shape != (self.mesh.n,):
            raise ValueError(f"expected {self.mesh.n} coefficients, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coef", c)

    def scaled(self, s: float) -> "GraphFunction":
        return GraphFunction(self.mesh, s * self.coef)

    def with_mass(self, mu: float) -> "GraphFunction":
        return self.scaled(math.sqrt(mu / self.mesh.mass(self.coef)))

    def abs(self) -> "GraphFunction":
        return GraphFunction(self.mesh, np.abs(self.coef))

    def on_edge(self, eid: str) -> tuple[np.ndarray, np.ndarray]:
        return self.mesh.nodes[eid], self.mesh.values_on(self.coef, eid)


# --- public operations ---------------------------------------------------------------


class Norms(NamedTuple):
    l2: float
    l6_core: float
    l6: float
    h1_semi: float
    sup: float


class EnergyBreakdown(NamedTuple):
    kinetic: float
    potential: float
    total: float
    mass: float


def norms(u: GraphFunction) -> Norms:
    """L2 on G, L6 on the core, L6 on G, H1 seminorm, sup norm."""
    m, c = u.mesh, u.coef
    return Norms(
        math.sqrt(max(m.mass(c), 0.0)),
        m.l6_core(c) ** (1 / 6),
        m.l6_all(c) ** (1 / 6),
        math.sqrt(max(m.kinetic(c), 0.0)),
        float(np.abs(c).max()) if c.size else 0.0,
    )


def energy(u: GraphFunction) -> EnergyBreakdown:
    m, c = u.mesh, u.coef
    kin = 0.5 * m.kinetic(c)
    pot = m.l6_core(c) / 6.0
    return EnergyBreakdown(kin, pot, kin - pot, m.mass(c))


def quotient_Q(u: GraphFunction) -> float:
    """``||u||_{6,K}^6 / (||u||_2^4 ||u'||_2^2)``, invariant under amplitude scaling."""
    m, c = u.mesh, u.coef
    mass, kin = m.mass(c), m.kinetic(c)
    if mass <= 0.0 or kin <= 0.0:
        raise QUndefined("Q undefined for zero function or zero derivative")
    # normalizing first keeps the ratio scale-exact in floating point
    s = 1.0 / math.sqrt(mass)
    c = s * c
    return m.l6_core(c) / m.kinetic(c)


class KirchhoffResidual(NamedTuple):
    flux: dict            # vertex -> sum of one-sided outgoing difference quotients
    consistent_flux: dict  # vertex -> flux recovered from the weak form (O(h) correction removed)
    residual_norm: float  # H^{-1}-type norm of  K u + lam M u - F(u)
    nodal_max: float      # max |weak residual| over all DOFs


def weak_residual(u: GraphFunction, lam: float) -> np.ndarray:
    """Weak Euler-Lagrange residual of ``-u'' + lam u - chi_K |u|^4 u`` against every hat function."""
    m, c = u.mesh, u.coef
    _, g6 = m.l6_core_grad(c)
    return m.K @ c + lam * (m.M @ c) - g6 / 6.0


def kirchhoff_residual(u: GraphFunction, lam: float) -> KirchhoffResidual:
    m = u.mesh
    g = m.graph
    flux = {v: 0.0 for v in g.vertices}
    for e in g.edges:
        xs, vals = u.on_edge(e.id)
        flux[e.tail] += (vals[1] - vals[0]) / (xs[1] - xs[0])
        flux[e.head] += (vals[-2] - vals[-1]) / (xs[-1] - xs[-2])
    for hl in g.halflines:
        xs, vals = u.on_edge(hl.id)
        flux[hl.anchor] += (vals[1] - vals[0]) / (xs[1] - xs[0])
    r = weak_residual(u, lam)
    consistent = {v: float(-r[m.vertex_dof[v]]) for v in g.vertices}
    rn = math.sqrt(max(float(r @ m.solve_A(r)), 0.0))
    return KirchhoffResidual(flux, consistent, rn, float(np.abs(r).max()))


# --- CSV snapshots ---------------------------------------------------------------------


def save_snapshot(u: GraphFunction, path) -> None:
    """Write ``edge_id,x,value`` rows, one per node of every edge."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["edge_id", "x", "value"])
        for eid in u.mesh.edge_ids:
            xs, vals = u.on_edge(eid)
            for x, v in zip(xs, vals):
                w.writerow([eid, repr(float(x)), repr(float(v))])


def load_snapshot(path, graph: MetricGraph) -> GraphFunction:
    """Rebuild mesh and function from a snapshot written by :func:`save_snapshot`."""
    rows: dict[str, list] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.setdefault(row["edge_id"], []).append((float(row["x"]), float(row["value"])))
    nodes, vals = {}, {}
    for eid, pts in rows.items():
        pts.sort()
        nodes[eid] = np.array([p[0] for p in pts])
        vals[eid] = np.array([p[1] for p in pts])
    mesh = Mesh.from_nodes(graph, nodes)
    lookup = {eid: dict(zip(nodes[eid], vals[eid])) for eid in nodes}
    return mesh.interpolate(lambda eid, x: np.array([lookup[eid][xi] for xi in x]))

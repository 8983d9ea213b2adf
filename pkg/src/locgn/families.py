"""Named graph families used for the topology and metric experiments.

Circles are stored as two half-circle edges between two vertices, which
keeps meshing free of self-loop special cases; classification is
unaffected because subdividing an edge changes neither the degree of the
original vertices nor which edges lie on cycles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import CaseLabel, MetricGraph
from .mesh import GraphFunction, Mesh


def _positive(**kw):
    for name, v in kw.items():
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be a positive finite number, got {v!r}")


def _circle(prefix: str, at, length: float):
    """Two half-circle edges through an auxiliary vertex."""
    mid = f"{at}~{prefix}"
    return [mid], [(f"{prefix}1", at, mid, length / 2), (f"{prefix}2", mid, at, length / 2)]


@dataclass(frozen=True)
class Tadpole:
    """A circle attached to the half-line origin, optionally through a neck edge."""

    loop_len: float = 2.0
    neck_len: float = 0.0
    intended_case = CaseLabel.ONE_HALFLINE_NO_TERMINAL

    def build(self) -> MetricGraph:
        _positive(loop_len=self.loop_len)
        if not (self.neck_len >= 0 and math.isfinite(self.neck_len)):
            raise ValueError("neck_len must be >= 0")
        if self.neck_len == 0:
            mids, loop = _circle("loop", "v", self.loop_len)
            return MetricGraph.build(["v"] + mids, loop, [("h", "v")],
                                     meta=dict(family="tadpole", loop_len=self.loop_len, neck_len=0.0))
        mids, loop = _circle("loop", "w", self.loop_len)
        return MetricGraph.build(["v", "w"] + mids, loop + [("neck", "v", "w", self.neck_len)], [("h", "v")],
                                 meta=dict(family="tadpole", loop_len=self.loop_len, neck_len=self.neck_len))


@dataclass(frozen=True)
class LongCutEdge:
    """Cut edge ``B`` of length ``ell`` from a circle ``G1`` (far from the half-line)
    to the half-line origin ``b``, where an optional circle ``G2`` also sits.
    ``circle2 = 0`` omits ``G2``."""

    ell: float
    circle1: float = 1.0
    circle2: float = 1.0
    intended_case = CaseLabel.ONE_HALFLINE_NO_TERMINAL

    def build(self) -> MetricGraph:
        _positive(ell=self.ell, circle1=self.circle1)
        if not (self.circle2 >= 0):
            raise ValueError("circle2 must be >= 0")
        verts, edges = ["a", "b"], [("B", "a", "b", self.ell)]
        m, e = _circle("G1", "a", self.circle1)
        verts += m
        edges += e
        if self.circle2 > 0:
            m, e = _circle("G2", "b", self.circle2)
            verts += m
            edges += e
        return MetricGraph.build(verts, edges, [("h", "b")],
                                 meta=dict(family="long_cut_edge", ell=self.ell,
                                           circle1=self.circle1, circle2=self.circle2))


@dataclass(frozen=True)
class IntricateCore:
    """``2n+1`` parallel edges between ``v1`` and ``v2``, each linked to the
    half-line origin ``v`` by an edge of length ``linker_len``."""

    n: int
    edge_len: float = 1.0
    linker_len: float | None = None
    intended_case = CaseLabel.ONE_HALFLINE_NO_TERMINAL

    def build(self) -> MetricGraph:
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ValueError("n must be an integer >= 1")
        link = self.edge_len / 2 if self.linker_len is None else self.linker_len
        _positive(edge_len=self.edge_len, linker_len=link)
        edges = [(f"p{k}", "v1", "v2", self.edge_len) for k in range(2 * self.n + 1)]
        edges += [("L1", "v", "v1", link), ("L2", "v", "v2", link)]
        return MetricGraph.build(["v", "v1", "v2"], edges, [("h", "v")],
                                 meta=dict(family="intricate_core", n=int(self.n),
                                           edge_len=self.edge_len, linker_len=link))


@dataclass(frozen=True)
class Signpost:
    """Circle ``G`` joined by the cut edge ``B = [0, ell]`` to the vertex ``v``
    (at ``x = ell``) where the two half-lines ``H1``, ``H2`` start."""

    ell: float
    circle_len: float = 2.0
    intended_case = CaseLabel.NO_COVER_TWO_HALFLINES

    def build(self) -> MetricGraph:
        _positive(ell=self.ell, circle_len=self.circle_len)
        mids, loop = _circle("G", "c", self.circle_len)
        return MetricGraph.build(["c", "v"] + mids, loop + [("B", "c", "v", self.ell)],
                                 [("H1", "v"), ("H2", "v")],
                                 meta=dict(family="signpost", ell=self.ell, circle_len=self.circle_len))


@dataclass(frozen=True)
class CycleCovered:
    """``k`` parallel edges between ``a`` and ``b`` with a half-line at each end."""

    k: int = 2
    lens: tuple = (4.0, 4.0)
    intended_case = CaseLabel.CYCLE_COVERING

    def build(self) -> MetricGraph:
        lens = tuple(self.lens)
        if len(lens) == 1:
            lens = lens * self.k
        if self.k < 1 or len(lens) != self.k:
            raise ValueError("need k >= 1 and one length per edge")
        _positive(**{f"len{i}": x for i, x in enumerate(lens)})
        edges = [(f"e{i + 1}", "a", "b", x) for i, x in enumerate(lens)]
        return MetricGraph.build(["a", "b"], edges, [("h1", "a"), ("h2", "b")],
                                 meta=dict(family="cycle_covered", k=self.k, lens=list(lens)))


@dataclass(frozen=True)
class TerminalPendant:
    """A half-line with a pendant edge of length ``pendant_len`` at its origin."""

    pendant_len: float = 5.0
    intended_case = CaseLabel.TERMINAL_EDGE

    def build(self) -> MetricGraph:
        _positive(pendant_len=self.pendant_len)
        return MetricGraph.build(["v", "p"], [("P", "v", "p", self.pendant_len)], [("h", "v")],
                                 meta=dict(family="terminal_pendant", pendant_len=self.pendant_len))


FAMILIES = {
    "tadpole": Tadpole,
    "long_cut_edge": LongCutEdge,
    "intricate_core": IntricateCore,
    "signpost": Signpost,
    "cycle_covered": CycleCovered,
    "terminal_pendant": TerminalPendant,
}


def build(spec) -> MetricGraph:
    return spec.build()


# --- doubling the cut edge of a signpost -------------------------------------------


def double_bridge_transform(g: MetricGraph) -> MetricGraph:
    """Replace the cut edge ``B`` of a signpost by two parallel edges ``B1``, ``B2`` of length ``2 ell``."""
    if g.meta.get("family") != "signpost":
        raise ValueError("double_bridge_transform needs a graph built by Signpost")
    B = g.edge("B")
    edges = [e for e in g.edges if e.id != "B"]
    edges += [("B1", B.tail, B.head, 2 * B.length), ("B2", B.tail, B.head, 2 * B.length)]
    meta = dict(g.meta, family="signpost_doubled")
    return MetricGraph.build(g.vertices, edges, g.halflines, meta=meta)


def transport_double_bridge(v: GraphFunction, target: MetricGraph | None = None) -> GraphFunction:
    """``v~ = v`` off the cut edge and ``v~(x) = v(x/2)`` on both new edges.

    The mesh of ``v~`` reuses every node of ``v`` (cut-edge nodes are
    stretched by 2), so the transported function is exact, not interpolated.
    """
    src = v.mesh
    target = target or double_bridge_transform(src.graph)
    nodes = {eid: xs for eid, xs in src.nodes.items() if eid != "B"}
    nodes["B1"] = nodes["B2"] = 2.0 * src.nodes["B"]
    mesh = Mesh.from_nodes(target, nodes)
    vals = {eid: src.values_on(v.coef, eid) for eid in src.edge_ids}
    vals["B1"] = vals["B2"] = vals["B"]
    return mesh.interpolate(lambda eid, x: vals[eid])

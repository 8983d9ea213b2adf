"""Noncompact metric graphs: validation, topology and the four-case classification.

A graph is a finite multigraph whose bounded edges carry lengths, plus a
set of half-lines anchored at vertices.  Parallel edges and self-loops are
allowed.  Half-lines are treated, for cycle purposes, as edges towards a
single symbolic vertex at infinity.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Hashable, Iterable

from .constants import MU_R, MU_R_PLUS, SQRT3

log = logging.getLogger(__name__)

INFINITY = "__infinity__"


@dataclass(frozen=True)
class Edge:
    id: str
    tail: Hashable
    head: Hashable
    length: float

    @property
    def is_loop(self) -> bool:
        return self.tail == self.head


@dataclass(frozen=True)
class HalfLine:
    id: str
    anchor: Hashable


@dataclass(frozen=True)
class MetricGraph:
    vertices: tuple
    edges: tuple[Edge, ...]
    halflines: tuple[HalfLine, ...]
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    @classmethod
    def build(cls, vertices: Iterable, edges: Iterable, halflines: Iterable, meta=None) -> "MetricGraph":
        """Build from plain tuples: edges as ``(id, tail, head, length)``, half-lines as ``(id, anchor)``."""
        es = tuple(e if isinstance(e, Edge) else Edge(str(e[0]), e[1], e[2], float(e[3])) for e in edges)
        hs = tuple(h if isinstance(h, HalfLine) else HalfLine(str(h[0]), h[1]) for h in halflines)
        return cls(tuple(vertices), es, hs, dict(meta or {}))

    @property
    def core_length(self) -> float:
        return float(sum(e.length for e in self.edges))

    @property
    def n_halflines(self) -> int:
        return len(self.halflines)

    def edge(self, edge_id: str) -> Edge:
        for e in self.edges:
            if e.id == edge_id:
                return e
        raise KeyError(edge_id)

    def degree(self) -> dict:
        deg = {v: 0 for v in self.vertices}
        for e in self.edges:
            deg[e.tail] += 1
            deg[e.head] += 1  # a self-loop counts twice
        for h in self.halflines:
            deg[h.anchor] += 1
        return deg

    def relabeled(self, vertex_map: dict, edge_map: dict | None = None, flip: Iterable[str] = ()) -> "MetricGraph":
        """Copy with renamed vertices/edges; edges listed in ``flip`` get reversed orientation."""
        edge_map = edge_map or {}
        flip = set(flip)
        es = []
        for e in self.edges:
            t, h = vertex_map[e.tail], vertex_map[e.head]
            if e.id in flip:
                t, h = h, t
            es.append(Edge(edge_map.get(e.id, e.id), t, h, e.length))
        hs = [HalfLine(edge_map.get(h.id, h.id), vertex_map[h.anchor]) for h in self.halflines]
        return MetricGraph(tuple(vertex_map[v] for v in self.vertices), tuple(es), tuple(hs), dict(self.meta))

    def subdivided(self, edge_id: str, at: float, new_vertex: Hashable = None) -> "MetricGraph":
        """Split bounded edge ``edge_id`` at local coordinate ``at`` into two edges."""
        e = self.edge(edge_id)
        if not 0.0 < at < e.length:
            raise ValueError("split point must lie strictly inside the edge")
        w = new_vertex if new_vertex is not None else f"{edge_id}@{at:g}"
        es = []
        for f in self.edges:
            if f.id == edge_id:
                es.append(Edge(f"{edge_id}.a", f.tail, w, at))
                es.append(Edge(f"{edge_id}.b", w, f.head, f.length - at))
            else:
                es.append(f)
        return MetricGraph(self.vertices + (w,), tuple(es), self.halflines, dict(self.meta))

    # --- JSON ---------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [{"id": e.id, "from": e.tail, "to": e.head, "length": e.length} for e in self.edges],
            "halflines": [{"id": h.id, "anchor": h.anchor} for h in self.halflines],
        }

    def to_json(self, path=None, **kw) -> str:
        text = json.dumps(self.to_dict(), indent=kw.pop("indent", 2), **kw)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


_TOP_KEYS = {"vertices", "edges", "halflines"}
_EDGE_KEYS = {"id", "from", "to", "length"}
_HALF_KEYS = {"id", "anchor"}


def _warn_unknown(obj: dict, allowed: set, where: str) -> None:
    extra = set(obj) - allowed
    if extra:
        log.warning("ignoring unknown field(s) %s in %s", sorted(extra), where)


def graph_from_dict(data: dict) -> MetricGraph:
    """Parse the graph description schema.

    ``{"vertices": [...], "edges": [{"id", "from", "to", "length"}, ...],
    "halflines": [{"id", "anchor"}, ...]}``

    Unknown fields are ignored with a warning.  Duplicate vertex or edge
    ids (half-lines share the edge id namespace) raise ``ValueError``.
    """
    _warn_unknown(data, _TOP_KEYS, "graph")
    for key in _TOP_KEYS:
        if key not in data:
            raise ValueError(f"missing required field {key!r}")
    vertices = list(data["vertices"])
    if len(set(vertices)) != len(vertices):
        raise ValueError("duplicate vertex id")
    seen: set = set()
    edges = []
    for i, e in enumerate(data["edges"]):
        _warn_unknown(e, _EDGE_KEYS, f"edge #{i}")
        missing = _EDGE_KEYS - set(e)
        if missing:
            raise ValueError(f"edge #{i} missing {sorted(missing)}")
        eid = str(e["id"])
        if eid in seen:
            raise ValueError(f"duplicate edge id {eid!r}")
        seen.add(eid)
        edges.append(Edge(eid, e["from"], e["to"], float(e["length"])))
    halflines = []
    for i, h in enumerate(data["halflines"]):
        _warn_unknown(h, _HALF_KEYS, f"halfline #{i}")
        missing = _HALF_KEYS - set(h)
        if missing:
            raise ValueError(f"halfline #{i} missing {sorted(missing)}")
        hid = str(h["id"])
        if hid in seen:
            raise ValueError(f"duplicate edge id {hid!r}")
        seen.add(hid)
        halflines.append(HalfLine(hid, h["anchor"]))
    vset = set(vertices)
    for e in edges:
        for v in (e.tail, e.head):
            if v not in vset:
                raise ValueError(f"edge {e.id!r} references unknown vertex {v!r}")
    for h in halflines:
        if h.anchor not in vset:
            raise ValueError(f"halfline {h.id!r} references unknown vertex {h.anchor!r}")
    return MetricGraph(tuple(vertices), tuple(edges), tuple(halflines))


def load_graph(path) -> MetricGraph:
    with open(path) as fh:
        return graph_from_dict(json.load(fh))


# --- validation and topology ---------------------------------------------------


def _components(vertices, pairs) -> int:
    parent = {v: v for v in vertices}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return len({find(v) for v in vertices})


def validate_assumption_A(g: MetricGraph) -> list[str]:
    """Violations of the standing assumptions (connected, at least one half-line,
    nonempty core, positive lengths); an empty list means the graph is admissible.

    Possible items: ``"disconnected"``, ``"compact"`` (no half-line),
    ``"empty core"``, ``"nonpositive length"``, ``"duplicate id"``.
    """
    problems = []
    ids = [e.id for e in g.edges] + [h.id for h in g.halflines]
    if len(set(ids)) != len(ids):
        problems.append("duplicate id")
    if not g.halflines:
        problems.append("compact")
    if not g.edges:
        problems.append("empty core")
    if any(not (math.isfinite(e.length) and e.length > 0) for e in g.edges):
        problems.append("nonpositive length")
    # each half-line has its own free end, so only bounded edges join vertices
    verts = list(g.vertices)
    pairs = [(e.tail, e.head) for e in g.edges]
    if verts and _components(verts, pairs) != 1:
        problems.append("disconnected")
    return problems


def is_valid(g: MetricGraph) -> bool:
    return not validate_assumption_A(g)


def find_terminal_edges(g: MetricGraph) -> list[str]:
    """Bounded edges with an endpoint of degree one (half-lines are never terminal)."""
    deg = g.degree()
    return [e.id for e in g.edges if not e.is_loop and (deg[e.tail] == 1 or deg[e.head] == 1)]


def _auxiliary_edges(g: MetricGraph) -> list[tuple[str, Hashable, Hashable]]:
    out = [(e.id, e.tail, e.head) for e in g.edges]
    out += [(h.id, h.anchor, INFINITY) for h in g.halflines]
    return out


def find_bridges(vertices: Iterable, edges: list[tuple[str, Hashable, Hashable]]) -> list[str]:
    """Bridges of an undirected multigraph, by edge id (iterative Tarjan lowpoint).

    Parallel edges are distinguished by id, so a doubled edge is never a
    bridge; self-loops never are.
    """
    adj = defaultdict(list)
    for eid, a, b in edges:
        if a == b:
            continue
        adj[a].append((b, eid))
        adj[b].append((a, eid))
    disc: dict = {}
    low: dict = {}
    bridges = []
    counter = 0
    for root in vertices:
        if root in disc:
            continue
        disc[root] = low[root] = counter
        counter += 1
        stack = [(root, None, iter(adj[root]))]
        while stack:
            v, via, it = stack[-1]
            advanced = False
            for w, eid in it:
                if eid == via:
                    continue
                if w in disc:
                    low[v] = min(low[v], disc[w])
                else:
                    disc[w] = low[w] = counter
                    counter += 1
                    stack.append((w, eid, iter(adj[w])))
                    advanced = True
                    break
            if advanced:
                continue
            stack.pop()
            if stack:
                parent = stack[-1][0]
                low[parent] = min(low[parent], low[v])
                if low[v] > disc[parent]:
                    bridges.append(via)
    return bridges


@dataclass(frozen=True)
class CycleCovering:
    covered: bool
    bridges: tuple[str, ...]

    def __bool__(self) -> bool:
        return self.covered


def has_cycle_covering(g: MetricGraph) -> CycleCovering:
    """Whether every edge lies on a cycle once all half-line ends are glued at infinity.

    Decided by bridge detection on the auxiliary multigraph; the
    certificate lists the bridges (empty when covered).
    """
    verts = list(g.vertices) + [INFINITY]
    bridges = find_bridges(verts, _auxiliary_edges(g))
    return CycleCovering(not bridges, tuple(sorted(bridges)))


class CaseLabel(str, enum.Enum):
    TERMINAL_EDGE = "TerminalEdge"
    CYCLE_COVERING = "CycleCovering"
    ONE_HALFLINE_NO_TERMINAL = "OneHalfLineNoTerminal"
    NO_COVER_TWO_HALFLINES = "NoCoverTwoHalfLines"

    @property
    def roman(self) -> str:
        return {"TerminalEdge": "i", "CycleCovering": "ii", "OneHalfLineNoTerminal": "iii",
                "NoCoverTwoHalfLines": "iv"}[self.value]


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def contains(self, x: float, tol: float = 0.0) -> bool:
        above = x >= self.lo - tol if self.lo_closed else x > self.lo - tol
        below = x <= self.hi + tol if self.hi_closed else x < self.hi + tol
        return above and below

    def __str__(self) -> str:
        return f"{'[' if self.lo_closed else '('}{self.lo:.6g}, {self.hi:.6g}{']' if self.hi_closed else ')'}"


CASE_BOUNDS = {
    CaseLabel.TERMINAL_EDGE: Interval(MU_R_PLUS, MU_R_PLUS),
    CaseLabel.CYCLE_COVERING: Interval(MU_R, MU_R),
    CaseLabel.ONE_HALFLINE_NO_TERMINAL: Interval(MU_R_PLUS, SQRT3, False, False),
    CaseLabel.NO_COVER_TWO_HALFLINES: Interval(MU_R_PLUS, MU_R, False, True),
}


@dataclass(frozen=True)
class ClassificationResult:
    case_label: CaseLabel
    terminal_edges: tuple[str, ...]
    has_cycle_covering: bool
    half_line_count: int
    mu_K_bounds: Interval
    bridges: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        b = self.mu_K_bounds
        return {
            "case_label": self.case_label.value,
            "case": self.case_label.roman,
            "terminal_edges": list(self.terminal_edges),
            "has_cycle_covering": self.has_cycle_covering,
            "half_line_count": self.half_line_count,
            "mu_K_bounds": [b.lo, b.hi, b.lo_closed, b.hi_closed],
        }


def classify(g: MetricGraph) -> ClassificationResult:
    """Assign one of the four cases, checked in the order terminal edge,
    cycle covering, single half-line, remaining."""
    terminal = tuple(find_terminal_edges(g))
    cover = has_cycle_covering(g)
    n_half = g.n_halflines
    if terminal:
        label = CaseLabel.TERMINAL_EDGE
    elif cover.covered:
        label = CaseLabel.CYCLE_COVERING
    elif n_half == 1:
        label = CaseLabel.ONE_HALFLINE_NO_TERMINAL
    else:
        label = CaseLabel.NO_COVER_TWO_HALFLINES
    return ClassificationResult(label, terminal, cover.covered, n_half, CASE_BOUNDS[label], cover.bridges)

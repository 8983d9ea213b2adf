"""Parameter sweeps over graph families and the per-graph summary table.

Each sweep point runs :func:`maximize_gn` and evaluates an explicit test
function on the same mesh (a certified lower bound for C_K that does not
depend on the optimizer).  Rows are sorted by parameter, so the result does
not depend on the order in which worker processes finish.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .constants import C_R, C_R_PLUS, MU_R, MU_R_PLUS
from .families import CycleCovered, IntricateCore, LongCutEdge, Signpost, Tadpole, TerminalPendant
from .gn import constant_exponential, maximize_gn, soliton
from .graph import MetricGraph, classify
from .ground_state import threshold_scan
from .mesh import GraphFunction, Mesh, MeshConfig, quotient_Q

log = logging.getLogger(__name__)

WORKERS_ENV = "LOCGN_WORKERS"


@dataclass(frozen=True)
class SweepConfig:
    """Discretization and solver settings shared by every point of a sweep.

    ``solver_tol`` is the absolute resolution of a C_K estimate; it covers
    the spread between multistart runs and the O(h^2) mesh effect (about
    3e-6 between h = 0.01 and h = 0.005 on the tadpole).  Monotonicity
    checks allow ``2 * solver_tol``.
    """

    h: float = 0.01
    n_starts: int = 8
    seed: int = 0
    max_iter: int = 3000
    solver_tol: float = 1e-5
    workers: int | None = None


@dataclass
class SweepResult:
    experiment: str
    grid: list
    rows: list
    verdicts: dict
    flags: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def estimates(self) -> np.ndarray:
        return np.array([r["C_K_estimate"] for r in self.rows])

    @property
    def failed(self) -> bool:
        return any(v is False for v in self.verdicts.values())

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, out_dir) -> tuple[Path, Path]:
        """Write ``<experiment>.csv`` and ``<experiment>.json`` (manifest) into ``out_dir``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        cols = [k for k in self.rows[0] if k != "mesh"] if self.rows else []
        csv_path = out / f"{self.experiment}.csv"
        with open(csv_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
            w.writeheader()
            for r in self.rows:
                w.writerow(r)
        manifest = out / f"{self.experiment}.json"
        manifest.write_text(json.dumps(self.to_dict(), indent=2, default=float))
        return csv_path, manifest


def parse_grid(text: str) -> list[float]:
    """``"2^-6..2^6"`` (powers of two), ``"1..64"`` (integer powers of two between), or ``"1,2,5"``."""
    text = text.strip()
    m = re.fullmatch(r"2\^(-?\d+)\s*\.\.\s*2\^(-?\d+)", text)
    if m:
        a, b = int(m.group(1)), int(m.group(2))
        return [2.0 ** k for k in range(a, b + 1)]
    m = re.fullmatch(r"(\d+)\s*\.\.\s*(\d+)", text)
    if m:
        a, b = int(m.group(1)), int(m.group(2))
        return [float(2 ** k) for k in range(int(math.log2(a)), int(math.log2(b)) + 1)]
    return sorted(float(x) for x in text.split(","))


# --- explicit test functions ------------------------------------------------------------


def _near_side(g: MetricGraph, cut: str) -> set:
    """Vertices reachable from the tail of edge ``cut`` without crossing it."""
    B = g.edge(cut)
    adj: dict = {v: set() for v in g.vertices}
    for e in g.edges:
        if e.id != cut:
            adj[e.tail].add(e.head)
            adj[e.head].add(e.tail)
    seen, stack = {B.tail}, [B.tail]
    while stack:
        for w in adj[stack.pop()] - seen:
            seen.add(w)
            stack.append(w)
    return seen


def cut_edge_test_function(mesh: Mesh, ell: float, cut: str = "B") -> GraphFunction:
    """Half-soliton ``phi_lam`` with ``lam = ell^{-1/2}`` along the cut edge and the
    half-line(s) beyond it; constant ``phi_lam(0)`` on the subgraph at the start
    of the cut edge and ``phi_lam(ell)`` on the subgraph at its end."""
    g = mesh.graph
    lam = ell ** -0.5
    near = _near_side(g, cut)

    def f(eid, x):
        if eid == cut:
            pos = x
        elif mesh.is_half[eid]:
            pos = ell + x
        else:
            pos = np.full_like(x, 0.0 if g.edge(eid).tail in near else ell)
        return soliton(pos, lam)

    return mesh.interpolate(f)


def core_constant_test_function(mesh: Mesh) -> GraphFunction:
    g = mesh.graph
    return constant_exponential(mesh, g.n_halflines / (2.0 * g.core_length))


# --- one sweep point (module level so worker processes can pickle it) -------------------


def _build(experiment: str, p: float) -> MetricGraph:
    if experiment == "long_cut_edge":
        return LongCutEdge(p).build()
    if experiment == "intricate_core":
        return IntricateCore(int(round(p)), 1.0).build()
    if experiment == "signpost":
        return Signpost(p, 2.0).build()
    raise ValueError(f"unknown experiment {experiment!r}")


def _point(args) -> dict:
    experiment, p, cfg = args
    t0 = time.perf_counter()
    g = _build(experiment, p)
    mesh = Mesh.from_graph(g, MeshConfig(h=cfg.h))
    rep = maximize_gn(g, mesh=mesh, n_starts=cfg.n_starts, seed=cfg.seed, max_iter=cfg.max_iter)
    if experiment == "intricate_core":
        test = core_constant_test_function(mesh)
    else:
        test = cut_edge_test_function(mesh, p)
    return {
        "param": p,
        "C_K_estimate": rep.C_K_estimate,
        "mu_K_estimate": rep.mu_K_estimate,
        "converged": bool(rep.converged),
        "EL_residual": rep.EL_residual,
        "best_start": rep.best_start_label,
        "test_family_Q": quotient_Q(test),
        "gap_to_C_R_plus": C_R_PLUS - rep.C_K_estimate,
        "gap_to_C_R": rep.C_K_estimate - C_R,
        "gap_to_one": rep.C_K_estimate - 1.0,
        "case": rep.classification.case_label.value,
        "n_dofs": mesh.n,
        "mesh": mesh.metadata(),
        "seconds": time.perf_counter() - t0,
    }


def _workers(cfg: SweepConfig) -> int:
    if cfg.workers is not None:
        return max(1, cfg.workers)
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _run(experiment: str, grid, cfg: SweepConfig) -> tuple[list[dict], dict]:
    grid = [float(x) for x in grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing")
    jobs = [(experiment, p, cfg) for p in grid]
    nw = _workers(cfg)
    if nw > 1:
        with ProcessPoolExecutor(max_workers=nw) as ex:
            rows = list(ex.map(_point, jobs))
    else:
        rows = [_point(j) for j in jobs]
    rows = sorted(rows, key=lambda r: r["param"])
    # timings go to the manifest only, so rows are reproducible bit for bit
    timings = {r["param"]: r.pop("seconds") for r in rows}
    return rows, timings


def _common_checks(rows, cfg, res: SweepResult):
    tol = cfg.solver_tol
    for r in rows:
        if not r["converged"]:
            res.flags.append(f"not converged at {r['param']:g}")
    res.verdicts["test_family_below_estimate"] = all(r["test_family_Q"] <= r["C_K_estimate"] + tol for r in rows)
    res.verdicts["within_global_bounds"] = all(C_R - tol <= r["C_K_estimate"] < C_R_PLUS for r in rows)


def _monotone(values, tol, increasing=True) -> tuple[bool, list]:
    bad = []
    for k, (a, b) in enumerate(zip(values, values[1:])):
        if (increasing and b < a - 2 * tol) or (not increasing and b > a + 2 * tol):
            bad.append(k)
    return not bad, bad


def _metadata(experiment, grid, cfg, timings) -> dict:
    from . import __version__
    return {"experiment": experiment, "grid": [float(x) for x in grid], "config": asdict(cfg),
            "version": __version__, "workers": _workers(cfg), "seconds": timings}


def sweep_long_cut_edge(grid=(1, 2, 4, 8, 16, 32, 64), cfg: SweepConfig | None = None) -> SweepResult:
    """C_K along a one-half-line graph whose core has a cut edge of growing length."""
    cfg = cfg or SweepConfig()
    rows, timings = _run("long_cut_edge", grid, cfg)
    res = SweepResult("long_cut_edge", [r["param"] for r in rows], rows, {},
                      metadata=_metadata("long_cut_edge", grid, cfg, timings))
    _common_checks(rows, cfg, res)
    ok, bad = _monotone([r["C_K_estimate"] for r in rows], cfg.solver_tol)
    res.verdicts["nondecreasing"] = ok
    res.flags += [f"monotonicity violated between {rows[k]['param']:g} and {rows[k + 1]['param']:g}" for k in bad]
    res.verdicts["below_C_R_plus"] = all(r["C_K_estimate"] < C_R_PLUS for r in rows)
    if rows[-1]["param"] >= 64:
        res.verdicts["large_end_gap<=0.05"] = rows[-1]["gap_to_C_R_plus"] <= 0.05
    return res


def sweep_intricate_core(grid=(1, 2, 4, 8, 16, 32, 64), cfg: SweepConfig | None = None) -> SweepResult:
    """C_K for cores of 2n+1 unit parallel edges at bounded diameter."""
    cfg = cfg or SweepConfig()
    rows, timings = _run("intricate_core", grid, cfg)
    res = SweepResult("intricate_core", [r["param"] for r in rows], rows, {},
                      metadata=_metadata("intricate_core", grid, cfg, timings))
    _common_checks(rows, cfg, res)
    res.verdicts["above_one"] = all(r["C_K_estimate"] > 1.0 for r in rows)
    ok, bad = _monotone([r["gap_to_one"] for r in rows], cfg.solver_tol, increasing=False)
    res.verdicts["gap_decreasing"] = ok
    res.flags += [f"gap increased between n={rows[k]['param']:g} and n={rows[k + 1]['param']:g}" for k in bad]
    if rows[-1]["param"] >= 64:
        res.verdicts["large_n_gap<=0.1"] = rows[-1]["gap_to_one"] <= 0.1
    return res


def sweep_signpost(grid=tuple(2.0 ** k for k in range(-6, 7)), cfg: SweepConfig | None = None) -> SweepResult:
    """C_K of the signpost as the cut edge goes from short to long."""
    cfg = cfg or SweepConfig()
    rows, timings = _run("signpost", grid, cfg)
    res = SweepResult("signpost", [r["param"] for r in rows], rows, {},
                      metadata=_metadata("signpost", grid, cfg, timings))
    _common_checks(rows, cfg, res)
    ok, bad = _monotone([r["C_K_estimate"] for r in rows], cfg.solver_tol)
    res.verdicts["nondecreasing"] = ok
    res.flags += [f"monotonicity violated between {rows[k]['param']:g} and {rows[k + 1]['param']:g}" for k in bad]
    if rows[0]["param"] <= 2.0 ** -6:
        res.verdicts["small_end_within_5e-3_of_C_R"] = rows[0]["gap_to_C_R"] <= 5e-3
    if rows[-1]["param"] >= 2.0 ** 6:
        res.verdicts["large_end_within_0.05_of_C_R_plus"] = rows[-1]["gap_to_C_R_plus"] <= 0.05
    return res


SWEEPS = {
    "long_cut_edge": sweep_long_cut_edge,
    "intricate_core": sweep_intricate_core,
    "signpost": sweep_signpost,
}


# --- summary table ----------------------------------------------------------------------


def default_table_graphs() -> list[tuple[str, MetricGraph]]:
    return [
        ("tadpole", Tadpole(2.0, 0.0).build()),
        ("signpost(1)", Signpost(1.0).build()),
        ("signpost(64)", Signpost(64.0).build()),
        ("cycle_covered", CycleCovered(2, (4.0, 4.0)).build()),
        ("terminal_pendant(5)", TerminalPendant(5.0).build()),
        ("intricate_core(4)", IntricateCore(4, 1.0).build()),
    ]


def case_table(graphs=None, cfg: SweepConfig | None = None, scan: bool = True, tol: float = 1e-3) -> list[dict]:
    """One row per graph: case, admissible interval for mu_K, the estimate and the threshold bracket."""
    cfg = cfg or SweepConfig()
    graphs = graphs if graphs is not None else default_table_graphs()
    rows = []
    for name, g in graphs:
        cls = classify(g)
        mesh = Mesh.from_graph(g, MeshConfig(h=cfg.h))
        rep = maximize_gn(g, mesh=mesh, n_starts=cfg.n_starts, seed=cfg.seed, max_iter=cfg.max_iter)
        b = cls.mu_K_bounds
        row = {
            "graph": name,
            "case": cls.case_label.value,
            "mu_K_bounds": str(b),
            "C_K_estimate": rep.C_K_estimate,
            "mu_K_estimate": rep.mu_K_estimate,
            "in_bounds": b.contains(rep.mu_K_estimate, tol=2e-2 if b.lo == b.hi else 0.0),
            "converged": bool(rep.converged),
        }
        if scan:
            sc = threshold_scan(g, 0.98 * MU_R_PLUS, 1.02 * MU_R, tol=tol, mesh=mesh, gn=rep)
            row.update(bracket_lo=sc.bracket[0], bracket_hi=sc.bracket[1],
                       consistency_delta=sc.consistency_delta, scan_inconsistent=sc.inconsistent)
        rows.append(row)
    return rows


def write_table(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)

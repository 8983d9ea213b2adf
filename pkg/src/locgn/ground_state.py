"""Mass-constrained minimization of ``E(u) = 1/2 ||u'||^2 - 1/6 ||u||_{6,K}^6``.

Three regimes are distinguished numerically:

* infimum zero: no start reaches negative energy and the descent spreads
  mass out; a spreading family whose energy tends to 0 is evaluated as a
  witness;
* negative minimizer: the descent converges to a state with ``E < 0`` that
  survives local mesh refinement;
* unbounded: the best state keeps concentrating, every local refinement
  lowers the energy by roughly the dilation factor, until ``E < -1e3``.
  :func:`blowup_probe` gives an independent certificate by exact dilation.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import MU_R
from .gn import (GNReport, constant_exponential, mu_from_C, phi1, soliton_bump,
                 start_portfolio)
from .graph import MetricGraph
from .mesh import GraphFunction, Mesh, MeshConfig, energy, kirchhoff_residual
from .optim import sphere_minimize

log = logging.getLogger(__name__)

NEG_TOL = 1e-8
UNBOUNDED_LEVEL = -1e3
RESIDUAL_TOL = 1e-6
FLUX_TOL = 1e-5


class Status(str, enum.Enum):
    ZERO_INFIMUM = "ZeroInfimum"
    NEGATIVE_MINIMIZER = "NegativeMinimizerFound"
    UNBOUNDED = "UnboundedDiagnosed"
    NOT_CONVERGED = "NotConverged"


@dataclass
class GroundStateResult:
    mu: float
    status: Status
    energy: float
    minimizer: GraphFunction | None
    lagrange_multiplier: float | None
    iterations: int
    grad_norm: float
    kirchhoff_flux_max: float | None = None
    residual_norm: float | None = None
    best_start_label: str = ""
    start_energies: dict = field(default_factory=dict)
    refinement_energies: list = field(default_factory=list)
    refinement_kinetic: list = field(default_factory=list)
    witness: dict | None = None

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "status": self.status.value,
            "energy": self.energy,
            "lagrange_multiplier": self.lagrange_multiplier,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "kirchhoff_flux_max": self.kirchhoff_flux_max,
            "residual_norm": self.residual_norm,
            "best_start_label": self.best_start_label,
            "start_energies": self.start_energies,
            "refinement_energies": self.refinement_energies,
            "refinement_kinetic": self.refinement_kinetic,
            "witness": self.witness,
            "mesh": None if self.minimizer is None else self.minimizer.mesh.metadata(),
        }


def _energy_fun(mesh: Mesh):
    K = mesh.K

    def fun(u):
        n6, g6 = mesh.l6_core_grad(u)
        Ku = K @ u
        return 0.5 * float(u @ Ku) - n6 / 6.0, Ku - g6 / 6.0

    return fun


def lagrange_multiplier(u: GraphFunction) -> float:
    """``lambda = (||u||_{6,K}^6 - ||u'||^2) / ||u||^2`` from testing the equation against ``u``."""
    m, c = u.mesh, u.coef
    return (m.l6_core(c) - m.kinetic(c)) / m.mass(c)


def descend(u0: GraphFunction, mu: float, max_iter: int = 3000, gtol: float = 1e-8, ftol: float = 1e-13,
            stop_below: float | None = UNBOUNDED_LEVEL):
    """Projected descent of the energy on ``{||u||^2 = mu}`` from ``u0``."""
    mesh = u0.mesh
    stop = None if stop_below is None else (lambda f, u: f < stop_below)
    res = sphere_minimize(_energy_fun(mesh), np.abs(u0.coef), mesh, mass=mu,
                          max_iter=max_iter, gtol=gtol, ftol=ftol, stop=stop)
    return GraphFunction(mesh, res.u), res


def default_starts(mesh: Mesh, mu: float, gn: GNReport | GraphFunction | None = None,
                   n_starts: int = 6, seed: int = 0) -> list[tuple[str, GraphFunction]]:
    """GN optimizer (if given), the multistart portfolio and narrow soliton bumps."""
    starts = []
    if gn is not None:
        opt = gn.optimizer if isinstance(gn, GNReport) else gn
        starts.append(("gn_optimizer", mesh.transfer(opt) if opt.mesh is not mesh else opt))
    starts += start_portfolio(mesh, n_starts, seed)
    g = mesh.graph
    longest = max(g.edges, key=lambda e: e.length)
    w = max(longest.length / 12.0, 4 * float(mesh.ch[mesh.core].min()))
    starts.append((f"narrow_bump(edge={longest.id})", soliton_bump(mesh, w, eid=longest.id, s=longest.length / 2)))
    return starts


def _top_cells(u: GraphFunction, frac: float) -> np.ndarray:
    m = u.mesh
    ue = np.append(np.abs(u.coef), 0.0)
    return np.maximum(ue[m.c0], ue[m.c1]) >= frac * ue.max()


def spreading_witness(g: MetricGraph, mu: float, alpha: float = 1e-4) -> dict:
    """Energy of the mass-``mu`` member of ``c`` on the core, ``c exp(-alpha x)`` on the half-lines.

    Closed form: ``E = n c^2 alpha / 4 - c^6 |K| / 6`` with
    ``c^2 = mu / (|K| + n / (2 alpha))``; it tends to 0 as ``alpha -> 0``.
    The discrete value on a graded mesh is reported alongside.
    """
    n, L = g.n_halflines, g.core_length
    c2 = mu / (L + n / (2 * alpha))
    exact = n * c2 * alpha / 4.0 - c2 ** 3 * L / 6.0
    cfg = MeshConfig(h=min(0.05, L / 20), L_trunc=40.0 / alpha, growth=1.02, hmax=0.05 / alpha)
    mesh = Mesh.from_graph(g, cfg)
    u = constant_exponential(mesh, alpha).with_mass(mu)
    eb = energy(u)
    return {"alpha": alpha, "energy_exact": exact, "energy_discrete": eb.total, "kinetic": 2 * eb.kinetic}


def _finalize(u: GraphFunction, res, mu: float, status_hint: Status) -> tuple[Status, float, float, float]:
    lam = lagrange_multiplier(u)
    kr = kirchhoff_residual(u, lam)
    flux = max(abs(v) for v in kr.consistent_flux.values())
    status = status_hint
    stationary = res.reason != "max_iter" and kr.residual_norm <= RESIDUAL_TOL
    if status_hint is Status.NEGATIVE_MINIMIZER and not (stationary and flux <= FLUX_TOL):
        status = Status.NOT_CONVERGED
    return status, lam, flux, kr.residual_norm


def minimize_at_mass(
    g: MetricGraph,
    mu: float,
    mesh: Mesh | None = None,
    config: MeshConfig | None = None,
    starts: list[tuple[str, GraphFunction]] | None = None,
    gn: GNReport | GraphFunction | None = None,
    max_iter: int = 3000,
    gtol: float = 1e-8,
    max_refine: int = 14,
) -> GroundStateResult:
    """Minimize the energy at mass ``mu`` and classify the outcome (see :class:`Status`)."""
    if not mu > 0:
        raise ValueError("mass must be positive")
    mesh = mesh if mesh is not None else Mesh.from_graph(g, config or MeshConfig())
    starts = starts if starts is not None else default_starts(mesh, mu, gn)
    best = None
    values = {}
    total_it = 0
    for label, u0 in starts:
        if u0.mesh is not mesh:
            u0 = mesh.transfer(u0)
        u, res = descend(u0, mu, max_iter=max_iter, gtol=gtol)
        values[label] = res.f
        total_it += res.iterations
        log.debug("start %s -> E=%.3e (%d it, conv=%s)", label, res.f, res.iterations, res.converged)
        if best is None or res.f < best[1].f:
            best = (u, res, label, u0.with_mass(mu))
    u, res, label, u_start = best

    if res.f >= -NEG_TOL:
        w = spreading_witness(g, mu)
        kin = mesh.kinetic(u.coef)
        return GroundStateResult(mu, Status.ZERO_INFIMUM, w["energy_discrete"], u, None, total_it,
                                 res.grad_norm, best_start_label=label, start_energies=values,
                                 refinement_kinetic=[kin], witness=w)

    # negative energy reached: test whether the state survives local refinement
    energies = [float(energy(u_start).total), res.f]
    kinetic = [mesh.kinetic(u_start.coef), u.mesh.kinetic(u.coef)]
    for _ in range(max_refine):
        if res.f < UNBOUNDED_LEVEL:
            break
        fine = u.mesh.refine(_top_cells(u, 0.05))
        u_new, res_new = descend(fine.transfer(u), mu, max_iter=max_iter, gtol=gtol)
        total_it += res_new.iterations
        energies.append(res_new.f)
        kinetic.append(fine.kinetic(u_new.coef))
        grew = res_new.f < 1.5 * res.f
        u, res = u_new, res_new
        if not grew:
            break
    kin_growth = kinetic[-1] / kinetic[0] if kinetic[0] > 0 else math.inf
    if res.f < UNBOUNDED_LEVEL and kin_growth > 10.0:
        return GroundStateResult(mu, Status.UNBOUNDED, res.f, u, lagrange_multiplier(u), total_it,
                                 res.grad_norm, best_start_label=label, start_energies=values,
                                 refinement_energies=energies, refinement_kinetic=kinetic)
    if len(energies) > 2 and energies[-1] < 1.5 * energies[-2]:
        # still dropping geometrically when the refinement budget ran out
        return GroundStateResult(mu, Status.NOT_CONVERGED, res.f, u, lagrange_multiplier(u), total_it,
                                 res.grad_norm, best_start_label=label, start_energies=values,
                                 refinement_energies=energies, refinement_kinetic=kinetic)
    status, lam, flux, rn = _finalize(u, res, mu, Status.NEGATIVE_MINIMIZER)
    return GroundStateResult(mu, status, res.f, u, lam, total_it, rn, flux, rn,
                             best_start_label=label, start_energies=values,
                             refinement_energies=energies, refinement_kinetic=kinetic)


# --- threshold ------------------------------------------------------------------------


def negative_energy_reached(mesh: Mesh, mu: float, starts, max_iter: int = 1500) -> tuple[bool, float]:
    """Whether some descent from ``starts`` reaches ``E < -1e-8`` at mass ``mu``.

    A single discrete function with negative energy proves the infimum is
    negative, so each run stops as soon as that happens.
    """
    best = math.inf
    for _, u0 in starts:
        _, res = descend(u0, mu, max_iter=max_iter, gtol=1e-7, ftol=1e-12, stop_below=-NEG_TOL)
        best = min(best, res.f)
        if best < -NEG_TOL:
            return True, best
    return False, best


@dataclass
class ThresholdScan:
    mu_grid: list
    energies: list
    bracket: tuple
    negative: list
    statuses: list = field(default_factory=list)
    diverges: list = field(default_factory=list)
    mu_K_gn: float | None = None
    consistency_delta: float | None = None
    inconsistent: bool = False
    monotone: bool = True
    evaluations: int = 0

    @property
    def mu_K(self) -> float:
        return 0.5 * (self.bracket[0] + self.bracket[1])

    def to_dict(self) -> dict:
        return {
            "mu_grid": self.mu_grid, "energies": self.energies, "negative": self.negative,
            "statuses": self.statuses, "diverges": self.diverges,
            "bracket": list(self.bracket), "mu_K": self.mu_K, "mu_K_gn": self.mu_K_gn,
            "consistency_delta": self.consistency_delta, "inconsistent": self.inconsistent,
            "monotone": self.monotone, "evaluations": self.evaluations,
        }


def threshold_scan(
    g: MetricGraph,
    lo: float | None = None,
    hi: float | None = None,
    tol: float = 1e-3,
    grid=None,
    mesh: Mesh | None = None,
    config: MeshConfig | None = None,
    gn: GNReport | None = None,
    n_starts: int = 6,
    seed: int = 0,
    max_iter: int = 1500,
) -> ThresholdScan:
    """Bisection for the mass where the infimum turns negative.

    The starts deliberately exclude the GN optimizer so the bracket is an
    estimate independent from the quotient maximization; when ``gn`` is
    given the two are compared.  ``grid`` additionally records the energy
    and outcome of a full minimization at each listed mass.
    """
    mesh = mesh if mesh is not None else Mesh.from_graph(g, config or MeshConfig())
    lo = 0.9 * MU_R / 2 if lo is None else lo
    hi = MU_R if hi is None else hi
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")

    def starts_at(mu):
        return default_starts(mesh, mu, None, n_starts, seed)

    seen: dict[float, tuple[bool, float]] = {}

    def pred(mu):
        if mu not in seen:
            seen[mu] = negative_energy_reached(mesh, mu, starts_at(mu), max_iter)
        return seen[mu][0]

    inconsistent = False
    if pred(lo) or not pred(hi):
        inconsistent = True
    a, b = lo, hi
    if not inconsistent:
        while b - a > tol:
            m = 0.5 * (a + b)
            if pred(m):
                b = m
            else:
                a = m
    scan = ThresholdScan([], [], (a, b), [], inconsistent=inconsistent)
    if grid is not None:
        for mu in sorted(float(x) for x in grid):
            r = minimize_at_mass(g, mu, mesh=mesh, starts=starts_at(mu), max_iter=max_iter)
            scan.mu_grid.append(mu)
            scan.energies.append(r.energy)
            scan.statuses.append(r.status.value)
            scan.negative.append(r.energy < -NEG_TOL)
            scan.diverges.append(r.status is Status.UNBOUNDED)
        fin = [e for e, s in zip(scan.energies, scan.statuses) if s != Status.UNBOUNDED.value]
        scan.monotone = all(y <= x + 1e-6 for x, y in zip(fin, fin[1:]))
    # every negative verdict below a non-negative one breaks monotonicity of the predicate
    neg = sorted(seen.items())
    for (m1, (p1, _)), (m2, (p2, _)) in zip(neg, neg[1:]):
        if p1 and not p2:
            scan.inconsistent = True
    scan.evaluations = len(seen)
    if gn is not None:
        scan.mu_K_gn = gn.mu_K_estimate
        scan.consistency_delta = abs(scan.mu_K - gn.mu_K_estimate)
    return scan


# --- blow-up certificate -----------------------------------------------------------------


@dataclass
class BlowupCertificate:
    mu: float
    edge_id: str
    lambdas: list
    energies: list
    kinetic: list
    ratios: list
    valid: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _profile(y, kappa: float):
    """Soliton bump on ``[0, 1]`` lowered to vanish at both ends."""
    y = np.asarray(y, dtype=float)
    base = phi1(kappa / 2.0)
    return np.where((y >= 0) & (y <= 1), np.maximum(phi1(kappa * (y - 0.5)) - base, 0.0), 0.0)


def dilation_family(g: MetricGraph, mu: float, lam: float, edge_id: str | None = None,
                    kappa: float = 16.0, cells: int = 400, base_h: float = 0.05) -> GraphFunction:
    """``v_lam(x) = sqrt(lam) v(lam x)`` placed at the start of a core edge, with mass ``mu``.

    ``v`` lives on ``[0, a]`` with ``a = min(1, edge length)``.  The edge is
    meshed by ``cells`` uniform cells on the support ``[0, a/lam]`` and
    coarse cells beyond, so the discrete family is an exact dilation.
    """
    e = g.edge(edge_id) if edge_id else max(g.edges, key=lambda e: e.length)
    a = min(1.0, e.length)
    s = a / lam
    inner = np.linspace(0.0, s, cells + 1)
    rest = e.length - s
    outer = s + np.linspace(0.0, rest, max(2, int(math.ceil(rest / base_h))) + 1)[1:] if rest > 1e-12 else []
    nodes = {ed.id: np.linspace(0.0, ed.length, max(4, int(math.ceil(ed.length / base_h))) + 1) for ed in g.edges}
    nodes[e.id] = np.concatenate([inner, outer])
    for hl in g.halflines:
        nodes[hl.id] = np.linspace(0.0, 2.0, 9)
    mesh = Mesh.from_nodes(g, nodes)
    u = mesh.interpolate(lambda eid, x: _profile(lam * x / a, kappa) if eid == e.id else np.zeros_like(x))
    # mass of v_lam equals mass of v: rescale against the undilated profile for exactness
    y = np.linspace(0.0, 1.0, cells + 1)
    prof = _profile(y, kappa)
    h = a / cells
    m1 = float(np.sum(h * (prof[:-1] ** 2 + prof[:-1] * prof[1:] + prof[1:] ** 2) / 3.0))
    return u.scaled(math.sqrt(mu / m1 * lam))


def blowup_probe(g: MetricGraph, mu: float, exponents=range(9), edge_id: str | None = None) -> BlowupCertificate:
    """Energies of the dilation family for ``lam = 2^k``; valid when all are negative and
    each doubling multiplies the energy by 4 within 5 %."""
    if not mu > MU_R:
        raise ValueError(f"blow-up needs mass above {MU_R:.7f}")
    e = g.edge(edge_id) if edge_id else max(g.edges, key=lambda e: e.length)
    lams, ens, kins = [], [], []
    for k in exponents:
        lam = 2.0 ** k
        v = dilation_family(g, mu, lam, e.id)
        eb = energy(v)
        lams.append(lam)
        ens.append(eb.total)
        kins.append(2 * eb.kinetic)
    ratios = [b / a for a, b in zip(ens, ens[1:])]
    valid = all(x < 0 for x in ens) and all(abs(r / 4.0 - 1.0) <= 0.05 for r in ratios)
    return BlowupCertificate(mu, e.id, lams, ens, kins, ratios, valid)


def mass_consistency(C_K: float, scan: ThresholdScan) -> float:
    return abs(mu_from_C(C_K) - scan.mu_K)

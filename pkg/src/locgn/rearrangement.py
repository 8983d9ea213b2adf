"""Decreasing and symmetric rearrangements of nonnegative piecewise-linear functions.

A function is handled as a list of linear *pieces* ``(left, right, length)``.
Mesh cells of a :class:`GraphFunction` are pieces; so are the steps of a step
function.  The distribution function ``rho(t) = |{u > t}|`` of such data is
piecewise linear in ``t`` with breakpoints at the piece end values, so the
rearrangement can be built exactly, up to rounding: every output piece gathers
the measure that the input spends between two consecutive breakpoints.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import GAUSS_S, GAUSS_W, GraphFunction


@dataclass(frozen=True)
class Pieces:
    """Linear pieces ``left -> right`` over intervals of the given lengths."""

    left: np.ndarray
    right: np.ndarray
    length: np.ndarray

    def __post_init__(self):
        arrs = [np.asarray(a, dtype=float).ravel() for a in (self.left, self.right, self.length)]
        if not (len(arrs[0]) == len(arrs[1]) == len(arrs[2])):
            raise ValueError("left, right and length must have equal sizes")
        if np.any(arrs[2] < 0):
            raise ValueError("piece lengths must be nonnegative")
        for name, a in zip(("left", "right", "length"), arrs):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def from_function(cls, u: GraphFunction) -> "Pieces":
        m = u.mesh
        ue = np.append(u.coef, 0.0)
        return cls(ue[m.c0], ue[m.c1], m.ch)

    @classmethod
    def from_steps(cls, values, lengths) -> "Pieces":
        v = np.asarray(values, dtype=float)
        return cls(v, v, lengths)

    @classmethod
    def from_samples(cls, x, values) -> "Pieces":
        """Polyline through ``(x_i, values_i)`` on one interval."""
        x, v = np.asarray(x, dtype=float), np.asarray(values, dtype=float)
        return cls(v[:-1], v[1:], np.diff(x))

    @property
    def total_length(self) -> float:
        return float(self.length.sum())

    def lp(self, p: float) -> float:
        """``int |u|^p`` (exact for p = 2; Gauss-Legendre otherwise, exact for even p <= 6)."""
        a, b, h = np.abs(self.left), np.abs(self.right), self.length
        if p == 2:
            return float(np.sum(h * (a * a + a * b + b * b) / 3.0))
        vals = a[:, None] * (1 - GAUSS_S) + b[:, None] * GAUSS_S
        return float(np.sum(h * ((vals ** p) @ GAUSS_W)))

    def kinetic(self) -> float:
        """``int |u'|^2`` ignoring jumps between pieces (callers check continuity)."""
        h = self.length
        pos = h > 0
        return float(np.sum((self.right[pos] - self.left[pos]) ** 2 / h[pos]))

    def is_continuous(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.left[1:] - self.right[:-1]) <= tol))


@dataclass(frozen=True)
class DistributionFunction:
    """``rho`` at the descending breakpoints ``t``: ``rho[k] = |{u > t_k}|`` and
    ``rho_left[k] = |{u >= t_k}|`` (its left limit).  Linear in between."""

    t: np.ndarray
    rho: np.ndarray
    rho_left: np.ndarray
    plateau: np.ndarray = field(repr=False)    # measure of {u = t_k}
    between: np.ndarray = field(repr=False)    # measure of {t_{k+1} < u < t_k}

    def __call__(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.zeros_like(s)
        t = self.t
        if t.size == 0:
            return out
        for i, x in enumerate(s):
            if x >= t[0]:
                out[i] = 0.0
                continue
            k = int(np.searchsorted(-t, -x, side="left"))  # first k with t_k <= x
            if k < t.size and t[k] == x:
                out[i] = self.rho[k]
            elif k >= t.size:
                out[i] = self.rho_left[-1]
            else:
                hi, lo = t[k - 1], t[k]
                out[i] = self.rho_left[k - 1] + self.between[k - 1] * (hi - x) / (hi - lo)
        return out

    @property
    def support_measure(self) -> float:
        """Limit of ``rho(t)`` as ``t -> 0+``."""
        if self.t.size == 0:
            return 0.0
        return float(self.rho_left[-1] if self.t[-1] > 0 else self.rho[-1])


def _as_pieces(u) -> Pieces:
    if isinstance(u, Pieces):
        return u
    if isinstance(u, RearrangedProfile):
        return u.pieces
    if isinstance(u, GraphFunction):
        return Pieces.from_function(u)
    raise TypeError(f"cannot rearrange {type(u).__name__}")


def distribution(u) -> DistributionFunction:
    """Exact distribution function of a nonnegative function (GraphFunction or Pieces)."""
    p = _as_pieces(u)
    a, b, h = p.left, p.right, p.length
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("rearrangement needs a nonnegative function")
    keep = h > 0
    a, b, h = a[keep], b[keep], h[keep]
    hi, lo = np.maximum(a, b), np.minimum(a, b)
    t = np.unique(np.concatenate([hi, lo]))[::-1]
    nb = t.size
    plateau = np.zeros(nb)
    between = np.zeros(max(nb - 1, 0))
    if nb == 0:
        return DistributionFunction(t, np.zeros(0), np.zeros(0), plateau, between)
    ihi = np.searchsorted(-t, -hi)
    ilo = np.searchsorted(-t, -lo)
    flat = ihi == ilo
    np.add.at(plateau, ihi[flat], h[flat])
    # pieces spanning exactly one breakpoint interval contribute their whole length
    one = ilo == ihi + 1
    np.add.at(between, ihi[one], h[one])
    many = ~flat & ~one
    if np.any(many):
        dens = np.zeros(nb)
        d = h[many] / (hi[many] - lo[many])
        np.add.at(dens, ihi[many], d)
        np.add.at(dens, ilo[many], -d)
        between += np.cumsum(dens)[:-1] * (t[:-1] - t[1:])
    # rho[k] = plateaus above t_k plus everything strictly between
    rho_left = np.cumsum(plateau) + np.concatenate([[0.0], np.cumsum(between)])
    rho = rho_left - plateau
    return DistributionFunction(t, rho, rho_left, plateau, between)


@dataclass(frozen=True)
class RearrangedProfile:
    """Monotone profile on ``[0, total)`` (``kind='decreasing'``) or an even profile
    on ``(-total/2, total/2)`` (``kind='symmetric'``) stored by its right half."""

    kind: str
    pieces: Pieces
    total: float

    @property
    def half_pieces(self) -> Pieces:
        return self.pieces

    def _ends(self):
        return np.concatenate([[0.0], np.cumsum(self.pieces.length)])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        y = np.abs(x) if self.kind == "symmetric" else x
        ends = self._ends()
        p = self.pieces
        k = np.clip(np.searchsorted(ends, y, side="right") - 1, 0, max(len(p.length) - 1, 0))
        if len(p.length) == 0:
            return np.zeros_like(y)
        h = p.length[k]
        s = np.where(h > 0, (y - ends[k]) / np.where(h > 0, h, 1.0), 0.0)
        val = p.left[k] + (p.right[k] - p.left[k]) * np.clip(s, 0, 1)
        return np.where((y >= 0) & (y < ends[-1]), val, 0.0)

    def _mult(self) -> float:
        return 2.0 if self.kind == "symmetric" else 1.0

    def lp(self, p: float) -> float:
        return self._mult() * self.pieces.lp(p)

    def mass(self) -> float:
        return self.lp(2)

    def kinetic(self) -> float:
        """``int |u'|^2``; infinite when the profile jumps."""
        if not self.pieces.is_continuous(tol=1e-12 * max(1.0, self.sup())):
            return math.inf
        return self._mult() * self.pieces.kinetic()

    def sup(self) -> float:
        return float(self.pieces.left[0]) if len(self.pieces.left) else 0.0

    def samples(self):
        """``(x, value)`` points tracing the profile, with doubled abscissas at jumps."""
        p = self.pieces
        ends = self._ends()
        xs, vs = [], []
        for k in range(len(p.length)):
            xs += [ends[k], ends[k + 1]]
            vs += [p.left[k], p.right[k]]
        xs, vs = np.array(xs), np.array(vs)
        if self.kind == "symmetric":
            xs = np.concatenate([-xs[::-1], xs])
            vs = np.concatenate([vs[::-1], vs])
        return xs, vs

    def save_csv(self, path) -> None:
        """Same layout as function snapshots, under edge id ``rearranged``."""
        xs, vs = self.samples()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["edge_id", "x", "value"])
            for x, v in zip(xs, vs):
                w.writerow(["rearranged", repr(float(x)), repr(float(v))])


def _monotone_pieces(rho: DistributionFunction) -> Pieces:
    t = rho.t
    left, right, length = [], [], []
    for k in range(t.size):
        if rho.plateau[k] > 0:
            left.append(t[k]), right.append(t[k]), length.append(rho.plateau[k])
        if k + 1 < t.size and rho.between[k] > 0:
            left.append(t[k]), right.append(t[k + 1]), length.append(rho.between[k])
    return Pieces(np.array(left), np.array(right), np.array(length))


def decreasing_rearrangement(u) -> RearrangedProfile:
    """``u*(x) = inf{t >= 0 : rho(t) <= x}`` on ``[0, |G|)``."""
    p = _as_pieces(u)
    rho = distribution(p)
    return RearrangedProfile("decreasing", _monotone_pieces(rho), p.total_length)


def symmetric_rearrangement(u) -> RearrangedProfile:
    """Even profile ``u_hat(x) = u*(2|x|)`` on ``(-|G|/2, |G|/2)``."""
    star = decreasing_rearrangement(u)
    q = star.pieces
    half = Pieces(q.left, q.right, q.length / 2.0)
    return RearrangedProfile("symmetric", half, star.total)


def rearranged_quotient(u: GraphFunction) -> dict:
    """The three quantities in ``Q(u) <= ||u||_6^6 / (||u||_2^4 ||(u*)'||^2)``.

    ``Q(u)`` uses the core L6 norm, the middle term the L6 norm over the
    whole graph and the kinetic energy of ``u*``; the last entry is ``Q(u*)``
    on the half-line, which is at most the half-line constant.
    """
    m = u.mesh
    w = u.abs()
    star = decreasing_rearrangement(w)
    mass, kin = m.mass(w.coef), m.kinetic(w.coef)
    l6_all, l6_core = m.l6_all(w.coef), m.l6_core(w.coef)
    kin_star = star.kinetic()
    return {
        "Q": l6_core / (mass ** 2 * kin),
        "Q_all": l6_all / (mass ** 2 * kin),
        "Q_star_bound": l6_all / (mass ** 2 * kin_star),
        "Q_star": star.lp(6) / (star.mass() ** 2 * kin_star),
        "kinetic": kin,
        "kinetic_star": kin_star,
    }

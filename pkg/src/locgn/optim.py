"""Riemannian L-BFGS on a mass sphere ``{u : u^T M u = mass}``.

The metric is the H^1 Gram matrix ``A = K + s M`` of the mesh, so the
Riemannian gradient is the A-orthogonal projection of ``A^{-1} grad`` onto
the tangent space.  This is a Sobolev-gradient scheme: iteration counts do
not grow with mesh refinement.  The shift ``s`` defaults to the Rayleigh
quotient ``||u0'||^2 / ||u0||^2`` of the start, which matches the metric to
the length scale of the function (profiles spread over hundreds of units
and one-cell spikes are then equally well conditioned).  Steps are retracted by renormalization and
accepted by Armijo backtracking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse.linalg as spla

from .mesh import Mesh


@dataclass
class SphereResult:
    u: np.ndarray
    f: float
    grad_norm: float
    iterations: int
    converged: bool
    history: list
    reason: str = ""  # gtol | stall | linesearch | stop | max_iter


def sphere_minimize(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    u0: np.ndarray,
    mesh: Mesh,
    mass: float = 1.0,
    max_iter: int = 2000,
    gtol: float = 1e-6,
    ftol: float = 1e-10,
    memory: int = 8,
    stall: int = 20,
    stop: Callable[[float, np.ndarray], bool] | None = None,
    shift: float | None = None,
) -> SphereResult:
    """Minimize ``fun`` (returning value and Euclidean gradient) over the mass sphere.

    Convergence requires both the A-norm of the Riemannian gradient below
    ``gtol`` and the last relative decrease below ``ftol``.  After ``stall``
    consecutive steps with relative decrease below ``ftol`` the value has
    reached working precision; the run then stops and counts as converged
    when the gradient is within ``10 * gtol``.  ``stop(f, u)`` allows early
    termination (used to detect runaway descent).
    """
    M = mesh.M
    u0 = np.asarray(u0, dtype=float)
    if shift is None:
        m0 = float(u0 @ (M @ u0))
        shift = float(u0 @ (mesh.K @ u0)) / m0 if m0 > 0 else 1.0
        shift = min(max(shift, 1e-8), 1e8)
    A = (mesh.K + shift * M).tocsc()
    solve_A = spla.splu(A).solve

    def retract(v):
        return v * math.sqrt(mass / float(v @ (M @ v)))

    Mu_cache = {}

    def tangent(u, w):
        # A-orthogonal projection onto {v : u^T M v = 0}
        Mu = M @ u
        n = Mu_cache.get("n")
        if n is None or Mu_cache.get("u") is not u:
            n = solve_A(Mu)
            Mu_cache.update(u=u, n=n, Mu=Mu)
        return w - (float(Mu @ w) / float(Mu @ n)) * n

    def adot(a, b):
        return float(a @ (A @ b))

    u = retract(u0)
    f, g = fun(u)
    history = [f]
    S, Y, AS, AY = [], [], [], []
    rg = tangent(u, solve_A(g))
    gnorm = math.sqrt(max(float(rg @ g), 0.0))
    rel = np.inf
    it = 0
    converged = False
    self_reset = False
    flat = 0
    reason = "max_iter"
    for it in range(1, max_iter + 1):
        if gnorm <= gtol and rel <= ftol:
            converged = True
            reason = "gtol"
            it -= 1
            break
        if S and not self_reset:
            # two-loop recursion in the A inner product
            q = rg.copy()
            alphas = []
            for s, y, As, Ay in zip(reversed(S), reversed(Y), reversed(AS), reversed(AY)):
                rho = 1.0 / float(y @ As)
                a = rho * float(As @ q)
                alphas.append((a, rho, s, Ay))
                q -= a * y
            q *= float(Y[-1] @ AS[-1]) / float(Y[-1] @ AY[-1])
            for a, rho, s, Ay in reversed(alphas):
                b = rho * float(Ay @ q)
                q += (a - b) * s
            d = -tangent(u, q)
            slope = adot(d, rg)
            t = 1.0
        else:
            slope = -1.0
        if not S or self_reset or not slope < 0:
            S.clear(), Y.clear(), AS.clear(), AY.clear()
            d, slope = -rg, -gnorm**2
            # limit the relative change of u on a memoryless step
            t = min(1.0, 0.1 * math.sqrt(mass / max(float(d @ (M @ d)), 1e-300)))
        self_reset = False
        accepted = False
        for _ in range(40):
            u_new = retract(u + t * d)
            f_new, g_new = fun(u_new)
            if np.isfinite(f_new) and f_new <= f + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if S:
                # retry once along the plain Riemannian gradient
                self_reset = True
                continue
            # line search cannot make progress: precision floor reached
            converged = gnorm <= 10 * gtol
            reason = "linesearch"
            break
        rg_new = tangent(u_new, solve_A(g_new))
        s = tangent(u_new, u_new - u)
        y = rg_new - tangent(u_new, rg)
        As, Ay = A @ s, A @ y
        sy = float(y @ As)
        if sy > 1e-14 * math.sqrt(float(s @ As) * float(y @ Ay)):
            S.append(s)
            Y.append(y)
            AS.append(As)
            AY.append(Ay)
            if len(S) > memory:
                S.pop(0), Y.pop(0), AS.pop(0), AY.pop(0)
        rel = abs(f - f_new) / max(abs(f_new), 1e-300)
        u, f, g, rg = u_new, f_new, g_new, rg_new
        gnorm = math.sqrt(max(float(rg @ g), 0.0))
        history.append(f)
        flat = flat + 1 if rel <= ftol else 0
        if flat >= stall and gnorm > gtol:
            converged = gnorm <= 10 * gtol
            reason = "stall"
            break
        if stop is not None and stop(f, u):
            reason = "stop"
            break
    else:
        converged = gnorm <= gtol and rel <= ftol
    return SphereResult(u, f, gnorm, it, converged, history, reason)

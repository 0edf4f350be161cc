"""Bounded-Lipschitz norm and the aggregate comparison metric.

For a finitely supported signed measure the norm ‖μ‖_BL is the largest
integral ∫η dμ over test functions with √(‖η‖_∞² + Lip(η)²) ≤ 1.  By
the McShane-Whitney extension theorem the supremum only depends on the
values of η on the support, so for a fixed split (s, L) = (cos φ,
sin φ) of the budget between sup-norm and Lipschitz constant the inner
problem is a small linear program; the outer one-dimensional problem is
solved by golden-section search.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import linprog

from .errors import DomainError
from .measures import DiscreteVectorMeasure

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _inner_lp(points: np.ndarray, masses: np.ndarray, s: float, L: float) -> float:
    """max Σ c_k η_k subject to |η_k| <= s and the pairwise Lipschitz
    constraints |η_k − η_l| <= L·‖x_k − x_l‖."""
    K = len(masses)
    if K == 0:
        return 0.0
    if K == 1:
        return abs(masses[0]) * s
    dist = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
    rows = []
    rhs = []
    for k in range(K):
        for l in range(k + 1, K):
            row = np.zeros(K)
            row[k], row[l] = 1.0, -1.0
            rows.append(row.copy())
            rhs.append(L * dist[k, l])
            rows.append(-row)
            rhs.append(L * dist[k, l])
    res = linprog(-masses, A_ub=np.array(rows), b_ub=np.array(rhs),
                  bounds=[(-s, s)] * K, method="highs")
    if not res.success:
        raise RuntimeError(f"inner BL linear program failed: {res.message}")
    return -res.fun


def bl_norm_support(points, masses, iters: int = 60) -> float:
    """BL norm of the signed measure Σ masses_k δ_{points_k}."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    masses = np.asarray(masses, dtype=float)
    keep = masses != 0.0
    points, masses = points[keep], masses[keep]
    if len(masses) == 0:
        return 0.0

    def value(phi):
        return _inner_lp(points, masses, math.cos(phi), math.sin(phi))

    a, b = 0.0, math.pi / 2.0
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = value(c), value(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = value(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = value(d)
    return max(fc, fd)


def bl_norm_component(mu_points, mu_masses, nu_points=None, nu_masses=None) -> float:
    """BL norm of a discrete component measure, or of a difference of
    two when the second pair is given."""
    if nu_points is None:
        return bl_norm_support(mu_points, mu_masses)
    pts = np.vstack([np.atleast_2d(mu_points), np.atleast_2d(nu_points)])
    ms = np.concatenate([np.asarray(mu_masses, dtype=float),
                         -np.asarray(nu_masses, dtype=float)])
    # collapse coincident support points
    order = np.lexsort(pts.T[::-1])
    pts, ms = pts[order], ms[order]
    out_p, out_m = [], []
    for p, m in zip(pts, ms):
        if out_p and np.linalg.norm(p - out_p[-1]) <= 1e-12:
            out_m[-1] += m
        else:
            out_p.append(p)
            out_m.append(m)
    return bl_norm_support(np.array(out_p), np.array(out_m))


def d_bl(mu: DiscreteVectorMeasure, nu: DiscreteVectorMeasure) -> float:
    """Root-sum-square of the componentwise BL norms of μ − ν."""
    if mu.n_species != nu.n_species:
        raise DomainError("species count mismatch")
    total = 0.0
    for i in range(mu.n_species):
        val = bl_norm_component(mu.x, mu.w[:, i], nu.x, nu.w[:, i])
        total += val * val
    return math.sqrt(total)


def bl_norm_grid_scan(points, masses, grid: int = 1000) -> float:
    """Dense-grid fallback over the budget angle, used to validate the
    unimodality assumption behind the golden-section search."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    masses = np.asarray(masses, dtype=float)
    best = 0.0
    for phi in np.linspace(0.0, math.pi / 2.0, grid):
        best = max(best, _inner_lp(points, masses, math.cos(phi), math.sin(phi)))
    return best

"""Weighted graphs and the discrete tangent-space algebra.

A graph over n nodes with symmetric nonnegative weights q carries a
gradient (node functions to edge functions), a divergence (its negative
adjoint), and for every probability vector p a weighted Laplacian
B(p)φ = −div(θ(p_i,p_j) ∇φ) whose kernel is the constants when p is
strictly positive.  These are the building blocks of the least-action
metric on distributions over the graph.

The perspective function m²/θ(s,t) and the membership test for the
convex cone on which its conjugate vanishes also live here; they supply
the convex integrands used by every solver in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GraphValidationError, NotInRangeError, RankDeficientError
from .interpolation import InterpolationFn


@dataclass(frozen=True)
class WeightedGraph:
    """Symmetric nonnegative edge weights over n >= 2 nodes.

    Diagonal entries are ignored by every metric; connectivity refers to
    the edge set {(i,j): q_ij > 0}.
    """

    q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def max_row_weight(self) -> float:
        """Q := max_i Σ_j q_ij, the constant in the bounded-Lipschitz bound."""
        q = self.q.copy()
        np.fill_diagonal(q, 0.0)
        return float(q.sum(axis=1).max())

    def to_json(self) -> dict:
        return {"n": self.n, "q": self.q.tolist()}

    @staticmethod
    def from_json(obj: dict) -> "WeightedGraph":
        g = WeightedGraph(np.asarray(obj["q"], dtype=float))
        if g.n != int(obj.get("n", g.n)):
            raise GraphValidationError("asymmetric", "n does not match q shape")
        return g


def graph_validate(g: WeightedGraph) -> None:
    """Raise GraphValidationError unless q is square symmetric,
    nonnegative, and the positive-weight graph is connected."""
    q = g.q
    if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 2:
        raise GraphValidationError("asymmetric", f"q must be square n>=2, got {q.shape}")
    if not np.allclose(q, q.T, atol=0.0):
        raise GraphValidationError("asymmetric", "q is not symmetric")
    if np.any(q < 0):
        raise GraphValidationError("negative_weight", "q has negative entries")
    n = q.shape[0]
    adj = q > 0
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in np.nonzero(adj[i])[0]:
            if j != i and not seen[j]:
                seen[j] = True
                stack.append(int(j))
    if not seen.all():
        raise GraphValidationError("disconnected", "positive-weight graph is disconnected")


def validate_distribution(p: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p < -tol):
        raise DomainError("distribution has negative entries")
    if abs(p.sum() - 1.0) > max(tol, 1e-12):
        raise DomainError(f"distribution mass {p.sum()} != 1")
    return p


def graph_gradient(g: WeightedGraph, phi: np.ndarray) -> np.ndarray:
    """(∇φ)_ij = φ_j − φ_i."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (g.n,):
        raise DomainError(f"expected length-{g.n} vector, got {phi.shape}")
    return phi[None, :] - phi[:, None]

def graph_divergence(g: WeightedGraph, v: np.ndarray) -> np.ndarray:
    """(div v)_i = −½ Σ_j (v_ij − v_ji) q_ij; negative adjoint of the gradient."""
    v = np.asarray(v, dtype=float)
    if v.shape != (g.n, g.n):
        raise DomainError(f"expected {g.n}x{g.n} matrix, got {v.shape}")
    return -0.5 * ((v - v.T) * g.q).sum(axis=1)


def weighted_laplacian(g: WeightedGraph, f: InterpolationFn, p: np.ndarray) -> np.ndarray:
    """B(p) with B_ij = −θ(p_i,p_j) q_ij off-diagonal and zero row sums."""
    p = np.asarray(p, dtype=float)
    th = np.asarray(f(p[:, None], p[None, :]), dtype=float)
    w = th * g.q
    np.fill_diagonal(w, 0.0)
    B = -w
    np.fill_diagonal(B, w.sum(axis=1))
    return B


def laplacian_pinv_apply(B: np.ndarray, rhs: np.ndarray,
                         eig_tol: float = 1e-12) -> np.ndarray:
    """Solve B ψ = rhs with Σψ = 0 for a PSD B whose kernel is the constants.

    Uses a dense eigendecomposition; raises NotInRangeError when rhs is
    not mean-free and RankDeficientError when a second eigenvalue falls
    below the threshold.
    """
    B = np.asarray(B, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = B.shape[0]
    if abs(rhs.sum()) > 1e-10 * max(1.0, float(np.abs(rhs).max())):
        raise NotInRangeError(f"rhs sums to {rhs.sum()}, not orthogonal to constants")
    evals, evecs = np.linalg.eigh(0.5 * (B + B.T))
    scale = max(float(evals.max()), 1.0)
    nonzero = evals > eig_tol * scale
    if np.count_nonzero(~nonzero) > 1:
        raise RankDeficientError(
            f"{np.count_nonzero(~nonzero)} near-zero eigenvalues; need exactly 1")
    coeff = evecs.T @ rhs
    psi = evecs[:, nonzero] @ (coeff[nonzero] / evals[nonzero])
    return psi - psi.mean()


def tangent_inner_product(g: WeightedGraph, f: InterpolationFn, p: np.ndarray,
                          u: np.ndarray, v: np.ndarray) -> float:
    """⟨u, v⟩_p = ½ Σ_ij u_ij v_ij θ(p_i, p_j) q_ij."""
    p = np.asarray(p, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    th = np.asarray(f(p[:, None], p[None, :]), dtype=float)
    w = th * g.q
    np.fill_diagonal(w, 0.0)
    return float(0.5 * (u * v * w).sum())


def perspective_energy(m, s: float, t: float, f: InterpolationFn) -> float:
    """The convex integrand ‖m‖²/θ(s,t), with the closure conventions:
    0 when m = 0 and θ = 0, +∞ when θ = 0 and m ≠ 0 or when s,t leave
    the nonnegative quadrant."""
    m2 = float(np.dot(np.atleast_1d(m), np.atleast_1d(m)))
    if s < 0 or t < 0:
        return math.inf
    th = float(f(s, t))
    if th > 0:
        return m2 / th
    return 0.0 if m2 == 0.0 else math.inf


def perspective_energy_array(m: np.ndarray, th: np.ndarray) -> np.ndarray:
    """Vectorized ‖m‖²/θ with the 0/0 → 0 and x/0 → ∞ conventions.
    ``m`` may carry a trailing component axis (summed in the square)."""
    m = np.asarray(m, dtype=float)
    th = np.asarray(th, dtype=float)
    m2 = m * m if m.shape == th.shape else (m * m).sum(axis=-1)
    out = np.full(np.broadcast_shapes(m2.shape, th.shape), np.inf)
    zero = (th <= 0) & (m2 == 0)
    pos = th > 0
    out = np.where(pos, m2 / np.where(pos, th, 1.0), out)
    out = np.where(zero, 0.0, out)
    return out


def conjugate_cone_contains(a: float, b: float, c, f: InterpolationFn,
                            tol: float = 1e-9, grid: int = 2001) -> bool:
    """Membership test for the cone K on which the convex conjugate of
    the perspective integrand vanishes.

    K = {(a,b,c) : a t + b s + ¼‖c‖² θ(t,s) ≤ 0 for all t,s ≥ 0}; by
    1-homogeneity it suffices to scan directions (ξ, 1−ξ) on [0,1].
    """
    c2 = float(np.dot(np.atleast_1d(c), np.atleast_1d(c)))
    xi = np.linspace(0.0, 1.0, grid)
    vals = a * xi + b * (1.0 - xi) + 0.25 * c2 * np.asarray(f(xi, 1.0 - xi))
    return bool(vals.max() <= tol)

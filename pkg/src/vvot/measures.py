"""Discrete vector-valued measures and simplex coordinates.

A vector-valued measure assigns to finitely many spatial atoms a
nonnegative mass per species; the species masses jointly sum to one.
Simplex points are the length-(n−1) coordinate form of distributions
over the species set: r maps to (r_1, …, r_{n−1}, 1−Σr).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass
class DiscreteVectorMeasure:
    """Finitely supported measure on ℝᵈ × {1..n}.

    ``x``: (K, d) atom locations, ``w``: (K, n) per-species masses.
    Duplicate locations are merged at construction; atoms whose total
    mass vanishes are dropped.
    """

    x: np.ndarray
    w: np.ndarray

    def __init__(self, x, w, require_probability: bool = True, tol: float = 1e-12):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        w = np.atleast_2d(np.asarray(w, dtype=float))
        if x.shape[0] != w.shape[0]:
            raise DomainError(f"{x.shape[0]} locations vs {w.shape[0]} weight rows")
        if np.any(w < -tol):
            raise DomainError("negative species mass")
        x, w = _merge_atoms(x, np.maximum(w, 0.0))
        if require_probability and abs(w.sum() - 1.0) > 1e-9:
            raise DomainError(f"total mass {w.sum()} != 1")
        self.x = x
        self.w = w

    @property
    def n_species(self) -> int:
        return self.w.shape[1]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.x.shape[0]

    def species_masses(self) -> np.ndarray:
        return self.w.sum(axis=0)

    def total_mass(self) -> float:
        return float(self.w.sum())

    def second_moment(self) -> float:
        """M₂ of the total measure μ̄ = Σ_i μ_i."""
        return float(((self.x ** 2).sum(axis=1) * self.w.sum(axis=1)).sum())

    def to_json(self) -> dict:
        return {"atoms": [{"x": xi.tolist(), "w": wi.tolist()}
                          for xi, wi in zip(self.x, self.w)]}

    @staticmethod
    def from_json(obj: dict) -> "DiscreteVectorMeasure":
        atoms = obj["atoms"]
        x = [a["x"] for a in atoms]
        w = [a["w"] for a in atoms]
        return DiscreteVectorMeasure(x, w)

    def allclose(self, other: "DiscreteVectorMeasure", tol: float = 1e-11) -> bool:
        if self.n_atoms != other.n_atoms or self.n_species != other.n_species:
            return False
        return (np.allclose(self.x, other.x, atol=tol)
                and np.allclose(self.w, other.w, atol=tol))


def _merge_atoms(x: np.ndarray, w: np.ndarray, tol: float = 1e-12):
    order = np.lexsort(x.T[::-1])
    x, w = x[order], w[order]
    keep_x, keep_w = [], []
    for xi, wi in zip(x, w):
        if keep_x and np.linalg.norm(xi - keep_x[-1]) <= tol:
            keep_w[-1] = keep_w[-1] + wi
        else:
            keep_x.append(xi.copy())
            keep_w.append(wi.copy())
    x = np.array(keep_x)
    w = np.array(keep_w)
    alive = w.sum(axis=1) > 0
    if not alive.all() and alive.any():
        x, w = x[alive], w[alive]
    return x, w


# -- simplex coordinates ---------------------------------------------------

def simplex_validate(r: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r < -tol) or r.sum() > 1.0 + tol:
        raise DomainError(f"not a simplex point: {r}")
    return r


def simplex_to_distribution(r: np.ndarray) -> np.ndarray:
    """r ∈ Δ^{n−1} (length n−1) to the distribution (r, 1−Σr)."""
    r = np.asarray(r, dtype=float)
    return np.concatenate([r, [1.0 - r.sum()]])


def distribution_to_simplex(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return p[:-1].copy()


def simplex_corner(j: int, n: int) -> np.ndarray:
    """Coordinates of the corner whose distribution is the point mass at
    species j (0-based)."""
    r = np.zeros(n - 1)
    if j < n - 1:
        r[j] = 1.0
    return r


def simplex_corners(n: int) -> np.ndarray:
    return np.array([simplex_corner(j, n) for j in range(n)])


def simplex_min_margin(r: np.ndarray) -> float:
    """Distance of a simplex point to the coordinate boundary: the
    smallest entry of the full distribution vector."""
    return float(simplex_to_distribution(r).min())

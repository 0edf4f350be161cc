"""Interpolation functions (edge-density means) on [0,∞)².

An interpolation function θ maps two nonnegative node densities to a
density on the connecting edge.  The admissible class is: continuous,
symmetric, positive on the open quadrant, θ(1,1)=1, monotone in each
argument, positively 1-homogeneous, and jointly concave.  The three
built-in members are the arithmetic mean (s+t)/2, the geometric mean
√(st), and the logarithmic mean (t−s)/(log t − log s).

Every θ here is dominated by the arithmetic mean, which is what makes
the kinetic action of the associated transport metric comparable with
total-variation-type quantities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError

ArrayLike = np.ndarray | float


def _arithmetic(s, t):
    return 0.5 * (np.asarray(s, dtype=float) + np.asarray(t, dtype=float))


def _geometric(s, t):
    return np.sqrt(np.asarray(s, dtype=float) * np.asarray(t, dtype=float))


def _logarithmic(s, t):
    # (t-s)/(log t - log s), extended by continuity: value s on the
    # diagonal and 0 whenever either argument vanishes.
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    s, t = np.broadcast_arrays(s, t)
    out = np.zeros(s.shape, dtype=float)
    pos = (s > 0) & (t > 0)
    near = pos & (np.abs(s - t) <= 1e-10 * np.maximum(s, t))
    out[near] = 0.5 * (s[near] + t[near])
    gen = pos & ~near
    out[gen] = (t[gen] - s[gen]) / (np.log(t[gen]) - np.log(s[gen]))
    return out


def _arithmetic_grad(s, t):
    s = np.asarray(s, dtype=float)
    shape = np.broadcast_shapes(s.shape, np.asarray(t).shape)
    half = np.full(shape, 0.5)
    return half, half.copy()


def _geometric_grad(s, t):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    s, t = np.broadcast_arrays(s, t)
    eps = 1e-300
    root = np.sqrt(np.maximum(s, 0.0) * np.maximum(t, 0.0))
    ds = 0.5 * root / np.maximum(s, eps)
    dt = 0.5 * root / np.maximum(t, eps)
    return ds, dt


def _logarithmic_grad(s, t):
    # d/ds [(t-s)/L] with L = log t - log s equals ((t-s)/s - L)/L².
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    s, t = np.broadcast_arrays(s, t)
    ds = np.zeros(s.shape)
    dt = np.zeros(s.shape)
    pos = (s > 0) & (t > 0)
    near = pos & (np.abs(s - t) <= 1e-7 * np.maximum(s, t))
    ds[near] = 0.5
    dt[near] = 0.5
    gen = pos & ~near
    L = np.log(t[gen]) - np.log(s[gen])
    ds[gen] = ((t[gen] - s[gen]) / s[gen] - L) / L**2
    dt[gen] = (L - (t[gen] - s[gen]) / t[gen]) / L**2
    return ds, dt


@dataclass(frozen=True)
class InterpolationFn:
    """An interpolation function with optional analytic gradient.

    ``fn`` must accept numpy arrays and broadcast; ``grad`` (if given)
    returns the pair of partial derivatives and is used by the Newton
    prox for the graph kinetic term.  ``vanishes_at_zero`` records
    whether θ(s, 0) = 0, a precondition of several two-node formulas.
    """

    kind: str
    fn: Callable[[ArrayLike, ArrayLike], np.ndarray]
    grad: Optional[Callable[[ArrayLike, ArrayLike], tuple]] = field(default=None)
    vanishes_at_zero: bool = True

    def __call__(self, s: ArrayLike, t: ArrayLike) -> np.ndarray:
        return self.fn(s, t)


ARITHMETIC = InterpolationFn("arithmetic", _arithmetic, _arithmetic_grad,
                             vanishes_at_zero=False)
GEOMETRIC = InterpolationFn("geometric", _geometric, _geometric_grad)
LOGARITHMIC = InterpolationFn("logarithmic", _logarithmic, _logarithmic_grad)

_BUILTIN = {"arithmetic": ARITHMETIC, "geometric": GEOMETRIC,
            "logarithmic": LOGARITHMIC}


def make_interpolation(spec) -> InterpolationFn:
    """Resolve an interpolation from a name or pass one through."""
    if isinstance(spec, InterpolationFn):
        return spec
    try:
        return _BUILTIN[str(spec).lower()]
    except KeyError:
        raise DomainError(f"unknown interpolation {spec!r}; "
                          f"expected one of {sorted(_BUILTIN)}")


def custom_interpolation(fn, vanishes_at_zero=True) -> InterpolationFn:
    """Wrap a user-supplied symmetric mean; gradient falls back to
    central differences inside the solvers."""
    return InterpolationFn("custom", lambda s, t: np.asarray(fn(s, t), dtype=float),
                           None, vanishes_at_zero)


def theta_eval(f: InterpolationFn, s: float, t: float) -> float:
    """Evaluate θ(s, t) for scalar nonnegative arguments."""
    if s < 0 or t < 0:
        raise DomainError(f"interpolation arguments must be nonnegative, got ({s}, {t})")
    return float(f(s, t))


def theta_grad(f: InterpolationFn, s, t):
    """Partial derivatives (∂θ/∂s, ∂θ/∂t), analytic when available."""
    if f.grad is not None:
        return f.grad(s, t)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    h = 1e-7 * np.maximum(np.maximum(s, t), 1.0)
    ds = (f(s + h, t) - f(np.maximum(s - h, 0.0), t)) / (h + np.minimum(s, h))
    dt = (f(s, t + h) - f(s, np.maximum(t - h, 0.0))) / (h + np.minimum(t, h))
    return ds, dt


@dataclass
class PropertyViolation:
    prop: str
    witness: tuple
    detail: str


@dataclass
class PropertyReport:
    """Outcome of sample-based interpolation axiom checks."""

    checked: list
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_interpolation(f: InterpolationFn, n_samples: int = 10_000,
                           seed: int = 0, tol: float = 1e-9) -> PropertyReport:
    """Sample-check symmetry, positivity, normalization, monotonicity,
    homogeneity, concavity, and domination by the arithmetic mean on
    points drawn uniformly from [0, 10]²."""
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    s = rng.uniform(0.0, 10.0, n_samples)
    t = rng.uniform(0.0, 10.0, n_samples)
    s2 = rng.uniform(0.0, 10.0, n_samples)
    t2 = rng.uniform(0.0, 10.0, n_samples)
    lam = rng.uniform(0.1, 10.0, n_samples)
    v = np.asarray(f(s, t), dtype=float)

    violations = []

    def record(prop, mask, values, detail_fmt):
        if np.any(mask):
            k = int(np.argmax(mask))
            violations.append(PropertyViolation(
                prop, (float(s[k]), float(t[k])),
                detail_fmt.format(values[k] if values is not None else "")))

    record("symmetry", np.abs(v - f(t, s)) > tol, np.abs(v - f(t, s)),
           "theta(s,t) - theta(t,s) = {}")
    pos_mask = (s > 0) & (t > 0)
    record("positivity", pos_mask & (v <= 0), v, "theta = {} on open quadrant")
    if abs(float(f(1.0, 1.0)) - 1.0) > tol:
        violations.append(PropertyViolation("normalization", (1.0, 1.0),
                                            f"theta(1,1) = {float(f(1.0, 1.0))}"))
    lo = np.minimum(s, s2)
    hi = np.maximum(s, s2)
    mono = np.asarray(f(lo, t)) - np.asarray(f(hi, t))
    record("monotonicity", mono > tol, mono, "theta decreased by {} when s grew")
    hom = np.abs(np.asarray(f(lam * s, lam * t)) - lam * v)
    record("homogeneity", hom > tol * np.maximum(lam * v, 1.0), hom,
           "1-homogeneity off by {}")
    mid = np.asarray(f(0.5 * (s + s2), 0.5 * (t + t2)))
    conc = 0.5 * (v + np.asarray(f(s2, t2))) - mid
    record("concavity", conc > tol, conc, "midpoint concavity violated by {}")
    dom = v - 0.5 * (s + t)
    record("arithmetic_bound", dom > tol, dom, "exceeds arithmetic mean by {}")

    checked = ["symmetry", "positivity", "normalization", "monotonicity",
               "homogeneity", "concavity", "arithmetic_bound"]
    return PropertyReport(checked, violations)

"""Least-action transport metric on distributions over a weighted graph.

The squared distance between two probability vectors is the minimal
integrated kinetic energy ½Σ σ²/θ(p_i,p_j)·q_ij over discrete paths
satisfying the graph continuity equation.  The convex program is solved
in momentum coordinates by a primal-dual (Chambolle-Pock) iteration
whose only nonlinearity is the perspective prox; many endpoint pairs
are solved simultaneously by stacking a batch axis.

For two nodes the metric has the closed form
(1/√q)·∫ θ(a,1−a)^{−1/2} da, evaluated here by adaptive quadrature with
a square-root substitution at vanishing endpoints, and geodesics solve
ṙ = √q · d · √θ(r, 1−r).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.optimize import brentq

from .errors import BoundaryAnchorsError, DivergentIntegralError, DomainError
from .graph import WeightedGraph, graph_validate, perspective_energy_array
from .interpolation import InterpolationFn
from .measures import simplex_min_margin, simplex_to_distribution
from .prox import prox_graph_term


@dataclass
class SolverConfig:
    """Primal-dual iteration controls.

    Steps are diagonally preconditioned from the row/column sums of the
    constraint operator; ``tau_primal``/``tau_dual`` multiply the
    preconditioned primal/dual steps (both default to 1).  Iterations
    are deterministic for a fixed config.
    """

    max_iter: int = 20000
    tol: float = 1e-7
    tau_primal: float | None = None
    tau_dual: float | None = None
    check_every: int = 100


@dataclass
class GraphPath:
    """Discrete solution of the graph continuity equation.

    ``states[t]`` are distributions at times[t]; ``momenta[t]`` is the
    momentum matrix on step t, with θ evaluated at the midpoint
    (states[t]+states[t+1])/2 in the action.
    """

    times: np.ndarray
    states: np.ndarray
    momenta: np.ndarray
    converged: bool = True
    residual: float = 0.0

    def continuity_residual(self, g: WeightedGraph) -> float:
        dt = np.diff(self.times)[:, None]
        div = -0.5 * ((self.momenta - self.momenta.transpose(0, 2, 1)) * g.q).sum(-1)
        res = (self.states[1:] - self.states[:-1]) / dt + div
        return float(np.abs(res).max())

    def action(self, g: WeightedGraph, f: InterpolationFn) -> float:
        dt = np.diff(self.times)
        pm = 0.5 * (self.states[:-1] + self.states[1:])
        th = np.asarray(f(pm[:, :, None], pm[:, None, :]), dtype=float)
        q = g.q.copy()
        np.fill_diagonal(q, 0.0)
        per = perspective_energy_array(self.momenta, th)
        per = np.where(q[None, :, :] > 0, per, 0.0)
        return float((0.5 * (per * q).sum(axis=(1, 2)) * dt).sum())


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of the last axis onto the probability simplex."""
    n = v.shape[-1]
    u = np.sort(v, axis=-1)[..., ::-1]
    css = np.cumsum(u, axis=-1) - 1.0
    idx = np.arange(1, n + 1)
    cond = u - css / idx > 0
    rho = n - 1 - np.argmax(cond[..., ::-1], axis=-1)
    tau = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1)
    return np.maximum(v - tau, 0.0)


def _batch_graph_flow(q: np.ndarray, f: InterpolationFn, P0: np.ndarray,
                      P1: np.ndarray, T: int, cfg: SolverConfig):
    """Solve the graph Benamou-Brenier program for a batch of endpoint
    pairs.  Returns (p, sigma, converged, residual) arrays."""
    B, n = P0.shape
    dt = 1.0 / T
    mask = (q > 0) & ~np.eye(n, dtype=bool)
    w = np.where(mask, dt * q / 2.0, 0.0)

    def div(sg):
        return -0.5 * ((sg - sg.transpose(0, 1, 3, 2)) * q).sum(-1)

    def k_cty(p, sg):
        return p[:, 1:] - p[:, :-1] + dt * div(sg)

    def midpoints(p):
        return 0.5 * (p[:, :-1] + p[:, 1:])

    def adjoint(phi, ys, yr, ym):
        ap = np.zeros((B, T + 1, n))
        ap[:, 1:] += phi
        ap[:, :-1] -= phi
        srow = ys.sum(axis=3)
        rcol = yr.sum(axis=2)
        ap[:, :-1] += 0.5 * (srow + rcol)
        ap[:, 1:] += 0.5 * (srow + rcol)
        asg = ym + dt * 0.5 * (phi[:, :, None, :] - phi[:, :, :, None]) * q
        asg *= mask
        return ap, asg

    # diagonal preconditioning: steps are reciprocals of the absolute
    # row/column sums of the constraint operator.
    gamma_p = cfg.tau_primal if cfg.tau_primal is not None else 0.25
    gamma_d = cfg.tau_dual if cfg.tau_dual is not None else 4.0
    # the density step must be uniform inside a time slice so that the
    # simplex projection is the exact prox in the step-weighted norm
    deg_max = float(mask.sum(axis=1).max())
    c_t = np.full(T + 1, 2.0)
    c_t[0] = c_t[T] = 1.0
    ivl_t = np.full(T + 1, 2.0)
    ivl_t[0] = ivl_t[T] = 1.0
    tau_pp = (gamma_p / (c_t + ivl_t * deg_max))[:, None]              # (T+1,1)
    tau_ps = np.where(mask, gamma_p / (1.0 + dt * q), 0.0)             # (n,n)
    qrow = np.where(mask, q, 0.0).sum(axis=1)
    sd_cty = gamma_d / (2.0 + dt * qrow)                               # (n,)
    tau_d = gamma_d / 1.0                                              # copies

    tgrid = np.linspace(0.0, 1.0, T + 1)[None, :, None]
    p = P0[:, None, :] * (1 - tgrid) + P1[:, None, :] * tgrid
    # feasible start: minimal-potential momenta solving the continuity
    # equation for the linear density path, sigma = grad(psi) with
    # L_q psi = -dp/dt and L_q the unit-interpolation Laplacian.
    Lq = np.diag(np.where(mask, q, 0.0).sum(axis=1)) - np.where(mask, q, 0.0)
    Lq_pinv = np.linalg.pinv(Lq, rcond=1e-12)
    dp = (p[:, 1:] - p[:, :-1]) / dt     # (B,T,n), constant over t here
    psi = np.einsum("ij,btj->bti", Lq_pinv, -dp)
    sg = (psi[:, :, None, :] - psi[:, :, :, None]) * mask
    phi = np.zeros((B, T, n))
    ys = np.zeros((B, T, n, n))
    yr = np.zeros_like(ys)
    ym = np.zeros_like(ys)
    p_bar, sg_bar = p.copy(), sg.copy()

    w_over_td = np.broadcast_to(w / tau_d, (B, T, n, n))
    converged = np.zeros(B, dtype=bool)
    residual = np.full(B, np.inf)
    prev = None

    def batch_action(p, sg):
        pm = midpoints(p)
        th = np.asarray(f(np.maximum(pm[:, :, :, None], 0.0),
                          np.maximum(pm[:, :, None, :], 0.0)), dtype=float)
        per = perspective_energy_array(sg, th)
        per = np.where(mask, per, 0.0)
        return dt * 0.5 * (per * q).sum(axis=(1, 2, 3))

    def project_feasible(p, sg):
        # minimal-potential momentum correction restoring exact discrete
        # continuity for the current densities
        resid = k_cty(p, sg) / dt
        psi_c = np.einsum("ij,btj->bti", Lq_pinv, -resid)
        return sg + (psi_c[:, :, None, :] - psi_c[:, :, :, None]) * mask

    it = 0
    while it < cfg.max_iter:
        it += 1
        # dual ascent on the continuity multiplier, Moreau prox on copies
        phi = phi + sd_cty * k_cty(p_bar, sg_bar)
        pm = midpoints(p_bar)
        vs = ys + tau_d * pm[:, :, :, None]
        vr = yr + tau_d * pm[:, :, None, :]
        vm = ym + tau_d * sg_bar
        m, s, r, _ = prox_graph_term(vm / tau_d, vs / tau_d, vr / tau_d,
                                     w_over_td, f)
        ys = np.where(mask, vs - tau_d * s, 0.0)
        yr = np.where(mask, vr - tau_d * r, 0.0)
        ym = np.where(mask, vm - tau_d * m, 0.0)

        ap, asg = adjoint(phi, ys, yr, ym)
        p_new = p - tau_pp * ap
        p_new[:, 1:T] = _project_simplex(p_new[:, 1:T])
        p_new[:, 0] = P0
        p_new[:, T] = P1
        sg_new = (sg - tau_ps * asg) * mask
        p_bar = 2.0 * p_new - p
        sg_bar = 2.0 * sg_new - sg
        p, sg = p_new, sg_new

        if (it + 1) % cfg.check_every == 0:
            prev = (p.copy(), sg.copy(), phi.copy(), ys.copy(), yr.copy(), ym.copy())
        if it % cfg.check_every == 0 or it == cfg.max_iter:
            if prev is None:
                continue
            # fixed-point displacement of one iteration; zero exactly at
            # a saddle point of the preconditioned iteration
            axes_p, axes_s = (1, 2), (1, 2, 3)
            disp = np.maximum.reduce([
                np.abs(p - prev[0]).max(axis=axes_p),
                np.abs(sg - prev[1]).max(axis=axes_s),
                np.abs(phi - prev[2]).max(axis=axes_p) * dt,
                np.abs(ys - prev[3]).max(axis=axes_s),
                np.abs(yr - prev[4]).max(axis=axes_s),
                np.abs(ym - prev[5]).max(axis=axes_s),
            ])
            scale = 1.0 + np.maximum.reduce([
                np.abs(phi).max(axis=axes_p) * dt,
                np.abs(ym).max(axis=axes_s),
            ])
            residual = disp / scale
            converged = residual <= cfg.tol
            if converged.all():
                break
    sg = project_feasible(p, sg)
    return p, sg, converged, residual


def wg_dynamic_batch(g: WeightedGraph, f: InterpolationFn, P0, P1,
                     T: int = 64, cfg: SolverConfig | None = None):
    """Distances for a batch of endpoint pairs (rows of P0, P1)."""
    graph_validate(g)
    cfg = cfg or SolverConfig()
    P0 = np.atleast_2d(np.asarray(P0, dtype=float))
    P1 = np.atleast_2d(np.asarray(P1, dtype=float))
    p, sg, conv, res = _batch_graph_flow(g.q, f, P0, P1, T, cfg)
    times = np.linspace(0.0, 1.0, T + 1)
    dists = np.empty(P0.shape[0])
    paths = []
    for b in range(P0.shape[0]):
        path = GraphPath(times, p[b], sg[b], bool(conv[b]), float(res[b]))
        a = path.action(g, f)
        dists[b] = math.sqrt(max(a, 0.0)) if np.isfinite(a) else math.inf
        paths.append(path)
    return dists, paths


def wg_dynamic(g: WeightedGraph, f: InterpolationFn, p0, p1, T: int = 64,
               cfg: SolverConfig | None = None):
    """Dynamic graph distance between two distributions with the
    minimizing discrete path.  Not converging within the budget is
    reported on the path, not raised."""
    if T < 2:
        raise DomainError("need at least 2 time steps")
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    dists, paths = wg_dynamic_batch(g, f, p0[None, :], p1[None, :], T, cfg)
    return float(dists[0]), paths[0]


# -- two-node closed forms --------------------------------------------------

def _two_node_integrand(f: InterpolationFn):
    def grand(a):
        th = float(f(a, 1.0 - a))
        if th <= 0.0:
            return math.inf
        return 1.0 / math.sqrt(th)
    return grand


def wg_two_node(f: InterpolationFn, q: float, a0: float, a1: float,
                rel_tol: float = 1e-10) -> float:
    """Two-node distance (1/√q)·∫_{a0}^{a1} θ(a, 1−a)^{−1/2} da.

    Endpoints at 0 or 1 where θ vanishes are handled by the
    substitution a = u² (resp. 1−a = u²) on a 1e-3 collar, which removes
    the integrable algebraic singularity.
    """
    if q <= 0:
        raise DomainError("edge weight must be positive")
    if not (0.0 <= a0 <= 1.0 and 0.0 <= a1 <= 1.0):
        raise DomainError("endpoints must lie in [0, 1]")
    lo, hi = min(a0, a1), max(a0, a1)
    if lo == hi:
        return 0.0
    grand = _two_node_integrand(f)
    cut = 1e-3
    pieces = []
    left = lo
    if lo == 0.0 and float(f(0.0, 1.0)) == 0.0:
        upper = min(cut, hi)
        pieces.append(("sqrt_left", 0.0, upper))
        left = upper
    right = hi
    if hi == 1.0 and float(f(1.0, 0.0)) == 0.0 and right > left:
        lower = max(1.0 - cut, left)
        pieces.append(("sqrt_right", lower, 1.0))
        right = lower
    if right > left:
        pieces.append(("plain", left, right))

    total = 0.0
    for kind, a, b in pieces:
        if kind == "plain":
            val, err = integrate.quad(grand, a, b, epsabs=1e-13, epsrel=rel_tol,
                                      limit=200)
        elif kind == "sqrt_left":
            val, err = integrate.quad(lambda u: 2.0 * u * grand(u * u),
                                      math.sqrt(a), math.sqrt(b),
                                      epsabs=1e-13, epsrel=rel_tol, limit=200)
        else:
            val, err = integrate.quad(lambda u: 2.0 * u * grand(1.0 - u * u),
                                      math.sqrt(1.0 - b), math.sqrt(1.0 - a),
                                      epsabs=1e-13, epsrel=rel_tol, limit=200)
        if not math.isfinite(val) or (val > 0 and err > 1e-4 * max(val, 1.0)):
            raise DivergentIntegralError(
                f"two-node integral did not converge on [{a}, {b}] "
                f"(value {val}, error estimate {err})")
        total += val
    return total / math.sqrt(q)


def simplex_distance(g: WeightedGraph, f: InterpolationFn, r0, r1,
                     T: int = 64, cfg: SolverConfig | None = None) -> float:
    """Distance between simplex points under the graph metric; exact
    quadrature for two nodes, dynamic solver otherwise."""
    r0 = np.atleast_1d(np.asarray(r0, dtype=float))
    r1 = np.atleast_1d(np.asarray(r1, dtype=float))
    if g.n == 2:
        return wg_two_node(f, float(g.q[0, 1]), float(r0[0]), float(r1[0]))
    d, _ = wg_dynamic(g, f, simplex_to_distribution(r0),
                      simplex_to_distribution(r1), T, cfg)
    return d


def simplex_distance_matrix(g: WeightedGraph, f: InterpolationFn, points,
                            T: int = 64, cfg: SolverConfig | None = None) -> np.ndarray:
    """Pairwise simplex distances; all pairs are solved in one batch for
    n >= 3 so the values are deterministic and reusable."""
    pts = [np.atleast_1d(np.asarray(r, dtype=float)) for r in points]
    m = len(pts)
    out = np.zeros((m, m))
    if g.n == 2:
        q01 = float(g.q[0, 1])
        for i in range(m):
            for j in range(i + 1, m):
                out[i, j] = out[j, i] = wg_two_node(
                    f, q01, float(pts[i][0]), float(pts[j][0]))
        return out
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    if not pairs:
        return out
    P0 = np.array([simplex_to_distribution(pts[i]) for i, _ in pairs])
    P1 = np.array([simplex_to_distribution(pts[j]) for _, j in pairs])
    dists, _ = wg_dynamic_batch(g, f, P0, P1, T, cfg)
    for (i, j), d in zip(pairs, dists):
        out[i, j] = out[j, i] = d
    return out


# -- two-node geodesics ------------------------------------------------------

def two_node_geodesic(f: InterpolationFn, q: float, r_start: float,
                      r_end: float, steps: int = 64) -> GraphPath:
    """Constant-speed geodesic on the two-node simplex, via the speed
    equation ṙ = √q·d·√θ(r, 1−r); falls back to inverting the arclength
    quadrature when the explicit integrator stalls at a degenerate
    boundary endpoint."""
    from scipy.integrate import solve_ivp

    if not (0.0 <= r_start <= 1.0 and 0.0 <= r_end <= 1.0):
        raise DomainError("endpoints must lie in [0, 1]")
    times = np.linspace(0.0, 1.0, steps + 1)
    if r_start == r_end:
        states = np.column_stack([np.full(steps + 1, r_start),
                                  np.full(steps + 1, 1.0 - r_start)])
        return GraphPath(times, states, np.zeros((steps, 2, 2)))

    lo, hi = min(r_start, r_end), max(r_start, r_end)
    interior = np.linspace(lo, hi, 257)[1:-1]
    if np.any(np.asarray(f(interior, 1.0 - interior)) <= 0.0):
        raise DomainError("theta vanishes inside the interval; no geodesic speed")
    dist = wg_two_node(f, q, r_start, r_end)
    sign = 1.0 if r_end >= r_start else -1.0

    def rhs(t, y):
        r = min(max(y[0], 0.0), 1.0)
        return [sign * math.sqrt(q) * dist * math.sqrt(max(float(f(r, 1.0 - r)), 0.0))]

    sol = solve_ivp(rhs, (0.0, 1.0), [r_start], method="RK45",
                    rtol=1e-12, atol=1e-14, dense_output=True)
    use_fallback = (not sol.success
                    or abs(float(sol.sol(1.0)[0]) - r_end) > 1e-8)
    if use_fallback:
        # arclength inversion: r(t) solves F(r) = t·d with
        # F(r) = signed two-node distance from r_start.
        def r_of_t(t):
            if t <= 0.0:
                return r_start
            if t >= 1.0:
                return r_end
            target = t * dist
            return brentq(lambda r: wg_two_node(f, q, r_start, r) - target,
                          lo, hi, xtol=1e-13)
        rvals = np.array([r_of_t(t) for t in times])
    else:
        rvals = np.array([float(sol.sol(t)[0]) for t in times])
        rvals[0], rvals[-1] = r_start, float(sol.sol(1.0)[0])
    rvals = np.clip(rvals, 0.0, 1.0)
    states = np.column_stack([rvals, 1.0 - rvals])
    dt = np.diff(times)
    momenta = np.zeros((steps, 2, 2))
    drdt = np.diff(rvals) / dt
    momenta[:, 0, 1] = drdt / q
    momenta[:, 1, 0] = -drdt / q
    return GraphPath(times, states, momenta)


def regularized_geodesic(path, a: float, s0, s1):
    """Pull a simplex path toward the segment between two interior
    anchors: γᵃ_t = (1−a)γ_t + a((1−t)s0 + t·s1), which keeps every
    point at least a·c away from the boundary where c is the anchors'
    margin."""
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))
    s1 = np.atleast_1d(np.asarray(s1, dtype=float))
    if simplex_min_margin(s0) <= 0 or simplex_min_margin(s1) <= 0:
        raise BoundaryAnchorsError("anchors must be strictly interior")
    pts = [np.atleast_1d(np.asarray(r, dtype=float)) for r in path]
    m = len(pts)
    ts = np.linspace(0.0, 1.0, m) if m > 1 else np.array([0.0])
    return [(1.0 - a) * r + a * ((1.0 - t) * s0 + t * s1)
            for r, t in zip(pts, ts)]

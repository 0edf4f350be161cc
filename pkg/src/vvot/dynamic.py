"""Dynamic transport distance for vector-valued measures on a 1-D grid.

The squared distance is the least action over discrete space-time
fields (ρ, m, σ): cell masses, staggered face momenta, and per-cell
mutation momenta.  The action is a sum of perspective terms

    Δt · m²/θ(ρ_left, ρ_right)          per face, species, step
    Δt · ½ σ_ij²/θ(ρ_i, ρ_j) q_ij       per cell, species pair, step

with densities taken at time midpoints, subject to the discrete
continuity equation with no-flux spatial boundaries and exact endpoint
densities.  The same diagonally preconditioned primal-dual iteration as
the graph solver does the work; every slice of ρ is projected onto the
probability simplex, which the continuity equation implies.

Atoms are rasterized by nearest-cell binning followed by a 3-cell hat
kernel, so reported distances carry an O(Δx) bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (BoundaryAtomError, DomainError, MassMismatchError,
                     SingularLaplacianError)
from .graph import (WeightedGraph, graph_validate, laplacian_pinv_apply,
                    perspective_energy_array, weighted_laplacian)
from .graph_metric import SolverConfig, _project_simplex
from .interpolation import InterpolationFn
from .measures import DiscreteVectorMeasure, simplex_to_distribution
from .prox import prox_graph_term


@dataclass(frozen=True)
class GridConfig:
    x_min: float
    x_max: float
    cells: int

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.cells

    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.cells) + 0.5) * self.dx

    @staticmethod
    def from_json(obj: dict) -> "GridConfig":
        return GridConfig(float(obj["x_min"]), float(obj["x_max"]),
                          int(obj["cells"]))


@dataclass
class DynamicSolution:
    """Space-time fields of the dynamic solver.

    ``rho``: (T+1, C, n) cell masses; ``m``: (T, C+1, n) face momenta
    including the zero no-flux boundary faces; ``sigma``: (T, C, n, n)
    mutation momenta.  Interpolated densities in the action use time
    midpoints (rho[t] + rho[t+1])/2.
    """

    grid: GridConfig
    times: np.ndarray
    rho: np.ndarray
    m: np.ndarray
    sigma: np.ndarray
    converged: bool = True
    residual: float = 0.0
    newton_failures: int = 0


def rasterize(mu: DiscreteVectorMeasure, grid: GridConfig) -> np.ndarray:
    """Bin atoms to nearest cells and mollify with the [1/4, 1/2, 1/4]
    hat; mass clipped at the domain edge stays in the edge cell."""
    if mu.dim != 1:
        raise NotImplementedError("spatial solver is one-dimensional")
    C = grid.cells
    out = np.zeros((C, mu.n_species))
    pos = (mu.x[:, 0] - grid.x_min) / grid.dx - 0.5
    nearest = np.clip(np.rint(pos).astype(int), 0, C - 1)
    for off, wt in ((-1, 0.25), (0, 0.5), (1, 0.25)):
        cells = np.clip(nearest + off, 0, C - 1)
        np.add.at(out, cells, wt * mu.w)
    return out


def _graph_div(sg: np.ndarray, q: np.ndarray) -> np.ndarray:
    return -0.5 * ((sg - sg.swapaxes(-1, -2)) * q).sum(-1)


def w_dynamic(g: WeightedGraph, f: InterpolationFn,
              mu: DiscreteVectorMeasure, nu: DiscreteVectorMeasure,
              grid: GridConfig, T: int = 32,
              cfg: SolverConfig | None = None):
    """Dynamic distance between two rasterized vector-valued measures.

    Returns (distance, DynamicSolution); non-convergence within the
    iteration budget is flagged on the solution.
    """
    graph_validate(g)
    if T < 8:
        raise DomainError("need at least 8 time steps")
    cfg = cfg or SolverConfig()
    n = g.n
    if mu.n_species != n or nu.n_species != n:
        raise DomainError("species count does not match the graph")
    rho0 = rasterize(mu, grid)
    rho1 = rasterize(nu, grid)
    if abs(rho0.sum() - rho1.sum()) > 1e-9 or abs(rho0.sum() - 1.0) > 1e-9:
        raise MassMismatchError(
            f"rasterized masses {rho0.sum()} vs {rho1.sum()}")

    q = g.q.copy()
    np.fill_diagonal(q, 0.0)
    C = grid.cells
    dt = 1.0 / T
    dx = grid.dx
    mask = (q > 0)
    w_face = dt
    w_graph = np.where(mask, dt * q / 2.0, 0.0)

    def spatial_div(Mint):
        Mfull = np.zeros((T, C + 1, n))
        Mfull[:, 1:C] = Mint
        return Mfull[:, 1:] - Mfull[:, :-1]

    def k_cty(rho, Mint, sg):
        return (rho[1:] - rho[:-1] + (dt / dx) * spatial_div(Mint)
                + dt * _graph_div(sg, q))

    def midpoints(rho):
        return 0.5 * (rho[:-1] + rho[1:])

    def adjoint(phi, ysl, ysr, ymf, ys, yr, ym):
        a_rho = np.zeros((T + 1, C, n))
        a_rho[1:] += phi
        a_rho[:-1] -= phi
        half = np.zeros((T, C, n))
        half[:, :C - 1] += 0.5 * ysl
        half[:, 1:] += 0.5 * ysr
        half += 0.5 * (ys.sum(axis=3) + yr.sum(axis=2))
        a_rho[:-1] += half
        a_rho[1:] += half
        a_M = (dt / dx) * (phi[:, :C - 1] - phi[:, 1:]) + ymf
        a_sg = ym + dt * 0.5 * (phi[:, :, None, :] - phi[:, :, :, None]) * q
        a_sg *= mask
        return a_rho, a_M, a_sg

    # preconditioned steps
    gamma_p = cfg.tau_primal if cfg.tau_primal is not None else 0.25
    gamma_d = cfg.tau_dual if cfg.tau_dual is not None else 4.0
    deg_max = float(mask.sum(axis=1).max())
    c_t = np.full(T + 1, 2.0)
    c_t[0] = c_t[T] = 1.0
    ivl_t = np.full(T + 1, 2.0)
    ivl_t[0] = ivl_t[T] = 1.0
    tau_rho = (gamma_p / (c_t + ivl_t * (1.0 + deg_max)))[:, None, None]
    tau_M = gamma_p / (1.0 + 2.0 * dt / dx)
    tau_sg = np.where(mask, gamma_p / (1.0 + dt * q), 0.0)
    qrow = np.where(mask, q, 0.0).sum(axis=1)
    sd_cty = gamma_d / (2.0 + 2.0 * dt / dx + dt * qrow)
    tau_d = gamma_d

    tgrid = np.linspace(0.0, 1.0, T + 1)[:, None, None]
    rho = rho0[None] * (1 - tgrid) + rho1[None] * tgrid
    Mint = np.zeros((T, C - 1, n))
    sg = np.zeros((T, C, n, n))
    phi = np.zeros((T, C, n))
    ysl = np.zeros((T, C - 1, n))
    ysr = np.zeros_like(ysl)
    ymf = np.zeros_like(ysl)
    ys = np.zeros((T, C, n, n))
    yr = np.zeros_like(ys)
    ym = np.zeros_like(ys)
    rho_b, M_b, sg_b = rho.copy(), Mint.copy(), sg.copy()

    wf_over = w_face / tau_d
    wg_over = np.broadcast_to(w_graph / tau_d, (T, C, n, n))
    converged = False
    residual = math.inf
    newton_failures = 0
    prev = None

    from ._kernels import HAVE_NUMBA, spatial_pdhg
    if HAVE_NUMBA and f.kind in ("arithmetic", "geometric"):
        code = 0 if f.kind == "arithmetic" else 1
        tau_rho_t = np.ascontiguousarray(tau_rho[:, 0, 0])
        args = (code, q, mask, dt, dx, rho0, rho1, tau_d,
                rho, Mint, sg, phi, ysl, ysr, ymf, ys, yr, ym,
                rho_b, M_b, sg_b, tau_rho_t, tau_M, tau_sg, sd_cty,
                w_face, w_graph)

        def run(k):
            spatial_pdhg(*args[:8], k, *args[8:])

        it = 0
        while it < cfg.max_iter:
            chunk = min(cfg.check_every, cfg.max_iter - it)
            if chunk > 1:
                run(chunk - 1)
            prev = (rho.copy(), Mint.copy(), sg.copy(), phi.copy())
            run(1)
            it += chunk
            disp = max(np.abs(rho - prev[0]).max(),
                       np.abs(Mint - prev[1]).max(),
                       np.abs(sg - prev[2]).max(),
                       np.abs(phi - prev[3]).max() * dt)
            residual = disp / (1.0 + abs(phi).max() * dt)
            converged = residual <= cfg.tol
            if converged:
                break
        return _finish(sol_args=(grid, T, rho, Mint, sg, converged,
                                 residual, newton_failures),
                       g=g, f=f, C=C, mask=mask)

    it = 0
    while it < cfg.max_iter:
        it += 1
        phi = phi + sd_cty * k_cty(rho_b, M_b, sg_b)
        pm = midpoints(rho_b)
        # face terms
        vsl = ysl + tau_d * pm[:, :C - 1]
        vsr = ysr + tau_d * pm[:, 1:]
        vmf = ymf + tau_d * M_b
        mf, sl, sr, fl1 = prox_graph_term(vmf / tau_d, vsl / tau_d,
                                          vsr / tau_d, wf_over, f)
        ysl = vsl - tau_d * sl
        ysr = vsr - tau_d * sr
        ymf = vmf - tau_d * mf
        # graph terms
        vs = ys + tau_d * pm[:, :, :, None]
        vr = yr + tau_d * pm[:, :, None, :]
        vm = ym + tau_d * sg_b
        mg, sgg, rgg, fl2 = prox_graph_term(vm / tau_d, vs / tau_d,
                                            vr / tau_d, wg_over, f)
        ys = np.where(mask, vs - tau_d * sgg, 0.0)
        yr = np.where(mask, vr - tau_d * rgg, 0.0)
        ym = np.where(mask, vm - tau_d * mg, 0.0)
        newton_failures += int(fl1.sum() + fl2.sum())

        a_rho, a_M, a_sg = adjoint(phi, ysl, ysr, ymf, ys, yr, ym)
        rho_new = rho - tau_rho * a_rho
        flat = rho_new[1:T].reshape(T - 1, C * n)
        rho_new[1:T] = _project_simplex(flat).reshape(T - 1, C, n)
        rho_new[0] = rho0
        rho_new[T] = rho1
        M_new = Mint - tau_M * a_M
        sg_new = (sg - tau_sg * a_sg) * mask
        rho_b = 2.0 * rho_new - rho
        M_b = 2.0 * M_new - Mint
        sg_b = 2.0 * sg_new - sg
        rho, Mint, sg = rho_new, M_new, sg_new

        if (it + 1) % cfg.check_every == 0:
            prev = (rho.copy(), Mint.copy(), sg.copy(), phi.copy())
        if it % cfg.check_every == 0 and prev is not None:
            disp = max(np.abs(rho - prev[0]).max(),
                       np.abs(Mint - prev[1]).max(),
                       np.abs(sg - prev[2]).max(),
                       np.abs(phi - prev[3]).max() * dt)
            scale = 1.0 + abs(phi).max() * dt
            residual = disp / scale
            converged = residual <= cfg.tol
            if converged:
                break

    return _finish(sol_args=(grid, T, rho, Mint, sg, converged, residual,
                             newton_failures), g=g, f=f, C=C, mask=mask)


def _finish(sol_args, g, f, C, mask):
    grid, T, rho, Mint, sg, converged, residual, newton_failures = sol_args
    n = rho.shape[2]
    # zero momenta in vacuum so the perspective action is finite
    pm = 0.5 * (rho[:-1] + rho[1:])
    th_face = np.asarray(f(pm[:, :C - 1], pm[:, 1:]), dtype=float)
    Mint = np.where(th_face > 1e-14, Mint, 0.0)
    th_pair = np.asarray(f(pm[:, :, :, None], pm[:, :, None, :]), dtype=float)
    sg = np.where((th_pair > 1e-14) & mask, sg, 0.0)

    Mfull = np.zeros((T, C + 1, n))
    Mfull[:, 1:C] = Mint
    sol = DynamicSolution(grid, np.linspace(0.0, 1.0, T + 1), rho, Mfull, sg,
                          converged, float(residual), newton_failures)
    act = action(sol, g, f)
    dist = math.sqrt(max(act, 0.0)) if math.isfinite(act) else math.inf
    return dist, sol


def action(sol, g: WeightedGraph, f: InterpolationFn) -> float:
    """Integrated kinetic energy of a solution object; contributions
    with vanishing interpolated density and nonzero momentum are +∞."""
    if hasattr(sol, "phase_action"):
        return sol.phase_action()
    q = g.q.copy()
    np.fill_diagonal(q, 0.0)
    rho, M, sg = sol.rho, sol.m, sol.sigma
    T = rho.shape[0] - 1
    dt = np.diff(sol.times)
    pm = 0.5 * (rho[:-1] + rho[1:])
    th_face = np.asarray(f(pm[:, :-1], pm[:, 1:]), dtype=float)
    face = perspective_energy_array(M[:, 1:-1], th_face)
    th_pair = np.asarray(f(pm[:, :, :, None], pm[:, :, None, :]), dtype=float)
    per = perspective_energy_array(sg, th_pair)
    per = np.where(q[None, None] > 0, per, 0.0)
    spatial = face.sum(axis=(1, 2))
    graph = 0.5 * (per * q).sum(axis=(1, 2, 3))
    if np.isinf(spatial).any() or np.isinf(graph).any():
        return math.inf
    return float(((spatial + graph) * dt).sum())


def continuity_residual(sol: DynamicSolution, g: WeightedGraph,
                        f: InterpolationFn | None = None) -> float:
    """Max norm of the discrete continuity defect, in density-rate units
    (the mass-rate defect divided by Δx)."""
    q = g.q.copy()
    np.fill_diagonal(q, 0.0)
    dt = np.diff(sol.times)[:, None, None]
    dx = sol.grid.dx
    rate = (sol.rho[1:] - sol.rho[:-1]) / dt
    div_x = (sol.m[:, 1:] - sol.m[:, :-1]) / dx
    div_g = _graph_div(sol.sigma, q)
    return float(np.abs(rate + div_x + div_g).max() / dx)


# -- two-node candidate path -------------------------------------------------

@dataclass
class TwoNodeCandidatePath:
    """Transport-then-mutate candidate for the two-atom instances: both
    atoms move to the origin with constant speed on [0, t0], then the
    species balance follows the constant-speed two-node geodesic
    reparametrized to [t0, 1].  Both phases have constant kinetic
    energy, so the action is a²/t0 + d²/(1−t0) exactly."""

    times: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    r: np.ndarray
    t0: float
    a: float
    mutation_distance: float

    def phase_action(self) -> float:
        t0 = self.t0
        act = 0.0
        if self.a > 0:
            act += self.a ** 2 / t0
        if self.mutation_distance > 0:
            act += self.mutation_distance ** 2 / (1.0 - t0)
        return act


def two_node_candidate_path(f: InterpolationFn, q: float, a: float, b: float,
                            t0: float, T: int = 32) -> TwoNodeCandidatePath:
    """Explicit feasible path from [½δ₋ₐ, ½δₐ] to [bδ₀, (1−b)δ₀]."""
    from .graph_metric import two_node_geodesic, wg_two_node

    if not (0.0 < t0 < 1.0):
        raise DomainError("t0 must lie in (0, 1)")
    d = wg_two_node(f, q, 0.5, b)
    times = np.unique(np.concatenate([np.linspace(0.0, 1.0, T + 1), [t0]]))
    x1 = np.where(times <= t0, (times - t0) * a / t0, 0.0)
    x2 = np.where(times <= t0, (t0 - times) * a / t0, 0.0)
    if d > 0:
        geo = two_node_geodesic(f, q, 0.5, b, steps=max(T, 32))
        s = np.clip((times - t0) / (1.0 - t0), 0.0, 1.0)
        r = np.interp(s, geo.times, geo.states[:, 0])
    else:
        r = np.full_like(times, 0.5)
    r[times <= t0] = 0.5
    return TwoNodeCandidatePath(times, x1, x2, r, t0, a, d)


def optimal_switch_time(a: float, d: float) -> float:
    """Minimizer of a²/t + d²/(1−t): t = a/(a+d)."""
    if a == 0.0:
        return 1e-9
    return a / (a + d)


# -- projection of lifted dynamics -------------------------------------------

def project_lifted_dynamics(atoms, w1, w2, g: WeightedGraph,
                            f: InterpolationFn, margin: float = 1e-6):
    """Push a single-time lifted configuration with velocities down to
    vector-valued fields, and compare kinetic energies.

    ``atoms``: list of (x, r, mass) with x an ℝᵈ point and r interior
    simplex coordinates; ``w1``: per-atom spatial velocities; ``w2``:
    per-atom simplex-coordinate velocities.  Returns a dict with the
    grouped locations, projected fields u, v, and both actions.
    """
    graph_validate(g)
    n = g.n
    xs = [np.atleast_1d(np.asarray(a[0], dtype=float)) for a in atoms]
    rs = [np.atleast_1d(np.asarray(a[1], dtype=float)) for a in atoms]
    masses = np.array([float(a[2]) for a in atoms])
    w1 = [np.atleast_1d(np.asarray(v, dtype=float)) for v in w1]
    w2 = [np.atleast_1d(np.asarray(v, dtype=float)) for v in w2]

    ps = [simplex_to_distribution(r) for r in rs]
    for p in ps:
        if p.min() < margin:
            raise BoundaryAtomError(f"atom distribution {p} below margin {margin}")

    # Xi maps simplex velocities to mean-zero node vectors
    def xi(v):
        return np.concatenate([v, [-v.sum()]])

    # per-atom potential: B(p) (Xi psi) = Xi w2
    grads = []
    tangent_energy = []
    for p, v2 in zip(ps, w2):
        B = weighted_laplacian(g, f, p)
        try:
            phi = laplacian_pinv_apply(B, xi(v2))
        except Exception as exc:
            raise SingularLaplacianError(str(exc)) from exc
        grad = phi[None, :] - phi[:, None]
        grads.append(grad)
        th = np.asarray(f(p[:, None], p[None, :]), dtype=float)
        qq = g.q.copy()
        np.fill_diagonal(qq, 0.0)
        tangent_energy.append(0.5 * float((grad * grad * th * qq).sum()))

    action_before = float(sum(
        m * (float(v1 @ v1) + te)
        for m, v1, te in zip(masses, w1, tangent_energy)))

    # group atoms sharing a spatial location
    groups = {}
    for k, x in enumerate(xs):
        groups.setdefault(tuple(np.round(x, 12)), []).append(k)

    qq = g.q.copy()
    np.fill_diagonal(qq, 0.0)
    locations, u_list, v_list, rho_list = [], [], [], []
    action_after = 0.0
    for key, idx in groups.items():
        mtot = masses[idx].sum()
        lam = masses[idx] / mtot
        pbar = sum(l * ps[k] for l, k in zip(lam, idx))
        rho_j = mtot * pbar
        u = np.zeros((n, xs[idx[0]].shape[0]))
        for j in range(n):
            num = sum(l * ps[k][j] * w1[k] for l, k in zip(lam, idx))
            u[j] = num / pbar[j]
        th_bar = np.asarray(f(pbar[:, None], pbar[None, :]), dtype=float)
        num_v = np.zeros((n, n))
        for l, k in zip(lam, idx):
            p = ps[k]
            th = np.asarray(f(p[:, None], p[None, :]), dtype=float)
            num_v += l * grads[k] * th
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.where(th_bar > 0, num_v / np.where(th_bar > 0, th_bar, 1.0), 0.0)
        locations.append(np.array(key))
        u_list.append(u)
        v_list.append(v)
        rho_list.append(rho_j)
        spatial = float(sum(rho_j[j] * float(u[j] @ u[j]) for j in range(n)))
        graph_part = 0.5 * mtot * float((v * v * th_bar * qq).sum())
        action_after += spatial + graph_part

    return {
        "locations": locations,
        "rho": rho_list,
        "u": u_list,
        "v": v_list,
        "action_before": action_before,
        "action_after": float(action_after),
    }

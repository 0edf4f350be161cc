"""Proximal operators of the perspective integrands.

The dynamic solvers iterate a primal-dual splitting whose only
nonlinear ingredient is the prox of

    (m, y)   ->  ‖m‖²/y                          (spatial / plain term)
    (m, s, r) ->  ‖m‖²/θ(s, r)                    (graph term)

with a quadratic penalty of step ``tau``.  For the plain term the
stationarity conditions collapse to one cubic in y; for the arithmetic
mean the graph term reduces to the same cubic in s+r; for the geometric
mean the three-variable system reduces to a single bracketed scalar
equation; other interpolations fall back to a damped two-variable
Newton solve with a boundary candidate as safety net.

All functions are vectorized: inputs broadcast elementwise and ``tau``
may be an array (per-term weights folded into the step).
"""

from __future__ import annotations

import numpy as np

from ._kernels import (HAVE_NUMBA, cubic_roots_array, geometric_prox_array)
from .interpolation import InterpolationFn, theta_grad


def _solve_cubic(y_bar, two_tau, rhs):
    """Largest root of (y - ȳ)(y + 2τ)² = rhs on y > max(ȳ, 0), else the
    boundary value max(ȳ, 0).  Newton from above; g is convex increasing
    on the bracket so the iteration is monotone."""
    y_bar = np.asarray(y_bar, dtype=float)
    two_tau = np.asarray(two_tau, dtype=float)
    rhs = np.minimum(np.asarray(rhs, dtype=float), 1e150)
    y_bar = np.clip(y_bar, -1e100, 1e100)
    if HAVE_NUMBA:
        return cubic_roots_array(np.atleast_1d(y_bar),
                                 np.atleast_1d(two_tau), np.atleast_1d(rhs))
    lo = np.maximum(y_bar, 0.0)
    g_lo = (lo - y_bar) * (lo + two_tau) ** 2 - rhs
    has_root = g_lo < 0.0
    hi = lo + rhs / np.maximum(4.0 * (0.5 * two_tau) ** 2, 1e-300) + 1e-300
    y = np.where(has_root, hi, lo)
    for _ in range(80):
        g = (y - y_bar) * (y + two_tau) ** 2 - rhs
        gp = (y + two_tau) * (3.0 * y - 2.0 * y_bar + two_tau)
        step = g / np.where(gp > 0, gp, 1.0)
        y_new = np.where(has_root, np.maximum(y - step, lo), lo)
        if np.all(np.abs(y_new - y) <= 1e-15 * (1.0 + np.abs(y))):
            y = y_new
            break
        y = y_new
    return y


def prox_perspective_batch(m_bar, y_bar, tau):
    """Vectorized argmin of ‖m‖²/y + (1/2τ)(‖m−m̄‖² + (y−ȳ)²).

    Returns (m, y); when the cubic has no positive root the closure
    point (0, max(ȳ, 0)) is returned.
    """
    m_bar = np.asarray(m_bar, dtype=float)
    y_bar = np.asarray(y_bar, dtype=float)
    tau = np.asarray(tau, dtype=float)
    m2 = m_bar * m_bar
    y = _solve_cubic(y_bar, 2.0 * tau, tau * m2)
    m = m_bar * y / (y + 2.0 * tau)
    return m, y


def prox_perspective(x_bar, y_bar, tau):
    """Scalar-or-vector front end of the perspective prox.

    For vector x̄ the minimizer is radial: x = x̄ · y/(y + 2τ) with y
    solving the same cubic driven by ‖x̄‖².
    """
    x_arr = np.atleast_1d(np.asarray(x_bar, dtype=float))
    x2 = float(np.dot(x_arr, x_arr))
    y = float(_solve_cubic(float(y_bar), 2.0 * float(tau), float(tau) * x2))
    x = x_arr * y / (y + 2.0 * float(tau))
    if np.ndim(x_bar) == 0:
        return float(x[0]), y
    return x, y


def _prox_graph_arithmetic(m_bar, s_bar, r_bar, tau):
    # alpha = 2 m²/(s+r); stationarity gives equal shifts of s and r by
    # (u - ū)/2 where u = s + r solves (u - ū)(u + 4τ)² = 4τ m̄².  When
    # that point leaves the quadrant the optimum has s = 0 or r = 0 and
    # the remaining coordinate solves the same cubic family.
    u_bar = s_bar + r_bar
    m2 = m_bar * m_bar
    u = _solve_cubic(u_bar, 4.0 * tau, 4.0 * tau * m2)
    m = m_bar * u / (u + 4.0 * tau)
    delta = 0.5 * (u - u_bar)
    s, r = s_bar + delta, r_bar + delta
    inside = (s >= 0.0) & (r >= 0.0)
    if np.all(inside):
        return m, s, r

    def edge(other_bar, own_bar):
        # own coordinate pinned to 0; alpha = 2 m²/other
        o = _solve_cubic(other_bar, 4.0 * tau, 2.0 * tau * m2)
        me = m_bar * o / (o + 4.0 * tau)
        th = 0.5 * o
        pers = np.where(th > 0, me * me / np.where(th > 0, th, 1.0), 0.0)
        obj = tau * pers + 0.5 * ((me - m_bar) ** 2 + own_bar ** 2
                                  + (o - other_bar) ** 2)
        return me, o, obj

    m_s0, r_s0, obj_s0 = edge(r_bar, s_bar)   # s = 0
    m_r0, s_r0, obj_r0 = edge(s_bar, r_bar)   # r = 0
    use_s0 = obj_s0 <= obj_r0
    m_e = np.where(use_s0, m_s0, m_r0)
    s_e = np.where(use_s0, 0.0, s_r0)
    r_e = np.where(use_s0, r_s0, 0.0)
    m = np.where(inside, m, m_e)
    s = np.where(inside, s, s_e)
    r = np.where(inside, r, r_e)
    return m, s, r


def _prox_graph_geometric(m_bar, s_bar, r_bar, tau):
    # With θ = √(sr) the shifts satisfy s(s−s̄) = r(r−r̄) = E, so
    # s(E) = (s̄+√(s̄²+4E))/2 and E solves the scalar equation
    # E = τ m̄² θ(E) / (2 (θ(E)+2τ)²), bracketed in [0, m̄²/16].
    if HAVE_NUMBA:
        return geometric_prox_array(m_bar, s_bar, r_bar, tau)
    m2 = m_bar * m_bar

    def sr_parts(E):
        qs = np.sqrt(s_bar * s_bar + 4.0 * E)
        qr = np.sqrt(r_bar * r_bar + 4.0 * E)
        return 0.5 * (s_bar + qs), 0.5 * (r_bar + qr), qs, qr

    def phi_and_deriv(E):
        s, r, qs, qr = sr_parts(E)
        th = np.sqrt(s * r)
        den = (th + 2.0 * tau) ** 2
        val = E - tau * m2 * th / (2.0 * den)
        # dθ/dE = (r·ds/dE + s·dr/dE)/(2θ), ds/dE = 1/qs
        th_safe = np.maximum(th, 1e-300)
        dth = (r / np.maximum(qs, 1e-300) + s / np.maximum(qr, 1e-300)) / (2.0 * th_safe)
        dval = 1.0 - tau * m2 * (2.0 * tau - th) / (2.0 * (th + 2.0 * tau) ** 3) * dth
        return val, dval, th

    shape = np.broadcast_shapes(m2.shape, s_bar.shape, r_bar.shape, np.shape(tau))
    lo = np.zeros(shape)
    hi = np.broadcast_to(m2 / 16.0 + 1e-300, shape).copy()
    E = 0.5 * hi
    # safeguarded Newton: keep the bracket [lo, hi], bisect when the
    # Newton candidate escapes it.
    for _ in range(40):
        val, dval, _ = phi_and_deriv(E)
        neg = val < 0.0
        lo = np.where(neg, E, lo)
        hi = np.where(neg, hi, E)
        cand = E - val / np.where(np.abs(dval) > 1e-300, dval, 1.0)
        bad = (cand <= lo) | (cand >= hi) | ~np.isfinite(cand)
        E_new = np.where(bad, 0.5 * (lo + hi), cand)
        if np.all(np.abs(E_new - E) <= 1e-13 * (1e-30 + E)):
            E = E_new
            break
        E = E_new
    s, r, _, _ = sr_parts(E)
    th = np.sqrt(s * r)
    m = m_bar * th / (th + 2.0 * tau)
    return m, s, r


def _newton_candidate(m_bar, s_bar, r_bar, tau, f: InterpolationFn,
                      s0, r0, iters: int = 60):
    """Damped Newton on the reduced two-variable stationarity system,
    started from (s0, r0)."""
    floor = 1e-13

    def residual(s, r):
        th = np.asarray(f(s, r), dtype=float)
        ds, dr = theta_grad(f, s, r)
        den = (th + 2.0 * tau) ** 2
        c = tau * m_bar * m_bar / den
        return s - s_bar - c * ds, r - r_bar - c * dr

    s = s0.copy()
    r = r0.copy()
    F1, F2 = residual(s, r)
    for _ in range(iters):
        h = 1e-7 * (1.0 + np.abs(s) + np.abs(r))
        F1s, F2s = residual(s + h, r)
        F1r, F2r = residual(s, r + h)
        J11 = (F1s - F1) / h
        J21 = (F2s - F2) / h
        J12 = (F1r - F1) / h
        J22 = (F2r - F2) / h
        det = J11 * J22 - J12 * J21
        det = np.where(np.abs(det) > 1e-300, det, 1.0)
        ds = (J22 * F1 - J12 * F2) / det
        dr = (J11 * F2 - J21 * F1) / det
        norm0 = np.abs(F1) + np.abs(F2)
        step = np.ones_like(s)
        for _ in range(25):
            s_new = np.maximum(s - step * ds, floor)
            r_new = np.maximum(r - step * dr, floor)
            G1, G2 = residual(s_new, r_new)
            worse = (np.abs(G1) + np.abs(G2)) > norm0
            if not np.any(worse):
                break
            step = np.where(worse, 0.5 * step, step)
        s, r = s_new, r_new
        F1, F2 = G1, G2
        if np.all(np.abs(F1) + np.abs(F2) <= 1e-11 * (1.0 + np.abs(s) + np.abs(r))):
            break
    failed = (np.abs(F1) + np.abs(F2)) > 1e-8 * (1.0 + np.abs(s) + np.abs(r))
    th = np.asarray(f(s, r), dtype=float)
    m = m_bar * th / (th + 2.0 * tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        pers = np.where(th > 0, m * m / np.where(th > 0, th, 1.0), 0.0)
    obj = tau * pers + 0.5 * ((m - m_bar) ** 2 + (s - s_bar) ** 2
                              + (r - r_bar) ** 2)
    obj = np.where(failed, np.inf, obj)
    return m, s, r, obj, failed


def _prox_graph_newton(m_bar, s_bar, r_bar, tau, f: InterpolationFn):
    """Best of two Newton starts and the closure point (0, s̄⁺, r̄⁺);
    the objective is strictly convex so value comparison is safe."""
    sp = np.maximum(s_bar, 0.0)
    rp = np.maximum(r_bar, 0.0)
    bump = 0.25 * np.sqrt(tau) * np.abs(m_bar) + 0.1
    cands = [
        _newton_candidate(m_bar, s_bar, r_bar, tau, f,
                          sp + 1e-8, rp + 1e-8),
        _newton_candidate(m_bar, s_bar, r_bar, tau, f,
                          sp + bump, rp + bump),
    ]
    obj_b = 0.5 * (m_bar ** 2 + (sp - s_bar) ** 2 + (rp - r_bar) ** 2)
    m = np.zeros_like(m_bar)
    s = sp.copy()
    r = rp.copy()
    best = obj_b.copy()
    all_failed = np.ones(m.shape, dtype=bool)
    for mc, sc, rc, oc, fc in cands:
        better = oc < best - 1e-15
        m = np.where(better, mc, m)
        s = np.where(better, sc, s)
        r = np.where(better, rc, r)
        best = np.where(better, oc, best)
        all_failed &= fc
    return m, s, r, all_failed


def prox_graph_term(m_bar, s_bar, r_bar, tau, f: InterpolationFn):
    """argmin ‖m‖²/θ(s,r) + (1/2τ)(‖m−m̄‖² + (s−s̄)² + (r−r̄)²).

    Exact for the arithmetic and geometric means; damped Newton with a
    closure fallback otherwise.  Returns (m, s, r, newton_failed) with
    ``newton_failed`` a boolean mask (always False on the exact paths).
    """
    m_bar = np.atleast_1d(np.asarray(m_bar, dtype=float))
    s_bar = np.atleast_1d(np.asarray(s_bar, dtype=float))
    r_bar = np.atleast_1d(np.asarray(r_bar, dtype=float))
    m_bar, s_bar, r_bar = np.broadcast_arrays(m_bar, s_bar, r_bar)
    m_bar = np.clip(m_bar, -1e100, 1e100)
    tau_arr = np.broadcast_to(np.asarray(tau, dtype=float), m_bar.shape)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if f.kind == "arithmetic":
            m, s, r = _prox_graph_arithmetic(m_bar, s_bar, r_bar, tau_arr)
            failed = np.zeros(m.shape, dtype=bool)
        elif f.kind == "geometric":
            m, s, r = _prox_graph_geometric(m_bar, s_bar, r_bar, tau_arr)
            failed = np.zeros(m.shape, dtype=bool)
        else:
            m, s, r, failed = _prox_graph_newton(m_bar, s_bar, r_bar, tau_arr, f)
    return m, s, r, failed

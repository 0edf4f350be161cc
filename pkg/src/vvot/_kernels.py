"""Compiled scalar kernels for the perspective prox root solves.

Both solvers spend nearly all their time in elementwise cubic or
fixed-point root finding; the numba versions exit per element as soon
as that element converges, which the vectorized numpy fallbacks cannot
do.  Import failures fall back to the numpy paths transparently.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard speedup, soft dep
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap


@njit(cache=True)
def cubic_roots(y_bar, two_tau, rhs, out):  # pragma: no cover - compiled
    """Largest root of (y-ȳ)(y+2τ)² = rhs on y > max(ȳ,0), elementwise;
    the boundary value max(ȳ,0) when there is no positive root."""
    for k in range(y_bar.size):
        yb = y_bar[k]
        tt = two_tau[k]
        rh = rhs[k]
        lo = yb if yb > 0.0 else 0.0
        g_lo = (lo - yb) * (lo + tt) * (lo + tt) - rh
        if g_lo >= 0.0:
            out[k] = lo
            continue
        hi = lo + rh / max(tt * tt, 1e-300) + 1e-300
        y = hi
        for _ in range(200):
            yt = y + tt
            g = (y - yb) * yt * yt - rh
            gp = yt * (3.0 * y - 2.0 * yb + tt)
            if gp <= 0.0:
                break
            y_new = y - g / gp
            if y_new < lo:
                y_new = lo
            if abs(y_new - y) <= 1e-15 * (1.0 + abs(y)):
                y = y_new
                break
            y = y_new
        out[k] = y


@njit(cache=True, fastmath=True)
def geometric_prox(m_bar, s_bar, r_bar, tau, out_m, out_s, out_r):  # pragma: no cover
    """Prox of m²/√(sr) with quadratic penalty, elementwise.

    The stationarity system reduces to one scalar equation in the shift
    E with s(E) = (s̄+√(s̄²+4E))/2 etc.; solved by safeguarded Newton on
    the bracket [0, m̄²/16], seeded with one fixed-point sweep.
    """
    for k in range(m_bar.size):
        mb = m_bar[k]
        sb = s_bar[k]
        rb = r_bar[k]
        tk = tau[k]
        m2 = mb * mb
        scale2 = 1e-30 + sb * sb + rb * rb
        if m2 <= 1e-22 * scale2:
            # momentum negligible against the densities: E = 0 exactly
            s = sb if sb > 0.0 else 0.0
            r = rb if rb > 0.0 else 0.0
            th = np.sqrt(s * r)
            out_m[k] = mb * th / (th + 2.0 * tk)
            out_s[k] = s
            out_r[k] = r
            continue
        lo = 0.0
        hi0 = m2 / 16.0 + 1e-300
        hi = hi0
        # seed: one fixed-point evaluation from the projected densities
        s0 = sb if sb > 0.0 else 0.0
        r0 = rb if rb > 0.0 else 0.0
        th0 = np.sqrt(s0 * r0)
        den0 = th0 + 2.0 * tk
        E = tk * m2 * th0 / (2.0 * den0 * den0)
        if E <= lo or E >= hi:
            E = 0.5 * hi
        for _ in range(80):
            qs = np.sqrt(sb * sb + 4.0 * E)
            qr = np.sqrt(rb * rb + 4.0 * E)
            s = 0.5 * (sb + qs)
            r = 0.5 * (rb + qr)
            th = np.sqrt(s * r)
            den = th + 2.0 * tk
            val = E - tk * m2 * th / (2.0 * den * den)
            if val < 0.0:
                lo = E
            else:
                hi = E
            if th > 0.0 and qs > 0.0 and qr > 0.0:
                dth = (r / qs + s / qr) / (2.0 * th)
                dval = 1.0 - tk * m2 * (2.0 * tk - th) / (2.0 * den ** 3) * dth
            else:
                dval = 1.0
            cand = E - val / dval if dval > 0.0 else -1.0
            if cand <= lo or cand >= hi or not np.isfinite(cand):
                cand = 0.5 * (lo + hi)
            if (abs(cand - E) <= 1e-12 * (1e-30 + E)
                    or (hi - lo) <= 1e-12 * hi + 1e-300):
                E = cand
                break
            E = cand
        s = 0.5 * (sb + np.sqrt(sb * sb + 4.0 * E))
        r = 0.5 * (rb + np.sqrt(rb * rb + 4.0 * E))
        th = np.sqrt(s * r)
        out_m[k] = mb * th / (th + 2.0 * tk)
        out_s[k] = s
        out_r[k] = r


@njit(cache=True, inline="always")
def _cubic_scalar(yb, tt, rh):  # pragma: no cover - compiled
    lo = yb if yb > 0.0 else 0.0
    g_lo = (lo - yb) * (lo + tt) * (lo + tt) - rh
    if g_lo >= 0.0:
        return lo
    y = lo + rh / max(tt * tt, 1e-300) + 1e-300
    for _ in range(200):
        yt = y + tt
        g = (y - yb) * yt * yt - rh
        gp = yt * (3.0 * y - 2.0 * yb + tt)
        if gp <= 0.0:
            break
        y_new = y - g / gp
        if y_new < lo:
            y_new = lo
        if abs(y_new - y) <= 1e-14 * (1.0 + abs(y)):
            return y_new
        y = y_new
    return y


@njit(cache=True, inline="always")
def _prox3_arith(mb, sb, rb, tk):  # pragma: no cover - compiled
    # quadrant-exact prox of m^2 / ((s+r)/2)
    m2 = mb * mb
    u = _cubic_scalar(sb + rb, 4.0 * tk, 4.0 * tk * m2)
    m = mb * u / (u + 4.0 * tk)
    delta = 0.5 * (u - (sb + rb))
    s = sb + delta
    r = rb + delta
    if s >= 0.0 and r >= 0.0:
        return m, s, r
    # edge candidates: one coordinate pinned to zero
    o1 = _cubic_scalar(rb, 4.0 * tk, 2.0 * tk * m2)
    m1 = mb * o1 / (o1 + 4.0 * tk)
    th1 = 0.5 * o1
    p1 = m1 * m1 / th1 if th1 > 0.0 else 0.0
    obj1 = tk * p1 + 0.5 * ((m1 - mb) ** 2 + sb * sb + (o1 - rb) ** 2)
    o2 = _cubic_scalar(sb, 4.0 * tk, 2.0 * tk * m2)
    m2_ = mb * o2 / (o2 + 4.0 * tk)
    th2 = 0.5 * o2
    p2 = m2_ * m2_ / th2 if th2 > 0.0 else 0.0
    obj2 = tk * p2 + 0.5 * ((m2_ - mb) ** 2 + rb * rb + (o2 - sb) ** 2)
    if obj1 <= obj2:
        return m1, 0.0, o1
    return m2_, o2, 0.0


@njit(cache=True, inline="always", fastmath=True)
def _prox3_geom(mb, sb, rb, tk):  # pragma: no cover - compiled
    # scalar reduction in z = sqrt(E): smooth near the degenerate corner
    m2 = mb * mb
    scale2 = 1e-30 + sb * sb + rb * rb
    if m2 <= 1e-22 * scale2:
        s = sb if sb > 0.0 else 0.0
        r = rb if rb > 0.0 else 0.0
        th = np.sqrt(s * r)
        return mb * th / (th + 2.0 * tk), s, r
    c = tk * m2 / 2.0
    lo = 0.0
    hi = np.abs(mb) / 4.0 + 1e-300
    z = 0.5 * hi
    for _ in range(60):
        E = z * z
        qs = np.sqrt(sb * sb + 4.0 * E)
        qr = np.sqrt(rb * rb + 4.0 * E)
        s = 0.5 * (sb + qs)
        r = 0.5 * (rb + qr)
        th = np.sqrt(s * r)
        den = th + 2.0 * tk
        val = E - c * th / (den * den)
        if val < 0.0:
            lo = z
        else:
            hi = z
        if hi - lo <= 1e-13 * hi:
            break
        if th > 0.0 and qs > 0.0 and qr > 0.0:
            dthdz = z * (r / qs + s / qr) / th
            dval = 2.0 * z - c * (2.0 * tk - th) / (den * den * den) * dthdz
        else:
            dval = 0.0
        ok = dval > 0.0
        cand = z - val / dval if ok else -1.0
        if cand <= lo or cand >= hi or not np.isfinite(cand):
            cand = 0.5 * (lo + hi)
        if abs(cand - z) <= 1e-13 * (1e-150 + z):
            z = cand
            break
        z = cand
    E = z * z
    qs = np.sqrt(sb * sb + 4.0 * E)
    qr = np.sqrt(rb * rb + 4.0 * E)
    s = 0.5 * (sb + qs)
    r = 0.5 * (rb + qr)
    th = np.sqrt(s * r)
    return mb * th / (th + 2.0 * tk), s, r


@njit(cache=True)
def spatial_pdhg(code, q, mask, dtv, dxv, rho0, rho1, gamma_d, n_iters,
                 rho, Mint, sg, phi, ysl, ysr, ymf, ys, yr, ym,
                 rho_b, M_b, sg_b, tau_rho_t, tau_M, tau_sg, sd_cty,
                 w_face, w_graph):  # pragma: no cover - compiled
    """Run n_iters preconditioned primal-dual iterations in place.

    ``code``: 0 = arithmetic mean, 1 = geometric mean.  Array shapes:
    rho (T+1,C,n), Mint (T,C-1,n), sg/ys/yr/ym (T,C,n,n),
    phi (T,C,n), ysl/ysr/ymf (T,C-1,n).
    """
    Tp1, C, n = rho.shape
    T = Tp1 - 1
    ratio = dtv / dxv
    buf = np.empty(C * n)
    for _ in range(n_iters):
        # dual ascent on the continuity multiplier
        for t in range(T):
            for c in range(C):
                for i in range(n):
                    gdiv = 0.0
                    for j in range(n):
                        if mask[i, j]:
                            gdiv -= 0.5 * (sg_b[t, c, i, j] - sg_b[t, c, j, i]) * q[i, j]
                    ml = M_b[t, c - 1, i] if c >= 1 else 0.0
                    mr = M_b[t, c, i] if c <= C - 2 else 0.0
                    kc = (rho_b[t + 1, c, i] - rho_b[t, c, i]
                          + ratio * (mr - ml) + dtv * gdiv)
                    phi[t, c, i] += sd_cty[i] * kc
        # face copies
        for t in range(T):
            for k in range(C - 1):
                for i in range(n):
                    pml = 0.5 * (rho_b[t, k, i] + rho_b[t + 1, k, i])
                    pmr = 0.5 * (rho_b[t, k + 1, i] + rho_b[t + 1, k + 1, i])
                    vsl = ysl[t, k, i] + gamma_d * pml
                    vsr = ysr[t, k, i] + gamma_d * pmr
                    vmf = ymf[t, k, i] + gamma_d * M_b[t, k, i]
                    tk = w_face / gamma_d
                    if code == 0:
                        m, s, r = _prox3_arith(vmf / gamma_d, vsl / gamma_d,
                                               vsr / gamma_d, tk)
                    else:
                        m, s, r = _prox3_geom(vmf / gamma_d, vsl / gamma_d,
                                              vsr / gamma_d, tk)
                    ysl[t, k, i] = vsl - gamma_d * s
                    ysr[t, k, i] = vsr - gamma_d * r
                    ymf[t, k, i] = vmf - gamma_d * m
        # graph copies
        for t in range(T):
            for c in range(C):
                for i in range(n):
                    for j in range(n):
                        if not mask[i, j]:
                            continue
                        pmi = 0.5 * (rho_b[t, c, i] + rho_b[t + 1, c, i])
                        pmj = 0.5 * (rho_b[t, c, j] + rho_b[t + 1, c, j])
                        vs = ys[t, c, i, j] + gamma_d * pmi
                        vr = yr[t, c, i, j] + gamma_d * pmj
                        vm = ym[t, c, i, j] + gamma_d * sg_b[t, c, i, j]
                        tk = w_graph[i, j] / gamma_d
                        if code == 0:
                            m, s, r = _prox3_arith(vm / gamma_d, vs / gamma_d,
                                                   vr / gamma_d, tk)
                        else:
                            m, s, r = _prox3_geom(vm / gamma_d, vs / gamma_d,
                                                  vr / gamma_d, tk)
                        ys[t, c, i, j] = vs - gamma_d * s
                        yr[t, c, i, j] = vr - gamma_d * r
                        ym[t, c, i, j] = vm - gamma_d * m
        # adjoint and primal updates
        for t in range(T + 1):
            for c in range(C):
                for i in range(n):
                    a = 0.0
                    if t < T:
                        a -= phi[t, c, i]
                    if t > 0:
                        a += phi[t - 1, c, i]
                    for tt in (t - 1, t):
                        if tt < 0 or tt > T - 1:
                            continue
                        h = 0.0
                        if c <= C - 2:
                            h += 0.5 * ysl[tt, c, i]
                        if c >= 1:
                            h += 0.5 * ysr[tt, c - 1, i]
                        for j in range(n):
                            if mask[i, j]:
                                h += 0.5 * ys[tt, c, i, j]
                            if mask[j, i]:
                                h += 0.5 * yr[tt, c, j, i]
                        a += h
                    newv = rho[t, c, i] - tau_rho_t[t] * a
                    rho_b[t, c, i] = -rho[t, c, i]
                    rho[t, c, i] = newv
        # endpoint and simplex projections
        for c in range(C):
            for i in range(n):
                rho[0, c, i] = rho0[c, i]
                rho[T, c, i] = rho1[c, i]
        for t in range(1, T):
            kk = 0
            for c in range(C):
                for i in range(n):
                    buf[kk] = rho[t, c, i]
                    kk += 1
            srt = np.sort(buf)[::-1]
            css = 0.0
            tau_mult = 0.0
            for k in range(C * n):
                css += srt[k]
                trial = (css - 1.0) / (k + 1)
                if srt[k] - trial > 0.0:
                    tau_mult = trial
            for c in range(C):
                for i in range(n):
                    v = rho[t, c, i] - tau_mult
                    rho[t, c, i] = v if v > 0.0 else 0.0
        for t in range(T + 1):
            for c in range(C):
                for i in range(n):
                    rho_b[t, c, i] += 2.0 * rho[t, c, i]
        for t in range(T):
            for k in range(C - 1):
                for i in range(n):
                    a = ratio * (phi[t, k, i] - phi[t, k + 1, i]) + ymf[t, k, i]
                    newm = Mint[t, k, i] - tau_M * a
                    M_b[t, k, i] = 2.0 * newm - Mint[t, k, i]
                    Mint[t, k, i] = newm
        for t in range(T):
            for c in range(C):
                for i in range(n):
                    for j in range(n):
                        if not mask[i, j]:
                            sg[t, c, i, j] = 0.0
                            sg_b[t, c, i, j] = 0.0
                            continue
                        a = (ym[t, c, i, j]
                             + dtv * 0.5 * (phi[t, c, j] - phi[t, c, i]) * q[i, j])
                        news = sg[t, c, i, j] - tau_sg[i, j] * a
                        sg_b[t, c, i, j] = 2.0 * news - sg[t, c, i, j]
                        sg[t, c, i, j] = news


def cubic_roots_array(y_bar: np.ndarray, two_tau: np.ndarray,
                      rhs: np.ndarray) -> np.ndarray:
    shape = np.broadcast_shapes(y_bar.shape, np.shape(two_tau), rhs.shape)
    yb = np.ascontiguousarray(np.broadcast_to(y_bar, shape), dtype=float).ravel()
    tt = np.ascontiguousarray(np.broadcast_to(two_tau, shape), dtype=float).ravel()
    rh = np.ascontiguousarray(np.broadcast_to(rhs, shape), dtype=float).ravel()
    out = np.empty_like(yb)
    cubic_roots(yb, tt, rh, out)
    return out.reshape(shape)


def geometric_prox_array(m_bar, s_bar, r_bar, tau):
    shape = np.broadcast_shapes(m_bar.shape, s_bar.shape, r_bar.shape,
                                np.shape(tau))
    mb = np.ascontiguousarray(np.broadcast_to(m_bar, shape), dtype=float).ravel()
    sb = np.ascontiguousarray(np.broadcast_to(s_bar, shape), dtype=float).ravel()
    rb = np.ascontiguousarray(np.broadcast_to(r_bar, shape), dtype=float).ravel()
    tk = np.ascontiguousarray(np.broadcast_to(tau, shape), dtype=float).ravel()
    out_m = np.empty_like(mb)
    out_s = np.empty_like(mb)
    out_r = np.empty_like(mb)
    geometric_prox(mb, sb, rb, tk, out_m, out_s, out_r)
    return (out_m.reshape(shape), out_s.reshape(shape), out_r.reshape(shape))

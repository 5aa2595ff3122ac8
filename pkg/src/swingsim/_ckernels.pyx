# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; arithmetic mirrors ``_pykernels`` operation for operation."""
from libc.math cimport exp, ceil, fabs, INFINITY

import numpy as np

cdef double GUARD = 1e6


cpdef long n_steps(double t0, double t1, double h):
    cdef long n = <long>ceil((t1 - t0) / h - 1e-9)
    return n if n > 1 else 1


cdef inline double _lag_weight(double dt, double tau) nogil:
    if tau <= 0.0:
        return 0.0
    return exp(-dt / tau)


cdef inline bint _bad(double a, double b) nogil:
    # also true for NaN
    return not (fabs(a) <= GUARD and fabs(b) <= GUARD)


def rk4_linear_segment(double w, double x, double t0, double t1, double h, double M,
                       double damp, double k, double c, double a0, double arate, long stride):
    cdef long n = n_steps(t0, t1, h)
    cdef long cap = n // stride + 2
    ts_a = np.empty(cap)
    ws_a = np.empty(cap)
    xs_a = np.empty(cap)
    cdef double[:] ts = ts_a
    cdef double[:] ws = ws_a
    cdef double[:] xs = xs_a
    cdef long m = 0, i
    cdef double t = t0, tn, dt, hd, th
    cdef double k1w, k1x, k2w, k2x, k3w, k3x, k4w, k4x, w2, x2, w3, x3, w4, x4
    cdef bint bad = False
    with nogil:
        for i in range(1, n + 1):
            if i == n:
                tn = t1
            else:
                tn = t0 + i * h
            dt = tn - t
            hd = 0.5 * dt
            th = t + hd
            k1w = (a0 + arate * (t - t0) - damp * w - k * x) / M
            k1x = c * w
            w2 = w + hd * k1w
            x2 = x + hd * k1x
            k2w = (a0 + arate * (th - t0) - damp * w2 - k * x2) / M
            k2x = c * w2
            w3 = w + hd * k2w
            x3 = x + hd * k2x
            k3w = (a0 + arate * (th - t0) - damp * w3 - k * x3) / M
            k3x = c * w3
            w4 = w + dt * k3w
            x4 = x + dt * k3x
            k4w = (a0 + arate * (tn - t0) - damp * w4 - k * x4) / M
            k4x = c * w4
            w = w + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
            x = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            t = tn
            bad = _bad(w, x)
            if i % stride == 0 or i == n or bad:
                ts[m] = t
                ws[m] = w
                xs[m] = x
                m += 1
            if bad:
                break
    status = 1 if bad else 0
    return status, ts_a[:m], ws_a[:m], xs_a[:m]


cdef struct LagParams:
    double M, D, gamma, beta, alpha, cI, a0, arate, vd, tau_pll, tau_cc, t0
    long nI


cdef inline void _lagged_rhs(double dt_stage, double t, double w, double xI, double xG,
                             double wh, double[:] i_d, double[:] xi, double[:] pstar,
                             LagParams* p, double* out) nogil:
    cdef double ap = _lag_weight(dt_stage, p.tau_pll)
    cdef double ac = _lag_weight(dt_stage, p.tau_cc)
    cdef double whs = ap * wh + (1.0 - ap) * w
    cdef double v = -p.gamma * whs - p.beta * xI
    cdef double tot = 0.0, istar, i_s
    cdef long j
    for j in range(p.nI):
        istar = (pstar[j] + xi[j] * v) / p.vd
        i_s = ac * i_d[j] + (1.0 - ac) * istar
        tot = tot + (p.vd * i_s - pstar[j])
    out[0] = (p.a0 + p.arate * (t - p.t0) - p.alpha * xG - p.D * w + tot) / p.M
    out[1] = p.cI * whs
    out[2] = w


def rk4_lagged_segment(double w, double xI, double xG, double wh, i_d_in, double t0, double t1,
                       double h, double M, double D, double gamma, double beta, double alpha,
                       double cI, double a0, double arate, xi_in, pstar_in, double vd,
                       double tau_pll, double tau_cc, long stride):
    cdef double[:] xi = np.ascontiguousarray(xi_in, dtype=float)
    cdef double[:] pstar = np.ascontiguousarray(pstar_in, dtype=float)
    i_d_a = np.array(i_d_in, dtype=float)
    cdef double[:] i_d = i_d_a
    cdef LagParams p
    p.M = M; p.D = D; p.gamma = gamma; p.beta = beta; p.alpha = alpha; p.cI = cI
    p.a0 = a0; p.arate = arate; p.vd = vd; p.tau_pll = tau_pll; p.tau_cc = tau_cc
    p.t0 = t0; p.nI = xi.shape[0]
    cdef long nI = p.nI
    cdef long n = n_steps(t0, t1, h)
    cdef long cap = n // stride + 2
    ts_a = np.empty(cap); ws_a = np.empty(cap); xIs_a = np.empty(cap)
    xGs_a = np.empty(cap); whs_a = np.empty(cap); ids_a = np.empty((cap, nI))
    cdef double[:] ts = ts_a
    cdef double[:] ws = ws_a
    cdef double[:] xIs = xIs_a
    cdef double[:] xGs = xGs_a
    cdef double[:] whs = whs_a
    cdef double[:, :] ids = ids_a
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    cdef long m = 0, i, j
    cdef double t = t0, tn, dt, hd, th, ap, ac, v, istar
    cdef bint bad = False
    with nogil:
        for i in range(1, n + 1):
            if i == n:
                tn = t1
            else:
                tn = t0 + i * h
            dt = tn - t
            hd = 0.5 * dt
            th = t + hd
            _lagged_rhs(0.0, t, w, xI, xG, wh, i_d, xi, pstar, &p, k1)
            _lagged_rhs(hd, th, w + hd * k1[0], xI + hd * k1[1], xG + hd * k1[2],
                        wh, i_d, xi, pstar, &p, k2)
            _lagged_rhs(hd, th, w + hd * k2[0], xI + hd * k2[1], xG + hd * k2[2],
                        wh, i_d, xi, pstar, &p, k3)
            _lagged_rhs(dt, tn, w + dt * k3[0], xI + dt * k3[1], xG + dt * k3[2],
                        wh, i_d, xi, pstar, &p, k4)
            w = w + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            xI = xI + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
            xG = xG + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
            ap = _lag_weight(dt, tau_pll)
            ac = _lag_weight(dt, tau_cc)
            wh = ap * wh + (1.0 - ap) * w
            v = -gamma * wh - beta * xI
            for j in range(nI):
                istar = (pstar[j] + xi[j] * v) / vd
                i_d[j] = ac * i_d[j] + (1.0 - ac) * istar
            t = tn
            bad = _bad(w, xI) or not (fabs(xG) <= GUARD)
            if i % stride == 0 or i == n or bad:
                ts[m] = t
                ws[m] = w
                xIs[m] = xI
                xGs[m] = xG
                whs[m] = wh
                for j in range(nI):
                    ids[m, j] = i_d[j]
                m += 1
            if bad:
                break
    status = 1 if bad else 0
    return status, ts_a[:m], ws_a[:m], xIs_a[:m], xGs_a[:m], whs_a[:m], ids_a[:m]


def grid_exhaustive(lam_in, double target, double lo, double res, long N):
    cdef double[:] lam = np.ascontiguousarray(lam_in, dtype=float)
    cdef long n = lam.shape[0]
    cdef long d = n - 1
    cdef long[8] kk
    cdef long[8] best_k
    cdef double best = INFINITY, acc, partial, y, yl, rest, cost
    cdef long j, kl
    if n > 9:
        raise ValueError("too many coordinates for the compiled grid search")
    for j in range(d):
        kk[j] = 0
        best_k[j] = 0
    with nogil:
        while True:
            acc = 0.0
            partial = 0.0
            for j in range(d - 1):
                y = lo + kk[j] * res
                acc = acc + lam[j] * y * y
                partial = partial + y
            for kl in range(N + 1):
                yl = lo + kl * res
                rest = target - (partial + yl)
                cost = 0.5 * ((acc + lam[d - 1] * yl * yl) + lam[d] * rest * rest)
                if cost < best:
                    best = cost
                    for j in range(d - 1):
                        best_k[j] = kk[j]
                    best_k[d - 1] = kl
            # odometer over the outer coordinates, last outer digit fastest
            j = d - 2
            while j >= 0:
                kk[j] += 1
                if kk[j] <= N:
                    break
                kk[j] = 0
                j -= 1
            if j < 0:
                break
    return best, np.array([best_k[j] for j in range(d)], dtype=np.int64)

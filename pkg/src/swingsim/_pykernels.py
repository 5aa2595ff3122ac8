"""Pure-Python kernels (fallback for :mod:`swingsim._ckernels`).

Every function here has a twin in ``_ckernels.pyx`` that performs the same
floating-point operations in the same order, so both backends produce
bit-identical output.  Keep them in lockstep when editing.

Segment integrators step from ``t0`` to ``t1`` with step ``h``; the last step
is shortened to land exactly on ``t1``.  They return a status flag
(0 ok, 1 diverged) followed by the samples taken after every ``stride``-th
step and after the final step.  The state at ``t0`` is not included.
"""
import itertools
import math

import numpy as np

GUARD = 1e6


def n_steps(t0, t1, h):
    return max(1, int(math.ceil((t1 - t0) / h - 1e-9)))


def _lag_weight(dt, tau):
    # exp(-dt/tau); tau == 0 tracks instantly
    if tau <= 0.0:
        return 0.0
    return math.exp(-dt / tau)


def rk4_linear_segment(w, x, t0, t1, h, M, damp, k, c, a0, arate, stride):
    """RK4 for ``M w' = a0 + arate*(t - t0) - damp*w - k*x``, ``x' = c*w``."""
    n = n_steps(t0, t1, h)
    cap = n // stride + 2
    ts = np.empty(cap)
    ws = np.empty(cap)
    xs = np.empty(cap)
    m = 0
    t = t0
    for i in range(1, n + 1):
        tn = t1 if i == n else t0 + i * h
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
        bad = not (abs(w) <= GUARD and abs(x) <= GUARD)
        if i % stride == 0 or i == n or bad:
            ts[m] = t
            ws[m] = w
            xs[m] = x
            m += 1
        if bad:
            return 1, ts[:m], ws[:m], xs[:m]
    return 0, ts[:m], ws[:m], xs[:m]


def _lagged_rhs(dt_stage, t, t0, w, xI, xG, wh, i_d, M, D, gamma, beta, alpha, cI,
                a0, arate, xi, pstar, vd, tau_pll, tau_cc):
    ap = _lag_weight(dt_stage, tau_pll)
    ac = _lag_weight(dt_stage, tau_cc)
    whs = ap * wh + (1.0 - ap) * w
    v = -gamma * whs - beta * xI
    tot = 0.0
    for j in range(len(xi)):
        istar = (pstar[j] + xi[j] * v) / vd
        i_s = ac * i_d[j] + (1.0 - ac) * istar
        tot = tot + (vd * i_s - pstar[j])
    dw = (a0 + arate * (t - t0) - alpha * xG - D * w + tot) / M
    return dw, cI * whs, w


def rk4_lagged_segment(w, xI, xG, wh, i_d, t0, t1, h, M, D, gamma, beta, alpha, cI,
                       a0, arate, xi, pstar, vd, tau_pll, tau_cc, stride):
    """Swing equation driven by inverters behind first-order PLL/current lags.

    Within a step the lag states follow their exact exponential response to
    the stage value of their input; at the end of the step they are advanced
    with the input held at its end-of-step value.  ``i_d`` is not modified.
    """
    xi = [float(v) for v in xi]
    pstar = [float(v) for v in pstar]
    i_d = [float(v) for v in i_d]
    nI = len(xi)
    n = n_steps(t0, t1, h)
    cap = n // stride + 2
    ts = np.empty(cap)
    ws = np.empty(cap)
    xIs = np.empty(cap)
    xGs = np.empty(cap)
    whs = np.empty(cap)
    ids = np.empty((cap, nI))
    m = 0
    t = t0
    args = (M, D, gamma, beta, alpha, cI, a0, arate, xi, pstar, vd, tau_pll, tau_cc)
    for i in range(1, n + 1):
        tn = t1 if i == n else t0 + i * h
        dt = tn - t
        hd = 0.5 * dt
        th = t + hd
        k1w, k1a, k1b = _lagged_rhs(0.0, t, t0, w, xI, xG, wh, i_d, *args)
        k2w, k2a, k2b = _lagged_rhs(hd, th, t0, w + hd * k1w, xI + hd * k1a, xG + hd * k1b,
                                    wh, i_d, *args)
        k3w, k3a, k3b = _lagged_rhs(hd, th, t0, w + hd * k2w, xI + hd * k2a, xG + hd * k2b,
                                    wh, i_d, *args)
        k4w, k4a, k4b = _lagged_rhs(dt, tn, t0, w + dt * k3w, xI + dt * k3a, xG + dt * k3b,
                                    wh, i_d, *args)
        w = w + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        xI = xI + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        xG = xG + dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        ap = _lag_weight(dt, tau_pll)
        ac = _lag_weight(dt, tau_cc)
        wh = ap * wh + (1.0 - ap) * w
        v = -gamma * wh - beta * xI
        for j in range(nI):
            istar = (pstar[j] + xi[j] * v) / vd
            i_d[j] = ac * i_d[j] + (1.0 - ac) * istar
        t = tn
        bad = not (abs(w) <= GUARD and abs(xI) <= GUARD and abs(xG) <= GUARD)
        if i % stride == 0 or i == n or bad:
            ts[m] = t
            ws[m] = w
            xIs[m] = xI
            xGs[m] = xG
            whs[m] = wh
            ids[m, :] = i_d
            m += 1
        if bad:
            return 1, ts[:m], ws[:m], xIs[:m], xGs[:m], whs[:m], ids[:m]
    return 0, ts[:m], ws[:m], xIs[:m], xGs[:m], whs[:m], ids[:m]


def grid_exhaustive(lam, target, lo, res, N):
    """Enumerate every grid point of the constrained injection problem.

    Free coordinates ``y_j = lo + k_j*res`` for ``k_j`` in ``0..N`` and
    ``j < n-1``; the last coordinate closes ``sum(y) == target``.  Returns
    ``(cost, k)`` of the first grid point with the smallest cost
    ``0.5 * sum(lam * y**2)`` in lexicographic order of ``k``.
    """
    lam = [float(v) for v in lam]
    d = len(lam) - 1
    last = np.arange(N + 1, dtype=float)
    ylast = lo + last * res
    best = math.inf
    best_k = None
    for outer in itertools.product(range(N + 1), repeat=d - 1):
        acc = 0.0
        partial = 0.0
        for j, kj in enumerate(outer):
            y = lo + kj * res
            acc = acc + lam[j] * y * y
            partial = partial + y
        rest = target - (partial + ylast)
        cost = 0.5 * ((acc + lam[d - 1] * ylast * ylast) + lam[d] * rest * rest)
        i = int(np.argmin(cost))
        if cost[i] < best:
            best = float(cost[i])
            best_k = outer + (i,)
    return best, np.array(best_k, dtype=np.int64)

"""Compiled closed-loop simulation.

A mirror of the reference path in ``sim.run_reference`` (plant RK4,
substepped controller update, fuzzy scheduling) built for the thousands of
runs a tuning campaign needs. Array layouts follow ``sim.pack_problem``.
"""

import numpy as np
from numba import njit

N_COLS = 39  # t, x6, xh6, y2, r2, e2, u2, K2, est16
N_GRID = 201


@njit(cache=True)
def _sq(v, signed):
    if signed:
        return v * abs(v)
    return v * v


@njit(cache=True)
def _plant_rhs(x, w, a, kc, signed, damp_x6, out):
    main = a[2] * _sq(x[4], signed) + a[4] * x[4]
    out[0] = x[1]
    out[1] = (main - a[6] * np.sin(x[0]) - a[7] * x[1] + 0.0362 * x[3] * x[3] * np.sin(2 * x[0])
              - a[11] * main * x[3] * np.cos(x[0])) / a[0]
    out[2] = x[3]
    out[3] = (a[3] * _sq(x[5], signed) + a[5] * x[5] - a[9] * x[3] - 1.75 * kc * main) / a[1]
    out[4] = (-a[15] * x[4] + a[12] * w[0]) / a[14]
    damped = x[5] if damp_x6 else x[4]
    out[5] = (-a[17] * damped + a[13] * w[1]) / a[16]


@njit(cache=True)
def _scheduled(a_nom, sched, t, a):
    # sched = [mode, amplitude, sin_freq, cos_freq, max_index]
    for i in range(18):
        a[i] = a_nom[i]
    if sched[0] > 0.5:
        fs = 1.0 + sched[1] * np.sin(sched[2] * t)
        fc = 1.0 + sched[1] * np.cos(sched[3] * t)
        for i in range(18):
            if i + 1 <= sched[4]:
                if (i + 1) % 2 == 1:
                    a[i] = a_nom[i] * fs
                else:
                    a[i] = a_nom[i] * fc


@njit(cache=True)
def _plant_step(x, w, t, dt, a_nom, sched, kc, signed, damp_x6):
    a = np.empty(18)
    k1 = np.empty(6)
    k2 = np.empty(6)
    k3 = np.empty(6)
    k4 = np.empty(6)
    _scheduled(a_nom, sched, t, a)
    _plant_rhs(x, w, a, kc, signed, damp_x6, k1)
    _scheduled(a_nom, sched, t + dt / 2, a)
    _plant_rhs(x + dt / 2 * k1, w, a, kc, signed, damp_x6, k2)
    _plant_rhs(x + dt / 2 * k2, w, a, kc, signed, damp_x6, k3)
    _scheduled(a_nom, sched, t + dt, a)
    _plant_rhs(x + dt * k3, w, a, kc, signed, damp_x6, k4)
    return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


@njit(cache=True)
def _tri(a, b, c, x):
    if a == b and x <= b:
        return 1.0
    if b == c and x >= b:
        return 1.0
    if x <= a or x >= c:
        return 0.0
    if x <= b:
        return (x - a) / (b - a)
    return (c - x) / (c - b)


@njit(cache=True)
def _infer_kf(en, den, e_mf, de_mf, out_mf, rules, kf_min, prev_kf, has_prev):
    en = min(max(en, 0.0), 1.0)
    den = min(max(den, 0.0), 1.0)
    mu_e = np.empty(4)
    mu_de = np.empty(4)
    for i in range(4):
        mu_e[i] = _tri(e_mf[i, 0], e_mf[i, 1], e_mf[i, 2], en)
        mu_de[i] = _tri(de_mf[i, 0], de_mf[i, 1], de_mf[i, 2], den)
    w = np.zeros(6)
    for i in range(4):
        for j in range(4):
            s = min(mu_e[i], mu_de[j])
            o = rules[i, j]
            if s > w[o]:
                w[o] = s
    num = 0.0
    den_sum = 0.0
    for g in range(N_GRID):
        y = g / (N_GRID - 1)
        m = 0.0
        for o in range(6):
            if w[o] > 0:
                v = min(w[o], _tri(out_mf[o, 0], out_mf[o, 1], out_mf[o, 2], y))
                if v > m:
                    m = v
        num += y * m
        den_sum += m
    if den_sum <= 0:
        if has_prev:
            return prev_kf
        kf = (out_mf[0, 0] + out_mf[0, 1] + out_mf[0, 2]) / 3.0
    else:
        kf = num / den_sum
    return max(kf, kf_min)


@njit(cache=True)
def _proj(est, raw, lo, hi, eps, gamma, out):
    for i in range(est.shape[0]):
        c = 0.5 * (lo[i] + hi[i])
        h = 0.5 * (hi[i] - lo[i])
        z = est[i] - c
        f = (z * z - h * h) / (eps * h * h)
        grad = 2 * z / (eps * h * h)
        if f > 0 and grad * raw[i] > 0:
            out[i] = gamma * (raw[i] * (1 - f))
        else:
            out[i] = gamma * raw[i]


@njit(cache=True)
def _ctrl_rhs(xh, v, x, u_k, n, est, r, Am, Bm, Bum, L, Kg, M, Kx, kdiag, dxh, dv):
    om11, om12, om21, om22 = est[0], est[1], est[2], est[3]
    kxx = Kx @ x
    e1 = np.empty(2)
    for i in range(2):
        e1[i] = est[4 + i] * n + est[10 + i]
    e2 = np.empty(4)
    for i in range(4):
        e2[i] = est[6 + i] * n + est[12 + i]
    mch = np.empty(2)
    mch[0] = om11 * u_k[0] + om12 * u_k[1] + kxx[0] + e1[0]
    mch[1] = om21 * u_k[0] + om22 * u_k[1] + kxx[1] + e1[1]
    pred = Am @ xh + Bm @ mch + Bum @ e2 - L @ (xh - x)
    for i in range(6):
        dxh[i] = pred[i]
    uf0 = v[0] - kxx[0]
    uf1 = v[1] - kxx[1]
    m2 = M @ e2
    kgr = Kg @ r
    dv[0] = -kdiag[0] * (om11 * uf0 + om12 * uf1 + kxx[0] + e1[0] + m2[0] - kgr[0])
    dv[1] = -kdiag[1] * (om21 * uf0 + om22 * uf1 + kxx[1] + e1[1] + m2[1] - kgr[1])


@njit(cache=True)
def simulate(x0, r_grid, dt, n_steps, m, threshold,
             a_nom, sched, kc, signed, damp_x6, omega,
             Am, Bm, Bum, L, P, Kg, M, Kx, gamma, lo, hi, ilo, ihi, eps, nsub,
             est0, v0,
             fuzzy, kconst, e_mf, de_mf, out_mf, rules, fparams):
    """Run the closed loop; returns ``(trace, rows, diverged)``.

    Plant and controller advance together every ``dt / m``; a trace row is
    captured every ``m`` ticks. ``r_grid`` holds the reference at every tick
    and ``fparams = [k_p, k_d, k_e, k, k_f_min]``.
    """
    trace = np.zeros((n_steps + 1, N_COLS))
    x = x0.copy()
    xh = x0.copy()
    est = est0.copy()
    v = v0.copy()
    e_prev = np.zeros(2)
    kf_prev = 0.0
    has_prev = False
    raw = np.empty(16)
    rates = np.empty(16)
    dxh = np.empty(6)
    dv = np.empty(2)
    PBm = P @ Bm
    PBum = P @ Bum
    dtc = dt / m
    hsub = dtc / nsub
    rows = 0
    diverged = False
    kdiag = np.empty(2)
    e = np.empty(2)
    n_ticks = n_steps * m
    for tick in range(n_ticks + 1):
        k = tick // m
        j = tick - k * m
        t = k * dt + j * dtc
        r = r_grid[tick]
        e[0] = r[0] - x[0]
        e[1] = r[1] - x[2]
        if fuzzy:
            en = max(abs(e[0]), abs(e[1]))
            if en <= fparams[2]:
                kdiag[0] = fparams[3]
                kdiag[1] = fparams[3]
            else:
                if tick == 0:
                    den = 0.0
                else:
                    den = max(abs(e[0] - e_prev[0]), abs(e[1] - e_prev[1])) / dtc
                kf = _infer_kf(min(fparams[0] * en, 1.0), min(fparams[1] * den, 1.0),
                               e_mf, de_mf, out_mf, rules, fparams[4], kf_prev, has_prev)
                kf_prev = kf
                has_prev = True
                kdiag[0] = 1.0 / kf
                kdiag[1] = 1.0 / kf
        else:
            kdiag[0] = kconst[0]
            kdiag[1] = kconst[1]
        e_prev[0] = e[0]
        e_prev[1] = e[1]
        u_k = v - Kx @ x
        if j == 0:
            row = trace[k]
            row[0] = t
            row[1:7] = x
            row[7:13] = xh
            row[13] = x[0]
            row[14] = x[2]
            row[15:17] = r
            row[17:19] = e
            row[19:21] = u_k
            row[21:23] = kdiag
            row[23:39] = est
            rows = k + 1
        if tick == n_ticks:
            break
        # controller
        n = 0.0
        for i in range(6):
            if abs(x[i]) > n:
                n = abs(x[i])
        for _ in range(nsub):
            xt = xh - x
            gm = -(xt @ PBm)
            gu = -(xt @ PBum)
            raw[0] = gm[0] * u_k[0]
            raw[1] = gm[0] * u_k[1]
            raw[2] = gm[1] * u_k[0]
            raw[3] = gm[1] * u_k[1]
            for i in range(2):
                raw[4 + i] = gm[i] * n
                raw[10 + i] = gm[i]
            for i in range(4):
                raw[6 + i] = gu[i] * n
                raw[12 + i] = gu[i]
            _proj(est, raw, lo, hi, eps, gamma, rates)
            _ctrl_rhs(xh, v, x, u_k, n, est, r, Am, Bm, Bum, L, Kg, M, Kx, kdiag, dxh, dv)
            k1h = dxh.copy()
            k1v = dv.copy()
            _ctrl_rhs(xh + hsub / 2 * k1h, v + hsub / 2 * k1v, x, u_k, n, est, r,
                      Am, Bm, Bum, L, Kg, M, Kx, kdiag, dxh, dv)
            k2h = dxh.copy()
            k2v = dv.copy()
            _ctrl_rhs(xh + hsub / 2 * k2h, v + hsub / 2 * k2v, x, u_k, n, est, r,
                      Am, Bm, Bum, L, Kg, M, Kx, kdiag, dxh, dv)
            k3h = dxh.copy()
            k3v = dv.copy()
            _ctrl_rhs(xh + hsub * k3h, v + hsub * k3v, x, u_k, n, est, r,
                      Am, Bm, Bum, L, Kg, M, Kx, kdiag, dxh, dv)
            xh = xh + hsub / 6 * (k1h + 2 * k2h + 2 * k3h + dxh)
            v = v + hsub / 6 * (k1v + 2 * k2v + 2 * k3v + dv)
            for i in range(16):
                est[i] = min(max(est[i] + hsub * rates[i], ilo[i]), ihi[i])
        # plant
        w = omega @ u_k
        x = _plant_step(x, w, t, dtc, a_nom, sched, kc, signed, damp_x6)
        bad = False
        for i in range(6):
            if not np.isfinite(x[i]) or abs(x[i]) > threshold:
                bad = True
        if bad:
            diverged = True
            break
    return trace, rows, diverged

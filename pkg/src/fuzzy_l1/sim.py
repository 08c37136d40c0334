"""Closed-loop simulation, traces and CSV emission."""

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernel, fuzzy
from .l1 import ControllerState, controller_step, plant_input
from .numerics import IntegrationError, rk4_step
from .plant import scheduled_params, trms_derivative

COLUMNS = (["t"] + [f"x{i}" for i in range(1, 7)] + [f"xh{i}" for i in range(1, 7)]
           + ["y1", "y2", "r1", "r2", "e1", "e2", "u1", "u2", "K1", "K2",
              "om11", "om12", "om21", "om22", "th11", "th12"]
           + [f"th2{i}" for i in range(1, 5)] + ["sg11", "sg12"] + [f"sg2{i}" for i in range(1, 5)])
COL = {name: i for i, name in enumerate(COLUMNS)}
SENTINEL = (1e12, 1e12)


@dataclass(eq=False)
class Trace:
    data: np.ndarray
    diverged: bool = False
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.data.shape[0]

    def cols(self, *names):
        idx = [COL[n] for n in names]
        return self.data[:, idx[0]] if len(idx) == 1 else self.data[:, idx]

    @property
    def t(self):
        return self.data[:, 0]

    @property
    def x(self):
        return self.data[:, 1:7]

    @property
    def x_hat(self):
        return self.data[:, 7:13]

    @property
    def y(self):
        return self.data[:, 13:15]

    @property
    def r(self):
        return self.data[:, 15:17]

    @property
    def e(self):
        return self.data[:, 17:19]

    @property
    def u(self):
        return self.data[:, 19:21]

    @property
    def K(self):
        return self.data[:, 21:23]

    @property
    def estimates(self):
        return self.data[:, 23:39]


def objectives(trace):
    """``(E, U)``: summed squared error and summed per-channel peak input."""
    if trace.diverged:
        return SENTINEL
    E = float(np.sum(trace.e ** 2))
    U = float(np.sum(np.max(np.abs(trace.u), axis=0)))
    return E, U


def rms_error(trace, t0=5.0, t1=None):
    t = trace.t
    sel = (t >= t0 - 1e-9) & (t <= (t[-1] if t1 is None else t1) + 1e-9)
    return np.sqrt(np.mean(trace.e[sel] ** 2, axis=0))


def with_filter(sc, params=None, mode=None):
    """Copy of a scenario with a different fuzzy vector or filter mode."""
    kw = {}
    if params is not None:
        kw["fuzzy_params"] = fuzzy.repair(params)
    if mode is not None:
        kw["filter_mode"] = mode
    return replace(sc, **kw)


def pack_problem(sc):
    """Flatten a scenario into the positional arguments of the compiled kernel."""
    c = sc.controller
    p = sc.plant
    u = sc.uncertainty
    n = sc.integrator.n_steps
    m = int(sc.integrator.control_substeps)
    cs0 = ControllerState.initial(sc.x0, c)
    mfs = sc.mfs
    lo, hi = c.limits
    ilo, ihi = c.inflated
    s = sc.schedule
    f = np.ascontiguousarray
    return (
        f(sc.x0, dtype=float), sc.reference.grid(sc.integrator.control_dt, n * m), sc.integrator.dt, n, m,
        sc.threshold,
        np.array(p.a), np.array([u.mode == "case2", u.amplitude, u.sin_frequency, u.cos_frequency, u.max_index],
                                dtype=float),
        p.kc, p.thrust_law == "signed", p.yaw_damping_state == "x6", f(p.omega_matrix),
        f(c.A_m), f(c.B_m), f(c.B_um), f(c.L), f(c.P), f(c.K_g), f(c.M), f(c.baseline_gain), float(c.Gamma),
        lo, hi, ilo, ihi, float(c.proj_epsilon), int(c.adaptation_substeps),
        cs0.estimates(), f(cs0.u),
        sc.filter_mode == "fuzzy", np.array(c.K_const, dtype=float),
        f(mfs.e), f(mfs.de), f(mfs.out), f(fuzzy.RULES, dtype=np.int64),
        np.array([s.k_p, s.k_d, s.k_e, s.k, s.k_f_min]),
    )


def _meta(sc, diverged, engine):
    return {"scenario": sc.name, "diverged": bool(diverged), "expect_divergence": sc.expect_divergence,
            "seed": sc.seed, "config_hash": sc.hash, "engine": engine, "dt": sc.integrator.dt,
            "control_substeps": sc.integrator.control_substeps,
            "t_end": sc.integrator.t_end, "filter_mode": sc.filter_mode}


def run_kernel(sc):
    data, rows, diverged = _kernel.simulate(*pack_problem(sc))
    return Trace(data[:rows].copy(), bool(diverged), _meta(sc, diverged, "kernel"))


def run_reference(sc, n_steps=None):
    """Pure-NumPy closed loop built from the library operations."""
    c = sc.controller
    dt = sc.integrator.dt
    m = int(sc.integrator.control_substeps)
    dtc = sc.integrator.control_dt
    n = sc.integrator.n_steps if n_steps is None else n_steps
    r_grid = sc.reference.grid(dtc, n * m)
    mfs = sc.mfs
    x = sc.x0.astype(float).copy()
    cs = ControllerState.initial(x, c)
    e_prev, kf_prev = None, None
    rows = []
    diverged = False
    for tick in range(n * m + 1):
        k, j = divmod(tick, m)
        t = k * dt + j * dtc
        r = r_grid[tick]
        y = c.C @ x
        e = r - y
        if sc.filter_mode == "fuzzy":
            e_dot = fuzzy.rate_estimate(e, e_prev, dtc)
            kf = fuzzy.schedule_kf(e, e_dot, sc.schedule, mfs, prev_kf=kf_prev)
            if kf is not None:
                kf_prev = kf
            K = sc.schedule.k * np.eye(2) if kf is None else np.eye(2) / kf
        else:
            K = np.diag(c.K_const)
        e_prev = e
        u = plant_input(cs, x, c)
        if j == 0:
            rows.append(np.concatenate([[t], x, cs.x_hat, y, r, e, u, np.diag(K), cs.estimates()]))
        if tick == n * m:
            break
        cs = controller_step(cs, x, r, K, c, dtc)

        def f(tt, xx, u=u):
            return trms_derivative(xx, u, scheduled_params(sc.plant, sc.uncertainty, tt), tt)

        try:
            x = rk4_step(f, x, t, dtc)
        except IntegrationError:
            diverged = True
            break
        if not np.all(np.isfinite(x)) or np.abs(x).max() > sc.threshold:
            diverged = True
            break
    return Trace(np.array(rows), diverged, _meta(sc, diverged, "reference"))


def run_scenario(sc, engine="kernel"):
    if engine == "kernel":
        return run_kernel(sc)
    if engine == "reference":
        return run_reference(sc)
    raise ValueError(f"unknown engine '{engine}'")


def emit_csv(trace, path):
    if len(trace) == 0:
        raise ValueError("empty trace")
    np.savetxt(path, trace.data, delimiter=",", header=",".join(COLUMNS), comments="", fmt="%.17g")


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header != COLUMNS:
        raise ValueError("unexpected trace header")
    return Trace(np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1)))


def emit_meta(trace, path, **extra):
    with open(path, "w") as fh:
        json.dump({**trace.meta, "rows": len(trace), **extra}, fh, indent=2)

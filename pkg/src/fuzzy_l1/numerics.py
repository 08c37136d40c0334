"""Fixed-step integration, small dense linear algebra and norms."""

from dataclasses import dataclass

import numpy as np


class IntegrationError(RuntimeError):
    """Raised when a derivative evaluation produces a non-finite entry."""

    def __init__(self, t, index):
        super().__init__(f"non-finite derivative at t={t:g}, component {index}")
        self.t = t
        self.index = index


class LyapunovError(RuntimeError):
    pass


class NotHurwitzError(LyapunovError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    """Sample grid of a simulation.

    ``dt`` is the capture interval of the trace; plant and controller advance
    together ``control_substeps`` times per interval.
    """

    dt: float = 0.01
    t_end: float = 23.0
    control_substeps: int = 1
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.control_substeps) != self.control_substeps or self.control_substeps < 1:
            raise ValueError("control_substeps must be a positive integer")
        if not self.t_end >= self.dt:
            raise ValueError("t_end must be at least dt")
        if self.n_steps > self.max_steps:
            raise ValueError(f"{self.n_steps} steps exceeds max_steps={self.max_steps}")

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))

    @property
    def control_dt(self):
        return self.dt / self.control_substeps


def _check_finite(d, t):
    bad = np.flatnonzero(~np.isfinite(d))
    if bad.size:
        raise IntegrationError(t, int(bad[0]))
    return d


def rk4_step(f, x, t, dt):
    """One classical Runge-Kutta step of ``x' = f(t, x)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    k1 = _check_finite(np.asarray(f(t, x), dtype=float), t)
    if k1.shape != x.shape:
        raise ValueError(f"derivative shape {k1.shape} != state shape {x.shape}")
    k2 = _check_finite(np.asarray(f(t + dt / 2, x + dt / 2 * k1), dtype=float), t + dt / 2)
    k3 = _check_finite(np.asarray(f(t + dt / 2, x + dt / 2 * k2), dtype=float), t + dt / 2)
    k4 = _check_finite(np.asarray(f(t + dt, x + dt * k3), dtype=float), t + dt)
    return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def solve_lyapunov(A, Q):
    """Solve ``A^T P + P A = -Q`` for symmetric positive definite ``P``.

    The equation is vectorized with Kronecker products into an n^2 x n^2
    system. A Cholesky factorization of the result certifies that ``A`` is
    Hurwitz.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or Q.shape != (n, n):
        raise ValueError("A and Q must be square and the same size")
    if not np.allclose(Q, Q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Q).max())):
        raise ValueError("Q must be symmetric")
    eye = np.eye(n)
    # column-major vec: vec(A^T P) = (I kron A^T) vec(P), vec(P A) = (A^T kron I) vec(P)
    lhs = np.kron(eye, A.T) + np.kron(A.T, eye)
    rhs = -Q.reshape(-1, order="F")
    try:
        vec_p = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise LyapunovError("Lyapunov system is singular (A has eigenvalue pairs summing to zero)") from exc
    P = vec_p.reshape((n, n), order="F")
    P = 0.5 * (P + P.T)
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError as exc:
        raise NotHurwitzError("A_m not Hurwitz: Lyapunov solution is not positive definite") from exc
    return P


def lyapunov_residual(A, P, Q):
    return np.linalg.norm(A.T @ P + P @ A + Q, "fro")


def inf_norm(v):
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("inf_norm of an empty vector")
    return float(np.max(np.abs(v)))

"""L1 adaptive controller with a pluggable feedback-filter gain.

The controller drives the plant input ``u = v - K_x x`` where ``v`` is the
integrator state of the low-pass filter ``v' = -K eta_hat`` and ``K_x`` is an
optional static state feedback that places the reference dynamics
``A_m = A - B_m K_x``. With ``K_x = 0`` and no predictor feedback the laws
reduce to the textbook predictor/projection/filter structure.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .numerics import inf_norm, solve_lyapunov

N_EST = 16
# slices into the flat estimate vector: omega_hat (row-major), theta1, theta2, sigma1, sigma2
OMEGA, THETA1, THETA2, SIGMA1, SIGMA2 = (slice(0, 4), slice(4, 6), slice(6, 10),
                                         slice(10, 12), slice(12, 16))
UNMATCHED_MODES = ("dc_map", "ignore")


class ProjectionError(RuntimeError):
    """An estimate escaped its inflated admissible set."""


@dataclass(frozen=True)
class Bounds:
    theta1: tuple = (-50.0, 50.0)
    theta2: tuple = (-50.0, 50.0)
    sigma1: tuple = (-15.0, 15.0)
    sigma2: tuple = (-15.0, 15.0)
    omega_diag: tuple = (0.25, 5.0)
    omega_offdiag: tuple = (-0.5, 0.5)

    def __post_init__(self):
        for name in ("theta1", "theta2", "sigma1", "sigma2", "omega_diag", "omega_offdiag"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"bounds.{name}: lower must be below upper")

    def flat(self):
        """Lower and upper limits for the flat 16-vector of estimates."""
        lo = np.empty(N_EST)
        hi = np.empty(N_EST)
        for sl, box in ((THETA1, self.theta1), (THETA2, self.theta2),
                        (SIGMA1, self.sigma1), (SIGMA2, self.sigma2)):
            lo[sl], hi[sl] = box
        lo[OMEGA] = [self.omega_diag[0], self.omega_offdiag[0], self.omega_offdiag[0], self.omega_diag[0]]
        hi[OMEGA] = [self.omega_diag[1], self.omega_offdiag[1], self.omega_offdiag[1], self.omega_diag[1]]
        return lo, hi


def inflated_limits(lo, hi, epsilon):
    """Edges of the set where the projection boundary function reaches 1."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo) * np.sqrt(1.0 + epsilon)
    return c - h, c + h


@dataclass(frozen=True, eq=False)
class L1Config:
    A_m: np.ndarray
    B_m: np.ndarray
    B_um: np.ndarray
    C: np.ndarray
    Q: np.ndarray = field(default_factory=lambda: np.eye(6))
    Gamma: float = 1e5
    K_const: tuple = (10.0, 10.0)
    bounds: Bounds = field(default_factory=Bounds)
    proj_epsilon: float = 0.1
    unmatched_mode: str = "dc_map"
    baseline_gain: np.ndarray = None
    predictor_feedback: float = None
    adaptation_substeps: int = 1
    bumpless_start: bool = True
    omega_hat0: tuple = ((1.0, 0.0), (0.0, 1.0))

    def __post_init__(self):
        for name in ("A_m", "B_m", "B_um", "C", "Q"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        n, m = self.B_m.shape
        if self.A_m.shape != (n, n) or self.C.shape != (m, n) or self.B_um.shape != (n, n - m):
            raise ValueError("inconsistent controller matrix dimensions")
        if self.baseline_gain is None:
            object.__setattr__(self, "baseline_gain", np.zeros((m, n)))
        else:
            object.__setattr__(self, "baseline_gain", np.array(self.baseline_gain, dtype=float))
        if self.baseline_gain.shape != (m, n):
            raise ValueError("baseline_gain must be m x n")
        if not self.Gamma > 0:
            raise ValueError("Gamma must be positive")
        if len(self.K_const) != m or min(self.K_const) <= 0:
            raise ValueError("K_const must be a positive diagonal")
        if self.unmatched_mode not in UNMATCHED_MODES:
            raise ValueError(f"unmatched_mode must be one of {UNMATCHED_MODES}")
        if not self.proj_epsilon > 0:
            raise ValueError("proj_epsilon must be positive")
        if self.predictor_feedback is not None and not self.predictor_feedback > 0:
            raise ValueError("predictor_feedback must be positive or None")
        if int(self.adaptation_substeps) < 1:
            raise ValueError("adaptation_substeps must be >= 1")
        # Hurwitz certificate of the reference dynamics
        self.P_ref

    @cached_property
    def P_ref(self):
        """Lyapunov certificate of ``A_m`` itself."""
        return solve_lyapunov(self.A_m, self.Q)

    @cached_property
    def L(self):
        """Predictor error-injection gain; places the error dynamics at ``-lambda I``."""
        n = self.A_m.shape[0]
        if self.predictor_feedback is None:
            return np.zeros((n, n))
        return self.A_m + self.predictor_feedback * np.eye(n)

    @cached_property
    def P(self):
        """Lyapunov matrix of the prediction-error dynamics used by the adaptive laws."""
        if self.predictor_feedback is None:
            return self.P_ref
        return solve_lyapunov(self.A_m - self.L, self.Q)

    @cached_property
    def K_g(self):
        return compute_Kg(self.A_m, self.B_m, self.C)

    @cached_property
    def M(self):
        return unmatched_map(self.A_m, self.B_m, self.B_um, self.C, self.unmatched_mode)

    @cached_property
    def limits(self):
        return self.bounds.flat()

    @cached_property
    def inflated(self):
        return inflated_limits(*self.limits, self.proj_epsilon)


def compute_Kg(A_m, B_m, C):
    """Static feedforward gain ``-(C A_m^-1 B_m)^-1`` for unit DC gain."""
    H0 = C @ np.linalg.solve(A_m, B_m)
    if np.linalg.cond(H0) > 1e14:
        raise np.linalg.LinAlgError("DC gain singular: C A_m^-1 B_m is not invertible")
    return -np.linalg.inv(H0)


def unmatched_map(A_m, B_m, B_um, C, mode="dc_map"):
    """Static map taking unmatched estimates into the control channel."""
    if mode == "ignore":
        return np.zeros((B_m.shape[1], B_um.shape[1]))
    H_m = C @ np.linalg.solve(A_m, B_m)
    H_um = C @ np.linalg.solve(A_m, B_um)
    return np.linalg.solve(H_m, H_um)


@dataclass(frozen=True, eq=False)
class ControllerState:
    x_hat: np.ndarray
    omega_hat: np.ndarray
    theta1_hat: np.ndarray
    theta2_hat: np.ndarray
    sigma1_hat: np.ndarray
    sigma2_hat: np.ndarray
    u: np.ndarray

    def estimates(self):
        """Flat 16-vector ``[omega(4), theta1(2), theta2(4), sigma1(2), sigma2(4)]``."""
        return np.concatenate([np.ravel(self.omega_hat), self.theta1_hat, self.theta2_hat,
                               self.sigma1_hat, self.sigma2_hat])

    def with_estimates(self, est):
        est = np.asarray(est, dtype=float)
        return replace(self, omega_hat=est[OMEGA].reshape(2, 2), theta1_hat=est[THETA1],
                       theta2_hat=est[THETA2], sigma1_hat=est[SIGMA1], sigma2_hat=est[SIGMA2])

    @classmethod
    def initial(cls, x0, cfg):
        x0 = np.asarray(x0, dtype=float)
        v0 = cfg.baseline_gain @ x0 if cfg.bumpless_start else np.zeros(2)
        return cls(x_hat=x0.copy(), omega_hat=np.array(cfg.omega_hat0, dtype=float),
                   theta1_hat=np.zeros(2), theta2_hat=np.zeros(4), sigma1_hat=np.zeros(2),
                   sigma2_hat=np.zeros(4), u=v0)


def plant_input(cs, x, cfg):
    """Signal applied to the plant: filter state minus baseline feedback."""
    return cs.u - cfg.baseline_gain @ x


def predictor_derivative(cs, x, u, cfg):
    """State predictor driven by the plant input ``u`` and measured ``x``."""
    n = inf_norm(x)
    matched = cs.omega_hat @ u + cfg.baseline_gain @ x + cs.theta1_hat * n + cs.sigma1_hat
    unmatched = cs.theta2_hat * n + cs.sigma2_hat
    return (cfg.A_m @ cs.x_hat + cfg.B_m @ matched + cfg.B_um @ unmatched
            - cfg.L @ (cs.x_hat - x))


def proj(theta, y, lo, hi, epsilon):
    """Elementwise smooth projection operator over a box.

    Each coordinate uses ``f = (z^2 - h^2) / (eps h^2)`` with ``z`` the offset
    from the box centre and ``h`` the half-width; the outward component of
    ``y`` is scaled by ``1 - f`` once ``f`` is positive, vanishing on the
    inflated edge ``f = 1``.
    """
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), theta.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), theta.shape)
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    z = theta - c
    f = (z * z - h * h) / (epsilon * h * h)
    if np.any(f > 1 + 1e-9):
        raise ProjectionError("estimate outside inflated projection set")
    grad = 2 * z / (epsilon * h * h)
    active = (f > 0) & (grad * y > 0)
    return np.where(active, y * (1 - f), y)


def adaptation_derivative(cs, x, u, P, cfg):
    """Projected gradient laws; returns the flat 16-vector of estimate rates."""
    x_tilde = cs.x_hat - x
    n = inf_norm(x)
    gm = -(x_tilde @ P @ cfg.B_m)
    gu = -(x_tilde @ P @ cfg.B_um)
    raw = np.concatenate([np.outer(gm, u).ravel(), gm * n, gu * n, gm, gu])
    lo, hi = cfg.limits
    return cfg.Gamma * proj(cs.estimates(), raw, lo, hi, cfg.proj_epsilon)


def eta_hat(cs, x, r, K_g, cfg):
    u = plant_input(cs, x, cfg)
    n = inf_norm(x)
    eta1 = cs.theta1_hat * n + cs.sigma1_hat
    eta2 = cs.theta2_hat * n + cs.sigma2_hat
    return cs.omega_hat @ u + cfg.baseline_gain @ x + eta1 + cfg.M @ eta2 - K_g @ np.asarray(r, dtype=float)


def control_derivative(eta, K):
    K = np.asarray(K, dtype=float)
    k = np.diag(K) if K.ndim == 2 else K
    if K.ndim == 2 and np.any(K - np.diag(k)):
        raise ValueError("filter gain must be diagonal")
    if np.any(k <= 0):
        raise ValueError("filter gain must have positive diagonal")
    return -k * np.asarray(eta, dtype=float)


def controller_step(cs, x, r, K_t, cfg, dt):
    """Advance the controller over one sample period.

    The plant input ``u_k`` is held across the period and the measurement ``x``
    is sampled. Each of ``cfg.adaptation_substeps`` sub-intervals integrates
    predictor and filter by RK4 with estimates frozen, then moves the
    estimates by one projected Euler step clipped to the inflated set.
    """
    x = np.asarray(x, dtype=float)
    u_k = plant_input(cs, x, cfg)
    nsub = int(cfg.adaptation_substeps)
    h = dt / nsub
    lo, hi = cfg.inflated
    P, K_g = cfg.P, cfg.K_g

    for _ in range(nsub):
        rates = adaptation_derivative(cs, x, u_k, P, cfg)

        def rhs(z, cs=cs):
            s = replace(cs, x_hat=z[:6], u=z[6:])
            return np.concatenate([predictor_derivative(s, x, u_k, cfg),
                                   control_derivative(eta_hat(s, x, r, K_g, cfg), K_t)])

        z = np.concatenate([cs.x_hat, cs.u])
        k1 = rhs(z)
        k2 = rhs(z + h / 2 * k1)
        k3 = rhs(z + h / 2 * k2)
        k4 = rhs(z + h * k3)
        z = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        est = np.clip(cs.estimates() + h * rates, lo, hi)
        cs = replace(cs, x_hat=z[:6], u=z[6:]).with_estimates(est)
    return cs

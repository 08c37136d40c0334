"""Twin Rotor MIMO System model.

State ``x = [psi, psi_dot, phi, phi_dot, tau1, tau2]`` (pitch, pitch rate,
yaw, yaw rate, main and tail rotor momenta); outputs are pitch and yaw.
"""

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

# Nominal coefficients of the reference TRMS rig, a1..a18.
NOMINAL_A = (
    6.8e-2, 2.0e-2, 0.0135, 0.0924, 0.02, 0.09, 0.32, 6e-3, 1e-3,
    0.1, 0.01, 0.5, 1.1, 0.8, 1.1, 1.0, 1.0, 1.0,
)
GYRO_COEFF = 0.0362
COUPLING_COEFF = 1.75

THRUST_LAWS = ("signed", "printed")
YAW_DAMPING_STATES = ("x6", "x5")


@dataclass(frozen=True)
class PlantParams:
    """Physical constants of the rig.

    ``thrust_law`` selects how rotor momentum enters the quadratic thrust
    terms: ``"signed"`` uses ``tau*|tau|`` (reversible rotors), ``"printed"``
    uses ``tau**2`` literally. ``yaw_damping_state`` picks the state damped
    in the tail-rotor row.
    """

    a: tuple = NOMINAL_A
    kc: float = -0.2
    omega: tuple = ((1.0, 0.0), (0.0, 1.0))
    thrust_law: str = "signed"
    yaw_damping_state: str = "x6"

    def __post_init__(self):
        a = tuple(float(v) for v in self.a)
        if len(a) != 18:
            raise ValueError("PlantParams needs exactly 18 constants a1..a18")
        object.__setattr__(self, "a", a)
        om = np.asarray(self.omega, dtype=float)
        if om.shape != (2, 2):
            raise ValueError("omega must be 2x2")
        object.__setattr__(self, "omega", tuple(map(tuple, om.tolist())))
        for i in (1, 2, 15, 17):
            if not a[i - 1] > 0:
                raise ValueError(f"a{i} must be strictly positive")
        if abs(np.linalg.det(om)) < 1e-12 or om[0, 0] <= 0 or om[1, 1] <= 0:
            raise ValueError("omega must be nonsingular with positive diagonal")
        if self.thrust_law not in THRUST_LAWS:
            raise ValueError(f"thrust_law must be one of {THRUST_LAWS}")
        if self.yaw_damping_state not in YAW_DAMPING_STATES:
            raise ValueError(f"yaw_damping_state must be one of {YAW_DAMPING_STATES}")

    def ai(self, i):
        """1-based access to a_i."""
        return self.a[i - 1]

    @property
    def omega_matrix(self):
        return np.array(self.omega)

    def to_dict(self):
        d = {f"a{i + 1}": v for i, v in enumerate(self.a)}
        d.update(kc=self.kc, omega=[list(r) for r in self.omega],
                 thrust_law=self.thrust_law, yaw_damping_state=self.yaw_damping_state)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            a=tuple(d[f"a{i}"] for i in range(1, 19)),
            kc=d.get("kc", -0.2),
            omega=d.get("omega", ((1.0, 0.0), (0.0, 1.0))),
            thrust_law=d.get("thrust_law", "signed"),
            yaw_damping_state=d.get("yaw_damping_state", "x6"),
        )


@dataclass(frozen=True)
class UncertaintySchedule:
    """Time-varying parameter perturbation.

    In ``case2`` mode a_i for odd i <= max_index is scaled by
    ``1 + amplitude*sin(sin_frequency*t)`` and even i <= max_index by
    ``1 + amplitude*cos(cos_frequency*t)``.
    """

    mode: str = "none"
    amplitude: float = 0.2
    sin_frequency: float = 0.3
    cos_frequency: float = 0.25
    max_index: int = 14

    def __post_init__(self):
        if self.mode not in ("none", "case2"):
            raise ValueError("uncertainty mode must be 'none' or 'case2'")
        if not 0 <= self.amplitude < 1:
            raise ValueError("amplitude must lie in [0, 1)")
        if not 0 <= self.max_index <= 18:
            raise ValueError("max_index must lie in [0, 18]")

    def factors(self, t):
        """Per-constant multipliers at time ``t`` (length 18)."""
        f = np.ones(18)
        if self.mode == "case2":
            idx = np.arange(1, 19)
            active = idx <= self.max_index
            odd = active & (idx % 2 == 1)
            even = active & (idx % 2 == 0)
            f[odd] = 1 + self.amplitude * np.sin(self.sin_frequency * t)
            f[even] = 1 + self.amplitude * np.cos(self.cos_frequency * t)
        return f


def scheduled_params(p_nominal, sched, t):
    if sched.mode == "none":
        return p_nominal
    a = tuple(np.asarray(p_nominal.a) * sched.factors(t))
    return replace(p_nominal, a=a)


def _sq(v, law):
    return v * abs(v) if law == "signed" else v * v


def trms_derivative(x, u, p, t=0.0):
    """Right-hand side of the six-state TRMS model with physical input ``omega @ u``."""
    a1, a2, a3, a4, a5, a6, a7, a8, _, a10, _, a12, a13, a14, a15, a16, a17, a18 = p.a
    x1, x2, x3, x4, x5, x6 = x
    w = p.omega_matrix @ np.asarray(u, dtype=float)
    law = p.thrust_law
    main = a3 * _sq(x5, law) + a5 * x5
    damped = x6 if p.yaw_damping_state == "x6" else x5
    return np.array([
        x2,
        (main - a7 * np.sin(x1) - a8 * x2 + GYRO_COEFF * x4 * x4 * np.sin(2 * x1)
         - a12 * main * x4 * np.cos(x1)) / a1,
        x4,
        (a4 * _sq(x6, law) + a6 * x6 - a10 * x4 - COUPLING_COEFF * p.kc * main) / a2,
        (-a16 * x5 + a13 * w[0]) / a15,
        (-a18 * damped + a14 * w[1]) / a17,
    ])


@dataclass(frozen=True)
class PlantMatrices:
    A: np.ndarray
    B_m: np.ndarray
    B_um: np.ndarray
    C: np.ndarray
    f1: Callable = field(repr=False)
    f2: Callable = field(repr=False)


def decompose(p):
    """Split the model into ``A x + B_m (omega u + f1) + B_um f2``.

    ``f2`` is four-dimensional, ``[0, pitch nonlinearity, 0, yaw nonlinearity]``,
    so that ``B_um = [I4; 0]`` places it on rows 1..4.
    """
    a1, a2, a3, a4, a5, a6, a7, a8, _, a10, _, a12, a13, a14, a15, a16, a17, a18 = p.a
    kc = p.kc
    law = p.thrust_law
    A = np.zeros((6, 6))
    A[0, 1] = 1.0
    A[1, 1] = -a8 / a1
    A[1, 4] = a5 / a1
    A[2, 3] = 1.0
    A[3, 3] = -a10 / a2
    A[3, 4] = -COUPLING_COEFF * kc / a2 * a5
    A[3, 5] = a6 / a2
    A[4, 4] = -a16 / a15
    A[5, 5 if p.yaw_damping_state == "x6" else 4] = -a18 / a17
    B_m = np.zeros((6, 2))
    B_m[4, 0] = a13 / a15
    B_m[5, 1] = a14 / a17
    B_um = np.zeros((6, 4))
    B_um[:4, :4] = np.eye(4)
    C = np.zeros((2, 6))
    C[0, 0] = 1.0
    C[1, 2] = 1.0

    def f1(x, t=0.0):
        return np.zeros(2)

    def f2(x, t=0.0):
        x1, _, _, x4, x5, x6 = x
        pitch = (a3 * _sq(x5, law) - a7 * np.sin(x1) + GYRO_COEFF * x4 * x4 * np.sin(2 * x1)
                 - a12 * (a3 * _sq(x5, law) + a5 * x5) * x4 * np.cos(x1)) / a1
        yaw = (a4 * _sq(x6, law) - COUPLING_COEFF * kc * a3 * _sq(x5, law)) / a2
        return np.array([0.0, pitch, 0.0, yaw])

    return PlantMatrices(A=A, B_m=B_m, B_um=B_um, C=C, f1=f1, f2=f2)

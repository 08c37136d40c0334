"""Mamdani fuzzy scheduler for the L1 filter gain.

Inputs are the normalized error and error-rate infinity norms, each with four
triangular terms Z < VS < S < L on [0, 1]. The output k_f has six terms
Z < VS < S < M < L < VL and the filter gain is ``K = I / k_f``.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import inf_norm

N_PARAMS = 32
INPUT_TERMS = ("Z", "VS", "S", "L")
OUTPUT_TERMS = ("Z", "VS", "S", "M", "L", "VL")
GRID = np.linspace(0.0, 1.0, 201)
MIN_WIDTH, WIDTH_SPAN = 0.02, 0.48

# RULES[i, j]: output term for error term i and error-rate term j (both Z..L order).
# The table is a staircase: each step up in either input raises the output one term.
RULES = np.minimum(np.add.outer(np.arange(4), np.arange(4)), 5)


@dataclass(frozen=True)
class FilterSchedule:
    k_p: float = 3.45
    k_d: float = 0.05
    k_e: float = 0.09
    k: float = 10.0
    k_f_min: float = 0.01

    def __post_init__(self):
        for name in ("k_p", "k_d", "k_e", "k", "k_f_min"):
            if not getattr(self, name) > 0:
                raise ValueError(f"filter.{name} must be positive")


@dataclass(frozen=True, eq=False)
class MFSet:
    """Decoded membership functions, each row ``(a, b, c)``."""

    e: np.ndarray
    de: np.ndarray
    out: np.ndarray


def tri_eval(mf, x):
    a, b, c = mf
    if a == b and x <= b:
        return 1.0
    if b == c and x >= b:
        return 1.0
    if x <= a or x >= c:
        return 0.0
    if x <= b:
        return (x - a) / (b - a)
    return (c - x) / (c - b)


def tri_eval_vec(mf, xs):
    """Vectorized ``tri_eval``; ``mf`` may be a stack of triangles ``(..., 3)`` broadcast against ``xs``."""
    mf = np.asarray(mf, dtype=float)
    a, b, c = mf[..., 0], mf[..., 1], mf[..., 2]
    xs = np.asarray(xs, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        up = np.where(b > a, (xs - a) / (b - a), 1.0)
        down = np.where(c > b, (c - xs) / (c - b), 1.0)
    mu = np.clip(np.minimum(up, down), 0.0, 1.0)
    mu = np.where((a == b) & (xs <= b), 1.0, mu)
    return np.where((b == c) & (xs >= b), 1.0, mu)


def repair(p):
    p = np.asarray(p, dtype=float)
    if p.shape[-1:] != (N_PARAMS,):
        raise ValueError(f"fuzzy parameter vector must have length {N_PARAMS}")
    return np.clip(np.nan_to_num(p, nan=0.5), 0.0, 1.0)


def _fix(tris):
    return np.clip(np.sort(tris, axis=-1), 0.0, 1.0)


def _decode_input(q):
    bz, bvs, bs, bl = np.moveaxis(np.sort(q[..., :4], axis=-1), -1, 0)
    f = q[..., 4:8]
    return _fix(np.stack([
        np.stack([bz, bz, bvs + f[..., 0] * (bs - bvs)], -1),
        np.stack([bz, bvs, bs + f[..., 1] * (bl - bs)], -1),
        np.stack([bvs - f[..., 2] * (bvs - bz), bs, bl], -1),
        np.stack([bs - f[..., 3] * (bs - bvs), bl, bl], -1),
    ], -2))


def _decode_output(q):
    peaks = np.sort(q[..., :6], axis=-1)
    left = MIN_WIDTH + WIDTH_SPAN * q[..., 6:11]    # VS..VL
    right = MIN_WIDTH + WIDTH_SPAN * q[..., 11:16]  # Z..L
    edge = np.zeros(peaks.shape[:-1] + (1,))
    a = np.concatenate([edge, peaks[..., 1:] - left], -1)
    c = np.concatenate([peaks[..., :-1] + right, edge + 1.0], -1)
    return _fix(np.stack([a, peaks, c], -1))


def decode_batch(P):
    """Decode an ``(n, 32)`` array at once; returns ``(e, de, out)`` of shapes ``(n, 4|6, 3)``."""
    q = repair(P)
    return _decode_input(q[..., 0:8]), _decode_input(q[..., 8:16]), _decode_output(q[..., 16:32])


def decode_and_repair(p):
    """Map a 32-vector onto the three MF families.

    Per input (8 values): four sorted peaks, then four foot-stretch factors
    that slide the free foot of Z, VS, S, L between neighbouring peaks.
    Output (16 values): six sorted peaks, five left half-widths (VS..VL) and
    five right half-widths (Z..L); Z's left foot sits at 0 and VL's right
    foot at 1.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (N_PARAMS,):
        raise ValueError(f"fuzzy parameter vector must have length {N_PARAMS}")
    e, de, out = decode_batch(p)
    return MFSet(e=e, de=de, out=out)


def uniform_params():
    """Parameter vector decoding to evenly spaced triangles."""
    inp = [0.0, 1 / 3, 2 / 3, 1.0, 0.0, 0.0, 0.0, 0.0]
    out = list(np.linspace(0.0, 1.0, 6)) + [(0.2 - MIN_WIDTH) / WIDTH_SPAN] * 10
    return np.array(inp + inp + out)


def firing_strengths(e_norm, de_norm, mfs, rules=RULES):
    mu_e = np.array([tri_eval(m, e_norm) for m in mfs.e])
    mu_de = np.array([tri_eval(m, de_norm) for m in mfs.de])
    w = np.minimum.outer(mu_e, mu_de)
    out = np.zeros(len(mfs.out))
    np.maximum.at(out, rules.ravel(), w.ravel())
    return out


def infer_kf(e_norm, de_norm, mfs, rules=RULES, k_f_min=0.01, prev_kf=None):
    """Mamdani min/max inference with centroid defuzzification on 201 points."""
    e_norm = min(max(e_norm, 0.0), 1.0)
    de_norm = min(max(de_norm, 0.0), 1.0)
    w = firing_strengths(e_norm, de_norm, mfs, rules)
    agg = np.zeros_like(GRID)
    for o, strength in enumerate(w):
        if strength > 0:
            agg = np.maximum(agg, np.minimum(strength, tri_eval_vec(mfs.out[o], GRID)))
    total = agg.sum()
    if total <= 0:
        if prev_kf is not None:
            return prev_kf
        kf = float(np.mean(mfs.out[0]))
    else:
        kf = float(GRID @ agg / total)
    return max(kf, k_f_min)


def schedule_kf(e, e_dot, sched, mfs, rules=RULES, prev_kf=None):
    """Scheduled ``k_f``, or ``None`` while the error sits inside the ``k_e`` band."""
    en = inf_norm(e)
    if en <= sched.k_e:
        return None
    return infer_kf(min(sched.k_p * en, 1.0), min(sched.k_d * inf_norm(e_dot), 1.0),
                    mfs, rules, sched.k_f_min, prev_kf)


def schedule_gain(e, e_dot, sched, mfs, rules=RULES, prev_kf=None):
    kf = schedule_kf(e, e_dot, sched, mfs, rules, prev_kf)
    k = sched.k if kf is None else 1.0 / kf
    return k * np.eye(2)


def rate_estimate(e_now, e_prev, dt):
    if not dt > 0:
        raise ValueError("dt must be positive")
    e_now = np.asarray(e_now, dtype=float)
    if e_prev is None:
        return np.zeros_like(e_now)
    return (e_now - np.asarray(e_prev, dtype=float)) / dt

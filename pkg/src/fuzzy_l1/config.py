"""JSON scenario configs: loading, base merging and validation.

A config may name a ``base`` file; the base is loaded first and the config's
keys are merged over it recursively. Relative paths resolve against the
config's own directory, then against the bundled data directory.
"""

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import fuzzy
from .l1 import Bounds, L1Config
from .numerics import IntegratorConfig, LyapunovError
from .plant import PlantParams, UncertaintySchedule, decompose

SCENARIOS = ("case1", "case2", "fig6a", "fig6b", "tuning-ref")
DEFAULT_THRESHOLD = 1e6


class ConfigError(ValueError):
    """Validation failure; ``errors`` lists ``(field_path, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))


def data_dir():
    return Path(str(resources.files("fuzzy_l1") / "data"))


def _resolve(name, here):
    p = Path(name)
    if p.is_absolute():
        return p
    for cand in (Path(here) / p, data_dir() / p):
        if cand.exists():
            return cand
    return Path(here) / p


def deep_merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_raw(path):
    """Read a config file and fold in its ``base`` chain."""
    path = Path(path)
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError([("<file>", f"invalid JSON: {exc}")]) from exc
    if not isinstance(d, dict):
        raise ConfigError([("<root>", "config must be a JSON object")])
    d["_dir"] = str(path.parent.resolve())
    if "base" in d:
        base = load_raw(_resolve(d.pop("base"), path.parent))
        d = deep_merge(base, d)
    return d


def bundled_path(name):
    p = data_dir() / f"{name}.json"
    if not p.exists():
        raise ConfigError([("scenario", f"unknown bundled scenario '{name}'; choose from {SCENARIOS}")])
    return p


def config_hash(d):
    clean = {k: v for k, v in d.items() if not k.startswith("_")}
    return hashlib.sha256(json.dumps(clean, sort_keys=True).encode()).hexdigest()[:16]


class Reference:
    """Per-channel sum of sine, cosine, step and constant terms."""

    TYPES = {"sine": ("amplitude", "frequency"), "cosine": ("amplitude", "frequency"),
             "step": ("amplitude", "time"), "constant": ("value",)}

    def __init__(self, channels):
        self.channels = channels

    @staticmethod
    def _term(term, t):
        kind = term["type"]
        if kind == "sine":
            return term["amplitude"] * np.sin(term["frequency"] * t + term.get("phase", 0.0))
        if kind == "cosine":
            return term["amplitude"] * np.cos(term["frequency"] * t + term.get("phase", 0.0))
        if kind == "step":
            return term["amplitude"] * (np.asarray(t) >= term["time"])
        return term["value"] * np.ones_like(np.asarray(t, dtype=float))

    def __call__(self, t):
        return np.array([sum(self._term(m, t) for m in ch) + 0.0 * t for ch in self.channels], dtype=float)

    def grid(self, dt, n_steps):
        t = np.arange(n_steps + 1) * dt
        return np.ascontiguousarray(self(t).T)


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    plant: PlantParams
    uncertainty: UncertaintySchedule
    controller: L1Config
    filter_mode: str
    schedule: fuzzy.FilterSchedule
    fuzzy_params: np.ndarray
    reference: Reference
    x0: np.ndarray
    integrator: IntegratorConfig
    threshold: float
    expect_divergence: bool
    seed: int
    raw: dict

    @property
    def mfs(self):
        return fuzzy.decode_and_repair(self.fuzzy_params)

    @property
    def hash(self):
        return config_hash(self.raw)


def _matrix(v, shape):
    a = np.asarray(v, dtype=float)
    if a.shape != shape or not np.all(np.isfinite(a)):
        raise ValueError(f"expected finite {shape[0]}x{shape[1]} matrix")
    return a


def _load_params(flt, here):
    if "params" in flt:
        return np.asarray(flt["params"], dtype=float)
    with open(_resolve(flt["params_file"], here)) as fh:
        return np.asarray(json.load(fh)["vector"], dtype=float)


def build(d):
    """Validate a merged config dict and construct a :class:`Scenario`."""
    errs = []
    here = d.get("_dir", ".")

    def guard(path, fn):
        try:
            return fn()
        except ConfigError as exc:
            errs.extend(exc.errors)
        except (ValueError, TypeError, KeyError, LyapunovError, np.linalg.LinAlgError, OSError) as exc:
            errs.append((path, str(exc).strip("'\"") or type(exc).__name__))
        return None

    for key in ("plant", "controller", "reference"):
        if not isinstance(d.get(key), dict):
            errs.append((key, "missing or not an object"))
    if errs:
        raise ConfigError(errs)

    pd = d["plant"]
    for i in range(1, 19):
        v = pd.get(f"a{i}")
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            errs.append((f"plant.a{i}", "required number"))
    plant = None if errs else guard("plant", lambda: PlantParams.from_dict(pd))
    unc = guard("uncertainty", lambda: UncertaintySchedule(**d.get("uncertainty", {})))
    integ = guard("integrator", lambda: IntegratorConfig(**d.get("integrator", {})))

    cd = d["controller"]
    ctrl = None
    if plant is not None:
        def make_ctrl():
            mats = decompose(plant)
            if "A_m" not in cd:
                raise ConfigError([("controller.A_m", "required 6x6 matrix")])
            A_m = guard("controller.A_m", lambda: _matrix(cd["A_m"], (6, 6)))
            Kx = guard("controller.baseline_gain", lambda: _matrix(cd.get("baseline_gain", np.zeros((2, 6))), (2, 6)))
            Q = np.eye(6) if cd.get("Q", "identity") == "identity" else guard("controller.Q", lambda: _matrix(cd["Q"], (6, 6)))
            bounds = guard("controller.bounds", lambda: Bounds(**{k: tuple(v) for k, v in cd.get("bounds", {}).items()}))
            if A_m is None or Kx is None or Q is None or bounds is None:
                return None
            mismatch = np.abs(mats.A - mats.B_m @ Kx - A_m).max()
            if mismatch > 1e-8 * max(1.0, np.abs(A_m).max()):
                raise ConfigError([("controller.A_m", f"differs from A - B_m K_x by {mismatch:.3g}")])
            opts = {k: cd[k] for k in ("Gamma", "proj_epsilon", "unmatched_mode", "predictor_feedback",
                                       "adaptation_substeps", "bumpless_start") if k in cd}
            if "K_const" in cd:
                opts["K_const"] = tuple(float(v) for v in cd["K_const"])
            return L1Config(A_m=A_m, B_m=mats.B_m, B_um=mats.B_um, C=mats.C, Q=Q, bounds=bounds,
                            baseline_gain=Kx, **opts)
        ctrl = guard("controller", make_ctrl)

    fd = d.get("filter", {"mode": "constant"})
    mode = fd.get("mode", "constant")
    if mode not in ("constant", "fuzzy"):
        errs.append(("filter.mode", "must be 'constant' or 'fuzzy'"))
    sched = guard("filter", lambda: fuzzy.FilterSchedule(
        **{k: float(fd[k]) for k in ("k_p", "k_d", "k_e", "k", "k_f_min") if k in fd}))
    params = fuzzy.uniform_params()
    if mode == "fuzzy":
        if "params" not in fd and "params_file" not in fd:
            errs.append(("filter.params", "fuzzy mode needs 'params' or 'params_file'"))
        else:
            p = guard("filter.params", lambda: _load_params(fd, here))
            if p is not None:
                if p.shape != (fuzzy.N_PARAMS,):
                    errs.append(("filter.params", f"need {fuzzy.N_PARAMS} values"))
                elif np.any(p < 0) or np.any(p > 1):
                    errs.append(("filter.params", "values must lie in [0, 1]"))
                else:
                    params = p

    rd = d["reference"]
    ref = None
    chans = rd.get("channels")
    if "both" in rd:
        chans = [rd["both"], rd["both"]]
    if not isinstance(chans, list) or len(chans) != 2:
        errs.append(("reference.channels", "need exactly 2 channels (or 'both')"))
    else:
        ok = True
        for c, ch in enumerate(chans):
            for j, term in enumerate(ch):
                path = f"reference.channels[{c}][{j}]"
                kind = term.get("type") if isinstance(term, dict) else None
                if kind not in Reference.TYPES:
                    errs.append((path + ".type", f"must be one of {sorted(Reference.TYPES)}"))
                    ok = False
                    continue
                for req in Reference.TYPES[kind]:
                    if not isinstance(term.get(req), (int, float)):
                        errs.append((f"{path}.{req}", "required number"))
                        ok = False
        if ok:
            ref = Reference(chans)

    x0 = guard("initial_state", lambda: _matrix(d.get("initial_state", [0.0] * 6), (6,)))
    e0 = guard("initial_error", lambda: np.broadcast_to(np.asarray(d.get("initial_error", 0.0), dtype=float), (2,)).copy())
    threshold = d.get("divergence_threshold", DEFAULT_THRESHOLD)
    if not isinstance(threshold, (int, float)) or not threshold > 0:
        errs.append(("divergence_threshold", "must be a positive number"))

    if errs:
        raise ConfigError(errs)

    x0 = x0.copy()
    r0 = ref(0.0)
    # an initial error offset places the outputs e0 away from the reference
    if "initial_error" in d:
        x0[0] = r0[0] - e0[0]
        x0[2] = r0[1] - e0[1]
    return Scenario(name=d.get("name", "scenario"), plant=plant, uncertainty=unc, controller=ctrl,
                    filter_mode=mode, schedule=sched, fuzzy_params=params, reference=ref, x0=x0,
                    integrator=integ, threshold=float(threshold),
                    expect_divergence=bool(d.get("expect_divergence", False)),
                    seed=int(d.get("seed", 0)), raw=d)


def load(path):
    return build(load_raw(path))


def load_bundled(name):
    return load(bundled_path(name))

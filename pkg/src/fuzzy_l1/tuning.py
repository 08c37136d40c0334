"""Tuning campaigns: MOPSO over the fuzzy membership vector.

A campaign config is JSON::

    {"scenario": "tuning-ref", "swarm": {"population": 30, "generations": 50, "seed": 0},
     "workers": 1}

``scenario`` is a bundled name or a path to a scenario config.
"""

import csv
import json
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import config, fuzzy, mopso

_SWARM_KEYS = {"population", "generations", "alpha", "c1", "c2", "n_int", "seed", "global_size", "local_size"}


def load_campaign(path):
    """Read a campaign file; returns ``(scenario, SwarmConfig, options)``."""
    path = Path(path)
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise config.ConfigError([("<file>", f"invalid JSON: {exc}")]) from exc
    return build_campaign(d, path.parent)


def build_campaign(d, here="."):
    errs = []
    name = d.get("scenario", "tuning-ref")
    sc = None
    try:
        if name in config.SCENARIOS or (config.data_dir() / f"{name}.json").exists():
            sc = config.load_bundled(name)
        else:
            sc = config.load(config._resolve(name, here))
    except config.ConfigError as exc:
        errs.extend((f"scenario.{p}", m) for p, m in exc.errors)
    except OSError as exc:
        errs.append(("scenario", str(exc)))
    sw = d.get("swarm", {})
    unknown = set(sw) - _SWARM_KEYS
    errs.extend((f"swarm.{k}", "unknown key") for k in sorted(unknown))
    cfg = None
    if not unknown:
        try:
            cfg = mopso.SwarmConfig(dim=fuzzy.N_PARAMS, **sw)
        except (TypeError, ValueError) as exc:
            errs.append(("swarm", str(exc)))
    workers = d.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        errs.append(("workers", "must be a positive integer"))
    if errs:
        raise config.ConfigError(errs)
    return sc, cfg, {"workers": workers}


class Evaluator:
    """Picklable ``position -> (E, U)`` for one scenario."""

    def __init__(self, scenario):
        self.scenario = scenario

    def __call__(self, position):
        return mopso.evaluate(position, self.scenario)


def write_pareto(entries, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "E", "U"] + [f"p{i}" for i in range(1, fuzzy.N_PARAMS + 1)])
        for i, (pos, obj) in enumerate(entries):
            w.writerow([i, repr(float(obj[0])), repr(float(obj[1]))] + [repr(float(v)) for v in pos])


def read_pareto(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return [(np.array([float(r[f"p{i}"]) for i in range(1, fuzzy.N_PARAMS + 1)]),
             mopso.Objectives(float(r["E"]), float(r["U"]))) for r in rows]


def write_history(history, path):
    """Columns generation, particle, E, U followed by the evaluated position."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["generation", "particle", "E", "U"] + [f"p{i}" for i in range(1, fuzzy.N_PARAMS + 1)])
        for gen, i, E, U, pos in history:
            w.writerow([gen, i, repr(float(E)), repr(float(U))] + [repr(float(v)) for v in pos])


def read_history(path):
    with open(path) as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"generation", "particle", "E", "U"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: not a history file")
        if "p1" not in reader.fieldnames:
            raise ValueError(f"{path}: history lacks position columns p1..p{fuzzy.N_PARAMS}")
        out = []
        for r in reader:
            pos = np.array([float(r[f"p{i}"]) for i in range(1, fuzzy.N_PARAMS + 1)])
            out.append((int(r["generation"]), int(r["particle"]), float(r["E"]), float(r["U"]), pos))
    return out


def front_from_history(history, size=50):
    """Non-dominated set of every logged evaluation, reduced to ``size``."""
    entries = [(pos, mopso.Objectives(E, U)) for _, _, E, U, pos in history]
    front = mopso.nondominated(entries)
    return mopso.cluster_reduce(front, size) if len(front) > size else front


def compromise_record(entry, **extra):
    pos, obj = entry
    return {"vector": [float(v) for v in pos], "E": float(obj[0]), "U": float(obj[1]), **extra}


def run_tuning(scenario, cfg, out_dir, workers=1, install=False, progress=None):
    """Run a campaign and write ``pareto.csv``, ``history.csv``, ``best_compromise.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ev = Evaluator(scenario)
    t0 = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            res = mopso.run(cfg, ev, map_fn=lambda f, xs: ex.map(f, xs), callback=progress)
    else:
        res = mopso.run(cfg, ev, callback=progress)
    elapsed = time.perf_counter() - t0
    write_pareto(res.pareto.entries, out / "pareto.csv")
    write_history(res.history, out / "history.csv")
    best = mopso.best_compromise(res.pareto.entries)
    rec = compromise_record(best, seed=cfg.seed, config_hash=scenario.hash, scenario=scenario.name,
                            swarm=asdict(cfg), workers=workers, elapsed_s=round(elapsed, 3))
    with open(out / "best_compromise.json", "w") as fh:
        json.dump(rec, fh, indent=2)
    with open(out / "hypervolume.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["generation", "global", "external"])
        for g, (a, b) in enumerate(zip(res.hypervolume, res.hypervolume_external)):
            w.writerow([g, repr(float(a)), repr(float(b))])
    if install:
        install_compromise(out / "best_compromise.json")
    return res, best


def install_compromise(path):
    """Make a compromise file the bundled default for fuzzy scenarios."""
    with open(path) as fh:
        rec = json.load(fh)
    vec = np.asarray(rec["vector"], dtype=float)
    if vec.shape != (fuzzy.N_PARAMS,) or np.any(vec < 0) or np.any(vec > 1):
        raise ValueError(f"{path}: not a valid {fuzzy.N_PARAMS}-vector in [0, 1]")
    dest = config.data_dir() / "best_compromise.json"
    shutil.copyfile(path, dest)
    return dest

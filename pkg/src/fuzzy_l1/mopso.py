"""Multi-objective particle swarm optimizer with clustered Pareto archives.

Minimizes two objectives. Every particle keeps a small local non-dominated
set; the swarm keeps an unbounded external set of everything non-dominated
seen so far and a global set obtained by clustering the union of external
and previous global sets. Guides are drawn uniformly from the local and
global sets.
"""

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

SENTINEL = (1e12, 1e12)


class Objectives(NamedTuple):
    E: float
    U: float


@dataclass(frozen=True)
class SwarmConfig:
    population: int = 30
    generations: int = 50
    alpha: float = 0.99
    c1: float = 2.0
    c2: float = 2.0
    n_int: int = 20
    seed: int = 0
    global_size: int = 50
    local_size: int = 10
    dim: int = 32
    p_min: float = 0.0
    p_max: float = 1.0

    def __post_init__(self):
        for name in ("population", "generations", "n_int", "global_size", "local_size", "dim"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"swarm.{name} must be a positive integer")
        if not 0 < self.alpha <= 1:
            raise ValueError("swarm.alpha must lie in (0, 1]")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("swarm.c1 and swarm.c2 must be non-negative")
        if not self.p_max > self.p_min:
            raise ValueError("swarm.p_max must exceed swarm.p_min")
        if self.global_size < 2 or self.local_size < 2:
            raise ValueError("archive sizes must be at least 2")

    @property
    def vmax(self):
        return v_max(self.p_max, self.p_min, self.n_int)


@dataclass
class Archive:
    """Mutually non-dominated ``(position, Objectives)`` entries."""

    capacity: int = None
    entries: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def objectives(self):
        return np.array([o for _, o in self.entries], dtype=float).reshape(-1, 2)


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    local: Archive


def v_max(p_max, p_min, n_int):
    if n_int < 1:
        raise ValueError("N_int must be at least 1")
    if not p_max > p_min:
        raise ValueError("p_max must exceed p_min")
    return (p_max - p_min) / n_int


def update_velocity(p, p_star, p_dstar, cfg, rng):
    d = p.position.shape[0]
    r1 = rng.random(d)
    r2 = rng.random(d)
    v = (cfg.alpha * p.velocity + cfg.c1 * r1 * (p_star - p.position)
         + cfg.c2 * r2 * (p_dstar - p.position))
    vm = cfg.vmax
    return np.clip(v, -vm, vm)


def update_position(position, velocity, p_min=0.0, p_max=1.0):
    """Move and clamp; velocity is zeroed on any clamped coordinate."""
    x = position + velocity
    hit = (x < p_min) | (x > p_max)
    return np.clip(x, p_min, p_max), np.where(hit, 0.0, velocity)


def dominates(a, b):
    return a[0] <= b[0] and a[1] <= b[1] and (a[0] < b[0] or a[1] < b[1])


def _dominated_mask(F):
    """``mask[i]`` is true when some row of ``F`` dominates row ``i``."""
    order = np.lexsort((F[:, 1], F[:, 0]))
    mask = np.zeros(len(F), dtype=bool)
    best_u = np.inf
    k = 0
    while k < len(order):
        # identical points never dominate each other, so treat them as a group
        g = k
        while g + 1 < len(order) and np.array_equal(F[order[g + 1]], F[order[k]]):
            g += 1
        u = F[order[k], 1]
        if best_u <= u:
            mask[order[k:g + 1]] = True
        best_u = min(best_u, u)
        k = g + 1
    return mask


def nondominated(entries):
    """Filter to the non-dominated members, keeping order."""
    if not entries:
        return []
    F = np.array([o for _, o in entries], dtype=float).reshape(-1, 2)
    keep = ~_dominated_mask(F)
    return [e for e, k in zip(entries, keep) if k]


def archive_insert(arch, candidate):
    """Return a new archive with ``candidate`` offered for membership."""
    obj = np.asarray(candidate[1], dtype=float)
    kept = list(arch.entries)
    if kept:
        F = arch.objectives()
        if np.any(np.all(F <= obj, axis=1) & np.any(F < obj, axis=1)):
            return Archive(arch.capacity, kept)
        gone = np.all(obj <= F, axis=1) & np.any(obj < F, axis=1)
        kept = [e for e, g in zip(kept, gone) if not g]
    kept.append(candidate)
    if arch.capacity is not None and len(kept) > arch.capacity:
        kept = cluster_reduce(kept, arch.capacity)
    return Archive(arch.capacity, kept)


def _normalized(entries):
    F = np.array([o for _, o in entries], dtype=float)
    lo = F.min(axis=0)
    span = F.max(axis=0) - lo
    span[span == 0] = 1.0
    return (F - lo) / span


def cluster_reduce(entries, target_size):
    """Average-linkage reduction in min-max normalized objective space.

    The first minimizers of each objective are pinned: they always survive
    and two pinned clusters are never merged. Each other cluster keeps the
    member nearest its centroid. Ties resolve by insertion order.
    """
    n = len(entries)
    if target_size >= n:
        return list(entries)
    if target_size < 2:
        raise ValueError("target_size must be at least 2")
    Z = _normalized(entries)
    pins = {int(np.argmin(Z[:, 0])), int(np.argmin(Z[:, 1]))}
    D = np.sqrt(((Z[:, None, :] - Z[None, :, :]) ** 2).sum(-1))
    D[np.diag_indices(n)] = np.inf
    pinned = np.array([i in pins for i in range(n)])
    D[np.ix_(pinned, pinned)] = np.inf
    size = np.ones(n)
    members = [[i] for i in range(n)]
    alive = np.ones(n, dtype=bool)
    # cached first argmin per row keeps each merge O(n)
    nearest = np.argmin(D, axis=1)
    near_d = D[np.arange(n), nearest]
    for _ in range(n - target_size):
        i = int(np.argmin(near_d))
        j = int(nearest[i])
        i, j = min(i, j), max(i, j)
        # Lance-Williams update for average linkage
        row = (size[i] * D[i] + size[j] * D[j]) / (size[i] + size[j])
        pinned[i] = pinned[i] or pinned[j]
        if pinned[i]:
            row[pinned] = np.inf
        row[i] = np.inf
        row[j] = np.inf
        D[i], D[:, i] = row, row
        D[j], D[:, j] = np.inf, np.inf
        size[i] += size[j]
        members[i] += members[j]
        alive[j] = False
        near_d[j] = np.inf
        stale = (nearest == i) | (nearest == j)
        stale[j] = False
        stale[i] = True
        for k in np.flatnonzero(stale):
            nearest[k] = np.argmin(D[k])
            near_d[k] = D[k, nearest[k]]
        # rows whose distance to the merged cluster shrank below their cached minimum
        better = (row < near_d) | ((row == near_d) & (i < nearest))
        better[i] = False
        nearest[better] = i
        near_d[better] = row[better]
    reps = []
    for c in np.flatnonzero(alive):
        idx = sorted(members[c])
        hit = [i for i in idx if i in pins]
        if hit:
            reps.append(hit[0])
            continue
        centroid = Z[idx].mean(axis=0)
        d = ((Z[idx] - centroid) ** 2).sum(axis=1)
        reps.append(idx[int(np.argmin(d))])
    return [entries[i] for i in sorted(reps)]


def select_guides(p, global_arch, rng):
    local = p.local.entries
    glob = global_arch.entries
    p_star = local[rng.integers(len(local))][0] if local else p.position
    p_dstar = glob[rng.integers(len(glob))][0] if glob else p.position
    return p_star, p_dstar


def hypervolume(points, ref):
    """Area dominated by a 2-D point set and bounded by ``ref``."""
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    P = P[(P[:, 0] < ref[0]) & (P[:, 1] < ref[1])]
    if len(P) == 0:
        return 0.0
    P = P[np.lexsort((P[:, 1], P[:, 0]))]
    area, best_u = 0.0, ref[1]
    for e, u in P:
        if u < best_u:
            area += (ref[0] - e) * (best_u - u)
            best_u = u
    return area


def best_compromise(entries):
    """Fuzzy-satisfaction pick; ties go to the smaller E."""
    if not entries:
        raise ValueError("empty archive")
    F = np.array([o for _, o in entries], dtype=float).reshape(-1, 2)
    lo, hi = F.min(axis=0), F.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    mu = np.clip((hi - F) / span, 0.0, 1.0)
    mu[:, hi == lo] = 1.0
    s = mu.sum(axis=1)
    total = s.sum()
    score = s / total if total > 0 else np.ones(len(F)) / len(F)
    top = np.flatnonzero(score >= score.max() - 1e-12)
    i = int(top[np.argmin(F[top, 0])])
    return entries[i]


@dataclass
class RunResult:
    pareto: Archive
    external: list
    history: list
    hypervolume: list
    hypervolume_external: list
    ref_point: tuple


def _ref_point(objs):
    F = np.array([o for o in objs if o[0] < SENTINEL[0]], dtype=float).reshape(-1, 2)
    if len(F) == 0:
        return SENTINEL
    return tuple(F.max(axis=0))


def run(cfg, objective: Callable, map_fn=map, callback=None):
    """Optimize ``objective(position) -> (E, U)``.

    ``map_fn`` may be a parallel map; each particle draws from its own
    ``default_rng([seed, generation, index])`` so results do not depend on it.
    """
    init = np.random.default_rng([cfg.seed, 2**31 - 1])
    swarm = [Particle(init.uniform(cfg.p_min, cfg.p_max, cfg.dim), np.zeros(cfg.dim), Archive(cfg.local_size))
             for _ in range(cfg.population)]
    external = []
    glob = Archive(cfg.global_size)
    history, hv, hv_ext = [], [], []
    ref = None
    for gen in range(cfg.generations):
        objs = [Objectives(*map(float, o)) for o in map_fn(objective, [p.position.copy() for p in swarm])]
        if ref is None:
            ref = _ref_point(objs)
        ext = Archive(None, external)
        for i, (p, o) in enumerate(zip(swarm, objs)):
            entry = (p.position.copy(), o)
            history.append((gen, i, o.E, o.U, entry[0]))
            p.local = archive_insert(p.local, entry)
            ext = archive_insert(ext, entry)
        external = ext.entries
        pool = nondominated(external + [g for g in glob.entries if not any(g is e for e in external)])
        glob = Archive(cfg.global_size, cluster_reduce(pool, cfg.global_size))
        hv.append(hypervolume(glob.objectives(), ref))
        hv_ext.append(hypervolume(Archive(None, external).objectives(), ref))
        if callback is not None:
            callback(gen, glob, objs)
        if gen == cfg.generations - 1:
            break
        for i, p in enumerate(swarm):
            rng = np.random.default_rng([cfg.seed, gen, i])
            p_star, p_dstar = select_guides(p, glob, rng)
            v = update_velocity(p, p_star, p_dstar, cfg, rng)
            p.position, p.velocity = update_position(p.position, v, cfg.p_min, cfg.p_max)
    return RunResult(glob, external, history, hv, hv_ext, ref)


def scalar_objective(trace, gamma1, gamma2):
    """Weighted single objective sum of ``gamma1 e^2 + gamma2 u^2``."""
    if gamma1 < 0 or gamma2 < 0:
        raise ValueError("weights must be non-negative")
    return float(np.sum(gamma1 * trace.e ** 2 + gamma2 * trace.u ** 2))


def run_scalar(cfg, objective: Callable, map_fn=map):
    """Plain PSO baseline with the same dynamics and scalar best selection."""
    init = np.random.default_rng([cfg.seed, 2**31 - 1])
    pos = init.uniform(cfg.p_min, cfg.p_max, (cfg.population, cfg.dim))
    vel = np.zeros_like(pos)
    pbest, pbest_f = pos.copy(), np.full(cfg.population, np.inf)
    gbest, gbest_f = pos[0].copy(), np.inf
    history = []
    for gen in range(cfg.generations):
        f = np.array([float(v) for v in map_fn(objective, list(pos))])
        history.append(f.copy())
        better = f < pbest_f
        pbest[better], pbest_f[better] = pos[better], f[better]
        if pbest_f.min() < gbest_f:
            gbest_f = float(pbest_f.min())
            gbest = pbest[int(np.argmin(pbest_f))].copy()
        if gen == cfg.generations - 1:
            break
        for i in range(cfg.population):
            rng = np.random.default_rng([cfg.seed, gen, i])
            p = Particle(pos[i], vel[i], Archive())
            v = update_velocity(p, pbest[i], gbest, cfg, rng)
            pos[i], vel[i] = update_position(pos[i], v, cfg.p_min, cfg.p_max)
    return gbest, gbest_f, history


def evaluate(position, scenario):
    """Closed-loop ``(E, U)`` of one fuzzy parameter vector on ``scenario``."""
    from . import sim

    tr = sim.run_kernel(sim.with_filter(scenario, position, mode="fuzzy"))
    return Objectives(*sim.objectives(tr))

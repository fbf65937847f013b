"""Source switching along an open path and an exact enumeration check of the switching identity."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .connectivity import FineEdge, IntervalGraph, build_graph
from .spacetime import (
    R,
    LabeledConfig,
    Region,
    SpaceTimePoint,
    Trajectory,
    count_compatible,
    enumerate_splittings,
    enumerate_trajectories,
    merge,
    movable_points,
    stp,
    sym_diff,
)

DEFAULT_BUDGET = 1 << 24


class BudgetExceeded(RuntimeError):
    pass


class PathNotOpen(ValueError):
    pass


@dataclass(frozen=True)
class Step:
    """One piece of a path: an arc of a site circle or a bridge.

    For an arc, (lo, hi) is the covered arc in increasing time order; ``bridge``
    is the bridge index in the merged configuration for a bridge step.
    """

    kind: str
    site: int = -1
    lo: float = 0.0
    hi: float = 0.0
    bridge: int = -1

    def key(self) -> tuple:
        return (self.kind, self.site, self.lo, self.hi, self.bridge)


def path_from_edges(edges: list[FineEdge]) -> tuple[Step, ...]:
    steps = []
    for e in edges:
        if e.kind == "bridge":
            steps.append(Step("B", bridge=e.bridge))
        else:
            steps.append(Step("I", e.site, e.t_from, e.t_to))
    return tuple(steps)


def earliest_path(g: IntervalGraph, x: SpaceTimePoint, y: SpaceTimePoint, region: Region | None = None):
    """The first open path from x to y (inside region) in the fixed breadth-first order, or None."""
    h = g if region is None else g.rebuild(region=region)
    edges = h.find_path(x, y)
    return None if edges is None else path_from_edges(edges)


@dataclass(frozen=True)
class SwitchablePair:
    cfg: LabeledConfig
    psi1: tuple
    psi2: tuple
    A: tuple
    B: tuple
    region2: Region
    x: SpaceTimePoint
    y: SpaceTimePoint
    path: tuple

    def __eq__(self, other):
        return (
            isinstance(other, SwitchablePair)
            and self.cfg == other.cfg
            and all(a == b for a, b in zip(self.psi1, other.psi1))
            and all(a == b for a, b in zip(self.psi2, other.psi2))
            and self.A == other.A
            and self.B == other.B
            and self.region2 == other.region2
            and (self.x, self.y, self.path) == (other.x, other.y, other.path)
        )

    __hash__ = None


def _covers_end(lo: float, hi: float) -> bool:
    """Whether the arc from lo to hi contains the instant just before time 0."""
    return lo > 0 and lo + ((hi - lo) % 1.0) >= 1.0


def _strictly_inside(t: float, lo: float, hi: float) -> bool:
    off = (t - lo) % 1.0
    return 0 < off < ((hi - lo) % 1.0 or 1.0)


def toggle(traj: Trajectory, lo: float, hi: float) -> Trajectory:
    """Exchange r and l on the arc from lo to hi."""
    flips = np.array(sorted(set(traj.flips.tolist()) ^ {lo, hi}), dtype=float)
    v0 = traj.v0
    if traj.arcs is None and _covers_end(lo, hi):
        v0 = 1 - v0
    return Trajectory(traj.arcs, v0, flips)


def _value(traj: Trajectory, t: float) -> int:
    if traj.arcs is not None and not any((t - a) % 1.0 < (b - a) % 1.0 for a, b in traj.arcs):
        return R
    return traj.value(t)


def path_is_open(pair: SwitchablePair) -> bool:
    cfg = pair.cfg
    for s in pair.path:
        if s.kind == "B":
            u, v = (int(z) for z in cfg.bonds[cfg.bridge_bond[s.bridge]])
            t = float(cfg.bridge_t[s.bridge])
            if not (pair.region2.contains(u, t) and pair.region2.contains(v, t)):
                return False
            continue
        mid = (s.lo + 0.5 * ((s.hi - s.lo) % 1.0)) % 1.0
        if not pair.region2.contains(s.site, mid):
            return False
        for z, t in zip(cfg.mark_site, cfg.mark_t):
            if int(z) == s.site and _strictly_inside(float(t), s.lo, s.hi):
                if _value(pair.psi1[s.site], float(t)) == R and _value(pair.psi2[s.site], float(t)) == R:
                    return False
    return True


def switch(pair: SwitchablePair) -> SwitchablePair:
    """Exchange both layers' values along the path; points on the path change layer."""
    if not path_is_open(pair):
        raise PathNotOpen("the switching path is not open in C^c")
    cfg = pair.cfg
    psi1, psi2 = list(pair.psi1), list(pair.psi2)
    bl = cfg.bridge_label.copy()
    ml = cfg.mark_label.copy()
    for s in pair.path:
        if s.kind == "B":
            bl[s.bridge] = 3 - bl[s.bridge]
            continue
        psi1[s.site] = toggle(psi1[s.site], s.lo, s.hi)
        psi2[s.site] = toggle(psi2[s.site], s.lo, s.hi)
        for i, (z, t) in enumerate(zip(cfg.mark_site, cfg.mark_t)):
            if int(z) == s.site and _strictly_inside(float(t), s.lo, s.hi):
                ml[i] = 3 - ml[i]
    return replace(
        pair,
        cfg=cfg.relabel(bl, ml),
        psi1=tuple(psi1),
        psi2=tuple(psi2),
        A=sym_diff(pair.A, pair.x, pair.y),
        B=sym_diff(pair.B, pair.x, pair.y),
    )


def is_compatible(pair: SwitchablePair) -> bool:
    """psi^j ~ (source set, layer-j points) for both layers."""
    xi1, m1 = pair.cfg.layer(1)
    xi2, m2 = pair.cfg.layer(2)
    t1 = count_compatible(pair.A, xi1, m1)
    t2 = count_compatible(pair.B, xi2, m2, pair.region2)
    for table, psi in ((t1, pair.psi1), (t2, pair.psi2)):
        for z, traj in enumerate(psi):
            if not any(traj == c for c in table.trajectories[z]):
                return False
    return True


# ---------------------------------------------------------------- exact identity check


def blocking_key(cfg: LabeledConfig, psi1, psi2) -> tuple:
    return tuple(
        i for i, (z, t) in enumerate(zip(cfg.mark_site, cfg.mark_t))
        if _value(psi1[z], float(t)) == R and _value(psi2[z], float(t)) == R
    )


@dataclass(frozen=True)
class SwitchingCheck:
    lhs: float
    rhs: float
    n_terms: int
    blocks: dict

    @property
    def abs_diff(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def rel_diff(self) -> float:
        return self.abs_diff / max(1.0, abs(self.lhs), abs(self.rhs))

    @property
    def blocks_agree(self) -> bool:
        return all(abs(a - b) <= 1e-12 * max(1.0, abs(a)) for a, b in self.blocks.values())


def count_terms(cfg: LabeledConfig, A, B, region2: Region, x, y) -> int:
    total = 0
    for s in enumerate_splittings(cfg, region2):
        xi1, m1 = s.layer(1)
        xi2, m2 = s.layer(2)
        for AA, BB in ((A, B), (sym_diff(A, x, y), sym_diff(B, x, y))):
            total += count_compatible(AA, xi1, m1).total * count_compatible(BB, xi2, m2, region2).total
    return total


def verify_switching(cfg: LabeledConfig, A, B, region2: Region, x: SpaceTimePoint, y: SpaceTimePoint,
                     F=None, budget: int = DEFAULT_BUDGET) -> SwitchingCheck:
    """Both sides of the switching identity by full enumeration.

    lhs sums F * 1{x <-> y in region2} over splittings of the points in region2
    and over trajectory pairs with sources (A, B); rhs uses (A + x + y, B + x + y).
    Each splitting carries the weight 2^-(number of movable points).  Terms are
    also grouped by the earliest open path, whose per-group sums must agree too.
    """
    if any(not region2.contains_point(p) for p in B):
        raise ValueError("B must lie in the second layer's region")
    F = (lambda g: 1.0) if F is None else F
    bmask, mmask = movable_points(cfg, region2)
    weight = 0.5 ** int(bmask.sum() + mmask.sum())
    n_terms = count_terms(cfg, A, B, region2, x, y)
    if n_terms > budget:
        raise BudgetExceeded("%d terms exceed the budget %d" % (n_terms, budget))
    cache: dict = {}
    sides = [0.0, 0.0]
    blocks: dict = {}
    full = Region.full(cfg.n_sites)
    for s in enumerate_splittings(cfg, region2):
        xi1, m1 = s.layer(1)
        xi2, m2 = s.layer(2)
        for side, (AA, BB) in enumerate(((A, B), (sym_diff(A, x, y), sym_diff(B, x, y)))):
            t1 = count_compatible(AA, xi1, m1)
            if t1.total == 0:
                continue
            t2 = count_compatible(BB, xi2, m2, region2)
            if t2.total == 0:
                continue
            for psi1 in enumerate_trajectories(t1):
                for psi2 in enumerate_trajectories(t2):
                    key = blocking_key(cfg, psi1, psi2)
                    if key not in cache:
                        g = build_graph(cfg, psi1, psi2, full, points=[x, y])
                        path = earliest_path(g, x, y, region2)
                        cache[key] = (0.0 if path is None else float(F(g)), path)
                    val, path = cache[key]
                    if path is None:
                        continue
                    sides[side] += weight * val
                    pk = tuple(st.key() for st in path)
                    acc = blocks.setdefault(pk, [0.0, 0.0])
                    acc[side] += weight * val
    return SwitchingCheck(sides[0], sides[1], n_terms, {k: tuple(v) for k, v in blocks.items()})


# ---------------------------------------------------------------- random instances


def sample_merged(model, region2: Region, rng) -> LabeledConfig:
    """Merged configuration: layer 1 on the full volume, layer 2 on region2."""
    from .sampler import sample_config

    for _ in range(1000):
        xi1, m1 = sample_config(model, None, rng)
        xi2, m2 = sample_config(model, region2, rng)
        try:
            return merge(xi1, m1, xi2, m2)
        except ValueError:
            continue
    raise RuntimeError("could not draw a collision-free merged configuration")


def random_point(region: Region, rng) -> SpaceTimePoint:
    sites = [z for z in range(region.n_sites) if region.measure(z) > 0]
    for _ in range(10000):
        p = stp(float(rng.random()), int(rng.choice(sites)))
        if region.contains_point(p):
            return p
    raise RuntimeError("region too small to sample a point")


@dataclass(frozen=True)
class Instance:
    cfg: LabeledConfig
    A: tuple
    B: tuple
    region2: Region
    x: SpaceTimePoint
    y: SpaceTimePoint
    w: SpaceTimePoint
    v: SpaceTimePoint

    def F(self, g: IntervalGraph) -> float:
        return 1.0 if g.connected(self.w, self.v) else 0.0


def parity_fixers(xi, region: Region, rng) -> tuple:
    """Extra sources making every full circle and arc of region carry an even number of flips."""
    out = []
    for z in range(region.n_sites):
        arcs = region.arcs[z]
        ends = xi.endpoint_times(z)
        if arcs is None:
            if len(ends) % 2:
                out.append(stp(float(rng.random()), z))
            continue
        for a, b in arcs:
            length = (b - a) % 1.0
            inside = ends[((ends - a) % 1.0) < length]
            if len(inside) % 2:
                out.append(stp(a + length * float(rng.uniform(0.01, 0.99)), z))
    return tuple(out)


def random_labels(cfg: LabeledConfig, region2: Region, rng) -> LabeledConfig:
    bmask, mmask = movable_points(cfg, region2)
    bl = np.where(bmask & (rng.random(cfg.n_bridges) < 0.5), 2, 1).astype(np.int8)
    ml = np.where(mmask & (rng.random(cfg.n_marks) < 0.5), 2, 1).astype(np.int8)
    return cfg.relabel(bl, ml)


def _cluster_point(g: IntervalGraph, x: SpaceTimePoint, region2: Region, rng) -> SpaceTimePoint:
    """A random point of the open cluster of x inside region2 (x itself if isolated)."""
    h = g.rebuild(region=region2)
    cands = [stp(t, z) for z, t in zip(h.vsite, h.vtime) if stp(t, z) != x and h.connected(x, stp(t, z))]
    if not cands or rng.random() < 0.2:
        return random_point(region2, rng)
    p = cands[int(rng.integers(len(cands)))]
    return stp((p.t + 1e-3 * float(rng.uniform(-1, 1))) % 1.0, p.x) if rng.random() < 0.5 else p


def random_instance(model, region2: Region, rng, max_tries: int = 200) -> Instance:
    """Merged configuration with sources admissible for at least one splitting and x, y often connected."""
    full = Region.full(model.n_sites)
    for _ in range(max_tries):
        cfg = random_labels(sample_merged(model, region2, rng), region2, rng)
        xi1, m1 = cfg.layer(1)
        xi2, m2 = cfg.layer(2)
        A = parity_fixers(xi1, full, rng)
        B = parity_fixers(xi2, region2, rng)
        t1 = count_compatible(A, xi1, m1)
        t2 = count_compatible(B, xi2, m2, region2)
        if t1.total == 0 or t2.total == 0:
            continue
        psi1 = tuple(ch[int(rng.integers(len(ch)))] for ch in t1.trajectories)
        psi2 = tuple(ch[int(rng.integers(len(ch)))] for ch in t2.trajectories)
        x = random_point(region2, rng)
        g = build_graph(cfg, psi1, psi2, full, points=[x])
        y = _cluster_point(g, x, region2, rng)
        if y.t in set(cfg.bridge_t.tolist()) | set(cfg.mark_t.tolist()):
            continue
        w, v = random_point(full, rng), random_point(full, rng)
        return Instance(cfg, A, B, region2, x, y, w, v), psi1, psi2
    raise RuntimeError("no admissible instance found")


def random_pair(model, region2: Region, rng, max_tries: int = 1000) -> SwitchablePair:
    """A compatible pair with an open path from x to y in region2, drawn by rejection."""
    full = Region.full(model.n_sites)
    for _ in range(max_tries):
        inst, psi1, psi2 = random_instance(model, region2, rng)
        g = build_graph(inst.cfg, psi1, psi2, full, points=[inst.x, inst.y])
        path = earliest_path(g, inst.x, inst.y, region2)
        if path is None:
            continue
        return SwitchablePair(inst.cfg, psi1, psi2, inst.A, inst.B, region2, inst.x, inst.y, path)
    raise RuntimeError("no switchable pair found")

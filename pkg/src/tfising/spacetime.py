"""Space-time points, regions of the time torus, point configurations and trajectory counts.

Trajectories take the values R (= 0) and L (= 1).  A trajectory on a full
circle is stored as its value just before time 0 together with its sorted
flip list; on an arc [a, b) the value at a is forced to R.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

R, L = 0, 1


class CollisionError(ValueError):
    """Two points of a configuration share a time; the caller should resample."""


@dataclass(frozen=True, order=True)
class SpaceTimePoint:
    t: float
    x: int

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t) % 1.0)
        object.__setattr__(self, "x", int(self.x))


def stp(t: float, x: int) -> SpaceTimePoint:
    return SpaceTimePoint(t, x)


def sym_diff(*groups) -> tuple[SpaceTimePoint, ...]:
    """Symmetric difference of points or iterables of points, as a sorted tuple."""
    out: set[SpaceTimePoint] = set()
    for g in groups:
        items = [g] if isinstance(g, SpaceTimePoint) else list(g)
        for p in items:
            out ^= {p}
    return tuple(sorted(out, key=lambda p: (p.x, p.t)))


SourceSet = tuple


# ---------------------------------------------------------------- regions


def _arc_len(a: float, b: float) -> float:
    return (b - a) % 1.0


def _in_arc(t: float, a: float, b: float) -> bool:
    return ((t - a) % 1.0) < _arc_len(a, b)


def _normalize_arcs(arcs) -> tuple | None:
    """Merge touching or overlapping arcs; return None for the full circle."""
    pieces = []
    for a, b in arcs:
        a, b = float(a) % 1.0, float(b) % 1.0
        if a == b:
            return None if arcs else ()
        if a < b:
            pieces.append((a, b))
        else:
            pieces.append((a, 1.0))
            pieces.append((0.0, b))
    pieces = [p for p in pieces if p[1] > p[0]]
    if not pieces:
        return ()
    pieces.sort()
    merged = [list(pieces[0])]
    for a, b in pieces[1:]:
        if a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    if len(merged) == 1 and merged[0][0] == 0.0 and merged[0][1] == 1.0:
        return None
    if len(merged) > 1 and merged[0][0] == 0.0 and merged[-1][1] == 1.0:
        first = merged.pop(0)
        merged[-1][1] = first[1]
    return tuple((a, b % 1.0 if b == 1.0 else b) for a, b in merged)


@dataclass(frozen=True)
class Region:
    """Per site either None (the full circle) or a tuple of disjoint half-open arcs."""

    arcs: tuple

    @classmethod
    def full(cls, n_sites: int) -> "Region":
        return cls((None,) * n_sites)

    @classmethod
    def empty(cls, n_sites: int) -> "Region":
        return cls(((),) * n_sites)

    @classmethod
    def from_sites(cls, n_sites: int, sites) -> "Region":
        sites = set(int(s) for s in sites)
        return cls(tuple(None if z in sites else () for z in range(n_sites)))

    @classmethod
    def from_arcs(cls, per_site) -> "Region":
        return cls(tuple(None if a is None else _normalize_arcs(a) for a in per_site))

    @property
    def n_sites(self) -> int:
        return len(self.arcs)

    def is_full(self, z: int | None = None) -> bool:
        if z is None:
            return all(a is None for a in self.arcs)
        return self.arcs[z] is None

    def is_empty(self, z: int) -> bool:
        return self.arcs[z] == ()

    def contains(self, z: int, t: float) -> bool:
        arcs = self.arcs[z]
        if arcs is None:
            return True
        return any(_in_arc(t % 1.0, a, b) for a, b in arcs)

    def contains_point(self, p: SpaceTimePoint) -> bool:
        return self.contains(p.x, p.t)

    def measure(self, z: int) -> float:
        arcs = self.arcs[z]
        if arcs is None:
            return 1.0
        return float(sum(_arc_len(a, b) for a, b in arcs))

    def site_arcs(self, z: int) -> tuple:
        """Arcs of site z with the full circle written as ((0, 0),) of length 1."""
        arcs = self.arcs[z]
        return ((0.0, 0.0),) if arcs is None else arcs

    def complement(self) -> "Region":
        out = []
        for arcs in self.arcs:
            if arcs is None:
                out.append(())
            elif arcs == ():
                out.append(None)
            else:
                srt = sorted(arcs)
                comp = [(srt[i][1], srt[(i + 1) % len(srt)][0]) for i in range(len(srt))]
                out.append(_normalize_arcs([c for c in comp if c[0] != c[1]]))
        return Region(tuple(out))

    @staticmethod
    def _intersect_site(A, B):
        if A is None:
            return B
        if B is None:
            return A
        pieces = []
        for a0, a1 in A:
            for b0, b1 in B:
                for u0, u1 in _unwrap(a0, a1):
                    for v0, v1 in _unwrap(b0, b1):
                        lo, hi = max(u0, v0), min(u1, v1)
                        if hi > lo:
                            pieces.append((lo, hi % 1.0 if hi == 1.0 else hi))
        return _normalize_arcs(pieces) if pieces else ()

    def intersect(self, other: "Region") -> "Region":
        return Region(tuple(self._intersect_site(a, b) for a, b in zip(self.arcs, other.arcs)))

    def bond_arcs(self, u: int, v: int):
        """I_u intersected with I_v, in the same per-site format."""
        return self._intersect_site(self.arcs[u], self.arcs[v])

    def to_text(self) -> str:
        parts = []
        for z, arcs in enumerate(self.arcs):
            if arcs is None:
                parts.append("%d:T" % z)
            else:
                parts.append("%d:[%s]" % (z, ",".join("[%r,%r)" % ab for ab in arcs)))
        return " ".join(parts)


def _unwrap(a: float, b: float):
    if a < b:
        return [(a, b)]
    return [(a, 1.0), (0.0, b)] if b > 0 else [(a, 1.0)]


# ---------------------------------------------------------------- configurations


def _check_sorted(arr):
    arr = np.asarray(arr, dtype=float)
    if arr.ndim != 1:
        raise ValueError("times must be one-dimensional")
    if np.any((arr < 0) | (arr >= 1)):
        raise ValueError("times must lie in [0, 1)")
    if np.any(np.diff(arr) <= 0):
        raise CollisionError("times must be strictly increasing")
    return arr


@dataclass(frozen=True)
class BridgeConfig:
    bonds: np.ndarray = field(repr=False)
    times: tuple

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(_check_sorted(t) for t in self.times))
        if len(self.times) != len(self.bonds):
            raise ValueError("one time list per bond")
        allt = np.concatenate(self.times) if self.times else np.zeros(0)
        if len(np.unique(allt)) != len(allt):
            raise CollisionError("two bridges share a time")

    @classmethod
    def empty(cls, bonds) -> "BridgeConfig":
        return cls(np.asarray(bonds), tuple(np.zeros(0) for _ in range(len(bonds))))

    @property
    def n_points(self) -> int:
        return int(sum(len(t) for t in self.times))

    def endpoint_times(self, z: int) -> np.ndarray:
        ts = [self.times[b] for b, (u, v) in enumerate(self.bonds) if u == z or v == z]
        return np.sort(np.concatenate(ts)) if ts else np.zeros(0)

    def items(self):
        """(bond, time) pairs in bond-major order."""
        for b, ts in enumerate(self.times):
            for t in ts:
                yield b, float(t)

    def to_text(self) -> str:
        return "\n".join(
            "B %d %d %d %r" % (b, self.bonds[b][0], self.bonds[b][1], t) for b, t in self.items()
        )

    def __eq__(self, other):
        return (
            isinstance(other, BridgeConfig)
            and np.array_equal(self.bonds, other.bonds)
            and all(np.array_equal(a, b) for a, b in zip(self.times, other.times))
        )

    __hash__ = None


@dataclass(frozen=True)
class MarkConfig:
    times: tuple

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(_check_sorted(t) for t in self.times))

    @classmethod
    def empty(cls, n_sites: int) -> "MarkConfig":
        return cls(tuple(np.zeros(0) for _ in range(n_sites)))

    @property
    def n_points(self) -> int:
        return int(sum(len(t) for t in self.times))

    def items(self):
        for z, ts in enumerate(self.times):
            for t in ts:
                yield z, float(t)

    def to_text(self) -> str:
        return "\n".join("M %d %r" % (z, t) for z, t in self.items())

    def __eq__(self, other):
        return isinstance(other, MarkConfig) and all(
            np.array_equal(a, b) for a, b in zip(self.times, other.times)
        )

    __hash__ = None


def check_no_collisions(xi: BridgeConfig, m: MarkConfig, extra=()) -> None:
    ts = [np.concatenate(xi.times) if xi.times else np.zeros(0)]
    ts += [np.concatenate(m.times) if m.times else np.zeros(0)]
    allt = np.concatenate(ts)
    if len(np.unique(allt)) != len(allt):
        raise CollisionError("mark and bridge times collide")
    for p in extra:
        if np.any(allt == p.t):
            raise CollisionError("query point sits on a configuration point")


# ---------------------------------------------------------------- trajectories


def flip_times(z: int, A, xi: BridgeConfig) -> np.ndarray:
    """Source times at z and incident bridge times, with even multiplicities cancelled."""
    ts = [p.t for p in A if p.x == z]
    ts.extend(xi.endpoint_times(z).tolist())
    vals, counts = np.unique(np.asarray(ts, dtype=float), return_counts=True)
    return vals[counts % 2 == 1]


@dataclass(frozen=True)
class Trajectory:
    """v0 is the value just before time 0 on a full circle; arcs start at R."""

    arcs: tuple | None
    v0: int
    flips: np.ndarray = field(repr=False)

    def value(self, t: float) -> int:
        t = t % 1.0
        if self.arcs is None:
            return (self.v0 + int(np.count_nonzero(self.flips < t))) % 2
        for a, b in self.arcs:
            if _in_arc(t, a, b):
                rel = (self.flips - a) % 1.0
                return int(np.count_nonzero(rel < (t - a) % 1.0)) % 2
        raise ValueError("time outside the trajectory's domain")

    def __eq__(self, other):
        return (
            isinstance(other, Trajectory)
            and self.arcs == other.arcs
            and self.v0 == other.v0
            and np.array_equal(self.flips, other.flips)
        )

    __hash__ = None


@dataclass(frozen=True)
class SpinCountTable:
    counts: np.ndarray
    trajectories: tuple

    @property
    def total(self) -> int:
        return int(np.prod(self.counts)) if len(self.counts) else 1


def _site_choices(arcs, flips: np.ndarray, pins: np.ndarray) -> list[Trajectory]:
    """All admissible trajectories of one site; pins are times where the value must be R."""
    if arcs == ():
        return [Trajectory((), R, np.zeros(0))]
    if arcs is None:
        if len(flips) % 2:
            return []
        out = []
        for v0 in (R, L):
            par = (v0 + np.searchsorted(flips, pins, side="left")) % 2
            if not np.any(par == L):
                out.append(Trajectory(None, v0, flips))
        return out
    for a, b in arcs:
        length = _arc_len(a, b)
        fin = flips[((flips - a) % 1.0) < length]
        if len(fin) % 2:
            return []
        rel_f = np.sort((fin - a) % 1.0)
        pin_in = pins[((pins - a) % 1.0) < length]
        rel_p = (pin_in - a) % 1.0
        if np.any(np.searchsorted(rel_f, rel_p, side="left") % 2 == 1):
            return []
    inside = np.array([f for f in flips if any(_in_arc(f, a, b) for a, b in arcs)])
    return [Trajectory(arcs, R, np.sort(inside))]


def count_compatible(A, xi: BridgeConfig, m: MarkConfig, region: Region | None = None,
                     pins=()) -> SpinCountTable:
    """Exact per-site numbers of trajectories psi with psi ~ (A, xi, m) on the region.

    ``pins`` are extra space-time points where the trajectory must equal R
    (the insertion of a U operator); they act like marks.
    """
    n = len(m.times)
    region = Region.full(n) if region is None else region
    counts, trajs = [], []
    for z in range(n):
        fl = flip_times(z, A, xi)
        pz = np.concatenate([m.times[z], np.array([p.t for p in pins if p.x == z], dtype=float)])
        ch = _site_choices(region.arcs[z], fl, np.sort(pz))
        counts.append(len(ch))
        trajs.append(tuple(ch))
    return SpinCountTable(np.array(counts, dtype=np.int64), tuple(trajs))


def count_total(A, xi, m, region=None, pins=()) -> int:
    return count_compatible(A, xi, m, region, pins).total


def enumerate_trajectories(table: SpinCountTable):
    """Iterate over all global trajectories (one admissible choice per site)."""
    return itertools.product(*table.trajectories)


# ---------------------------------------------------------------- labeled superpositions


@dataclass(frozen=True)
class LabeledConfig:
    """Superposition of two layers; every point keeps its layer label in {1, 2}."""

    bonds: np.ndarray = field(repr=False)
    n_sites: int
    bridge_bond: np.ndarray
    bridge_t: np.ndarray
    bridge_label: np.ndarray
    mark_site: np.ndarray
    mark_t: np.ndarray
    mark_label: np.ndarray

    @property
    def n_bridges(self) -> int:
        return len(self.bridge_t)

    @property
    def n_marks(self) -> int:
        return len(self.mark_t)

    def layer(self, label: int) -> tuple[BridgeConfig, MarkConfig]:
        times = []
        for b in range(len(self.bonds)):
            sel = (self.bridge_bond == b) & (self.bridge_label == label)
            times.append(np.sort(self.bridge_t[sel]))
        marks = []
        for z in range(self.n_sites):
            sel = (self.mark_site == z) & (self.mark_label == label)
            marks.append(np.sort(self.mark_t[sel]))
        return BridgeConfig(self.bonds, tuple(times)), MarkConfig(tuple(marks))

    def relabel(self, bridge_label=None, mark_label=None) -> "LabeledConfig":
        return LabeledConfig(
            self.bonds,
            self.n_sites,
            self.bridge_bond,
            self.bridge_t,
            self.bridge_label if bridge_label is None else np.asarray(bridge_label, dtype=np.int8),
            self.mark_site,
            self.mark_t,
            self.mark_label if mark_label is None else np.asarray(mark_label, dtype=np.int8),
        )

    def union(self) -> tuple[BridgeConfig, MarkConfig]:
        times = tuple(np.sort(self.bridge_t[self.bridge_bond == b]) for b in range(len(self.bonds)))
        marks = tuple(np.sort(self.mark_t[self.mark_site == z]) for z in range(self.n_sites))
        return BridgeConfig(self.bonds, times), MarkConfig(marks)

    def to_text(self) -> str:
        lines = []
        order = np.lexsort((self.bridge_t, self.bridge_bond))
        for i in order:
            b = self.bridge_bond[i]
            lines.append("B %d %d %d %r %d" % (b, self.bonds[b][0], self.bonds[b][1],
                                               float(self.bridge_t[i]), self.bridge_label[i]))
        order = np.lexsort((self.mark_t, self.mark_site))
        for i in order:
            lines.append("M %d %r %d" % (self.mark_site[i], float(self.mark_t[i]), self.mark_label[i]))
        return "\n".join(lines)

    def __eq__(self, other):
        if not isinstance(other, LabeledConfig):
            return False
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("bonds", "bridge_bond", "bridge_t", "bridge_label", "mark_site", "mark_t", "mark_label")
        ) and self.n_sites == other.n_sites

    __hash__ = None


def merge(xi1: BridgeConfig, m1: MarkConfig, xi2: BridgeConfig, m2: MarkConfig) -> LabeledConfig:
    bb, bt, bl = [], [], []
    for lab, xi in ((1, xi1), (2, xi2)):
        for b, t in xi.items():
            bb.append(b)
            bt.append(t)
            bl.append(lab)
    ms, mt, ml = [], [], []
    for lab, m in ((1, m1), (2, m2)):
        for z, t in m.items():
            ms.append(z)
            mt.append(t)
            ml.append(lab)
    allt = np.array(bt + mt)
    if len(np.unique(allt)) != len(allt):
        raise CollisionError("the two layers share a point time")
    return LabeledConfig(
        np.asarray(xi1.bonds), len(m1.times),
        np.array(bb, dtype=np.int64), np.array(bt, dtype=float), np.array(bl, dtype=np.int8),
        np.array(ms, dtype=np.int64), np.array(mt, dtype=float), np.array(ml, dtype=np.int8),
    )


def movable_points(cfg: LabeledConfig, region2: Region) -> tuple[np.ndarray, np.ndarray]:
    """Boolean masks of bridges and marks lying in the second layer's region."""
    bmask = np.array([
        region2.contains(int(cfg.bonds[b][0]), t) and region2.contains(int(cfg.bonds[b][1]), t)
        for b, t in zip(cfg.bridge_bond, cfg.bridge_t)
    ], dtype=bool)
    mmask = np.array([region2.contains(int(z), t) for z, t in zip(cfg.mark_site, cfg.mark_t)], dtype=bool)
    return bmask, mmask


def enumerate_splittings(cfg: LabeledConfig, region2: Region | None = None):
    """All relabelings with points of region2 in either layer and the rest in layer 1."""
    region2 = Region.full(cfg.n_sites) if region2 is None else region2
    bmask, mmask = movable_points(cfg, region2)
    bidx, midx = np.flatnonzero(bmask), np.flatnonzero(mmask)
    k = len(bidx) + len(midx)
    for bits in range(1 << k):
        bl = np.ones(cfg.n_bridges, dtype=np.int8)
        ml = np.ones(cfg.n_marks, dtype=np.int8)
        for j, i in enumerate(bidx):
            if bits >> j & 1:
                bl[i] = 2
        for j, i in enumerate(midx):
            if bits >> (len(bidx) + j) & 1:
                ml[i] = 2
        yield cfg.relabel(bl, ml)


def product(values) -> int:
    return reduce(lambda a, b: a * b, values, 1)


# ---------------------------------------------------------------- vectorized counting


def batch_site_counts(n_groups: int, flip_gid, flip_t, pin_gid=None, pin_t=None) -> np.ndarray:
    """Full-circle trajectory counts for many (sample, site) groups at once.

    Group g collects the flips and pins with gid == g.  The count is
    1{#flips even} * (1{no pin after an odd number of flips} + 1{no pin after an even number}).
    """
    flip_gid = np.asarray(flip_gid, dtype=np.int64)
    nflip = np.bincount(flip_gid, minlength=n_groups)
    even = (nflip % 2 == 0).astype(np.int64)
    if pin_gid is None or len(pin_gid) == 0:
        return 2 * even
    pin_gid = np.asarray(pin_gid, dtype=np.int64)
    keys = np.sort(flip_gid + np.asarray(flip_t, dtype=float))
    before = np.searchsorted(keys, pin_gid + np.asarray(pin_t, dtype=float)) - np.searchsorted(keys, pin_gid)
    odd = before % 2 == 1
    has_odd = np.bincount(pin_gid[odd], minlength=n_groups) > 0
    has_even = np.bincount(pin_gid[~odd], minlength=n_groups) > 0
    return even * ((~has_odd).astype(np.int64) + (~has_even).astype(np.int64))

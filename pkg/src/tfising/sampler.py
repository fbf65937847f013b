"""Poisson point processes on regions of the time torus, the Monte Carlo engine and error bars."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .model import Model
from .spacetime import BridgeConfig, CollisionError, MarkConfig, Region, batch_site_counts

MAX_RESAMPLE = 100


def stream(seed: int, replica: int = 0, tag=0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, replica, tag)."""
    if isinstance(tag, str):
        tag = zlib.crc32(tag.encode())
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(replica), int(tag)])))


# ---------------------------------------------------------------- single configurations


def poisson_on_arcs(rate: float, arcs, rng: np.random.Generator) -> np.ndarray:
    """Sorted Poisson points of the given rate on a per-site arc tuple (None = full circle)."""
    if rate <= 0 or arcs == ():
        return np.zeros(0)
    if arcs is None:
        arcs = ((0.0, 0.0),)
    out = []
    for a, b in arcs:
        length = (b - a) % 1.0 or 1.0
        k = rng.poisson(rate * length)
        if k:
            out.append((a + length * rng.random(k)) % 1.0)
    return np.sort(np.concatenate(out)) if out else np.zeros(0)


def sample_bridges(model: Model, region: Region | None, rng: np.random.Generator) -> BridgeConfig:
    region = Region.full(model.n_sites) if region is None else region
    for _ in range(MAX_RESAMPLE):
        times = tuple(
            poisson_on_arcs(model.beta * J, region.bond_arcs(int(u), int(v)), rng)
            for (u, v), J in zip(model.bonds, model.J)
        )
        try:
            return BridgeConfig(model.bonds, times)
        except CollisionError:
            continue
    raise RuntimeError("repeated time collisions while sampling bridges")


def sample_marks(model: Model, region: Region | None, rng: np.random.Generator) -> MarkConfig:
    region = Region.full(model.n_sites) if region is None else region
    rate = 2.0 * model.beta * model.q
    return MarkConfig(tuple(poisson_on_arcs(rate, region.arcs[z], rng) for z in range(model.n_sites)))


def sample_config(model: Model, region: Region | None, rng: np.random.Generator):
    for _ in range(MAX_RESAMPLE):
        xi = sample_bridges(model, region, rng)
        m = sample_marks(model, region, rng)
        allt = np.concatenate(list(xi.times) + list(m.times) + [np.zeros(0)])
        if len(np.unique(allt)) == len(allt):
            return xi, m
    raise RuntimeError("repeated time collisions while sampling")


# ---------------------------------------------------------------- batches


@dataclass
class PoissonBatch:
    """n independent full-volume configurations stored as flat point arrays."""

    model: Model
    n: int
    bridge_sample: np.ndarray
    bridge_bond: np.ndarray
    bridge_t: np.ndarray
    mark_sample: np.ndarray
    mark_site: np.ndarray
    mark_t: np.ndarray
    sites: np.ndarray | None = field(default=None)

    @property
    def n_groups(self) -> int:
        return self.n * self.model.n_sites

    def bridge_flips(self) -> tuple[np.ndarray, np.ndarray]:
        ns = self.model.n_sites
        ends = self.model.bonds[self.bridge_bond]
        gid = np.concatenate([self.bridge_sample * ns + ends[:, 0], self.bridge_sample * ns + ends[:, 1]])
        return gid, np.concatenate([self.bridge_t, self.bridge_t])

    def mark_pins(self) -> tuple[np.ndarray, np.ndarray]:
        return self.mark_sample * self.model.n_sites + self.mark_site, self.mark_t

    def counts(self, sources=(), pins=()) -> np.ndarray:
        """Per-sample compatible-trajectory counts with the same sources/pins added to every sample.

        Sites outside ``sites`` (when set) are not part of the volume and contribute 1.
        """
        ns = self.model.n_sites
        fg, ft = self.bridge_flips()
        pg, pt = self.mark_pins()
        base = np.arange(self.n, dtype=np.int64) * ns
        extra_g = [fg] + [base + p.x for p in sources]
        extra_t = [ft] + [np.full(self.n, p.t) for p in sources]
        pin_g = [pg] + [base + p.x for p in pins]
        pin_t = [pt] + [np.full(self.n, p.t) for p in pins]
        c = batch_site_counts(
            self.n_groups, np.concatenate(extra_g), np.concatenate(extra_t),
            np.concatenate(pin_g), np.concatenate(pin_t),
        ).reshape(self.n, ns)
        if self.sites is not None:
            outside = np.ones(ns, dtype=bool)
            outside[self.sites] = False
            c[:, outside] = 1
        return np.prod(c.astype(float), axis=1)

    def configuration(self, i: int) -> tuple[BridgeConfig, MarkConfig]:
        sel = self.bridge_sample == i
        bb, bt = self.bridge_bond[sel], self.bridge_t[sel]
        times = tuple(np.sort(bt[bb == b]) for b in range(self.model.n_bonds))
        sel = self.mark_sample == i
        ms, mt = self.mark_site[sel], self.mark_t[sel]
        marks = tuple(np.sort(mt[ms == z]) for z in range(self.model.n_sites))
        return BridgeConfig(self.model.bonds, times), MarkConfig(marks)


def sample_batch(model: Model, n: int, rng: np.random.Generator, sites=None) -> PoissonBatch:
    """Batch of n configurations; with ``sites`` given, only bonds inside that site set carry bridges."""
    bond_rate = model.beta * model.J
    site_rate = np.full(model.n_sites, 2.0 * model.beta * model.q)
    if sites is not None:
        inside = np.zeros(model.n_sites, dtype=bool)
        inside[np.asarray(sites, dtype=int)] = True
        bond_rate = np.where(inside[model.bonds[:, 0]] & inside[model.bonds[:, 1]], bond_rate, 0.0)
        site_rate = np.where(inside, site_rate, 0.0)
    nb = rng.poisson(bond_rate, size=(n, model.n_bonds)) if model.n_bonds else np.zeros((n, 0), dtype=int)
    nm = rng.poisson(site_rate, size=(n, model.n_sites))
    bs, bb = np.nonzero(nb)
    reps = nb[bs, bb]
    bridge_sample = np.repeat(bs, reps).astype(np.int64)
    bridge_bond = np.repeat(bb, reps).astype(np.int64)
    ms, mz = np.nonzero(nm)
    reps = nm[ms, mz]
    mark_sample = np.repeat(ms, reps).astype(np.int64)
    mark_site = np.repeat(mz, reps).astype(np.int64)
    return PoissonBatch(
        model, n, bridge_sample, bridge_bond, rng.random(len(bridge_sample)),
        mark_sample, mark_site, rng.random(len(mark_sample)),
        None if sites is None else np.asarray(sorted(set(int(s) for s in sites)), dtype=int),
    )


# ---------------------------------------------------------------- engine and estimates


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    n: int
    seed: int | None = None

    def within(self, target: float, k: float = 4.0, extra: float = 0.0) -> bool:
        return abs(self.mean - target) <= k * np.hypot(self.std_error, extra) + 1e-12

    def as_row(self, label: str) -> dict:
        return {"label": label, "mean": self.mean, "std_error": self.std_error, "n": self.n, "seed": self.seed}


@dataclass(frozen=True)
class McEngine:
    seed: int = 0
    replicas: int = 16
    samples: int = 1000

    def __post_init__(self):
        if self.replicas < 2:
            raise ValueError("need at least two replicas for batch-means errors")
        if self.samples < 1:
            raise ValueError("need at least one sample per replica")

    def rng(self, replica: int, tag=0) -> np.random.Generator:
        return stream(self.seed, replica, tag)

    @property
    def n(self) -> int:
        return self.replicas * self.samples


@dataclass
class ReplicaMeans:
    """Per-replica means of one or more columns; shape (replicas, k)."""

    values: np.ndarray
    engine: McEngine

    @property
    def mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def estimate(self, col: int = 0) -> Estimate:
        return from_replicas(self.values[:, col], self.engine)

    def ratio(self, num: int, den: int) -> "RatioEstimate":
        return ratio_estimate(self.values[:, num], self.values[:, den], self.engine)

    def jackknife(self, fn) -> Estimate:
        val, se = jackknife(self.values, fn)
        return Estimate(float(val), float(se), self.engine.n, self.engine.seed)


def from_replicas(rep: np.ndarray, engine: McEngine) -> Estimate:
    rep = np.asarray(rep, dtype=float)
    se = rep.std(ddof=1) / np.sqrt(len(rep))
    return Estimate(float(rep.mean()), float(se), engine.n, engine.seed)


def run_replicas(engine: McEngine, functional, tag=0) -> ReplicaMeans:
    """Replica means of functional(rng, n) -> array of shape (n,) or (n, k)."""
    rows = []
    for r in range(engine.replicas):
        vals = np.asarray(functional(engine.rng(r, tag), engine.samples), dtype=float)
        vals = vals.reshape(engine.samples, -1)
        rows.append(vals.mean(axis=0))
    return ReplicaMeans(np.array(rows), engine)


def run_mc(engine: McEngine, functional, tag=0) -> Estimate:
    return run_replicas(engine, functional, tag).estimate(0)


@dataclass(frozen=True)
class RatioEstimate:
    numerator: Estimate
    denominator: Estimate
    ratio: float
    std_error: float

    @property
    def mean(self) -> float:
        return self.ratio

    @property
    def n(self) -> int:
        return self.numerator.n

    def within(self, target: float, k: float = 4.0, extra: float = 0.0) -> bool:
        return abs(self.ratio - target) <= k * np.hypot(self.std_error, extra) + 1e-12

    def as_estimate(self) -> Estimate:
        return Estimate(self.ratio, self.std_error, self.numerator.n, self.numerator.seed)


def ratio_estimate(num_rep, den_rep, engine: McEngine) -> RatioEstimate:
    num_rep = np.asarray(num_rep, dtype=float)
    den_rep = np.asarray(den_rep, dtype=float)
    nbar, dbar = num_rep.mean(), den_rep.mean()
    if dbar == 0:
        raise ZeroDivisionError("denominator weights vanish on every sample")
    ratio = nbar / dbar
    resid = (num_rep - ratio * den_rep) / dbar
    se = resid.std(ddof=1) / np.sqrt(len(resid))
    return RatioEstimate(from_replicas(num_rep, engine), from_replicas(den_rep, engine), float(ratio), float(se))


def jackknife(rep: np.ndarray, fn) -> tuple[float, float]:
    """Leave-one-replica-out error of fn(column means) for rep of shape (R, k)."""
    rep = np.asarray(rep, dtype=float)
    R = rep.shape[0]
    full = np.asarray(fn(rep.mean(axis=0)), dtype=float)
    total = rep.sum(axis=0)
    loo = np.array([fn((total - rep[i]) / (R - 1)) for i in range(R)], dtype=float)
    se = np.sqrt((R - 1) / R * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
    return full, se


# ---------------------------------------------------------------- Mecke equation


def mecke_check(lam: float, f, engine: McEngine) -> tuple[Estimate, Estimate]:
    """Both sides of E[sum_{t in X} f(X, t)] = lam * int E[f(X + t, t)] dt for a rate-lam process on T."""

    def lhs(rng, n):
        out = np.zeros(n)
        counts = rng.poisson(lam, size=n)
        for i, k in enumerate(counts):
            pts = np.sort(rng.random(k))
            out[i] = sum(f(pts, t) for t in pts)
        return out

    def rhs(rng, n):
        out = np.zeros(n)
        counts = rng.poisson(lam, size=n)
        for i, k in enumerate(counts):
            t = rng.random()
            pts = np.sort(np.append(rng.random(k), t))
            out[i] = lam * f(pts, t)
        return out

    return run_mc(engine, lhs, tag="mecke-lhs"), run_mc(engine, rhs, tag="mecke-rhs")

"""Monte Carlo estimators built on the Poisson representation.

Correlations are ratios of mean trajectory counts: the numerator counts
trajectories with the required sources (and r-pins for S1 insertions), the
denominator counts source-free trajectories of the same samples.  Errors are
batch means over independent replicas; nonlinear combinations use the
leave-one-replica-out jackknife.

The lace coefficients are estimated at q = 0 only.  There, every time circle
is a single open piece, so all connectivity events are functions of the bond
multiplicities; samples are drawn as bond counts, and partition functions of
layers restricted to a site set are computed exactly by parity enumeration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .connectivity import SiteGraph, backbone, build_lace
from .model import Model
from .sampler import (
    Estimate,
    McEngine,
    PoissonBatch,
    RatioEstimate,
    ReplicaMeans,
    jackknife,
    ratio_estimate,
    run_replicas,
    sample_batch,
    sample_config,
)
from .spacetime import (
    MarkConfig,
    Region,
    SpaceTimePoint,
    count_compatible,
    enumerate_trajectories,
    merge,
    stp,
    sym_diff,
)

EXACT_PAIR_LIMIT = 1 << 16
INNER_DRAWS = 64
N_MAX = 6


def _p(a) -> SpaceTimePoint:
    if isinstance(a, SpaceTimePoint):
        return a
    t, x = a
    return stp(t, x)


def _batch(model: Model, rng, n: int, region: Region | None = None) -> PoissonBatch:
    sites = None
    if region is not None:
        if any(a not in (None, ()) for a in region.arcs):
            raise ValueError("batched sampling supports site-set regions only")
        sites = [z for z, a in enumerate(region.arcs) if a is None]
    return sample_batch(model, n, rng, sites)


# ---------------------------------------------------------------- two-point function


def estimate_G(model: Model, o, x, engine: McEngine) -> RatioEstimate:
    """G(o, x) as E[count(o + x)] / E[count(empty)] over shared samples."""
    src = sym_diff(_p(o), _p(x))

    def fn(rng, n):
        b = _batch(model, rng, n)
        return np.column_stack([b.counts(src), b.counts()])

    rep = run_replicas(engine, fn, tag="G")
    return rep.ratio(0, 1)


def _is_site_set(region: Region) -> bool:
    return all(a in (None, ()) for a in region.arcs)


def estimate_G_restricted(model: Model, o, x, region: Region, engine: McEngine) -> RatioEstimate:
    """Two-point function of the model living on the region with free boundary."""
    o, x = _p(o), _p(x)
    if not (region.contains_point(o) and region.contains_point(x)):
        raise ValueError("both points must lie in the region")
    src = sym_diff(o, x)
    if _is_site_set(region):

        def fn(rng, n):
            b = _batch(model, rng, n, region)
            return np.column_stack([b.counts(src), b.counts()])

    else:

        def fn(rng, n):
            out = np.zeros((n, 2))
            for i in range(n):
                xi, m = sample_config(model, region, rng)
                out[i, 0] = count_compatible(src, xi, m, region).total
                out[i, 1] = count_compatible((), xi, m, region).total
            return out

    return run_replicas(engine, fn, tag="G-restricted").ratio(0, 1)


@dataclass(frozen=True)
class KernelTable:
    """Values of a function of (t, x) on a uniform periodic time grid ts = k / n_t."""

    ts: np.ndarray
    values: np.ndarray  # (n_t, n_sites)
    std_error: np.ndarray
    source: str = "mc"

    @property
    def n_t(self) -> int:
        return len(self.ts)

    def rows(self):
        for k, t in enumerate(self.ts):
            for z in range(self.values.shape[1]):
                yield float(t), z, float(self.values[k, z]), float(self.std_error[k, z])


def uniform_grid(n_t: int) -> np.ndarray:
    if n_t < 1:
        raise ValueError("time grid needs at least one point")
    return np.arange(n_t) / n_t


def G_replicas(model: Model, ts, engine: McEngine, o: int = 0) -> ReplicaMeans:
    """Columns: count(o + (t, x)) for every (t, x) in row-major order, then count(empty)."""
    ts = np.asarray(ts, dtype=float)
    po = stp(0.0, o)
    pts = [stp(t, z) for t in ts for z in range(model.n_sites)]

    def fn(rng, n):
        b = _batch(model, rng, n)
        cols = [b.counts(sym_diff(po, p)) for p in pts]
        cols.append(b.counts())
        return np.column_stack(cols)

    return run_replicas(engine, fn, tag="G-table")


def G_table(model: Model, ts, engine: McEngine, o: int = 0) -> KernelTable:
    ts = np.asarray(ts, dtype=float)
    rep = G_replicas(model, ts, engine, o)
    k = len(ts) * model.n_sites
    val, se = jackknife(rep.values, lambda m: m[:k] / m[k])
    return KernelTable(ts, val.reshape(len(ts), -1), se.reshape(len(ts), -1))


def estimate_chi(model: Model, engine: McEngine, n_t: int = 32, o: int = 0) -> Estimate:
    """Periodic trapezoid rule over the time grid of sum_x G(o, (t, x))."""
    if n_t < 8:
        raise ValueError("need n_t >= 8")
    ts = uniform_grid(n_t)
    rep = G_replicas(model, ts, engine, o)
    k = n_t * model.n_sites
    val, se = jackknife(rep.values, lambda m: m[:k].sum() / m[k] / n_t)
    return Estimate(float(val), float(se), engine.n, engine.seed)


def estimate_one_point_S1(model: Model, y, engine: McEngine) -> Estimate:
    """<S1_y(s)> = 2 E[count with psi_y(s) = r] / E[count] - 1."""
    y = _p(y)

    def fn(rng, n):
        b = _batch(model, rng, n)
        return np.column_stack([b.counts(pins=(y,)), b.counts()])

    rep = run_replicas(engine, fn, tag="S1")
    val, se = jackknife(rep.values, lambda m: 2 * m[0] / m[1] - 1)
    return Estimate(float(val), float(se), engine.n, engine.seed)


def estimate_F4(model: Model, w, x, y, z, engine: McEngine) -> Estimate:
    """Fourth Ursell function of four S3 insertions."""
    w, x, y, z = (_p(a) for a in (w, x, y, z))
    pairs = [(w, x), (y, z), (w, y), (x, z), (w, z), (x, y)]

    def fn(rng, n):
        b = _batch(model, rng, n)
        cols = [b.counts(sym_diff(w, x, y, z))] + [b.counts(sym_diff(a, c)) for a, c in pairs]
        cols.append(b.counts())
        return np.column_stack(cols)

    rep = run_replicas(engine, fn, tag="F4")

    def f(m):
        g = m[:7] / m[7]
        return g[0] - g[1] * g[2] - g[3] * g[4] - g[5] * g[6]

    val, se = jackknife(rep.values, f)
    return Estimate(float(val), float(se), engine.n, engine.seed)


def estimate_F3(model: Model, w, x, y, engine: McEngine) -> Estimate:
    """<S3_w S3_x ; S1_y> + 2 G(w, y) G(y, x)."""
    w, x, y = (_p(a) for a in (w, x, y))

    def fn(rng, n):
        b = _batch(model, rng, n)
        cols = [
            b.counts(sym_diff(w, x), pins=(y,)),
            b.counts(sym_diff(w, x)),
            b.counts(pins=(y,)),
            b.counts(sym_diff(w, y)),
            b.counts(sym_diff(y, x)),
            b.counts(),
        ]
        return np.column_stack(cols)

    rep = run_replicas(engine, fn, tag="F3")

    def f(m):
        g = m[:5] / m[5]
        three = 2 * g[0] - g[1]
        one = 2 * g[2] - 1
        return three - g[1] * one + 2 * g[3] * g[4]

    val, se = jackknife(rep.values, f)
    return Estimate(float(val), float(se), engine.n, engine.seed)


# ---------------------------------------------------------------- kernels on (time grid x sites)


def site_difference(model: Model, u: int, x: int) -> int:
    """The site x - u of the torus."""
    lat = model.lattice
    return lat.translate(x, lat.negate(u))


def circulant(model: Model, row: np.ndarray) -> np.ndarray:
    """Matrix M[u, x] = row[x - u] of a translation-invariant site function."""
    n = model.n_sites
    return np.array([[row[site_difference(model, u, x)] for x in range(n)] for u in range(n)])


def coupling_row(model: Model) -> np.ndarray:
    """beta J_{0, u} as a function of u."""
    K = np.zeros((model.n_sites, model.n_sites))
    for (u, v), J in zip(model.bonds, model.J):
        K[u, v] += model.beta * J
        K[v, u] += model.beta * J
    return K[0]


def coupling_matrix_beta(model: Model) -> np.ndarray:
    return circulant(model, coupling_row(model))


def _check_mesh(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError("kernel meshes differ: %r vs %r" % (a.shape, b.shape))


def convolve(model: Model, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(a * b)(t, x) = int ds sum_u a(s, u) b(t - s, x - u) for kernels of shape (n_t, n_sites)."""
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    _check_mesh(a, b)
    n_t, n = a.shape
    out = np.zeros_like(a, dtype=float)
    for k in range(n_t):
        for s in range(n_t):
            bs = b[(k - s) % n_t]
            for u in range(n):
                if a[s, u] == 0:
                    continue
                for x in range(n):
                    out[k, x] += a[s, u] * bs[site_difference(model, u, x)]
    return out / n_t


def apply_coupling(model: Model, kernel: np.ndarray) -> np.ndarray:
    """(beta J * kernel)(t, x) = sum_u beta J_{0,u} kernel(t, x - u); the coupling acts at equal time."""
    kernel = np.atleast_2d(kernel)
    K = coupling_row(model)
    out = np.zeros_like(kernel, dtype=float)
    for u in range(model.n_sites):
        if K[u] == 0:
            continue
        for x in range(model.n_sites):
            out[:, x] += K[u] * kernel[:, site_difference(model, u, x)]
    return out


def coupling_kernel(model: Model, n_t: int) -> np.ndarray:
    """beta J as a (n_t, n_sites) kernel: a time delta of weight n_t at t = 0."""
    out = np.zeros((n_t, model.n_sites))
    out[0] = coupling_row(model) * n_t
    return out


# ---------------------------------------------------------------- q = 0 lace coefficients


def _require_q0(model: Model) -> None:
    if model.q != 0:
        raise ValueError("lace coefficients are implemented at q = 0")


def p_even_exact(model: Model, bond_mask=None) -> float:
    """Probability that every site sees an even number of bridge endpoints (bonds outside the mask carry none)."""
    lam = model.beta * np.asarray(model.J, dtype=float)
    if bond_mask is not None:
        lam = np.where(bond_mask, lam, 0.0)
    p_odd = (1 - np.exp(-2 * lam)) / 2
    inc = np.zeros((model.n_sites, model.n_bonds), dtype=np.int64)
    for b, (u, v) in enumerate(model.bonds):
        inc[u, b] += 1
        inc[v, b] += 1
    total = 0.0
    for par in itertools.product((0, 1), repeat=model.n_bonds):
        par = np.array(par, dtype=np.int64)
        if np.all((inc @ par) % 2 == 0):
            total += float(np.prod(np.where(par == 1, p_odd, 1 - p_odd)))
    return total


class _Layers:
    """Vectorized bond-count layers for one model at q = 0."""

    def __init__(self, model: Model):
        _require_q0(model)
        self.model = model
        self.n = model.n_sites
        self.nb = model.n_bonds
        self.lam = model.beta * np.asarray(model.J, dtype=float)
        self.inc = np.zeros((self.nb, self.n), dtype=np.int64)
        for b, (u, v) in enumerate(model.bonds):
            self.inc[b, u] += 1
            self.inc[b, v] += 1
        self.graph = SiteGraph(model.bonds, self.n)
        self._weights = 1 << np.arange(self.n)

    def draw(self, rng, n: int, bond_mask=None) -> np.ndarray:
        lam = self.lam if bond_mask is None else np.where(bond_mask, self.lam, 0.0)
        return rng.poisson(lam, size=(n, self.nb))

    def parity_code(self, counts: np.ndarray) -> np.ndarray:
        """Bitmask of odd sites per sample."""
        par = (counts @ self.inc) % 2
        return par @ self._weights

    def code(self, *sites) -> int:
        c = 0
        for z in sites:
            c ^= 1 << int(z)
        return c

    @staticmethod
    def cap(counts: np.ndarray) -> np.ndarray:
        return np.minimum(counts, 2)


def q0_replicas(model: Model, engine: McEngine, o: int = 0) -> ReplicaMeans:
    """Shared-stream columns for G and pi0 rows at q = 0.

    Columns: G numerators 1{par1 = o + x} (n), pi0 numerators
    1{par1 = o + x} 1{par2 even} 1{o <=> x} (n), e1, e1 * e2.
    """
    L = _Layers(model)
    n = L.n

    def fn(rng, m):
        c1 = L.draw(rng, m)
        c2 = L.draw(rng, m)
        p1 = L.parity_code(c1)
        e2 = L.parity_code(c2) == 0
        cap = L.cap(c1 + c2)
        out = np.zeros((m, 2 * n + 2))
        for x in range(n):
            hit = p1 == L.code(o, x)
            out[:, x] = hit
            idx = np.flatnonzero(hit & e2)
            for i in idx:
                if L.graph.doubly(tuple(cap[i]), o, x):
                    out[i, n + x] = 1.0
        out[:, 2 * n] = p1 == 0
        out[:, 2 * n + 1] = (p1 == 0) & e2
        return out

    return run_replicas(engine, fn, tag="q0-tables")


def estimate_pi0(model: Model, o, x, engine: McEngine) -> Estimate:
    """pi0(o, x) = E[1{par1 = o + x} 1{par2 even} 1{o <=> x}] / E[1{par1, par2 even}] at q = 0."""
    o, x = _p(o), _p(x)
    if o == x:
        return Estimate(1.0, 0.0, engine.n, engine.seed)
    rep = q0_replicas(model, engine, o.x)
    n = model.n_sites
    if o.x == x.x:
        return Estimate(1.0, 0.0, engine.n, engine.seed)
    val, se = jackknife(rep.values, lambda m: m[n + x.x] / m[2 * n + 1])
    return Estimate(float(val), float(se), engine.n, engine.seed)


@dataclass(frozen=True)
class NestedEstimate:
    estimate: Estimate
    n_outer: int
    n_inner: int
    n_active: int

    @property
    def mean(self) -> float:
        return self.estimate.mean

    @property
    def std_error(self) -> float:
        return self.estimate.std_error

    def within(self, target: float, k: float = 4.0, extra: float = 0.0) -> bool:
        return self.estimate.within(target, k, extra)


def pi1_replicas(model: Model, engine: McEngine, o: int = 0, n_inner: int = INNER_DRAWS):
    """Replica means of the pi1 row (all x) and the number of active outer samples.

    Outer: layers 1, 2 and a bridge inserted on a bond drawn proportionally to
    J (weight beta * sum J, both orientations).  Inner: n_inner independent draws
    of a full layer 3 and a layer 4 confined to the complement of the cluster.
    """
    L = _Layers(model)
    n, nb = L.n, L.nb
    J = np.asarray(model.J, dtype=float)
    weight = model.beta * J.sum()
    pe = p_even_exact(model)
    pe_cache: dict = {}
    active = [0]

    def fn(rng, m):
        c1 = L.draw(rng, m)
        c2 = L.draw(rng, m)
        bonds = rng.choice(nb, size=m, p=J / J.sum())
        p1 = L.parity_code(c1)
        e2 = L.parity_code(c2) == 0
        cap = L.cap(c1 + c2)
        out = np.zeros((m, n))
        for i in np.flatnonzero(e2):
            b = int(bonds[i])
            u0, v0 = (int(s) for s in model.bonds[b])
            for u, v in ((u0, v0), (v0, u0)):
                if p1[i] != L.code(o, u):
                    continue
                mult = tuple(cap[i])
                if not L.graph.doubly(mult, o, u):
                    continue
                active[0] += 1
                C = L.graph.cluster(mult, o)
                mask = np.array([(a not in C) and (c not in C) for a, c in model.bonds], dtype=bool)
                if C not in pe_cache:
                    pe_cache[C] = p_even_exact(model, mask)
                c3 = L.draw(rng, n_inner)
                c4 = L.draw(rng, n_inner, mask)
                p3 = L.parity_code(c3)
                e4 = L.parity_code(c4) == 0
                cap34 = L.cap(c3 + c4)
                inner = np.zeros(n)
                for k in np.flatnonzero(e4):
                    x = _partner(int(p3[k]), v)
                    if x is not None and L.graph.event_E(tuple(cap34[k]), C, v, x):
                        inner[x] += 1.0
                out[i] += inner / n_inner / (pe * pe_cache[C])
        return out * weight / pe**2

    rep = run_replicas(engine, fn, tag="pi1")
    return rep, active[0]


def _partner(code: int, v: int) -> int | None:
    """The site x with odd-site mask code = {v} + {x}, if any."""
    if code == 0:
        return v
    rest = code ^ (1 << v)
    if code >> v & 1 and rest and rest & (rest - 1) == 0:
        return rest.bit_length() - 1
    return None


def estimate_pi_j(j: int, model: Model, o, x, engine: McEngine, n_inner: int = INNER_DRAWS) -> NestedEstimate:
    o, x = _p(o), _p(x)
    if j == 0:
        est = estimate_pi0(model, o, x, engine)
        return NestedEstimate(est, engine.n, 1, engine.n)
    if j != 1:
        raise NotImplementedError("nested estimators are provided for j <= 1")
    _require_q0(model)
    rep, active = pi1_replicas(model, engine, o.x, n_inner)
    est = rep.estimate(x.x)
    return NestedEstimate(est, engine.n, n_inner, active)


# ---------------------------------------------------------------- lace-size decomposition of pi0


@dataclass(frozen=True)
class LaceTally:
    """Replica columns: for every pair, pi0 numerator then N = 1..N_MAX (last bin N >= N_MAX); final column e1 e2."""

    rep: ReplicaMeans
    pairs: tuple
    n_max: int
    violations: int

    def _col(self, p: int, k: int) -> int:
        return p * (self.n_max + 1) + k

    @property
    def den_col(self) -> int:
        return len(self.pairs) * (self.n_max + 1)

    def pi0(self, p: int) -> Estimate:
        return self._est(lambda m: m[self._col(p, 0)] / m[self.den_col])

    def pi_N(self, p: int, N: int) -> Estimate:
        return self._est(lambda m: m[self._col(p, N)] / m[self.den_col])

    def partition_gap(self, p: int) -> Estimate:
        cols = [self._col(p, k) for k in range(1, self.n_max + 1)]
        return self._est(lambda m: (m[cols].sum() - m[self._col(p, 0)]) / m[self.den_col])

    def _est(self, fn) -> Estimate:
        val, se = jackknife(self.rep.values, fn)
        return Estimate(float(val), float(se), self.rep.engine.n, self.rep.engine.seed)


def lace_tally(model: Model, pairs, engine: McEngine, n_max: int = N_MAX) -> LaceTally:
    """pi0 split by lace size N for each (o, x) pair, from one stream of continuous-time samples."""
    _require_q0(model)
    pairs = tuple((_p(o), _p(x)) for o, x in pairs)
    L = _Layers(model)
    n = model.n_sites
    width = len(pairs) * (n_max + 1) + 1
    violations = [0]
    empty_marks = MarkConfig.empty(n)

    def fn(rng, m):
        b1 = sample_batch(model, m, rng)
        b2 = sample_batch(model, m, rng)
        nb = model.n_bonds
        c1 = np.zeros((m, nb), dtype=np.int64)
        c2 = np.zeros((m, nb), dtype=np.int64)
        np.add.at(c1, (b1.bridge_sample, b1.bridge_bond), 1)
        np.add.at(c2, (b2.bridge_sample, b2.bridge_bond), 1)
        p1 = L.parity_code(c1)
        e2 = L.parity_code(c2) == 0
        cap = L.cap(c1 + c2)
        out = np.zeros((m, width))
        out[:, -1] = (p1 == 0) & e2
        for i in np.flatnonzero(e2):
            cfg = None
            for pidx, (o, x) in enumerate(pairs):
                if o == x:
                    if p1[i] == 0:
                        out[i, pidx * (n_max + 1)] = 1.0
                        out[i, pidx * (n_max + 1) + 1] = 1.0
                    continue
                if p1[i] != L.code(o.x, x.x):
                    continue
                if not L.graph.doubly(tuple(cap[i]), o.x, x.x):
                    continue
                out[i, pidx * (n_max + 1)] = 1.0
                if cfg is None:
                    xi1, _ = b1.configuration(i)
                    xi2, _ = b2.configuration(i)
                    try:
                        cfg = merge(xi1, empty_marks, xi2, empty_marks)
                    except ValueError:
                        cfg = "collision"
                if isinstance(cfg, str):
                    # coinciding times have probability zero; count the sample in the top bin
                    out[i, pidx * (n_max + 1) + n_max] = 1.0
                    violations[0] += 1
                    continue
                table = count_compatible((o, x), xi1, empty_marks)
                trajs = list(enumerate_trajectories(table))
                for psi1 in trajs:
                    lace = build_lace(backbone(xi1, psi1, o, x), cfg)
                    if lace.N == 0:
                        violations[0] += 1
                        continue
                    out[i, pidx * (n_max + 1) + min(lace.N, n_max)] += 1.0 / len(trajs)
        return out

    rep = run_replicas(engine, fn, tag="lace")
    return LaceTally(rep, pairs, n_max, violations[0])

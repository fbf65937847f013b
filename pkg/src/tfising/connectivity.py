"""Open-path connectivity on the space-time graph of two superposed configurations.

Two resolutions of the same object are kept.  Segments are the maximal pieces
of the site circles (restricted to the region) between blocking points; the
union-find over segments joined by bridges answers connectivity and cluster
queries.  The fine graph has a vertex at every bridge endpoint and query point
and one edge per bridge and per elementary arc between consecutive vertices;
double connectivity, pivotality and explicit paths are read off this multigraph.
Every internal fine vertex has degree at most three, so edge-disjoint and
vertex-disjoint path pairs coincide there.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .spacetime import L, R, BridgeConfig, LabeledConfig, Region, SpaceTimePoint, _in_arc, stp

EPS_PROBE = 0.5


# ---------------------------------------------------------------- helpers


def _value(traj, t: float) -> int:
    """Trajectory value, with R outside the trajectory's domain."""
    if traj is None:
        return R
    if traj.arcs is not None and not any(_in_arc(t, a, b) for a, b in traj.arcs):
        return R
    return traj.value(t)


def _offset(t: float, a: float) -> float:
    return (t - a) % 1.0


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def cut_edges(n_vertices: int, edges) -> set[int]:
    """Ids of the edges whose removal increases the number of components (multigraph-aware)."""
    adj = [[] for _ in range(n_vertices)]
    for eid, (a, b) in enumerate(edges):
        if a == b:
            continue
        adj[a].append((b, eid))
        adj[b].append((a, eid))
    disc = [-1] * n_vertices
    low = [0] * n_vertices
    out: set[int] = set()
    timer = 0
    for root in range(n_vertices):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = timer
        timer += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            v, pe, it = stack[-1]
            advanced = False
            for w, eid in it:
                if eid == pe:
                    continue
                if disc[w] == -1:
                    disc[w] = low[w] = timer
                    timer += 1
                    stack.append((w, eid, iter(adj[w])))
                    advanced = True
                    break
                low[v] = min(low[v], disc[w])
            if not advanced:
                stack.pop()
                if stack:
                    u = stack[-1][0]
                    low[u] = min(low[u], low[v])
                    if low[v] > disc[u]:
                        out.add(pe)
    return out


# ---------------------------------------------------------------- graph


@dataclass(frozen=True)
class Segment:
    site: int
    start: float | None  # None: whole circle
    end: float | None

    def arc(self):
        return None if self.start is None else (self.start, self.end)


@dataclass(frozen=True)
class FineEdge:
    a: int
    b: int
    kind: str  # "arc" or "bridge"
    site: int = -1
    t_from: float = 0.0  # arc runs forward in time from t_from to t_to
    t_to: float = 0.0
    bridge: int = -1

    def midpoint(self) -> float:
        return (self.t_from + 0.5 * ((self.t_to - self.t_from) % 1.0 or 1.0)) % 1.0


@dataclass(frozen=True)
class GraphInputs:
    cfg: LabeledConfig
    psi1: tuple
    psi2: tuple | None
    region: Region


class IntervalGraph:
    """Segments, bridges and the fine multigraph of one (psi1, psi2, m) superposition."""

    def __init__(self, inputs: GraphInputs, points=(), drop_bridges=frozenset(), cut_points=()):
        self.inputs = inputs
        self.points = tuple(sorted(set(points)))
        self.drop_bridges = frozenset(drop_bridges)
        self.cut_points = tuple(sorted(set(cut_points)))
        self._build()

    # -- construction

    def _build(self) -> None:
        cfg, region = self.inputs.cfg, self.inputs.region
        n = cfg.n_sites
        psi1, psi2 = self.inputs.psi1, self.inputs.psi2
        cuts = [[] for _ in range(n)]
        self.blocking = []
        for i, (z, t) in enumerate(zip(cfg.mark_site, cfg.mark_t)):
            z, t = int(z), float(t)
            if not region.contains(z, t):
                continue
            if _value(psi1[z], t) == R and _value(None if psi2 is None else psi2[z], t) == R:
                cuts[z].append(t)
                self.blocking.append(i)
        for p in self.cut_points:
            cuts[p.x].append(p.t)
        cutset = [set(c) for c in cuts]

        self.bridges = []  # (index into cfg, u, v, t)
        for i, (b, t) in enumerate(zip(cfg.bridge_bond, cfg.bridge_t)):
            if i in self.drop_bridges:
                continue
            u, v = (int(s) for s in cfg.bonds[b])
            t = float(t)
            if not (region.contains(u, t) and region.contains(v, t)):
                continue
            if t in cutset[u] or t in cutset[v]:
                continue
            self.bridges.append((i, u, v, t))

        keys: dict[tuple[int, float], int] = {}
        vsite: list[int] = []
        vtime: list[float] = []

        def vertex(z, t):
            k = (z, t)
            if k not in keys:
                keys[k] = len(vsite)
                vsite.append(z)
                vtime.append(t)
            return keys[k]

        per_site = [[] for _ in range(n)]
        for i, u, v, t in self.bridges:
            per_site[u].append(t)
            per_site[v].append(t)
        for p in self.points:
            if region.contains(p.x, p.t) and p.t not in cutset[p.x]:
                per_site[p.x].append(p.t)

        self.segments: list[Segment] = []
        self.edges: list[FineEdge] = []
        vseg: dict[int, int] = {}
        for z in range(n):
            arcs = region.arcs[z]
            if arcs == ():
                continue
            pts = sorted(set(per_site[z]))
            zc = sorted(cuts[z])
            pieces = [(0.0, None)] if arcs is None else [(a, b) for a, b in arcs]
            for a, b in pieces:
                if b is None:  # whole circle
                    if not zc:
                        sid = len(self.segments)
                        self.segments.append(Segment(z, None, None))
                        ids = [vertex(z, t) for t in pts]
                        for v in ids:
                            vseg[v] = sid
                        if len(ids) >= 2:
                            for j in range(len(ids)):
                                k = (j + 1) % len(ids)
                                self.edges.append(FineEdge(ids[j], ids[k], "arc", z, pts[j], pts[k]))
                        continue
                    bounds = [(c, zc[(j + 1) % len(zc)]) for j, c in enumerate(zc)]
                else:
                    length = (b - a) % 1.0 or 1.0
                    inner = sorted((c for c in zc if 0 < _offset(c, a) < length), key=lambda c: _offset(c, a))
                    stops = [a] + inner + [b]
                    bounds = list(zip(stops[:-1], stops[1:]))
                for s, e in bounds:
                    sid = len(self.segments)
                    self.segments.append(Segment(z, s, e))
                    span = (e - s) % 1.0 or 1.0
                    inside = sorted(
                        (t for t in pts if 0 < _offset(t, s) < span or (t == s and b is not None and s == a)),
                        key=lambda t: _offset(t, s),
                    )
                    ids = [vertex(z, t) for t in inside]
                    for v in ids:
                        vseg[v] = sid
                    for j in range(len(ids) - 1):
                        self.edges.append(FineEdge(ids[j], ids[j + 1], "arc", z, inside[j], inside[j + 1]))
        self._keys = keys
        self.vsite = vsite
        self.vtime = vtime
        self.vseg = [vseg[v] for v in range(len(vsite))]
        for i, u, v, t in self.bridges:
            self.edges.append(FineEdge(keys[(u, t)], keys[(v, t)], "bridge", bridge=i))

        uf = _UnionFind(len(self.segments))
        for e in self.edges:
            if e.kind == "bridge":
                uf.union(self.vseg[e.a], self.vseg[e.b])
        self.seg_comp = [uf.find(s) for s in range(len(self.segments))]

    # -- rebuilding

    def rebuild(self, points=(), drop_bridges=(), cut_points=(), region: Region | None = None) -> "IntervalGraph":
        inputs = self.inputs
        if region is not None:
            inputs = GraphInputs(inputs.cfg, inputs.psi1, inputs.psi2, inputs.region.intersect(region))
        return IntervalGraph(
            inputs,
            tuple(self.points) + tuple(points),
            self.drop_bridges | frozenset(drop_bridges),
            tuple(self.cut_points) + tuple(cut_points),
        )

    def with_points(self, points) -> "IntervalGraph":
        missing = [p for p in points if p not in self.points]
        return self if not missing else self.rebuild(points=missing)

    # -- segment-level queries

    def locate(self, p: SpaceTimePoint) -> int | None:
        if not self.inputs.region.contains(p.x, p.t):
            return None
        if any(c == p for c in self.cut_points):
            return None
        for sid, s in enumerate(self.segments):
            if s.site != p.x:
                continue
            if s.start is None:
                return sid
            span = (s.end - s.start) % 1.0 or 1.0
            off = _offset(p.t, s.start)
            if off < span and not (off == 0 and self._is_cut(p.x, s.start)):
                return sid
        return None

    def _is_cut(self, z: int, t: float) -> bool:
        cfg = self.inputs.cfg
        for i in self.blocking:
            if int(cfg.mark_site[i]) == z and float(cfg.mark_t[i]) == t:
                return True
        return any(c.x == z and c.t == t for c in self.cut_points)

    def connected(self, a: SpaceTimePoint, b: SpaceTimePoint, within: Region | None = None) -> bool:
        if a == b:
            return True
        if within is not None:
            return self.rebuild(region=within).connected(a, b)
        sa, sb = self.locate(a), self.locate(b)
        if sa is None or sb is None:
            return False
        return self.seg_comp[sa] == self.seg_comp[sb]

    def connected_through(self, a: SpaceTimePoint, b: SpaceTimePoint, C: Region) -> bool:
        return self.connected(a, b) and not self.connected(a, b, within=C.complement())

    def component_segments(self, a: SpaceTimePoint) -> list[int]:
        s = self.locate(a)
        if s is None:
            return []
        return [i for i, c in enumerate(self.seg_comp) if c == self.seg_comp[s]]

    def segments_region(self, seg_ids) -> Region:
        n = self.inputs.cfg.n_sites
        per = [[] for _ in range(n)]
        full = [False] * n
        for i in seg_ids:
            s = self.segments[i]
            if s.start is None:
                full[s.site] = True
            elif s.start == s.end:
                per[s.site].append((s.start, s.start))
            else:
                per[s.site].append((s.start, s.end))
        arcs = []
        for z in range(n):
            if full[z]:
                arcs.append(None)
            elif per[z] and any(a == b for a, b in per[z]):
                arcs.append(None)
            else:
                arcs.append(per[z])
        return Region.from_arcs(arcs)

    def cluster(self, a: SpaceTimePoint) -> Region:
        return self.segments_region(self.component_segments(a))

    def cluster_off_bridge(self, a: SpaceTimePoint, bridge: int) -> Region:
        return self.rebuild(drop_bridges=[bridge]).cluster(a)

    def cluster_off_vertex(self, a: SpaceTimePoint, v: SpaceTimePoint) -> Region:
        if a == v:
            return Region.empty(self.inputs.cfg.n_sites)
        return self.rebuild(cut_points=[v]).cluster(a)

    # -- fine-graph queries

    def vertex_of(self, p: SpaceTimePoint) -> int:
        return self._keys[(p.x, p.t)]

    def _fine_components(self, skip=frozenset()) -> list[int]:
        uf = _UnionFind(len(self.vsite))
        for eid, e in enumerate(self.edges):
            if eid not in skip:
                uf.union(e.a, e.b)
        return [uf.find(v) for v in range(len(self.vsite))]

    def doubly_connected(self, a: SpaceTimePoint, b: SpaceTimePoint) -> bool:
        if a == b:
            return True
        g = self.with_points([a, b])
        if not g.connected(a, b):
            return False
        cuts = cut_edges(len(g.vsite), [(e.a, e.b) for e in g.edges])
        comp = g._fine_components(cuts)
        return comp[g.vertex_of(a)] == comp[g.vertex_of(b)]

    def pivotal_bridges(self, a: SpaceTimePoint, b: SpaceTimePoint) -> list[tuple[int, SpaceTimePoint, SpaceTimePoint]]:
        """Oriented pivotal bridges (index, u, v) for a -> b, ordered from a."""
        if a == b:
            return []
        g = self.with_points([a, b])
        if not g.connected(a, b):
            return []
        cuts = cut_edges(len(g.vsite), [(e.a, e.b) for e in g.edges])
        va, vb = g.vertex_of(a), g.vertex_of(b)
        out = []
        for eid in sorted(cuts):
            e = g.edges[eid]
            if e.kind != "bridge":
                continue
            comp = g._fine_components({eid})
            if comp[va] == comp[vb]:
                continue
            u, v = (e.a, e.b) if comp[e.a] == comp[va] else (e.b, e.a)
            size = sum(1 for c in comp if c == comp[va])
            out.append((size, e.bridge, stp(g.vtime[u], g.vsite[u]), stp(g.vtime[v], g.vsite[v])))
        out.sort(key=lambda r: r[0])
        return [r[1:] for r in out]

    def pivotal_vertices(self, a: SpaceTimePoint, b: SpaceTimePoint) -> list[SpaceTimePoint]:
        if a == b:
            return []
        g = self.with_points([a, b])
        if not g.connected(a, b):
            return []
        candidates = [stp(t, z) for z, t in zip(g.vsite, g.vtime)]
        candidates += [stp(e.midpoint(), e.site) for e in g.edges if e.kind == "arc"]
        out = []
        for p in candidates:
            if p == a or p == b:
                continue
            if not g.rebuild(cut_points=[p]).connected(a, b):
                out.append(p)
        return sorted(set(out))

    def find_path(self, a: SpaceTimePoint, b: SpaceTimePoint) -> list[FineEdge] | None:
        """Breadth-first open path from a to b as an ordered list of oriented fine edges."""
        g = self.with_points([a, b])
        if a == b:
            return []
        if not g.connected(a, b):
            return None
        adj = [[] for _ in range(len(g.vsite))]
        for eid, e in enumerate(g.edges):
            adj[e.a].append((e.b, eid))
            adj[e.b].append((e.a, eid))
        src, dst = g.vertex_of(a), g.vertex_of(b)
        prev = {src: None}
        queue = deque([src])
        while queue:
            v = queue.popleft()
            if v == dst:
                break
            for w, eid in sorted(adj[v]):
                if w not in prev:
                    prev[w] = (v, eid)
                    queue.append(w)
        path = []
        v = dst
        while prev[v] is not None:
            u, eid = prev[v]
            e = g.edges[eid]
            path.append(_orient(e, u, v))
            v = u
        return path[::-1]

    def to_text(self) -> str:
        lines = ["S %d %s %s" % (s.site, s.start, s.end) for s in self.segments]
        lines += ["E %d %d %s %d %r %r %d" % (e.a, e.b, e.kind, e.site, e.t_from, e.t_to, e.bridge) for e in self.edges]
        return "\n".join(lines)


def _orient(e: FineEdge, u: int, v: int) -> FineEdge:
    """Copy of e traversed from u to v; arcs keep forward time order, a/b record the direction."""
    return FineEdge(u, v, e.kind, e.site, e.t_from, e.t_to, e.bridge)


def build_graph(cfg: LabeledConfig, psi1, psi2=None, region: Region | None = None, points=()) -> IntervalGraph:
    region = Region.full(cfg.n_sites) if region is None else region
    return IntervalGraph(GraphInputs(cfg, tuple(psi1), None if psi2 is None else tuple(psi2), region), points)


def q0_graph(xi: BridgeConfig, n_sites: int, points=()) -> IntervalGraph:
    """Graph of a mark-free configuration; trajectories play no role without marks."""
    cfg = _single_layer(xi, n_sites)
    return build_graph(cfg, [None] * n_sites, None, None, points)


def _single_layer(xi: BridgeConfig, n_sites: int, label: int = 1) -> LabeledConfig:
    bb, bt = [], []
    for b, t in xi.items():
        bb.append(b)
        bt.append(t)
    return LabeledConfig(
        np.asarray(xi.bonds), n_sites,
        np.array(bb, dtype=np.int64), np.array(bt, dtype=float), np.full(len(bb), label, dtype=np.int8),
        np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0, dtype=np.int8),
    )


def connected(g: IntervalGraph, a, b, within: Region | None = None) -> bool:
    return g.connected(a, b, within)


def doubly_connected(g: IntervalGraph, a, b) -> bool:
    return g.doubly_connected(a, b)


def pivotal_bridges(g: IntervalGraph, a, b):
    return g.pivotal_bridges(a, b)


def pivotal_vertices(g: IntervalGraph, a, b):
    return g.pivotal_vertices(a, b)


def piv_dec_terms(g: IntervalGraph, a: SpaceTimePoint, b: SpaceTimePoint) -> int:
    """Number of oriented bridges (u, v) with a doubly connected to u off {u, v} and v -> b off the cluster."""
    total = 0
    for i, u, v, t in g.bridges:
        for p, q in ((stp(t, u), stp(t, v)), (stp(t, v), stp(t, u))):
            off = g.rebuild(drop_bridges=[i], points=[a, b, p, q])
            if not off.doubly_connected(a, p):
                continue
            C = off.cluster(a)
            if g.connected(q, b, within=C.complement()) and not C.contains_point(q) and not C.contains_point(b):
                total += 1
    return total


# ---------------------------------------------------------------- backbone and lace (q = 0)


@dataclass(frozen=True)
class Piece:
    site: int
    start: float
    end: float
    forward: bool

    @property
    def length(self) -> float:
        d = (self.end - self.start) % 1.0 if self.forward else (self.start - self.end) % 1.0
        return d or 1.0

    def offset(self, t: float) -> float | None:
        """Distance from start along the piece, or None if t is not on the closed piece."""
        d = (t - self.start) % 1.0 if self.forward else (self.start - t) % 1.0
        if t == self.end:
            return self.length
        return d if d <= self.length else None

    def arc(self) -> tuple[float, float]:
        return (self.start, self.end) if self.forward else (self.end, self.start)


@dataclass(frozen=True)
class Backbone:
    """Alternating oriented intervals and bridges from o to x inside l(psi1)."""

    pieces: tuple
    bridges: tuple  # (bridge key (bond, t), from site, to site), between consecutive pieces
    o: SpaceTimePoint
    x: SpaceTimePoint

    def position(self, p: SpaceTimePoint) -> tuple[int, float] | None:
        for k, pc in enumerate(self.pieces):
            if pc.site == p.x:
                off = pc.offset(p.t)
                if off is not None:
                    return (k, off)
        return None

    def tag(self, p: SpaceTimePoint) -> str:
        if p == self.o or p == self.x:
            return "S"
        k, off = self.position(p)
        return "B" if off == 0.0 or off == self.pieces[k].length else "I"

    def region(self, n_sites: int) -> Region:
        per = [[] for _ in range(n_sites)]
        for pc in self.pieces:
            per[pc.site].append(pc.arc())
        return Region.from_arcs([p if p else () for p in per])

    def contains_point(self, p: SpaceTimePoint) -> bool:
        return self.position(p) is not None


def backbone(xi1: BridgeConfig, psi1, o: SpaceTimePoint, x: SpaceTimePoint) -> Backbone:
    """The unique path inside l(psi1) joining the two sources o and x."""
    if o == x:
        raise ValueError("backbone needs two distinct sources")
    by_site_time = {}
    for b, t in xi1.items():
        u, v = (int(s) for s in xi1.bonds[b])
        by_site_time[(u, t)] = (b, v)
        by_site_time[(v, t)] = (b, u)
    pieces, bridges = [], []
    z, t = o.x, o.t
    limit = 2 * sum(len(ts) for ts in xi1.times) + 4
    for _ in range(limit):
        traj = psi1[z]
        flips = np.asarray(traj.flips)
        if t not in set(flips.tolist()):
            raise ValueError("backbone walk reached a point that is not a flip")
        after = 1 - traj.value(t)
        forward = after == L
        j = int(np.searchsorted(flips, t))
        nxt = float(flips[(j + 1) % len(flips)]) if forward else float(flips[(j - 1) % len(flips)])
        if len(flips) == 1:
            raise ValueError("isolated flip on a circle")
        pieces.append(Piece(z, t, nxt, forward))
        if z == x.x and nxt == x.t:
            return Backbone(tuple(pieces), tuple(bridges), o, x)
        if (z, nxt) not in by_site_time:
            raise ValueError("backbone walk hit an unexpected source")
        b, w = by_site_time[(z, nxt)]
        bridges.append(((b, nxt), z, w))
        z, t = w, nxt
    raise ValueError("backbone walk did not terminate")


@dataclass(frozen=True)
class Lace:
    edges: tuple  # ((y, z), ...) of SpaceTimePoints
    tags: tuple  # ((tag_y, tag_z), ...)
    positions: tuple = field(repr=False, default=())

    @property
    def N(self) -> int:
        return len(self.edges)

    def is_mutually_avoiding(self) -> bool:
        pos = self.positions
        for j in range(len(pos)):
            y, z = pos[j]
            if not y < z:
                return False
            if j + 1 < len(pos) and not (pos[j + 1][0] < z < pos[j + 1][1]):
                return False
            if j + 2 < len(pos) and not (pos[j + 2][0] >= z):
                return False
        return True


NO_LACE = Lace((), (), ())


def build_lace(S1: Backbone, cfg: LabeledConfig) -> Lace:
    """Lace of the off-backbone connections of a mark-free superposition (all bridges of cfg)."""
    n = cfg.n_sites
    g = build_graph(cfg, [None] * n, None, None, points=[S1.o, S1.x])
    s1_bridges = set(key for key, _, _ in S1.bridges)
    keep = []
    for e in g.edges:
        if e.kind == "bridge":
            key = (int(cfg.bridge_bond[e.bridge]), float(cfg.bridge_t[e.bridge]))
            if key in s1_bridges:
                continue
        else:
            mid = stp(e.midpoint(), e.site)
            pos = S1.position(mid)
            if pos is not None and 0 < pos[1] < S1.pieces[pos[0]].length:
                continue
        keep.append(e)
    uf = _UnionFind(len(g.vsite))
    for e in keep:
        uf.union(e.a, e.b)
    terminals = {}
    for v, (z, t) in enumerate(zip(g.vsite, g.vtime)):
        p = stp(t, z)
        pos = S1.position(p)
        if pos is not None:
            terminals[v] = (pos, p)
    comps: dict[int, list] = {}
    for v, (pos, p) in terminals.items():
        comps.setdefault(uf.find(v), []).append((pos, p))
    comp_of = {p: uf.find(v) for v, (pos, p) in terminals.items()}
    o_pos, x_pos = S1.position(S1.o), S1.position(S1.x)

    edges, positions = [], []
    z_pos, z_pt = max(comps[comp_of[S1.o]])
    edges.append((S1.o, z_pt))
    positions.append((o_pos, z_pos))
    while z_pos < x_pos:
        best = None
        for members in comps.values():
            below = [m for m in members if m[0] < z_pos]
            above = [m for m in members if m[0] > z_pos]
            if below and above:
                cand = max(above)
                if best is None or cand[0] > best[0][0]:
                    best = (cand, min(members))
        if best is None:
            return NO_LACE
        (z_pos, z_pt), (y_pos, y_pt) = best
        edges.append((y_pt, z_pt))
        positions.append((y_pos, z_pos))
    tags = tuple((S1.tag(y), S1.tag(z)) for y, z in edges)
    return Lace(tuple(edges), tags, tuple(positions))


# ---------------------------------------------------------------- site level (q = 0)


class SiteGraph:
    """Site multigraph of a mark-free configuration, keyed by bond multiplicities capped at 2.

    Without marks every circle is one open piece, so space-time connectivity,
    double connectivity and pivotality reduce to this graph.
    """

    def __init__(self, bonds, n_sites: int):
        self.bonds = [(int(u), int(v)) for u, v in bonds]
        self.n = n_sites
        self._cache: dict = {}

    def _memo(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def components(self, mult: tuple, allowed=None) -> tuple:
        uf = _UnionFind(self.n)
        for b, (u, v) in enumerate(self.bonds):
            if mult[b] > 0 and (allowed is None or allowed[b]):
                uf.union(u, v)
        return tuple(uf.find(z) for z in range(self.n))

    def connected(self, mult: tuple, a: int, b: int) -> bool:
        comp = self._memo(("c", mult), lambda: self.components(mult))
        return comp[a] == comp[b]

    def cluster(self, mult: tuple, a: int) -> frozenset:
        comp = self._memo(("c", mult), lambda: self.components(mult))
        return frozenset(z for z in range(self.n) if comp[z] == comp[a])

    def _cut_bonds(self, mult: tuple) -> frozenset:
        edges = []
        ids = []
        for b, (u, v) in enumerate(self.bonds):
            for _ in range(min(int(mult[b]), 2)):
                edges.append((u, v))
                ids.append(b)
        return frozenset(ids[e] for e in cut_edges(self.n, edges))

    def cut_bonds(self, mult: tuple) -> frozenset:
        return self._memo(("k", mult), lambda: self._cut_bonds(mult))

    def doubly(self, mult: tuple, a: int, b: int) -> bool:
        if a == b:
            return True
        if not self.connected(mult, a, b):
            return False
        return not self.pivotal(mult, a, b)

    def pivotal(self, mult: tuple, a: int, b: int) -> list[tuple[int, int, int]]:
        """Oriented pivotal bonds (bond, u, v) for a -> b, u on a's side."""

        def run():
            out = []
            for bd in sorted(self.cut_bonds(mult)):
                allowed = [i != bd for i in range(len(self.bonds))]
                comp = self.components(mult, allowed)
                if comp[a] == comp[b]:
                    continue
                u, v = self.bonds[bd]
                out.append((bd, u, v) if comp[u] == comp[a] else (bd, v, u))
            return out

        if a == b or not self.connected(mult, a, b):
            return []
        return self._memo(("p", mult, a, b), run)

    def connected_avoiding(self, mult: tuple, C: frozenset, a: int, b: int) -> bool:
        """a <-> b using only sites outside C (false if either endpoint is in C)."""
        if a in C or b in C:
            return False
        if a == b:
            return True
        allowed = [u not in C and v not in C for u, v in self.bonds]
        comp = self._memo(("a", mult, C), lambda: self.components(mult, allowed))
        return comp[a] == comp[b]

    def event_E(self, mult: tuple, C: frozenset, v: int, x: int) -> bool:
        """v <-> x only through C, and every pivotal bond (y, z) of v -> x has v <-> y avoiding C."""

        def run():
            if not self.connected(mult, v, x) or self.connected_avoiding(mult, C, v, x):
                return False
            return all(self.connected_avoiding(mult, C, v, y) for _, y, _ in self.pivotal(mult, v, x))

        return self._memo(("E", mult, C, v, x), run)

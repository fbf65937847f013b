import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tfising.connectivity import (
    NO_LACE,
    SiteGraph,
    backbone,
    build_graph,
    build_lace,
    cut_edges,
    piv_dec_terms,
    q0_graph,
)
from tfising.model import make_model
from tfising.sampler import sample_config, stream
from tfising.spacetime import (
    BridgeConfig,
    MarkConfig,
    Region,
    count_compatible,
    enumerate_trajectories,
    flip_times,
    merge,
    stp,
)

SEEDS = st.integers(0, 10**6)


def _fix_sources(xi, rng, n):
    return tuple(stp(float(rng.random()), z) for z in range(n) if len(flip_times(z, (), xi)) % 2)


def random_graph(seed, q=0.3, beta=0.8, arcs=False):
    """A superposition of two random layers with admissible trajectories, plus two random points."""
    m = make_model(1, 2, beta=beta, q=q)
    rng = stream(seed, 0, "conn")
    for _ in range(100):
        xi1, m1 = sample_config(m, None, rng)
        xi2, m2 = sample_config(m, None, rng)
        t1 = count_compatible(_fix_sources(xi1, rng, 4), xi1, m1)
        t2 = count_compatible(_fix_sources(xi2, rng, 4), xi2, m2)
        if t1.total and t2.total:
            break
    cfg = merge(xi1, m1, xi2, m2)
    psi1 = [c[int(rng.integers(len(c)))] for c in t1.trajectories]
    psi2 = [c[int(rng.integers(len(c)))] for c in t2.trajectories]
    C = Region.from_arcs([[(0.1, 0.4)], (), [(0.7, 0.2)], ()]) if arcs else Region.full(4)
    g = build_graph(cfg, psi1, psi2, C)
    while True:
        a = stp(float(rng.random()), int(rng.integers(4)))
        b = stp(float(rng.random()), int(rng.integers(4)))
        if C.contains_point(a) and C.contains_point(b):
            return g, a, b


def grid_connected(g, a, b, nb=3000):
    """Connectivity on a discretized copy of the region: an independent path search."""
    G = nx.Graph()
    cfg, reg = g.inputs.cfg, g.inputs.region
    cut = {(int(cfg.mark_site[i]), int(cfg.mark_t[i] * nb)) for i in g.blocking}
    for z in range(cfg.n_sites):
        for k in range(nb):
            if (z, k) in cut or not reg.contains(z, (k + 0.5) / nb):
                continue
            G.add_node((z, k))
            k2 = (k + 1) % nb
            if (z, k2) not in cut and reg.contains(z, (k2 + 0.5) / nb):
                G.add_edge((z, k), (z, k2))
    for _, u, v, t in g.bridges:
        G.add_edge((u, int(t * nb)), (v, int(t * nb)))
    na, nb_ = (a.x, int(a.t * nb)), (b.x, int(b.t * nb))
    return na in G and nb_ in G and nx.has_path(G, na, nb_)


def max_flow(g, a, b):
    gg = g.with_points([a, b])
    D = nx.DiGraph()
    D.add_nodes_from(range(len(gg.vsite)))
    for e in gg.edges:
        for x, y in ((e.a, e.b), (e.b, e.a)):
            c = D[x][y]["capacity"] + 1 if D.has_edge(x, y) else 1
            D.add_edge(x, y, capacity=c)
    return nx.maximum_flow_value(D, gg.vertex_of(a), gg.vertex_of(b))


def too_close(g, a, b, eps=2e-3):
    """Grid discretization is unreliable when a point sits next to a bridge or mark."""
    ts = [t for _, _, _, t in g.bridges] + list(g.inputs.cfg.mark_t)
    return any(min(abs(p.t - t), 1 - abs(p.t - t)) < eps for p in (a, b) for t in ts)


# -- explicit small cases


def two_site_cfg(times, marks=((), ())):
    m = make_model(1, 1)
    xi = BridgeConfig(m.bonds, (np.array(times, float),))
    mk = MarkConfig(tuple(np.array(t, float) for t in marks))
    empty = MarkConfig.empty(2)
    return merge(xi, mk, BridgeConfig.empty(m.bonds), empty), xi


def test_one_bridge_connects_everything():
    cfg, xi = two_site_cfg([0.3])
    g = build_graph(cfg, [None, None])
    assert g.connected(stp(0.1, 0), stp(0.8, 1))
    assert g.connected(stp(0.5, 0), stp(0.5, 0))


def test_no_bridges_cross_site_false():
    cfg, _ = two_site_cfg([])
    g = build_graph(cfg, [None, None])
    assert not g.connected(stp(0.1, 0), stp(0.1, 1))
    assert g.connected(stp(0.1, 0), stp(0.9, 0))


def test_single_bridge_is_pivotal_and_not_doubly():
    cfg, _ = two_site_cfg([0.3])
    g = build_graph(cfg, [None, None])
    a, b = stp(0.1, 0), stp(0.7, 1)
    assert g.connected(a, b) and not g.doubly_connected(a, b)
    piv = g.pivotal_bridges(a, b)
    assert len(piv) == 1 and piv[0][1] == stp(0.3, 0) and piv[0][2] == stp(0.3, 1)


def test_two_bridges_doubly_connected():
    cfg, _ = two_site_cfg([0.3, 0.6])
    g = build_graph(cfg, [None, None])
    a, b = stp(0.1, 0), stp(0.7, 1)
    assert g.doubly_connected(a, b)
    assert g.pivotal_bridges(a, b) == []
    assert g.doubly_connected(a, a)


def test_chain_of_bridges_in_order():
    m = make_model(1, 2)
    times = []
    for u, v in m.bonds:
        times.append(np.array([0.2]) if (u, v) == (0, 1) else np.array([0.5]) if (u, v) == (1, 2) else np.zeros(0))
    xi = BridgeConfig(m.bonds, tuple(times))
    g = q0_graph(xi, 4)
    piv = g.pivotal_bridges(stp(0.0, 0), stp(0.9, 2))
    assert [(p[1].x, p[2].x) for p in piv] == [(0, 1), (1, 2)]


def test_single_circle_pivotal_vertices_empty():
    cfg, _ = two_site_cfg([])
    g = build_graph(cfg, [None, None])
    a, b = stp(0.2, 0), stp(0.6, 0)
    assert g.pivotal_vertices(a, b) == []
    assert g.pivotal_vertices(a, a) == []


def test_cut_edges_multigraph():
    assert cut_edges(3, [(0, 1), (1, 2)]) == {0, 1}
    assert cut_edges(2, [(0, 1), (0, 1)]) == set()
    assert cut_edges(3, [(0, 1), (1, 2), (2, 0)]) == set()


def test_isolated_point_cluster_is_its_segment():
    cfg, _ = two_site_cfg([])
    g = build_graph(cfg, [None, None])
    c = g.cluster(stp(0.3, 1))
    assert c.is_full(1) and c.is_empty(0)


# -- randomized comparisons with independent searches


@settings(max_examples=40, deadline=None)
@given(SEEDS, st.booleans())
def test_connected_matches_grid_search(seed, arcs):
    g, a, b = random_graph(seed, arcs=arcs)
    if too_close(g, a, b):
        return
    assert g.connected(a, b) == grid_connected(g, a, b)


@settings(max_examples=40, deadline=None)
@given(SEEDS, st.booleans())
def test_doubly_connected_matches_max_flow(seed, arcs):
    g, a, b = random_graph(seed, arcs=arcs)
    if not g.connected(a, b):
        assert not g.doubly_connected(a, b)
        return
    assert g.doubly_connected(a, b) == (max_flow(g, a, b) >= 2)


@settings(max_examples=30, deadline=None)
@given(SEEDS)
def test_connected_through_definition(seed):
    g, a, b = random_graph(seed)
    C = Region.from_arcs([[(0.0, 0.5)], None, (), [(0.3, 0.9)]])
    expect = g.connected(a, b) and not g.connected(a, b, within=C.complement())
    assert g.connected_through(a, b, C) == expect


@settings(max_examples=30, deadline=None)
@given(SEEDS)
def test_cluster_after_bridge_removal_is_smaller(seed):
    g, a, b = random_graph(seed)
    C = g.cluster(a)
    for i, *_ in g.bridges:
        Cb = g.cluster_off_bridge(a, i)
        for z in range(4):
            assert Cb.measure(z) <= C.measure(z) + 1e-12


@settings(max_examples=30, deadline=None)
@given(SEEDS)
def test_pivotal_vertex_deletion_disconnects(seed):
    g, a, b = random_graph(seed)
    if not g.connected(a, b):
        return
    pv = g.pivotal_vertices(a, b)
    assert bool(pv) != g.doubly_connected(a, b)
    for v in pv:
        h = g.rebuild(points=[a, b], cut_points=[v])
        assert not h.connected(a, b)


@settings(max_examples=30, deadline=None)
@given(SEEDS)
def test_pivotal_bridges_iff_not_doubly_at_q0(seed):
    g, a, b = random_graph(seed, q=0.0)
    if not g.connected(a, b):
        return
    assert (g.pivotal_bridges(a, b) == []) == g.doubly_connected(a, b)


@settings(max_examples=25, deadline=None)
@given(SEEDS)
def test_pivotal_decomposition_at_q0(seed):
    g, a, b = random_graph(seed, q=0.0)
    lhs = int(g.connected(a, b)) - int(g.doubly_connected(a, b))
    assert piv_dec_terms(g, a, b) == lhs


@settings(max_examples=30, deadline=None)
@given(SEEDS)
def test_path_is_valid_when_connected(seed):
    g, a, b = random_graph(seed)
    path = g.find_path(a, b)
    assert (path is not None) == g.connected(a, b)


# -- backbone and lace


def _lace_instances(seed, n=6):
    m = make_model(1, 2, beta=0.9, q=0.0)
    rng = stream(seed, 0, "lace")
    o = stp(0.0, 0)
    out = []
    for _ in range(n):
        xi1, m1 = sample_config(m, None, rng)
        xi2, m2 = sample_config(m, None, rng)
        x = stp(float(rng.random()), int(rng.integers(1, 4)))
        tab = count_compatible((o, x), xi1, m1)
        if tab.total == 0:
            continue
        out.append((m, xi1, merge(xi1, m1, xi2, m2), tab, o, x))
    return out


@settings(max_examples=20, deadline=None)
@given(SEEDS)
def test_lace_exists_iff_doubly_connected(seed):
    for m, xi1, cfg, tab, o, x in _lace_instances(seed):
        g = build_graph(cfg, [None] * 4, None, None, points=[o, x])
        dc = g.doubly_connected(o, x)
        for psi1 in enumerate_trajectories(tab):
            S1 = backbone(xi1, psi1, o, x)
            lace = build_lace(S1, cfg)
            assert (lace.N >= 1) == dc
            if lace.N:
                assert lace.is_mutually_avoiding()


@settings(max_examples=20, deadline=None)
@given(SEEDS)
def test_backbone_lies_in_l_region(seed):
    for m, xi1, cfg, tab, o, x in _lace_instances(seed):
        for psi1 in enumerate_trajectories(tab):
            S1 = backbone(xi1, psi1, o, x)
            assert S1.pieces[0].site == o.x and S1.pieces[-1].site == x.x
            for pc in S1.pieces:
                mid = (pc.start + (pc.length / 2 if pc.forward else -pc.length / 2)) % 1.0
                assert psi1[pc.site].value(mid) == 1


def test_single_site_backbone():
    m = make_model(1, 0, beta=1.0)
    xi = BridgeConfig.empty(m.bonds)
    mk = MarkConfig.empty(1)
    o, x = stp(0.0, 0), stp(0.4, 0)
    tab = count_compatible((o, x), xi, mk)
    for psi in enumerate_trajectories(tab):
        S1 = backbone(xi, psi, o, x)
        assert len(S1.pieces) == 1
        assert S1.pieces[0].length == pytest.approx(0.4 if psi[0].value(0.2) == 1 else 0.6)


def test_backbone_rejects_equal_sources():
    m = make_model(1, 0)
    with pytest.raises(ValueError):
        backbone(BridgeConfig.empty(m.bonds), [None], stp(0.1, 0), stp(0.1, 0))


def test_no_lace_sentinel():
    assert NO_LACE.N == 0


# -- site-level graph


def test_site_graph_basics():
    m = make_model(1, 2)
    sg = SiteGraph(m.bonds, 4)
    one = tuple(1 for _ in range(4))
    assert sg.connected(one, 0, 2) and sg.doubly(one, 0, 2)
    chain = tuple(1 if (u, v) in ((0, 1), (1, 2)) else 0 for u, v in m.bonds)
    assert sg.connected(chain, 0, 2) and not sg.doubly(chain, 0, 2)
    assert len(sg.pivotal(chain, 0, 2)) == 2
    double = tuple(2 if (u, v) == (0, 1) else 0 for u, v in m.bonds)
    assert sg.doubly(double, 0, 1)

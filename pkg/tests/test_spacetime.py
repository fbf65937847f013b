import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tfising.model import make_model
from tfising.sampler import sample_config, stream
from tfising.spacetime import (
    BridgeConfig,
    CollisionError,
    MarkConfig,
    Region,
    count_compatible,
    enumerate_splittings,
    enumerate_trajectories,
    flip_times,
    merge,
    stp,
    sym_diff,
)


def empty(model):
    return BridgeConfig.empty(model.bonds), MarkConfig.empty(model.n_sites)


def test_point_time_wraps():
    assert stp(1.25, 0).t == pytest.approx(0.25)


def test_sym_diff_cancels_pairs():
    a, b = stp(0.1, 0), stp(0.2, 1)
    assert sym_diff(a, b, a) == (b,)
    assert sym_diff([a, b], [b]) == (a,)


def test_flip_times_basic():
    m = make_model(1, 1)
    xi, _ = empty(m)
    assert list(flip_times(0, (), xi)) == []
    assert list(flip_times(0, (stp(0, 0), stp(0.5, 0)), xi)) == [0.0, 0.5]
    xi = BridgeConfig(m.bonds, (np.array([0.3]),))
    assert list(flip_times(0, (), xi)) == [0.3]
    assert list(flip_times(1, (), xi)) == [0.3]


def test_flip_times_cancels_coinciding_source_and_bridge():
    m = make_model(1, 1)
    xi = BridgeConfig(m.bonds, (np.array([0.3]),))
    assert list(flip_times(0, (stp(0.3, 0),), xi)) == []


def test_count_empty_configuration():
    m = make_model(1, 1)
    xi, mk = empty(make_model(1, 1))
    mk3 = MarkConfig.empty(3)
    xi3 = BridgeConfig.empty(np.zeros((0, 2), int))
    assert count_compatible((), xi3, mk3).total == 8
    assert list(count_compatible((), xi3, mk3).counts) == [2, 2, 2]
    assert count_compatible((), xi, mk).total == 4


def test_mark_forces_value_r():
    xi3 = BridgeConfig.empty(np.zeros((0, 2), int))
    mk = MarkConfig((np.array([0.2]), np.zeros(0), np.zeros(0)))
    tab = count_compatible((), xi3, mk)
    assert tab.counts[0] == 1
    assert tab.total == 4
    (traj,) = tab.trajectories[0]
    assert traj.value(0.2) == 0


def test_odd_parity_gives_zero():
    xi3 = BridgeConfig.empty(np.zeros((0, 2), int))
    mk = MarkConfig.empty(3)
    assert count_compatible((stp(0.5, 1),), xi3, mk).total == 0


def test_collision_rejected():
    m = make_model(1, 2)
    with pytest.raises(CollisionError):
        BridgeConfig(m.bonds, (np.array([0.3]), np.array([0.3]), np.zeros(0), np.zeros(0)))


def test_merge_empty_and_singletons():
    m = make_model(1, 1)
    xi, mk = empty(m)
    assert merge(xi, mk, xi, mk).n_bridges == 0
    xa = BridgeConfig(m.bonds, (np.array([0.1]),))
    mb = MarkConfig((np.zeros(0), np.array([0.6])))
    cfg = merge(xa, mk, xi, mb)
    assert cfg.n_bridges == 1 and cfg.n_marks == 1
    assert list(cfg.bridge_label) == [1] and list(cfg.mark_label) == [2]


def test_merge_layer_roundtrip():
    m = make_model(1, 2, beta=1.0, q=0.5)
    rng = stream(3)
    xi1, m1 = sample_config(m, None, rng)
    xi2, m2 = sample_config(m, None, rng)
    cfg = merge(xi1, m1, xi2, m2)
    assert cfg.layer(1) == (xi1, m1)
    assert cfg.layer(2) == (xi2, m2)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_splitting_count(seed):
    m = make_model(1, 1, beta=0.7, q=0.4)
    rng = stream(seed)
    xi1, m1 = sample_config(m, None, rng)
    xi2, m2 = sample_config(m, None, rng)
    cfg = merge(xi1, m1, xi2, m2)
    region = Region.from_arcs([[(0.0, 0.5)], None])
    n_in = sum(region.contains(int(m.bonds[b][0]), t) and region.contains(int(m.bonds[b][1]), t)
               for b, t in zip(cfg.bridge_bond, cfg.bridge_t))
    n_in += sum(region.contains(int(z), t) for z, t in zip(cfg.mark_site, cfg.mark_t))
    splits = list(enumerate_splittings(cfg, region))
    assert len(splits) == 2**n_in


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_enumerated_trajectories_are_compatible(seed):
    """Every enumerated trajectory flips exactly at the flip times and equals R on marks."""
    m = make_model(1, 2, beta=0.6, q=0.4)
    rng = stream(seed)
    xi, mk = sample_config(m, None, rng)
    A = ()
    tab = count_compatible(A, xi, mk)
    n = 0
    for psi in enumerate_trajectories(tab):
        n += 1
        for z in range(m.n_sites):
            fl = flip_times(z, A, xi)
            for t in fl:
                assert psi[z].value(t - 1e-9) != psi[z].value(t + 1e-9)
            for t in mk.times[z]:
                assert psi[z].value(t) == 0
    assert n == tab.total


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 0.99), st.floats(0.005, 0.4)), min_size=1, max_size=3))
def test_region_complement_measures(arcs):
    pieces = []
    for a, length in arcs:
        pieces.append((a, (a + length) % 1.0))
    try:
        r = Region.from_arcs([pieces])
    except ValueError:
        return
    c = r.complement()
    assert r.measure(0) + c.measure(0) == pytest.approx(1.0)
    ends = np.array([e for a, b in pieces for e in (a, b)])
    for t in np.linspace(0, 1, 37, endpoint=False):
        if np.min(np.abs((t - ends + 0.5) % 1.0 - 0.5)) < 1e-9:
            continue
        assert r.contains(0, t) != c.contains(0, t)


def test_full_and_empty_regions():
    f, e = Region.full(2), Region.empty(2)
    assert f.contains(0, 0.3) and not e.contains(1, 0.3)
    assert f.measure(1) == 1.0 and e.measure(0) == 0.0

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tfising.analysis import (
    InequalityReport,
    InequalityRow,
    bubble,
    bubble_direct,
    check_AG_bounds,
    check_lemma_2_3,
    check_prop_2_2,
    finite_volume_chi_scan,
    fourier_G,
    infrared_report,
    is_increasing,
    oracle_fourier,
    oracle_summary,
    oracle_table,
    prop_2_2_lower_prefactor,
    random_tuples,
)
from tfising.estimators import KernelTable, uniform_grid
from tfising.model import make_model
from tfising.oracle import ExactOracle, single_site_bubble, two_site_chi_q0


@pytest.fixture(scope="module")
def ring():
    return make_model(1, 2, beta=0.4, q=0.3)


@pytest.fixture(scope="module")
def ring_fourier(ring):
    return oracle_fourier(ring, W=32)


def test_parseval_second_order(ring, ring_fourier):
    gaps = []
    for n_t in (64, 128):
        res = bubble(oracle_table(ring, n_t), ring_fourier, ring.n_sites)
        assert res.rel_gap <= 1e-4
        gaps.append(res.rel_gap)
    assert 3.0 <= gaps[0] / gaps[1] <= 5.0


def test_parseval_tail_is_small(ring, ring_fourier):
    res = bubble(oracle_table(ring, 64), ring_fourier, ring.n_sites)
    assert 0 < res.tail_bound < 1e-5


def test_zero_mode_is_chi(ring, ring_fourier):
    assert ring_fourier.at(0, 0).real == pytest.approx(ExactOracle(ring).chi(), abs=1e-10)
    assert abs(ring_fourier.at(0, 0).imag) < 1e-12


def test_hermitian_symmetry(ring, ring_fourier):
    assert ring_fourier.hermitian_defect() < 1e-12
    ft = fourier_G(oracle_table(ring, 32), ring, W=8)
    assert ft.hermitian_defect() < 1e-12


def test_constant_kernel_has_no_nonzero_frequencies():
    m = make_model(1, 2, beta=0.4, q=0.0)
    ts = uniform_grid(16)
    vals = np.tile(np.array([1.0, 0.5, 0.25, 0.5]), (16, 1))
    ft = fourier_G(KernelTable(ts, vals, np.zeros_like(vals)), m, W=4)
    nonzero = np.delete(ft.values, ft.W, axis=0)
    assert np.max(np.abs(nonzero)) < 1e-12


def test_two_site_zero_mode_closed_form():
    m = make_model(1, 1, beta=0.7, q=0.0)
    ft = fourier_G(oracle_table(m, 16), m, W=2)
    assert ft.at(0, 0).real == pytest.approx(two_site_chi_q0(0.7, 1.0), rel=1e-12)


def test_single_site_bubble():
    m = make_model(1, 0, beta=1.0, q=0.7)
    direct = bubble_direct(oracle_table(m, 512))
    assert direct == pytest.approx(single_site_bubble(1.0, 0.7), rel=1e-5)


def test_infrared_needs_field(ring_fourier):
    with pytest.raises(ValueError):
        infrared_report(ring_fourier, make_model(1, 2, beta=0.4, q=0.0))


def test_infrared_rows_are_diagnostic(ring, ring_fourier):
    rep = infrared_report(ring_fourier, ring)
    assert rep.n_asserted == 0 and rep.passed
    assert len(rep.rows) == ring_fourier.values.size - 1


# ---------------------------------------------------------------- derivative inequalities


GRID = [make_model(d, L, beta=b, q=q) for d, L in ((1, 1), (1, 2)) for b in (0.1, 0.3, 0.5) for q in (0.0, 0.3, 1.0)]


def test_lemma_rows_pass():
    rep = check_lemma_2_3(GRID)
    assert rep.passed, rep.failures()
    assert rep.n_asserted > 0


def test_lemma_transverse_at_q0():
    rep = check_lemma_2_3([make_model(1, 2, beta=0.3, q=0.0)])
    rows = {r.name: r for r in rep.rows}
    assert rows["transverse_upper"].asserted and rows["transverse_upper"].lhs == 0.0
    assert rows["transverse_lower"].asserted and rows["transverse_lower"].passed
    assert not rows["transverse_lower_single"].asserted


def test_prop_rows_pass():
    rep = check_prop_2_2(GRID)
    assert rep.passed, rep.failures()


def test_prop_lower_prefactor_sign():
    # With B / chi >= 1/2 on small tori the lower prefactor is negative, so that row is skipped.
    s = oracle_summary(make_model(1, 2, beta=0.2, q=0.05))
    assert s.B / s.chi >= 0.5
    assert prop_2_2_lower_prefactor(s) < 0
    rep = check_prop_2_2([make_model(1, 2, beta=0.2, q=0.05)])
    assert all(not r.asserted for r in rep.rows if r.name == "beta_lower")


def test_chain_rule_residual(ring):
    assert abs(oracle_summary(ring).chain_residual) < 1e-8


def test_AG_bounds_random(ring):
    tuples = random_tuples(ring, 3, np.random.default_rng(0))
    rep = check_AG_bounds(ring, tuples)
    assert rep.passed, rep.failures()
    assert rep.n_asserted == 12


def test_AG_bounds_coinciding_points_and_q0():
    m = make_model(1, 2, beta=0.4, q=0.0)
    tuples = [((0.2, 1), (0.2, 1), (0.5, 2), (0.7, 0)), ((0.0, 0), (0.3, 1), (0.3, 1), (0.9, 3))]
    assert check_AG_bounds(m, tuples).passed
    ring = make_model(1, 2, beta=0.4, q=0.3)
    assert check_AG_bounds(ring, tuples).passed


def test_inequality_row_slack():
    r = InequalityRow("x", {}, 1.0, 2.0, True, 0.0)
    assert r.slack == 1.0 and r.passed
    bad = InequalityRow("y", {}, 2.0, 1.0, True, 0.5)
    rep = InequalityReport()
    rep.add(r)
    rep.add(bad)
    assert not rep.passed and rep.failures() == [bad]
    diag = InequalityRow("z", {}, 2.0, 1.0, False, 0.0)
    rep2 = InequalityReport()
    rep2.add(diag)
    assert rep2.passed and rep2.n_asserted == 0


# ---------------------------------------------------------------- susceptibility scan


def test_chi_scan_increasing():
    scan = finite_volume_chi_scan(make_model(1, 2, q=0.1), np.linspace(0.1, 1.0, 10))
    assert is_increasing(scan)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 2.0))
def test_chi_scan_two_site_closed_form(beta):
    (b, chi), = finite_volume_chi_scan(make_model(1, 1, q=0.0), [beta])
    assert chi == pytest.approx(two_site_chi_q0(beta, 1.0), rel=1e-10)


def test_is_increasing_detects_plateau():
    assert not is_increasing([(0, 1.0), (1, 1.0)])
    assert is_increasing([(0, 1.0), (1, 2.0)])

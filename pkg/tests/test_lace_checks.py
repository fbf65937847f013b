import numpy as np
import pytest

from tfising.estimators import coupling_matrix_beta
from tfising.lace_checks import (
    first_nine_term,
    lace_size_report,
    nine_term_bound,
    recursion_residual,
)
from tfising.model import make_model
from tfising.oracle import BondStateOracle
from tfising.sampler import McEngine


@pytest.fixture(scope="module")
def ring0():
    return make_model(1, 2, beta=0.4, q=0.0)


def test_exact_recursion_bounds(ring0):
    """The truncated recursions bracket G exactly on the bond-state oracle."""
    bso = BondStateOracle(ring0)
    G, P0, P1, K = bso.G_matrix(), bso.pi0_matrix(), bso.pi1_matrix(), bso.coupling_matrix()
    R0 = -(G - P0 - P0 @ K @ G)
    assert np.all(R0 >= -1e-12)
    assert np.all(R0 <= P0 @ K @ G + 1e-12)
    R1 = G - (P0 - P1) - (P0 - P1) @ K @ G
    assert np.all(R1 >= -1e-12)
    assert np.all(R1 <= P1 @ K @ G + 1e-12)


def test_exact_coefficients_nonnegative(ring0):
    bso = BondStateOracle(ring0)
    P0, P1 = bso.pi0_matrix(), bso.pi1_matrix()
    assert np.all(P0 >= 0) and np.all(P1 >= -1e-15)
    assert np.allclose(np.diag(P0), 1.0)


@pytest.mark.parametrize("j", [0, 1])
@pytest.mark.parametrize("L", [1, 2])
def test_recursion_residual_mc(j, L):
    m = make_model(1, L, beta=0.4, q=0.0)
    rep = recursion_residual(j, m, McEngine(11, 16, 1500), n_inner=16)
    assert rep.passed, rep.max_violation
    assert len(list(rep.rows())) == m.n_sites
    assert rep.G[0] == pytest.approx(1.0)


def test_recursion_rejects_bad_input(ring0):
    with pytest.raises(ValueError):
        recursion_residual(2, ring0, McEngine(0, 4, 10))
    with pytest.raises(ValueError):
        recursion_residual(0, make_model(1, 2, q=0.2), McEngine(0, 4, 10))


def test_nine_term_contains_first_term(ring0):
    bso = BondStateOracle(ring0)
    G, K = bso.G_matrix(), coupling_matrix_beta(ring0)
    for x in range(4):
        first = first_nine_term(G, K, 0, x)
        total = nine_term_bound(G, K, 0, x)
        assert 0 < first <= total


def test_nine_term_single_bond_closed_form():
    # Two sites, G = [[1, g], [g, 1]], K = [[0, k], [k, 0]]: leading term summed by hand.
    g, k = 0.3, 0.2
    G = np.array([[1, g], [g, 1]])
    K = np.array([[0, k], [k, 0]])
    KG = K @ G
    want = sum(
        G[0, z] ** 2 * G[y, 1] ** 2 * G[0, y] * KG[y, z] * KG[z, 1] for z in range(2) for y in range(2)
    )
    assert first_nine_term(G, K, 0, 1) == pytest.approx(want)


def test_lace_size_report_partition_and_bounds(ring0):
    pairs = [((0.0, 0), (0.0, x)) for x in (1, 2)] + [((0.0, 0), (0.5, 0))]
    rep = lace_size_report(ring0, pairs, McEngine(12, 16, 2000))
    assert rep.partition_ok
    assert all(r.passed for r in rep.rows_N1 + rep.rows_N2)
    assert all(r.lhs >= 0 for r in rep.rows_N1 + rep.rows_N2)


def test_lace_size_report_requires_origin(ring0):
    with pytest.raises(ValueError):
        lace_size_report(ring0, [((0.0, 1), (0.0, 2))], McEngine(0, 4, 10))

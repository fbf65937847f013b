"""Acceptance criteria; each test records one PASS/FAIL line shown in the terminal summary."""

import contextlib
import time
from pathlib import Path

import numpy as np
import pytest

from tfising.cli import COMMANDS, HANDLERS, load_config, run
from tfising.estimators import (
    estimate_chi,
    estimate_F3,
    estimate_F4,
    estimate_G,
    estimate_one_point_S1,
)
from tfising.model import make_model
from tfising.oracle import ExactOracle, single_site_G
from tfising.sampler import McEngine
from tfising.spacetime import stp

K = 4.0


@contextlib.contextmanager
def criterion(log, tag, title, limit=None):
    t0 = time.perf_counter()
    info = {}
    try:
        yield info
        dt = time.perf_counter() - t0
        if limit is not None:
            assert dt < limit, "runtime %.1f s over the %.0f s limit" % (dt, limit)
        detail = " ".join("%s=%s" % kv for kv in info.items())
        log.append("%s PASS %s [%.1f s] %s" % (tag, title, dt, detail))
    except BaseException as e:
        log.append("%s FAIL %s: %s" % (tag, title, str(e).splitlines()[0] if str(e) else type(e).__name__))
        raise


@pytest.fixture(scope="module")
def cli_runs(tmp_path_factory):
    """One run of every command with its bundled config, with per-command wall times."""
    root = tmp_path_factory.mktemp("first")
    out = {}
    for c in COMMANDS:
        t0 = time.perf_counter()
        rep = run(c, load_config(c, None, None, None), root / c)
        out[c] = (rep, time.perf_counter() - t0, root / c)
    return out


def _within(est, exact):
    return abs(est.mean - exact) <= K * est.std_error + 1e-12


def test_c01_single_site(acceptance_log):
    with criterion(acceptance_log, "C1", "single-site two-point function", 30) as info:
        m = make_model(1, 0, beta=1.0, q=0.7)
        eng = McEngine(101, 20, 50_000)
        assert eng.n == 10**6
        worst = 0.0
        for t in (0.0, 0.1, 0.25, 0.5):
            e = estimate_G(m, stp(0, 0), stp(t, 0), eng)
            exact = float(single_site_G(t, 1.0, 0.7))
            assert abs(exact - ExactOracle(m).G((0, 0), (t, 0))) <= 1e-12
            assert e.std_error <= 2e-3
            assert _within(e, exact), (t, e.mean, exact, e.std_error)
            worst = max(worst, e.std_error)
        info["max_sigma"] = "%.2e" % worst


def test_c02_two_site_classical(acceptance_log):
    with criterion(acceptance_log, "C2", "classical two-site system", 30):
        m = make_model(1, 1, beta=0.5, q=0.0)
        eng = McEngine(102, 16, 20_000)
        assert _within(estimate_G(m, stp(0, 0), stp(0.3, 1), eng), np.tanh(0.5))
        assert _within(estimate_chi(m, eng, 16), 1 + np.tanh(0.5))


def test_c03_oracle_equivalence(acceptance_log):
    with criterion(acceptance_log, "C3", "ring estimators against dense oracle", 600) as info:
        m = make_model(1, 2, beta=0.4, q=0.3)
        orc = ExactOracle(m)
        eng = McEngine(103, 16, 4000)
        n = 0
        for t in (0.0, 0.25, 0.5):
            for x in range(4):
                assert _within(estimate_G(m, stp(0, 0), stp(t, x), eng), orc.G((0, 0), (t, x))), (t, x)
                n += 1
        assert _within(estimate_chi(m, eng, 16), orc.chi())
        assert _within(estimate_one_point_S1(m, stp(0.3, 1), eng), orc.one_point_S1(1))
        w, x, y, z = (0.1, 0), (0.4, 1), (0.7, 2), (0.2, 1)
        assert _within(estimate_F3(m, w, x, y, eng), orc.F3(w, x, y))
        assert _within(estimate_F4(m, w, x, y, z, eng), orc.F4(w, x, y, z))
        info["checks"] = n + 4


def test_c04_switching(acceptance_log, cli_runs):
    with criterion(acceptance_log, "C4", "source switching identity and involution") as info:
        rep, dt, _ = cli_runs["check-switching"]
        s = rep.summary
        assert dt < 300, dt
        assert rep.passed
        assert s["n_configs"] == 1000 and s["n_skipped"] == 0 and s["max_rel_diff"] <= 1e-12
        assert s["n_pairs"] == 10_000 and s["involution_failures"] == 0
        regions = {r["region"] for r in rep.rows if r["kind"] == "identity"}
        assert {"full", "site0_removed", "arcs"} <= regions
        info.update(nonzero=s["n_nonzero"], runtime="%.0fs" % dt)


def test_c05_mecke(acceptance_log, cli_runs):
    with criterion(acceptance_log, "C5", "Mecke equation") as info:
        rep, _, _ = cli_runs["check-mecke"]
        assert rep.summary["n_samples"] >= 10**5
        assert len(rep.rows) >= 3 and rep.passed
        info["max_abs_z"] = "%.2f" % max(abs(r["z_score"]) for r in rep.rows)


def test_c06_wilcox(acceptance_log, cli_runs):
    with criterion(acceptance_log, "C6", "exponential derivative identity") as info:
        rep, _, _ = cli_runs["check-diffineq"]
        rows = [r for r in rep.rows if r["section"] == "wilcox"]
        assert len(rows) == 20 and all(r["passed"] for r in rows)
        info["max_rel_error"] = "%.1e" % rep.summary["wilcox_max_rel_error"]


def test_c07_derivatives(acceptance_log, cli_runs):
    with criterion(acceptance_log, "C7", "susceptibility derivatives and signs") as info:
        rep, _, _ = cli_runs["check-diffineq"]
        der = [r for r in rep.rows if r["section"] == "derivatives"]
        assert der and all(r["passed"] and r["asserted"] for r in der)
        signs = [r for r in rep.rows if r["section"] == "signs"]
        assert len({(r["beta"], r["q"]) for r in signs}) == 25 and all(r["passed"] for r in signs)
        assert rep.summary["chain_rule_residual"] <= 1e-8
        info["chain_residual"] = "%.1e" % rep.summary["chain_rule_residual"]


def test_c08_derivative_inequalities(acceptance_log, cli_runs):
    with criterion(acceptance_log, "C8", "derivative inequalities on the (beta, q) grid") as info:
        rep, _, _ = cli_runs["check-diffineq"]
        rows = [r for r in rep.rows if r["section"] in ("lemma_derivatives", "beta_derivative")]
        points = {(r["beta"], r["q"]) for r in rows}
        assert len(points) == 15
        for r in rows:
            if r["name"].endswith("upper"):
                assert r["asserted"], r
            if r["asserted"]:
                assert r["slack"] >= -1e-6, r
        info["min_slack"] = "%.2e" % min(rep.summary["lemma_min_slack"], rep.summary["beta_min_slack"])
        info["beta_lower_asserted"] = rep.summary["beta_lower_asserted"]


def test_c09_correlation_bounds(acceptance_log, cli_runs):
    with criterion(acceptance_log, "C9", "four- and three-point bounds") as info:
        rep, _, _ = cli_runs["check-diffineq"]
        rows = [r for r in rep.rows if r["section"] == "correlation_bounds"]
        assert len({r["index"] for r in rows}) == 50
        assert all(r["slack"] >= -1e-6 for r in rows)
        info["min_slack"] = "%.2e" % rep.summary["correlation_min_slack"]


def test_c10_lace_recursion(acceptance_log, cli_runs):
    with criterion(acceptance_log, "C10", "lace recursion remainders") as info:
        rep, dt, _ = cli_runs["check-lace"]
        assert dt < 1200
        runs = rep.summary["runs"]
        assert {(r["L"], r["j"]) for r in runs} == {(1, 0), (1, 1), (2, 0), (2, 1)}
        assert all(r["beta"] <= 0.5 for r in runs)
        assert rep.passed and all(r["passed"] for r in runs)
        info["worst_sigma"] = "%.2f" % max(r["max_violation_sigma"] for r in runs)


def test_c11_first_diagram(acceptance_log, cli_runs):
    with criterion(acceptance_log, "C11", "N = 1 bound and lace-size partition") as info:
        rep, _, _ = cli_runs["check-diagrams"]
        rows = [r for r in rep.rows if r["N"] == 1]
        assert len(rows) == 10 and all(r["passed"] for r in rows)
        assert rep.summary["partition_ok"]
        info["pairs"] = len(rows)


def test_c12_nine_term(acceptance_log, cli_runs):
    with criterion(acceptance_log, "C12", "N = 2 nine-term bound") as info:
        rep, _, _ = cli_runs["check-diagrams"]
        cfg = load_config("check-diagrams", None, None, None)
        assert cfg.model["beta"] * cfg.model["J"] == pytest.approx(0.3) and cfg.model["L"] == 2
        rows = [r for r in rep.rows if r["N"] == 2]
        assert rows and all(r["slack"] >= -K * r["slack_se"] for r in rows)
        info["min_slack"] = "%.2e" % min(r["slack"] for r in rows)


def test_c13_spectral(acceptance_log, cli_runs):
    with criterion(acceptance_log, "C13", "Parseval, zero mode and infrared table") as info:
        rep, _, _ = cli_runs["check-infrared"]
        s = rep.summary
        assert s["gaps"][0] <= 1e-3 and 3.0 <= s["gap_ratio"] <= 5.0
        assert s["zero_mode_rel_error"] <= 1e-6
        ir = [r for r in rep.rows if r["kind"] == "infrared"]
        assert ir and not any(r["asserted"] for r in ir)
        assert rep.passed
        info.update(gap64="%.2e" % s["gaps"][0], ratio="%.2f" % s["gap_ratio"])


def test_c14_determinism(acceptance_log, cli_runs, tmp_path):
    with criterion(acceptance_log, "C14", "byte-identical reruns") as info:
        assert set(cli_runs) == set(COMMANDS) == set(HANDLERS)
        for c in COMMANDS:
            first = cli_runs[c][2]
            run(c, load_config(c, None, None, None), tmp_path / c)
            for f in ("report.csv", "summary.json"):
                assert (first / f).read_bytes() == (tmp_path / c / f).read_bytes(), (c, f)
            assert cli_runs[c][0].passed, c
        info["commands"] = len(COMMANDS)

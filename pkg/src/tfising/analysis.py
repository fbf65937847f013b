"""Fourier transforms, the bubble diagram, the infrared diagnostic and the derivative inequalities."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimators import KernelTable, uniform_grid
from .model import Model
from .oracle import (
    GL_NODES,
    S1,
    S3,
    ExactOracle,
    exact_derivatives,
    fd_dchi_dbeta,
    piecewise_nodes,
)

DEFAULT_W = 32
ORACLE_TOL = 1e-6
CHAIN_TOL = 1e-8


# ---------------------------------------------------------------- Fourier side


@dataclass(frozen=True)
class FourierTable:
    """G-hat(omega, k) for omega = 2 pi m, m = -W..W, and k on the dual grid."""

    ms: np.ndarray
    ks: np.ndarray
    values: np.ndarray  # (2W+1, n_k) complex
    n_t: int | None
    source: str

    @property
    def omegas(self) -> np.ndarray:
        return 2 * np.pi * self.ms

    @property
    def W(self) -> int:
        return int(self.ms.max())

    def at(self, m: int, k_index: int) -> complex:
        return complex(self.values[int(m) + self.W, k_index])

    def hermitian_defect(self) -> float:
        """max |G-hat(-omega, -k) - conj(G-hat(omega, k))| using the k -> -k map of the dual grid."""
        neg = _negate_index(self.ks)
        flipped = self.values[::-1][:, neg]
        return float(np.max(np.abs(flipped - np.conj(self.values))))


def _negate_index(ks: np.ndarray) -> np.ndarray:
    out = []
    for k in ks:
        target = np.mod(-k + np.pi, 2 * np.pi) - np.pi
        d = np.abs(np.mod(ks - target + np.pi, 2 * np.pi) - np.pi).sum(axis=1)
        out.append(int(np.argmin(d)))
    return np.array(out)


def _displacements(model: Model) -> np.ndarray:
    lat = model.lattice
    return np.array([lat.displacement(0, x) for x in range(model.n_sites)], dtype=float).reshape(model.n_sites, -1)


def dual_grid(model: Model) -> np.ndarray:
    return np.atleast_2d(model.lattice.dual_grid()).reshape(-1, _displacements(model).shape[1])


def fourier_G(table: KernelTable, model: Model, W: int = DEFAULT_W) -> FourierTable:
    """Exact spatial transform and periodic trapezoid rule in time."""
    ms = np.arange(-W, W + 1)
    ks = dual_grid(model)
    phase_x = np.exp(1j * _displacements(model) @ ks.T)  # (n, n_k)
    phase_t = np.exp(1j * 2 * np.pi * np.outer(ms, table.ts))  # (2W+1, n_t)
    vals = phase_t @ table.values @ phase_x / table.n_t
    return FourierTable(ms, ks, vals, table.n_t, table.source)


def oracle_fourier(model: Model, W: int = DEFAULT_W, orc: ExactOracle | None = None) -> FourierTable:
    orc = ExactOracle(model) if orc is None else orc
    ms = np.arange(-W, W + 1)
    ks = dual_grid(model)
    vals = orc.fourier(2 * np.pi * ms, ks)
    return FourierTable(ms, ks, vals, None, "oracle-exact")


def oracle_table(model: Model, n_t: int, orc: ExactOracle | None = None) -> KernelTable:
    orc = ExactOracle(model) if orc is None else orc
    ts = uniform_grid(n_t)
    vals = orc.G_table(ts)
    return KernelTable(ts, vals, np.zeros_like(vals), "oracle")


@dataclass(frozen=True)
class BubbleResult:
    direct: float
    parseval: float
    tail_bound: float

    @property
    def rel_gap(self) -> float:
        return abs(self.direct - self.parseval) / abs(self.direct)


def bubble_direct(table: KernelTable) -> float:
    """Periodic trapezoid rule for int dt sum_x G^2."""
    return float(np.sum(table.values**2) / table.n_t)


def bubble_parseval(ft: FourierTable, n_sites: int) -> tuple[float, float]:
    """(1/|Lambda|) sum over omega, k of |G-hat|^2, and a bound on the omitted |omega| > 2 pi W tail.

    The tail uses the omega^-2 envelope fitted at the largest retained frequency.
    """
    total = float(np.sum(np.abs(ft.values) ** 2) / n_sites)
    W = ft.W
    if W == 0:
        return total, float("inf")
    edge = np.maximum(np.abs(ft.values[0]), np.abs(ft.values[-1]))
    C = edge * (2 * np.pi * W) ** 2
    tail_m = 1.0 / (3 * (2 * np.pi) ** 4 * W**3)  # bounds sum_{m > W} (2 pi m)^-4
    tail = float(2 * np.sum(C**2) * tail_m / n_sites)
    return total, tail


def bubble(table: KernelTable, ft: FourierTable, n_sites: int) -> BubbleResult:
    p, tail = bubble_parseval(ft, n_sites)
    return BubbleResult(bubble_direct(table), p, tail)


# ---------------------------------------------------------------- inequality reports


@dataclass
class InequalityRow:
    name: str
    params: dict
    lhs: float
    rhs: float
    asserted: bool
    tol: float = ORACLE_TOL
    std_error: float = 0.0

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.slack >= -max(self.tol, 4 * self.std_error)

    def as_dict(self) -> dict:
        d = {"name": self.name}
        d.update(self.params)
        d.update({"lhs": self.lhs, "rhs": self.rhs, "slack": self.slack, "std_error": self.std_error,
                  "asserted": self.asserted, "passed": self.passed})
        return d


@dataclass
class InequalityReport:
    rows: list = field(default_factory=list)

    def add(self, row: InequalityRow) -> None:
        self.rows.append(row)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows if r.asserted)

    @property
    def n_asserted(self) -> int:
        return sum(r.asserted for r in self.rows)

    def failures(self) -> list:
        return [r for r in self.rows if r.asserted and not r.passed]

    def min_slack(self) -> float:
        s = [r.slack for r in self.rows if r.asserted]
        return min(s) if s else float("inf")


def infrared_report(ft: FourierTable, model: Model) -> InequalityReport:
    """|G-hat| against 48 / (c_q omega^2 + J sum_j (1 - cos k_j)) with c_q = 1/(2q); diagnostic only."""
    if model.q <= 0:
        raise ValueError("the infrared diagnostic needs q > 0")
    c_q = 1.0 / (2 * model.q)
    J = float(np.max(model.J)) if model.n_bonds else 0.0
    rep = InequalityReport()
    for i, m in enumerate(ft.ms):
        om = 2 * np.pi * m
        for kk, k in enumerate(ft.ks):
            if m == 0 and np.allclose(k, 0):
                continue
            den = c_q * om**2 + J * np.sum(1 - np.cos(k))
            rhs = 48.0 / den if den > 0 else float("inf")
            rep.add(InequalityRow("infrared", {"omega": float(om), "k": " ".join("%.17g" % v for v in k)},
                                  float(abs(ft.values[i, kk])), rhs, asserted=False))
    return rep


@dataclass(frozen=True)
class OracleSummary:
    """Oracle inputs of the derivative inequalities at one parameter point."""

    beta: float
    q: float
    chi: float
    B: float
    J_hat0: float
    sum_J_dchi_dJ: float  # sum_b J_b d chi / d J_b
    minus_dchi_dq: float
    dchi_dbeta: float
    chain_residual: float


def oracle_summary(model: Model, bubble_nodes: int = 64) -> OracleSummary:
    orc = ExactOracle(model)
    der = exact_derivatives(model)
    sJ = float(np.sum(model.J * der.dJ_formula))
    return OracleSummary(
        model.beta, model.q, orc.chi(), orc.bubble(bubble_nodes), model.J_hat0, sJ,
        -der.dq_formula, fd_dchi_dbeta(model), der.chain_rule_residual(model),
    )


def check_lemma_2_3(models) -> InequalityReport:
    """Coupling and transverse-field derivative sandwiches with oracle values.

    The bond sums in the correlation-inequality bounds run over ordered pairs
    (u, v), so the term B sum_b J_b d chi / d J_b enters the lower bounds with a
    factor 2.  The single-count form is reported as a diagnostic row.  At q = 0
    the field derivative vanishes and the transverse-field chain holds trivially.
    """
    rep = InequalityReport()
    for model in models:
        s = oracle_summary(model)
        p = {"beta": s.beta, "q": s.q}
        Jh, chi, B, beta, q = s.J_hat0, s.chi, s.B, s.beta, s.q
        mid_J = s.sum_J_dchi_dJ / beta
        base_J = Jh * chi**2 - 2 * Jh * B * chi - 4 * q * Jh * B * s.minus_dchi_dq
        rep.add(InequalityRow("coupling_upper", p, mid_J, Jh * chi**2, True))
        rep.add(InequalityRow("coupling_lower", p, base_J - 2 * Jh * B * s.sum_J_dchi_dJ, mid_J, True))
        rep.add(InequalityRow("coupling_lower_single", p, base_J - Jh * B * s.sum_J_dchi_dJ, mid_J, False))
        mid_q = s.minus_dchi_dq / beta
        base_q = 2 * chi**2 - 2 * B * chi - 4 * B * s.minus_dchi_dq
        rep.add(InequalityRow("transverse_upper", p, mid_q, 2 * chi**2, True))
        rep.add(InequalityRow("transverse_lower", p, base_q - 2 * B * s.sum_J_dchi_dJ, mid_q, True))
        rep.add(InequalityRow("transverse_lower_single", p, base_q - B * s.sum_J_dchi_dJ, mid_q, False))
        rep.add(InequalityRow("dchi_dJ_sign", p, 0.0, s.sum_J_dchi_dJ, True))
        rep.add(InequalityRow("dchi_dq_sign", p, 0.0, s.minus_dchi_dq, True))
    return rep


def prop_2_2_lower_prefactor(s: OracleSummary) -> float:
    return 1 - 2 * s.B / s.chi - 2 * s.q * (1 + 5 * s.beta * s.J_hat0 * s.B) / s.J_hat0


def check_prop_2_2(models) -> InequalityReport:
    """d chi / d beta between the lower and upper bounds; the lower bound only where its prefactor is positive."""
    rep = InequalityReport()
    for model in models:
        s = oracle_summary(model)
        p = {"beta": s.beta, "q": s.q}
        Jh, chi, B = s.J_hat0, s.chi, s.B
        pref = prop_2_2_lower_prefactor(s)
        lower = Jh * chi**2 * pref / (1 + s.beta * Jh * B)
        rep.add(InequalityRow("beta_upper", p, s.dchi_dbeta, Jh * chi**2, True))
        rep.add(InequalityRow("beta_lower", dict(p, prefactor=pref), lower, s.dchi_dbeta, pref > 0))
        rep.add(InequalityRow("chain_rule", p, abs(s.chain_residual), 0.0, True, tol=CHAIN_TOL))
    return rep


# ---------------------------------------------------------------- correlation-inequality bounds


def _ordered_bonds(model: Model):
    for (u, v), J in zip(model.bonds, model.J):
        yield int(u), int(v), float(J)
        yield int(v), int(u), float(J)


def _s_integral(orc: ExactOracle, fixed_times, integrand) -> float:
    """int_0^1 ds integrand(s_nodes) with Gauss-Legendre pieces split at the fixed times."""
    s, w = piecewise_nodes(fixed_times, GL_NODES)
    return float(np.dot(w, integrand(s)))


def _G_scan(orc: ExactOracle, y, site: int, s_nodes) -> np.ndarray:
    return orc.correlator_scan([S3(y[1], y[0])], [("S3", site)], s_nodes)


def AG_bounds(orc: ExactOracle, w, x, y, z):
    """(F4, lower bound of F4, F3 at (w, x, y), upper bound of F3) for points given as (t, site)."""
    model = orc.model
    beta, q = model.beta, model.q
    wx = [S3(w[1], w[0]), S3(x[1], x[0])]
    Gwx = orc.G(w, x)
    times = [w[0], x[0], y[0], z[0]]

    def trunc_pair(u, v, s):
        four = orc.correlator_scan(wx, [("S3", u), ("S3", v)], s)
        two = orc.correlator_scan([], [("S3", u), ("S3", v)], s)
        return four - Gwx * two

    def trunc_S1(v, s):
        three = orc.correlator_scan(wx, [("S1", v)], s)
        return three - Gwx * orc.one_point_S1(v)

    F4 = orc.F4(w, x, y, z)
    lo = -orc.G(w, x) * orc.G(w, y) * orc.G(w, z) - orc.G(x, w) * orc.G(x, y) * orc.G(x, z)
    for u, v, J in _ordered_bonds(model):
        lo -= beta * J * _s_integral(
            orc, times, lambda s: _G_scan(orc, y, v, s) * _G_scan(orc, z, v, s) * trunc_pair(u, v, s)
        )
    if q != 0:
        for v in range(model.n_sites):
            lo += 4 * beta * q * _s_integral(
                orc, times, lambda s: _G_scan(orc, y, v, s) * _G_scan(orc, z, v, s) * trunc_S1(v, s)
            )

    F3 = orc.F3(w, x, y)
    hi = orc.G(w, y) ** 2 * orc.G(w, x) + orc.G(x, y) ** 2 * orc.G(x, w)
    for u, v, J in _ordered_bonds(model):
        hi += beta * J * _s_integral(orc, times, lambda s: _G_scan(orc, y, v, s) ** 2 * trunc_pair(u, v, s))
    if q != 0:
        for v in range(model.n_sites):
            hi -= 4 * beta * q * _s_integral(orc, times, lambda s: _G_scan(orc, y, v, s) ** 2 * trunc_S1(v, s))
    return F4, lo, F3, hi


def check_AG_bounds(model: Model, tuples, orc: ExactOracle | None = None, tol: float = ORACLE_TOL) -> InequalityReport:
    """Both chains 0 >= F4 >= lower and 0 <= F3 <= upper at each argument tuple (w, x, y, z)."""
    orc = ExactOracle(model) if orc is None else orc
    rep = InequalityReport()
    for i, (w, x, y, z) in enumerate(tuples):
        F4, lo, F3, hi = AG_bounds(orc, w, x, y, z)
        p = {"tuple": i}
        rep.add(InequalityRow("F4_upper", p, F4, 0.0, True, tol))
        rep.add(InequalityRow("F4_lower", p, lo, F4, True, tol))
        rep.add(InequalityRow("F3_lower", p, 0.0, F3, True, tol))
        rep.add(InequalityRow("F3_upper", p, F3, hi, True, tol))
    return rep


def random_tuples(model: Model, n: int, rng) -> list:
    out = []
    for _ in range(n):
        out.append(tuple((float(rng.random()), int(rng.integers(model.n_sites))) for _ in range(4)))
    return out


# ---------------------------------------------------------------- susceptibility scan


def finite_volume_chi_scan(model: Model, betas) -> list[tuple[float, float]]:
    return [(float(b), ExactOracle(model.with_params(beta=float(b))).chi()) for b in betas]


def is_increasing(series) -> bool:
    vals = [v for _, v in series]
    return all(b > a for a, b in zip(vals, vals[1:]))

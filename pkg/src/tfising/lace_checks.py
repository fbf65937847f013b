"""Checks of the q = 0 lace expansion: recursion remainders, the N = 1 and N = 2 diagram bounds.

At q = 0 the two-point function and the coefficients do not depend on the time
coordinates, so the time integrals in the convolutions are exact and every
kernel reduces to a translation-invariant function of the site difference.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimators import (
    LaceTally,
    _p,
    circulant,
    coupling_matrix_beta,
    lace_tally,
    pi1_replicas,
    q0_replicas,
)
from .model import Model
from .sampler import McEngine, jackknife

K_SIGMA = 4.0


@dataclass
class RecursionReport:
    j: int
    G: np.ndarray
    pi_le_j: np.ndarray
    conv: np.ndarray
    R: np.ndarray
    R_se: np.ndarray
    bound: np.ndarray
    gap: np.ndarray  # bound - R
    gap_se: np.ndarray
    pi: dict = field(default_factory=dict)

    @property
    def lower_ok(self) -> np.ndarray:
        return self.R >= -K_SIGMA * self.R_se - 1e-12

    @property
    def upper_ok(self) -> np.ndarray:
        return self.gap >= -K_SIGMA * self.gap_se - 1e-12

    @property
    def passed(self) -> bool:
        return bool(np.all(self.lower_ok) and np.all(self.upper_ok))

    @property
    def max_violation(self) -> float:
        """Largest shortfall in units of sigma (0 when every entry passes)."""
        worst = 0.0
        for v, s in ((self.R, self.R_se), (self.gap, self.gap_se)):
            z = -v / np.maximum(s, 1e-300)
            worst = max(worst, float(np.max(np.where(v < 0, z, 0.0))))
        return worst

    def rows(self):
        for x in range(len(self.G)):
            yield {
                "j": self.j, "x": x, "G": self.G[x], "pi_le_j": self.pi_le_j[x], "conv": self.conv[x],
                "R": self.R[x], "R_se": self.R_se[x], "bound": self.bound[x],
                "gap": self.gap[x], "gap_se": self.gap_se[x],
                "lower_ok": bool(self.lower_ok[x]), "upper_ok": bool(self.upper_ok[x]),
            }


def _recursion_columns(model: Model, j: int, engine: McEngine, n_inner: int):
    n = model.n_sites
    q0 = q0_replicas(model, engine, 0)
    if j == 0:
        return q0.values, None
    p1, _ = pi1_replicas(model, engine, 0, n_inner)
    return np.hstack([q0.values, p1.values]), 2 * n + 2


def recursion_residual(j: int, model: Model, engine: McEngine, n_inner: int = 64) -> RecursionReport:
    """Remainder of the j-th truncated recursion for G(o, x) with o = 0, for every site x."""
    if j not in (0, 1):
        raise ValueError("recursion checks are provided for j in {0, 1}")
    if model.q != 0:
        raise ValueError("the lace expansion is checked at q = 0")
    n = model.n_sites
    K = coupling_matrix_beta(model)
    cols, off1 = _recursion_columns(model, j, engine, n_inner)
    sign = (-1) ** (j + 1)

    def pieces(m):
        G = m[:n] / m[2 * n]
        pi0 = m[n:2 * n] / m[2 * n + 1]
        pi0[0] = 1.0
        pij = pi0 if j == 0 else m[off1:off1 + n]
        ple = pi0 if j == 0 else pi0 - pij
        conv = (circulant(model, ple) @ K @ circulant(model, G))[0]
        bound = (circulant(model, pij) @ K @ circulant(model, G))[0]
        R = sign * (G - ple - conv)
        return G, pi0, pij, ple, conv, bound, R

    def flat(m):
        G, pi0, pij, ple, conv, bound, R = pieces(m)
        return np.concatenate([G, pi0, pij, ple, conv, bound, R, bound - R])

    val, se = jackknife(cols, flat)
    v = val.reshape(8, n)
    s = se.reshape(8, n)
    return RecursionReport(
        j, v[0], v[3], v[4], v[6], s[6], v[5], v[7], s[7], pi={"pi0": v[1], "pi%d" % j: v[2], "pi0_se": s[1], "pi%d_se" % j: s[2]},
    )


# ---------------------------------------------------------------- lace-size diagrams


def nine_term_bound(G: np.ndarray, K: np.ndarray, o: int, x: int) -> float:
    """Bound on the N = 2 coefficient from site matrices G and K = beta J at q = 0.

    Each lace endpoint is either a bridge endpoint of the backbone (a factor
    beta J * G replaces a G) or an interior point of a backbone interval; the
    two endpoints z1 and y2 give 3 x 3 embeddings, collected in four blocks.
    """
    KG, GK, KGK = K @ G, G @ K, K @ G @ K
    total = 0.0
    n = len(G)
    for z1 in range(n):
        for y2 in range(n):
            bb = G[o, z1] ** 2 * G[y2, x] ** 2 * (
                G[o, y2] * KG[y2, z1] * KG[z1, x]
                + G[o, y2] * KGK[y2, z1] * G[z1, x]
                + GK[o, y2] * G[y2, z1] * KG[z1, x]
                + GK[o, y2] * GK[y2, z1] * G[z1, x]
            )
            ib = GK[o, z1] * G[o, z1] * G[y2, x] ** 2 * (
                G[o, y2] * KG[y2, z1] + GK[o, y2] * G[y2, z1]
            ) * G[z1, x]
            bi = G[o, z1] ** 2 * G[y2, x] * KG[y2, x] * (
                G[z1, x] * GK[y2, z1] + KG[z1, x] * G[y2, z1]
            ) * G[o, y2]
            ii = GK[o, z1] * G[o, z1] * G[y2, x] * KG[y2, x] * G[o, y2] * G[y2, z1] * G[z1, x]
            total += bb + ib + bi + ii
    return float(total)


def first_nine_term(G: np.ndarray, K: np.ndarray, o: int, x: int) -> float:
    """The leading term: sum over z1, y2 of G(o,z1)^2 G(y2,x)^2 G(o,y2) (KG)(y2,z1) (KG)(z1,x)."""
    KG = K @ G
    n = len(G)
    return float(sum(
        G[o, z1] ** 2 * G[y2, x] ** 2 * G[o, y2] * KG[y2, z1] * KG[z1, x] for z1 in range(n) for y2 in range(n)
    ))


@dataclass
class DiagramRow:
    o: tuple
    x: tuple
    N: int
    lhs: float
    lhs_se: float
    rhs: float
    slack: float
    slack_se: float

    @property
    def passed(self) -> bool:
        return self.slack >= -K_SIGMA * self.slack_se - 1e-12

    def as_dict(self) -> dict:
        return {
            "o_t": self.o[0], "o_x": self.o[1], "x_t": self.x[0], "x_x": self.x[1], "N": self.N,
            "lhs": self.lhs, "lhs_se": self.lhs_se, "rhs": self.rhs, "slack": self.slack,
            "slack_se": self.slack_se, "passed": self.passed,
        }


@dataclass
class LaceSizeReport:
    tally: LaceTally
    rows_N1: list
    rows_N2: list
    partition: list  # (pair index, gap, se)

    @property
    def partition_ok(self) -> bool:
        return all(abs(g) <= K_SIGMA * s + 1e-12 for _, g, s in self.partition)


def lace_size_report(model: Model, pairs, engine: McEngine) -> LaceSizeReport:
    """pi_1^(0) against G^3 and pi_2^(0) against the nine-term bound, from shared replicas."""
    if model.q != 0:
        raise ValueError("lace sizes are defined at q = 0")
    pairs = tuple((_p(o), _p(x)) for o, x in pairs)
    if any(o.x != 0 for o, _ in pairs):
        raise ValueError("pairs are taken with o at site 0")
    n = model.n_sites
    K = coupling_matrix_beta(model)
    tally = lace_tally(model, pairs, engine)
    q0 = q0_replicas(model, engine, 0)
    cols = np.hstack([q0.values, tally.rep.values])
    off = 2 * n + 2

    def G_row(m):
        return m[:n] / m[2 * n]

    rows1, rows2, part = [], [], []
    for p, (o, x) in enumerate(pairs):
        c0 = off + tally._col(p, 0)
        c1, c2 = off + tally._col(p, 1), off + tally._col(p, 2)
        den = off + tally.den_col

        def f1(m, c1=c1, den=den, x=x):
            pi = m[c1] / m[den]
            g = 1.0 if x.x == 0 else G_row(m)[x.x]
            return np.array([pi, g**3, g**3 - pi])

        def f2(m, c2=c2, den=den, x=x):
            pi = m[c2] / m[den]
            Gm = circulant(model, G_row(m))
            b = nine_term_bound(Gm, K, 0, x.x)
            return np.array([pi, b, b - pi])

        def fp(m, c0=c0, den=den, p=p):
            cs = [off + tally._col(p, k) for k in range(1, tally.n_max + 1)]
            return (m[cs].sum() - m[c0]) / m[den]

        for fn, N, rows in ((f1, 1, rows1), (f2, 2, rows2)):
            val, se = jackknife(cols, fn)
            rows.append(DiagramRow((o.t, o.x), (x.t, x.x), N, val[0], se[0], val[1], val[2], se[2]))
        g, s = jackknife(cols, fp)
        part.append((p, float(g), float(s)))
    return LaceSizeReport(tally, rows1, rows2, part)


def check_pi0_N1(model: Model, pairs, engine: McEngine) -> LaceSizeReport:
    return lace_size_report(model, pairs, engine)


def check_pi0_N2(model: Model, pairs, engine: McEngine) -> LaceSizeReport:
    return lace_size_report(model, pairs, engine)

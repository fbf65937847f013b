"""Exact reference values.

Dense diagonalization for the quantum model on small tori, classical brute force
and bond-state enumeration at q = 0, the derivative-of-exponential identity and
the one- and two-site closed forms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property, lru_cache

import networkx as nx
import numpy as np
from scipy.linalg import expm
from scipy.stats import poisson

from .model import Model

MAX_SITES = 12
FD_STEP = 1e-5
GL_NODES = 48


# ---------------------------------------------------------------- closed forms


def single_site_G(t, beta: float, q: float):
    t = np.asarray(t, dtype=float)
    return np.cosh((1 - 2 * t) * beta * q) / np.cosh(beta * q)


def single_site_S1(beta: float, q: float) -> float:
    return float(np.tanh(beta * q))


def single_site_bubble(beta: float, q: float) -> float:
    a = beta * q
    if a == 0:
        return 1.0
    return (1 + np.sinh(2 * a) / (2 * a)) / (2 * np.cosh(a) ** 2)


def two_site_G_q0(beta: float, J: float) -> float:
    return float(np.tanh(beta * J))


def two_site_chi_q0(beta: float, J: float) -> float:
    return 1.0 + float(np.tanh(beta * J))


# ---------------------------------------------------------------- quadrature helpers


def gauss_legendre(a: float, b: float, n: int = GL_NODES):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def piecewise_nodes(breaks, n: int = GL_NODES):
    """Gauss-Legendre nodes on [0, 1] split at the given break points."""
    pts = np.unique(np.concatenate([[0.0, 1.0], np.mod(np.asarray(breaks, dtype=float), 1.0)]))
    xs, ws = [], []
    for a, b in zip(pts[:-1], pts[1:]):
        if b - a > 1e-15:
            x, w = gauss_legendre(a, b, n)
            xs.append(x)
            ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def _rel_exp_integral(a):
    """(1 - exp(-a)) / a, stable, equal to 1 at a = 0."""
    a = np.asarray(a, dtype=float)
    out = np.ones_like(a)
    nz = np.abs(a) > 1e-12
    out[nz] = -np.expm1(-a[nz]) / a[nz]
    small = ~nz
    out[small] = 1 - a[small] / 2
    return out


# ---------------------------------------------------------------- dense operators


def _site_bits(n_sites: int) -> np.ndarray:
    idx = np.arange(2**n_sites)
    return (idx[:, None] >> np.arange(n_sites)[None, :]) & 1


def s3_diag(n_sites: int, z: int) -> np.ndarray:
    return 1.0 - 2.0 * _site_bits(n_sites)[:, z]


def s1_matrix(n_sites: int, z: int) -> np.ndarray:
    dim = 2**n_sites
    M = np.zeros((dim, dim))
    idx = np.arange(dim)
    M[idx ^ (1 << z), idx] = 1.0
    return M


def hamiltonian(model: Model) -> np.ndarray:
    """-sum_b J_b S3_u S3_v - q sum_z S1_z in the S3 product basis (bit z set = spin -1)."""
    n = model.n_sites
    if n > MAX_SITES:
        raise ValueError("dense oracle limited to %d sites" % MAX_SITES)
    diag = np.zeros(2**n)
    for (u, v), J in zip(model.bonds, model.J):
        diag -= J * s3_diag(n, u) * s3_diag(n, v)
    H = np.diag(diag)
    if model.q:
        for z in range(n):
            H -= model.q * s1_matrix(n, z)
    return H


def operator(n_sites: int, kind: str, z: int) -> np.ndarray:
    if kind == "S3":
        return np.diag(s3_diag(n_sites, z))
    if kind == "S1":
        return s1_matrix(n_sites, z)
    if kind == "U":
        return 0.5 * (np.eye(2**n_sites) + s1_matrix(n_sites, z))
    if kind == "I":
        return np.eye(2**n_sites)
    raise ValueError("unknown operator kind %r" % kind)


@dataclass(frozen=True)
class Insertion:
    kind: str
    x: int
    t: float


def S3(x: int, t: float) -> Insertion:
    return Insertion("S3", int(x), float(t) % 1.0)


def S1(x: int, t: float) -> Insertion:
    return Insertion("S1", int(x), float(t) % 1.0)


class ExactOracle:
    """Spectral decomposition of H and imaginary-time correlators built from it."""

    def __init__(self, model: Model):
        self.model = model
        self.n = model.n_sites
        self.H = hamiltonian(model)
        E, V = np.linalg.eigh(self.H)
        self.E0 = E[0]
        self.eps = E - E[0]
        self.V = V
        self.beta = model.beta
        self.Z = float(np.sum(np.exp(-self.beta * self.eps)))
        self._ops: dict = {}

    def reconstruction_error(self) -> float:
        R = self.V @ np.diag(self.eps + self.E0) @ self.V.T
        return float(np.linalg.norm(R - self.H) / max(np.linalg.norm(self.H), 1e-300))

    def op(self, kind: str, z: int) -> np.ndarray:
        key = (kind, z)
        if key not in self._ops:
            self._ops[key] = self.V.T @ operator(self.n, kind, z) @ self.V
        return self._ops[key]

    def op_sum(self, kind: str, weights=None) -> np.ndarray:
        weights = np.ones(self.n) if weights is None else weights
        return sum(w * self.op(kind, z) for z, w in zip(range(self.n), weights))

    def boltz(self, tau) -> np.ndarray:
        return np.exp(-self.beta * np.multiply.outer(np.asarray(tau, dtype=float), self.eps))

    # -- correlators

    def ordered_trace(self, mats, times) -> np.ndarray:
        """Tr[M1 e^{-(t2-t1)bH} M2 ... Mk e^{-(1-tk+t1)bH}] / Z for times of shape (n, k), rows sorted."""
        times = np.atleast_2d(np.asarray(times, dtype=float))
        gaps = np.diff(np.concatenate([times, times[:, :1] + 1.0], axis=1), axis=1)
        P = np.broadcast_to(mats[0], (len(times),) + mats[0].shape).copy()
        for j in range(1, len(mats)):
            P = np.matmul(P * self.boltz(gaps[:, j - 1])[:, None, :], mats[j])
        P = P * self.boltz(gaps[:, -1])[:, None, :]
        return np.einsum("nii->n", P) / self.Z

    def correlator(self, insertions) -> float:
        """Imaginary-time-ordered expectation of the given insertions."""
        ins = sorted(insertions, key=lambda a: a.t)
        if not ins:
            return 1.0
        mats = [self.op(a.kind, a.x) for a in ins]
        return float(self.ordered_trace(mats, [[a.t for a in ins]])[0])

    def correlator_scan(self, fixed, moving_kinds, s_nodes) -> np.ndarray:
        """Correlator of fixed insertions plus moving ones all placed at each time in s_nodes.

        ``moving_kinds`` is a list of (kind, site).  The nodes must not cross a fixed time
        inside one call; callers use piecewise_nodes split at the fixed times.
        """
        s_nodes = np.asarray(s_nodes, dtype=float)
        out = np.empty(len(s_nodes))
        # group nodes by their position relative to the fixed times
        ft = np.array([a.t for a in fixed])
        slot = np.searchsorted(np.sort(ft), s_nodes, side="right")
        for k in np.unique(slot):
            sel = slot == k
            items = [(a.t, 0, i) for i, a in enumerate(fixed)]
            mid = float(np.mean(s_nodes[sel]))
            items += [(mid, 1, j) for j in range(len(moving_kinds))]
            items.sort()
            mats, cols = [], []
            for t, is_moving, i in items:
                if is_moving:
                    kind, z = moving_kinds[i]
                    mats.append(self.op(kind, z))
                    cols.append(s_nodes[sel])
                else:
                    mats.append(self.op(fixed[i].kind, fixed[i].x))
                    cols.append(np.full(sel.sum(), fixed[i].t))
            out[sel] = self.ordered_trace(mats, np.stack(cols, axis=1))
        return out

    def G(self, a, b) -> float:
        """Two-point function of space-time points given as (t, x) tuples or SpaceTimePoints."""
        ta, xa = _tx(a)
        tb, xb = _tx(b)
        return self.correlator([S3(xa, ta), S3(xb, tb)])

    def G_table(self, ts, o: int = 0) -> np.ndarray:
        """G(o at time 0, (t, x)) for all t in ts and all sites x; shape (len(ts), n)."""
        ts = np.asarray(ts, dtype=float)
        A = self.op("S3", o)
        W1 = self.boltz(1.0 - ts)
        W2 = self.boltz(ts)
        out = np.empty((len(ts), self.n))
        for x in range(self.n):
            C = A * self.op("S3", x).T
            out[:, x] = np.einsum("tm,mn,tn->t", W1, C, W2) / self.Z
        return out

    def one_point_S1(self, y: int = 0) -> float:
        return float(np.sum(np.diag(self.op("S1", y)) * np.exp(-self.beta * self.eps)) / self.Z)

    def truncated(self, A, B) -> float:
        """<A ; B> for lists of insertions."""
        return self.correlator(list(A) + list(B)) - self.correlator(A) * self.correlator(B)

    def F4(self, w, x, y, z) -> float:
        """Fourth Ursell function: four-point minus the three pairings."""
        pts = [w, x, y, z]
        four = self.correlator([S3(p[1], p[0]) for p in map(_tx, pts)])
        return four - self.G(w, x) * self.G(y, z) - self.G(w, y) * self.G(x, z) - self.G(w, z) * self.G(x, y)

    def F4_truncated_form(self, w, x, y, z) -> float:
        """Same quantity through <S3_w S3_x ; S3_y S3_z> - G(w,y)G(x,z) - G(w,z)G(x,y)."""
        tw, xw = _tx(w)
        tx_, xx = _tx(x)
        ty, xy = _tx(y)
        tz, xz = _tx(z)
        tr = self.truncated([S3(xw, tw), S3(xx, tx_)], [S3(xy, ty), S3(xz, tz)])
        return tr - self.G(w, y) * self.G(x, z) - self.G(w, z) * self.G(x, y)

    def F3(self, w, x, y) -> float:
        tw, xw = _tx(w)
        tx_, xx = _tx(x)
        ty, xy = _tx(y)
        tr = self.truncated([S3(xw, tw), S3(xx, tx_)], [S1(xy, ty)])
        return tr + 2 * self.G(w, y) * self.G(y, x)

    # -- integrated quantities

    def chi(self) -> float:
        """Closed-form time integral of sum_x G."""
        A = self.op("S3", 0)
        M = self.op_sum("S3")
        lo = np.minimum.outer(self.eps, self.eps)
        gap = np.abs(np.subtract.outer(self.eps, self.eps))
        W = np.exp(-self.beta * lo) * _rel_exp_integral(self.beta * gap)
        return float(np.sum(A * M.T * W) / self.Z)

    def fourier(self, omegas, ks=None) -> np.ndarray:
        """Exact G-hat(omega, k); omegas in 2*pi*Z, ks defaults to the dual grid; shape (len(omegas), n_k)."""
        lat = self.model.lattice
        ks = lat.dual_grid() if ks is None else np.atleast_2d(ks)
        disp = np.array([lat.displacement(0, x) for x in range(self.n)], dtype=float)
        A = self.op("S3", 0)
        em = np.exp(-self.beta * self.eps)
        num = np.subtract.outer(em, em).T  # [m, n] -> e^{-b e_n} - e^{-b e_m}
        a = self.beta * (self.eps[None, :] - self.eps[:, None])  # b (e_n - e_m)
        lo = np.minimum.outer(self.eps, self.eps)
        W0 = np.exp(-self.beta * lo) * _rel_exp_integral(np.abs(a))
        out = np.zeros((len(omegas), len(ks)), dtype=complex)
        phases = np.exp(1j * disp @ ks.T)  # (n_sites, n_k)
        S3s = [self.op("S3", x) for x in range(self.n)]
        for i, om in enumerate(omegas):
            I = W0 if om == 0 else num / (1j * om - a)
            base = [np.sum(A * S3s[x].T * I) for x in range(self.n)]
            out[i] = np.array(base) @ phases / self.Z
        return out

    def bubble(self, n_nodes: int = 64) -> float:
        """Finite-volume bubble: integral over t of sum_x G^2 (Gauss-Legendre)."""
        t, w = gauss_legendre(0.0, 1.0, n_nodes)
        return float(np.sum(w * np.sum(self.G_table(t) ** 2, axis=1)))

    # -- derivative formulas by quadrature

    def _derivative_integral(self, B: np.ndarray, one_point_B: float, n: int = GL_NODES) -> float:
        """beta * int dt sum_x int ds [<S3_o(0) S3_x(t) B(s)> - G(o,(t,x)) <B>]."""
        A = self.op("S3", 0)
        M = self.op_sum("S3")
        tn, tw = gauss_legendre(0.0, 1.0, n)
        total = 0.0
        for t, wt in zip(tn, tw):
            s1, w1 = gauss_legendre(0.0, t, n)
            s2, w2 = gauss_legendre(t, 1.0, n)
            before = self.ordered_trace([A, B, M], np.stack([np.zeros(n), s1, np.full(n, t)], axis=1))
            after = self.ordered_trace([A, M, B], np.stack([np.zeros(n), np.full(n, t), s2], axis=1))
            gsum = self.ordered_trace([A, M], [[0.0, t]])[0]
            total += wt * (np.dot(w1, before) + np.dot(w2, after) - gsum * one_point_B)
        return self.beta * total

    def dchi_dJ(self, b: int) -> float:
        u, v = self.model.bonds[b]
        B = self.op("S3", u) @ self.op("S3", v)
        uv = float(np.sum(np.diag(B) * np.exp(-self.beta * self.eps)) / self.Z)
        return self._derivative_integral(B, uv)

    def dchi_dq(self) -> float:
        B = self.op_sum("S1")
        one = float(np.sum(np.diag(B) * np.exp(-self.beta * self.eps)) / self.Z)
        return self._derivative_integral(B, one)


def _tx(p):
    if hasattr(p, "t"):
        return float(p.t), int(p.x)
    return float(p[0]) % 1.0, int(p[1])


@lru_cache(maxsize=256)
def _oracle_cached(model_key):
    return ExactOracle(model_key[0])


def exact_chi(model: Model) -> float:
    return ExactOracle(model).chi()


def exact_G(model: Model, x: int, t: float, o: int = 0) -> float:
    return ExactOracle(model).G((0.0, o), (t, x))


# ---------------------------------------------------------------- finite differences


def fd_dchi_dJ(model: Model, b: int, h: float = FD_STEP) -> float:
    Jp, Jm = model.J.copy(), model.J.copy()
    Jp[b] += h
    Jm[b] -= h
    return (exact_chi(model.with_params(J=Jp)) - exact_chi(model.with_params(J=Jm))) / (2 * h)


def fd_dchi_dq(model: Model, h: float = FD_STEP) -> float:
    if model.q < h:
        # one-sided at the boundary q = 0
        f0, f1, f2 = (exact_chi(model.with_params(q=model.q + k * h)) for k in range(3))
        return (-3 * f0 + 4 * f1 - f2) / (2 * h)
    return (exact_chi(model.with_params(q=model.q + h)) - exact_chi(model.with_params(q=model.q - h))) / (2 * h)


def fd_dchi_dbeta(model: Model, h: float = FD_STEP) -> float:
    return (exact_chi(model.with_params(beta=model.beta + h)) - exact_chi(model.with_params(beta=model.beta - h))) / (2 * h)


@dataclass(frozen=True)
class DerivativeSet:
    dJ_formula: np.ndarray
    dJ_fd: np.ndarray
    dq_formula: float
    dq_fd: float
    dbeta_fd: float

    def chain_rule_residual(self, model: Model) -> float:
        """d chi/d beta - sum_b (J_b/beta) d chi/dJ_b + (q/beta)(-d chi/dq)."""
        return float(
            self.dbeta_fd
            - np.sum(model.J / model.beta * self.dJ_formula)
            + model.q / model.beta * (-self.dq_formula)
        )


def exact_derivatives(model: Model) -> DerivativeSet:
    orc = ExactOracle(model)
    dJ = np.array([orc.dchi_dJ(b) for b in range(model.n_bonds)])
    dJ_fd = np.array([fd_dchi_dJ(model, b) for b in range(model.n_bonds)])
    return DerivativeSet(dJ, dJ_fd, orc.dchi_dq(), fd_dchi_dq(model), fd_dchi_dbeta(model))


# ---------------------------------------------------------------- derivative of the exponential


def wilcox_check(A, dA, alpha0: float, h: float = FD_STEP, nodes: int = 128):
    """(finite-difference derivative of exp(A(alpha)), quadrature of int e^{tA} A' e^{(1-t)A} dt)."""
    lhs = (expm(A(alpha0 + h)) - expm(A(alpha0 - h))) / (2 * h)
    A0, D = A(alpha0), dA(alpha0)
    ev, U = np.linalg.eigh(A0) if np.allclose(A0, A0.conj().T) else (None, None)
    t, w = gauss_legendre(0.0, 1.0, nodes)
    rhs = np.zeros_like(lhs, dtype=complex)
    for tk, wk in zip(t, w):
        if ev is not None:
            left = (U * np.exp(tk * ev)) @ U.conj().T
            right = (U * np.exp((1 - tk) * ev)) @ U.conj().T
        else:
            left, right = expm(tk * A0), expm((1 - tk) * A0)
        rhs += wk * left @ D @ right
    if np.isrealobj(lhs) and np.allclose(rhs.imag, 0):
        rhs = rhs.real
    return lhs, rhs


def random_hermitian_family(rng: np.random.Generator, dim: int = 4):
    """A(alpha) = B0 + alpha B1 + alpha^2 B2 with random Hermitian B's."""

    def herm():
        X = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        return (X + X.conj().T) / 2

    B0, B1, B2 = herm(), herm(), herm()
    return (lambda a: B0 + a * B1 + a * a * B2), (lambda a: B1 + 2 * a * B2)


# ---------------------------------------------------------------- classical model (q = 0)


def classical_correlations(model: Model) -> np.ndarray:
    """<sigma_o sigma_x> for all x by brute force over spin configurations."""
    n = model.n_sites
    if n > 20:
        raise ValueError("classical brute force limited to 20 sites")
    spins = 1 - 2 * _site_bits(n)
    energy = np.zeros(2**n)
    for (u, v), J in zip(model.bonds, model.J):
        energy -= J * spins[:, u] * spins[:, v]
    w = np.exp(-model.beta * (energy - energy.min()))
    return (spins[:, [0]] * spins * w[:, None]).sum(axis=0) / w.sum()


def classical_chi(model: Model) -> float:
    return float(classical_correlations(model).sum())


class BondStateOracle:
    """Exact q = 0 quantities by enumerating per-bond states of two Poisson layers.

    At q = 0 every circle is a single cluster vertex, so connectivity, double
    connectivity and pivotality depend only on the bond multiplicities capped at 2
    and parity constraints depend only on bridge-count parities.
    """

    MAX_BONDS = 5
    NMAX = 80

    def __init__(self, model: Model):
        if model.q != 0:
            raise ValueError("bond-state enumeration needs q = 0")
        if model.n_bonds > self.MAX_BONDS:
            raise ValueError("too many bonds for exhaustive enumeration")
        self.model = model
        self.n = model.n_sites
        self.nb = model.n_bonds
        self.lam = model.beta * model.J
        self.inc = np.zeros((self.n, self.nb), dtype=np.int64)
        for b, (u, v) in enumerate(model.bonds):
            self.inc[u, b] = 1
            self.inc[v, b] = 1

    @staticmethod
    def _layer_law(lam1: float, lam2: float) -> np.ndarray:
        """P[p1, p2, c] with p_j = n_j mod 2 and c = min(n1 + n2, 2)."""
        k = np.arange(BondStateOracle.NMAX)
        f1 = poisson.pmf(k, lam1)
        f2 = poisson.pmf(k, lam2) if lam2 > 0 else (k == 0).astype(float)
        P = np.zeros((2, 2, 3))
        joint = np.outer(f1, f2)
        tot = np.minimum(np.add.outer(k, k), 2)
        par1 = np.broadcast_to((k % 2)[:, None], joint.shape)
        par2 = np.broadcast_to((k % 2)[None, :], joint.shape)
        np.add.at(P, (par1.ravel(), par2.ravel(), tot.ravel()), joint.ravel())
        return P

    def _enumerate(self, inside2=None):
        """Arrays p1, p2, c of shape (S, nb) and probabilities (S,); layer 2 only on inside2 bonds."""
        inside2 = np.ones(self.nb, dtype=bool) if inside2 is None else inside2
        laws = [self._layer_law(self.lam[b], self.lam[b] if inside2[b] else 0.0) for b in range(self.nb)]
        states = np.array(list(itertools.product(range(12), repeat=self.nb)), dtype=np.int64).reshape(-1, self.nb)
        p1, p2, c = states // 6, (states // 3) % 2, states % 3
        prob = np.ones(len(states))
        for b in range(self.nb):
            prob *= laws[b][p1[:, b], p2[:, b], c[:, b]]
        keep = prob > 0
        return p1[keep], p2[keep], c[keep], prob[keep]

    def _site_parity(self, p) -> np.ndarray:
        return (p @ self.inc.T) % 2

    def _target(self, a: int, b: int) -> np.ndarray:
        t = np.zeros(self.n, dtype=np.int64)
        if a != b:
            t[a] = t[b] = 1
        return t

    def _graph(self, cvec, bonds_mask=None) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        for b, (u, v) in enumerate(self.model.bonds):
            if cvec[b] > 0 and (bonds_mask is None or bonds_mask[b]):
                g.add_edge(int(u), int(v), mult=int(cvec[b]), bond=b)
        return g

    @lru_cache(maxsize=None)
    def doubly(self, cvec: tuple, a: int, b: int) -> bool:
        if a == b:
            return True
        g = self._graph(cvec)
        if not nx.has_path(g, a, b):
            return False
        for u, v, d in list(g.edges(data=True)):
            if d["mult"] == 1:
                g.remove_edge(u, v)
                ok = nx.has_path(g, a, b)
                g.add_edge(u, v, **d)
                if not ok:
                    return False
        return True

    @lru_cache(maxsize=None)
    def cluster(self, cvec: tuple, a: int) -> frozenset:
        return frozenset(nx.node_connected_component(self._graph(cvec), a))

    @lru_cache(maxsize=None)
    def event_E(self, cvec: tuple, C: frozenset, v: int, x: int) -> bool:
        """v connected to x through C, and no pivotal bridge (y, z) of v -> x with v connected to y through C."""
        bonds = self.model.bonds
        inside = np.array([(int(u) not in C) and (int(w) not in C) for u, w in bonds])
        g = self._graph(cvec)
        gc = self._graph(cvec, inside)

        def conn_in_Cc(a, b):
            if a in C or b in C:
                return False
            return a == b or nx.has_path(gc, a, b)

        if not (v == x or nx.has_path(g, v, x)):
            return False
        if conn_in_Cc(v, x):
            return False
        for u, w, d in list(g.edges(data=True)):
            if d["mult"] != 1:
                continue
            g.remove_edge(u, w)
            side_v = nx.node_connected_component(g, v)
            g.add_edge(u, w, **d)
            if x in side_v:
                continue
            y = u if u in side_v else w
            if not conn_in_Cc(v, y):
                return False
        return True

    def p_even(self) -> float:
        p1, _, _, prob = self._enumerate()
        return float(prob[np.all(self._site_parity(p1) == 0, axis=1)].sum())

    def G(self, a: int, b: int) -> float:
        p1, _, _, prob = self._enumerate()
        par = self._site_parity(p1)
        num = prob[np.all(par == self._target(a, b), axis=1)].sum()
        den = prob[np.all(par == 0, axis=1)].sum()
        return float(num / den)

    def G_matrix(self) -> np.ndarray:
        return np.array([[self.G(a, b) for b in range(self.n)] for a in range(self.n)])

    def G_restricted(self, a: int, b: int, region_sites) -> float:
        """Two-point function with bridges confined to bonds inside the site set."""
        sites = set(int(s) for s in region_sites)
        if a not in sites or b not in sites:
            return 0.0
        inside = np.array([(int(u) in sites) and (int(v) in sites) for u, v in self.model.bonds])
        laws = [self._layer_law(self.lam[bb] if inside[bb] else 0.0, 0.0) for bb in range(self.nb)]
        num = den = 0.0
        target = self._target(a, b)
        mask = np.array([z in sites for z in range(self.n)])
        for p in itertools.product(range(2), repeat=self.nb):
            pr = np.prod([laws[bb][p[bb]].sum() for bb in range(self.nb)])
            if pr == 0:
                continue
            par = (np.array(p) @ self.inc.T) % 2
            if np.all(par[mask] == target[mask]):
                num += pr
            if np.all(par[mask] == 0):
                den += pr
        return float(num / den)

    def pi0(self, a: int, b: int) -> float:
        p1, p2, c, prob = self._enumerate()
        ok = np.all(self._site_parity(p1) == self._target(a, b), axis=1) & np.all(self._site_parity(p2) == 0, axis=1)
        tot = sum(pr for pr, cv in zip(prob[ok], c[ok]) if self.doubly(tuple(cv), a, b))
        return float(tot / self.p_even() ** 2)

    def pi0_matrix(self) -> np.ndarray:
        return np.array([[self.pi0(a, b) for b in range(self.n)] for a in range(self.n)])

    def _inner_E(self, C: frozenset, v: int, x: int) -> float:
        """(1/(Z Z_{C^c})) E3 E4_{C^c}[count * 1_E] with layer 4 confined to C^c."""
        inside = np.array([(int(u) not in C) and (int(w) not in C) for u, w in self.model.bonds])
        p3, p4, c, prob = self._enumerate(inside)
        cc = np.array([z not in C for z in range(self.n)])
        ok3 = np.all(self._site_parity(p3) == self._target(v, x), axis=1)
        ok4 = np.all(self._site_parity(p4)[:, cc] == 0, axis=1)
        ok = ok3 & ok4
        tot = sum(pr for pr, cv in zip(prob[ok], c[ok]) if self.event_E(tuple(cv), C, v, x))
        even4 = prob[np.all(self._site_parity(p4)[:, cc] == 0, axis=1)].sum()
        return float(tot / (self.p_even() * even4))

    def pi1(self, a: int, x: int) -> float:
        p1, p2, c, prob = self._enumerate()
        par1 = self._site_parity(p1)
        even2 = np.all(self._site_parity(p2) == 0, axis=1)
        pe = self.p_even()
        inner_cache: dict = {}
        total = 0.0
        for b, (u0, v0) in enumerate(self.model.bonds):
            for u, v in ((int(u0), int(v0)), (int(v0), int(u0))):
                ok = np.all(par1 == self._target(a, u), axis=1) & even2
                acc = 0.0
                for pr, cv in zip(prob[ok], c[ok]):
                    cv = tuple(cv)
                    if not self.doubly(cv, a, u):
                        continue
                    C = self.cluster(cv, a)
                    key = (C, v)
                    if key not in inner_cache:
                        inner_cache[key] = self._inner_E(C, v, x)
                    acc += pr * inner_cache[key]
                total += self.model.beta * self.model.J[b] * acc / pe**2
        return float(total)

    def pi1_matrix(self) -> np.ndarray:
        return np.array([[self.pi1(a, b) for b in range(self.n)] for a in range(self.n)])

    def coupling_matrix(self) -> np.ndarray:
        K = np.zeros((self.n, self.n))
        for (u, v), J in zip(self.model.bonds, self.model.J):
            K[u, v] += self.model.beta * J
            K[v, u] += self.model.beta * J
        return K

"""Finite torus lattices, ferromagnetic spin-spin couplings and their Fourier transform.

Sites of the torus [-L, L]^d with opposite faces identified are stored as
coordinates in {0, ..., 2L-1}^d and indexed in C order.  Displacements are
reduced to the representative of minimal sup-norm before the coupling table
is consulted, so every pair of sites carries a single coupling value.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

NEAREST_NEIGHBOR = "nearest_neighbor"
FINITE_RANGE_TABLE = "finite_range_table"

SITE_INDEX_BITS = 62


@dataclass(frozen=True)
class SpatialLattice:
    d: int
    L: int

    def __post_init__(self):
        # L = 0 is accepted as the one-site system used for closed-form checks.
        if self.d < 1 or self.L < 0:
            raise ValueError("need d >= 1 and L >= 0")
        if self.L > 0 and self.d * math.log2(2 * self.L) > SITE_INDEX_BITS:
            raise OverflowError("site index does not fit in %d bits" % SITE_INDEX_BITS)

    @property
    def side(self) -> int:
        return max(2 * self.L, 1)

    @property
    def n_sites(self) -> int:
        return self.side**self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.d

    def coords(self, i: int) -> np.ndarray:
        return np.array(np.unravel_index(i, self.shape))

    def index(self, c) -> int:
        c = np.mod(np.asarray(c, dtype=np.int64), self.side)
        return int(np.ravel_multi_index(tuple(c), self.shape))

    def all_coords(self) -> np.ndarray:
        """Array of shape (n_sites, d)."""
        return np.array(np.unravel_index(np.arange(self.n_sites), self.shape)).T

    def displacement(self, x: int, y: int) -> np.ndarray:
        """Minimal sup-norm representative of y - x; ties map to +L."""
        diff = np.mod(self.coords(y) - self.coords(x), self.side)
        return np.where(diff > self.L, diff - self.side, diff)

    def translate(self, x: int, y: int) -> int:
        """Site x + y (group operation of the torus)."""
        return self.index(self.coords(x) + self.coords(y))

    def negate(self, x: int) -> int:
        return self.index(-self.coords(x))

    def dual_grid(self) -> np.ndarray:
        """Wave vectors k in (pi/L) * Lambda, shape (n_sites, d), reduced to (-pi, pi]."""
        c = self.all_coords()
        c = np.where(c > self.L, c - self.side, c)
        return np.pi * c / max(self.L, 1)

    @property
    def sites(self) -> range:
        return range(self.n_sites)


def build_lattice(d: int, L: int) -> SpatialLattice:
    if L < 1:
        raise ValueError("need L >= 1")
    return SpatialLattice(d, L)


def single_site_lattice() -> SpatialLattice:
    return SpatialLattice(1, 0)


def displacement_class(disp) -> tuple[int, ...]:
    """Orbit label of a displacement under coordinate reflections and permutations."""
    return tuple(sorted(abs(int(v)) for v in disp))


@dataclass(frozen=True)
class CouplingSpec:
    kind: str = NEAREST_NEIGHBOR
    J: float = 1.0
    table: tuple = field(default=())

    def __post_init__(self):
        if self.kind == NEAREST_NEIGHBOR:
            if not (np.isfinite(self.J) and self.J > 0):
                raise ValueError("nearest-neighbor coupling must be finite and > 0")
        elif self.kind == FINITE_RANGE_TABLE:
            if not self.table:
                raise ValueError("finite_range_table needs a nonempty table")
            seen = set()
            for key, val in self.table:
                key = tuple(key)
                if all(k == 0 for k in key):
                    raise ValueError("self-coupling must vanish")
                if not (np.isfinite(val) and val > 0):
                    raise ValueError("table values must be finite and > 0")
                cls = displacement_class(key)
                if cls in seen:
                    raise ValueError("duplicate displacement class %r" % (cls,))
                seen.add(cls)
        else:
            raise ValueError("unknown coupling kind %r" % self.kind)

    def value(self, disp) -> float:
        cls = displacement_class(disp)
        if self.kind == NEAREST_NEIGHBOR:
            return self.J if sum(cls) == 1 else 0.0
        for key, val in self.table:
            if displacement_class(key) == cls:
                return float(val)
        return 0.0


def coupling(spec: CouplingSpec, lattice: SpatialLattice, x: int, y: int) -> float:
    if x == y:
        return 0.0
    return spec.value(lattice.displacement(x, y))


def coupling_matrix(spec: CouplingSpec, lattice: SpatialLattice) -> np.ndarray:
    n = lattice.n_sites
    M = np.zeros((n, n))
    for x in range(n):
        for y in range(x + 1, n):
            M[x, y] = M[y, x] = coupling(spec, lattice, x, y)
    return M


def J_hat(spec: CouplingSpec, lattice: SpatialLattice, k) -> float:
    """sum_x J_{o,x} exp(i k.x) over the torus; k must lie on the dual grid."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    total = 0.0 + 0.0j
    for x in range(1, lattice.n_sites):
        j = coupling(spec, lattice, 0, x)
        if j:
            total += j * np.exp(1j * np.dot(k, lattice.displacement(0, x)))
    if abs(total.imag) > 1e-12 * max(1.0, abs(total.real)):
        raise ArithmeticError("J_hat has an imaginary part; k is off the dual grid?")
    return float(total.real)


@dataclass(frozen=True)
class Model:
    """Lattice, couplings and the two field parameters at one parameter point."""

    lattice: SpatialLattice
    spec: CouplingSpec
    beta: float
    q: float
    bonds: np.ndarray = field(compare=False, repr=False)
    J: np.ndarray = field(compare=False, repr=False)

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    @property
    def J_hat0(self) -> float:
        return J_hat(self.spec, self.lattice, np.zeros(self.lattice.d))

    def incident(self, z: int) -> list[int]:
        return [b for b, (u, v) in enumerate(self.bonds) if u == z or v == z]

    def with_params(self, beta=None, q=None, J=None) -> "Model":
        return Model(
            self.lattice,
            self.spec,
            self.beta if beta is None else float(beta),
            self.q if q is None else float(q),
            self.bonds,
            self.J if J is None else np.asarray(J, dtype=float),
        )


def build_model(lattice: SpatialLattice, spec: CouplingSpec, beta: float, q: float) -> Model:
    if beta < 0 or q < 0:
        raise ValueError("need beta >= 0 and q >= 0")
    bonds, J = [], []
    n = lattice.n_sites
    for x, y in itertools.combinations(range(n), 2):
        j = coupling(spec, lattice, x, y)
        if j > 0:
            bonds.append((x, y))
            J.append(j)
    bonds = np.array(bonds, dtype=np.int64).reshape(-1, 2)
    if n > 1:
        adj = coo_matrix((np.ones(len(bonds)), (bonds[:, 0], bonds[:, 1])), shape=(n, n))
        ncomp, _ = connected_components(adj, directed=False)
        if ncomp != 1:
            raise ValueError("bond graph is not connected")
    return Model(lattice, spec, float(beta), float(q), bonds, np.array(J, dtype=float))


def make_model(d: int, L: int, J: float = 1.0, beta: float = 1.0, q: float = 0.0) -> Model:
    """Nearest-neighbor shortcut; L = 0 gives the one-site system."""
    lattice = single_site_lattice() if L == 0 else build_lattice(d, L)
    return build_model(lattice, CouplingSpec(NEAREST_NEIGHBOR, J), beta, q)

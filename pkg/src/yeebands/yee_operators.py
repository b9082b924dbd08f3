"""Discrete partial derivatives and curl on a quasi-periodic Yee grid.

Grid functions are flattened with x fastest, then y, then z, so that
``C1 = I (x) I (x) K1``, ``C2 = I (x) K2`` and ``C3 = K3``.  Each operator is a
forward difference ``(S - I) / delta`` where ``S`` shifts by one grid step and
wraps across the cell boundary with a Bloch phase.

Two routes are provided:

* matrix-free applies driven by boundary index/phase tables, obtained by
  reducing the out-of-cell neighbour back into the cell with the integer
  translation vectors;
* explicit sparse assembly from the block formulas for J1, J2 and the four
  J3 categories.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.sparse as sp

from .lattice import CorrectedLattice

TWO_PI = 2.0 * np.pi


def _cis(t: float) -> complex:
    """exp(i 2 pi t)."""
    return complex(np.exp(1j * TWO_PI * t))


@dataclass(frozen=True)
class BlochPhases:
    """``t_l = k . a_l``; the boundary phase along a_l is ``exp(i 2 pi t_l)``."""

    t1: float
    t2: float
    t3: float

    @classmethod
    def from_k(cls, lattice: CorrectedLattice, k) -> "BlochPhases":
        k = np.asarray(k, dtype=float)
        return cls(float(k @ lattice.a1), float(k @ lattice.a2), float(k @ lattice.a3))

    @property
    def phi1(self) -> complex:
        return _cis(self.t1)

    @property
    def phi2(self) -> complex:
        return _cis(self.t2)

    @property
    def phi3(self) -> complex:
        return _cis(self.t3)

    @property
    def t(self) -> np.ndarray:
        return np.array([self.t1, self.t2, self.t3])


def reduce_grid_points(lattice: CorrectedLattice, I, J, K) -> Tuple[np.ndarray, ...]:
    """Map integer grid points into the cell.

    Returns ``(I', J', K', c1, c2, c3)`` with
    ``(I, J, K) = (I', J', K') + c1 a1 + c2 a2 + c3 a3`` in grid units.
    """
    g = lattice.grid_vectors
    n1, n2, n3 = lattice.shape
    I = np.asarray(I, dtype=np.int64).copy()
    J = np.asarray(J, dtype=np.int64).copy()
    K = np.asarray(K, dtype=np.int64).copy()
    c3 = np.floor_divide(K, n3)
    I -= c3 * g[0, 2]
    J -= c3 * g[1, 2]
    K -= c3 * n3
    c2 = np.floor_divide(J, n2)
    I -= c2 * g[0, 1]
    J -= c2 * n2
    c1 = np.floor_divide(I, n1)
    I -= c1 * n1
    return I, J, K, c1, c2, c3


@dataclass(frozen=True, eq=False)
class DiscreteCurl:
    """Matrix-free curl for one lattice and one wave vector."""

    lattice: CorrectedLattice
    phases: BlochPhases
    idx_y: np.ndarray
    ph_y: np.ndarray
    idx_z: np.ndarray
    ph_z: np.ndarray

    @classmethod
    def build(cls, lattice: CorrectedLattice, k) -> "DiscreteCurl":
        phases = BlochPhases.from_k(lattice, k)
        return cls.from_phases(lattice, phases)

    @classmethod
    def from_phases(cls, lattice: CorrectedLattice, phases: BlochPhases) -> "DiscreteCurl":
        n1, n2, n3 = lattice.shape
        t = phases.t
        # y-boundary: row J = n2 - 1 reads (I, n2, K).
        I = np.arange(n1)
        Ir, _, _, c1, c2, c3 = reduce_grid_points(lattice, I, np.full(n1, n2), np.zeros(n1))
        idx_y = Ir
        ph_y = np.exp(1j * TWO_PI * (c1 * t[0] + c2 * t[1] + c3 * t[2]))
        # z-boundary: slab K = n3 - 1 reads (I, J, n3).
        J, I = np.divmod(np.arange(n1 * n2), n1)
        Ir, Jr, _, c1, c2, c3 = reduce_grid_points(lattice, I, J, np.full(n1 * n2, n3))
        idx_z = Ir + n1 * Jr
        ph_z = np.exp(1j * TWO_PI * (c1 * t[0] + c2 * t[1] + c3 * t[2]))
        return cls(lattice, phases, idx_y, ph_y, idx_z, ph_z)

    # -- sizes ---------------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.lattice.shape

    @property
    def n(self) -> int:
        return self.lattice.n

    @property
    def spacings(self) -> Tuple[float, float, float]:
        return self.lattice.spacings

    def _grid(self, v: np.ndarray) -> np.ndarray:
        n1, n2, n3 = self.shape
        if v.shape[0] != self.n:
            raise ValueError(f"expected leading dimension {self.n}, got {v.shape[0]}")
        return v.reshape((n3, n2, n1) + v.shape[1:])

    # -- shifts --------------------------------------------------------------

    def _shift_x(self, u: np.ndarray, adjoint: bool = False) -> np.ndarray:
        phi = self.phases.phi1
        if not adjoint:
            w = np.roll(u, -1, axis=2)
            w[:, :, -1] *= phi
        else:
            w = np.roll(u, 1, axis=2)
            w[:, :, 0] *= np.conj(phi)
        return w

    def _shift_y(self, u: np.ndarray, adjoint: bool = False) -> np.ndarray:
        w = np.empty_like(u)
        ph = self.ph_y.reshape((-1,) + (1,) * (u.ndim - 3))
        if not adjoint:
            w[:, :-1] = u[:, 1:]
            w[:, -1] = ph * u[:, 0, self.idx_y]
        else:
            w[:, 1:] = u[:, :-1]
            w[:, 0, self.idx_y] = np.conj(ph) * u[:, -1]
        return w

    def _shift_z(self, u: np.ndarray, adjoint: bool = False) -> np.ndarray:
        n1, n2, _ = self.shape
        w = np.empty_like(u)
        tail = u.shape[3:]
        ph = self.ph_z.reshape((-1,) + (1,) * len(tail))
        if not adjoint:
            w[:-1] = u[1:]
            src = u[0].reshape((n1 * n2,) + tail)
            w[-1] = (ph * src[self.idx_z]).reshape((n2, n1) + tail)
        else:
            w[1:] = u[:-1]
            dst = np.empty((n1 * n2,) + tail, dtype=u.dtype)
            dst[self.idx_z] = np.conj(ph) * u[-1].reshape((n1 * n2,) + tail)
            w[0] = dst.reshape((n2, n1) + tail)
        return w

    def _apply_l(self, axis: int, v: np.ndarray, adjoint: bool) -> np.ndarray:
        v = np.asarray(v)
        if not np.iscomplexobj(v):
            v = v.astype(complex)
        u = self._grid(v)
        shift = (self._shift_x, self._shift_y, self._shift_z)[axis]
        w = shift(u, adjoint)
        w -= u
        w /= self.spacings[axis]
        return w.reshape(v.shape)

    def apply_C1(self, v, adjoint: bool = False) -> np.ndarray:
        return self._apply_l(0, v, adjoint)

    def apply_C2(self, v, adjoint: bool = False) -> np.ndarray:
        return self._apply_l(1, v, adjoint)

    def apply_C3(self, v, adjoint: bool = False) -> np.ndarray:
        return self._apply_l(2, v, adjoint)

    def apply_Cl(self, axis: int, v, adjoint: bool = False) -> np.ndarray:
        return self._apply_l(axis, v, adjoint)

    # -- curl ----------------------------------------------------------------

    def _split(self, e) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        e = np.asarray(e)
        if e.shape[0] != 3 * self.n:
            raise ValueError(f"expected leading dimension {3 * self.n}, got {e.shape[0]}")
        n = self.n
        return e[:n], e[n:2 * n], e[2 * n:]

    def apply_C(self, e) -> np.ndarray:
        """``C e`` with ``C = [[0, -C3, C2], [C3, 0, -C1], [-C2, C1, 0]]``."""
        e1, e2, e3 = self._split(e)
        h1 = self.apply_C2(e3) - self.apply_C3(e2)
        h2 = self.apply_C3(e1) - self.apply_C1(e3)
        h3 = self.apply_C1(e2) - self.apply_C2(e1)
        return np.concatenate([h1, h2, h3])

    def apply_C_adjoint(self, h) -> np.ndarray:
        h1, h2, h3 = self._split(h)
        e1 = self.apply_C3(h2, True) - self.apply_C2(h3, True)
        e2 = self.apply_C1(h3, True) - self.apply_C3(h1, True)
        e3 = self.apply_C2(h1, True) - self.apply_C1(h2, True)
        return np.concatenate([e1, e2, e3])

    def apply_A(self, e) -> np.ndarray:
        """``C* C e``."""
        return self.apply_C_adjoint(self.apply_C(e))

    # -- explicit assembly ---------------------------------------------------

    def assemble_J2(self) -> sp.csr_matrix:
        lat = self.lattice
        return assemble_J2(lat.n1, lat.m1, lat.rho1, self.phases.t1)

    def assemble_J3(self) -> sp.csr_matrix:
        return assemble_J3(self.lattice, self.phases)

    def assemble_K1(self) -> sp.csr_matrix:
        n1 = self.lattice.n1
        corner = sp.csr_matrix(([self.phases.phi1], ([n1 - 1], [0])), shape=(n1, n1))
        return ((_bidiagonal(n1) + corner) / self.lattice.dx).tocsr()

    def assemble_K2(self) -> sp.csr_matrix:
        n1, n2 = self.lattice.n1, self.lattice.n2
        corner = sp.csr_matrix(([1.0], ([n2 - 1], [0])), shape=(n2, n2))
        mat = (
            sp.kron(_bidiagonal(n2) + sp.identity(n2), sp.identity(n1))
            - sp.identity(n1 * n2)
            + self.phases.phi2 * sp.kron(corner, self.assemble_J2())
        )
        return (mat / self.lattice.dy).tocsr()

    def assemble_K3(self) -> sp.csr_matrix:
        n1, n2, n3 = self.shape
        corner = sp.csr_matrix(([1.0], ([n3 - 1], [0])), shape=(n3, n3))
        mat = (
            sp.kron(_bidiagonal(n3) + sp.identity(n3), sp.identity(n1 * n2))
            - sp.identity(self.n)
            + self.phases.phi3 * sp.kron(corner, self.assemble_J3())
        )
        return (mat / self.lattice.dz).tocsr()

    def assemble_Cl(self) -> Tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
        n1, n2, n3 = self.shape
        c1 = sp.kron(sp.identity(n2 * n3), self.assemble_K1())
        c2 = sp.kron(sp.identity(n3), self.assemble_K2())
        c3 = self.assemble_K3()
        return c1.tocsr(), c2.tocsr(), c3.tocsr()

    def assemble_C(self) -> sp.csr_matrix:
        c1, c2, c3 = self.assemble_Cl()
        return sp.bmat([[None, -c3, c2], [c3, None, -c1], [-c2, c1, None]], format="csr")


def _bidiagonal(n: int) -> sp.csr_matrix:
    """``-I`` plus the unit superdiagonal."""
    return sp.diags([-np.ones(n), np.ones(n - 1)], [0, 1], shape=(n, n), dtype=complex).tocsr()


def shift_block(n: int, s: int, alpha: complex = 1.0, beta: complex = 1.0) -> sp.csr_matrix:
    """``[[0, alpha I_s], [beta I_{n-s}, 0]]``, an n-by-n phased cyclic shift."""
    if not 0 <= s <= n:
        raise ValueError(f"block split {s} outside [0, {n}]")
    rows = np.arange(n)
    cols = (rows - s) % n
    vals = np.where(rows < s, alpha, beta).astype(complex)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def block_swap(nb: int, s: int, top: sp.spmatrix, bottom: sp.spmatrix) -> sp.csr_matrix:
    """``[[0, I_s (x) top], [I_{nb-s} (x) bottom, 0]]`` on nb blocks."""
    if not 0 <= s <= nb:
        raise ValueError(f"block split {s} outside [0, {nb}]")
    m = top.shape[0]
    rows = sp.csr_matrix(([1.0] * s, (np.arange(s), np.arange(nb - s, nb))), shape=(nb, nb))
    rest = sp.csr_matrix(([1.0] * (nb - s), (np.arange(s, nb), np.arange(nb - s))), shape=(nb, nb))
    out = sp.kron(rows, top) + sp.kron(rest, bottom)
    return sp.csr_matrix(out, shape=(nb * m, nb * m))


def assemble_J2(n1: int, m1: int, rho1: int, t1: float) -> sp.csr_matrix:
    """``exp(i 2 pi rho1 t1) [[0, exp(-i 2 pi t1) I_m1], [I_{n1-m1}, 0]]``."""
    if not 0 <= m1 <= n1:
        raise ValueError("m1 outside [0, n1]")
    return (_cis(rho1 * t1) * shift_block(n1, m1, _cis(-t1), 1.0)).tocsr()


def assemble_J1(n1: int, m2: int, rho2: int, t1: float) -> sp.csr_matrix:
    return assemble_J2(n1, m2, rho2, t1)


def j3_category(lattice: CorrectedLattice) -> int:
    """Which of the four general J3 block forms applies (1..4)."""
    if lattice.rho3 == 0:
        return 1 if lattice.m1 <= lattice.m2 else 2
    return 3 if lattice.m1 + lattice.m2 <= lattice.n1 else 4


def assemble_J3(lattice: CorrectedLattice, phases: BlochPhases) -> sp.csr_matrix:
    """Boundary coupling of the z-difference, in the four-category form."""
    n1, n2 = lattice.n1, lattice.n2
    m1, m2, m3 = lattice.m1, lattice.m2, lattice.m3
    r1, r2, r3, r4, r5 = lattice.rho1, lattice.rho2, lattice.rho3, lattice.rho4, lattice.rho5
    p1, p2 = lattice.psi1, lattice.psi2
    t1, t2 = phases.t1, phases.t2
    if r3 == 0 and p2:
        raise AssertionError("psi2 set on the acute branch")
    if r3 == 1 and p1:
        raise AssertionError("psi1 set on the obtuse branch")
    j1 = assemble_J1(n1, m2, r2, t1)
    back = _cis(-t1)
    cat = j3_category(lattice)
    if cat == 1:
        top = _cis(-(t2 + r1 * r4 * t1 - p1 * t1)) * shift_block(n1, m2 - m1, back)
        bottom = j1
    elif cat == 2:
        top = _cis(-(t2 - r2 * r4 * t1 - p1 * t1)) * shift_block(n1, n1 - m1 + m2, back)
        bottom = j1
    elif cat == 3:
        top = _cis(-t2) * j1
        bottom = _cis((r1 * r4 + p2) * t1) * shift_block(n1, m1 + m2, back)
    else:
        top = _cis(-t2) * j1
        bottom = _cis(-(r5 * r4 - p2) * t1) * shift_block(n1, m1 + m2 - n1, back)
    return (_cis(r3 * t2) * block_swap(n2, m3, top, bottom)).tocsr()

"""Closed-form eigenstructure of the discrete curl.

For wave vector k the three difference operators share the eigenvector
matrix ``T`` with columns (ordered ``c = i*n2*n3 + j*n3 + k``)::

    T[:, c] = exp(I*theta_i + J*theta_ij + K*theta_ijk) / sqrt(n)

with, writing ``theta = i 2 pi f``::

    f_i   = (i + k.a1) / n1
    f_ij  = (j - (m1/n1) i + k.a2_hat) / n2
    f_ijk = (k - (m3/n2) j + c_x i + k.a3_hat) / n3

    a2_hat = a2 - (m1/n1 - rho1) a1
    a3_hat = a3 - (m2/n1 - rho2) a1 - (m3/n2 - rho3) a2_hat
    c_x    = (m1 m3 - n2 m2 - rho3 n2 m1) / (n1 n2)

The eigenvalues are ``Lambda_l = (exp(theta) - 1) / delta_l``.  Per mode the
curl acts as the cross product with ``L = (Lambda1, Lambda2, Lambda3)``, from
which the null and range bases below follow.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from .lattice import CorrectedLattice

TWO_PI = 2.0 * np.pi

# Lambda_q floor (relative to its maximum) below which k is treated as Gamma.
POSITIVITY_FLOOR = 1e-12

# Modes whose range basis would lose more than about three digits when built
# from the all-ones reference switch to a better conditioned reference.
_REFERENCE_SWITCH = 1e-3


class GammaPointError(ValueError):
    """Lambda_q is (numerically) singular, as at k = 0."""


def _expm1_i(f: np.ndarray) -> np.ndarray:
    """``exp(i 2 pi f) - 1`` without cancellation for small f."""
    half = np.pi * f
    return 2j * np.sin(half) * np.exp(1j * half)


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Eigen-angles and eigenvalue diagonals for one wave vector.

    ``f1``, ``g2`` and ``g3`` hold the non-DFT parts of the angles (as
    fractions of a turn): ``f_i = (i + t1)/n1``, ``f_ij = (j + g2[i])/n2``,
    ``f_ijk = (k + g3[i, j])/n3``.
    """

    shape: Tuple[int, int, int]
    spacings: Tuple[float, float, float]
    t1: float
    t2_hat: float
    t3_hat: float
    f1: np.ndarray
    g2: np.ndarray
    g3: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    lambda3: np.ndarray
    lambda_q: np.ndarray
    branch: int

    @property
    def n(self) -> int:
        n1, n2, n3 = self.shape
        return n1 * n2 * n3

    @property
    def lambdas(self) -> np.ndarray:
        """(3, n) stack of Lambda1, Lambda2, Lambda3."""
        return np.stack([self.lambda1, self.lambda2, self.lambda3])

    def angles(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Full angle fractions f_i (n1), f_ij (n1, n2), f_ijk (n1, n2, n3)."""
        n1, n2, n3 = self.shape
        fij = (np.arange(n2)[None, :] + self.g2[:, None]) / n2
        fijk = (np.arange(n3)[None, None, :] + self.g3[:, :, None]) / n3
        return self.f1, fij, fijk


def hat_vectors(lattice: CorrectedLattice) -> Tuple[np.ndarray, np.ndarray]:
    """``a2_hat`` and ``a3_hat``."""
    n1, n2, _ = lattice.shape
    a2h = lattice.a2 - (lattice.m1 / n1 - lattice.rho1) * lattice.a1
    a3h = (
        lattice.a3
        - (lattice.m2 / n1 - lattice.rho2) * lattice.a1
        - (lattice.m3 / n2 - lattice.rho3) * a2h
    )
    return a2h, a3h


def eigen_angles(lattice: CorrectedLattice, k) -> SpectralBasis:
    """Eigen-angles and Lambda diagonals for wave vector ``k``."""
    k = np.asarray(k, dtype=float)
    n1, n2, n3 = lattice.shape
    m1, m2, m3, r3 = lattice.m1, lattice.m2, lattice.m3, lattice.rho3
    a2h, a3h = hat_vectors(lattice)
    t1 = float(k @ lattice.a1)
    t2h = float(k @ a2h)
    t3h = float(k @ a3h)
    i = np.arange(n1)
    j = np.arange(n2)
    cx = (m1 * m3 - n2 * m2 - r3 * n2 * m1) / (n1 * n2)
    f1 = (i + t1) / n1
    g2 = -(m1 / n1) * i + t2h
    g3 = -(m3 / n2) * j[None, :] + cx * i[:, None] + t3h
    dx, dy, dz = lattice.spacings
    fij = (j[None, :] + g2[:, None]) / n2
    fijk = (np.arange(n3)[None, None, :] + g3[:, :, None]) / n3
    lam1 = np.broadcast_to((_expm1_i(f1) / dx)[:, None, None], (n1, n2, n3)).reshape(-1)
    lam2 = np.broadcast_to((_expm1_i(fij) / dy)[:, :, None], (n1, n2, n3)).reshape(-1)
    lam3 = (_expm1_i(fijk) / dz).reshape(-1)
    lam_q = np.abs(lam1) ** 2 + np.abs(lam2) ** 2 + np.abs(lam3) ** 2
    return SpectralBasis(
        shape=lattice.shape, spacings=lattice.spacings,
        t1=t1, t2_hat=t2h, t3_hat=t3h, f1=f1, g2=g2, g3=g3,
        lambda1=np.ascontiguousarray(lam1), lambda2=np.ascontiguousarray(lam2),
        lambda3=lam3, lambda_q=lam_q, branch=r3,
    )


T_DENSE_CAP = 4096


def build_T_dense(basis: SpectralBasis) -> np.ndarray:
    """Explicit unitary T (rows x-fastest grid points, columns (i, j, k))."""
    n1, n2, n3 = basis.shape
    n = basis.n
    if n > T_DENSE_CAP:
        raise ValueError(f"dense T limited to n <= {T_DENSE_CAP}, got {n}")
    f1, fij, fijk = basis.angles()
    I = np.arange(n1)
    J = np.arange(n2)
    K = np.arange(n3)
    # phase[I, J, K, i, j, k]
    ph = (
        I[:, None, None, None, None, None] * f1[None, None, None, :, None, None]
        + J[None, :, None, None, None, None] * fij[None, None, None, :, :, None]
        + K[None, None, :, None, None, None] * fijk[None, None, None, :, :, :]
    )
    t = np.exp(1j * TWO_PI * ph) / np.sqrt(n)
    # rows: x fastest -> order (K, J, I)
    return t.transpose(2, 1, 0, 3, 4, 5).reshape(n, n)


# ---------------------------------------------------------------------------
# SVD blocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SvdBlocks:
    """Per-mode null/range bases in T-coordinates.

    ``pi0``, ``pi1``, ``pi2`` are (3, n) arrays: the three n-diagonals
    stacked along the first axis.  ``sigma`` is ``sqrt(Lambda_q)``, so
    ``Sigma_r = diag(sigma, sigma)``.
    """

    pi0: np.ndarray
    pi1: np.ndarray
    pi2: np.ndarray
    sigma: np.ndarray
    lambda_q: np.ndarray
    lambda_s: np.ndarray
    lambda_p: np.ndarray
    fallback_modes: np.ndarray

    @property
    def n(self) -> int:
        return self.sigma.shape[0]

    @cached_property
    def sigma_r(self) -> np.ndarray:
        return np.concatenate([self.sigma, self.sigma])

    @cached_property
    def modal(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(pi0, pi1, pi2)`` as contiguous (n, 3) arrays, for batched products."""
        return tuple(np.ascontiguousarray(b.T) for b in (self.pi0, self.pi1, self.pi2))

    @cached_property
    def modal_conj(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.conj(b) for b in self.modal)

    @property
    def p0(self) -> np.ndarray:
        return np.conj(self.pi0)

    @property
    def p1(self) -> np.ndarray:
        return -np.conj(self.pi2)

    @property
    def p2(self) -> np.ndarray:
        return np.conj(self.pi1)


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Bilinear cross product along axis 0 of (3, n) arrays."""
    return np.stack([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def _range_pair(lam: np.ndarray, lam_q: np.ndarray, ref: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Orthonormal range basis from a real reference vector ``ref`` (3, n)."""
    proj = np.sum(np.conj(lam) * ref, axis=0)           # <L, r>
    rr = np.sum(ref * ref, axis=0)
    w = rr * lam_q - np.abs(proj) ** 2                   # |r x L|^2
    # modes with L parallel to ref give 0/0 here; callers replace them
    with np.errstate(divide="ignore", invalid="ignore"):
        pi1 = (lam_q * ref - lam * proj) / np.sqrt(lam_q * w)
        pi2 = np.conj(_cross(ref, lam)) / np.sqrt(w)
    return pi1, pi2


def build_svd_blocks(basis: SpectralBasis, floor: float = POSITIVITY_FLOOR) -> SvdBlocks:
    """Null basis Pi0 and range bases Pi1, Pi2 per mode.

    Pi1 = [Lq - L_l Ls*] (Lq (3 Lq - |Ls|^2))^{-1/2} and
    Pi2 = [L3* - L2*; L1* - L3*; L2* - L1*] (3 Lq - |Ls|^2)^{-1/2} with
    Ls = L1 + L2 + L3. Both normalisers follow from the Gram identity; the
    stacked Pi2 numerator has squared norm 3 Lq - |Ls|^2.

    Modes with L nearly parallel to (1, 1, 1) use the same construction with
    the better conditioned of (1, -1, 0) and (1, 1, -2) as reference.
    """
    lam = basis.lambdas
    lam_q = basis.lambda_q
    qmax = float(lam_q.max())
    if not qmax > 0 or float(lam_q.min()) <= floor * qmax:
        raise GammaPointError(
            f"Lambda_q minimum {float(lam_q.min()):.3e} below floor {floor:g} x max {qmax:.3e}"
        )
    lam_s = lam.sum(axis=0)
    lam_p = np.abs(lam_s) ** 2
    n = lam_q.shape[0]
    ones = np.ones((3, n))
    pi1, pi2 = _range_pair(lam, lam_q, ones)
    w_rel = (3.0 * lam_q - lam_p) / (3.0 * lam_q)
    bad = np.flatnonzero(w_rel < _REFERENCE_SWITCH)
    if bad.size:
        lb, qb = lam[:, bad], lam_q[bad]
        best1, best2 = None, None
        best_w = np.full(bad.size, -np.inf)
        for ref_vec in ((1.0, -1.0, 0.0), (1.0, 1.0, -2.0)):
            ref = np.repeat(np.asarray(ref_vec)[:, None], bad.size, axis=1)
            rr = float(np.dot(ref_vec, ref_vec))
            wr = (rr * qb - np.abs(np.sum(np.conj(lb) * ref, axis=0)) ** 2) / (rr * qb)
            c1, c2 = _range_pair(lb, qb, ref)
            take = wr > best_w
            if best1 is None:
                best1, best2 = c1, c2
            else:
                best1 = np.where(take, c1, best1)
                best2 = np.where(take, c2, best2)
            best_w = np.maximum(best_w, wr)
        pi1[:, bad] = best1
        pi2[:, bad] = best2
    sigma = np.sqrt(lam_q)
    pi0 = lam / sigma
    return SvdBlocks(pi0=pi0, pi1=pi1, pi2=pi2, sigma=sigma, lambda_q=lam_q,
                     lambda_s=lam_s, lambda_p=lam_p, fallback_modes=bad)


def gamma_like(basis: SpectralBasis, floor: float = POSITIVITY_FLOOR) -> bool:
    q = basis.lambda_q
    return not float(q.max()) > 0 or float(q.min()) <= floor * float(q.max())


def dense_blocks(svd: SvdBlocks, T: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Dense ``[Pi1 Pi2 Pi0]`` (3n x 3n) and the matching ``[P1 P2 P0]``
    in T-coordinates, or in grid coordinates when T is given."""

    def stack(blocks):
        cols = []
        for b in blocks:
            cols.append(np.concatenate([np.diag(b[l]) for l in range(3)], axis=0))
        return np.concatenate(cols, axis=1)

    q = stack([svd.pi1, svd.pi2, svd.pi0])
    p = stack([svd.p1, svd.p2, svd.p0])
    if T is not None:
        big = np.kron(np.eye(3), T)
        q, p = big @ q, big @ p
    return q, p

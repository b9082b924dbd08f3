"""Dense reference implementations for small grids.

Everything here is explicit and slow on purpose.  It is used by the tests
and by the acceptance suite to check the matrix-free code paths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np

from .lattice import CorrectedLattice, LatticeError, correct_lattice, spec_from_vectors
from .material import PermittivityField
from .spectral import SpectralBasis, SvdBlocks, build_T_dense, dense_blocks
from .yee_operators import BlochPhases, DiscreteCurl, block_swap, shift_block

DENSE_CAP = 1000


class OracleCapError(ValueError):
    pass


def _cap(n: int) -> None:
    if n > DENSE_CAP:
        raise OracleCapError(f"dense oracle limited to n <= {DENSE_CAP}, got {n}")


# ---------------------------------------------------------------------------
# Dense matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DenseBundle:
    C: np.ndarray
    T: np.ndarray
    Q: np.ndarray
    P: np.ndarray
    A: np.ndarray
    B: np.ndarray


def dense_assemble(curl: DiscreteCurl, basis: SpectralBasis, svd: Optional[SvdBlocks],
                   field: PermittivityField) -> DenseBundle:
    """Materialise C (from the block formulas), T, Q, P, A = C*C and diag(B)."""
    _cap(curl.n)
    C = curl.assemble_C().toarray()
    T = build_T_dense(basis)
    if svd is not None:
        Q, P = dense_blocks(svd, T)
    else:
        Q = P = np.empty((0, 0))
    return DenseBundle(C=C, T=T, Q=Q, P=P, A=C.conj().T @ C, B=field.stacked.copy())


def dense_matrix(apply, size: int) -> np.ndarray:
    """Columns of a linear map evaluated on the identity."""
    return np.asarray(apply(np.eye(size, dtype=complex)))


# ---------------------------------------------------------------------------
# Hermitian eigenvalues: Householder tridiagonalisation + implicit QL
# ---------------------------------------------------------------------------


def hermitian_tridiagonalize(a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Unitary reduction to a real symmetric tridiagonal (diag, offdiag)."""
    h = np.array(a, dtype=complex, copy=True)
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1:, k]
        norm = np.linalg.norm(x)
        if norm == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        alpha = -phase * norm
        v = x.copy()
        v[0] -= alpha
        vn = np.linalg.norm(v)
        if vn == 0.0:
            continue
        v /= vn
        sub = h[k + 1:, k + 1:]
        p = sub @ v
        kappa = np.vdot(v, p).real
        q = p - kappa * v
        sub -= 2.0 * (np.outer(v, q.conj()) + np.outer(q, v.conj()))
        h[k + 1:, k] = 0.0
        h[k, k + 1:] = 0.0
        h[k + 1, k] = alpha
        h[k, k + 1] = np.conj(alpha)
    d = np.real(np.diag(h)).copy()
    e = np.abs(np.diag(h, -1)).copy()
    return d, e


def tridiagonal_eigenvalues(d: Sequence[float], e: Sequence[float], max_iter: int = 100) -> np.ndarray:
    """Implicit QL with Wilkinson-type shifts; ``e[i]`` couples i and i + 1."""
    d = [float(x) for x in d]
    n = len(d)
    e = [float(x) for x in e] + [0.0]
    eps = np.finfo(float).eps
    # Absolute floor of sqrt(n) eps ||T||, the rounding level of the reduction,
    # so clusters of (near) zero eigenvalues still deflate.
    norm = max((abs(x) for x in d), default=0.0) + 2.0 * max((abs(x) for x in e), default=0.0)
    floor = math.sqrt(n) * norm
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * (dd + floor):
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                raise RuntimeError("QL iteration did not converge")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return np.sort(np.array(d))


def hermitian_eigvalsh(a: np.ndarray) -> np.ndarray:
    d, e = hermitian_tridiagonalize(a)
    return tridiagonal_eigenvalues(d, e)


def dense_gep_eigs(A: np.ndarray, B: np.ndarray, count: Optional[int] = None) -> np.ndarray:
    """Sorted eigenvalues of ``A x = lambda diag(B) x``."""
    b = np.asarray(B, dtype=float)
    if b.ndim == 2:
        b = np.diag(b).real
    s = 1.0 / np.sqrt(b)
    m = (s[:, None] * A) * s[None, :]
    m = 0.5 * (m + m.conj().T)
    vals = hermitian_eigvalsh(m)
    return vals if count is None else vals[:count]


def dense_positive_eigs(A: np.ndarray, B: np.ndarray, n_null: int, count: int) -> np.ndarray:
    """The ``count`` smallest eigenvalues after the first ``n_null``."""
    vals = dense_gep_eigs(A, B)
    return vals[n_null:n_null + count]


# ---------------------------------------------------------------------------
# Quasi-periodic remap (explicit loops)
# ---------------------------------------------------------------------------


def remap_value(u: np.ndarray, lattice: CorrectedLattice, phases: BlochPhases, I: int, J: int, K: int) -> complex:
    """Value of the quasi-periodic extension of ``u`` at grid point (I, J, K).

    ``u`` is shaped (n3, n2, n1).
    """
    n1, n2, n3 = lattice.shape
    (_, g21, g31), (_, _, g32), _ = lattice.grid_vectors
    c3 = K // n3
    I, J, K = I - c3 * g31, J - c3 * g32, K - c3 * n3
    c2 = J // n2
    I, J = I - c2 * g21, J - c2 * n2
    c1 = I // n1
    I = I - c1 * n1
    phase = np.exp(2j * np.pi * (c1 * phases.t1 + c2 * phases.t2 + c3 * phases.t3))
    return complex(phase * u[K, J, I])


def forward_difference_loop(u: np.ndarray, lattice: CorrectedLattice, phases: BlochPhases, axis: int) -> np.ndarray:
    n1, n2, n3 = lattice.shape
    out = np.empty_like(u, dtype=complex)
    step = [0, 0, 0]
    step[axis] = 1
    delta = lattice.spacings[axis]
    for K in range(n3):
        for J in range(n2):
            for I in range(n1):
                nxt = remap_value(u, lattice, phases, I + step[0], J + step[1], K + step[2])
                out[K, J, I] = (nxt - u[K, J, I]) / delta
    return out


# ---------------------------------------------------------------------------
# J3 case table (sign pattern of cos g, cos b, cos a - cos g cos b; sub-case)
# ---------------------------------------------------------------------------

# Each entry: (top phase exponents (a1, a2), top split, top alpha, top beta,
#              bottom phase exponents, bottom split, bottom alpha, bottom beta).
# Splits are "d" = m2 - m1, "e" = n1 - m1 + m2, "m2", "s" = m1 + m2,
# "t" = m1 + m2 - n1; alpha/beta are exponents of exp(i 2 pi k.a1).
_CASES: Dict[Tuple[int, str], Tuple] = {
    (1, "a"): ((0, -1), "d", -1, 0, (0, 0), "m2", -1, 0),
    (1, "b"): ((0, -1), "e", 0, 1, (0, 0), "m2", -1, 0),
    (2, "a"): ((0, 0), "m2", -1, 0, (0, 1), "s", -1, 0),
    (2, "b"): ((0, 0), "m2", -1, 0, (-1, 1), "t", -1, 0),
    (3, "a"): ((0, -1), "d", 0, 1, (0, 0), "m2", 0, 1),
    (3, "b"): ((1, -1), "e", 0, 1, (0, 0), "m2", 0, 1),
    (4, "a"): ((0, 0), "m2", 0, 1, (0, 1), "s", 0, 1),
    (4, "b"): ((0, 0), "m2", 0, 1, (0, 1), "t", -1, 0),
    (5, "a"): ((-1, -1), "d", -1, 0, (0, 0), "m2", -1, 0),
    (5, "b"): ((0, -1), "e", -1, 0, (0, 0), "m2", -1, 0),
    (6, "a"): ((0, 0), "m2", -1, 0, (0, 1), "s", 0, 1),
    (6, "b"): ((0, 0), "m2", -1, 0, (0, 1), "t", -1, 0),
    (7, "a"): ((0, -1), "d", -1, 0, (0, 0), "m2", 0, 1),
    (7, "b"): ((0, -1), "e", 0, 1, (0, 0), "m2", 0, 1),
    (8, "a"): ((0, 0), "m2", 0, 1, (1, 1), "s", 0, 1),
    (8, "b"): ((0, 0), "m2", 0, 1, (0, 1), "t", 0, 1),
}


def j3_case(lattice: CorrectedLattice) -> Tuple[int, str]:
    neg_g = lattice.cos_gamma < 0
    neg_b = lattice.cos_beta < 0
    neg_w = lattice.rho3 == 1
    case = 1 + 4 * neg_g + 2 * neg_b + neg_w
    if not neg_w:
        sub = "a" if lattice.m1 <= lattice.m2 else "b"
    else:
        sub = "a" if lattice.m1 + lattice.m2 <= lattice.n1 else "b"
    return case, sub


def assemble_J3_case_table(lattice: CorrectedLattice, phases: BlochPhases):
    """J3 from the sixteen-entry sign/sub-case table."""
    n1, n2 = lattice.n1, lattice.n2
    m1, m2, m3 = lattice.m1, lattice.m2, lattice.m3
    splits = {"d": m2 - m1, "e": n1 - m1 + m2, "m2": m2, "s": m1 + m2, "t": m1 + m2 - n1}
    t1, t2 = phases.t1, phases.t2

    def cis(x):
        return complex(np.exp(2j * np.pi * x))

    tp, ts, ta, tb, bp, bs, ba, bb = _CASES[j3_case(lattice)]
    top = cis(tp[0] * t1 + tp[1] * t2) * shift_block(n1, splits[ts], cis(ta * t1), cis(tb * t1))
    bottom = cis(bp[0] * t1 + bp[1] * t2) * shift_block(n1, splits[bs], cis(ba * t1), cis(bb * t1))
    return block_swap(n2, m3, top, bottom).tocsr()


# ---------------------------------------------------------------------------
# Random admissible lattices with prescribed flags
# ---------------------------------------------------------------------------


def lattice_from_grid(shape: Sequence[int], m1: int, rho1: int, m2: int, rho2: int,
                      m3: int, rho3: int, l2: float, l3: float) -> CorrectedLattice:
    """Lattice whose translation vectors are exactly the given grid vectors."""
    n1, n2, n3 = (int(s) for s in shape)
    g = np.array([[n1, m1 - rho1 * n1, m2 - rho2 * n1],
                  [0, n2, m3 - rho3 * n2],
                  [0, 0, n3]], dtype=float)
    v = np.diag([1.0 / n1, l2 / n2, l3 / n3]) @ g
    return correct_lattice(spec_from_vectors(v, shape))


def random_lattice(rng: np.random.Generator, shape: Sequence[int], m1: int, rho1: int,
                   m2: int, rho2: int, m3: int, rho3: int, tries: int = 200) -> CorrectedLattice:
    want = (m1, rho1, m2, rho2, m3, rho3)
    for _ in range(tries):
        l2, l3 = rng.uniform(0.25, 0.75, size=2)
        try:
            lat = lattice_from_grid(shape, *want, l2=l2, l3=l3)
        except LatticeError:
            continue
        if (lat.m1, lat.rho1, lat.m2, lat.rho2, lat.m3, lat.rho3) == want:
            return lat
    raise LatticeError(f"could not realise flags {want} on grid {tuple(shape)}")


def flag_patterns(shape: Sequence[int]) -> Iterator[Tuple[int, int, int, int, int, int]]:
    """All canonical (m1, rho1, m2, rho2, m3, rho3) for a grid."""
    n1, n2, _ = shape
    for m1 in range(n1):
        for r1 in (0, 1):
            if m1 == 0 and r1:
                continue
            for m2 in range(n1):
                for r2 in (0, 1):
                    if m2 == 0 and r2:
                        continue
                    for m3 in range(n2):
                        for r3 in (0, 1):
                            if m3 == 0 and r3:
                                continue
                            yield (m1, r1, m2, r2, m3, r3)


def covering_lattices(rng: np.random.Generator, shape: Sequence[int], count: int = 16):
    """``count`` random lattices spanning every J3 category, both signs of
    cos(gamma) and both m-orderings of each category."""
    from .yee_operators import j3_category

    pats = list(flag_patterns(shape))
    rng.shuffle(pats)
    buckets: Dict[Tuple, list] = {}
    for p in pats:
        m1, r1, m2, r2, m3, r3 = p
        if r3 == 0:
            cat = 1 if m1 <= m2 else 2
        else:
            cat = 3 if m1 + m2 <= shape[0] else 4
        buckets.setdefault((cat, r1, r2), []).append(p)
    keys = sorted(buckets)
    chosen = []
    i = 0
    while len(chosen) < count and any(buckets.values()):
        key = keys[i % len(keys)]
        if buckets[key]:
            chosen.append(buckets[key].pop())
        i += 1
    out = []
    for p in chosen:
        lat = random_lattice(rng, shape, *p)
        assert j3_category(lat) in (1, 2, 3, 4)
        out.append(lat)
    return out

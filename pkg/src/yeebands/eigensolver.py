"""Null-space-free eigensolver.

With ``Qr = (I3 (x) T)[Pi1 Pi2]`` and ``Sigma_r = diag(sqrt(Lq), sqrt(Lq))`` the
nonzero spectrum of ``C*C e = lambda B e`` is the spectrum of

    A_r = Sigma_r Qr* B^{-1} Qr Sigma_r,

which is Hermitian positive definite.  The smallest eigenvalues are found by
block Lanczos on ``A_r^{-1} = Sigma_r^{-1} M^{-1} Sigma_r^{-1}`` where
``M = Qr* B^{-1} Qr`` is inverted by unpreconditioned conjugate gradients.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .fft_matvec import TransformPlan, apply_Q0_adjoint, apply_Qr, apply_Qr_adjoint
from .material import PermittivityField
from .spectral import SvdBlocks

log = logging.getLogger(__name__)

DEFAULT_SEED = 0x5EED


class ConvergenceError(RuntimeError):
    """Inner solve exceeded its iteration cap."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SolverConfig:
    num_eigs: int = 10
    tol_outer: float = 1e-12
    tol_inner: float = 1e-13
    max_outer: int = 150
    max_inner: int = 2000
    block_size: int = 4
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        if self.num_eigs < 1:
            raise ValueError("num_eigs must be >= 1")
        for name in ("tol_outer", "tol_inner"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v!r}")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be positive")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")


@dataclass
class EigResult:
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None
    outer_iterations: int = 0
    inner_iterations: int = 0
    residuals: np.ndarray = field(default_factory=lambda: np.empty(0))
    converged: bool = True
    ritz_vectors: Optional[np.ndarray] = None

    @property
    def omega(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.eigenvalues, 0.0)) / (2.0 * np.pi)


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NullFreeOperator:
    svd: SvdBlocks
    field: PermittivityField
    plan: TransformPlan

    @property
    def size(self) -> int:
        return 2 * self.plan.n

    def _sig(self, v: np.ndarray) -> np.ndarray:
        s = self.svd.sigma_r
        return s.reshape((-1,) + (1,) * (v.ndim - 1))

    def apply_M(self, y) -> np.ndarray:
        """``Qr* B^{-1} Qr y``."""
        return apply_Qr_adjoint(self.field.apply_B_inverse(apply_Qr(y, self.svd, self.plan)),
                                self.svd, self.plan)

    def apply_Ar(self, y) -> np.ndarray:
        y = np.asarray(y)
        if y.shape[0] != self.size:
            raise ValueError(f"expected leading dimension {self.size}, got {y.shape[0]}")
        s = self._sig(y)
        return s * self.apply_M(s * y)

    def solve_inner(self, rhs, tol: float, max_iter: int) -> Tuple[np.ndarray, int]:
        return solve_inner(self.apply_M, rhs, tol, max_iter)

    def apply_Ar_inverse(self, v, tol: float, max_iter: int) -> Tuple[np.ndarray, int]:
        s = self._sig(v)
        x, its = self.solve_inner(v / s, tol, max_iter)
        return x / s, its


def solve_inner(apply, rhs, tol: float, max_iter: int) -> Tuple[np.ndarray, int]:
    """Column-wise conjugate gradients for a Hermitian positive definite map.

    Returns the solution and the number of operator applications.  Columns
    stop updating once ``||r|| <= tol ||b||``.
    """
    b = np.asarray(rhs, dtype=complex)
    single = b.ndim == 1
    if single:
        b = b[:, None]
    x = np.zeros_like(b)
    r = b.copy()
    bnorm = np.linalg.norm(b, axis=0)
    target = tol * bnorm
    rs = np.real(np.vecdot(r, r, axis=0))
    active = np.sqrt(rs) > target
    p = r.copy()
    its = 0
    while active.any():
        if its >= max_iter:
            worst = float(np.max(np.sqrt(rs[active]) / np.where(bnorm[active] > 0, bnorm[active], 1)))
            raise ConvergenceError(
                f"CG did not reach {tol:g} in {max_iter} iterations (relative residual {worst:.3e})",
                worst, its)
        # slices avoid fancy-index copies while every column is still active
        idx = slice(None) if active.all() else np.flatnonzero(active)
        pa = p[:, idx]
        ra = r[:, idx]
        mp = apply(pa)
        alpha = rs[idx] / np.real(np.vecdot(pa, mp, axis=0))
        x[:, idx] += alpha * pa
        ra -= alpha * mp
        rs_new = np.real(np.vecdot(ra, ra, axis=0))
        beta = rs_new / rs[idx]
        p[:, idx] = ra + beta * pa
        r[:, idx] = ra
        rs[idx] = rs_new
        active[idx] = np.sqrt(rs_new) > target[idx]
        its += 1
    return (x[:, 0] if single else x), its


# ---------------------------------------------------------------------------
# Block Lanczos
# ---------------------------------------------------------------------------


def _orthonormalize_against(v: np.ndarray, basis: List[np.ndarray], rng: np.random.Generator,
                            scale: float) -> Tuple[np.ndarray, np.ndarray]:
    """Two passes of block Gram-Schmidt, then QR with breakdown repair."""
    for _ in range(2):
        for blk in basis:
            v -= blk @ (blk.conj().T @ v)
    q, r = np.linalg.qr(v)
    d = np.abs(np.diag(r))
    bad = np.flatnonzero(d <= 1e-13 * max(scale, d.max(initial=0.0), 1e-300))
    if bad.size:
        for i in bad:
            for _attempt in range(5):
                w = rng.standard_normal(v.shape[0]) + 1j * rng.standard_normal(v.shape[0])
                for _ in range(2):
                    for blk in basis:
                        w -= blk @ (blk.conj().T @ w)
                    others = np.delete(q, i, axis=1)
                    w -= others @ (others.conj().T @ w)
                nw = np.linalg.norm(w)
                if nw > 1e-8:
                    break
            else:
                nw = 0.0
            q[:, i] = w / nw if nw > 0 else 0.0
            r[i, :] = 0.0
    return q, r


# Ritz values closer than this (relative) count as one cluster.
CLUSTER_RTOL = 1e-8
# Cap on deflated restarts used to pick up extra copies of a degenerate value.
MAX_LOCK_ROUNDS = 8


def _largest_cluster(vals: np.ndarray, rtol: float = CLUSTER_RTOL) -> int:
    best = run = 1 if vals.size else 0
    for a, b in zip(vals[:-1], vals[1:]):
        run = run + 1 if abs(a - b) <= rtol * max(abs(a), abs(b)) else 1
        best = max(best, run)
    return best


def block_lanczos_largest(apply, size: int, count: int, tol: float, block: int,
                          max_steps: int, seed: int, want_vectors: bool = False):
    """Largest eigenpairs of a Hermitian positive map by block Lanczos with
    full reorthogonalization.

    A block of width b sees at most b copies of a repeated eigenvalue, so
    whenever a converged cluster is at least b wide the run is repeated on
    the complement of the converged vectors and any larger values found are
    merged in.

    Returns ``(values (descending), vectors or None, residual norms, steps,
    converged)``; convergence requires ``||A x - mu x|| <= tol * mu`` for the
    ``count`` leading Ritz pairs.
    """
    block = max(1, min(block, size))
    vals, vecs, res, steps, ok = _block_lanczos(apply, size, count, tol, block, max_steps, seed,
                                                 True, None)
    rounds = 0
    while (ok and rounds < MAX_LOCK_ROUNDS and _largest_cluster(vals) >= block
           and vecs.shape[1] + block <= size):
        rounds += 1
        v2, x2, r2, s2, ok2 = _block_lanczos(apply, size, count, tol, block, max_steps,
                                             seed + rounds, True, vecs)
        steps += s2
        if not ok2:
            ok = False
            break
        if v2.size == 0 or v2[0] <= vals[-1] * (1.0 + CLUSTER_RTOL):
            break
        allv = np.concatenate([vals, v2])
        order = np.argsort(allv)[::-1][:count]
        vals = allv[order]
        vecs = np.concatenate([vecs, x2], axis=1)[:, order]
        res = np.concatenate([res, r2])[order]
    return vals, (vecs if want_vectors else None), res, steps, ok


def _block_lanczos(apply, size: int, count: int, tol: float, block: int, max_steps: int,
                   seed: int, want_vectors: bool, deflate: Optional[np.ndarray]):
    rng = np.random.default_rng(seed)
    locked = [] if deflate is None else [deflate]
    free = size - (0 if deflate is None else deflate.shape[1])
    count = min(count, free)
    v0 = rng.standard_normal((size, block)) + 1j * rng.standard_normal((size, block))
    for _ in range(2):
        for blk in locked:
            v0 -= blk @ (blk.conj().T @ v0)
    q, _ = np.linalg.qr(v0)
    basis = [q]
    alphas: List[np.ndarray] = []
    betas: List[np.ndarray] = []
    steps = 0
    vals = np.empty(0)
    s = None
    resid = np.full(count, np.inf)
    converged = False
    scale = 0.0
    max_steps = max(1, min(max_steps, -(-free // block)))
    while steps < max_steps:
        vj = basis[-1]
        w = apply(vj)
        a = vj.conj().T @ w
        a = 0.5 * (a + a.conj().T)
        w = w - vj @ a
        if len(basis) > 1:
            w = w - basis[-2] @ betas[-1].conj().T
        scale = max(scale, float(np.abs(a).max()))
        alphas.append(a)
        steps += 1
        dim = steps * block
        q_next, bmat = _orthonormalize_against(w, locked + basis, rng, scale)
        tmat = np.zeros((dim, dim), dtype=complex)
        for i, ai in enumerate(alphas):
            tmat[i * block:(i + 1) * block, i * block:(i + 1) * block] = ai
        for i, bi in enumerate(betas):
            tmat[(i + 1) * block:(i + 2) * block, i * block:(i + 1) * block] = bi
            tmat[i * block:(i + 1) * block, (i + 1) * block:(i + 2) * block] = bi.conj().T
        evals, evecs = np.linalg.eigh(tmat)
        order = np.argsort(evals)[::-1]
        vals = evals[order]
        s = evecs[:, order]
        m = min(count, dim)
        tail = s[(steps - 1) * block:dim, :m]
        resid = np.linalg.norm(bmat @ tail, axis=0)
        if m == count and np.all(resid <= tol * np.abs(vals[:m])):
            converged = True
            break
        if dim + block > free:
            # Krylov space exhausted; the Ritz values are exact.
            converged = m == count
            resid = np.zeros(m)
            break
        basis.append(q_next)
        betas.append(bmat)
    m = min(count, vals.shape[0])
    vecs = None
    if want_vectors:
        vbig = np.concatenate(basis[:steps], axis=1)
        vecs = vbig @ s[:, :m]
    return vals[:m], vecs, resid[:m], steps, converged


# Lambda_q entries below this fraction of the maximum are solved separately.
SPLIT_RATIO = 1e-8


def split_indices(svd: SvdBlocks, ratio: float = SPLIT_RATIO) -> np.ndarray:
    """Indices of y (length 2n) whose singular value is tiny relative to the rest.

    These occur only next to Gamma.  Keeping them in the Lanczos operator
    lets the inexact inner solves, amplified by ``Sigma_r^{-1}``, swamp the
    regular part of the spectrum.
    """
    q = svd.lambda_q
    small = np.flatnonzero(q < ratio * float(q.max()))
    return np.concatenate([small, small + q.shape[0]])


def inverse_lanczos(op: NullFreeOperator, cfg: SolverConfig, want_vectors: bool = False) -> EigResult:
    """Smallest eigenvalues of ``A_r`` via Lanczos on its inverse.

    Near Gamma the few tiny singular values S are split off: the regular
    block ``Sigma_R M_RR Sigma_R`` goes to Lanczos and the S block is the
    Schur complement ``sigma_S (M^{-1})_SS^{-1} sigma_S``.  Both neglect
    couplings of relative size ``sigma_S^2``.
    """
    split = split_indices(op.svd)
    if split.size == 0:
        return _inverse_lanczos_full(op, cfg, want_vectors)
    return _inverse_lanczos_split(op, cfg, split, want_vectors)


def _inverse_lanczos_full(op: NullFreeOperator, cfg: SolverConfig, want_vectors: bool) -> EigResult:
    counter = {"inner": 0}

    def apply_inv(v):
        x, its = op.apply_Ar_inverse(v, cfg.tol_inner, cfg.max_inner)
        counter["inner"] += its
        return x

    mu, vecs, res, steps, ok = block_lanczos_largest(
        apply_inv, op.size, cfg.num_eigs, cfg.tol_outer, cfg.block_size,
        cfg.max_outer, cfg.seed, want_vectors,
    )
    lam = 1.0 / mu
    order = np.argsort(lam)
    lam = lam[order]
    rel_res = (res / np.abs(mu))[order]
    y = vecs[:, order] if vecs is not None else None
    return _finish(op, lam, y, rel_res, steps, counter["inner"], ok)


def _inverse_lanczos_split(op: NullFreeOperator, cfg: SolverConfig, split: np.ndarray,
                           want_vectors: bool) -> EigResult:
    size = op.size
    sig = op.svd.sigma_r
    keep = np.ones(size, dtype=bool)
    keep[split] = False
    sig_r = sig[keep]
    sig_s = sig[split]
    counter = {"inner": 0}

    def apply_M_rr(x):
        ext = np.zeros((size,) + x.shape[1:], dtype=complex)
        ext[keep] = x
        return op.apply_M(ext)[keep]

    def apply_inv(v):
        s = sig_r.reshape((-1,) + (1,) * (v.ndim - 1))
        x, its = solve_inner(apply_M_rr, v / s, cfg.tol_inner, cfg.max_inner)
        counter["inner"] += its
        return x / s

    n_regular = max(cfg.num_eigs - split.size, 1)
    mu, vecs, res, steps, ok = block_lanczos_largest(
        apply_inv, int(keep.sum()), n_regular, cfg.tol_outer, cfg.block_size,
        cfg.max_outer, cfg.seed, want_vectors,
    )
    lam_r = 1.0 / mu
    res_r = res / np.abs(mu)

    # Schur complement on the split modes.
    e_s = np.zeros((size, split.size), dtype=complex)
    e_s[split, np.arange(split.size)] = 1.0
    g, its = solve_inner(op.apply_M, e_s, cfg.tol_inner, cfg.max_inner)
    counter["inner"] += its
    g_ss = g[split]
    g_ss = 0.5 * (g_ss + g_ss.conj().T)
    g_ss_inv = np.linalg.inv(g_ss)
    h = sig_s[:, None] * g_ss_inv * sig_s[None, :]
    lam_s, v_s = np.linalg.eigh(0.5 * (h + h.conj().T))

    lam = np.concatenate([lam_s, lam_r])
    rel_res = np.concatenate([np.zeros(lam_s.shape[0]), res_r])
    y = None
    if want_vectors:
        y_split = np.zeros((size, lam_s.shape[0]), dtype=complex)
        y_split[split] = v_s
        y_split[keep] = (g[keep] @ (g_ss_inv @ (sig_s[:, None] * v_s))) / sig_r[:, None]
        y_reg = np.zeros((size, lam_r.shape[0]), dtype=complex)
        y_reg[keep] = vecs
        ext = np.zeros_like(y_reg)
        ext[keep] = sig_r[:, None] * vecs
        y_reg[split] = sig_s[:, None] * op.apply_M(ext)[split] / lam_r[None, :]
        y = np.concatenate([y_split, y_reg], axis=1)
        y /= np.linalg.norm(y, axis=0)
    order = np.argsort(lam)[: cfg.num_eigs]
    return _finish(op, lam[order], None if y is None else y[:, order], rel_res[order],
                   steps, counter["inner"], ok)


def _finish(op, lam, y, rel_res, steps, inner, ok) -> EigResult:
    fields = None
    if y is not None:
        fields = np.stack([recover_field(y[:, i], lam[i], op) for i in range(y.shape[1])], axis=1)
    if not ok:
        log.warning("inverse Lanczos stopped after %d block steps without full convergence", steps)
    return EigResult(eigenvalues=lam, eigenvectors=fields, outer_iterations=steps,
                     inner_iterations=inner, residuals=rel_res, converged=ok,
                     ritz_vectors=y)


def recover_field(y, lam: float, op: NullFreeOperator) -> np.ndarray:
    """``e = B^{-1} Qr Sigma_r y`` normalised to unit length."""
    y = np.asarray(y)
    e = op.field.apply_B_inverse(apply_Qr(op.svd.sigma_r * y, op.svd, op.plan))
    return e / np.linalg.norm(e)


def divergence_residual(e, op: NullFreeOperator) -> float:
    """``||Q0* B e|| / ||B e||``: zero for discretely divergence-free fields."""
    be = op.field.apply_B(e)
    return float(np.linalg.norm(apply_Q0_adjoint(be, op.svd, op.plan)) / np.linalg.norm(be))


def estimate_condition_M(op: NullFreeOperator, steps: int = 80, seed: int = DEFAULT_SEED) -> Tuple[float, float]:
    """Extreme Ritz values (min, max) of ``M = Qr* B^{-1} Qr`` from plain Lanczos."""
    rng = np.random.default_rng(seed)
    size = op.size
    v = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    v /= np.linalg.norm(v)
    basis = [v]
    alpha, beta = [], []
    prev = np.zeros_like(v)
    b = 0.0
    for _ in range(min(steps, size)):
        w = op.apply_M(v) - b * prev
        a = float(np.real(np.vdot(v, w)))
        w -= a * v
        vb = np.stack(basis, axis=1)
        for _ in range(2):
            w -= vb @ (vb.conj().T @ w)
        alpha.append(a)
        b = float(np.linalg.norm(w))
        if b <= 1e-14 * abs(a):
            break
        beta.append(b)
        prev, v = v, w / b
        basis.append(v)
    k = len(alpha)
    t = np.diag(alpha) + np.diag(beta[:k - 1], 1) + np.diag(beta[:k - 1], -1)
    ev = np.linalg.eigvalsh(t)
    return float(ev[0]), float(ev[-1])

"""FFT-based products with T, T* and the range basis Qr = (I3 (x) T)[Pi1 Pi2].

Each angle splits into a DFT part and a diagonal part, so ``T* p`` is three
passes of "diagonal scale, then 1D DFT" along x, y and z in that order, and
``T q`` runs the conjugate passes in reverse.  The 1D transforms are left
unnormalised; the ``1/sqrt(n)`` of T is folded into the x-axis phase table.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np
import scipy.fft as sfft

from .spectral import SpectralBasis, SvdBlocks

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class TransformPlan:
    """Per-k phase tables.

    ``d_a1[I] = exp(-i 2 pi I t1 / n1)``,
    ``d_a2[i, J] = exp(-i 2 pi J g2[i] / n2)``,
    ``d_a3[i, j, K] = exp(-i 2 pi K g3[i, j] / n3)``.
    """

    shape: Tuple[int, int, int]
    d_a1: np.ndarray
    d_a2: np.ndarray
    d_a3: np.ndarray
    workers: int = 1

    @classmethod
    def build(cls, basis: SpectralBasis, workers: int = 1) -> "TransformPlan":
        n1, n2, n3 = basis.shape
        d_a1 = np.exp(-1j * TWO_PI * np.arange(n1) * basis.t1 / n1)
        d_a2 = np.exp(-1j * TWO_PI * np.arange(n2)[None, :] * basis.g2[:, None] / n2)
        d_a3 = np.exp(-1j * TWO_PI * np.arange(n3)[None, None, :] * basis.g3[:, :, None] / n3)
        return cls(basis.shape, d_a1, d_a2, d_a3, workers)

    @property
    def n(self) -> int:
        n1, n2, n3 = self.shape
        return n1 * n2 * n3

    def _check(self, v: np.ndarray) -> None:
        if v.shape[0] != self.n:
            raise ValueError(f"expected leading dimension {self.n}, got {v.shape[0]}")

    def _fft(self, x: np.ndarray, axis: int) -> np.ndarray:
        # unscaled sum of exp(-i 2 pi jk / m)
        return sfft.fft(x, axis=axis, norm="backward", overwrite_x=True, workers=self.workers)

    def _ifft(self, x: np.ndarray, axis: int) -> np.ndarray:
        # unscaled sum of exp(+i 2 pi jk / m)
        return sfft.ifft(x, axis=axis, norm="forward", overwrite_x=True, workers=self.workers)

    @cached_property
    def _tables_grid(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Phase tables laid out to match a (K, J, I) array, with 1/sqrt(n) in the first."""
        return ((self.d_a1 / np.sqrt(self.n))[None, None, :],
                np.ascontiguousarray(self.d_a2.T)[None, :, :],
                np.ascontiguousarray(self.d_a3.transpose(2, 1, 0)))

    @cached_property
    def _tables_grid_conj(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.conj(t) for t in self._tables_grid)

    def apply_T_adjoint(self, p) -> np.ndarray:
        p = np.asarray(p)
        self._check(p)
        n1, n2, n3 = self.shape
        tail = p.shape[1:]
        d1, d2, d3 = (t.reshape(t.shape + (1,) * len(tail)) for t in self._tables_grid)
        x = p.reshape((n3, n2, n1) + tail) * d1
        x = self._fft(x, 2)
        x *= d2
        x = self._fft(x, 1)
        x *= d3
        x = self._fft(x, 0)
        # (k, j, i) -> spectral order (i, j, k)
        return np.ascontiguousarray(x.transpose((2, 1, 0) + tuple(range(3, x.ndim)))).reshape(p.shape)

    def apply_T(self, q) -> np.ndarray:
        q = np.asarray(q)
        self._check(q)
        n1, n2, n3 = self.shape
        tail = q.shape[1:]
        d1, d2, d3 = (t.reshape(t.shape + (1,) * len(tail)) for t in self._tables_grid_conj)
        x = q.reshape((n1, n2, n3) + tail)
        x = np.array(x.transpose((2, 1, 0) + tuple(range(3, x.ndim))), dtype=complex)
        x = self._ifft(x, 0)
        x *= d3
        x = self._ifft(x, 1)
        x *= d2
        x = self._ifft(x, 2)
        x *= d1
        return x.reshape(q.shape)


def _as_components(v: np.ndarray, n: int) -> np.ndarray:
    """(3n, ...) -> (n, 3, ...) so three T applies batch together."""
    tail = v.shape[1:]
    return np.moveaxis(v.reshape((3, n) + tail), 0, 1)


def _from_components(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    tail = x.shape[2:]
    return np.ascontiguousarray(np.moveaxis(x, 1, 0)).reshape((3 * n,) + tail)


def _expand(b: np.ndarray, tail) -> np.ndarray:
    return b.reshape(b.shape + (1,) * len(tail))


def apply_Qr(y, svd: SvdBlocks, plan: TransformPlan) -> np.ndarray:
    """``(I3 (x) T) [Pi1 Pi2] y`` for y of length 2n (optionally batched)."""
    y = np.asarray(y)
    n = plan.n
    if y.shape[0] != 2 * n:
        raise ValueError(f"expected leading dimension {2 * n}, got {y.shape[0]}")
    tail = y.shape[1:]
    _, pi1, pi2 = svd.modal
    z = _expand(pi1, tail) * y[:n, None]
    z += _expand(pi2, tail) * y[n:, None]
    return _from_components(plan.apply_T(z))


def apply_Qr_adjoint(v, svd: SvdBlocks, plan: TransformPlan) -> np.ndarray:
    v = np.asarray(v)
    n = plan.n
    if v.shape[0] != 3 * n:
        raise ValueError(f"expected leading dimension {3 * n}, got {v.shape[0]}")
    tail = v.shape[1:]
    _, c1, c2 = svd.modal_conj
    z = plan.apply_T_adjoint(_as_components(v, n))          # (n, 3, ...)
    out = np.empty((2 * n,) + tail, dtype=complex)
    out[:n] = np.einsum("nc,nc...->n...", c1, z)
    out[n:] = np.einsum("nc,nc...->n...", c2, z)
    return out


def apply_Q0(y, svd: SvdBlocks, plan: TransformPlan) -> np.ndarray:
    y = np.asarray(y)
    tail = y.shape[1:]
    z = _expand(svd.modal[0], tail) * y[:, None]
    return _from_components(plan.apply_T(z))


def apply_Q0_adjoint(v, svd: SvdBlocks, plan: TransformPlan) -> np.ndarray:
    v = np.asarray(v)
    z = plan.apply_T_adjoint(_as_components(v, plan.n))
    return np.einsum("nc,nc...->n...", svd.modal_conj[0], z)

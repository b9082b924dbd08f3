"""Permittivity sampling on Yee edge centres.

Component l of the electric field lives at the midpoint of the grid edge
along axis l, e.g. ``((I + 1/2) dx, J dy, K dz)`` for E1.  B is the diagonal
of relative permittivities sampled there (point sampling, no averaging).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .lattice import CorrectedLattice


@dataclass(frozen=True)
class Sphere:
    center: Tuple[float, float, float]
    radius: float
    eps: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")
        _check_eps(self.eps)

    def contains(self, x: np.ndarray) -> np.ndarray:
        d = x - np.asarray(self.center, dtype=float)
        return np.einsum("...i,...i->...", d, d) <= self.radius**2

    @property
    def periodic(self) -> bool:
        return False


@dataclass(frozen=True)
class Cylinder:
    """Finite cylinder from ``start`` to ``end`` with flat caps."""

    start: Tuple[float, float, float]
    end: Tuple[float, float, float]
    radius: float
    eps: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ValueError("cylinder radius must be positive")
        if np.allclose(self.start, self.end):
            raise ValueError("cylinder axis has zero length")
        _check_eps(self.eps)

    def contains(self, x: np.ndarray) -> np.ndarray:
        a = np.asarray(self.start, dtype=float)
        axis = np.asarray(self.end, dtype=float) - a
        d = x - a
        t = d @ axis / (axis @ axis)
        radial = d - t[..., None] * axis
        r2 = np.einsum("...i,...i->...", radial, radial)
        return (t >= 0.0) & (t <= 1.0) & (r2 <= self.radius**2)

    @property
    def periodic(self) -> bool:
        return False


@dataclass(frozen=True)
class Gyroid:
    """``sin X cos Y + sin Y cos Z + sin Z cos X > level`` with ``X = 2 pi x / period``."""

    level: float
    eps: float
    period: float = 1.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.level):
            raise ValueError("gyroid level must be finite")
        if not self.period > 0:
            raise ValueError("gyroid period must be positive")
        _check_eps(self.eps)

    def contains(self, x: np.ndarray) -> np.ndarray:
        s = 2.0 * np.pi * x / self.period
        X, Y, Z = s[..., 0], s[..., 1], s[..., 2]
        g = np.sin(X) * np.cos(Y) + np.sin(Y) * np.cos(Z) + np.sin(Z) * np.cos(X)
        return g > self.level

    @property
    def periodic(self) -> bool:
        return True


Shape = Union[Sphere, Cylinder, Gyroid]

FRAMES = ("transformed", "conventional")


def _check_eps(eps: float) -> None:
    if not (np.isfinite(eps) and eps >= 1.0):
        raise ValueError(f"relative permittivity must be >= 1, got {eps!r}")


@dataclass(frozen=True)
class Geometry:
    """Shapes (first match wins) over a uniform background.

    ``frame`` says which Cartesian frame shape coordinates refer to: the
    upper-triangular frame of the snapped lattice, or the frame of the
    standard primitive vectors of the Bravais class.
    """

    shapes: Tuple[Shape, ...] = ()
    eps_out: float = 1.0
    frame: str = "transformed"

    def __post_init__(self) -> None:
        _check_eps(self.eps_out)
        if self.frame not in FRAMES:
            raise ValueError(f"frame must be one of {FRAMES}, got {self.frame!r}")

    def with_eps(self, eps: float) -> "Geometry":
        """Copy with every shape's permittivity replaced."""
        from dataclasses import replace

        return replace(self, shapes=tuple(replace(s, eps=eps) for s in self.shapes))


@dataclass(frozen=True, eq=False)
class PermittivityField:
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate([self.b1, self.b2, self.b3])

    @property
    def eps_min(self) -> float:
        return float(min(self.b1.min(), self.b2.min(), self.b3.min()))

    @property
    def eps_max(self) -> float:
        return float(max(self.b1.max(), self.b2.max(), self.b3.max()))

    @property
    def kappa(self) -> float:
        """Condition number of B (and of B^-1)."""
        return self.eps_max / self.eps_min

    @property
    def is_uniform(self) -> bool:
        return self.eps_min == self.eps_max

    def apply_B(self, v) -> np.ndarray:
        v = np.asarray(v)
        s = self.stacked
        return v * s.reshape((-1,) + (1,) * (v.ndim - 1))

    def apply_B_inverse(self, v) -> np.ndarray:
        v = np.asarray(v)
        s = self.stacked
        if v.shape[0] != s.shape[0]:
            raise ValueError(f"expected leading dimension {s.shape[0]}, got {v.shape[0]}")
        return v / s.reshape((-1,) + (1,) * (v.ndim - 1))

    @classmethod
    def uniform(cls, n: int, eps: float = 1.0) -> "PermittivityField":
        full = np.full(n, float(eps))
        return cls(full, full.copy(), full.copy())


def edge_points(lattice: CorrectedLattice, component: int) -> np.ndarray:
    """(n, 3) Cartesian sample points of field component ``component``."""
    n1, n2, n3 = lattice.shape
    K, J, I = np.meshgrid(np.arange(n3), np.arange(n2), np.arange(n1), indexing="ij")
    idx = np.stack([I.ravel(), J.ravel(), K.ravel()], axis=1).astype(float)
    idx[:, component] += 0.5
    return idx * np.asarray(lattice.spacings)


_NEIGHBOURS = np.array(
    [(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1)], dtype=float
)


def _eps_at(points: np.ndarray, geom: Geometry, lattice: CorrectedLattice,
            to_frame: Optional[np.ndarray]) -> np.ndarray:
    a = lattice.vectors
    frac = np.linalg.solve(a, points.T).T
    reduced = (frac - np.floor(frac)) @ a.T
    out = np.full(points.shape[0], np.nan)
    for shape in geom.shapes:
        todo = np.isnan(out)
        if not todo.any():
            break
        if shape.periodic:
            x = points[todo]
            if to_frame is not None:
                x = x @ to_frame.T
            hit = shape.contains(x)
        else:
            base = reduced[todo]
            hit = np.zeros(base.shape[0], dtype=bool)
            for d in _NEIGHBOURS:
                x = base + a @ d
                if to_frame is not None:
                    x = x @ to_frame.T
                hit |= shape.contains(x)
        idx = np.flatnonzero(todo)[hit]
        out[idx] = shape.eps
    out[np.isnan(out)] = geom.eps_out
    return out


def frame_map(lattice: CorrectedLattice, primitive: Optional[np.ndarray], frame: str) -> Optional[np.ndarray]:
    """Linear map from the snapped frame to the geometry frame."""
    if frame == "transformed":
        return None
    if primitive is None:
        raise ValueError("conventional frame needs the standard primitive vectors")
    return np.asarray(primitive, dtype=float) @ np.linalg.inv(lattice.vectors)


def sample_B(geom: Geometry, lattice: CorrectedLattice,
             primitive: Optional[np.ndarray] = None, chunk: int = 1 << 16) -> PermittivityField:
    """Sample the permittivity at the three families of edge centres.

    Args:
        geom: shapes and background.
        lattice: snapped lattice.
        primitive: standard primitive vectors (columns), needed only for the
            conventional frame.
        chunk: number of points evaluated per vectorised batch.
    """
    to_frame = frame_map(lattice, primitive, geom.frame)
    comps = []
    for c in range(3):
        pts = edge_points(lattice, c)
        if not geom.shapes:
            comps.append(np.full(pts.shape[0], float(geom.eps_out)))
            continue
        vals = np.empty(pts.shape[0])
        for s in range(0, pts.shape[0], chunk):
            vals[s:s + chunk] = _eps_at(pts[s:s + chunk], geom, lattice, to_frame)
        comps.append(vals)
    return PermittivityField(*comps)

"""Lattice geometry on a uniform grid.

Raw primitive constants (three lengths, three angles) are snapped so that
the lattice translation vectors land on grid points, then rotated into an
upper-triangular frame::

    a1 = (l1, 0, 0)
    a2 = (m1 dx - rho1 l1, l2, 0)
    a3 = (m2 dx - rho2 l1, m3 dy - rho3 l2, l3)

The module also builds the reciprocal cell, the Brillouin-zone corner
tables of the 14 Bravais classes and sampled k-paths.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

# Quotients within this distance of an integer are treated as exact, so an
# already grid-aligned angle is returned unchanged.
_INTEGRAL_TOL = 1e-9


class LatticeError(ValueError):
    """Raised for inadmissible or degenerate lattice input."""


class BravaisClass(str, enum.Enum):
    CUBIC = "cubic"
    FCC = "fcc"
    BCC = "bcc"
    TETRAGONAL = "tetragonal"
    BCT = "bct"
    ORTHORHOMBIC = "orthorhombic"
    ORCC = "orcc"
    ORCF = "orcf"
    ORCI = "orci"
    HEXAGONAL = "hexagonal"
    RHOMBOHEDRAL = "rhombohedral"
    MONOCLINIC = "monoclinic"
    MCLC = "mclc"
    TRICLINIC = "triclinic"


_CLASS_ALIASES = {
    "sc": BravaisClass.CUBIC,
    "cub": BravaisClass.CUBIC,
    "simple_cubic": BravaisClass.CUBIC,
    "tet": BravaisClass.TETRAGONAL,
    "orc": BravaisClass.ORTHORHOMBIC,
    "hex": BravaisClass.HEXAGONAL,
    "rhl": BravaisClass.RHOMBOHEDRAL,
    "mcl": BravaisClass.MONOCLINIC,
    "tri": BravaisClass.TRICLINIC,
}


def parse_bravais_class(name: str) -> BravaisClass:
    key = name.strip().lower()
    if key in _CLASS_ALIASES:
        return _CLASS_ALIASES[key]
    try:
        return BravaisClass(key)
    except ValueError:
        valid = sorted({c.value for c in BravaisClass} | set(_CLASS_ALIASES))
        raise LatticeError(f"unknown Bravais class {name!r}; expected one of {valid}") from None


# ---------------------------------------------------------------------------
# Raw input
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticeSpec:
    """Raw lattice constants and grid size.

    Angles are in radians: ``theta_gamma_raw`` is between a1 and a2,
    ``theta_beta_raw`` between a1 and a3, ``theta_alpha_raw`` between a2
    and a3.
    """

    len_a1: float
    len_a2: float
    len_a3: float
    theta_gamma_raw: float
    theta_beta_raw: float
    theta_alpha_raw: float
    n1: int
    n2: int
    n3: int
    bravais_class: BravaisClass = BravaisClass.TRICLINIC

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        for name in ("len_a1", "len_a2", "len_a3"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise LatticeError(f"{name} must be a positive finite length, got {value!r}")
        for name in ("n1", "n2", "n3"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise LatticeError(f"{name} must be a positive integer, got {value!r}")
        for name in ("theta_gamma_raw", "theta_beta_raw", "theta_alpha_raw"):
            value = getattr(self, name)
            if not (0.0 < value < math.pi):
                raise LatticeError(f"{name} must lie strictly inside (0, pi), got {value!r}")
        if self.len_a1 < self.len_a2 or self.len_a1 < self.len_a3:
            raise LatticeError(
                "len_a1 must be the longest primitive length "
                f"(got {self.len_a1}, {self.len_a2}, {self.len_a3})"
            )
        cg = math.cos(self.theta_gamma_raw)
        sg = math.sin(self.theta_gamma_raw)
        cb = math.cos(self.theta_beta_raw)
        ca = math.cos(self.theta_alpha_raw)
        if not self.len_a2 * sg > self.len_a3 * abs(ca - cg * cb) / sg:
            raise LatticeError(
                "admissibility violated: need len_a2*sin(gamma) > "
                "len_a3*|cos(alpha) - cos(gamma)cos(beta)|/sin(gamma)"
            )
        gram = 1.0 - cg * cg - cb * cb - ca * ca + 2.0 * cg * cb * ca
        if gram <= 0.0:
            raise LatticeError("angles do not describe a non-degenerate cell")

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (int(self.n1), int(self.n2), int(self.n3))


# ---------------------------------------------------------------------------
# Snapping
# ---------------------------------------------------------------------------


def _round_half_up(q: float) -> int:
    return int(math.floor(q + 0.5))


def _is_integral(q: float) -> bool:
    return abs(q - round(q)) <= _INTEGRAL_TOL * max(1.0, abs(q))


def _snap_against_a1(length: float, theta: float, len_a1: float, n1: int) -> Tuple[int, float]:
    """Shared rule for m1 (with a2, gamma) and m2 (with a3, beta)."""
    dx = len_a1 / n1
    c_raw = math.cos(theta)
    if theta <= math.pi / 2:
        q = length * c_raw / dx
        m = _round_half_up(q)
        c = c_raw if _is_integral(q) else m * dx / length
        if m == 0:
            c = 0.0
    else:
        q = (len_a1 + length * c_raw) / dx
        m = _round_half_up(q)
        c = c_raw if _is_integral(q) else (m * dx - len_a1) / length
        if m >= n1:
            # Snapped onto the right angle; keep the acute representation.
            m, c = 0, 0.0
    if abs(c) >= 1.0:
        raise LatticeError("geometry-degenerate: snapped angle collapses the cell (|cos| >= 1)")
    return m, c


def snap_angle_gamma(spec: LatticeSpec) -> Tuple[int, float, float]:
    """Snap the a1-a2 angle so that a2 ends on an x-grid line.

    Returns:
        ``(m1, cos_gamma, sin_gamma)``.
    """
    m1, cg = _snap_against_a1(spec.len_a2, spec.theta_gamma_raw, spec.len_a1, spec.n1)
    return m1, cg, math.sqrt(1.0 - cg * cg)


def snap_angle_beta(spec: LatticeSpec, dx: float) -> Tuple[int, float]:
    """Snap the a1-a3 angle. ``dx`` must equal ``len_a1 / n1``."""
    if not math.isclose(dx, spec.len_a1 / spec.n1, rel_tol=1e-14):
        raise LatticeError("dx is inconsistent with len_a1 / n1")
    return _snap_against_a1(spec.len_a3, spec.theta_beta_raw, spec.len_a1, spec.n1)


def snap_angle_alpha(
    spec: LatticeSpec, dy: float, cos_gamma: float, sin_gamma: float, cos_beta: float
) -> Tuple[int, float]:
    """Snap the a2-a3 angle so that a3 ends on a y-grid line.

    Returns:
        ``(m3, cos_alpha)``.
    """
    a2, a3 = spec.len_a2, spec.len_a3
    ca_raw = math.cos(spec.theta_alpha_raw)
    w = ca_raw - cos_gamma * cos_beta
    if w >= 0.0:
        q = a3 * w / (dy * sin_gamma)
        m3 = _round_half_up(q)
        if _is_integral(q):
            ca = ca_raw
        else:
            ca = m3 * dy * sin_gamma / a3 + cos_gamma * cos_beta
        if m3 == 0:
            ca = cos_gamma * cos_beta
    else:
        q = (a2 * sin_gamma**2 + a3 * w) / (dy * sin_gamma)
        m3 = _round_half_up(q)
        if _is_integral(q):
            ca = ca_raw
        else:
            ca = (m3 * dy * sin_gamma - a2 * sin_gamma**2) / a3 + cos_gamma * cos_beta
        if m3 >= spec.n2:
            m3 = 0
            ca = cos_gamma * cos_beta
    l2 = a2 * sin_gamma
    # m3 = n2 puts a3's y-component exactly on l2; rounding must not let it through
    if not l2 - a3 * abs(ca - cos_gamma * cos_beta) / sin_gamma > _INTEGRAL_TOL * l2:
        raise LatticeError(
            "admissibility violated after snapping: len_a2*sin(gamma) > "
            "len_a3*|cos(alpha) - cos(gamma)cos(beta)|/sin(gamma) fails"
        )
    gram = 1.0 - cos_gamma**2 - cos_beta**2 - ca**2 + 2.0 * cos_gamma * cos_beta * ca
    if gram <= 0.0:
        raise LatticeError("geometry-degenerate: snapped angles give a flat cell")
    return m3, ca


# ---------------------------------------------------------------------------
# Corrected lattice
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CorrectedLattice:
    """Grid-aligned lattice in the upper-triangular frame."""

    spec: LatticeSpec
    m1: int
    m2: int
    m3: int
    cos_gamma: float
    sin_gamma: float
    cos_beta: float
    cos_alpha: float
    rho1: int
    rho2: int
    rho3: int
    rho4: int
    rho5: int
    psi1: int
    psi2: int
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    l1: float
    l2: float
    l3: float
    dx: float
    dy: float
    dz: float

    @property
    def n1(self) -> int:
        return int(self.spec.n1)

    @property
    def n2(self) -> int:
        return int(self.spec.n2)

    @property
    def n3(self) -> int:
        return int(self.spec.n3)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.spec.shape

    @property
    def n(self) -> int:
        return self.n1 * self.n2 * self.n3

    @property
    def vectors(self) -> np.ndarray:
        """3x3 matrix with columns a1, a2, a3."""
        return np.column_stack([self.a1, self.a2, self.a3])

    @property
    def grid_vectors(self) -> np.ndarray:
        """Integer translation vectors in grid units (columns)."""
        n1, n2, n3 = self.shape
        return np.array(
            [
                [n1, self.m1 - self.rho1 * n1, self.m2 - self.rho2 * n1],
                [0, n2, self.m3 - self.rho3 * n2],
                [0, 0, n3],
            ],
            dtype=np.int64,
        )

    @property
    def spacings(self) -> Tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)

    @property
    def branch(self) -> int:
        """0 when cos(alpha) - cos(gamma)cos(beta) >= 0, else 1."""
        return self.rho3

    def flags(self) -> Dict[str, int]:
        return {
            "m1": self.m1, "m2": self.m2, "m3": self.m3,
            "rho1": self.rho1, "rho2": self.rho2, "rho3": self.rho3,
            "rho4": self.rho4, "rho5": self.rho5,
            "psi1": self.psi1, "psi2": self.psi2,
        }

    def scaled(self, factor: float) -> "CorrectedLattice":
        """Same lattice with every length multiplied by ``factor``."""
        s = self.spec
        return correct_lattice(
            LatticeSpec(
                s.len_a1 * factor, s.len_a2 * factor, s.len_a3 * factor,
                s.theta_gamma_raw, s.theta_beta_raw, s.theta_alpha_raw,
                s.n1, s.n2, s.n3, s.bravais_class,
            )
        )


def _indicator(x: float) -> int:
    return 1 if x > 0.0 else 0


def lattice_flags(
    n1: int, m1: int, m2: int, cos_gamma: float, cos_beta: float, cos_alpha: float
) -> Dict[str, int]:
    """rho1..rho5, psi1, psi2 from corrected cosines and m-values.

    The ceilings of the defining expressions are used as 0/1 indicators of
    positivity.
    """
    rho1 = _indicator(-cos_gamma)
    rho2 = _indicator(-cos_beta)
    w = cos_alpha - cos_gamma * cos_beta
    rho3 = _indicator(-w)
    rho4 = _indicator(cos_gamma * cos_beta * (cos_gamma * cos_beta - cos_alpha))
    rho5 = _indicator(cos_beta)
    s1 = rho1 * n1 - m1
    s2 = rho2 * n1 - m2
    psi1 = int(rho3 == 0 and (s2 - s1) > 0)
    # At m1 + m2 = n1 with exactly one obtuse in-plane angle the strict
    # inequality alone gives the wrong J3 boundary phase; that tie counts as 1.
    tie = (s1 + s2) == 0 and rho1 != rho2
    psi2 = int(rho3 == 1 and ((s1 + s2) > 0 or tie))
    return {"rho1": rho1, "rho2": rho2, "rho3": rho3, "rho4": rho4,
            "rho5": rho5, "psi1": psi1, "psi2": psi2}


def build_translation_vectors(
    spec: LatticeSpec, cos_gamma: float, sin_gamma: float, cos_beta: float, cos_alpha: float
) -> np.ndarray:
    """Columns a1, a2, a3 of the upper-triangular frame from the corrected angles."""
    gram = 1.0 - cos_gamma**2 - cos_beta**2 - cos_alpha**2 + 2.0 * cos_gamma * cos_beta * cos_alpha
    if gram <= 0.0 or sin_gamma <= 0.0:
        raise LatticeError("degenerate cell: nonpositive diagonal in the translation matrix")
    a = np.zeros((3, 3))
    a[0, 0] = spec.len_a1
    a[0, 1] = spec.len_a2 * cos_gamma
    a[1, 1] = spec.len_a2 * sin_gamma
    a[0, 2] = spec.len_a3 * cos_beta
    a[1, 2] = spec.len_a3 * (cos_alpha - cos_gamma * cos_beta) / sin_gamma
    a[2, 2] = spec.len_a3 * math.sqrt(gram) / sin_gamma
    if not np.all(np.diag(a) > 0):
        raise LatticeError("degenerate cell: nonpositive diagonal in the translation matrix")
    return a


def correct_lattice(spec: LatticeSpec) -> CorrectedLattice:
    """Snap all three angles and assemble the grid-aligned lattice."""
    n1, n2, n3 = spec.shape
    l1 = spec.len_a1
    dx = l1 / n1
    m1, cg, sg = snap_angle_gamma(spec)
    m2, cb = snap_angle_beta(spec, dx)
    l2 = spec.len_a2 * sg
    dy = l2 / n2
    m3, ca = snap_angle_alpha(spec, dy, cg, sg, cb)
    flags = lattice_flags(n1, m1, m2, cg, cb, ca)
    a = build_translation_vectors(spec, cg, sg, cb, ca)
    # Pin the in-plane components to the grid exactly.
    a[0, 1] = m1 * dx - flags["rho1"] * l1
    a[0, 2] = m2 * dx - flags["rho2"] * l1
    a[1, 2] = m3 * dy - flags["rho3"] * l2
    l3 = float(a[2, 2])
    return CorrectedLattice(
        spec=spec, m1=m1, m2=m2, m3=m3,
        cos_gamma=cg, sin_gamma=sg, cos_beta=cb, cos_alpha=ca,
        a1=a[:, 0].copy(), a2=a[:, 1].copy(), a3=a[:, 2].copy(),
        l1=l1, l2=l2, l3=l3, dx=dx, dy=dy, dz=l3 / n3,
        **flags,
    )


def spec_from_vectors(
    vectors: np.ndarray, shape: Sequence[int], bravais_class: BravaisClass = BravaisClass.TRICLINIC
) -> LatticeSpec:
    """LatticeSpec from three primitive vectors given as matrix columns."""
    v = np.asarray(vectors, dtype=float)
    lengths = np.linalg.norm(v, axis=0)

    def angle(i: int, j: int) -> float:
        c = float(v[:, i] @ v[:, j] / (lengths[i] * lengths[j]))
        return math.acos(max(-1.0, min(1.0, c)))

    return LatticeSpec(
        float(lengths[0]), float(lengths[1]), float(lengths[2]),
        angle(0, 1), angle(0, 2), angle(1, 2),
        int(shape[0]), int(shape[1]), int(shape[2]), bravais_class,
    )


# ---------------------------------------------------------------------------
# Reciprocal cell
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ReciprocalCell:
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    omega: np.ndarray
    corners: Mapping[str, np.ndarray]

    @property
    def vectors(self) -> np.ndarray:
        return np.column_stack([self.b1, self.b2, self.b3])


def build_reciprocal(
    corrected: CorrectedLattice,
    original: Optional[np.ndarray] = None,
    conventional_corners: Optional[Mapping[str, Sequence[float]]] = None,
) -> ReciprocalCell:
    """Reciprocal vectors, the frame map and transformed corner points.

    Args:
        corrected: the grid-aligned lattice.
        original: the class's standard primitive vectors (columns). Defaults
            to the corrected vectors, giving an identity frame map.
        conventional_corners: corner points (Cartesian, original frame,
            including the 2*pi factor).

    Returns:
        ReciprocalCell with ``b = 2 pi a^{-T}``, ``omega = a^{-T} original^T``
        and ``corners[label] = omega @ corner``.
    """
    a = corrected.vectors
    if abs(np.linalg.det(a)) < 1e-300:
        raise LatticeError("singular translation matrix")
    a_inv_t = np.linalg.inv(a).T
    b = 2.0 * np.pi * a_inv_t
    orig = a if original is None else np.asarray(original, dtype=float)
    omega = a_inv_t @ orig.T
    corners = {}
    for label, c in (conventional_corners or {}).items():
        corners[label] = omega @ np.asarray(c, dtype=float)
    return ReciprocalCell(b1=b[:, 0].copy(), b2=b[:, 1].copy(), b3=b[:, 2].copy(),
                          omega=omega, corners=corners)


# ---------------------------------------------------------------------------
# k-paths
# ---------------------------------------------------------------------------

_LABEL_ALIASES = {"G": "Γ", "GAMMA": "Γ", "SIGMA": "Σ", "SIGMA1": "Σ1"}


def normalize_label(label: str) -> str:
    s = label.strip()
    return _LABEL_ALIASES.get(s.upper(), s)


@dataclass(frozen=True)
class KPath:
    """Corner-label walk. Each branch is a contiguous run; branches are
    separated by breaks ("|" in the text form)."""

    branches: Tuple[Tuple[str, ...], ...]
    samples_per_segment: int = 10

    def __post_init__(self) -> None:
        if self.samples_per_segment < 1:
            raise LatticeError("samples_per_segment must be >= 1")
        if not self.branches or any(len(b) == 0 for b in self.branches):
            raise LatticeError("k-path has an empty branch")

    @classmethod
    def parse(cls, text: str, samples_per_segment: int = 10) -> "KPath":
        branches = []
        for part in text.split("|"):
            tokens = part.replace("→", "-").replace("->", "-").replace(",", "-").split("-")
            labels = tuple(normalize_label(t) for t in tokens if t.strip())
            branches.append(labels)
        return cls(tuple(branches), samples_per_segment)

    @property
    def segments(self) -> List[Optional[Tuple[str, str]]]:
        """(start, end) pairs, with ``None`` marking each break."""
        out: List[Optional[Tuple[str, str]]] = []
        for bi, branch in enumerate(self.branches):
            if bi:
                out.append(None)
            out.extend(zip(branch[:-1], branch[1:]))
        return out

    @property
    def labels(self) -> List[str]:
        return [lab for b in self.branches for lab in b]

    def __str__(self) -> str:
        return "|".join("-".join(b) for b in self.branches)


def _resolve(label: str, cell: ReciprocalCell) -> np.ndarray:
    try:
        return np.asarray(cell.corners[label], dtype=float)
    except KeyError:
        raise LatticeError(
            f"unknown k-point label {label!r}; known: {sorted(cell.corners)}"
        ) from None


def kpath_samples(path: KPath, cell: ReciprocalCell) -> List[Tuple[float, np.ndarray]]:
    """Sample a path. Returns ``(arc_length, k)`` with ``k = corner / (2 pi)``.

    Arc length is measured on the stored k; it does not advance across a break.
    """
    out: List[Tuple[float, np.ndarray]] = []
    s = 0.0
    ns = path.samples_per_segment
    for branch in path.branches:
        pts = [_resolve(lab, cell) / (2.0 * np.pi) for lab in branch]
        out.append((s, pts[0].copy()))
        for p, q in zip(pts[:-1], pts[1:]):
            prev = p
            for step in range(1, ns + 1):
                t = step / ns
                k = (1.0 - t) * p + t * q
                s += float(np.linalg.norm(k - prev))
                out.append((s, k))
                prev = k
    return out


def kpath_ticks(path: KPath, cell: ReciprocalCell) -> List[Tuple[int, float, str]]:
    """(sample index, arc length, label) for every corner along the path."""
    samples = kpath_samples(path, cell)
    ticks = []
    idx = 0
    ns = path.samples_per_segment
    for branch in path.branches:
        for j, lab in enumerate(branch):
            i = idx + j * ns
            ticks.append((i, samples[i][0], lab))
        idx += (len(branch) - 1) * ns + 1
    return ticks


# ---------------------------------------------------------------------------
# Bravais presets
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LatticePreset:
    """A Bravais class instance ready for snapping.

    ``primitive`` holds the standard primitive vectors (columns) in the
    order used for snapping; ``corners`` are Cartesian in the same frame.
    """

    bravais_class: BravaisClass
    spec: LatticeSpec
    primitive: np.ndarray
    corners: Dict[str, np.ndarray]
    path: str
    constants: Dict[str, float] = field(default_factory=dict)


DEFAULT_PATHS: Dict[BravaisClass, str] = {
    BravaisClass.CUBIC: "Γ-X-M-Γ-R|M-R",
    BravaisClass.FCC: "X-U-L-Γ-X-W-K",
    BravaisClass.BCC: "Γ-H-N-Γ-P-H|P-N",
    BravaisClass.HEXAGONAL: "Γ-M-K-Γ-A-L-H-A|L-M|K-H",
    BravaisClass.RHOMBOHEDRAL: "Γ-L-B1|B-Z-Γ-X|Q-F-P1-Z|L-P",
    BravaisClass.TETRAGONAL: "Γ-X-M-Γ-Z-R-A-Z|X-R|M-A",
    BravaisClass.BCT: "Γ-X-Y-Σ-Γ-Z-Σ1-N-P-Y1-Z|X-P",
    BravaisClass.ORTHORHOMBIC: "Γ-X-S-Y-Γ-Z-U-R-T-Z|Y-T|U-X|S-R",
    BravaisClass.ORCC: "Γ-X-S-R-A-Z-Γ-Y-X1-A1-T-Y|Z-T",
    BravaisClass.ORCF: "Γ-Y-T-Z-Γ-X-A1-Y|T-X1|X-A-Z|L-Γ",
    BravaisClass.ORCI: "Γ-X-L-T-W-R-X1-Z-Γ-Y-S-W|L1-Y|Y1-Z",
    BravaisClass.MONOCLINIC: "Γ-Y-H-C-E-M1-A-X-H1|M-D-Z|Y-D",
    BravaisClass.MCLC: "Γ-Y-F-H-Z-I-F1|H1-Y1-X-Γ-N|M-Γ",
    BravaisClass.TRICLINIC: "X-Γ-Y|L-Γ-Z|N-Γ-M|R-Γ",
}

DEFAULT_CONSTANTS: Dict[BravaisClass, Dict[str, float]] = {
    BravaisClass.CUBIC: {"a": 1.0},
    BravaisClass.FCC: {"a": 1.0},
    BravaisClass.BCC: {"a": 1.0},
    BravaisClass.TETRAGONAL: {"a": 1.0, "c": 1.5},
    BravaisClass.BCT: {"a": 1.0, "c": 1.5},
    BravaisClass.ORTHORHOMBIC: {"a": 1.0, "b": 1.2, "c": 1.4},
    BravaisClass.ORCC: {"a": 1.0, "b": 1.5, "c": 1.2},
    BravaisClass.ORCF: {"a": 1.0, "b": 1.5, "c": 2.0},
    BravaisClass.ORCI: {"a": 1.0, "b": 1.2, "c": 1.4},
    BravaisClass.HEXAGONAL: {"a": 1.0, "c": 1.2},
    BravaisClass.RHOMBOHEDRAL: {"a": 1.0, "alpha": 70.0},
    BravaisClass.MONOCLINIC: {"a": 1.0, "b": 1.2, "c": 1.4, "alpha": 70.0},
    BravaisClass.MCLC: {"a": 1.5, "b": 1.0, "c": 1.2, "alpha": 70.0},
    BravaisClass.TRICLINIC: {"a": 1.0, "b": 1.1, "c": 1.2,
                             "alpha": 80.0, "beta": 75.0, "gamma": 85.0},
}


def _standard_cell(cls: BravaisClass, p: Mapping[str, float]) -> Tuple[np.ndarray, Dict[str, Tuple[float, float, float]]]:
    """Standard primitive vectors (rows) and corner points in fractional
    coordinates of the corresponding reciprocal vectors."""
    a = p.get("a", 1.0)
    b = p.get("b", a)
    c = p.get("c", a)
    half = 0.5
    if cls is BravaisClass.CUBIC:
        vecs = [(a, 0, 0), (0, a, 0), (0, 0, a)]
        pts = {"Γ": (0, 0, 0), "M": (half, half, 0), "R": (half, half, half), "X": (0, half, 0)}
    elif cls is BravaisClass.FCC:
        vecs = [(0, a / 2, a / 2), (a / 2, 0, a / 2), (a / 2, a / 2, 0)]
        pts = {"Γ": (0, 0, 0), "K": (3 / 8, 3 / 8, 3 / 4), "L": (half, half, half),
               "U": (5 / 8, 1 / 4, 5 / 8), "W": (half, 1 / 4, 3 / 4), "X": (half, 0, half)}
    elif cls is BravaisClass.BCC:
        vecs = [(-a / 2, a / 2, a / 2), (a / 2, -a / 2, a / 2), (a / 2, a / 2, -a / 2)]
        pts = {"Γ": (0, 0, 0), "H": (half, -half, half), "N": (0, 0, half),
               "P": (1 / 4, 1 / 4, 1 / 4)}
    elif cls is BravaisClass.TETRAGONAL:
        vecs = [(a, 0, 0), (0, a, 0), (0, 0, c)]
        pts = {"Γ": (0, 0, 0), "A": (half, half, half), "M": (half, half, 0),
               "R": (0, half, half), "X": (0, half, 0), "Z": (0, 0, half)}
    elif cls is BravaisClass.BCT:
        if not c > a:
            raise LatticeError("bct preset tabulates the c > a variant only")
        vecs = [(-a / 2, a / 2, c / 2), (a / 2, -a / 2, c / 2), (a / 2, a / 2, -c / 2)]
        eta = (1 + a * a / (c * c)) / 4
        zeta = a * a / (2 * c * c)
        pts = {"Γ": (0, 0, 0), "N": (0, half, 0), "P": (1 / 4, 1 / 4, 1 / 4),
               "Σ": (-eta, eta, eta), "Σ1": (eta, 1 - eta, -eta), "X": (0, 0, half),
               "Y": (-zeta, zeta, half), "Y1": (half, half, -zeta), "Z": (half, half, -half)}
    elif cls is BravaisClass.ORTHORHOMBIC:
        if not a < b < c:
            raise LatticeError("orthorhombic preset requires a < b < c")
        vecs = [(a, 0, 0), (0, b, 0), (0, 0, c)]
        pts = {"Γ": (0, 0, 0), "R": (half, half, half), "S": (half, half, 0),
               "T": (0, half, half), "U": (half, 0, half), "X": (half, 0, 0),
               "Y": (0, half, 0), "Z": (0, 0, half)}
    elif cls is BravaisClass.ORCC:
        if not a < b:
            raise LatticeError("orcc preset requires a < b")
        vecs = [(a / 2, -b / 2, 0), (a / 2, b / 2, 0), (0, 0, c)]
        zeta = (1 + a * a / (b * b)) / 4
        pts = {"Γ": (0, 0, 0), "A": (zeta, zeta, half), "A1": (-zeta, 1 - zeta, half),
               "R": (0, half, half), "S": (0, half, 0), "T": (-half, half, half),
               "X": (zeta, zeta, 0), "X1": (-zeta, 1 - zeta, 0), "Y": (-half, half, 0),
               "Z": (0, 0, half)}
    elif cls is BravaisClass.ORCF:
        if not (a < b < c and 1 / a**2 > 1 / b**2 + 1 / c**2):
            raise LatticeError("orcf preset tabulates a < b < c with 1/a^2 > 1/b^2 + 1/c^2")
        vecs = [(0, b / 2, c / 2), (a / 2, 0, c / 2), (a / 2, b / 2, 0)]
        zeta = (1 + a * a / (b * b) - a * a / (c * c)) / 4
        eta = (1 + a * a / (b * b) + a * a / (c * c)) / 4
        pts = {"Γ": (0, 0, 0), "A": (half, half + zeta, zeta), "A1": (half, half - zeta, 1 - zeta),
               "L": (half, half, half), "T": (1, half, half), "X": (0, eta, eta),
               "X1": (1, 1 - eta, 1 - eta), "Y": (half, 0, half), "Z": (half, half, 0)}
    elif cls is BravaisClass.ORCI:
        if not a < b < c:
            raise LatticeError("orci preset requires a < b < c")
        vecs = [(-a / 2, b / 2, c / 2), (a / 2, -b / 2, c / 2), (a / 2, b / 2, -c / 2)]
        zeta = (1 + a * a / (c * c)) / 4
        eta = (1 + b * b / (c * c)) / 4
        delta = (b * b - a * a) / (4 * c * c)
        mu = (a * a + b * b) / (4 * c * c)
        pts = {"Γ": (0, 0, 0), "L": (-mu, mu, half - delta), "L1": (mu, -mu, half + delta),
               "L2": (half - delta, half + delta, -mu), "R": (0, half, 0), "S": (half, 0, 0),
               "T": (0, 0, half), "W": (1 / 4, 1 / 4, 1 / 4), "X": (-zeta, zeta, zeta),
               "X1": (zeta, 1 - zeta, -zeta), "Y": (eta, -eta, eta), "Y1": (1 - eta, eta, -eta),
               "Z": (half, half, -half)}
    elif cls is BravaisClass.HEXAGONAL:
        vecs = [(a / 2, -a * math.sqrt(3) / 2, 0), (a / 2, a * math.sqrt(3) / 2, 0), (0, 0, c)]
        pts = {"Γ": (0, 0, 0), "A": (0, 0, half), "H": (1 / 3, 1 / 3, half),
               "K": (1 / 3, 1 / 3, 0), "L": (half, 0, half), "M": (half, 0, 0)}
    elif cls is BravaisClass.RHOMBOHEDRAL:
        al = math.radians(p.get("alpha", 70.0))
        if not al < math.pi / 2:
            raise LatticeError("rhombohedral preset tabulates alpha < 90 degrees only")
        ch, sh = math.cos(al / 2), math.sin(al / 2)
        vecs = [(a * ch, -a * sh, 0), (a * ch, a * sh, 0),
                (a * math.cos(al) / ch, 0, a * math.sqrt(1 - math.cos(al) ** 2 / ch**2))]
        eta = (1 + 4 * math.cos(al)) / (2 + 4 * math.cos(al))
        nu = 3 / 4 - eta / 2
        pts = {"Γ": (0, 0, 0), "B": (eta, half, 1 - eta), "B1": (half, 1 - eta, eta - 1),
               "F": (half, half, 0), "L": (half, 0, 0), "L1": (0, 0, -half),
               "P": (eta, nu, nu), "P1": (1 - nu, 1 - nu, 1 - eta), "P2": (nu, nu, eta - 1),
               "Q": (1 - nu, nu, 0), "X": (nu, 0, -nu), "Z": (half, half, half)}
    elif cls is BravaisClass.MONOCLINIC:
        al = math.radians(p.get("alpha", 70.0))
        if not (al < math.pi / 2 and b <= c and a <= c):
            raise LatticeError("monoclinic preset requires alpha < 90 degrees and a, b <= c")
        vecs = [(a, 0, 0), (0, b, 0), (0, c * math.cos(al), c * math.sin(al))]
        eta = (1 - b * math.cos(al) / c) / (2 * math.sin(al) ** 2)
        nu = half - eta * c * math.cos(al) / b
        pts = {"Γ": (0, 0, 0), "A": (half, half, 0), "C": (0, half, half), "D": (half, 0, half),
               "D1": (half, 0, -half), "E": (half, half, half), "H": (0, eta, 1 - nu),
               "H1": (0, 1 - eta, nu), "H2": (0, eta, -nu), "M": (half, eta, 1 - nu),
               "M1": (half, 1 - eta, nu), "M2": (half, eta, -nu), "X": (0, half, 0),
               "Y": (0, 0, half), "Y1": (0, 0, -half), "Z": (half, 0, 0)}
    elif cls is BravaisClass.MCLC:
        al = math.radians(p.get("alpha", 70.0))
        if not (al < math.pi / 2 and b * math.cos(al) / c + (b * math.sin(al) / a) ** 2 < 1):
            raise LatticeError("mclc preset tabulates the variant with b cos(alpha)/c + "
                               "b^2 sin^2(alpha)/a^2 < 1")
        vecs = [(a / 2, b / 2, 0), (-a / 2, b / 2, 0), (0, c * math.cos(al), c * math.sin(al))]
        mu = (1 + b * b / (a * a)) / 4
        delta = b * c * math.cos(al) / (2 * a * a)
        zeta = mu - 1 / 4 + (1 - b * math.cos(al) / c) / (4 * math.sin(al) ** 2)
        eta = half + 2 * zeta * c * math.cos(al) / b
        phi = 1 + zeta - 2 * mu
        psi = eta - 2 * delta
        pts = {"Γ": (0, 0, 0), "F": (1 - phi, 1 - phi, 1 - psi), "F1": (phi, phi - 1, psi),
               "F2": (1 - phi, -phi, 1 - psi), "H": (zeta, zeta, eta),
               "H1": (1 - zeta, -zeta, 1 - eta), "H2": (-zeta, -zeta, 1 - eta),
               "I": (half, -half, half), "M": (half, 0, half), "N": (half, 0, 0),
               "N1": (0, -half, 0), "X": (half, -half, 0), "Y": (mu, mu, delta),
               "Y1": (1 - mu, -mu, -delta), "Y3": (mu, mu - 1, delta), "Z": (0, 0, half)}
    elif cls is BravaisClass.TRICLINIC:
        al = math.radians(p.get("alpha", 80.0))
        be = math.radians(p.get("beta", 75.0))
        ga = math.radians(p.get("gamma", 85.0))
        cx = c * math.cos(be)
        cy = c * (math.cos(al) - math.cos(be) * math.cos(ga)) / math.sin(ga)
        cz = math.sqrt(c * c - cx * cx - cy * cy)
        vecs = [(a, 0, 0), (b * math.cos(ga), b * math.sin(ga), 0), (cx, cy, cz)]
        pts = {"Γ": (0, 0, 0), "L": (half, half, 0), "M": (0, half, half), "N": (half, 0, half),
               "R": (half, half, half), "X": (half, 0, 0), "Y": (0, half, 0), "Z": (0, 0, half)}
    else:  # pragma: no cover
        raise LatticeError(f"no preset for {cls}")
    return np.array(vecs, dtype=float), pts


def _orient(prim: np.ndarray, shape: Sequence[int], cls: BravaisClass) -> Tuple[np.ndarray, LatticeSpec]:
    """Pick an ordering and signs of the primitive vectors that satisfy the
    snapping constraints (a1 longest, admissibility)."""
    last_err: Optional[Exception] = None
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            cand = prim[:, list(perm)] * np.array(signs)
            try:
                spec = spec_from_vectors(cand, shape, cls)
                correct_lattice(spec)
            except LatticeError as err:
                last_err = err
                continue
            return cand, spec
    raise LatticeError(f"no admissible ordering of the {cls.value} primitive vectors: {last_err}")


def preset(
    cls: BravaisClass | str,
    shape: Sequence[int],
    constants: Optional[Mapping[str, float]] = None,
) -> LatticePreset:
    """Standard instance of a Bravais class on the given grid."""
    if isinstance(cls, str):
        cls = parse_bravais_class(cls)
    consts = dict(DEFAULT_CONSTANTS[cls])
    if constants:
        consts.update({k: float(v) for k, v in constants.items()})
    rows, frac = _standard_cell(cls, consts)
    prim = rows.T
    recip = 2.0 * np.pi * np.linalg.inv(prim).T
    corners = {lab: recip @ np.asarray(f, dtype=float) for lab, f in frac.items()}
    oriented, spec = _orient(prim, shape, cls)
    return LatticePreset(cls, spec, oriented, corners, DEFAULT_PATHS[cls], consts)


def preset_cell(p: LatticePreset) -> Tuple[CorrectedLattice, ReciprocalCell]:
    lat = correct_lattice(p.spec)
    return lat, build_reciprocal(lat, p.primitive, p.corners)

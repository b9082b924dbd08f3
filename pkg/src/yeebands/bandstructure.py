"""Band-structure driver: per-k solves, gap extraction and serialisation."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .eigensolver import ConvergenceError, NullFreeOperator, SolverConfig, inverse_lanczos
from .fft_matvec import TransformPlan
from .lattice import CorrectedLattice
from .material import PermittivityField
from .spectral import GammaPointError, build_svd_blocks, eigen_angles, gamma_like

log = logging.getLogger(__name__)

# Size of the shift applied at Gamma-like k, relative to |b1| / (2 pi).
GAMMA_SHIFT = 1e-6

# Gaps narrower than this fraction of the upper edge are solver noise.
GAP_RTOL = 1e-8

STATUS_OK = "ok"
STATUS_PARTIAL = "partial"
STATUS_FAILED = "failed"


class AllPointsFailed(RuntimeError):
    pass


@dataclass
class BandRow:
    index: int
    s: float
    k: np.ndarray
    status: str
    omega: np.ndarray
    outer_iterations: int = 0
    inner_iterations: int = 0
    max_residual: float = float("nan")
    k_solved: Optional[np.ndarray] = None
    gamma_shift: bool = False
    message: str = ""
    seconds: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "s": self.s,
            "k": [float(x) for x in self.k],
            "status": self.status,
            "omega": [float(x) for x in self.omega],
            "outer_iterations": self.outer_iterations,
            "inner_iterations": self.inner_iterations,
            "max_residual": _finite_or_none(self.max_residual),
            "k_solved": None if self.k_solved is None else [float(x) for x in self.k_solved],
            "gamma_shift": self.gamma_shift,
            "message": self.message,
            "seconds": self.seconds,
        }


def _finite_or_none(x: float):
    return float(x) if math.isfinite(x) else None


@dataclass
class BandResult:
    rows: List[BandRow]
    num_bands: int
    metadata: Dict[str, Any] = field(default_factory=dict)

    def bands(self, ok_only: bool = True) -> np.ndarray:
        """(num_k, num_bands) array of omega; failed rows are NaN."""
        out = np.full((len(self.rows), self.num_bands), np.nan)
        for i, r in enumerate(self.rows):
            if ok_only and r.status == STATUS_FAILED:
                continue
            m = min(self.num_bands, r.omega.shape[0])
            out[i, :m] = r.omega[:m]
        return out

    @property
    def arc(self) -> np.ndarray:
        return np.array([r.s for r in self.rows])

    # -- serialisation -------------------------------------------------------

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "s", "kx", "ky", "kz", "status"]
                   + [f"omega_{i + 1}" for i in range(self.num_bands)])
        for r in self.rows:
            om = [_g17(r.omega[i]) if i < r.omega.shape[0] else "nan" for i in range(self.num_bands)]
            w.writerow([r.index, _g17(r.s)] + [_g17(x) for x in r.k] + [r.status] + om)
        return buf.getvalue()

    def to_dict(self) -> Dict[str, Any]:
        return {"num_bands": self.num_bands, "metadata": self.metadata,
                "rows": [r.to_dict() for r in self.rows], "gaps": band_gaps(self)}

    def write_csv(self, path: str) -> None:
        atomic_write(path, self.csv_text())

    def write_json(self, path: str) -> None:
        atomic_write(path, json.dumps(self.to_dict(), indent=2, default=_json_default) + "\n")

    def write_svg(self, path: str, ticks: Sequence[Tuple[float, str]] = ()) -> None:
        atomic_write(path, band_svg(self, ticks))


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o)}")


def atomic_write(path: str, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Per-k solve
# ---------------------------------------------------------------------------


def _shift_direction(samples: Sequence[np.ndarray], index: int) -> np.ndarray:
    k = samples[index]
    for j in list(range(index + 1, len(samples))) + list(range(index - 1, -1, -1)):
        d = samples[j] - k
        nd = np.linalg.norm(d)
        if nd > 0:
            return d / nd
    return np.array([1.0, 0.0, 0.0])


def solve_k(lattice: CorrectedLattice, k: np.ndarray, field: PermittivityField,
            cfg: SolverConfig, direction: Optional[np.ndarray] = None, workers: int = 1):
    """Solve one wave vector, shifting once off Gamma if needed.

    Returns ``(EigResult, k_solved, shifted)``.
    """
    k = np.asarray(k, dtype=float)
    basis = eigen_angles(lattice, k)
    shifted = False
    if gamma_like(basis):
        if direction is None:
            direction = np.array([1.0, 0.0, 0.0])
        b1 = 2.0 * np.pi * np.linalg.inv(lattice.vectors).T[:, 0]
        k = k + GAMMA_SHIFT * (np.linalg.norm(b1) / (2.0 * np.pi)) * np.asarray(direction)
        basis = eigen_angles(lattice, k)
        shifted = True
    svd = build_svd_blocks(basis, floor=0.0) if shifted else build_svd_blocks(basis)
    plan = TransformPlan.build(basis, workers=workers)
    res = inverse_lanczos(NullFreeOperator(svd, field, plan), cfg)
    return res, k, shifted


def _run_one(args) -> BandRow:
    index, s, k, direction, lattice, field, cfg = args
    t0 = time.perf_counter()
    try:
        res, k_solved, shifted = solve_k(lattice, k, field, cfg, direction)
        status = STATUS_OK if res.converged else STATUS_PARTIAL
        return BandRow(index, s, k, status, res.omega, res.outer_iterations,
                       res.inner_iterations, float(np.max(res.residuals, initial=0.0)),
                       k_solved, shifted, seconds=time.perf_counter() - t0)
    except (ConvergenceError, GammaPointError, np.linalg.LinAlgError, FloatingPointError) as err:
        log.error("k-point %d failed: %s", index, err)
        return BandRow(index, s, k, STATUS_FAILED, np.empty(0), message=str(err),
                       seconds=time.perf_counter() - t0)


def run_bands(lattice: CorrectedLattice, field: PermittivityField,
              samples: Sequence[Tuple[float, np.ndarray]], cfg: SolverConfig,
              threads: int = 1, metadata: Optional[Dict[str, Any]] = None,
              order: Optional[Sequence[int]] = None) -> BandResult:
    """Solve every k-sample independently and collect a BandResult.

    Args:
        lattice: snapped lattice.
        field: sampled permittivity.
        samples: ``(arc_length, k)`` pairs, e.g. from ``kpath_samples``.
        cfg: eigensolver settings.
        threads: worker threads across k-points.
        metadata: extra entries merged into the result metadata.
        order: optional processing order (results are re-sorted by index).
    """
    ks = [np.asarray(k, dtype=float) for _, k in samples]
    jobs = [(i, float(s), ks[i], _shift_direction(ks, i), lattice, field, cfg)
            for i, (s, _) in enumerate(samples)]
    if order is not None:
        jobs = [jobs[i] for i in order]
    t0 = time.perf_counter()
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(_run_one, jobs))
    else:
        rows = [_run_one(j) for j in jobs]
    rows.sort(key=lambda r: r.index)
    meta = {
        "grid": list(lattice.shape),
        "lattice": {
            "a1": lattice.a1.tolist(), "a2": lattice.a2.tolist(), "a3": lattice.a3.tolist(),
            **lattice.flags(),
        },
        "eps_min": field.eps_min,
        "eps_max": field.eps_max,
        "solver": {
            "num_eigs": cfg.num_eigs, "tol_outer": cfg.tol_outer, "tol_inner": cfg.tol_inner,
            "block_size": cfg.block_size, "seed": cfg.seed,
        },
        "gamma_shifts": [
            {"index": r.index, "k_solved": r.k_solved.tolist()} for r in rows if r.gamma_shift
        ],
        "wall_seconds": time.perf_counter() - t0,
    }
    if metadata:
        meta.update(metadata)
    result = BandResult(rows, cfg.num_eigs, meta)
    if rows and all(r.status == STATUS_FAILED for r in rows):
        raise AllPointsFailed("every k-point failed")
    return result


# ---------------------------------------------------------------------------
# Gaps and sweeps
# ---------------------------------------------------------------------------


def band_gaps(result: BandResult) -> List[Dict[str, float]]:
    """Complete gaps: band m+1's minimum above band m's maximum (1-based m)."""
    b = result.bands()
    good = ~np.isnan(b).any(axis=1)
    if not good.any():
        return []
    b = b[good]
    out = []
    for m in range(b.shape[1] - 1):
        lo = float(b[:, m].max())
        hi = float(b[:, m + 1].min())
        if hi - lo > GAP_RTOL * abs(hi):
            out.append({"lower_band": m + 1, "lower": lo, "upper": hi,
                        "width": hi - lo, "midgap": 0.5 * (hi + lo)})
    return out


def gap_between(result: BandResult, lower_band: int) -> Optional[Dict[str, float]]:
    for g in band_gaps(result):
        if g["lower_band"] == lower_band:
            return g
    return None


def sweep_permittivity(lattice: CorrectedLattice, field_for_eps, samples, cfg: SolverConfig,
                       eps_values: Sequence[float], threads: int = 1) -> List[BandResult]:
    """One BandResult per permittivity; ``field_for_eps(eps)`` samples B."""
    out = []
    for eps in eps_values:
        if eps < 1.0:
            raise ValueError("permittivity must be >= 1")
        res = run_bands(lattice, field_for_eps(eps), samples, cfg, threads,
                        metadata={"eps_in": float(eps)})
        res.metadata["gaps"] = band_gaps(res)
        out.append(res)
    return out


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------


def band_svg(result: BandResult, ticks: Sequence[Tuple[float, str]] = (),
             width: int = 640, height: int = 420) -> str:
    """Polyline band plot of omega against arc length."""
    b = result.bands()
    s = result.arc
    pad_l, pad_r, pad_t, pad_b = 56, 16, 16, 36
    smax = float(s.max()) if s.size and s.max() > 0 else 1.0
    finite = b[np.isfinite(b)]
    ymax = float(finite.max()) * 1.05 if finite.size else 1.0

    def px(x):
        return pad_l + (width - pad_l - pad_r) * x / smax

    def py(y):
        return height - pad_b - (height - pad_t - pad_b) * y / ymax

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="{pad_l}" y="{pad_t}" width="{width - pad_l - pad_r}" '
        f'height="{height - pad_t - pad_b}" fill="none" stroke="black"/>',
    ]
    for x, label in ticks:
        parts.append(f'<line x1="{px(x):.2f}" y1="{pad_t}" x2="{px(x):.2f}" '
                     f'y2="{height - pad_b}" stroke="#bbb"/>')
        parts.append(f'<text x="{px(x):.2f}" y="{height - pad_b + 18}" '
                     f'text-anchor="middle" font-size="12">{label}</text>')
    for yv in np.linspace(0, ymax, 5):
        parts.append(f'<text x="{pad_l - 6}" y="{py(yv) + 4:.2f}" text-anchor="end" '
                     f'font-size="10">{yv:.3f}</text>')
    for m in range(b.shape[1]):
        pts = [f"{px(x):.2f},{py(y):.2f}" for x, y in zip(s, b[:, m]) if np.isfinite(y)]
        if pts:
            parts.append(f'<polyline fill="none" stroke="#1f4e99" stroke-width="1.2" '
                         f'points="{" ".join(pts)}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"

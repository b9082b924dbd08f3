"""Command-line entry point: JSON config in, band tables out.

Exit codes: 0 success, 1 config error, 2 every k-point failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .bandstructure import AllPointsFailed, atomic_write, band_gaps, run_bands
from .eigensolver import SolverConfig
from .lattice import (
    CorrectedLattice,
    KPath,
    LatticeError,
    LatticeSpec,
    ReciprocalCell,
    build_reciprocal,
    correct_lattice,
    kpath_samples,
    kpath_ticks,
    normalize_label,
    parse_bravais_class,
    preset,
)
from .material import Cylinder, Geometry, Gyroid, Sphere, sample_B

log = logging.getLogger("yeebands")

EPS_IN_DEFAULT = 13.0


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------------------
# Typed access helpers
# ---------------------------------------------------------------------------


def _get(block: Mapping[str, Any], key: str, path: str, default: Any = ..., kind=None):
    if not isinstance(block, Mapping):
        raise ConfigError(path, "expected an object")
    if key not in block:
        if default is ...:
            raise ConfigError(f"{path}.{key}" if path else key, "required field is missing")
        return default
    value = block[key]
    where = f"{path}.{key}" if path else key
    if kind is not None:
        value = kind(value, where)
    return value


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(where, f"expected a finite number, got {value!r}")
    return float(value)


def _positive(value, where: str) -> float:
    v = _number(value, where)
    if v <= 0:
        raise ConfigError(where, f"must be positive, got {v!r}")
    return v


def _eps(value, where: str) -> float:
    v = _number(value, where)
    if v < 1.0:
        raise ConfigError(where, f"relative permittivity must be >= 1, got {v!r}")
    return v


def _pos_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(where, f"expected a positive integer, got {value!r}")
    return int(value)


def _vec3(value, where: str) -> Tuple[float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(where, f"expected a list of 3 numbers, got {value!r}")
    return tuple(_number(v, f"{where}[{i}]") for i, v in enumerate(value))


def _string(value, where: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(where, f"expected a string, got {value!r}")
    return value


def _check_keys(block: Mapping[str, Any], allowed: Sequence[str], path: str) -> None:
    extra = sorted(set(block) - set(allowed))
    if extra:
        raise ConfigError(f"{path}.{extra[0]}" if path else extra[0], "unknown field")


# ---------------------------------------------------------------------------
# RunConfig
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    lattice: CorrectedLattice
    cell: ReciprocalCell
    primitive: Optional[np.ndarray]
    geometry: Geometry
    path: KPath
    solver: SolverConfig
    threads: int = 1
    outputs: Dict[str, Optional[str]] = field(default_factory=dict)
    sweep: Optional[List[float]] = None
    echo: Dict[str, Any] = field(default_factory=dict)

    def samples(self):
        return kpath_samples(self.path, self.cell)

    def ticks(self):
        return [(s, lab) for _, s, lab in kpath_ticks(self.path, self.cell)]


_TOP_KEYS = ("lattice", "geometry", "kpath", "solver", "output", "threads", "sweep")


def parse_config(raw: Mapping[str, Any], base_dir: str = ".") -> RunConfig:
    """Validate a decoded JSON config and build every run object."""
    if not isinstance(raw, Mapping):
        raise ConfigError("<root>", "config must be a JSON object")
    _check_keys(raw, _TOP_KEYS, "")
    lat_block = _get(raw, "lattice", "")
    lattice, cell, primitive, default_path, grid = _parse_lattice(lat_block)
    geometry = _parse_geometry(raw.get("geometry", {}), primitive is not None)
    path = _parse_kpath(raw.get("kpath", {}), cell, default_path)
    solver = _parse_solver(raw.get("solver", {}))
    threads = _get(raw, "threads", "", 1, _pos_int)
    outputs = _parse_output(raw.get("output", {}), base_dir)
    sweep = None
    if "sweep" in raw:
        sweep_block = raw["sweep"]
        eps_list = _get(sweep_block, "eps", "sweep")
        if not isinstance(eps_list, list) or not eps_list:
            raise ConfigError("sweep.eps", "expected a non-empty list of permittivities")
        sweep = [_eps(v, f"sweep.eps[{i}]") for i, v in enumerate(eps_list)]
        if not geometry.shapes:
            raise ConfigError("sweep", "a permittivity sweep needs at least one shape")
    echo = {"config": json.loads(json.dumps(raw)), "grid": list(grid)}
    return RunConfig(lattice, cell, primitive, geometry, path, solver, threads, outputs, sweep, echo)


def _parse_lattice(block):
    path = "lattice"
    if not isinstance(block, Mapping):
        raise ConfigError(path, "expected an object")
    _check_keys(block, ("class", "constants", "grid", "lengths", "angles_deg"), path)
    grid_raw = _get(block, "grid", path)
    if not isinstance(grid_raw, list) or len(grid_raw) != 3:
        raise ConfigError(f"{path}.grid", f"expected [n1, n2, n3], got {grid_raw!r}")
    grid = tuple(_pos_int(v, f"{path}.grid[{i}]") for i, v in enumerate(grid_raw))

    cls_name = _get(block, "class", path, None)
    cls = None
    if cls_name is not None:
        try:
            cls = parse_bravais_class(_string(cls_name, f"{path}.class"))
        except LatticeError as err:
            raise ConfigError(f"{path}.class", str(err)) from None

    if "lengths" in block or "angles_deg" in block:
        if "constants" in block:
            raise ConfigError(f"{path}.constants", "give either constants or lengths/angles_deg, not both")
        lengths = _get(block, "lengths", path, kind=_vec3)
        angles = _get(block, "angles_deg", path)
        if not isinstance(angles, Mapping):
            raise ConfigError(f"{path}.angles_deg", "expected {\"gamma\": .., \"beta\": .., \"alpha\": ..}")
        _check_keys(angles, ("gamma", "beta", "alpha"), f"{path}.angles_deg")
        rad = {k: math.radians(_get(angles, k, f"{path}.angles_deg", kind=_number))
               for k in ("gamma", "beta", "alpha")}
        for i, v in enumerate(lengths):
            if v <= 0:
                raise ConfigError(f"{path}.lengths[{i}]", "lengths must be positive")
        try:
            kwargs = {"bravais_class": cls} if cls is not None else {}
            spec = LatticeSpec(lengths[0], lengths[1], lengths[2], rad["gamma"], rad["beta"],
                               rad["alpha"], *grid, **kwargs)
            lattice = correct_lattice(spec)
        except LatticeError as err:
            raise ConfigError(path, str(err)) from None
        cell = build_reciprocal(lattice)
        return lattice, cell, None, None, grid

    if cls is None:
        raise ConfigError(f"{path}.class", "required unless lengths and angles_deg are given")
    consts = _get(block, "constants", path, {})
    if not isinstance(consts, Mapping):
        raise ConfigError(f"{path}.constants", "expected an object")
    consts = {k: _positive(v, f"{path}.constants.{k}") for k, v in consts.items()}
    try:
        p = preset(cls, grid, consts)
        lattice = correct_lattice(p.spec)
    except LatticeError as err:
        raise ConfigError(path, str(err)) from None
    cell = build_reciprocal(lattice, p.primitive, p.corners)
    return lattice, cell, p.primitive, p.path, grid


def _parse_shape(block, where: str):
    if not isinstance(block, Mapping):
        raise ConfigError(where, "expected an object")
    kind = _get(block, "type", where, kind=_string).lower()
    eps = _get(block, "eps", where, EPS_IN_DEFAULT, _eps)
    try:
        if kind == "sphere":
            _check_keys(block, ("type", "center", "radius", "eps"), where)
            return Sphere(_get(block, "center", where, kind=_vec3),
                          _get(block, "radius", where, kind=_positive), eps)
        if kind == "cylinder":
            _check_keys(block, ("type", "start", "end", "radius", "eps"), where)
            return Cylinder(_get(block, "start", where, kind=_vec3), _get(block, "end", where, kind=_vec3),
                            _get(block, "radius", where, kind=_positive), eps)
        if kind == "gyroid":
            _check_keys(block, ("type", "level", "period", "eps"), where)
            return Gyroid(_get(block, "level", where, kind=_number), eps,
                          _get(block, "period", where, 1.0, _positive))
    except ValueError as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(where, str(err)) from None
    raise ConfigError(f"{where}.type", f"unknown shape type {kind!r} (sphere, cylinder, gyroid)")


def _parse_geometry(block, has_primitive: bool) -> Geometry:
    path = "geometry"
    if not isinstance(block, Mapping):
        raise ConfigError(path, "expected an object")
    _check_keys(block, ("shapes", "eps_out", "frame"), path)
    shapes_raw = _get(block, "shapes", path, [])
    if not isinstance(shapes_raw, list):
        raise ConfigError(f"{path}.shapes", "expected a list")
    shapes = tuple(_parse_shape(s, f"{path}.shapes[{i}]") for i, s in enumerate(shapes_raw))
    eps_out = _get(block, "eps_out", path, 1.0, _eps)
    frame = _get(block, "frame", path, "transformed", _string)
    if frame not in ("transformed", "conventional"):
        raise ConfigError(f"{path}.frame", "must be 'transformed' or 'conventional'")
    if frame == "conventional" and not has_primitive:
        raise ConfigError(f"{path}.frame", "'conventional' needs a lattice given by class")
    return Geometry(shapes, eps_out, frame)


def _parse_kpath(block, cell: ReciprocalCell, default_path: Optional[str]) -> KPath:
    path = "kpath"
    if not isinstance(block, Mapping):
        raise ConfigError(path, "expected an object")
    _check_keys(block, ("path", "points", "samples_per_segment"), path)
    samples = _get(block, "samples_per_segment", path, 10, _pos_int)
    points = _get(block, "points", path, {})
    if not isinstance(points, Mapping):
        raise ConfigError(f"{path}.points", "expected an object of label -> [f1, f2, f3]")
    b = cell.vectors
    for label, frac in points.items():
        f = _vec3(frac, f"{path}.points.{label}")
        cell.corners[normalize_label(label)] = b @ np.asarray(f)
    text = _get(block, "path", path, default_path)
    if text is None:
        raise ConfigError(f"{path}.path", "required for lattices given by lengths and angles")
    try:
        kp = KPath.parse(_string(text, f"{path}.path"), samples)
        for lab in kp.labels:
            if lab not in cell.corners:
                raise LatticeError(f"unknown k-point label {lab!r}; known: {sorted(cell.corners)}")
    except LatticeError as err:
        raise ConfigError(f"{path}.path", str(err)) from None
    return kp


def _parse_solver(block) -> SolverConfig:
    path = "solver"
    if not isinstance(block, Mapping):
        raise ConfigError(path, "expected an object")
    _check_keys(block, ("num_eigs", "tol_outer", "tol_inner", "max_outer", "max_inner",
                        "block_size", "seed"), path)
    kwargs = {}
    for key in ("num_eigs", "max_outer", "max_inner", "block_size"):
        if key in block:
            kwargs[key] = _pos_int(block[key], f"{path}.{key}")
    for key in ("tol_outer", "tol_inner"):
        if key in block:
            v = _positive(block[key], f"{path}.{key}")
            if v >= 1:
                raise ConfigError(f"{path}.{key}", "tolerance must be below 1")
            kwargs[key] = v
    if "seed" in block:
        seed = block["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError(f"{path}.seed", f"expected a non-negative integer, got {seed!r}")
        kwargs["seed"] = seed
    return SolverConfig(**kwargs)


def _parse_output(block, base_dir: str) -> Dict[str, Optional[str]]:
    path = "output"
    if not isinstance(block, Mapping):
        raise ConfigError(path, "expected an object")
    _check_keys(block, ("csv", "json", "svg"), path)
    out = {}
    for key in ("csv", "json", "svg"):
        v = _get(block, key, path, None)
        if v is not None:
            v = _string(v, f"{path}.{key}")
            out[key] = v if os.path.isabs(v) else os.path.join(base_dir, v)
        else:
            out[key] = None
    return out


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError("--config", f"cannot read {path}: {err.strerror}") from None
    except json.JSONDecodeError as err:
        raise ConfigError("--config", f"invalid JSON at line {err.lineno} column {err.colno}: {err.msg}") from None
    return parse_config(raw, os.path.dirname(os.path.abspath(path)))


# ---------------------------------------------------------------------------
# main
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="yeebands", description="Photonic band structures on Yee grids.")
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="CSV output path (JSON is written next to it)")
    ap.add_argument("--svg", help="SVG band plot path")
    ap.add_argument("--threads", type=int, help="worker threads across k-points")
    ap.add_argument("--validate-only", action="store_true", help="check the config and exit")
    ap.add_argument("--verbose", action="store_true", help="log per-k progress")
    return ap


def _suffixed(path: str, tag: str) -> str:
    root, ext = os.path.splitext(path)
    return f"{root}_{tag}{ext}"


def _emit(result, cfg: RunConfig, csv_path, json_path, svg_path) -> None:
    if csv_path:
        result.write_csv(csv_path)
    if json_path:
        result.write_json(json_path)
    if svg_path:
        result.write_svg(svg_path, cfg.ticks())


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads", "must be a positive integer")
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1

    threads = args.threads or cfg.threads
    csv_path = args.out or cfg.outputs.get("csv")
    json_path = cfg.outputs.get("json")
    if args.out:
        json_path = os.path.splitext(args.out)[0] + ".json"
    svg_path = args.svg or cfg.outputs.get("svg")
    samples = cfg.samples()

    if args.validate_only:
        lat = cfg.lattice
        print(f"config ok: grid {lat.shape}, m = ({lat.m1}, {lat.m2}, {lat.m3}), "
              f"{len(samples)} k-samples, {len(cfg.geometry.shapes)} shapes")
        return 0

    field_cache = {}

    def field_for(eps: Optional[float]):
        if eps not in field_cache:
            geom = cfg.geometry if eps is None else cfg.geometry.with_eps(eps)
            field_cache[eps] = sample_B(geom, cfg.lattice, cfg.primitive)
        return field_cache[eps]

    meta = {"path": str(cfg.path), "ticks": cfg.ticks(), **cfg.echo}
    eps_runs: List[Optional[float]] = list(cfg.sweep) if cfg.sweep else [None]
    summary = []
    for eps in eps_runs:
        log.info("solving %d k-points%s", len(samples), "" if eps is None else f" at eps={eps:g}")
        try:
            result = run_bands(cfg.lattice, field_for(eps), samples, cfg.solver, threads,
                               metadata=dict(meta, eps_in=eps))
        except AllPointsFailed as err:
            print(f"solver error: {err}", file=sys.stderr)
            return 2
        tag = None if eps is None else f"eps{eps:g}"
        paths = [p if (p is None or tag is None) else _suffixed(p, tag)
                 for p in (csv_path, json_path, svg_path)]
        _emit(result, cfg, *paths)
        if not any(paths):
            sys.stdout.write(result.csv_text())
        gaps = band_gaps(result)
        summary.append({"eps_in": eps, "gaps": gaps})
        for g in gaps:
            log.info("gap between bands %d and %d: [%.6g, %.6g], midgap %.6g",
                     g["lower_band"], g["lower_band"] + 1, g["lower"], g["upper"], g["midgap"])
    if cfg.sweep and json_path:
        atomic_write(_suffixed(json_path, "sweep"), json.dumps(summary, indent=2) + "\n")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

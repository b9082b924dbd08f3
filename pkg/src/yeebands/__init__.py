"""Matrix-free Yee-grid Maxwell eigensolver for photonic band structures
on the fourteen Bravais lattices."""

from .bandstructure import BandResult, band_gaps, run_bands, sweep_permittivity
from .eigensolver import SolverConfig, inverse_lanczos
from .lattice import (
    BravaisClass,
    CorrectedLattice,
    KPath,
    LatticeError,
    LatticeSpec,
    correct_lattice,
    kpath_samples,
    preset,
    preset_cell,
)
from .material import Cylinder, Geometry, Gyroid, PermittivityField, Sphere, sample_B

__version__ = "0.1.0"

__all__ = [
    "BandResult", "BravaisClass", "CorrectedLattice", "Cylinder", "Geometry", "Gyroid",
    "KPath", "LatticeError", "LatticeSpec", "PermittivityField", "SolverConfig", "Sphere",
    "band_gaps", "correct_lattice", "inverse_lanczos", "kpath_samples", "preset",
    "preset_cell", "run_bands", "sample_B", "sweep_permittivity",
]

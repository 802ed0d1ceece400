"""Homogenization of periodic high-order elliptic operators via Bloch fibers."""

from .lattice import Lattice, brillouin_grid, dual_basis, frequency_set, \
    in_brillouin, packing_radius, reduce_frequency
from .symbol import DifferentialSymbol, MultiIndex, check_rank, \
    ellipticity_bounds, evaluate as evaluate_symbol, gradient_symbol, \
    pure_power_symbol
from .field import PeriodicMatrixField, cosine1d, laminate2d
from .cell import CellSolution, SpecialCase, detect_special_cases, \
    effective_matrix, lambda_norm_certificates, solve_cell, voigt_reuss
from .bloch import FiberKind, FiberOperator, assemble_effective_fiber, \
    assemble_fiber, eigenvalues, germ_threshold_check, spectral_germ
from .resolvent import CorrectorVariant, PlaneWaveSum, ResolventKind, \
    SpectralPoint, apply_corrector, apply_resolvent, corrector_removal_allowed, \
    fiber_energy_gap, fiber_flux_gap, fiber_resolvent_gap, sector_constant, \
    smoothing_passes
from .experiments import ErrorSweep, Metric, Problem, fit_rate, modulus_sweep, \
    sector_sweep, sweep, sweep_many

__version__ = "0.1.0"

__all__ = [
    "Lattice", "brillouin_grid", "dual_basis", "frequency_set", "in_brillouin",
    "packing_radius", "reduce_frequency",
    "DifferentialSymbol", "MultiIndex", "check_rank", "ellipticity_bounds",
    "evaluate_symbol", "gradient_symbol", "pure_power_symbol",
    "PeriodicMatrixField", "cosine1d", "laminate2d",
    "CellSolution", "SpecialCase", "detect_special_cases", "effective_matrix",
    "lambda_norm_certificates", "solve_cell", "voigt_reuss",
    "FiberKind", "FiberOperator", "assemble_effective_fiber", "assemble_fiber",
    "eigenvalues", "germ_threshold_check", "spectral_germ",
    "CorrectorVariant", "PlaneWaveSum", "ResolventKind", "SpectralPoint",
    "apply_corrector", "apply_resolvent", "corrector_removal_allowed",
    "fiber_energy_gap", "fiber_flux_gap", "fiber_resolvent_gap",
    "sector_constant", "smoothing_passes",
    "ErrorSweep", "Metric", "Problem", "fit_rate", "modulus_sweep",
    "sector_sweep", "sweep", "sweep_many",
    "__version__",
]

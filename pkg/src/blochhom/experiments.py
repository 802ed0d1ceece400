"""Error sweeps over (eps, zeta, phase, k) with fitted convergence rates.

Each metric measures, per eps, the sup over a fixed Brillouin-zone grid of a
fiber gap at spectral shift zeta * eps^{2p}, rescaled to the physical metric
of the unscaled operator: eps^{2p} for the plain resolvent gap and eps^{p}
for the energy and flux gaps.  Rates are ordinary least-squares slopes of
log(value) against log(eps); the acceptance window is one-sided
(slope >= 0.9) because the underlying estimates are upper bounds.
"""

from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cell import CellSolution
from .errors import CertificationError, ValidationError
from .field import PeriodicMatrixField
from .lattice import brillouin_grid
from .resolvent import FiberTemplate, SpectralPoint, sector_constant
from .symbol import DifferentialSymbol

SLOPE_WINDOW_MIN = 0.9
EXACT_REL_TOL = 1e-11


class Metric(enum.Enum):
    RESOLVENT = "RESOLVENT"
    ENERGY = "ENERGY"
    FLUX = "FLUX"
    NO_SMOOTHING = "NO_SMOOTHING"


@dataclass(frozen=True)
class Problem:
    """A fully prepared homogenization problem for the sweep drivers."""

    problem_id: str
    field: PeriodicMatrixField
    sym: DifferentialSymbol
    sol: CellSolution
    N: int

    @property
    def lattice(self):
        return self.field.lattice


@dataclass(frozen=True)
class ErrorSweep:
    problem_id: str
    metric: Metric
    zeta: SpectralPoint
    eps_grid: tuple
    k_resolution: int
    values: tuple
    slope: float | None
    slope_stderr: float | None
    exact: bool

    @property
    def passes(self) -> bool:
        return self.exact or (self.slope is not None
                              and self.slope >= SLOPE_WINDOW_MIN)


def fit_rate(eps_grid, values) -> tuple[float, float]:
    """OLS slope and standard error of log(value) against log(eps)."""
    eps = np.asarray(eps_grid, dtype=float)
    vals = np.asarray(values, dtype=float)
    if len(eps) < 3:
        raise ValidationError("rate fit needs at least 3 grid points")
    if np.any(vals <= 0.0):
        raise ValidationError("rate fit requires strictly positive values")
    x = np.log(eps)
    y = np.log(vals)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = len(x) - 2
    sigma2 = float(np.sum(resid ** 2) / dof) if dof > 0 else 0.0
    sxx = float(np.sum((x - x.mean()) ** 2))
    return float(slope), float(np.sqrt(sigma2 / sxx))


def _metric_gap(ws, metric: Metric, w: complex) -> float:
    if metric is Metric.RESOLVENT:
        return ws.resolvent_gap(w)
    if metric is Metric.ENERGY:
        return ws.energy_gap(w, smoothed=True)
    if metric is Metric.FLUX:
        return ws.flux_gap(w)
    if metric is Metric.NO_SMOOTHING:
        return ws.energy_gap(w, smoothed=False)
    raise ValidationError(f"unknown metric {metric}")


def _metric_scale(metric: Metric, eps: float, p: int) -> float:
    return eps ** (2 * p) if metric is Metric.RESOLVENT else eps ** p


_WORKER_STATE: dict = {}


def _init_worker(template, metrics, shifts):
    _WORKER_STATE["template"] = template
    _WORKER_STATE["metrics"] = metrics
    _WORKER_STATE["shifts"] = shifts


def _worker_chunk(ks):
    template = _WORKER_STATE["template"]
    metrics = _WORKER_STATE["metrics"]
    shifts = _WORKER_STATE["shifts"]
    out = None
    for k in ks:
        ws = template.workspace(k)
        vals = np.array([[_metric_gap(ws, metric, w) for w in shifts]
                         for metric in metrics])
        out = vals if out is None else np.maximum(out, vals)
    return out


def _max_gaps_over_grid(problem: Problem, metrics, shifts, k_resolution: int,
                        jobs: int = 1) -> np.ndarray:
    """max over the k-grid of each metric's gap at each shift, (metric, shift)."""
    template = FiberTemplate(problem.field, problem.sym, problem.sol.g0,
                             problem.sol, problem.N)
    grid = brillouin_grid(problem.lattice, k_resolution)
    metrics = tuple(metrics)
    shifts = tuple(shifts)
    out = np.zeros((len(metrics), len(shifts)))
    if jobs > 1 and len(grid) > 2 * jobs:
        chunks = [grid[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(template, metrics, shifts)) as pool:
            for res in pool.map(_worker_chunk, chunks):
                if res is not None:
                    out = np.maximum(out, res)
    else:
        _init_worker(template, metrics, shifts)
        res = _worker_chunk(grid)
        if res is not None:
            out = np.maximum(out, res)
        _WORKER_STATE.clear()
    return out


def _validate_eps_grid(eps_grid):
    eps = [float(e) for e in eps_grid]
    if any(e <= 0 for e in eps):
        raise ValidationError("eps grid must be positive")
    for a, b in zip(eps, eps[1:]):
        if not b < a:
            raise ValidationError("eps grid must be strictly descending")
        if abs(a / b - 2.0) > 1e-9:
            raise ValidationError("eps grid must descend with ratio 2")
    return eps


def sweep_many(metrics, problem: Problem, zeta: SpectralPoint, eps_grid,
               k_resolution: int, jobs: int = 1) -> dict:
    """Run several metrics over one (eps, k) sweep, sharing fiber work."""
    eps = _validate_eps_grid(eps_grid)
    p = problem.sym.p
    shifts = [zeta.value * e ** (2 * p) for e in eps]
    gaps = _max_gaps_over_grid(problem, metrics, shifts, k_resolution, jobs)
    sweeps = {}
    for i, metric in enumerate(metrics):
        values = tuple(_metric_scale(metric, e, p) * gaps[i, j]
                       for j, e in enumerate(eps))
        exact = all(v <= EXACT_REL_TOL * max(1.0, 1.0 / zeta.modulus)
                    for v in values)
        slope = stderr = None
        if not exact and len(values) >= 3 and all(v > 0 for v in values):
            slope, stderr = fit_rate(eps, values)
        sweeps[metric] = ErrorSweep(problem_id=problem.problem_id, metric=metric,
                                    zeta=zeta, eps_grid=tuple(eps),
                                    k_resolution=k_resolution, values=values,
                                    slope=slope, slope_stderr=stderr, exact=exact)
    return sweeps


def sweep(metric: Metric, field: PeriodicMatrixField, sym: DifferentialSymbol,
          sol: CellSolution, zeta: SpectralPoint, eps_grid, k_resolution: int,
          N: int, jobs: int = 1, problem_id: str = "problem") -> ErrorSweep:
    """Single-metric sweep; see sweep_many for the shared-work driver."""
    problem = Problem(problem_id=problem_id, field=field, sym=sym, sol=sol, N=N)
    return sweep_many([metric], problem, zeta, eps_grid, k_resolution, jobs)[metric]


@dataclass(frozen=True)
class SectorRow:
    phase: float
    c_phi: float
    value: float
    bound_envelope: float


def sector_sweep(metric: Metric, problem: Problem, modulus: float, phase_grid,
                 eps: float, k_resolution: int, jobs: int = 1,
                 uniformity_factor: float = 4.0) -> list[SectorRow]:
    """Measure one metric across phases at fixed |zeta| and eps.

    Each row carries the envelope shape c(phi)^2 * eps * |zeta|^power.  The
    measured value divided by c(phi)^2 must stay within uniformity_factor of
    its value at phi = pi; a violation raises CertificationError.
    """
    phases = [float(ph) for ph in phase_grid]
    for ph in phases:
        if not 0.0 < ph < 2.0 * np.pi:
            raise ValidationError(f"phase {ph} outside (0, 2*pi)")
    run_phases = list(phases)
    if not any(abs(ph - np.pi) < 1e-12 for ph in run_phases):
        run_phases.append(float(np.pi))
    p = problem.sym.p
    power = (1.0 / (2 * p) - 1.0 if metric is Metric.RESOLVENT
             else 1.0 / (2 * p) - 0.5)
    shifts = [SpectralPoint(modulus, ph).value * eps ** (2 * p)
              for ph in run_phases]
    gaps = _max_gaps_over_grid(problem, [metric], shifts, k_resolution, jobs)[0]
    scale = _metric_scale(metric, eps, p)
    values = {ph: scale * gaps[i] for i, ph in enumerate(run_phases)}
    ref = values[[ph for ph in run_phases if abs(ph - np.pi) < 1e-12][0]]
    exact_floor = EXACT_REL_TOL * max(1.0, 1.0 / modulus)
    rows = []
    for ph in phases:
        c = sector_constant(ph)
        rows.append(SectorRow(phase=ph, c_phi=c, value=values[ph],
                              bound_envelope=c ** 2 * eps * modulus ** power))
    if ref > exact_floor:
        for row in rows:
            if row.value / row.c_phi ** 2 > uniformity_factor * ref:
                raise CertificationError(
                    f"sector uniformity violated at phase {row.phase:.6g}: "
                    f"{row.value / row.c_phi ** 2:.3e} vs reference {ref:.3e}")
    return rows


@dataclass(frozen=True)
class ModulusRow:
    modulus: float
    value: float
    bound_envelope: float


@dataclass(frozen=True)
class ModulusReport:
    rows: list
    fitted_exponent: float | None
    predicted_exponent: float
    exact: bool


def modulus_sweep(metric: Metric, problem: Problem, phase: float,
                  modulus_grid, eps: float, k_resolution: int,
                  jobs: int = 1) -> ModulusReport:
    """Fit the |zeta| exponent of one metric at fixed phase and eps.

    The predicted exponent is the dominant large-|zeta| power: 1/2p - 1 for
    the resolvent metric and 1/2p - 1/2 for the energy and flux metrics.
    """
    moduli = [float(mv) for mv in modulus_grid]
    if any(mv <= 0 for mv in moduli):
        raise ValidationError("moduli must be positive")
    p = problem.sym.p
    predicted = (1.0 / (2 * p) - 1.0 if metric is Metric.RESOLVENT
                 else 1.0 / (2 * p) - 0.5)
    shifts = [SpectralPoint(mv, phase).value * eps ** (2 * p) for mv in moduli]
    gaps = _max_gaps_over_grid(problem, [metric], shifts, k_resolution, jobs)[0]
    scale = _metric_scale(metric, eps, p)
    values = [scale * g for g in gaps]
    c2 = sector_constant(phase) ** 2
    rows = [ModulusRow(modulus=mv, value=v,
                       bound_envelope=c2 * eps * mv ** predicted)
            for mv, v in zip(moduli, values)]
    exact = all(v <= EXACT_REL_TOL for v in values)
    fitted = None
    if not exact and len(moduli) >= 3 and all(v > 0 for v in values):
        fitted, _ = fit_rate(moduli, values)
    return ModulusReport(rows=rows, fitted_exponent=fitted,
                         predicted_exponent=predicted, exact=exact)

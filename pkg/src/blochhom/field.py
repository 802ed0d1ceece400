"""Periodic Hermitian matrix coefficients as truncated Fourier series.

A field stores the coefficients g_hat[z] of
    g(x) = sum_z g_hat[z] * exp(i <s(z), x>)
over integer frequencies z with |z_i| <= support, relative to the dual basis
of its lattice.  Coefficient data constructed from samples or user tables is
validated for Hermitian symmetry (g_hat[-z] = g_hat[z]*) and pointwise
positivity; derived fields (e.g. the flux-weight g-tilde produced by the cell
solver) skip that validation because they need not be Hermitian.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from itertools import product

import numpy as np

from .errors import PositivityError, ValidationError
from .lattice import Lattice

HERMITIAN_TOL = 1e-10
DEFAULT_CHECK_GRID = 64

#: entries below this relative size are dropped when sanitizing derived
#: coefficient tables (removes solver round-off fill-in, keeps exact zeros).
CHOP_REL_TOL = 1e-14


@dataclass(frozen=True)
class PeriodicMatrixField:
    """Matrix-valued periodic function given by its Fourier coefficients."""

    lattice: Lattice
    size: int
    coeffs: dict  # z tuple -> (size, size) complex ndarray
    support: int
    hermitian: bool = True
    bounds_cache: dict = dc_field(default_factory=dict, repr=False, compare=False)

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_coefficients(cls, lattice: Lattice, coeffs: dict,
                          hermitian: bool = True) -> "PeriodicMatrixField":
        """Build a field from a {z: matrix} table.

        With hermitian=True the table must satisfy g_hat[-z] = g_hat[z]* to
        within round-off; symmetry is then enforced exactly by averaging.
        """
        table = {}
        size = None
        for z, mat in coeffs.items():
            z = tuple(int(c) for c in np.atleast_1d(z))
            if len(z) != lattice.dim:
                raise ValidationError(f"frequency {z} is not {lattice.dim}-dimensional")
            mat = np.atleast_2d(np.asarray(mat, dtype=complex))
            if mat.shape[0] != mat.shape[1]:
                raise ValidationError("coefficient matrices must be square")
            if size is None:
                size = mat.shape[0]
            elif mat.shape[0] != size:
                raise ValidationError("all coefficients must share one size")
            table[z] = mat
        if size is None:
            raise ValidationError("field needs at least one coefficient")
        supp = max((max(abs(c) for c in z) for z in table), default=0)
        if hermitian:
            scale = max(np.max(np.abs(m)) for m in table.values())
            sym = {}
            for z, mat in table.items():
                mz = tuple(-c for c in z)
                other = table.get(mz, np.zeros_like(mat))
                if np.max(np.abs(mat - other.conj().T)) > HERMITIAN_TOL * max(scale, 1.0):
                    raise ValidationError(
                        f"coefficients violate Hermitian symmetry at z = {z}")
                sym[z] = 0.5 * (mat + other.conj().T)
            table = sym
        return cls(lattice=lattice, size=size, coeffs=table, support=supp,
                   hermitian=hermitian)

    @classmethod
    def from_grid_samples(cls, lattice: Lattice, samples, support: int,
                          sample_tol: float = HERMITIAN_TOL) -> "PeriodicMatrixField":
        """Discrete Fourier transform of samples on a uniform cell grid.

        samples has shape (M_1, ..., M_d, m, m) with g sampled at the points
        x = basis @ (i_1/M_1, ..., i_d/M_d).  Each M_j must be even and at
        least 2*support + 2 so the requested window is alias-free.
        """
        samples = np.asarray(samples, dtype=complex)
        d = lattice.dim
        if samples.ndim != d + 2 or samples.shape[-1] != samples.shape[-2]:
            raise ValidationError(
                f"expected samples of shape (M_1..M_{d}, m, m), got {samples.shape}")
        grid_shape = samples.shape[:d]
        m = samples.shape[-1]
        for M in grid_shape:
            if M % 2 != 0 or M < 2 * support + 2:
                raise ValidationError(
                    f"grid size {M} must be even and >= {2 * support + 2}")
        scale = max(float(np.max(np.abs(samples))), 1.0)
        herm_gap = np.max(np.abs(samples - samples.conj().swapaxes(-1, -2)))
        if herm_gap > sample_tol * scale:
            raise ValidationError(
                f"samples are not Hermitian (max deviation {herm_gap:.3e})")
        sym_samples = 0.5 * (samples + samples.conj().swapaxes(-1, -2))
        eigs = np.linalg.eigvalsh(sym_samples)
        if np.min(eigs) <= 0.0:
            raise PositivityError(
                f"samples are not positive definite (min eigenvalue {np.min(eigs):.3e})")
        spect = np.fft.fftn(samples, axes=tuple(range(d))) / np.prod(grid_shape)
        coeffs = {}
        for z in product(range(-support, support + 1), repeat=d):
            idx = tuple(zi % M for zi, M in zip(z, grid_shape))
            coeffs[z] = spect[idx]
        return cls.from_coefficients(lattice, coeffs, hermitian=True)

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, x) -> np.ndarray:
        """Pointwise value: sum_z g_hat[z] exp(i <s(z), x>)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros((self.size, self.size), dtype=complex)
        for z, mat in self.coeffs.items():
            out += mat * np.exp(1j * float(np.dot(self.lattice.dual_vector(z), x)))
        return out

    def evaluate_fraction_grid(self, resolution: int) -> np.ndarray:
        """Values on the uniform fractional grid (i_1/R, ..., i_d/R).

        Since <s(z), basis @ f> = 2*pi*<z, f>, the sum is a plain inverse DFT;
        returns shape (R, ..., R, m, m).
        """
        d = self.lattice.dim
        grid = np.zeros((resolution,) * d + (self.size, self.size), dtype=complex)
        for z, mat in self.coeffs.items():
            idx = tuple(zi % resolution for zi in z)
            grid[idx] += mat
        return np.fft.ifftn(grid, axes=tuple(range(d))) * resolution ** d

    def mean(self) -> np.ndarray:
        """Cell average, i.e. the zero Fourier coefficient."""
        zero = (0,) * self.lattice.dim
        return np.array(self.coeffs.get(
            zero, np.zeros((self.size, self.size), dtype=complex)))

    def bounds(self, grid_resolution: int = DEFAULT_CHECK_GRID):
        """Grid estimates (norm_g, norm_ginv, c) of the L-infinity bounds.

        norm_g is the largest eigenvalue of g over the check grid, norm_ginv
        the largest eigenvalue of g^{-1}, and c = 1/norm_ginv the positivity
        constant.  Raises PositivityError if any grid point is not positive
        definite.  The result is cached per resolution.
        """
        if grid_resolution < 8:
            raise ValueError("grid_resolution must be >= 8 per axis")
        if grid_resolution in self.bounds_cache:
            return self.bounds_cache[grid_resolution]
        vals = self.evaluate_fraction_grid(grid_resolution)
        vals = 0.5 * (vals + vals.conj().swapaxes(-1, -2))
        eigs = np.linalg.eigvalsh(vals)
        lo = float(np.min(eigs))
        if lo <= 0.0:
            raise PositivityError(
                f"field is not positive definite on the check grid (min eig {lo:.3e})")
        norm_g = float(np.max(eigs))
        norm_ginv = float(np.max(1.0 / eigs[..., 0]))
        result = (norm_g, norm_ginv, 1.0 / norm_ginv)
        self.bounds_cache[grid_resolution] = result
        return result

    def mean_inverse(self, grid_resolution: int) -> np.ndarray:
        """Grid-quadrature cell average of g(x)^{-1}."""
        vals = self.evaluate_fraction_grid(grid_resolution)
        vals = 0.5 * (vals + vals.conj().swapaxes(-1, -2))
        inv = np.linalg.inv(vals)
        d = self.lattice.dim
        return inv.mean(axis=tuple(range(d)))

    def chopped(self, rel_tol: float = CHOP_REL_TOL) -> dict:
        """Coefficient table with entries below rel_tol * max dropped."""
        scale = max((np.max(np.abs(m)) for m in self.coeffs.values()), default=0.0)
        if scale == 0.0:
            return dict(self.coeffs)
        return {z: m for z, m in self.coeffs.items()
                if np.max(np.abs(m)) > rel_tol * scale}


def from_grid_samples(lattice: Lattice, samples, support: int) -> PeriodicMatrixField:
    return PeriodicMatrixField.from_grid_samples(lattice, samples, support)


def evaluate(fld: PeriodicMatrixField, x) -> np.ndarray:
    return fld.evaluate(x)


def bounds(fld: PeriodicMatrixField, grid_resolution: int = DEFAULT_CHECK_GRID):
    return fld.bounds(grid_resolution)


# -- presets ---------------------------------------------------------------

def cosine1d(lattice: Lattice | None = None, a: float = 2.0,
             b: float = 1.0) -> PeriodicMatrixField:
    """Scalar 1D profile a + b*cos(<s(1), x>); defaults to g = 2 + cos 2 pi x."""
    if lattice is None:
        lattice = Lattice.from_basis([[1.0]])
    if lattice.dim != 1:
        raise ValidationError("cosine1d needs a 1D lattice")
    coeffs = {(0,): [[a]], (1,): [[b / 2.0]], (-1,): [[b / 2.0]]}
    return PeriodicMatrixField.from_coefficients(lattice, coeffs)


def laminate2d(lattice: Lattice | None = None, a: float = 2.0,
               b: float = 1.0) -> PeriodicMatrixField:
    """(a + b*cos of the first dual direction) times the 2x2 identity."""
    if lattice is None:
        lattice = Lattice.from_basis(np.eye(2))
    if lattice.dim != 2:
        raise ValidationError("laminate2d needs a 2D lattice")
    eye = np.eye(2)
    coeffs = {(0, 0): a * eye, (1, 0): (b / 2.0) * eye, (-1, 0): (b / 2.0) * eye}
    return PeriodicMatrixField.from_coefficients(lattice, coeffs)


FIELD_PRESETS = {
    "cosine1d": cosine1d,
    "laminate2d": laminate2d,
}

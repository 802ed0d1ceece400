"""Constant-coefficient homogeneous matrix symbols b(xi) = sum b_a xi^a.

A symbol of order p maps xi in R^d to the m x n matrix
sum_{|a| = p} b_a * xi^a, with constant complex m x n coefficient matrices
b_a.  The library requires m >= n and maximal rank n of b(theta) on the
unit sphere; the ellipticity constants alpha0 <= alpha1 are the extreme
eigenvalues of b(theta)* b(theta) over the sphere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSymbolError, ValidationError

DEFAULT_SPHERE_SAMPLES = 2048
DEFAULT_RANK_TOL = 1e-8


@dataclass(frozen=True)
class MultiIndex:
    """Nonnegative integer multi-index with its order |a| = sum a_j."""

    entries: tuple[int, ...]

    def __post_init__(self):
        if any(e < 0 for e in self.entries):
            raise ValidationError(f"multi-index entries must be >= 0: {self.entries}")

    @property
    def order(self) -> int:
        return sum(self.entries)

    def power(self, xi: np.ndarray):
        """xi^a = xi_1^{a_1} * ... * xi_d^{a_d}."""
        out = 1.0
        for x, a in zip(xi, self.entries):
            if a:
                out = out * x ** a
        return out


@dataclass(frozen=True)
class DifferentialSymbol:
    """Homogeneous order-p symbol with coefficient matrices per multi-index."""

    p: int
    d: int
    m: int
    n: int
    coeffs: dict  # MultiIndex -> complex (m, n) ndarray

    @classmethod
    def from_coefficients(cls, p: int, d: int, coeffs: dict) -> "DifferentialSymbol":
        if p < 1:
            raise ValidationError("symbol order p must be >= 1")
        mats = {}
        shape = None
        for alpha, mat in coeffs.items():
            if not isinstance(alpha, MultiIndex):
                alpha = MultiIndex(tuple(int(a) for a in alpha))
            if len(alpha.entries) != d:
                raise ValidationError(f"multi-index {alpha.entries} is not {d}-dimensional")
            if alpha.order != p:
                raise ValidationError(
                    f"multi-index {alpha.entries} has order {alpha.order}, expected {p}")
            mat = np.atleast_2d(np.asarray(mat, dtype=complex))
            if shape is None:
                shape = mat.shape
            elif mat.shape != shape:
                raise ValidationError("all coefficient matrices must share one shape")
            mats[alpha] = mat
        if shape is None or all(np.all(m == 0) for m in mats.values()):
            raise ValidationError("symbol needs at least one nonzero coefficient")
        m, n = shape
        if m < n:
            raise ValidationError(f"symbol must have m >= n, got m={m}, n={n}")
        return cls(p=p, d=d, m=m, n=n, coeffs=mats)


def evaluate(sym: DifferentialSymbol, xi) -> np.ndarray:
    """Evaluate b(xi); homogeneous of degree p in xi."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros((sym.m, sym.n), dtype=complex)
    for alpha, mat in sym.coeffs.items():
        out += mat * alpha.power(xi)
    return out


def sphere_samples(d: int, count: int) -> np.ndarray:
    """Deterministic low-discrepancy points on S^{d-1}, one per row.

    d=1 uses {-1, +1}; d=2 uniform angles; d=3 a Fibonacci sphere.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        ang = 2.0 * np.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if d == 3:
        # Fibonacci sphere: z stratified, golden-angle azimuth
        i = np.arange(count) + 0.5
        z = 1.0 - 2.0 * i / count
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        phi = np.pi * (1.0 + np.sqrt(5.0)) * i
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    raise ValidationError(f"sphere sampling implemented for d <= 3, got d={d}")


def ellipticity_bounds(sym: DifferentialSymbol,
                       samples: int = DEFAULT_SPHERE_SAMPLES) -> tuple[float, float]:
    """Sampled ellipticity constants (alpha0, alpha1).

    alpha0/alpha1 are the min/max eigenvalues of b(theta)* b(theta) over the
    sampled sphere.  These are estimates of the true inf/sup and are used as
    diagnostics and test bounds only, never inside the core algorithms.
    """
    thetas = sphere_samples(sym.d, samples)
    lo = np.inf
    hi = 0.0
    for theta in thetas:
        b = evaluate(sym, theta)
        ev = np.linalg.eigvalsh(b.conj().T @ b)
        lo = min(lo, ev[0].real)
        hi = max(hi, ev[-1].real)
    if lo <= DEFAULT_RANK_TOL ** 2 * hi:
        raise DegenerateSymbolError(
            f"symbol is degenerate on the sphere (alpha0 = {lo:.3e})")
    return float(lo), float(hi)


def check_rank(sym: DifferentialSymbol, samples: int = DEFAULT_SPHERE_SAMPLES,
               tol: float = DEFAULT_RANK_TOL) -> bool:
    """True iff the least singular value of b(theta) exceeds tol everywhere sampled.

    tol is interpreted relative to the largest sampled singular value.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    thetas = sphere_samples(sym.d, samples)
    smin = np.inf
    smax = 0.0
    for theta in thetas:
        sv = np.linalg.svd(evaluate(sym, theta), compute_uv=False)
        smin = min(smin, sv[-1])
        smax = max(smax, sv[0])
    return bool(smin > tol * smax)


def normalization_margin(sym: DifferentialSymbol, alpha1: float) -> float:
    """max_a |b_a| / sqrt(alpha1); <= 1 for a conventionally normalized symbol."""
    top = max(np.linalg.norm(mat, 2) for mat in sym.coeffs.values())
    return float(top / np.sqrt(alpha1))


def gradient_symbol(d: int) -> DifferentialSymbol:
    """b(D) = D: the gradient, mapping scalars to d-vectors (p=1, m=d, n=1)."""
    coeffs = {}
    for i in range(d):
        alpha = tuple(1 if j == i else 0 for j in range(d))
        mat = np.zeros((d, 1), dtype=complex)
        mat[i, 0] = 1.0
        coeffs[alpha] = mat
    return DifferentialSymbol.from_coefficients(1, d, coeffs)


def pure_power_symbol(d: int, p: int) -> DifferentialSymbol:
    """b(D) with one pure p-th derivative per axis.

    d=1 gives the scalar D^p; d>=2 stacks (D_1^p, ..., D_d^p) into a column
    operator with m=d, n=1.
    """
    coeffs = {}
    for i in range(d):
        alpha = tuple(p if j == i else 0 for j in range(d))
        mat = np.zeros((d, 1), dtype=complex)
        mat[i, 0] = 1.0
        coeffs[alpha] = mat
    return DifferentialSymbol.from_coefficients(p, d, coeffs)


SYMBOL_PRESETS = {
    "grad": lambda d, p=None: gradient_symbol(d),
    "Dp": lambda d, p=1: pure_power_symbol(d, p),
}

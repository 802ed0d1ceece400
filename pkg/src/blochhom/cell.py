"""Periodic cell problem, effective matrix, and its certified bounds.

The corrector matrix L(x) (n x m) is the zero-mean periodic solution of

    b(D)* g(x) (b(D) L(x) + 1_m) = 0,

solved column by column in Fourier space: the Galerkin system lives on the
nonzero frequencies of the k = 0 fiber, where it is Hermitian positive
definite.  The flux weight is g_tilde = g (b(D) L + 1_m); its cell mean is
the effective matrix g0.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from itertools import product

import numpy as np
import scipy.linalg

from .bloch import assemble_coupling, box_modes, pair_table, symbol_on_modes
from .errors import ConvergenceError, CertificationError, NumericalError, \
    PositivityError, ValidationError
from .field import PeriodicMatrixField, CHOP_REL_TOL
from .lattice import Lattice
from .symbol import DifferentialSymbol, evaluate as symbol_eval

DENSE_SOLVE_LIMIT = 4000
DEFAULT_TOL = 1e-10
MEAN_GRID_FLOOR = 64


class SpecialCase(enum.Enum):
    OVER = "OVER"    # g0 equals the arithmetic mean (corrector vanishes)
    UNDER = "UNDER"  # g0 equals the harmonic mean (flux weight constant)
    NONE = "NONE"


@dataclass(frozen=True)
class CellSolution:
    """Corrector coefficients and derived effective data for one problem."""

    symbol: DifferentialSymbol
    field: PeriodicMatrixField
    order: int
    lambda_coeffs: dict          # z tuple -> (n, m) ndarray, z != 0
    residual: float
    g_tilde: PeriodicMatrixField
    g0: np.ndarray

    @property
    def lattice(self) -> Lattice:
        return self.field.lattice


def _cell_system(field, sym, N):
    """Nonzero-frequency block of the k=0 fiber plus right-hand sides."""
    lattice = field.lattice
    d, n, m = lattice.dim, sym.n, sym.m
    zs = box_modes(d, N)
    K = zs.shape[0]
    center = int(np.ravel_multi_index((N,) * d, (2 * N + 1,) * d))
    pts = zs @ lattice.dual_basis.T
    bm = symbol_on_modes(sym, pts)
    pairs = pair_table(d, N, field.coeffs.keys())
    M = assemble_coupling(bm, field.coeffs, pairs, K, n).reshape(K * n, K * n)
    keep = np.ones(K, dtype=bool)
    keep[center] = False
    flat = (np.where(keep)[0][:, None] * n + np.arange(n)[None, :]).ravel()
    A = M[np.ix_(flat, flat)]
    A = 0.5 * (A + A.conj().T)
    # rhs column j at mode z: -b(s(z))^* g_hat[z] e_j
    rhs = np.zeros((K, n, m), dtype=complex)
    for z, mat in field.coeffs.items():
        idx = tuple(c + N for c in z)
        if max(abs(c) for c in z) <= N and not all(c == 0 for c in z):
            flat_idx = int(np.ravel_multi_index(idx, (2 * N + 1,) * d))
            rhs[flat_idx] -= bm[flat_idx].conj().T @ mat
    rhs = rhs[keep].reshape(-1, m)
    return zs[keep], bm, A, rhs


def _pcg(matvec, rhs, diag_blocks, tol, max_iter):
    """Block-Jacobi preconditioned conjugate gradients, multiple RHS columns."""
    x = np.zeros_like(rhs)
    bnorm = np.linalg.norm(rhs, axis=0)
    inv_blocks = np.linalg.inv(diag_blocks)

    def precond(r):
        rb = r.reshape(diag_blocks.shape[0], diag_blocks.shape[1], -1)
        return np.einsum("kij,kjc->kic", inv_blocks, rb).reshape(r.shape)

    r = rhs - matvec(x)
    z = precond(r)
    p = z.copy()
    rz = np.einsum("ic,ic->c", r.conj(), z).real
    for _ in range(max_iter):
        res = np.linalg.norm(r, axis=0)
        if np.all(res <= tol * np.maximum(bnorm, 1e-300)):
            return x
        Ap = matvec(p)
        alpha = rz / np.maximum(np.einsum("ic,ic->c", p.conj(), Ap).real, 1e-300)
        x = x + alpha[None, :] * p
        r = r - alpha[None, :] * Ap
        z = precond(r)
        rz_new = np.einsum("ic,ic->c", r.conj(), z).real
        p = z + (rz_new / np.maximum(rz, 1e-300))[None, :] * p
        rz = rz_new
    res = float(np.max(np.linalg.norm(r, axis=0) / np.maximum(bnorm, 1e-300)))
    raise ConvergenceError(
        f"cell solver stalled at relative residual {res:.3e}", residual=res)


def solve_cell(field: PeriodicMatrixField, sym: DifferentialSymbol, N: int,
               tol: float = DEFAULT_TOL, method: str = "auto") -> CellSolution:
    """Solve the cell problem at truncation N.

    method: "auto" picks the dense Hermitian solve up to DENSE_SOLVE_LIMIT
    unknowns and preconditioned CG beyond; "dense"/"cg" force a path.
    """
    lattice = field.lattice
    if sym.m != field.size:
        raise ValidationError(
            f"field size {field.size} does not match symbol m={sym.m}")
    if sym.d != lattice.dim:
        raise ValidationError("symbol dimension does not match the lattice")
    if N < max(field.support, 1):
        raise ValidationError(f"truncation N={N} below field support {field.support}")
    zs_nz, bm, A, rhs = _cell_system(field, sym, N)
    n, m = sym.n, sym.m
    unknowns = A.shape[0]
    if method == "auto":
        method = "dense" if unknowns <= DENSE_SOLVE_LIMIT else "cg"
    if method == "dense":
        if np.all(rhs == 0):
            x = np.zeros_like(rhs)
        else:
            x = scipy.linalg.solve(A, rhs, assume_a="pos")
    elif method == "cg":
        diag = np.stack([A[i * n:(i + 1) * n, i * n:(i + 1) * n]
                         for i in range(len(zs_nz))])
        x = _pcg(lambda v: A @ v, rhs, diag, tol=0.1 * tol,
                 max_iter=50 * int(np.sqrt(unknowns) + 20))
    else:
        raise ValidationError(f"unknown method {method!r}")
    bnorm = np.linalg.norm(rhs, axis=0)
    rnorm = np.linalg.norm(rhs - A @ x, axis=0)
    residual = float(np.max(rnorm / np.maximum(bnorm, 1e-300))) if np.any(bnorm) else 0.0
    if residual > tol:
        raise ConvergenceError(
            f"cell residual {residual:.3e} above tolerance {tol:.1e}",
            residual=residual)

    lam_raw = x.reshape(len(zs_nz), n, m)
    scale = max(float(np.max(np.abs(lam_raw))), 0.0)
    lambda_coeffs = {}
    for i, z in enumerate(zs_nz):
        if scale > 0.0 and np.max(np.abs(lam_raw[i])) > CHOP_REL_TOL * scale:
            lambda_coeffs[tuple(int(c) for c in z)] = lam_raw[i].copy()

    # flux weight g_tilde = g (b(D) L + 1): coefficient at w picks up
    # g_hat[w - z'] b(s(z')) L_hat[z'] from every corrector mode z'.
    gt = {z: mat.copy() for z, mat in field.coeffs.items()}
    for z, lam in lambda_coeffs.items():
        blam = symbol_eval(sym, lattice.dual_vector(z)) @ lam
        for u, gmat in field.coeffs.items():
            w = tuple(ui + zi for ui, zi in zip(u, z))
            contrib = gmat @ blam
            if w in gt:
                gt[w] = gt[w] + contrib
            else:
                gt[w] = contrib
    zero = (0,) * lattice.dim
    g0 = gt[zero]
    herm_gap = float(np.max(np.abs(g0 - g0.conj().T)))
    if herm_gap > 1e-10 * max(float(np.max(np.abs(g0))), 1e-300):
        raise NumericalError(
            f"effective matrix is not Hermitian (gap {herm_gap:.3e}); "
            "the cell solve is inconsistent")
    g0 = 0.5 * (g0 + g0.conj().T)
    if np.linalg.eigvalsh(g0)[0] <= 0.0:
        raise PositivityError("effective matrix is not positive definite; "
                              "the cell solve is inconsistent")
    gt[zero] = g0
    gt_scale = max(np.max(np.abs(mat)) for mat in gt.values())
    gt = {w: mat for w, mat in gt.items()
          if np.max(np.abs(mat)) > CHOP_REL_TOL * gt_scale}
    g_tilde = PeriodicMatrixField(lattice=lattice, size=m, coeffs=gt,
                                  support=max(max(abs(c) for c in w) for w in gt),
                                  hermitian=False)
    return CellSolution(symbol=sym, field=field, order=N,
                        lambda_coeffs=lambda_coeffs, residual=residual,
                        g_tilde=g_tilde, g0=g0)


def effective_matrix(sol: CellSolution) -> np.ndarray:
    """The effective matrix of a valid cell solution (validated Hermitian PD)."""
    g0 = sol.g0
    if np.linalg.eigvalsh(g0)[0] <= 0.0:
        raise PositivityError("stored effective matrix lost positivity")
    return np.array(g0)


def weak_residual(sol: CellSolution) -> float:
    """Independent dense recomputation of the Galerkin residual."""
    zs_nz, _, A, rhs = _cell_system(sol.field, sol.symbol, sol.order)
    x = np.zeros((len(zs_nz), sol.symbol.n, sol.symbol.m), dtype=complex)
    for i, z in enumerate(zs_nz):
        lam = sol.lambda_coeffs.get(tuple(int(c) for c in z))
        if lam is not None:
            x[i] = lam
    x = x.reshape(-1, sol.symbol.m)
    bnorm = np.linalg.norm(rhs, axis=0)
    if not np.any(bnorm):
        return 0.0
    return float(np.max(np.linalg.norm(rhs - A @ x, axis=0) /
                        np.maximum(bnorm, 1e-300)))


# -- certified bounds --------------------------------------------------------

@dataclass(frozen=True)
class VoigtReussReport:
    g_over: np.ndarray
    g_under: np.ndarray
    holds: bool
    lower_margin: float   # min eigenvalue of g0 - g_under
    upper_margin: float   # min eigenvalue of g_over - g0


def _mean_grid_resolution(field: PeriodicMatrixField) -> int:
    # 4x the coefficient support is exact for trig-polynomial integrands;
    # the floor matters for g^{-1}, which is not one.
    return max(MEAN_GRID_FLOOR, 4 * (field.support + 1))


def voigt_reuss(field: PeriodicMatrixField, g0: np.ndarray,
                tol: float = 1e-8) -> VoigtReussReport:
    """Check the arithmetic/harmonic-mean bracketing of the effective matrix."""
    res = _mean_grid_resolution(field)
    g_over = field.mean()
    g_under = np.linalg.inv(field.mean_inverse(res))
    g_under = 0.5 * (g_under + g_under.conj().T)
    lo = float(np.linalg.eigvalsh(np.asarray(g0) - g_under)[0])
    hi = float(np.linalg.eigvalsh(g_over - np.asarray(g0))[0])
    scale = max(float(np.linalg.norm(g0, 2)), 1.0)
    holds = lo >= -tol * scale and hi >= -tol * scale
    return VoigtReussReport(g_over=g_over, g_under=g_under, holds=holds,
                            lower_margin=lo, upper_margin=hi)


def detect_special_cases(field: PeriodicMatrixField, sym: DifferentialSymbol,
                         sol: CellSolution, tol: float = 1e-8) -> SpecialCase:
    """Classify whether g0 collapses to the arithmetic or harmonic mean.

    OVER requires b(D)* applied to every column of g to vanish (checked
    coefficientwise in Fourier space, which also forces the corrector to
    vanish); UNDER requires the flux weight to be constant.  When both hold
    (constant g), OVER is reported.
    """
    lattice = field.lattice
    scale = 0.0
    worst = 0.0
    for z, mat in field.coeffs.items():
        if all(c == 0 for c in z):
            continue
        b = symbol_eval(sym, lattice.dual_vector(z))
        scale = max(scale, float(np.linalg.norm(b, 2) * np.linalg.norm(mat, 2)))
        worst = max(worst, float(np.max(np.abs(b.conj().T @ mat))))
    if scale == 0.0 or worst <= tol * scale:
        return SpecialCase.OVER
    if sym.m == sym.n:
        return SpecialCase.UNDER
    g0_norm = float(np.linalg.norm(sol.g0, 2))
    off = 0.0
    for w, mat in sol.g_tilde.coeffs.items():
        if any(c != 0 for c in w):
            off = max(off, float(np.max(np.abs(mat))))
    if off <= tol * g0_norm:
        return SpecialCase.UNDER
    return SpecialCase.NONE


@dataclass(frozen=True)
class LambdaCertificates:
    norm_l2: float
    norm_bl2: float
    norm_hp: float
    bound_l2: float
    bound_bl2: float
    bound_hp: float
    ok: bool


def _multiindices_up_to(d: int, p: int):
    for beta in product(range(p + 1), repeat=d):
        if sum(beta) <= p:
            yield beta


def lambda_norm_certificates(sol: CellSolution, alpha0: float,
                             grid_resolution: int = 64) -> LambdaCertificates:
    """Certify the corrector norms against their a-priori constants.

    The L2, b(D)-energy, and H^p norms over the cell are computed from the
    coefficients by Parseval and compared with
        |cell|^{1/2} * C1,  |cell|^{1/2} * C2,  |cell|^{1/2} * C,
    where, with h = 2*r0,
        C1 = sqrt(m) * alpha0^{-1/2} * h^{-p} * sqrt(|g| |g^{-1}|),
        C2 = sqrt(m) * sqrt(|g| |g^{-1}|),
        C  = C2 * alpha0^{-1/2} * sqrt(sum_{|beta| <= p} h^{-2(p - |beta|)}).
    A violation signals a truncation or solver defect and raises.
    """
    lattice = sol.lattice
    sym = sol.symbol
    vol = lattice.cell_volume
    norm_g, norm_ginv, _ = sol.field.bounds(grid_resolution)
    h = 2.0 * lattice.packing_radius
    m = sym.m
    base = np.sqrt(m * norm_g * norm_ginv)
    c1 = base / np.sqrt(alpha0) / h ** sym.p
    c2 = base
    beta_sum = sum(h ** (-2.0 * (sym.p - sum(beta)))
                   for beta in _multiindices_up_to(lattice.dim, sym.p))
    c_hp = c2 / np.sqrt(alpha0) * np.sqrt(beta_sum)

    l2_sq = 0.0
    bl2_sq = 0.0
    hp_sq = 0.0
    for z, lam in sol.lambda_coeffs.items():
        s = lattice.dual_vector(z)
        fro2 = float(np.sum(np.abs(lam) ** 2))
        l2_sq += fro2
        bs = symbol_eval(sym, s)
        bl2_sq += float(np.sum(np.abs(bs @ lam) ** 2))
        weight = sum(float(np.prod(s ** np.array(beta))) ** 2
                     for beta in _multiindices_up_to(lattice.dim, sym.p))
        hp_sq += weight * fro2
    norm_l2 = float(np.sqrt(vol * l2_sq))
    norm_bl2 = float(np.sqrt(vol * bl2_sq))
    norm_hp = float(np.sqrt(vol * hp_sq))
    root_vol = np.sqrt(vol)
    ok = (norm_l2 <= root_vol * c1 * (1 + 1e-12)
          and norm_bl2 <= root_vol * c2 * (1 + 1e-12)
          and norm_hp <= root_vol * c_hp * (1 + 1e-12))
    cert = LambdaCertificates(norm_l2=norm_l2, norm_bl2=norm_bl2,
                              norm_hp=norm_hp, bound_l2=root_vol * c1,
                              bound_bl2=root_vol * c2, bound_hp=root_vol * c_hp,
                              ok=ok)
    if not ok:
        raise CertificationError(f"corrector norm bounds violated: {cert}")
    return cert

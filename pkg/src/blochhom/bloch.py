"""Truncated Bloch fibers of b(D+k)* g b(D+k) on plane waves.

Discretization.  On the cell, the normalized plane waves
e_z(x) = |cell|^{-1/2} exp(i <s(z), x>) over the frequency window
|z_i| <= N form an orthonormal basis.  In that basis the fiber operator at
quasimomentum k is the Hermitian block matrix

    M[(z, :), (z', :)] = b(s(z)+k)^* g_hat[z - z'] b(s(z')+k),

with n x n blocks; the effective fiber replaces g_hat by the constant
effective matrix and is block diagonal.  Assembly is vectorized per
coefficient offset: the (i, j) pairs with z_i - z_j = u form a rectangular
sub-box of the frequency grid and are precomputed once per window.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len

from .errors import NumericalError, PositivityError, ThresholdCheckError, \
    NondegeneracyError, ValidationError
from .field import PeriodicMatrixField
from .lattice import Lattice, frequency_set
from .symbol import DifferentialSymbol, evaluate

HERMITIAN_REL_TOL = 1e-10
PSD_REL_TOL = 1e-10


class FiberKind(enum.Enum):
    FULL = "FULL"
    EFFECTIVE = "EFFECTIVE"


# -- mode bookkeeping on the box grid ---------------------------------------

def box_modes(d: int, N: int) -> np.ndarray:
    """Integer frequencies |z_i| <= N in lexicographic box order, (K, d)."""
    rng = np.arange(-N, N + 1)
    mesh = np.meshgrid(*([rng] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def offset_pairs(d: int, N: int, u) -> tuple[np.ndarray, np.ndarray]:
    """Flat box indices (i, j) with z_i - z_j = u."""
    side = 2 * N + 1
    axes = []
    for c in u:
        lo = max(0, c)
        hi = min(side - 1, side - 1 + c)
        if hi < lo:
            return np.empty(0, dtype=int), np.empty(0, dtype=int)
        axes.append(np.arange(lo, hi + 1))
    mesh = np.meshgrid(*axes, indexing="ij")
    i_multi = tuple(m.ravel() for m in mesh)
    j_multi = tuple(m - c for m, c in zip(i_multi, u))
    shape = (side,) * d
    return (np.ravel_multi_index(i_multi, shape),
            np.ravel_multi_index(j_multi, shape))


def pair_table(d: int, N: int, offsets) -> dict:
    """Precomputed offset -> (i, j) index arrays for a frequency window."""
    return {tuple(u): offset_pairs(d, N, u) for u in offsets}


def symbol_on_modes(sym: DifferentialSymbol, pts: np.ndarray) -> np.ndarray:
    """b evaluated at each row of pts, stacked to (K, m, n)."""
    K = pts.shape[0]
    out = np.zeros((K, sym.m, sym.n), dtype=complex)
    for alpha, mat in sym.coeffs.items():
        powers = np.ones(K)
        for j, a in enumerate(alpha.entries):
            if a:
                powers = powers * pts[:, j] ** a
        out += powers[:, None, None] * mat[None, :, :]
    return out


def assemble_coupling(bmats: np.ndarray, table: dict, pairs: dict,
                      K: int, n: int) -> np.ndarray:
    """Fiber blocks b_i^* table[u] b_j on all pairs; returns (K, n, K, n)."""
    M = np.zeros((K, n, K, n), dtype=complex)
    for u, mat in table.items():
        i_f, j_f = pairs[tuple(u)]
        if len(i_f) == 0:
            continue
        blocks = np.einsum("kmi,mn,knj->kij", bmats[i_f].conj(), mat, bmats[j_f])
        M[i_f, :, j_f, :] += blocks
    return M


def assemble_multiplication(table: dict, pairs: dict, K: int, q: int,
                            r: int) -> np.ndarray:
    """Multiplication-operator blocks table[z_i - z_j], shape (K, q, K, r)."""
    M = np.zeros((K, q, K, r), dtype=complex)
    for u, mat in table.items():
        i_f, j_f = pairs[tuple(u)]
        if len(i_f) == 0:
            continue
        M[i_f, :, j_f, :] += np.broadcast_to(mat, (len(i_f),) + mat.shape)
    return M


# -- fiber operators ---------------------------------------------------------

@dataclass(frozen=True)
class FiberOperator:
    """Truncated Galerkin matrix of a Bloch fiber.

    ``index`` lists (z, s(z)) in the deterministic frequency_set order and
    ``matrix`` is the Hermitian (n*K, n*K) matrix in that ordering.
    """

    k: np.ndarray
    order: int
    index: list
    matrix: np.ndarray
    kind: FiberKind

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u


def _spec_order_permutation(lattice: Lattice, N: int) -> tuple[list, np.ndarray]:
    """frequency_set order -> box-flat index permutation."""
    index = frequency_set(lattice, N)
    side = 2 * N + 1
    perm = np.array([np.ravel_multi_index(tuple(c + N for c in z), (side,) * lattice.dim)
                     for z, _ in index])
    return index, perm


def _expand_block_perm(perm: np.ndarray, n: int) -> np.ndarray:
    return (perm[:, None] * n + np.arange(n)[None, :]).ravel()


def _check_hermitian(M: np.ndarray) -> np.ndarray:
    scale = max(float(np.max(np.abs(M))), 1e-300)
    gap = float(np.max(np.abs(M - M.conj().T)))
    if gap > HERMITIAN_REL_TOL * scale:
        raise NumericalError(f"assembled fiber is not Hermitian (gap {gap:.3e})")
    return 0.5 * (M + M.conj().T)


def assemble_fiber(field: PeriodicMatrixField, sym: DifferentialSymbol,
                   k, N: int) -> FiberOperator:
    """Full fiber b(D+k)* g b(D+k) truncated to the window |z_i| <= N."""
    lattice = field.lattice
    if N < field.support:
        raise ValidationError(f"truncation N={N} below field support {field.support}")
    if sym.m != field.size or sym.d != lattice.dim:
        raise ValidationError("symbol and field dimensions are inconsistent")
    k = np.asarray(k, dtype=float)
    zs = box_modes(lattice.dim, N)
    pts = zs @ lattice.dual_basis.T + k[None, :]
    bm = symbol_on_modes(sym, pts)
    pairs = pair_table(lattice.dim, N, field.coeffs.keys())
    K = zs.shape[0]
    M = assemble_coupling(bm, field.coeffs, pairs, K, sym.n)
    index, perm = _spec_order_permutation(lattice, N)
    flat = _expand_block_perm(perm, sym.n)
    mat = M.reshape(K * sym.n, K * sym.n)[np.ix_(flat, flat)]
    return FiberOperator(k=k, order=N, index=index,
                         matrix=_check_hermitian(mat), kind=FiberKind.FULL)


def assemble_effective_fiber(g0: np.ndarray, sym: DifferentialSymbol,
                             lattice: Lattice, k, N: int) -> FiberOperator:
    """Block-diagonal fiber of the constant-coefficient effective operator."""
    g0 = np.asarray(g0, dtype=complex)
    ev = np.linalg.eigvalsh(0.5 * (g0 + g0.conj().T))
    if ev[0] <= 0.0:
        raise PositivityError(f"effective matrix is not positive definite ({ev[0]:.3e})")
    k = np.asarray(k, dtype=float)
    index = frequency_set(lattice, N)
    pts = np.array([s for _, s in index]) + k[None, :]
    bm = symbol_on_modes(sym, pts)
    eta = np.einsum("kmi,mn,knj->kij", bm.conj(), g0, bm)
    K = len(index)
    mat = np.zeros((K * sym.n, K * sym.n), dtype=complex)
    for i in range(K):
        mat[i * sym.n:(i + 1) * sym.n, i * sym.n:(i + 1) * sym.n] = eta[i]
    return FiberOperator(k=k, order=N, index=index,
                         matrix=_check_hermitian(mat), kind=FiberKind.EFFECTIVE)


def fiber_matvec_convolution(field: PeriodicMatrixField, sym: DifferentialSymbol,
                             k, N: int, u: np.ndarray) -> np.ndarray:
    """Matrix action of the full fiber via padded FFT convolution.

    ``u`` holds mode coefficients of shape (K, n) in box order.  Equivalent
    to the dense assembly for any padding-safe window; intended for windows
    too large to assemble densely.
    """
    lattice = field.lattice
    d, n, m = lattice.dim, sym.n, sym.m
    side = 2 * N + 1
    k = np.asarray(k, dtype=float)
    zs = box_modes(d, N)
    pts = zs @ lattice.dual_basis.T + k[None, :]
    bm = symbol_on_modes(sym, pts)
    w = np.einsum("kmn,kn->km", bm, u.reshape(-1, n))
    # linear convolution with the coefficient table, then read the window back
    L = next_fast_len(side + 2 * field.support)
    wgrid = np.zeros((L,) * d + (m,), dtype=complex)
    wgrid[tuple(slice(0, side) for _ in range(d))] = w.reshape((side,) * d + (m,))
    ggrid = np.zeros((L,) * d + (m, m), dtype=complex)
    for z, mat in field.coeffs.items():
        ggrid[tuple(c % L for c in z)] += mat
    axes = tuple(range(d))
    gw = np.fft.ifftn(
        np.einsum("...mn,...n->...m", np.fft.fftn(ggrid, axes=axes),
                  np.fft.fftn(wgrid, axes=axes)), axes=axes)
    gw = gw[tuple(slice(0, side) for _ in range(d))].reshape(-1, m)
    return np.einsum("kmn,km->kn", bm.conj(), gw)


def eigenvalues(fiber: FiberOperator, count: int) -> np.ndarray:
    """The smallest ``count`` eigenvalues, ascending."""
    if count > fiber.size:
        raise ValidationError(f"count {count} exceeds fiber size {fiber.size}")
    try:
        ev = np.linalg.eigvalsh(fiber.matrix)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericalError(f"fiber eigensolver failed: {exc}") from exc
    scale = max(float(np.max(np.abs(ev))), 1e-300)
    if ev[0] < -PSD_REL_TOL * scale:
        raise NumericalError(
            f"fiber is not positive semidefinite (min eig {ev[0]:.3e})")
    return ev[:count]


def spectral_germ(g0: np.ndarray, sym: DifferentialSymbol, theta,
                  c_star: float | None = None) -> np.ndarray:
    """Germ S(theta) = b(theta)* g0 b(theta) at a unit direction.

    If the nondegeneracy constant c_star = alpha0 / norm(g^{-1}) is supplied,
    eigenvalues below it (beyond a small relative slack) raise
    NondegeneracyError.
    """
    theta = np.asarray(theta, dtype=float)
    if abs(np.linalg.norm(theta) - 1.0) > 1e-12:
        raise ValidationError("theta must be a unit vector")
    b = evaluate(sym, theta)
    S = b.conj().T @ np.asarray(g0, dtype=complex) @ b
    S = 0.5 * (S + S.conj().T)
    if c_star is not None:
        lo = float(np.linalg.eigvalsh(S)[0])
        if lo < c_star * (1.0 - 1e-8):
            raise NondegeneracyError(
                f"germ eigenvalue {lo:.6g} below the guaranteed bound {c_star:.6g}")
    return S


@dataclass(frozen=True)
class ThresholdReport:
    """Small-|k| eigenvalue ratios against the germ prediction."""

    theta: np.ndarray
    t_list: tuple
    germ_eigs: np.ndarray          # ascending eigenvalues of S(theta)
    ratios: np.ndarray             # (len(t_list), n): lambda_l(t) / t^{2p}
    errors: np.ndarray             # |ratios - germ_eigs|
    fit_order: float | None       # log-log convergence order of max error
    fit_constant: float | None    # max over samples of error / t
    exact: bool


def germ_threshold_check(field: PeriodicMatrixField, sym: DifferentialSymbol,
                         theta, t_list, N: int,
                         g0: np.ndarray | None = None,
                         monotone_slack: float = 0.25) -> ThresholdReport:
    """Check that the scaled bottom eigenvalues converge to the germ.

    For each t, the n smallest eigenvalues of the fiber at k = t*theta are
    divided by t^{2p} and compared with the eigenvalues of S(theta); errors
    must shrink essentially monotonically as t decreases.
    """
    theta = np.asarray(theta, dtype=float)
    lattice = field.lattice
    r0 = lattice.packing_radius
    ts = tuple(float(t) for t in t_list)
    if any(not (0.0 < t < r0) for t in ts):
        raise ValidationError(f"every t must lie in (0, r0 = {r0:.6g})")
    if g0 is None:
        from .cell import solve_cell
        g0 = solve_cell(field, sym, N).g0
    germ = np.linalg.eigvalsh(spectral_germ(g0, sym, theta))
    ratios = np.zeros((len(ts), sym.n))
    for i, t in enumerate(ts):
        fib = assemble_fiber(field, sym, t * theta, N)
        ratios[i] = eigenvalues(fib, sym.n) / t ** (2 * sym.p)
    errors = np.abs(ratios - germ[None, :])
    worst = errors.max(axis=1)
    scale = max(float(germ[-1]), 1e-300)
    exact = bool(np.all(worst <= 1e-12 * scale))
    fit_order = fit_constant = None
    if not exact:
        order_desc = np.argsort(ts)[::-1]  # decreasing t
        w = worst[order_desc]
        tt = np.array(ts)[order_desc]
        for a, b in zip(w, w[1:]):
            if b > a * (1.0 + monotone_slack) + 1e-12 * scale:
                raise ThresholdCheckError(
                    f"eigenvalue ratios do not converge monotonically: {w}")
        if len(ts) >= 2 and np.all(w > 0):
            slope, _ = np.polyfit(np.log(tt), np.log(w), 1)
            fit_order = float(slope)
        fit_constant = float(np.max(worst / np.array(ts)))
    return ThresholdReport(theta=theta, t_list=ts, germ_eigs=germ,
                           ratios=ratios, errors=errors, fit_order=fit_order,
                           fit_constant=fit_constant, exact=exact)

"""Fiber resolvent machinery: gaps, correctors, and plane-wave application.

All three error metrics compare the truncated full fiber with its effective
counterpart at a complex spectral shift w = zeta * eps^{2p}:

  resolvent gap   |(M - w)^{-1} - (M_eff - w)^{-1}|
  energy gap      |M^{1/2} ((M - w)^{-1} - (I + L b(D+k)) (M_eff - w)^{-1} P)|
  flux gap        |g b(D+k) (M - w)^{-1} - g~ b(D+k) (M_eff - w)^{-1} P|

with P the zero-frequency block projection and L the corrector multiplier.
Fibers decompose into exactly decoupled frequency components whenever the
coefficient supports do not connect all modes (e.g. laminates); gaps are
evaluated per component, from one Hermitian eigendecomposition per
component reused across every spectral shift.  Modes whose symbol value
vanishes identically (the zero mode at k = 0) contribute exactly zero to
every gap and are excluded, which avoids catastrophic cancellation against
tiny shifts.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .bloch import box_modes, offset_pairs, symbol_on_modes
from .cell import CellSolution, SpecialCase
from .errors import ConditioningError, TruncationError, ValidationError
from .field import PeriodicMatrixField
from .lattice import Lattice, in_brillouin, reduce_frequency
from .symbol import DifferentialSymbol, evaluate as symbol_eval

CONDITION_LIMIT = 1e14
AMPLITUDE_CHOP = 1e-15


# -- spectral parameters -----------------------------------------------------

@dataclass(frozen=True)
class SpectralPoint:
    """zeta = modulus * exp(i*phase) with phase strictly inside (0, 2*pi)."""

    modulus: float
    phase: float

    def __post_init__(self):
        if not self.modulus > 0:
            raise ValidationError(f"|zeta| must be positive, got {self.modulus}")
        if not 0.0 < self.phase < 2.0 * np.pi:
            raise ValidationError(
                f"phase must lie strictly inside (0, 2*pi), got {self.phase}")

    @property
    def value(self) -> complex:
        return self.modulus * cmath.exp(1j * self.phase)

    @classmethod
    def minus_one(cls) -> "SpectralPoint":
        return cls(modulus=1.0, phase=np.pi)


def sector_constant(phase: float) -> float:
    """Resolvent-distance factor c(phi): 1/|sin phi| near the positive axis, else 1."""
    if not 0.0 < phase < 2.0 * np.pi:
        raise ValidationError(f"phase must lie strictly inside (0, 2*pi), got {phase}")
    if phase < np.pi / 2 or phase > 3 * np.pi / 2:
        return 1.0 / abs(math.sin(phase))
    return 1.0


def smoothing_passes(lattice: Lattice, eps: float, xi) -> bool:
    """Sharp low-pass symbol of the scaled zone: True iff eps*xi lies inside."""
    if eps <= 0:
        raise ValidationError("eps must be positive")
    return in_brillouin(lattice, eps * np.asarray(xi, dtype=float))


def corrector_removal_allowed(p: int, d: int, tag) -> bool:
    """Sufficient conditions for dropping the smoothing cutoff: 2p > d, or
    the harmonic-mean special case."""
    if isinstance(tag, SpecialCase):
        tag = tag.value
    return 2 * p > d or tag == "UNDER"


# -- plane-wave sums ---------------------------------------------------------

def _freq_key(freq: np.ndarray) -> tuple:
    return tuple(float(np.round(c, 9)) + 0.0 for c in freq)


@dataclass(frozen=True)
class PlaneWaveSum:
    """Finite combination sum_j c_j exp(i <xi_j, x>) with distinct frequencies.

    Norms are mean-square (per unit volume): the L2 norm is the root sum of
    squared amplitudes, the H^p norm weights each term by (1+|xi|^2)^{p/2}.
    """

    terms: tuple  # ((freq ndarray, amplitude ndarray), ...)

    @classmethod
    def from_terms(cls, terms) -> "PlaneWaveSum":
        merged: dict = {}
        for freq, amp in terms:
            freq = np.asarray(freq, dtype=float)
            amp = np.asarray(amp, dtype=complex).ravel()
            key = _freq_key(freq)
            if key in merged:
                merged[key] = (merged[key][0], merged[key][1] + amp)
            else:
                merged[key] = (freq, amp)
        scale = max((float(np.max(np.abs(a))) for _, a in merged.values()),
                    default=0.0)
        kept = [(k, f, a) for k, (f, a) in merged.items()
                if scale == 0.0 or np.max(np.abs(a)) > AMPLITUDE_CHOP * scale]
        kept.sort(key=lambda t: t[0])
        return cls(terms=tuple((f, a) for _, f, a in kept))

    def scaled(self, factor: complex) -> "PlaneWaveSum":
        return PlaneWaveSum.from_terms((f, factor * a) for f, a in self.terms)

    def plus(self, other: "PlaneWaveSum") -> "PlaneWaveSum":
        return PlaneWaveSum.from_terms(list(self.terms) + list(other.terms))

    def minus(self, other: "PlaneWaveSum") -> "PlaneWaveSum":
        return self.plus(other.scaled(-1.0))

    def norm(self) -> float:
        return math.sqrt(sum(float(np.sum(np.abs(a) ** 2)) for _, a in self.terms))

    def sobolev_norm(self, p: int) -> float:
        total = 0.0
        for f, a in self.terms:
            total += (1.0 + float(np.dot(f, f))) ** p * float(np.sum(np.abs(a) ** 2))
        return math.sqrt(total)


# -- fiber workspaces --------------------------------------------------------

def _symmetrized_offsets(tables, dim) -> list:
    offs = set()
    zero = (0,) * dim
    for table in tables:
        for z in table:
            if z != zero:
                offs.add(z)
                offs.add(tuple(-c for c in z))
    return sorted(offs)


class FiberTemplate:
    """k-independent data for one (field, symbol, g0, corrector, N) problem."""

    def __init__(self, field: PeriodicMatrixField, sym: DifferentialSymbol,
                 g0: np.ndarray, sol: CellSolution | None, N: int):
        lattice = field.lattice
        if N < field.support:
            raise ValidationError(f"truncation N={N} below field support")
        self.field = field
        self.sym = sym
        self.lattice = lattice
        self.g0 = np.asarray(g0, dtype=complex)
        self.sol = sol
        self.N = N
        d = lattice.dim
        self.zs = box_modes(d, N)
        self.K = self.zs.shape[0]
        self.svecs = self.zs @ lattice.dual_basis.T
        self.center = int(np.ravel_multi_index((N,) * d, (2 * N + 1,) * d))
        self.g_table = field.chopped()
        self.lam_table = dict(sol.lambda_coeffs) if sol is not None else {}
        self.gt_table = sol.g_tilde.chopped() if sol is not None else {}
        offsets = _symmetrized_offsets(
            [self.g_table, self.lam_table, self.gt_table], d)
        rows, cols = [], []
        for u in offsets:
            i_f, j_f = offset_pairs(d, N, u)
            rows.append(i_f)
            cols.append(j_f)
        if rows:
            rows = np.concatenate(rows)
            cols = np.concatenate(cols)
        else:
            rows = cols = np.empty(0, dtype=int)
        graph = coo_matrix((np.ones(len(rows)), (rows, cols)),
                           shape=(self.K, self.K))
        n_comp, labels = connected_components(graph, directed=False)
        self.labels = labels
        self.components = [np.where(labels == c)[0] for c in range(n_comp)]
        self.zero_component = self.components[int(labels[self.center])]
        self.zero_lam_stack = self._stack_table(
            self.lam_table, self.zero_component, sym.n, sym.m)
        self.zero_gt_stack = self._stack_table(
            self.gt_table, self.zero_component, sym.m, sym.m)
        self.global_pairs_g = self._global_pairs(self.g_table)
        self.global_pairs_lam = self._global_pairs(self.lam_table)
        self._gm4 = None

    def _stack_table(self, table: dict, modes: np.ndarray, q: int,
                     r: int) -> np.ndarray:
        """table[z] per mode of the zero component, zeros where absent."""
        out = np.zeros((len(modes), q, r), dtype=complex)
        for a, flat in enumerate(modes):
            mat = table.get(tuple(int(c) for c in self.zs[flat]))
            if mat is not None:
                out[a] = mat
        return out

    def _global_pairs(self, table: dict) -> list:
        """(matrix, (i, j) index arrays) per nonempty coefficient offset."""
        out = []
        for u, mat in table.items():
            i_f, j_f = offset_pairs(self.lattice.dim, self.N, u)
            if len(i_f):
                out.append((mat, (i_f, j_f)))
        return out

    def gm_operator(self) -> np.ndarray:
        """Multiplication by g on the window, blocks g_hat[z_i - z_j]."""
        if self._gm4 is None:
            m = self.sym.m
            G = np.zeros((self.K, m, self.K, m), dtype=complex)
            for mat, (i_f, j_f) in self.global_pairs_g:
                G[i_f, :, j_f, :] += np.broadcast_to(mat, (len(i_f), m, m))
            self._gm4 = G
        return self._gm4

    def workspace(self, k) -> "FiberWorkspace":
        return FiberWorkspace(self, np.asarray(k, dtype=float))


class _CompGroup:
    """A batch of equal-size active components, stacked for vectorized math."""

    __slots__ = ("modes", "bm", "eta", "lam", "Q", "size")

    def __init__(self, modes, bm, eta, lam, Q):
        self.modes = modes      # (G, sz) flat mode ids
        self.bm = bm            # (G, sz, m, n)
        self.eta = eta          # (G, sz, n, n)
        self.lam = lam          # (G, S) eigenvalues, S = sz*n
        self.Q = Q              # (G, S, S) eigenvectors
        self.size = modes.shape[1]


def _gather_square(M4: np.ndarray, stack: np.ndarray, q: int,
                   r: int) -> np.ndarray:
    """Gather (G, sz*q, sz*r) blocks from a (K, q, K, r) operator."""
    G, sz = stack.shape
    sub = M4[stack[:, :, None], :, stack[:, None, :], :]
    return sub.transpose(0, 1, 3, 2, 4).reshape(G, sz * q, sz * r)


class FiberWorkspace:
    """All k-dependent fiber data, shared across spectral shifts.

    Components with equal active size are stacked and processed through
    batched eigendecompositions and SVDs; the component holding the zero
    frequency is additionally tracked for the corrector and projection terms.
    """

    def __init__(self, template: FiberTemplate, k: np.ndarray):
        self.t = template
        self.k = k
        sym = template.sym
        n = sym.n
        pts = template.svecs + k[None, :]
        self.bm = symbol_on_modes(sym, pts)
        bnorm = np.max(np.abs(self.bm.reshape(template.K, -1)), axis=1)
        silent = bnorm == 0.0
        self.eta = np.einsum("kmi,mn,knj->kij", self.bm.conj(), template.g0,
                             self.bm)
        M4 = np.zeros((template.K, n, template.K, n), dtype=complex)
        for mat, (i_f, j_f) in template.global_pairs_g:
            blocks = np.einsum("kmi,mn,knj->kij", self.bm[i_f].conj(), mat,
                               self.bm[j_f])
            M4[i_f, :, j_f, :] += blocks
        self._M4 = M4
        self._T4 = None  # corrector multiplier, built on demand

        by_size: dict = {}
        self.zero_loc = None  # (size, row, pos) of the zero mode
        self.zero_active_mask = None
        for comp in template.components:
            active = comp[~silent[comp]]
            if len(active) == 0:
                continue
            if comp is template.zero_component:
                self.zero_active_mask = ~silent[comp]
            by_size.setdefault(len(active), []).append(active)
        self.groups: dict[int, _CompGroup] = {}
        for sz, comps in sorted(by_size.items()):
            stack = np.stack(comps)
            Msub = _gather_square(M4, stack, n, n)
            Msub = 0.5 * (Msub + Msub.conj().swapaxes(-1, -2))
            lam, Q = np.linalg.eigh(Msub)
            self.groups[sz] = _CompGroup(stack, self.bm[stack],
                                         self.eta[stack], lam, Q)
            if not silent[template.center]:
                rows, cols = np.where(stack == template.center)
                if len(rows):
                    self.zero_loc = (sz, int(rows[0]), int(cols[0]))
        self._gm_groups: dict = {}
        self._t_groups: dict = {}
        self._rf_cache: dict = {}

    # -- helpers ------------------------------------------------------------

    def _full_resolvent(self, grp: _CompGroup, w: complex) -> np.ndarray:
        """Cached (M - w)^{-1} per group; callers must not mutate the result."""
        key = (grp.size, w)
        if key not in self._rf_cache:
            inv = 1.0 / (grp.lam - w)
            self._rf_cache[key] = (grp.Q * inv[:, None, :]) @ \
                grp.Q.conj().swapaxes(-1, -2)
        return self._rf_cache[key]

    def _eff_inverse_blocks(self, grp: _CompGroup, w: complex) -> np.ndarray:
        n = self.t.sym.n
        shift = grp.eta - w * np.eye(n)[None, None, :, :]
        if n == 1:
            return 1.0 / shift
        return np.linalg.inv(shift)

    def _eff_resolvent(self, grp: _CompGroup, w: complex) -> np.ndarray:
        n = self.t.sym.n
        G, sz = grp.modes.shape
        inv = self._eff_inverse_blocks(grp, w)
        R = np.zeros((G, sz, n, sz, n), dtype=complex)
        idx = np.arange(sz)
        R[:, idx, :, idx, :] = inv.transpose(1, 0, 2, 3)
        return R.reshape(G, sz * n, sz * n)

    def _zero_mode_data(self, w: complex):
        """(group, row, pos, b(k), (eta_0 - w)^{-1}) or None."""
        if self.zero_loc is None:
            return None
        sz, row, pos = self.zero_loc
        n = self.t.sym.n
        b0 = self.bm[self.t.center]
        y = np.linalg.inv(self.eta[self.t.center] - w * np.eye(n))
        return sz, row, pos, b0, y

    def _zero_columns(self, stack: np.ndarray, b0y: np.ndarray) -> np.ndarray:
        """Stacked blocks table[z] @ b0y over the zero component's active modes."""
        if self.zero_active_mask is not None and not self.zero_active_mask.all():
            stack = stack[self.zero_active_mask]
        cols = stack @ b0y
        return cols.reshape(-1, b0y.shape[1])

    def _lam_conv_b(self) -> np.ndarray:
        """Global corrector multiplier L b(D+k), blocks Lam[z_i - z_j] b_j."""
        if self._T4 is None:
            n = self.t.sym.n
            T4 = np.zeros((self.t.K, n, self.t.K, n), dtype=complex)
            for mat, (i_f, j_f) in self.t.global_pairs_lam:
                T4[i_f, :, j_f, :] += np.einsum("am,kmj->kaj", mat,
                                                self.bm[j_f])
            self._T4 = T4
        return self._T4

    def _gm_group(self, sz: int) -> np.ndarray:
        if sz not in self._gm_groups:
            m = self.t.sym.m
            self._gm_groups[sz] = _gather_square(self.t.gm_operator(),
                                                 self.groups[sz].modes, m, m)
        return self._gm_groups[sz]

    def _t_group(self, sz: int) -> np.ndarray:
        if sz not in self._t_groups:
            n = self.t.sym.n
            self._t_groups[sz] = _gather_square(self._lam_conv_b(),
                                                self.groups[sz].modes, n, n)
        return self._t_groups[sz]

    @staticmethod
    def _max_spectral_norm(stack: np.ndarray, current: float = 0.0) -> float:
        """Largest spectral norm in the stack, Frobenius-prescreened."""
        if stack.size == 0:
            return current
        fro = np.sqrt(np.sum(np.abs(stack) ** 2, axis=(-2, -1)))
        worst = current
        for i in np.argsort(fro)[::-1]:
            if fro[i] <= worst:
                break
            worst = max(worst, float(
                np.linalg.svd(stack[i], compute_uv=False)[0]))
        return worst

    # -- gap metrics ----------------------------------------------------------

    def resolvent_gap(self, w: complex, project: bool = False) -> float:
        n = self.t.sym.n
        zero = self._zero_mode_data(w) if project else None
        worst = 0.0
        for sz, grp in self.groups.items():
            Rf = self._full_resolvent(grp, w)
            if project:
                D = Rf.copy()
                if zero is not None and zero[0] == sz:
                    _, row, pos, _, y = zero
                    D[row, pos * n:(pos + 1) * n, pos * n:(pos + 1) * n] -= y
            else:
                D = Rf - self._eff_resolvent(grp, w)
            worst = self._max_spectral_norm(D, worst)
        return worst

    def energy_gap(self, w: complex, smoothed: bool = True) -> float:
        if self.t.sol is None:
            raise ValidationError("energy gap requires a cell solution")
        n = self.t.sym.n
        zero = self._zero_mode_data(w)
        worst = 0.0
        for sz, grp in self.groups.items():
            X = self._full_resolvent(grp, w)
            if smoothed:
                if zero is not None and zero[0] == sz:
                    _, row, pos, b0, y = zero
                    cols = self._zero_columns(self.t.zero_lam_stack, b0 @ y)
                    cols[pos * n:(pos + 1) * n] += y
                    X = X.copy()
                    X[row, :, pos * n:(pos + 1) * n] -= cols
            else:
                X = X - self._t_group(sz) @ self._eff_resolvent(grp, w)
                if zero is not None and zero[0] == sz:
                    _, row, pos, _, y = zero
                    X[row, pos * n:(pos + 1) * n, pos * n:(pos + 1) * n] -= y
            sqrt_lam = np.sqrt(np.maximum(grp.lam, 0.0))
            Y = sqrt_lam[..., None] * (grp.Q.conj().swapaxes(-1, -2) @ X)
            worst = self._max_spectral_norm(Y, worst)
        return worst

    def flux_gap(self, w: complex) -> float:
        if self.t.sol is None:
            raise ValidationError("flux gap requires a cell solution")
        sym = self.t.sym
        n, m = sym.n, sym.m
        zero = self._zero_mode_data(w)
        worst = 0.0
        for sz, grp in self.groups.items():
            Rf = self._full_resolvent(grp, w)
            G = grp.modes.shape[0]
            S = sz * n
            BR = (grp.bm.reshape(G * sz, m, n) @
                  Rf.reshape(G * sz, n, S)).reshape(G, sz * m, S)
            F = self._gm_group(sz) @ BR
            if zero is not None and zero[0] == sz:
                _, row, pos, b0, y = zero
                cols = self._zero_columns(self.t.zero_gt_stack, b0 @ y)
                F[row, :, pos * n:(pos + 1) * n] -= cols
            worst = self._max_spectral_norm(F, worst)
        return worst

    def solve_shifted(self, flat_mode: int, amp: np.ndarray, zeta: complex,
                      eps: float) -> list[tuple[int, np.ndarray]]:
        """Solve ((1/eps^{2p}) M - zeta) u = amp e_{mode} on the mode's component.

        Returns (flat mode, amplitude) pairs for the nonzero output modes.
        Silent modes solve trivially to -amp/zeta.
        """
        scale = eps ** (-2 * self.t.sym.p)
        n = self.t.sym.n
        for grp in self.groups.values():
            rows, cols = np.where(grp.modes == flat_mode)
            if len(rows) == 0:
                continue
            row, pos = int(rows[0]), int(cols[0])
            lam, Q = grp.lam[row], grp.Q[row]
            shifted = scale * lam - zeta
            cond = float(np.max(np.abs(shifted)) / np.min(np.abs(shifted)))
            if cond > CONDITION_LIMIT:
                raise ConditioningError(
                    f"shifted fiber solve has condition {cond:.3e}")
            rhs = np.zeros(grp.size * n, dtype=complex)
            rhs[pos * n:(pos + 1) * n] = amp
            u = (Q * (1.0 / shifted)[None, :]) @ (Q.conj().T @ rhs)
            out = u.reshape(grp.size, n)
            return [(int(fm), out[i]) for i, fm in enumerate(grp.modes[row])]
        # mode is silent: the fiber acts as zero there
        return [(flat_mode, -np.asarray(amp, dtype=complex) / zeta)]


# -- public gap operations ---------------------------------------------------

def _gap_workspace(field, sym, g0, sol, k, N) -> FiberWorkspace:
    return FiberTemplate(field, sym, g0, sol, N).workspace(k)


def fiber_resolvent_gap(field: PeriodicMatrixField, sym: DifferentialSymbol,
                        g0: np.ndarray, k, N: int, zeta: SpectralPoint,
                        eps: float, project: bool = False) -> float:
    """Spectral norm of (M - w)^{-1} - (M_eff - w)^{-1} at w = zeta eps^{2p}."""
    if eps <= 0:
        raise ValidationError("eps must be positive")
    ws = _gap_workspace(field, sym, g0, None, k, N)
    return ws.resolvent_gap(zeta.value * eps ** (2 * sym.p), project=project)


def fiber_energy_gap(field: PeriodicMatrixField, sym: DifferentialSymbol,
                     sol: CellSolution, k, N: int, zeta: SpectralPoint,
                     eps: float, smoothed: bool = True) -> float:
    """Energy-metric gap including the corrector on the zero-frequency block."""
    if eps <= 0:
        raise ValidationError("eps must be positive")
    ws = _gap_workspace(field, sym, sol.g0, sol, k, N)
    return ws.energy_gap(zeta.value * eps ** (2 * sym.p), smoothed=smoothed)


def fiber_flux_gap(field: PeriodicMatrixField, sym: DifferentialSymbol,
                   sol: CellSolution, k, N: int, zeta: SpectralPoint,
                   eps: float) -> float:
    """Flux-metric gap between g b(D+k) R and g~ b(D+k) R_eff P."""
    if eps <= 0:
        raise ValidationError("eps must be positive")
    ws = _gap_workspace(field, sym, sol.g0, sol, k, N)
    return ws.flux_gap(zeta.value * eps ** (2 * sym.p))


# -- plane-wave application --------------------------------------------------

class ResolventKind(enum.Enum):
    FULL = "FULL"
    EFFECTIVE = "EFFECTIVE"


class CorrectorVariant(enum.Enum):
    SMOOTHED = "SMOOTHED"
    PLAIN = "PLAIN"


def _effective_multiplier(g0, sym, xi, zeta: complex) -> np.ndarray:
    b = symbol_eval(sym, xi)
    return np.linalg.inv(b.conj().T @ g0 @ b - zeta * np.eye(sym.n))


def apply_resolvent(kind: ResolventKind, waves: PlaneWaveSum,
                    zeta: SpectralPoint, eps: float,
                    field: PeriodicMatrixField, sym: DifferentialSymbol,
                    g0: np.ndarray, N: int) -> PlaneWaveSum:
    """Apply (A_eps - zeta)^{-1} (FULL) or (A0 - zeta)^{-1} (EFFECTIVE).

    FULL waves are reduced to their scaled Bloch fiber, solved on the
    truncated window, and returned at frequencies (s(z) + k)/eps.
    """
    if eps <= 0:
        raise ValidationError("eps must be positive")
    lattice = field.lattice
    z = zeta.value
    if kind is ResolventKind.EFFECTIVE:
        out = [(f, _effective_multiplier(g0, sym, f, z) @ a)
               for f, a in waves.terms]
        return PlaneWaveSum.from_terms(out)

    template = FiberTemplate(field, sym, g0, None, N)
    groups: dict = {}
    for f, a in waves.terms:
        zvec, k = reduce_frequency(lattice, eps * np.asarray(f))
        if max(abs(int(c)) for c in zvec) > N:
            raise TruncationError(
                f"frequency {np.asarray(f)} reduces outside the window |z| <= {N}")
        key = _freq_key(k)
        groups.setdefault(key, (k, []))[1].append((tuple(int(c) for c in zvec), a))
    out_terms = []
    side = 2 * N + 1
    for k, items in groups.values():
        ws = template.workspace(k)
        for zvec, amp in items:
            flat = int(np.ravel_multi_index(
                tuple(c + N for c in zvec), (side,) * lattice.dim))
            for fm, uvec in ws.solve_shifted(flat, amp, z, eps):
                freq = (template.svecs[fm] + k) / eps
                out_terms.append((freq, uvec))
    return PlaneWaveSum.from_terms(out_terms)


def apply_corrector(variant: CorrectorVariant, waves: PlaneWaveSum,
                    zeta: SpectralPoint, eps: float, sol: CellSolution,
                    g0: np.ndarray, sym: DifferentialSymbol,
                    lattice: Lattice) -> PlaneWaveSum:
    """Corrector action L(x/eps) b(D) (A0 - zeta)^{-1} [Pi_eps] on a wave sum.

    SMOOTHED drops any wave whose scaled frequency leaves the Brillouin zone
    before applying the corrector; PLAIN keeps all waves.  The first-order
    approximation of the resolvent is u0 + eps^p * (this output).
    """
    if eps <= 0:
        raise ValidationError("eps must be positive")
    z = zeta.value
    out = []
    for f, a in waves.terms:
        if variant is CorrectorVariant.SMOOTHED and not smoothing_passes(
                lattice, eps, f):
            continue
        u0 = _effective_multiplier(g0, sym, f, z) @ a
        w = symbol_eval(sym, f) @ u0
        for zvec, lam in sol.lambda_coeffs.items():
            freq = np.asarray(f, dtype=float) + lattice.dual_vector(zvec) / eps
            out.append((freq, lam @ w))
    return PlaneWaveSum.from_terms(out)

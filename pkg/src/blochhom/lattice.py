"""Period lattice geometry: dual basis, Brillouin zone, frequency bookkeeping.

Conventions.  A lattice is generated by the columns n_1..n_d of ``basis``;
the dual basis s^1..s^d (columns of ``dual_basis``) satisfies
<s^i, n_j> = 2*pi*delta_ij.  Dual-lattice vectors are s(z) = sum_i z_i s^i
for integer z.  The central Brillouin zone is the open Voronoi cell of the
dual lattice at the origin: all k with |k| < |k - s| for every nonzero dual
vector s.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import GeometryError

#: window half-width used to enumerate dual vectors for the packing radius
#: and Brillouin membership; adequate for basis condition numbers <= 10.
DEFAULT_ENUM_BOUND = 4

#: the construction guard recomputes the packing radius in this wider window.
GUARD_ENUM_BOUND = 8


def _dual_of(basis: np.ndarray) -> np.ndarray:
    # columns s^i with <s^i, n_j> = 2*pi*delta_ij, i.e. 2*pi * inv(basis)^T
    return 2.0 * np.pi * np.linalg.inv(basis).T


def _nonzero_window(d: int, bound: int) -> np.ndarray:
    zs = np.array([z for z in product(range(-bound, bound + 1), repeat=d)
                   if any(z)], dtype=int)
    return zs


@dataclass(frozen=True)
class Lattice:
    """Immutable lattice with derived dual geometry.

    Attributes:
        dim: space dimension d >= 1.
        basis: (d, d) matrix whose columns generate the lattice.
        dual_basis: (d, d) matrix whose columns are the 2*pi-biorthogonal
            dual generators.
        cell_volume: |det basis|.
        packing_radius: half the norm of the shortest nonzero dual vector
            (the largest ball radius inscribed in the closed Brillouin zone).
    """

    dim: int
    basis: np.ndarray
    dual_basis: np.ndarray = field(repr=False)
    cell_volume: float
    packing_radius: float

    @classmethod
    def from_basis(cls, basis, det_tol: float = 1e-12) -> "Lattice":
        basis = np.asarray(basis, dtype=float)
        if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
            raise GeometryError(f"lattice basis must be square, got {basis.shape}")
        d = basis.shape[0]
        vol = abs(np.linalg.det(basis))
        scale = max(np.max(np.abs(basis)), 1.0) ** d
        if vol < det_tol * scale:
            raise GeometryError("lattice basis is singular or near-singular "
                                f"(|det| = {vol:.3e})")
        dual = _dual_of(basis)
        lat = cls(dim=d, basis=basis, dual_basis=dual, cell_volume=vol,
                  packing_radius=0.0)
        r0 = packing_radius(lat, DEFAULT_ENUM_BOUND)
        r0_guard = packing_radius(lat, GUARD_ENUM_BOUND)
        if abs(r0 - r0_guard) > 1e-12 * r0_guard:
            raise GeometryError(
                "shortest dual vector not contained in the default enumeration "
                f"window (r0 = {r0:.6g} vs {r0_guard:.6g} at bound "
                f"{GUARD_ENUM_BOUND}); the basis is too skewed")
        object.__setattr__(lat, "packing_radius", r0)
        return lat

    def dual_vector(self, z) -> np.ndarray:
        """Dual-lattice vector s(z) = sum_i z_i s^i."""
        return self.dual_basis @ np.asarray(z, dtype=float)

    def dual_window(self, bound: int = DEFAULT_ENUM_BOUND) -> np.ndarray:
        """All nonzero dual vectors with |z_i| <= bound, one per row."""
        zs = _nonzero_window(self.dim, bound)
        return zs @ self.dual_basis.T


def dual_basis(lattice: Lattice) -> np.ndarray:
    """Columns s^i biorthogonal to the lattice generators: <s^i, n_j> = 2*pi*d_ij."""
    return _dual_of(lattice.basis)


def packing_radius(lattice: Lattice, enum_bound: int = DEFAULT_ENUM_BOUND) -> float:
    """Half the minimal norm of a nonzero dual vector within the window.

    With the default window this is the true packing radius for every
    moderately conditioned basis (the construction guard enforces it).
    """
    if enum_bound < 1:
        raise ValueError("enum_bound must be >= 1")
    svecs = lattice.dual_window(enum_bound)
    return 0.5 * float(np.min(np.linalg.norm(svecs, axis=1)))


def in_brillouin(lattice: Lattice, k) -> bool:
    """Strict membership of k in the open central Brillouin zone.

    True iff |k| < |k - s| for every nonzero dual vector s in the
    enumeration window; boundary points report False.
    """
    k = np.asarray(k, dtype=float)
    svecs = lattice.dual_window()
    d2 = np.sum((k[None, :] - svecs) ** 2, axis=1)
    return bool(np.all(np.dot(k, k) < d2))


def _in_brillouin_many(lattice: Lattice, ks: np.ndarray) -> np.ndarray:
    svecs = lattice.dual_window()
    k2 = np.sum(ks ** 2, axis=1)
    d2 = np.sum((ks[:, None, :] - svecs[None, :, :]) ** 2, axis=2)
    return np.all(k2[:, None] < d2, axis=1)


def frequency_set(lattice: Lattice, order: int):
    """Deterministically ordered frequency window for Galerkin truncation.

    Returns the list of (z, s(z)) for all integer z with |z_i| <= order.
    z = 0 is always first; the remainder is sorted by (max-norm shell,
    |s|^2-free tie key |z|^2, lexicographic z), which makes
    frequency_set(N) an exact prefix of frequency_set(N+1).
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    zs = list(product(range(-order, order + 1), repeat=lattice.dim))
    zs.sort(key=lambda z: (max(abs(c) for c in z),
                           sum(c * c for c in z), z))
    return [(z, lattice.dual_vector(z)) for z in zs]


def brillouin_grid(lattice: Lattice, resolution: int) -> list[np.ndarray]:
    """Quasi-uniform sample of the closed Brillouin zone.

    Grids the fractional box [-1/2, 1/2]^d with resolution+1 nodes per axis,
    maps through the dual basis and keeps points passing in_brillouin;
    k = 0 is always included.  Points are returned sorted by (|k|^2, k).
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    fr = np.linspace(-0.5, 0.5, resolution + 1)
    mesh = np.meshgrid(*([fr] * lattice.dim), indexing="ij")
    fracs = np.stack([m.ravel() for m in mesh], axis=1)
    ks = fracs @ lattice.dual_basis.T
    keep = _in_brillouin_many(lattice, ks)
    pts = ks[keep]
    if not np.any(np.all(pts == 0.0, axis=1) if len(pts) else [False]):
        pts = np.vstack([np.zeros(lattice.dim), pts]) if len(pts) else \
            np.zeros((1, lattice.dim))
    order = np.lexsort(tuple(pts[:, i] for i in range(lattice.dim - 1, -1, -1))
                       + (np.sum(pts ** 2, axis=1),))
    pts = pts[order]
    if len(pts) == 0:
        raise GeometryError("empty Brillouin grid")  # unreachable: k=0 kept
    return [pts[i] for i in range(len(pts))]


def reduce_frequency(lattice: Lattice, xi) -> tuple[np.ndarray, np.ndarray]:
    """Split xi = s + k with s a dual-lattice vector and k in clos(Brillouin).

    Rounds the fractional dual coordinates to the nearest integer and then
    refines over the adjacent integer offsets so that k lands in the Voronoi
    cell even for skewed bases; ties break toward the smaller |z|.
    """
    xi = np.asarray(xi, dtype=float)
    frac = np.linalg.solve(lattice.dual_basis, xi)
    z0 = np.rint(frac).astype(int)
    best = None
    for off in product((-1, 0, 1), repeat=lattice.dim):
        z = z0 + np.array(off, dtype=int)
        k = xi - lattice.dual_basis @ z
        key = (np.dot(k, k), np.dot(z, z))
        if best is None or key < best[0]:
            best = (key, z)
    z = best[1]
    return z, xi - lattice.dual_basis @ z

"""Tests for lattice geometry and Brillouin-zone sampling."""

import numpy as np
import pytest

from blochhom.errors import GeometryError
from blochhom.lattice import (Lattice, brillouin_grid, dual_basis,
                              frequency_set, in_brillouin, packing_radius,
                              reduce_frequency)

TWO_PI = 2.0 * np.pi


def skew2d():
    # columns (1, 0) and (0.5, 1)
    return Lattice.from_basis(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_dual_basis_1d():
    lat = Lattice.from_basis([[1.0]])
    np.testing.assert_allclose(dual_basis(lat), [[TWO_PI]], rtol=1e-15)


def test_dual_basis_identity():
    lat = Lattice.from_basis(np.eye(2))
    np.testing.assert_allclose(dual_basis(lat), TWO_PI * np.eye(2), rtol=1e-15)


def test_dual_basis_skew_biorthogonality():
    lat = skew2d()
    # columns 2*pi*(1, -0.5) and 2*pi*(0, 1), forced by <s^i, n_j> = 2*pi*d_ij
    np.testing.assert_allclose(lat.dual_basis,
                               TWO_PI * np.array([[1.0, 0.0], [-0.5, 1.0]]),
                               atol=1e-12)
    gram = lat.dual_basis.T @ lat.basis
    np.testing.assert_allclose(gram, TWO_PI * np.eye(2), atol=1e-12)


def test_singular_basis_rejected():
    with pytest.raises(GeometryError):
        Lattice.from_basis([[1.0, 2.0], [2.0, 4.0]])


def test_cell_volume():
    lat = skew2d()
    assert lat.cell_volume == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_packing_radius_integer_lattice(d):
    lat = Lattice.from_basis(np.eye(d))
    assert packing_radius(lat) == pytest.approx(np.pi, rel=1e-14)


def test_packing_radius_stretched_1d():
    lat = Lattice.from_basis([[2.0]])
    assert packing_radius(lat) == pytest.approx(np.pi / 2, rel=1e-14)


def test_packing_radius_skew():
    # enumerating |z_i| <= 4 gives min dual norm 2*pi, so r0 = pi
    lat = skew2d()
    svecs = lat.dual_window(4)
    assert 0.5 * np.min(np.linalg.norm(svecs, axis=1)) == pytest.approx(np.pi)
    assert lat.packing_radius == pytest.approx(np.pi, rel=1e-14)


def test_packing_radius_rotation_invariant():
    rng = np.random.default_rng(7)
    for d in (2, 3):
        base = np.eye(d) + 0.2 * rng.standard_normal((d, d))
        r_ref = Lattice.from_basis(base).packing_radius
        for _ in range(5):
            q, _ = np.linalg.qr(rng.standard_normal((d, d)))
            r_rot = Lattice.from_basis(q @ base).packing_radius
            assert abs(r_rot - r_ref) < 1e-10
        # relabeling columns leaves the lattice unchanged
        perm = rng.permutation(d)
        assert Lattice.from_basis(base[:, perm]).packing_radius == \
            pytest.approx(r_ref, abs=1e-12)


def test_in_brillouin_1d():
    lat = Lattice.from_basis([[1.0]])
    assert in_brillouin(lat, [3.0])            # 3 < pi
    assert in_brillouin(lat, [0.0])
    assert not in_brillouin(lat, [np.pi])      # boundary is excluded
    assert not in_brillouin(lat, [4.0])


def test_in_brillouin_origin_always_inside():
    for lat in (Lattice.from_basis([[1.0]]), skew2d(),
                Lattice.from_basis(np.eye(3))):
        assert in_brillouin(lat, np.zeros(lat.dim))


def test_frequency_set_1d():
    lat = Lattice.from_basis([[1.0]])
    zs = [z for z, _ in frequency_set(lat, 1)]
    assert zs == [(0,), (-1,), (1,)]
    svals = [s[0] for _, s in frequency_set(lat, 1)]
    np.testing.assert_allclose(svals, [0.0, -TWO_PI, TWO_PI])


def test_frequency_set_1d_order3():
    lat = Lattice.from_basis([[1.0]])
    zs = [z for z, _ in frequency_set(lat, 3)]
    assert len(zs) == 7
    assert zs == [(0,), (-1,), (1,), (-2,), (2,), (-3,), (3,)]


def test_frequency_set_2d():
    lat = Lattice.from_basis(np.eye(2))
    entries = frequency_set(lat, 1)
    assert len(entries) == 9
    assert entries[0][0] == (0, 0)


@pytest.mark.parametrize("d,N", [(1, 3), (2, 2), (3, 1)])
def test_frequency_set_prefix_property(d, N):
    lat = Lattice.from_basis(np.eye(d))
    small = [z for z, _ in frequency_set(lat, N)]
    large = [z for z, _ in frequency_set(lat, N + 1)]
    assert large[:len(small)] == small


def test_brillouin_grid_1d():
    lat = Lattice.from_basis([[1.0]])
    pts = brillouin_grid(lat, 4)
    assert any(np.all(p == 0.0) for p in pts)
    for p in pts:
        assert -np.pi < p[0] < np.pi
        assert in_brillouin(lat, p)


def test_brillouin_grid_resolution_one():
    lat = Lattice.from_basis([[1.0]])
    pts = brillouin_grid(lat, 1)
    assert len(pts) == 1
    np.testing.assert_allclose(pts[0], [0.0])


def test_brillouin_grid_2d_membership():
    lat = Lattice.from_basis(np.eye(2))
    pts = brillouin_grid(lat, 8)
    assert len(pts) > 1
    for p in pts:
        assert in_brillouin(lat, p)
    # points stay inside the self-consistent radius
    rmax = max(np.linalg.norm(p) for p in pts)
    assert all(np.linalg.norm(p) <= rmax for p in pts)


def test_volume_product_identity():
    # |cell| * |zone| = (2*pi)^d, zone area estimated on a fine fractional grid
    lat = skew2d()
    res = 400
    fr = (np.arange(res) + 0.5) / res - 0.5
    mesh = np.meshgrid(fr, fr, indexing="ij")
    fracs = np.stack([m.ravel() for m in mesh], axis=1)
    ks = 2.0 * fracs @ lat.dual_basis.T  # double cell: contains the zone
    inside = np.fromiter((in_brillouin(lat, k) for k in ks), dtype=bool)
    cell_area = abs(np.linalg.det(2.0 * lat.dual_basis))
    zone_est = cell_area * np.mean(inside)
    assert zone_est == pytest.approx(TWO_PI ** 2 / lat.cell_volume, rel=0.01)


def test_reduce_frequency_roundtrip():
    lat = skew2d()
    rng = np.random.default_rng(3)
    for _ in range(50):
        xi = 20.0 * rng.standard_normal(2)
        z, k = reduce_frequency(lat, xi)
        np.testing.assert_allclose(lat.dual_vector(z) + k, xi, atol=1e-10)
        # k lands in the closed zone: no strictly closer dual vector
        svecs = lat.dual_window(4)
        d2 = np.sum((k[None, :] - svecs) ** 2, axis=1)
        assert np.dot(k, k) <= np.min(d2) + 1e-10

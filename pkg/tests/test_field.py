"""Tests for periodic coefficient fields."""

import numpy as np
import pytest
from scipy.integrate import quad

from blochhom.errors import PositivityError, ValidationError
from blochhom.field import PeriodicMatrixField, cosine1d, laminate2d
from blochhom.lattice import Lattice


def unit_lattice():
    return Lattice.from_basis([[1.0]])


def sample_scalar(fn, M):
    xs = np.arange(M) / M
    return np.array([[[fn(x)]] for x in xs], dtype=complex)


def test_constant_samples():
    lat = Lattice.from_basis(np.eye(2))
    G = np.array([[2.0, 0.5], [0.5, 1.0]])
    samples = np.broadcast_to(G, (8, 8, 2, 2)).astype(complex)
    fld = PeriodicMatrixField.from_grid_samples(lat, samples, support=1)
    np.testing.assert_allclose(fld.coeffs[(0, 0)], G, atol=1e-14)
    for z, mat in fld.coeffs.items():
        if z != (0, 0):
            assert np.max(np.abs(mat)) < 1e-14


def test_cosine_samples():
    fld = PeriodicMatrixField.from_grid_samples(
        unit_lattice(), sample_scalar(lambda x: 2 + np.cos(2 * np.pi * x), 64),
        support=2)
    assert fld.coeffs[(0,)][0, 0] == pytest.approx(2.0, abs=1e-14)
    assert fld.coeffs[(1,)][0, 0] == pytest.approx(0.5, abs=1e-14)
    assert fld.coeffs[(-1,)][0, 0] == pytest.approx(0.5, abs=1e-14)
    assert np.abs(fld.coeffs[(2,)][0, 0]) < 1e-14


def test_exp_sin_against_quadrature():
    fn = lambda x: np.exp(np.sin(2 * np.pi * x))
    fld = PeriodicMatrixField.from_grid_samples(
        unit_lattice(), sample_scalar(fn, 64), support=6)
    for z in range(-6, 7):
        re, _ = quad(lambda x: fn(x) * np.cos(-2 * np.pi * z * x), 0, 1,
                     limit=200, epsabs=1e-13)
        im, _ = quad(lambda x: fn(x) * np.sin(-2 * np.pi * z * x), 0, 1,
                     limit=200, epsabs=1e-13)
        assert fld.coeffs[(z,)][0, 0] == pytest.approx(re + 1j * im, abs=1e-10)


def test_rejects_non_hermitian_samples():
    lat = unit_lattice()
    samples = np.broadcast_to(np.array([[1.0, 1.0], [0.0, 1.0]]),
                              (8, 2, 2)).astype(complex)
    with pytest.raises(ValidationError):
        PeriodicMatrixField.from_grid_samples(lat, samples, support=1)


def test_rejects_indefinite_samples():
    samples = sample_scalar(lambda x: np.cos(2 * np.pi * x), 16)  # hits zero
    with pytest.raises(PositivityError):
        PeriodicMatrixField.from_grid_samples(unit_lattice(), samples, support=1)


def test_evaluate_constant():
    lat = Lattice.from_basis(np.eye(2))
    G = np.array([[2.0, 0.0], [0.0, 3.0]])
    fld = PeriodicMatrixField.from_coefficients(lat, {(0, 0): G})
    for x in ([0.0, 0.0], [0.3, 0.7], [-1.2, 2.5]):
        np.testing.assert_allclose(fld.evaluate(x), G, atol=1e-14)


def test_evaluate_cosine_points():
    fld = cosine1d()
    assert fld.evaluate([0.0])[0, 0].real == pytest.approx(3.0)
    assert fld.evaluate([0.5])[0, 0].real == pytest.approx(1.0)


def test_evaluate_periodicity():
    fld = laminate2d()
    x = np.array([0.37, 0.81])
    for n in ([1.0, 0.0], [2.0, -3.0]):
        np.testing.assert_allclose(fld.evaluate(x + np.array(n)),
                                   fld.evaluate(x), atol=1e-12)


def test_evaluate_hermitian():
    rng = np.random.default_rng(2)
    lat = Lattice.from_basis(np.eye(2))
    a = 0.5 * (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
    coeffs = {(0, 0): 6 * np.eye(2), (1, 1): a, (-1, -1): a.conj().T}
    fld = PeriodicMatrixField.from_coefficients(lat, coeffs)
    norm, _, _ = fld.bounds(16)
    for _ in range(10):
        x = rng.random(2)
        v = fld.evaluate(x)
        assert np.max(np.abs(v - v.conj().T)) < 1e-12 * norm


def test_bounds_cosine():
    norm_g, norm_ginv, c = cosine1d().bounds(64)
    assert norm_g == pytest.approx(3.0, abs=1e-12)
    assert norm_ginv == pytest.approx(1.0, abs=1e-12)
    assert c == pytest.approx(1.0, abs=1e-12)


def test_bounds_constant_diag():
    lat = unit_lattice()
    fld = PeriodicMatrixField.from_coefficients(
        lat, {(0,): np.diag([1.0, 4.0])})
    norm_g, norm_ginv, c = fld.bounds(8)
    assert norm_g == pytest.approx(4.0)
    assert norm_ginv == pytest.approx(1.0)
    assert c == pytest.approx(1.0)


def test_bounds_grid_refinement():
    coarse = cosine1d().bounds(16)
    fine = cosine1d().bounds(256)
    for a, b in zip(coarse, fine):
        assert abs(a - b) <= 0.02 * abs(b)


def test_parseval():
    fld = laminate2d()
    res = 32
    vals = fld.evaluate_fraction_grid(res)
    grid_mean = np.mean(np.sum(np.abs(vals) ** 2, axis=(-2, -1)))
    coeff_sum = sum(np.sum(np.abs(mat) ** 2) for mat in fld.coeffs.values())
    assert grid_mean == pytest.approx(coeff_sum, rel=1e-8)


def test_sample_roundtrip():
    lat = unit_lattice()
    fn = lambda x: 2 + np.cos(2 * np.pi * x) + 0.25 * np.sin(4 * np.pi * x)
    M = 32
    samples = sample_scalar(fn, M)
    fld = PeriodicMatrixField.from_grid_samples(lat, samples, support=4)
    back = fld.evaluate_fraction_grid(M)
    np.testing.assert_allclose(back, samples, atol=1e-12)


def test_hermitian_symmetry_enforced():
    lat = unit_lattice()
    with pytest.raises(ValidationError):
        PeriodicMatrixField.from_coefficients(
            lat, {(0,): [[2.0]], (1,): [[0.5]], (-1,): [[0.4]]})

"""Tests for the cell problem, effective matrix, and certified bounds.

Closed-form oracle for the scalar 1D profile g = 2 + cos(2 pi x): for any
order p the flux g (D^p v + 1) is the constant harmonic mean
    g_h = (integral of 1/g)^{-1} = sqrt(3),
and the corrector coefficients follow from D^p v = g_h / g - 1 in Fourier
space.  With 1/(2 + cos t) = 3^{-1/2} * sum_z (-1)^z rho^{|z|} e^{izt},
rho = 2 - sqrt(3), this gives
    v_hat[z] = (-1)^z rho^{|z|} / (2 pi z)^p,   z != 0.
"""

import numpy as np
import pytest

from blochhom.cell import (SpecialCase, detect_special_cases, effective_matrix,
                           lambda_norm_certificates, solve_cell, voigt_reuss,
                           weak_residual)
from blochhom.errors import ValidationError
from blochhom.field import PeriodicMatrixField, cosine1d, laminate2d
from blochhom.lattice import Lattice
from blochhom.symbol import (DifferentialSymbol, ellipticity_bounds,
                             gradient_symbol, pure_power_symbol)

RHO = 2.0 - np.sqrt(3.0)
SQRT3 = np.sqrt(3.0)


def unit_lattice():
    return Lattice.from_basis([[1.0]])


def cosine_lambda_oracle(z, p):
    return (-1) ** z * RHO ** abs(z) / (2 * np.pi * z) ** p


def test_harmonic_mean_quadrature_oracle():
    # cross-check the closed-form integral of 1/(2 + cos 2 pi x)
    xs = (np.arange(4096) + 0.5) / 4096
    mean_inv = np.mean(1.0 / (2.0 + np.cos(2 * np.pi * xs)))
    assert 1.0 / mean_inv == pytest.approx(SQRT3, abs=1e-12)


def test_constant_field_trivial():
    lat = Lattice.from_basis(np.eye(2))
    G = np.array([[2.0, 0.3], [0.3, 1.0]])
    fld = PeriodicMatrixField.from_coefficients(lat, {(0, 0): G})
    sol = solve_cell(fld, gradient_symbol(2), 4)
    assert not sol.lambda_coeffs
    np.testing.assert_allclose(sol.g0, G, atol=1e-14)
    np.testing.assert_allclose(effective_matrix(sol), G, atol=1e-14)


@pytest.mark.parametrize("p", [1, 2])
def test_cosine_effective_matrix(p):
    sol = solve_cell(cosine1d(), pure_power_symbol(1, p), 16)
    assert sol.g0[0, 0].real == pytest.approx(SQRT3, abs=1e-10)
    assert abs(sol.g0[0, 0].imag) < 1e-14
    assert sol.residual <= 1e-10


@pytest.mark.parametrize("p", [1, 2])
def test_cosine_lambda_coefficients(p):
    sol = solve_cell(cosine1d(), pure_power_symbol(1, p), 16)
    for z in range(1, 9):
        for sign in (1, -1):
            got = sol.lambda_coeffs[(sign * z,)][0, 0]
            assert got == pytest.approx(cosine_lambda_oracle(sign * z, p),
                                        abs=1e-9)


def test_laminate_effective_matrix():
    sol = solve_cell(laminate2d(), gradient_symbol(2), 8)
    np.testing.assert_allclose(sol.g0.real, np.diag([SQRT3, 2.0]), atol=1e-6)
    np.testing.assert_allclose(sol.g0.imag, 0.0, atol=1e-12)


def test_laminate_reduces_to_1d():
    sol = solve_cell(laminate2d(), gradient_symbol(2), 8)
    # no transverse frequencies, second column identically zero
    for z, lam in sol.lambda_coeffs.items():
        assert z[1] == 0
        assert np.max(np.abs(lam[:, 1])) < 1e-14
    # first column matches the scalar 1D corrector
    sol1d = solve_cell(cosine1d(), pure_power_symbol(1, 1), 8)
    for z, lam in sol.lambda_coeffs.items():
        ref = sol1d.lambda_coeffs[(z[0],)][0, 0]
        assert lam[0, 0] == pytest.approx(ref, abs=1e-12)


def test_g_tilde_zero_coefficient_is_g0():
    sol = solve_cell(laminate2d(), gradient_symbol(2), 8)
    np.testing.assert_allclose(sol.g_tilde.coeffs[(0, 0)], sol.g0, atol=1e-14)


def test_cg_matches_dense():
    sol_d = solve_cell(laminate2d(), gradient_symbol(2), 8, method="dense")
    sol_cg = solve_cell(laminate2d(), gradient_symbol(2), 8, method="cg")
    np.testing.assert_allclose(sol_cg.g0, sol_d.g0, atol=1e-9)
    for z, lam in sol_d.lambda_coeffs.items():
        np.testing.assert_allclose(sol_cg.lambda_coeffs[z], lam, atol=1e-9)


def test_truncation_convergence():
    for fld, sym, N in ((cosine1d(), pure_power_symbol(1, 1), 12),
                        (cosine1d(), pure_power_symbol(1, 2), 12),
                        (laminate2d(), gradient_symbol(2), 6)):
        g0_n = solve_cell(fld, sym, N).g0
        g0_2n = solve_cell(fld, sym, 2 * N).g0
        assert np.linalg.norm(g0_n - g0_2n, 2) <= 1e-6 * np.linalg.norm(g0_2n, 2)


def test_weak_residual_independent():
    sol = solve_cell(laminate2d(), gradient_symbol(2), 8)
    assert abs(weak_residual(sol) - sol.residual) < 1e-10


def test_g0_invariant_under_basis_change():
    """A unimodular recombination of the basis leaves g0 unchanged.

    The same field is re-indexed to the new dual basis: with basis' =
    basis @ U, coefficients move as z' = U^T z.
    """
    U = np.array([[1, 1], [0, 1]])
    lat = Lattice.from_basis(np.eye(2))
    lat2 = Lattice.from_basis(np.eye(2) @ U)
    fld = laminate2d(lat)
    coeffs2 = {tuple(U.T @ np.array(z)): mat for z, mat in fld.coeffs.items()}
    fld2 = PeriodicMatrixField.from_coefficients(lat2, coeffs2)
    sym = gradient_symbol(2)
    g0_a = solve_cell(fld, sym, 10).g0
    g0_b = solve_cell(fld2, sym, 10).g0
    np.testing.assert_allclose(g0_a, g0_b, atol=1e-10)


def test_voigt_reuss_constant():
    lat = unit_lattice()
    G = np.array([[2.5]])
    fld = PeriodicMatrixField.from_coefficients(lat, {(0,): G})
    sol = solve_cell(fld, pure_power_symbol(1, 1), 4)
    vr = voigt_reuss(fld, sol.g0)
    assert vr.holds
    assert vr.lower_margin == pytest.approx(0.0, abs=1e-12)
    assert vr.upper_margin == pytest.approx(0.0, abs=1e-12)


def test_voigt_reuss_cosine():
    fld = cosine1d()
    sol = solve_cell(fld, pure_power_symbol(1, 1), 16)
    vr = voigt_reuss(fld, sol.g0)
    assert vr.holds
    assert vr.g_over[0, 0].real == pytest.approx(2.0, abs=1e-12)
    assert vr.g_under[0, 0].real == pytest.approx(SQRT3, abs=1e-12)


def test_norm_bounds():
    # |g0| <= |g| and |(g0)^{-1}| <= |g^{-1}| on the shipped examples
    for fld, sym, N in ((cosine1d(), pure_power_symbol(1, 1), 16),
                        (laminate2d(), gradient_symbol(2), 8)):
        sol = solve_cell(fld, sym, N)
        norm_g, norm_ginv, _ = fld.bounds(64)
        assert np.linalg.norm(sol.g0, 2) <= norm_g * (1 + 1e-12)
        assert np.linalg.norm(np.linalg.inv(sol.g0), 2) <= norm_ginv * (1 + 1e-12)


def test_special_case_constant_is_over():
    lat = unit_lattice()
    fld = PeriodicMatrixField.from_coefficients(lat, {(0,): [[2.0]]})
    sol = solve_cell(fld, pure_power_symbol(1, 1), 4)
    assert detect_special_cases(fld, pure_power_symbol(1, 1), sol) is SpecialCase.OVER


def test_special_case_cosine_is_under():
    fld = cosine1d()
    sym = pure_power_symbol(1, 1)
    sol = solve_cell(fld, sym, 16)
    assert detect_special_cases(fld, sym, sol) is SpecialCase.UNDER


def test_special_case_divergence_free_columns():
    """g = I + 0.5 diag(cos 2pi x2, cos 2pi x1) has divergence-free columns.

    Column 1 depends on x2 only and column 2 on x1 only, so b(D)* g e_k = 0
    exactly and the corrector vanishes: the arithmetic-mean case, confirmed
    by a doubled-truncation solve.
    """
    lat = Lattice.from_basis(np.eye(2))
    half = 0.25  # cos = (e^i + e^-i)/2
    coeffs = {
        (0, 0): np.eye(2),
        (0, 1): np.diag([half, 0.0]), (0, -1): np.diag([half, 0.0]),
        (1, 0): np.diag([0.0, half]), (-1, 0): np.diag([0.0, half]),
    }
    fld = PeriodicMatrixField.from_coefficients(lat, coeffs)
    sym = gradient_symbol(2)
    for N in (4, 8):
        sol = solve_cell(fld, sym, N)
        assert detect_special_cases(fld, sym, sol) is SpecialCase.OVER
        assert not sol.lambda_coeffs
        np.testing.assert_allclose(sol.g0, np.eye(2), atol=1e-14)


def test_special_case_none():
    # the transposed layout diag(cos 2pi x1, cos 2pi x2) has diverging columns
    lat = Lattice.from_basis(np.eye(2))
    half = 0.25
    coeffs = {
        (0, 0): np.eye(2),
        (1, 0): np.diag([half, 0.0]), (-1, 0): np.diag([half, 0.0]),
        (0, 1): np.diag([0.0, half]), (0, -1): np.diag([0.0, half]),
    }
    fld = PeriodicMatrixField.from_coefficients(lat, coeffs)
    sym = gradient_symbol(2)
    for N in (4, 8):
        sol = solve_cell(fld, sym, N)
        assert detect_special_cases(fld, sym, sol) is SpecialCase.NONE


def test_lambda_certificates_constant():
    lat = unit_lattice()
    fld = PeriodicMatrixField.from_coefficients(lat, {(0,): [[2.0]]})
    sym = pure_power_symbol(1, 1)
    sol = solve_cell(fld, sym, 4)
    certs = lambda_norm_certificates(sol, alpha0=1.0)
    assert certs.norm_l2 == 0.0
    assert certs.norm_bl2 == 0.0
    assert certs.norm_hp == 0.0
    assert certs.ok


def test_lambda_certificates_cosine():
    """Frozen constants for g = 2 + cos, p = 1: C1 = sqrt(3)/(2 pi), C2 = sqrt(3).

    Measured norms from the coefficient oracle: |L|^2 = 2 sum rho^{2z}/(2 pi z)^2,
    |DL|^2 = 2 sum rho^{2z}.
    """
    sol = solve_cell(cosine1d(), pure_power_symbol(1, 1), 16)
    certs = lambda_norm_certificates(sol, alpha0=1.0)
    assert certs.bound_l2 == pytest.approx(SQRT3 / (2 * np.pi), rel=1e-12)
    assert certs.bound_bl2 == pytest.approx(SQRT3, rel=1e-12)
    l2_ref = np.sqrt(2 * sum((RHO ** z / (2 * np.pi * z)) ** 2
                             for z in range(1, 17)))
    bl2_ref = np.sqrt(2 * sum(RHO ** (2 * z) for z in range(1, 17)))
    assert certs.norm_l2 == pytest.approx(l2_ref, rel=1e-9)
    assert certs.norm_bl2 == pytest.approx(bl2_ref, rel=1e-9)
    assert certs.norm_l2 < certs.bound_l2
    assert certs.norm_bl2 < certs.bound_bl2
    assert certs.norm_hp < certs.bound_hp
    assert certs.ok


def test_lambda_certificates_laminate():
    sol = solve_cell(laminate2d(), gradient_symbol(2), 8)
    alpha0, _ = ellipticity_bounds(gradient_symbol(2))
    certs = lambda_norm_certificates(sol, alpha0=alpha0)
    assert certs.ok
    assert certs.norm_l2 < certs.bound_l2
    assert certs.norm_hp < certs.bound_hp


def test_solve_cell_validates_dimensions():
    with pytest.raises(ValidationError):
        solve_cell(cosine1d(), gradient_symbol(2), 8)
    with pytest.raises(ValidationError):
        solve_cell(laminate2d(), gradient_symbol(2), 0)

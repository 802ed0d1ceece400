"""Tests for differential symbols and their ellipticity constants."""

import numpy as np
import pytest

from blochhom.errors import ValidationError
from blochhom.symbol import (DifferentialSymbol, check_rank,
                             ellipticity_bounds, evaluate, gradient_symbol,
                             normalization_margin, pure_power_symbol)


def scalar_power(p):
    return pure_power_symbol(1, p)


def axes_squares():
    # b(xi) = (xi_1^2, xi_2^2)^T
    return pure_power_symbol(2, 2)


def test_evaluate_scalar_first_order():
    sym = scalar_power(1)
    assert evaluate(sym, [2.0])[0, 0] == pytest.approx(2.0)


def test_evaluate_gradient():
    sym = gradient_symbol(2)
    np.testing.assert_allclose(evaluate(sym, [3.0, 4.0]).real,
                               [[3.0], [4.0]], rtol=1e-15)


def test_evaluate_scalar_second_order():
    sym = scalar_power(2)
    assert evaluate(sym, [3.0])[0, 0] == pytest.approx(9.0)


def test_homogeneity():
    rng = np.random.default_rng(11)
    for sym in (gradient_symbol(3), scalar_power(2), axes_squares()):
        for _ in range(20):
            xi = rng.standard_normal(sym.d)
            t = 10.0 * rng.random()
            lhs = evaluate(sym, t * xi)
            rhs = t ** sym.p * evaluate(sym, xi)
            np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_ellipticity_gradient():
    a0, a1 = ellipticity_bounds(gradient_symbol(2))
    assert a0 == pytest.approx(1.0, abs=1e-12)
    assert a1 == pytest.approx(1.0, abs=1e-12)


def test_ellipticity_scalar_any_order():
    for p in (1, 2, 3):
        a0, a1 = ellipticity_bounds(scalar_power(p))
        assert (a0, a1) == (pytest.approx(1.0), pytest.approx(1.0))


def test_ellipticity_axes_squares():
    # min of th1^4 + th2^4 on the circle is 1/2 at the diagonal; oracle below
    ang = np.linspace(0.0, 2 * np.pi, 20001)
    vals = np.cos(ang) ** 4 + np.sin(ang) ** 4
    assert np.min(vals) == pytest.approx(0.5, abs=1e-6)
    a0, a1 = ellipticity_bounds(axes_squares())
    assert a0 == pytest.approx(0.5, abs=1e-4)
    assert a1 == pytest.approx(1.0, abs=1e-12)


def test_ellipticity_sampling_stability():
    for sym in (gradient_symbol(2), axes_squares(), gradient_symbol(3)):
        a0a, a1a = ellipticity_bounds(sym, samples=2048)
        a0b, a1b = ellipticity_bounds(sym, samples=4096)
        assert abs(a0a - a0b) < 0.01 * a0b
        assert abs(a1a - a1b) < 0.01 * a1b


def test_check_rank_gradient():
    assert check_rank(gradient_symbol(2))


def test_check_rank_degenerate():
    # diag(xi_1, xi_1) ignores xi_2 and drops rank at theta = (0, 1)
    coeffs = {(1, 0): np.eye(2)}
    sym = DifferentialSymbol.from_coefficients(1, 2, coeffs)
    assert not check_rank(sym)


def test_check_rank_axes_squares():
    # min singular value sqrt(th1^4 + th2^4) >= 1/sqrt(2) > 0
    assert check_rank(axes_squares())


def test_normalization_margin_presets():
    for sym in (gradient_symbol(2), scalar_power(2), axes_squares()):
        _, a1 = ellipticity_bounds(sym)
        assert normalization_margin(sym, a1) <= 1.0 + 1e-12


def test_rejects_mixed_orders():
    with pytest.raises(ValidationError):
        DifferentialSymbol.from_coefficients(
            2, 1, {(2,): [[1.0]], (1,): [[1.0]]})


def test_rejects_m_below_n():
    with pytest.raises(ValidationError):
        DifferentialSymbol.from_coefficients(1, 2, {(1, 0): [[1.0, 2.0]]})


def test_quadratic_form_bracket():
    """The discrete energy form lies between its ellipticity bounds.

    For g = 2 + cos and the scalar symbol the constants are exact:
    alpha0 = alpha1 = 1, |g| = 3, |g^{-1}| = 1.
    """
    from blochhom.bloch import assemble_fiber
    from blochhom.field import cosine1d
    from blochhom.lattice import Lattice, frequency_set

    lat = Lattice.from_basis([[1.0]])
    fld = cosine1d(lat)
    for p in (1, 2):
        sym = scalar_power(p)
        fib = assemble_fiber(fld, sym, [0.0], 8)
        svals = np.array([s[0] for _, s in fib.index])
        rng = np.random.default_rng(5 + p)
        for _ in range(10):
            u = rng.standard_normal(len(svals)) + 1j * rng.standard_normal(len(svals))
            form = float(np.real(np.vdot(u, fib.matrix @ u)))
            ref = float(np.sum(np.abs(svals) ** (2 * p) * np.abs(u) ** 2))
            lower = 1.0 * 1.0 * ref      # alpha0 / |g^{-1}|
            upper = 1.0 * 3.0 * ref      # alpha1 * |g|
            assert form >= lower * (1 - 1e-10)
            assert form <= upper * (1 + 1e-10)

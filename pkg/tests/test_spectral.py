import math
import warnings

import numpy as np
import pytest

from elliptical_radon import Gaussian, PhantomSpec, ScalarField, ValidationError, make_model, symmetric_grid
from elliptical_radon import spectral as sp
from elliptical_radon.transform import DerivedSinogram

# first zero of J_0 from mpmath.besseljzero(0, 1)
J0_FIRST_ZERO = 2.404825557695773


def _gauss_field(n, half=8.0, pts=64):
    g = symmetric_grid(n, half, pts)
    return ScalarField(g, np.exp(-0.5 * np.sum(g.points() ** 2, -1)))


def test_fourier_gaussian_pair():
    f = _gauss_field(2)
    s = sp.fourier_nd(f)
    k2 = sum(k * k for k in s.frequency_mesh())
    exact = 2 * math.pi * np.exp(-0.5 * k2)
    assert np.abs(s.values - exact).max() < 1e-8


def test_fourier_narrow_bump_flat_near_zero():
    g = symmetric_grid(2, 4.0, 128)
    f = ScalarField(g, np.exp(-np.sum(g.points() ** 2, -1) / 0.01))
    s = sp.fourier_nd(f)
    k = np.hypot(*s.frequency_mesh())
    low = np.abs(s.values[k < 1.0])
    assert low.min() / low.max() > 0.99


def test_parseval():
    rng = np.random.default_rng(0)
    g = symmetric_grid(2, 2.0, 24)
    f = ScalarField(g, rng.standard_normal(g.dims))
    s = sp.fourier_nd(f)
    lhs = np.sum(f.values ** 2) * g.cell_volume
    rhs = np.sum(np.abs(s.values) ** 2) * s.cell_volume / (2 * math.pi) ** 2
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_fourier_round_trip():
    f = _gauss_field(2, 4.0, 16)
    back = sp.inverse_fourier_nd(sp.fourier_nd(f))
    np.testing.assert_allclose(back.values, f.values, atol=1e-14)


def test_bessel_values():
    assert sp.bessel_j(0, 0.0) == 1.0
    assert abs(sp.bessel_j(0.5, math.pi)) < 1e-15
    assert abs(sp.bessel_j(0, J0_FIRST_ZERO)) < 1e-10
    with pytest.raises(ValidationError):
        sp.bessel_j(3, 1.0)


def test_hankel_self_reciprocal():
    rho = np.linspace(0, 5, 21)
    for n in (2, 3):
        h = sp.hankel(lambda t: np.exp(-t * t / 2), n, rho, 12.0)
        np.testing.assert_allclose(h.values, np.exp(-rho ** 2 / 2), atol=1e-8)
    assert np.all(sp.hankel(lambda t: 0 * t, 2, rho, 3.0).values == 0)


def test_hankel_n3_matches_grid_fourier():
    f = _gauss_field(3, 8.0, 48)
    s = sp.fourier_nd(f)
    k = np.sqrt(sum(kk * kk for kk in s.frequency_mesh()))
    sel = k < 3
    h = sp.hankel(lambda t: np.exp(-t * t / 2), 3, k[sel], 12.0)
    np.testing.assert_allclose(s.values[sel].real / (2 * math.pi) ** 1.5, h.values, atol=1e-6)


def test_slice_residual_single(model2, gauss2, gauss_data2):
    fhat = lambda k: math.pi * np.exp(-np.sum(k ** 2, -1) / 4)
    r = sp.slice_residual(gauss2, model2, [[1.0, 1.0]], data=gauss_data2, fhat=fhat)
    assert r[0] <= 1e-2


def test_slice_residual_fallback_fhat(model2, gauss2, gauss_data2):
    # the built-in Riemann-sum transform of the phantom gives the same verdict
    r = sp.slice_residual(gauss2, model2, [[1.0, 1.0], [-0.5, 2.0]], data=gauss_data2)
    assert r.max() <= 1e-2


def test_slice_literal_constant_is_off_by_2pi(model2, gauss2, gauss_data2):
    fhat = lambda k: math.pi * np.exp(-np.sum(k ** 2, -1) / 4)
    lit = sp.slice_residual(gauss2, model2, [[1.0, 1.0]], data=gauss_data2, fhat=fhat, constant="literal")
    assert lit[0] == pytest.approx(1 - 1 / (2 * math.pi), abs=2e-3)


def test_slice_rejects_xi_n_zero(model2, gauss2, gauss_data2):
    with pytest.raises(ValidationError):
        sp.slice_residual(gauss2, model2, [[1.0, 0.0]], data=gauss_data2)


def test_vanishing(gauss_data2):
    assert sp.vanishing_ratio(gauss_data2, [1.0]) <= 1e-4


def test_zero_data_gives_zero_field(model2, gauss_data2):
    z = DerivedSinogram(model2, gauss_data2.u_grid, gauss_data2.t_grid, np.zeros_like(gauss_data2.values))
    rec = sp.invert_fourier(z, symmetric_grid(2, 4.0, 16))
    assert np.all(rec.values == 0)


def test_invert_rejects_unknown_method(gauss_data2):
    with pytest.raises(ValidationError):
        sp.invert_fourier(gauss_data2, symmetric_grid(2, 4.0, 8), method="magic")


def test_fourier_inversion_gaussian(gauss2, gauss_data2):
    out = symmetric_grid(2, 4.0, 64)
    rec = sp.invert_fourier(gauss_data2, out)
    truth = gauss2(out.points())
    assert np.linalg.norm(rec.values - truth) / np.linalg.norm(truth) <= 0.05
    assert rec.even


def test_convolution_zero_phi(model2, gauss2):
    r = sp.convolution_residual(gauss2, lambda u, t: 0 * u * t, model2, [(0.2, 1.0)], (0.3, 0.5, 1.0))
    assert r["max_gap"] == 0.0
    assert np.all(r["lhs"] == 0) and np.all(r["rhs"] == 0)


def test_backprojection_multiplier_consistency(model2):
    # M(k) relates back-projected data to f_hat; its slice form must agree with slice_rhs
    k = np.array([[0.7, -1.3]])
    xi = k * model2.axes
    M = sp.backprojection_multiplier(model2, k)
    rhs = sp.slice_rhs(model2, xi, np.ones(1))
    # F(R* g)(k) = (2pi)^{n/2} C H_n g_hat and H_n g_hat = rhs f_hat
    assert M[0] == pytest.approx((2 * math.pi) * model2.c_lambda * rhs[0], rel=1e-12)

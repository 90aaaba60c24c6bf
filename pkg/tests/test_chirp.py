import math
import warnings

import numpy as np
import pytest

from elliptical_radon import (Gaussian, NumericalToleranceError, PhantomSpec, ValidationError, make_model,
                              symmetric_grid)
from elliptical_radon import chirp as ch
from elliptical_radon import transform as tr
from elliptical_radon.spectral import _default_data
from elliptical_radon.transform import DerivedSinogram

SQRT2 = math.sqrt(2)


@pytest.fixture(scope="module")
def model():
    return make_model(SQRT2, 2)


@pytest.fixture(scope="module")
def phantom():
    return PhantomSpec((Gaussian((0.3,), (0.8, 1.0)),), 2)


@pytest.fixture(scope="module")
def data(model, phantom):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return _default_data(phantom, model, 8.0, 0.1, 0.02)


@pytest.fixture(scope="module")
def cd(data):
    return ch.compute_G(data, ch.default_w_grid(64.0, 15.0))


def _gl2(f, half, m=300):
    x, w = np.polynomial.legendre.leggauss(m)
    x, w = half * x, half * w
    X, Y = np.meshgrid(x, x, indexing="ij")
    return X, Y, f(np.stack([X, Y], -1)) * np.outer(w, w)


def test_zero_data(data):
    z = DerivedSinogram(data.model, data.u_grid, data.t_grid, np.zeros_like(data.values))
    c = ch.compute_G(z, ch.default_w_grid(64.0, 2.0))
    assert np.all(c.values == 0)
    rec = ch.invert_chirp(c, symmetric_grid(2, 3.0, 8), trunc_box=(5.0, 2.0))
    assert np.all(rec.values == 0)


def test_small_w_is_total_volume(model, phantom, data):
    # w -> 0 gives int_0^T d_t R_E f dt = R_E f(u, T)
    c = ch.compute_G(data, np.array([-1e-9, 1e-9]))
    u = data.u_grid.axis(0)
    sel = np.abs(u) < 2
    vol = tr.forward(phantom, model, type(data.u_grid)((u[sel][0],), (0.1,), (int(sel.sum()),)),
                     type(data.t_grid)((8.0,), (1.0,), (1,))).values[:, 0]
    np.testing.assert_allclose(c.values[sel, 1].real, vol, rtol=1e-4)


def test_G_against_volume_oracle(model, phantom, data, cd):
    # G(u, w) = int f(x) exp(i w rho(x, u)^2) dx with a 300^2 Gauss-Legendre rule
    X, Y, F = _gl2(phantom, 6.0)
    u = data.u_grid.axis(0)
    i0 = int(np.argmin(np.abs(u)))
    for j in (600, 700, 900):
        w = cd.w[j]
        exact = np.sum(F * np.exp(1j * w * (((X - u[i0]) / model.lam) ** 2 + (Y / model.nu) ** 2)))
        assert abs(cd.values[i0, j] - exact) / abs(exact) <= 1e-4


def test_K_alpha_zero(model, cd):
    j = 700
    gamma = -cd.w[j]
    K = ch.compute_K(cd, [[0.0]], [gamma])
    i0 = int(np.argmin(np.abs(cd.u_grid.axis(0))))
    assert cd.u_grid.axis(0)[i0] == pytest.approx(0.0, abs=1e-12)
    assert K[0] == pytest.approx(cd.values[i0, j] / (2 * model.c_lambda), rel=1e-12)


def test_K_hermitian(cd):
    al = np.array([[0.5], [-1.0], [2.0]])
    gm = -cd.w[[700, 650, 800]]
    a = ch.compute_K(cd, al, gm)
    b = ch.compute_K(cd, -al, -gm)
    np.testing.assert_allclose(b, np.conj(a), rtol=1e-10, atol=1e-14)


def test_K_against_direct_k_oracle(model, phantom, cd):
    al = np.array([0.0, 0.5, -1.0, 2.0])
    gm = -cd.w[[700, 650, 800, 1000]]
    K = ch.compute_K(cd, al[:, None], gm)
    Kd = ch.k_fourier_direct(phantom, model, al, gm, 6.0, 300)
    assert np.abs(K - Kd).max() / np.abs(Kd).max() <= 1e-3


def test_K_rejects_off_grid(cd):
    with pytest.raises(ValidationError):
        ch.compute_K(cd, [[0.0]], [cd.w[700] * 1.0001])
    with pytest.raises(ValidationError):
        ch.compute_K(cd, [[1e4]], [-cd.w[700]])


def test_k_zero_outside_domain(model, phantom):
    assert ch.k_eval(phantom, model, np.array([0.5]), None, np.array([0.2]))[0] == 0.0


def test_k_reconstruction_identity(model, phantom):
    rng = np.random.default_rng(0)
    x = rng.uniform(-2, 2, (200, 2))
    x[:, 1] = np.abs(x[:, 1]) + 1e-3
    r = (x[:, 0] / model.lam) ** 2 + (x[:, 1] / model.nu) ** 2
    k = ch.k_eval(phantom, model, x[:, 0] / model.lam, None, r)
    f = phantom(x)
    np.testing.assert_allclose(2 * x[:, 1] / model.nu * k, f, rtol=1e-12, atol=1e-300)
    # the prefactor x_n / C is off by the factor 2 C / nu
    lit = x[:, 1] / model.c_lambda * k
    np.testing.assert_allclose(lit * 2 * model.c_lambda / model.nu, f, rtol=1e-12, atol=1e-300)


def test_richardson_flags_coarse_ds(data):
    with pytest.raises(NumericalToleranceError):
        ch.compute_G(data, ch.default_w_grid(64.0, 15.0), ds=0.2, richardson=True, tol=1e-6)


def test_w_grid_validation(data, cd):
    with pytest.raises(ValidationError):
        ch.ChirpData(cd.model, cd.u_grid, np.array([-1.0, 0.0, 1.0]), np.zeros(cd.u_grid.dims + (3,)),
                     cd.jump, cd.s_max)
    with pytest.raises(ValidationError):
        ch.ChirpData(cd.model, cd.u_grid, np.array([-1.0, 2.0]), np.zeros(cd.u_grid.dims + (2,)), cd.jump, cd.s_max)


def test_inversion_n2(phantom, data, cd):
    out = symmetric_grid(2, 4.0, 32)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rec, rep = ch.invert_chirp(cd, out, trunc_box=(ch.complete_radius(data), 15.0), return_report=True)
    truth = phantom(out.points())
    assert np.linalg.norm(rec.values - truth) / np.linalg.norm(truth) <= 0.10
    # even reflection: rows next to x_n = 0 agree
    v = rec.values
    np.testing.assert_allclose(v[:, 15], v[:, 16], rtol=1e-12)
    assert 0 < rep.gamma_min < rep.gamma_max

"""Fourier and Hankel transforms, the slice relation, and the Fourier-type inversion.

Conventions: ``f_hat(k) = int f(x) exp(-i k.x) dx`` with angular frequencies,
inverse with ``(2 pi)^{-n}``.  The radial transform is
``H_n f(rho) = int_0^inf t^{n-1} L_n(rho t) f(t) dt`` with
``L_n(z) = z^{1-n/2} J_{n/2-1}(z)``, so that ``(2 pi)^{n/2} H_n`` is the
Fourier transform of radial functions on ``R^n``.

Data ``g = t^{1-n} d_t R_E f`` do not decay in ``t`` (they fall off like
``t^{1-n}`` along the band ``|u_1| ~ lam t``), so any t-integral over them is
truncated at ``T = t_max``.  The part beyond ``T`` is restored with an exact
far-field model: for ``t`` larger than the support height over ``nu`` the
hyperplane transform of ``g`` is a Taylor series in ``1/t`` whose terms are
``phi_j(t) = t^{-1-2j} Z_{mu-j}(omega t)``, where ``Z_a(x) = x^{-a} J_a(x)``,
``mu = (n-3)/2`` and ``omega = |A' k'|``.  A few coefficients are fitted on
``[T/2, T]``; the leading term is integrated in closed form, which also gives
the exact value on the ``k_n = 0`` plane.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from ._quadrature import composite_gauss_legendre
from .core import EccentricityModel, Grid, PhantomSpec, ScalarField, symmetrize
from .exceptions import TruncationWarning, ValidationError
from .transform import DerivedSinogram, _trapezoid_weights, backproject, derived_exact

__all__ = [
    "SpectralField",
    "HankelProfile",
    "fourier_nd",
    "inverse_fourier_nd",
    "fourier_at",
    "bessel_j",
    "radial_kernel",
    "hankel",
    "hyperplane_fourier",
    "hyperplane_fourier_mesh",
    "data_hankel",
    "slice_rhs",
    "slice_residual",
    "vanishing_ratio",
    "fourier_inversion_spectrum",
    "invert_fourier",
    "backprojection_multiplier",
    "convolution_residual",
]

SQRT_2_OVER_PI = math.sqrt(2 / math.pi)


# ------------------------------------------------------------ Fourier on grids


@dataclass(frozen=True)
class SpectralField:
    """Continuous-convention spectrum of a field sampled on ``grid``; values in FFT order."""

    grid: Grid
    values: np.ndarray

    def frequencies(self) -> list[np.ndarray]:
        return [2 * np.pi * np.fft.fftfreq(m, h) for m, h in zip(self.grid.dims, self.grid.spacing)]

    def frequency_mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.frequencies(), indexing="ij")

    @property
    def cell_volume(self) -> float:
        return float(np.prod([2 * np.pi / (m * h) for m, h in zip(self.grid.dims, self.grid.spacing)]))


def _origin_phase(grid: Grid) -> np.ndarray:
    ks = [2 * np.pi * np.fft.fftfreq(m, h) for m, h in zip(grid.dims, grid.spacing)]
    mesh = np.meshgrid(*ks, indexing="ij")
    return np.exp(-1j * sum(k * o for k, o in zip(mesh, grid.origin)))


def fourier_nd(f: ScalarField) -> SpectralField:
    vals = np.fft.fftn(f.values) * f.grid.cell_volume * _origin_phase(f.grid)
    return SpectralField(f.grid, vals)


def inverse_fourier_nd(s: SpectralField, model: EccentricityModel | None = None) -> ScalarField:
    vals = np.fft.ifftn(s.values / _origin_phase(s.grid)) / s.grid.cell_volume
    return ScalarField(s.grid, vals.real, model)


def fourier_at(f: Callable, grid: Grid, xi) -> np.ndarray:
    """Direct Riemann-sum ``int f e^{-i xi.x} dx`` over ``grid`` at arbitrary frequencies."""
    pts = grid.points().reshape(-1, grid.ndim)
    fv = np.asarray(f(pts), float)
    xi = np.atleast_2d(np.asarray(xi, float))
    out = np.array([np.sum(fv * np.exp(-1j * (pts @ k))) for k in xi]) * grid.cell_volume
    return out


# ------------------------------------------------------------ Bessel and Hankel


def bessel_j(order: float, x) -> np.ndarray:
    """Bessel function of the first kind for the orders the transforms need (0, +-1/2)."""
    x = np.asarray(x, float)
    if np.any(x < 0):
        raise ValidationError("bessel_j is defined here for x >= 0")
    if order == 0:
        return special.j0(x)
    if order in (0.5, -0.5):
        with np.errstate(divide="ignore", invalid="ignore"):
            amp = np.sqrt(2 / (np.pi * x))
            return amp * (np.sin(x) if order > 0 else np.cos(x))
    raise ValidationError(f"unsupported Bessel order {order!r}; expected 0 or +-1/2")


def radial_kernel(n: int, z) -> np.ndarray:
    """``L_n(z) = z^{1-n/2} J_{n/2-1}(z)``, smooth at ``z = 0``."""
    z = np.asarray(z, float)
    if n == 2:
        return special.j0(z)
    if n == 3:
        return SQRT_2_OVER_PI * np.sinc(z / np.pi)
    raise ValidationError(f"unsupported dimension {n}")


@dataclass(frozen=True)
class HankelProfile:
    n: int
    rho: np.ndarray
    values: np.ndarray


def hankel(profile: Callable, n: int, rho, t_max: float, nodes: int = 512, panel_order: int = 32) -> HankelProfile:
    """``H_n`` of a radial profile supported in ``[0, t_max]`` by composite Gauss-Legendre."""
    rho = np.atleast_1d(np.asarray(rho, float))
    panels = max(1, nodes // panel_order)
    t, w = composite_gauss_legendre(panel_order, 0.0, t_max, panels)
    fv = np.asarray(profile(t), float)
    vals = radial_kernel(n, np.outer(rho, t)) @ (w * t ** (n - 1) * fv)
    return HankelProfile(n, rho, vals)


# ------------------------------------------------------------ data transforms


def hyperplane_fourier(g: DerivedSinogram, kprime) -> np.ndarray:
    """``g_hat(k', t) = int g(u, t) e^{-i k'.u} du`` (trapezoid in ``u``); shape ``(K, n_t)``."""
    n = g.model.n
    kp = np.asarray(kprime, float).reshape(-1, n - 1)
    W = _trapezoid_weights(g.u_grid)
    vals = g.values * W[..., None]
    if n == 2:
        u = g.u_grid.axis(0)
        return np.exp(-1j * np.outer(kp[:, 0], u)) @ vals
    u1, u2 = g.u_grid.axis(0), g.u_grid.axis(1)
    e1 = np.exp(-1j * np.outer(kp[:, 0], u1))  # (K, N1)
    e2 = np.exp(-1j * np.outer(kp[:, 1], u2))  # (K, N2)
    # sum_{a,b} e1[k,a] e2[k,b] vals[a,b,t]
    tmp = np.einsum("ka,abt->kbt", e1, vals, optimize=True)
    return np.einsum("kb,kbt->kt", e2, tmp, optimize=True)


def hyperplane_fourier_mesh(g: DerivedSinogram, axes_k) -> np.ndarray:
    """Hyperplane transform on a tensor grid of ``k'``; shape ``(K_1, ..., K_{n-1}, n_t)``.

    Applies one 1-D transform per axis, which is much cheaper than
    :func:`hyperplane_fourier` on the flattened mesh when ``n = 3``.
    """
    vals = g.values * _trapezoid_weights(g.u_grid)[..., None]
    for i, k in enumerate(axes_k):
        e = np.exp(-1j * np.outer(np.asarray(k, float), g.u_grid.axis(i)))
        vals = np.moveaxis(np.tensordot(e, vals, axes=([1], [i])), 0, i)
    return vals


def _z(order: float, x: np.ndarray) -> np.ndarray:
    """``Z_a(x) = x^{-a} J_a(x)`` with its finite limit at 0."""
    x = np.asarray(x, float)
    small = x < 1e-8
    xs = np.where(small, 1.0, x)
    val = xs ** (-order) * special.jv(order, xs)
    if order == int(order) and order < 0:
        lim = 0.0
    else:
        lim = 2.0 ** (-order) / special.gamma(order + 1)
    return np.where(small, lim, val)


def _far_basis(n: int, omega: float, t: np.ndarray, n_terms: int) -> np.ndarray:
    mu = (n - 3) / 2
    cols = [t ** (-1 - 2 * j) * _z(mu - j, omega * t) for j in range(n_terms)]
    return np.stack(cols, axis=-1)


def _closed_leading(n: int, rho: np.ndarray, omega: float) -> tuple[np.ndarray, np.ndarray]:
    """``int_0^inf t^{n-1} L_n(rho t) phi_0(t) dt`` and that value times ``rho^{n-2} sqrt(rho^2-omega^2)``."""
    d2 = rho * rho - omega * omega
    above = d2 > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        full = np.where(above, SQRT_2_OVER_PI / np.sqrt(np.where(above, d2, 1.0)), 0.0)
        if n == 3:
            full = np.where(above, full / np.where(rho > 0, rho, 1.0), 0.0)
    scaled = np.where(d2 >= 0, SQRT_2_OVER_PI, 0.0)
    return full, scaled


@dataclass(frozen=True)
class FarFieldConfig:
    n_terms: int = 3
    window: tuple = (0.5, 1.0)  # fraction of t_max used for the fit
    extent: float = 8.0  # numerical tail integrals run to extent * t_max


def _row_hankel(ghat: np.ndarray, t: np.ndarray, dt: float, omega: float, rho: np.ndarray, n: int,
                cfg: FarFieldConfig | None) -> tuple[np.ndarray, np.ndarray]:
    """Hankel transform of one data row, split as ``H = H_reg + c0 * closed``.

    Returns ``(H, P)`` where ``P = rho^{n-2} sqrt(rho^2 - omega^2) H`` is finite
    on the resonance ``rho = omega``.
    """
    w = np.full(t.shape, dt)
    w[-1] *= 0.5  # trapezoid from t = 0 (integrand vanishes there) to t_max
    base = radial_kernel(n, np.outer(rho, t)) @ (w * t ** (n - 1) * ghat)
    d = np.sqrt(np.clip(rho * rho - omega * omega, 0.0, None))
    if cfg is None:
        return base, rho ** (n - 2) * d * base
    T = t[-1]
    win = (t >= cfg.window[0] * T) & (t <= cfg.window[1] * T)
    B = _far_basis(n, omega, t[win], cfg.n_terms)
    norms = np.linalg.norm(B, axis=0)
    keep = norms > 1e-12 * norms.max()
    coef = np.zeros(cfg.n_terms, complex)
    sol, *_ = np.linalg.lstsq(B[:, keep] / norms[keep], ghat[win], rcond=1e-10)
    coef[keep] = sol / norms[keep]
    # leading term: closed form on (0, inf) minus Gauss-Legendre on (0, T)
    freq = float(rho.max() + omega)
    panels = max(4, int(math.ceil(freq * T / 4)))
    tq, wq = composite_gauss_legendre(16, 0.0, T, panels)
    phi0 = _far_basis(n, omega, tq, 1)[:, 0]
    finite0 = radial_kernel(n, np.outer(rho, tq)) @ (wq * tq ** (n - 1) * phi0)
    reg = base - coef[0] * finite0
    if cfg.n_terms > 1:
        te, we = composite_gauss_legendre(16, T, cfg.extent * T, max(4, int(math.ceil(freq * cfg.extent * T / 4))))
        Be = _far_basis(n, omega, te, cfg.n_terms)[:, 1:]
        reg = reg + radial_kernel(n, np.outer(rho, te)) @ ((we * te ** (n - 1))[:, None] * Be) @ coef[1:]
    full, scaled = _closed_leading(n, rho, omega)
    H = reg + coef[0] * full
    P = rho ** (n - 2) * d * reg + coef[0] * scaled
    return H, P


def data_hankel(g: DerivedSinogram, kprime, rho, far_field: FarFieldConfig | None = FarFieldConfig()) -> np.ndarray:
    """``H_n`` in ``t`` of the hyperplane transform of ``g``; rows follow ``kprime``, columns ``rho``.

    ``far_field=None`` gives the plain truncated integral over ``(0, t_max]``.
    """
    model = g.model
    n = model.n
    kp = np.asarray(kprime, float).reshape(-1, n - 1)
    rho = np.asarray(rho, float)
    rho = np.broadcast_to(rho, (len(kp),) + rho.shape[-1:]) if rho.ndim <= 1 else rho
    G = hyperplane_fourier(g, kp)
    t, dt = g.t, g.t_grid.spacing[0]
    _check_t_grid(g)
    out = np.empty(rho.shape, complex)
    for i, k in enumerate(kp):
        omega = float(np.linalg.norm(model.hyperplane_axes * k))
        out[i] = _row_hankel(G[i], t, dt, omega, rho[i], n, far_field)[0]
    return out


def _check_t_grid(g: DerivedSinogram):
    t = g.t
    if abs(t[0] - g.t_grid.spacing[0]) > 1e-9 * t[0]:
        raise ValidationError("radial transforms need the t-grid t_j = j * dt starting at dt")


# ------------------------------------------------------------ slice relation


def backprojection_multiplier(model: EccentricityModel, k) -> np.ndarray:
    """``M(k)`` with ``F(R*_E g_f)(k) = M(k) f_hat(k)``: ``2 (2pi)^{n-1} C^2 |Ak|^{2-n} / (nu^2 |k_n|)``."""
    k = np.asarray(k, float)
    n = model.n
    ak = np.linalg.norm(k * model.axes, axis=-1)
    with np.errstate(divide="ignore"):
        return 2 * (2 * np.pi) ** (n - 1) * model.c_lambda ** 2 * ak ** (2 - n) / (model.nu ** 2 * np.abs(k[..., -1]))


def slice_rhs(model: EccentricityModel, xi, fhat_scaled, constant: str = "derived") -> np.ndarray:
    """Right side of the slice relation at ``xi`` given ``f_hat(A^{-1} xi)``.

    ``constant="derived"`` uses ``2^{n/2} pi^{n/2-1}``; ``"literal"`` uses the
    ``2^{n/2+1} pi^{n/2}`` prefactor, which is larger by ``2 pi``.
    """
    xi = np.asarray(xi, float)
    n = model.n
    pre = {"derived": 2 ** (n / 2) * np.pi ** (n / 2 - 1), "literal": 2 ** (n / 2 + 1) * np.pi ** (n / 2)}[constant]
    r = np.linalg.norm(xi, axis=-1)
    return pre * r ** (2 - n) * model.lam * model.nu ** (n - 2) * fhat_scaled / np.abs(xi[..., -1])


def _default_data(f: PhantomSpec, model: EccentricityModel, t_max: float, du: float, dt: float,
                  angular_order: int | None = None) -> DerivedSinogram:
    from .transform import derived_sinogram, t_grid

    lo, hi = f.bounding_box()
    n = model.n
    half = [max(abs(lo[i]), abs(hi[i])) + model.hyperplane_axes[i] * t_max for i in range(n - 1)]
    pts = [2 * int(math.ceil(h / du)) + 1 for h in half]
    ug = Grid(tuple(-du * (p - 1) / 2 for p in pts), (du,) * (n - 1), tuple(pts))
    return derived_sinogram(f, model, ug, t_grid(t_max, int(round(t_max / dt))), angular_order)


def slice_residual(f: PhantomSpec, model: EccentricityModel, xi, data: DerivedSinogram | None = None,
                   fhat: Callable | None = None, constant: str = "derived", floor: float = 1e-12,
                   far_field: FarFieldConfig | None = FarFieldConfig(), t_max: float = 12.0) -> np.ndarray:
    """Relative residual of the slice relation at each frequency in ``xi`` (shape ``(..., n)``).

    ``fhat`` evaluates the phantom's Fourier transform at points ``k``; by
    default a fine Riemann sum over the phantom's bounding box is used.
    """
    xi = np.atleast_2d(np.asarray(xi, float))
    if np.any(xi[:, -1] == 0):
        raise ValidationError("slice relation is singular at xi_n = 0")
    if data is None:
        data = _default_data(f, model, t_max, 0.0625, 0.02)
    k = xi / model.axes
    if fhat is None:
        lo, hi = f.bounding_box()
        h = 0.04
        pts = np.ceil((hi - lo) / h).astype(int) + 1
        grid = Grid(tuple(lo), (h,) * model.n, tuple(pts))
        fhat = lambda kk: fourier_at(f, grid, kk)
    rhs = slice_rhs(model, xi, fhat(k), constant)
    rho = np.linalg.norm(xi, axis=-1)
    lhs = np.array([data_hankel(data, k[i, :-1], rho[i:i + 1], far_field)[0, 0] for i in range(len(xi))])
    return np.abs(lhs - rhs) / np.maximum(np.abs(rhs), floor)


def vanishing_ratio(data: DerivedSinogram, kprime, rho_fraction: float = 0.5,
                    far_field: FarFieldConfig | None = FarFieldConfig()) -> float:
    """``|H_n g_hat(k', rho)|`` at ``rho = fraction * |A'k'|`` relative to its peak for ``rho > |A'k'|``."""
    model = data.model
    kp = np.asarray(kprime, float).reshape(1, -1)
    omega = float(np.linalg.norm(model.hyperplane_axes * kp[0]))
    if omega == 0:
        raise ValidationError("vanishing test needs k' != 0")
    above = omega * np.linspace(1.02, 4.0, 150)
    rho = np.concatenate([[rho_fraction * omega], above])
    h = data_hankel(data, kp, rho, far_field)[0]
    return float(abs(h[0]) / np.max(np.abs(h[1:])))


# ------------------------------------------------------------ inversion


def fourier_inversion_spectrum(g: DerivedSinogram, output: Grid,
                               far_field: FarFieldConfig | None = FarFieldConfig(),
                               band_limit: float = math.pi / 2) -> SpectralField:
    """``f_hat`` on the DFT frequency grid of ``output`` from data ``g``.

    ``f_hat(k) = nu |Ak|^{n-2} nu |k_n| F(R*_E g)(k) / (2 (2pi)^{n-1} C^2)``, with
    ``F(R*_E g)(k) = (2pi)^{n/2} C H_n g_hat(k', |Ak|)`` evaluated through the
    data's Hankel transform; frequencies with ``|Ak| dt > band_limit`` are set
    to zero because the t-sampling cannot resolve them.
    """
    model = g.model
    n = model.n
    if output.ndim != n:
        raise ValidationError("output grid dimension must equal n")
    _check_t_grid(g)
    ks = [2 * np.pi * np.fft.fftfreq(m, h) for m, h in zip(output.dims, output.spacing)]
    kn = ks[-1]
    kabs, inv = np.unique(np.abs(kn), return_inverse=True)
    kp_mesh = np.meshgrid(*ks[:-1], indexing="ij")
    kp = np.stack([m.ravel() for m in kp_mesh], axis=-1)
    G = hyperplane_fourier_mesh(g, ks[:-1]).reshape(len(kp), -1)
    t, dt = g.t, g.t_grid.spacing[0]
    pref = model.nu / (2 * (2 * np.pi) ** (n / 2 - 1) * model.c_lambda)
    spec = np.zeros((len(kp), len(kn)), complex)
    for i, k in enumerate(kp):
        omega = float(np.linalg.norm(model.hyperplane_axes * k))
        rho = np.sqrt(omega ** 2 + (model.nu * kabs) ** 2)
        ok = rho * dt <= band_limit
        if not np.any(ok):
            continue
        P = np.zeros(len(kabs), complex)
        P[ok] = _row_hankel(G[i], t, dt, omega, rho[ok], n, far_field)[1]
        spec[i] = pref * P[inv]
    return SpectralField(output, spec.reshape(output.dims))


def _invert_backprojection(g: DerivedSinogram, output: Grid, pad: int) -> SpectralField:
    """Literal route: back-project on a padded grid, FFT, divide by ``M(k)``.

    The ``k_n = 0`` plane is the mean of its two neighbours.  Back projections
    have slowly decaying tails, so this route is only indicative.
    """
    model = g.model
    dims = tuple(pad * d for d in output.dims)
    origin = tuple(-h * (d - 1) / 2 for h, d in zip(output.spacing, dims))
    big = Grid(origin, output.spacing, dims)
    b = backproject(g, big, check_tol=None)
    B = fourier_nd(b)
    K = np.stack(B.frequency_mesh(), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        F = B.values / backprojection_multiplier(model, K)
    F[..., 0] = 0.5 * (F[..., 1] + F[..., -1])
    rec = inverse_fourier_nd(SpectralField(big, F), model)
    sl = tuple(slice((d - o) // 2, (d - o) // 2 + o) for d, o in zip(dims, output.dims))
    return fourier_nd(ScalarField(output, rec.values[sl], model))


def invert_fourier(g: DerivedSinogram, output: Grid, method: str = "hankel",
                   far_field: FarFieldConfig | None = FarFieldConfig(), pad: int = 2,
                   symmetrize_output: bool = True, return_spectrum: bool = False):
    """Reconstruct an even ``f`` on ``output`` from derived data.

    ``method="hankel"`` (default) builds ``f_hat`` from the data's Hankel
    transform; ``method="backproject"`` follows back projection, FFT and the
    inverse multiplier on a padded grid.
    """
    if method == "hankel":
        spec = fourier_inversion_spectrum(g, output, far_field)
    elif method == "backproject":
        spec = _invert_backprojection(g, output, pad)
    else:
        raise ValidationError(f"unknown Fourier inversion method {method!r}")
    rec = inverse_fourier_nd(spec, g.model)
    if symmetrize_output and output.is_symmetric_last_axis():
        rec = symmetrize(rec)
    return (rec, spec) if return_spectrum else rec


# ------------------------------------------------------------ convolution identity


def convolution_residual(f: PhantomSpec, phi: Callable, model: EccentricityModel, samples,
                         phi_support: tuple, level: int = 1, angular_order: int | None = None) -> dict:
    """Both sides of ``g * phi = C^{-1} t^{1-n} d_t R_E(f * psi)`` with ``psi = R*_E phi``.

    ``phi(u, t)`` is a test function supported in ``|u - u_c| <= a`` and
    ``t <= b`` where ``phi_support = (u_c, a, b)``.  ``samples`` holds
    ``(u, s)`` points (``u`` of length ``n-1``).  ``level`` scales every node
    count.  Returns sides and the maximum relative gap.
    """
    n = model.n
    if n != 2:
        raise ValidationError("convolution_residual is implemented for n = 2")
    uc, a, b = phi_support
    samples = np.atleast_2d(np.asarray(samples, float))
    nu_ = 12 * level
    nr = 12 * level
    nth = 24 * level
    up, wu = _gl_interval(nu_, uc - a, uc + a)
    rp, wr = _gl_interval(nr, 0.0, b)
    th = 2 * np.pi * (np.arange(nth) + 0.5) / nth
    wth = 2 * np.pi / nth
    lhs = np.empty(len(samples))
    for i, (u, s) in enumerate(samples):
        # (g * phi)(u, s) = int du' int_{R^2} dw' g(u - u', |s e - w'|) phi(u', |w'|)
        U, R, TH = np.meshgrid(up, rp, th, indexing="ij")
        dist = np.sqrt(np.maximum(s * s + R * R - 2 * s * R * np.cos(TH), 1e-24))
        gv = derived_exact(f, model, (u - U)[..., None], dist, angular_order)
        wts = wu[:, None, None] * (wr * rp)[None, :, None] * wth
        lhs[i] = np.sum(gv * phi(U, R) * wts)
    # psi on a w-grid around the support it can reach, then (f * psi) on the ellipse
    lo, hi = f.bounding_box()
    h = 0.1 / level
    xr = (uc - a - model.lam * b - (hi[0] - lo[0]), uc + a + model.lam * b + (hi[0] - lo[0]))
    yr = model.nu * b + 0.5 * (hi[1] - lo[1])
    wx = np.arange(xr[0], xr[1] + h / 2, h)
    wy = np.arange(-yr, yr + h / 2, h)
    W = np.stack(np.meshgrid(wx, wy, indexing="ij"), axis=-1).reshape(-1, 2)
    psi = _backproject_analytic(phi, model, uc, a, W, 24 * level)
    keep = np.abs(psi) > 1e-16 * np.abs(psi).max()
    W, psi = W[keep], psi[keep]
    from ._quadrature import full_sphere_rule

    m = angular_order or 64
    y, wy_ = full_sphere_rule(2, m * level)
    rhs = np.empty(len(samples))
    for i, (u, s) in enumerate(samples):
        z = np.array([u, 0.0]) + s * model.axes * y  # (m, 2)
        conv = np.array([np.sum(f(zz - W) * psi) * h * h for zz in z])
        rhs[i] = np.sum(wy_ * conv)  # C * int_S (f*psi) dsigma / C
    gap = np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300)
    return {"lhs": lhs, "rhs": rhs, "gap": gap, "max_gap": float(gap.max()) if len(gap) else 0.0}


def _gl_interval(m: int, a: float, b: float):
    x, w = np.polynomial.legendre.leggauss(m)
    return a + 0.5 * (b - a) * (x + 1), 0.5 * (b - a) * w


def _backproject_analytic(phi: Callable, model: EccentricityModel, uc: float, a: float, x: np.ndarray,
                          m: int) -> np.ndarray:
    """``int phi(u, rho(x, u)) du`` over ``|u - uc| <= a`` by Gauss-Legendre (n = 2)."""
    from .core import scaled_radius

    u, w = _gl_interval(m, uc - a, uc + a)
    acc = np.zeros(len(x))
    for uj, wj in zip(u, w):
        acc += wj * phi(np.full(len(x), uj), scaled_radius(model, x, np.array([uj])))
    return acc

"""Quadratic-phase transform of the data and the second inversion formula.

With ``s = t^2`` and ``q(u, s) = d/ds R_E f(u, sqrt(s))`` the transform is

    G(u, w) = int_0^inf d_t R_E f(u, t) e^{i w t^2} dt = int_0^inf q(u, s) e^{i w s} ds
            = int f(x) exp(i w rho(x, u)^2) dx .

For ``x_n > 0`` the reconstruction is

    f(x) = x_n / (nu C (2 pi)^n) int int e^{-i|a|^2/(4g)} e^{i a.xbar} e^{-i g r(x)} G(A'a/(2g), g) da dg

with ``xbar = (x_1/lam, x~/nu)`` and ``r(x) = |A^{-1} x|^2``.  Substituting
``a = 2 g A'^{-1} u`` turns it into

    f(x) = 2^{n-1} x_n / (C^2 (2 pi)^n) int du int |g|^{n-1} G(u, g) e^{-i g rho(x, u)^2} dg ,

which is evaluated on the data's own ``u``-grid (no interpolation of ``G``).
Three pieces keep the truncated quadrature accurate:

* for ``n = 2``, ``q`` jumps at ``s = 0``; the jump ``q(u, 0) e^{-s/sigma}`` is
  removed before the ``g`` quadrature and its filtered contribution is added
  in closed form (``Ei`` function);
* ``g`` is apodised with a Hann window on ``[-gamma_max, gamma_max]``;
* centres beyond ``|u| = U`` correspond to the cone ``|g| < |A'a|/(2U)``;
  there ``K`` is smooth in ``g`` and is interpolated across the cone from
  samples just outside it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import expi

from .core import EccentricityModel, Grid, PhantomSpec, ScalarField
from .exceptions import NumericalToleranceError, TruncationWarning, ValidationError
from ._parallel import chunked_map
from .transform import DerivedSinogram, _trapezoid_weights

__all__ = [
    "ChirpData",
    "ChirpSpectrum",
    "compute_G",
    "compute_K",
    "chirp_spectrum",
    "invert_chirp",
    "k_eval",
    "k_fourier_direct",
    "complete_radius",
    "default_w_grid",
]

JUMP_SIGMA = 1.0


@dataclass(frozen=True)
class ChirpData:
    """``G(u, w)`` on the data ``u``-grid and a symmetric ``w`` grid.

    ``jump`` holds ``q(u, 0)`` (zero for ``n = 3``) and ``s_max = t_max^2``.
    ``richardson`` is the largest relative change of ``G`` between the two
    ``s``-resolutions used to compute it.
    """

    model: EccentricityModel
    u_grid: Grid
    w: np.ndarray
    values: np.ndarray
    jump: np.ndarray
    s_max: float
    richardson: float = 0.0
    sigma: float = JUMP_SIGMA

    def __post_init__(self):
        w = np.asarray(self.w, float)
        if not np.allclose(w, -w[::-1], rtol=0, atol=1e-12 * max(1.0, np.abs(w).max())):
            raise ValidationError("w-grid must be symmetric about 0")
        if np.any(w == 0):
            raise ValidationError("w-grid must exclude w = 0")
        object.__setattr__(self, "w", w)

    @property
    def w_min(self) -> float:
        return float(np.abs(self.w).min())

    def jump_transform(self, w) -> np.ndarray:
        """Transform of ``e^{-s/sigma}`` on ``[0, s_max]`` at frequencies ``w``."""
        w = np.asarray(w, float)
        z = 1.0 / self.sigma - 1j * w
        return (1.0 - np.exp(-z * self.s_max)) / z


@dataclass(frozen=True)
class ChirpSpectrum:
    alpha: np.ndarray
    gamma: np.ndarray
    values: np.ndarray


def default_w_grid(s_max: float, gamma_max: float, oversample: float = 2.0) -> np.ndarray:
    """Midpoint grid on ``[-gamma_max, gamma_max]`` fine enough for phases up to ``s_max``."""
    dw = math.pi / (oversample * s_max)
    m = int(math.ceil(gamma_max / dw))
    half = dw * (np.arange(m) + 0.5)
    return np.concatenate([-half[::-1], half])


def _q_samples(g: DerivedSinogram, ds: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``q(u, s)`` on the uniform ``s`` grid ``[0, t_max^2]`` from a spline of ``d_t R_E f``."""
    n = g.model.n
    t = g.t
    T = t[-1]
    D = g.values * t ** (n - 1)
    flat = D.reshape(-1, len(t))
    tt = np.concatenate([[0.0], t])
    cs = CubicSpline(tt, np.concatenate([np.zeros((len(flat), 1)), flat], axis=1), axis=1)
    m = int(math.ceil(T * T / ds))
    s = np.linspace(0.0, T * T, m + 1)
    ts = np.sqrt(s)
    q = np.empty((len(flat), len(s)))
    q[:, 1:] = cs(ts[1:]) / (2 * ts[1:])
    # q(u, 0) = lim D / (2t) = D'(0) / 2
    q[:, 0] = cs(0.0, 1) / 2 if n == 2 else 0.0
    return s, q, q[:, 0].copy()


def _trap_s(q: np.ndarray, s: np.ndarray, w: np.ndarray) -> np.ndarray:
    h = s[1] - s[0]
    ws = np.full(len(s), h)
    ws[0] *= 0.5
    ws[-1] *= 0.5
    return (q * ws) @ np.exp(1j * np.outer(s, w))


def compute_G(g: DerivedSinogram, w, ds: float | None = None, richardson: bool = False,
              tol: float = 1e-3) -> ChirpData:
    """``G(u, w)`` by the trapezoid rule in ``s = t^2`` with midpoint refinement.

    ``ds`` defaults to ``min(0.01, pi / (8 max|w|))``.  The
    coarse (``2 ds``) and fine estimates are compared; with ``richardson=True``
    a relative change above ``tol`` raises :class:`NumericalToleranceError`.
    """
    w = np.asarray(w, float)
    wmax = float(np.abs(w).max())
    if ds is None:
        ds = min(0.01, math.pi / (8 * wmax))
    s, q, jump = _q_samples(g, ds)
    sigma = JUMP_SIGMA
    # remove the jump so that the quadrature only sees a continuous integrand
    qr = q - jump[:, None] * np.exp(-s / sigma)
    fine = _trap_s(qr, s, w)
    coarse = _trap_s(qr[:, ::2], s[::2], w) if (len(s) - 1) % 2 == 0 else fine
    scale = np.abs(fine).max() or 1.0
    change = float(np.abs(fine - coarse).max() / scale)
    if richardson and change > tol:
        raise NumericalToleranceError(f"G quadrature not converged: relative change {change:.2e} > {tol:.1e}")
    s_max = float(s[-1])
    z = 1.0 / sigma - 1j * w
    G = fine + jump[:, None] * ((1.0 - np.exp(-z * s_max)) / z)
    shape = g.u_grid.dims + (len(w),)
    return ChirpData(g.model, g.u_grid, w, G.reshape(shape), jump.reshape(g.u_grid.dims), s_max, change, sigma)


def _dechirped(chirp: ChirpData) -> np.ndarray:
    """``e^{-i w |A'^{-1} u|^2} G(u, w)``, smooth in ``u``."""
    up = chirp.u_grid.points()
    r2 = np.sum((up / chirp.model.hyperplane_axes) ** 2, axis=-1)
    return chirp.values * np.exp(-1j * r2[..., None] * chirp.w)


def _column_interpolant(chirp: ChirpData, j: int):
    """Interpolant in ``u`` of the de-chirped column ``w_j``."""
    from scipy.interpolate import RegularGridInterpolator

    up = chirp.u_grid.points()
    r2g = np.sum((up / chirp.model.hyperplane_axes) ** 2, axis=-1)
    dech = chirp.values[..., j] * np.exp(-1j * r2g * chirp.w[j])
    if chirp.u_grid.ndim == 1:
        cs = CubicSpline(chirp.u_grid.axis(0), dech)
        return lambda u: cs(u[:, 0])
    method = "cubic" if min(chirp.u_grid.dims) >= 4 else "linear"
    return RegularGridInterpolator(chirp.u_grid.axes(), dech, method=method)


def compute_K(chirp: ChirpData, alpha, gamma, _cache: dict | None = None) -> np.ndarray:
    """``K(a, g) = (2C)^{-1} e^{i|a|^2/(4g)} G(-A'a/(2g), -g)``.

    ``-g`` must be a node of the ``w`` grid (within 1e-9 relative); the
    ``u``-point is reached by cubic interpolation of the de-chirped ``G``.
    Points outside the ``u``-grid raise :class:`ValidationError`.
    """
    model = chirp.model
    alpha = np.asarray(alpha, float).reshape(-1, model.n - 1)
    gamma = np.broadcast_to(np.asarray(gamma, float), (len(alpha),))
    if np.any(np.abs(gamma) < chirp.w_min * (1 - 1e-9)):
        raise ValidationError("|gamma| below the w-grid's gamma_min")
    idx = np.searchsorted(chirp.w, -gamma).clip(1, len(chirp.w) - 1)
    idx = np.where(np.abs(chirp.w[idx - 1] + gamma) < np.abs(chirp.w[idx] + gamma), idx - 1, idx)
    if np.any(np.abs(chirp.w[idx] + gamma) > 1e-9 * np.abs(gamma)):
        raise ValidationError("-gamma must lie on the w-grid")
    u = -model.hyperplane_axes * alpha / (2 * gamma[:, None])
    lo = np.array(chirp.u_grid.origin)
    hi = lo + np.array(chirp.u_grid.spacing) * (np.array(chirp.u_grid.dims) - 1)
    if np.any(u < lo - 1e-12) or np.any(u > hi + 1e-12):
        raise ValidationError("mapped u-point lies outside the G u-grid")
    cache = {} if _cache is None else _cache
    out = np.empty(len(alpha), complex)
    for j in np.unique(idx):
        sel = idx == j
        if j not in cache:
            cache[j] = _column_interpolant(chirp, int(j))
        Gd = cache[j](u[sel])
        r2 = np.sum((u[sel] / model.hyperplane_axes) ** 2, axis=-1)
        Gv = Gd * np.exp(1j * r2 * chirp.w[j])
        a2 = np.sum(alpha[sel] ** 2, axis=-1)
        out[sel] = np.exp(1j * a2 / (4 * gamma[sel])) * Gv / (2 * model.c_lambda)
    return out


def chirp_spectrum(chirp: ChirpData, alpha, gamma) -> ChirpSpectrum:
    """``K`` on a tensor grid of ``alpha`` (n = 2) and ``gamma``."""
    A, Gm = np.meshgrid(np.asarray(alpha, float), np.asarray(gamma, float), indexing="ij")
    vals = compute_K(chirp, A.reshape(-1, 1), Gm.ravel()).reshape(A.shape)
    return ChirpSpectrum(np.asarray(alpha, float), np.asarray(gamma, float), vals)


def k_eval(f, model: EccentricityModel, x1, xt, r) -> np.ndarray:
    """``k(x_1, x~, r) = f(lam x_1, nu x~, nu z) / (2 z)`` with ``z = sqrt(r - x_1^2 - |x~|^2)``; zero off-domain."""
    x1 = np.asarray(x1, float)
    xt = np.asarray(xt, float)
    r = np.asarray(r, float)
    if model.n == 2:
        xt = np.zeros(x1.shape + (0,))
    elif xt.shape == x1.shape:
        xt = xt[..., None]
    p = x1 ** 2 + np.sum(xt ** 2, axis=-1)
    ok = (p > 0) & (p < r)
    z = np.sqrt(np.where(ok, r - p, 1.0))
    pts = np.concatenate([(model.lam * x1)[..., None], model.nu * xt, (model.nu * z)[..., None]], axis=-1)
    return np.where(ok, f(pts) / (2 * z), 0.0)


def k_fourier_direct(f, model: EccentricityModel, alpha, gamma, half_width: float, m: int = 200) -> np.ndarray:
    """Oracle for ``K``: ``int e^{-i a.xbar - i g r} k dxbar dr`` with ``r = |xbar|^2 + z^2`` (n = 2).

    The substitution removes the square-root singularity of ``k``; the
    remaining smooth integral is a tensor Gauss-Legendre rule on
    ``[-half_width, half_width] x [0, half_width]``.
    """
    if model.n != 2:
        raise ValidationError("k_fourier_direct is implemented for n = 2")
    x, w = np.polynomial.legendre.leggauss(m)
    xb = half_width * x
    wb = half_width * w
    z = 0.5 * half_width * (x + 1)
    wz = 0.5 * half_width * w
    XB, Z = np.meshgrid(xb, z, indexing="ij")
    F = f(np.stack([model.lam * XB, model.nu * Z], axis=-1)) * (wb[:, None] * wz[None, :])
    alpha = np.atleast_1d(np.asarray(alpha, float))
    gamma = np.broadcast_to(np.asarray(gamma, float), alpha.shape)
    out = np.empty(alpha.shape, complex)
    for i, (a, gm) in enumerate(zip(alpha, gamma)):
        out[i] = np.sum(F * np.exp(-1j * a * XB - 1j * gm * (XB ** 2 + Z ** 2)))
    return out


def complete_radius(g: DerivedSinogram, tol: float = 1e-6) -> float:
    """Largest ``U`` such that every ``|u| <= U`` has negligible data at ``t_max``.

    Inside that disc ``G(u, .)`` is not affected by the truncation in ``t``.
    """
    v = np.abs(g.values)
    peak = v.max()
    if peak == 0:
        return float("inf")
    tail = v[..., -max(1, v.shape[-1] // 20):].max(axis=-1)
    r = np.linalg.norm(g.u_grid.points(), axis=-1)
    bad = tail > tol * peak
    return float(r[bad].min()) - max(g.u_grid.spacing) if np.any(bad) else float(r.max())


def _ramp_jump(a: np.ndarray, sigma: float) -> np.ndarray:
    """``(1/2pi) int |g| E^(g) e^{-i g a} dg`` for ``E(s) = e^{-s/sigma} H(s)``, ``a > 0``."""
    x = a / sigma
    big = x > 600
    xs = np.where(big, 1.0, x)
    e = np.exp(-xs) * expi(xs)
    # e^{-x} Ei(x) ~ (1/x)(1 + 1/x + 2/x^2 + 6/x^3) for large x
    xb = np.where(big, x, 1.0)
    e = np.where(big, (1 + 1 / xb + 2 / xb ** 2 + 6 / xb ** 3) / xb, e)
    return (1 / np.pi) * (1 / a - e / sigma)


@dataclass
class ChirpReport:
    u_max: float
    gamma_max: float
    gamma_min: float
    cone_fraction: float = 0.0
    tail_energy: float = 0.0
    richardson: dict = field(default_factory=dict)


def invert_chirp(chirp: ChirpData, output: Grid, trunc_box: tuple | None = None, gamma_min: float | None = None,
                 cone_terms: int = 4, alpha_step: float = 0.05, alpha_max: float | None = None,
                 richardson: bool = False, tol: float = 0.05, return_report: bool = False):
    """Reconstruct ``f`` on ``output`` from ``G``.

    ``trunc_box = (u_max, gamma_max)`` bounds the quadrature: centres with
    ``|u| <= u_max`` (their far complement is restored by the cone
    interpolation) and ``|g| <= gamma_max`` (Hann apodised).  ``gamma_min``
    (default ``0.05 gamma_max``) removes ``|g| < gamma_min`` from the direct
    quadrature; that band is restored together with the cone, and the
    restored share is reported as ``cone_fraction``.  With
    ``richardson=True`` the ``g`` quadrature is repeated on every other node
    and a relative change above ``tol`` raises.
    """
    model = chirp.model
    n = model.n
    if output.ndim != n:
        raise ValidationError("output grid dimension must equal n")
    if n == 3:
        warnings.warn("invert_chirp in n = 3 skips the cone correction and is not accuracy-validated",
                      TruncationWarning, stacklevel=2)
    w = chirp.w
    up = chirp.u_grid.points().reshape(-1, n - 1)
    unorm = np.linalg.norm(up, axis=-1)
    u_max, gamma_max = trunc_box if trunc_box is not None else (float(unorm.max()), float(np.abs(w).max()))
    # without the cone restoration (n = 3) nothing refills an excluded band
    gmin = (0.05 * gamma_max if n == 2 else 0.0) if gamma_min is None else float(gamma_min)
    if gmin < 0 or gmin >= gamma_max:
        raise ValidationError("gamma_min must lie in [0, gamma_max)")
    gmin = max(gmin, chirp.w_min)
    report = ChirpReport(float(u_max), float(gamma_max), float(gmin))

    sel_w = (np.abs(w) <= gamma_max) & (np.abs(w) >= gmin * (1 - 1e-12))
    ww = w[sel_w]
    if len(ww) < 2:
        raise ValidationError("trunc_box and gamma_min leave fewer than two w nodes")
    # the w grid is uniform away from the excluded band; each node carries one cell
    dw = float(np.median(np.diff(ww[ww > 0]))) if np.sum(ww > 0) > 1 else float(ww.max() * 2)
    window = np.cos(np.pi * ww / (2 * gamma_max)) ** 2
    filt = np.abs(ww) ** (n - 1) * window * dw

    G = chirp.values.reshape(-1, len(w))[:, sel_w]
    jump = chirp.jump.reshape(-1)
    Gr = G - jump[:, None] * chirp.jump_transform(ww)
    tail_mask = np.abs(ww) > 0.5 * gamma_max
    num = np.sum(np.abs(Gr[:, tail_mask] * filt[tail_mask]) ** 2)
    den = np.sum(np.abs(Gr * filt) ** 2) or 1.0
    report.tail_energy = float(num / den)
    if report.tail_energy > 0.01:
        warnings.warn(f"gamma truncation tail energy {report.tail_energy:.1%} exceeds 1%", TruncationWarning,
                      stacklevel=2)

    inside = unorm <= u_max + 1e-12
    wu = _trapezoid_weights(chirp.u_grid).reshape(-1)[inside]
    U = up[inside]
    Gr = Gr[inside]
    jmp = jump[inside]

    x = output.points().reshape(-1, n)
    # f is even in x_n: evaluate at |x_n|
    pos = np.abs(x[:, -1]) > 0
    xp = x[pos].copy()
    xp[:, -1] = np.abs(xp[:, -1])
    # nodes cover |g| >= band; the rest is restored from K below
    band = max(float(np.abs(ww).min()) - 0.5 * dw, 0.0)
    # the closed-form jump term spans all g; its share inside the band is removed
    # here because the K interpolation restores that band from the full data
    bx, bw = np.polynomial.legendre.leggauss(32)
    bg = 0.5 * band * (bx + 1)
    bw = 0.5 * band * bw * bg * chirp.jump_transform(bg)

    def block(sl: slice) -> np.ndarray:
        xs = xp[sl]
        res = np.zeros((2, len(xs)))
        for j in range(len(U)):
            r2 = np.sum(((xs[:, :-1] - U[j]) / model.hyperplane_axes) ** 2, axis=-1) + (xs[:, -1] / model.nu) ** 2
            ph = np.exp(-1j * np.outer(r2, ww))
            fg = filt * Gr[j]
            res[0] += wu[j] * (ph @ fg).real
            if richardson:
                res[1] += wu[j] * 2 * (ph[:, ::2] @ fg[::2]).real
            if n == 2:
                jt = 2 * np.pi * _ramp_jump(r2, chirp.sigma)
                if band > 0:
                    jt -= 2 * (np.exp(-1j * np.outer(r2, bg)) @ bw).real
                res += wu[j] * jmp[j] * jt
        return res.T

    out_blocks = np.zeros((len(xp), 2))
    chunked_map(block, len(xp), 64, out_blocks)
    acc, acc_coarse = out_blocks.T
    pref = 2 ** (n - 1) / (model.c_lambda ** 2 * (2 * np.pi) ** n)
    fx = pref * xp[:, -1] * acc
    if richardson:
        change = float(np.linalg.norm(acc - acc_coarse) / max(np.linalg.norm(acc), 1e-300))
        report.richardson["gamma"] = change
        if change > tol:
            raise NumericalToleranceError(f"gamma quadrature not converged: relative change {change:.2e}")
    report.richardson["G"] = chirp.richardson

    if n == 2:
        corr = _cone_correction(chirp, xp, u_max, gamma_max, band, cone_terms, alpha_step, alpha_max)
        report.cone_fraction = float(np.linalg.norm(corr) / max(np.linalg.norm(fx), 1e-300))
        fx = fx + corr

    vals = np.zeros(len(x))
    vals[pos] = fx
    vals = vals.reshape(output.dims)
    # the x_n factor vanishes on x_n = 0; take the mean of the neighbouring rows there
    zero = np.flatnonzero(output.axis(n - 1) == 0.0)
    for k in zero:
        if 0 < k < output.dims[-1] - 1:
            vals[..., k] = 0.5 * (vals[..., k - 1] + vals[..., k + 1])
    rec = ScalarField(output, vals, model, even=output.is_symmetric_last_axis())
    return (rec, report) if return_report else rec


def _cone_correction(chirp: ChirpData, xp: np.ndarray, u_max: float, gamma_max: float, band: float, terms: int,
                     alpha_step: float, alpha_max: float | None) -> np.ndarray:
    """Contribution of ``|g| < max(lam |a| / (2 u_max), band)`` (n = 2).

    The first bound is the image of the centres ``|u| > u_max``; ``band`` is
    the excluded low-frequency band.

    For each ``a`` the smooth ``K(a, .)`` is sampled at the first ``terms``
    grid nodes outside the cone on both sides, fitted by a polynomial, and
    integrated against ``e^{i g r}`` over the cone with Gauss-Legendre.
    """
    model = chirp.model
    lam = model.lam
    w = chirp.w
    pos_w = np.sort(w[w > 0])
    if alpha_max is None:
        alpha_max = min(2 * pos_w[-1] * u_max / lam, 20.0)
    a_half = alpha_step * (np.arange(int(math.ceil(alpha_max / alpha_step))) + 0.5)
    alphas = np.concatenate([-a_half[::-1], a_half])
    xbar = xp[:, 0] / lam
    r = (xp[:, 0] / lam) ** 2 + (xp[:, 1] / model.nu) ** 2
    gx, gwts = np.polynomial.legendre.leggauss(16)
    corr = np.zeros(len(xp), complex)
    cache: dict = {}
    for a in alphas:
        gc = max(lam * abs(a) / (2 * u_max), band)
        if gc <= 0:
            continue
        outside = pos_w[pos_w >= gc * (1 - 1e-12)]
        if len(outside) < terms:
            continue
        # samples spread over [gc, 1.75 gc], snapped to grid nodes
        pick = np.searchsorted(outside, gc * (1 + 0.25 * np.arange(terms)))
        for i in range(1, terms):
            pick[i] = max(pick[i], pick[i - 1] + 1)
        if pick[-1] >= len(outside):
            continue
        gs = outside[pick]
        gsym = np.concatenate([-gs[::-1], gs])
        try:
            Ks = compute_K(chirp, np.full((len(gsym), 1), a), gsym, _cache=cache)
        except ValidationError:
            continue
        scale = gs[-1]
        coef = np.polyfit(gsym / scale, Ks, len(gsym) - 1)
        gq = gc * gx
        Kq = np.polyval(coef, gq / scale)
        Wq = np.cos(np.pi * gq / (2 * gamma_max)) ** 2
        inner = np.exp(1j * np.outer(r, gq)) @ (Kq * Wq * gwts * gc)
        corr += alpha_step * np.exp(1j * a * xbar) * inner
    return (2 * xp[:, 1] / (model.nu * (2 * np.pi) ** 2) * corr).real

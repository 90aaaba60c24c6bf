"""Forward transform, surface data, back projection, duality and the moment operator."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._parallel import chunked_map
from ._quadrature import cap_cosine, circle_arc_rule, full_sphere_rule, gauss_legendre, sphere_cap_rule
from .core import EccentricityModel, Grid, PhantomSpec, ScalarField, scaled_radius
from .exceptions import TruncationWarning, ValidationError

__all__ = [
    "Sinogram",
    "DerivedSinogram",
    "t_grid",
    "forward",
    "derived_exact",
    "derived_sinogram",
    "volume_from_surface",
    "derive_numeric",
    "backproject",
    "backproject_function",
    "duality_residual",
    "moment_apply",
    "DEFAULT_ORDERS",
]

# (radial order, angular order) per dimension; in 3D the angular order is the
# polar count and the azimuth uses twice as many nodes
DEFAULT_ORDERS = {2: (64, 64), 3: (32, 24)}
# evaluations per chunk before handing to the thread pool
_CHUNK_EVALS = 1 << 21


def t_grid(t_max: float, count: int) -> Grid:
    """Uniform grid ``t_j = j * t_max / count``, ``j = 1..count`` (t = 0 excluded)."""
    if not t_max > 0 or count < 1:
        raise ValidationError("t_max must be positive and count >= 1")
    h = float(t_max) / int(count)
    return Grid((h,), (h,), (int(count),))


@dataclass(frozen=True)
class Sinogram:
    """Samples of ``R_E f`` on a ``(u, t)`` grid; ``values`` has shape ``u_dims + (n_t,)``."""

    model: EccentricityModel
    u_grid: Grid
    t_grid: Grid
    values: np.ndarray

    kind = "sinogram"

    def __post_init__(self):
        if self.u_grid.ndim != self.model.n - 1 or self.t_grid.ndim != 1:
            raise ValidationError("u-grid must have n-1 axes and t-grid one axis")
        if self.t_grid.origin[0] <= 0:
            raise ValidationError("t-grid must start at t > 0")
        v = np.asarray(self.values, float)
        if v.shape != self.u_grid.dims + self.t_grid.dims:
            raise ValidationError(f"values shape {v.shape} does not match grids")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def t(self) -> np.ndarray:
        return self.t_grid.axis(0)

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Broadcast ``(u, t)`` arrays with shapes ``dims + (n-1,)`` and ``dims``."""
        up = self.u_grid.points()
        u = np.broadcast_to(up[..., None, :], self.values.shape + (self.model.n - 1,))
        t = np.broadcast_to(self.t, self.values.shape)
        return u, t


class DerivedSinogram(Sinogram):
    """Samples of ``g = t^{1-n} d/dt R_E f``."""

    kind = "derived"


# ------------------------------------------------------------ quadrature kernels


def _prim_surface(prim, model: EccentricityModel, U: np.ndarray, R: np.ndarray, m: int) -> np.ndarray:
    """``int_{S^{n-1}} prim(u + R A y) dsigma(y)`` restricted to the cap that can hit the primitive."""
    n = model.n
    axes = model.axes
    c = prim.full_center()
    q = (c[:-1] - U) / axes[:-1]
    qn = np.linalg.norm(q, axis=-1)
    rp = prim.support_radius() / axes.min()
    c0 = cap_cosine(R, qn, rp)
    active = (c0 <= 1.0) & (R > 0)
    out = np.zeros(R.shape)
    if not np.any(active):
        return out
    U, R, q, qn, c0 = U[active], R[active], q[active], qn[active], c0[active]
    if n == 2:
        theta0 = np.where(q[:, 0] >= 0, 0.0, np.pi)
        y, w = circle_arc_rule(theta0, c0, m)
    else:
        safe = qn > 0
        ax = np.zeros((len(qn), 3))
        ax[:, 0] = 1.0
        ax[safe, :2] = q[safe] / qn[safe, None]
        y, w = sphere_cap_rule(ax, c0, m, 2 * m)
    base = np.concatenate([U, np.zeros((len(U), 1))], axis=-1)
    x = base[:, None, :] + R[:, None, None] * axes * y
    out[active] = np.sum(w * prim(x), axis=-1)
    return out


def _callable_surface(f: Callable, model: EccentricityModel, U: np.ndarray, R: np.ndarray, m: int) -> np.ndarray:
    y, w = full_sphere_rule(model.n, m)
    base = np.concatenate([U, np.zeros((len(U), 1))], axis=-1)
    x = base[:, None, :] + R[:, None, None] * (model.axes * y)[None]
    return np.asarray(f(x), float) @ w


def _surface(f, model, U, R, m) -> np.ndarray:
    """``C * int_S f(u + R A y) dsigma`` for flat arrays ``U (P, n-1)``, ``R (P,)``."""
    if isinstance(f, PhantomSpec):
        acc = np.zeros(R.shape)
        for p in f.primitives:
            acc += _prim_surface(p, model, U, R, m)
    else:
        acc = _callable_surface(f, model, U, R, m)
    return model.c_lambda * acc


def _radial_limits(f, model, U, T):
    """Radial interval ``[lo, hi]`` outside which ``f(u + rAy)`` vanishes for all ``y``."""
    if not isinstance(f, PhantomSpec) or not f.primitives:
        return np.zeros_like(T), T.copy()
    axes = model.axes
    los, his = [], []
    for p in f.primitives:
        q = (p.full_center()[:-1] - U) / axes[:-1]
        qn = np.linalg.norm(q, axis=-1)
        rp = p.support_radius() / axes.min()
        los.append(np.maximum(qn - rp, 0.0))
        his.append(qn + rp)
    lo = np.min(los, axis=0)
    hi = np.minimum(np.max(his, axis=0), T)
    return lo, hi


def _ball(f, model, U, T, q, m) -> np.ndarray:
    """``C * int_{|z|<T} f(u + A z) dz`` by radial Gauss-Legendre times a direction rule.

    Each primitive gets its own radial interval so the radial nodes are spent
    where the primitive lives.
    """
    n = model.n
    if isinstance(f, PhantomSpec):
        out = np.zeros(T.shape)
        for p in f.primitives:
            single = PhantomSpec((p,), f.n)
            lo, hi = _radial_limits(single, model, U, T)
            ok = hi > lo
            if not np.any(ok):
                continue
            r, wr = gauss_legendre(q, lo[ok], hi[ok])
            P = int(ok.sum())
            Uq = np.repeat(U[ok], q, axis=0)
            s = _surface(single, model, Uq, r.ravel(), m).reshape(P, q)
            out[ok] += np.sum(wr * r ** (n - 1) * s, axis=-1)
        return out
    r, wr = gauss_legendre(q, np.zeros_like(T), T)
    P = len(T)
    Uq = np.repeat(U, q, axis=0)
    s = _surface(f, model, Uq, r.ravel(), m).reshape(P, q)
    return np.sum(wr * r ** (n - 1) * s, axis=-1)


def _as_integrand(f, model):
    if isinstance(f, ScalarField):
        if f.grid.ndim != model.n:
            raise ValidationError("field dimension does not match model")
        return f.interpolator()
    if isinstance(f, PhantomSpec):
        if f.n != model.n:
            raise ValidationError(f"phantom dimension {f.n} does not match model n={model.n}")
        return f
    if callable(f):
        return f
    raise ValidationError("integrand must be a PhantomSpec, ScalarField or callable")


def _orders(model, order, angular_order):
    dq, dm = DEFAULT_ORDERS[model.n]
    return int(order or dq), int(angular_order or dm)


def _evaluate(kernel, f, model, u, t, per_point: int) -> np.ndarray:
    u = np.asarray(u, float)
    t = np.asarray(t, float)
    if model.n == 2 and u.shape == t.shape:
        u = u[..., None]
    u, t = np.broadcast_arrays(u, t[..., None])
    shape = t.shape[:-1]
    U = u.reshape(-1, model.n - 1)
    T = t[..., 0].reshape(-1)
    if np.any(T <= 0):
        raise ValidationError("t must be positive")
    out = np.empty(T.shape)
    chunked_map(lambda s: kernel(f, model, U[s], T[s]), len(T), max(1, _CHUNK_EVALS // per_point), out)
    return out.reshape(shape)


def _coverage_warning(f, model, u_grid: Grid, t_max: float):
    if not isinstance(f, PhantomSpec) or not f.primitives:
        return
    lo, hi = f.bounding_box()
    corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(model.n, -1).T
    uc = np.array([u_grid.origin[i] + 0.5 * u_grid.spacing[i] * (u_grid.dims[i] - 1) for i in range(u_grid.ndim)])
    if np.max(scaled_radius(model, corners, uc)) > t_max:
        warnings.warn("phantom support exceeds the largest ellipsoid of the t-grid", TruncationWarning, stacklevel=3)


def forward(f, model: EccentricityModel, u_grid: Grid, tgrid: Grid, order: int | None = None,
            angular_order: int | None = None) -> Sinogram:
    """Volume integrals ``R_E f(u, t)`` on the tensor grid ``u_grid x tgrid``."""
    if tgrid.origin[0] <= 0:
        raise ValidationError("t-grid must not include t <= 0")
    f = _as_integrand(f, model)
    q, m = _orders(model, order, angular_order)
    _coverage_warning(f, model, u_grid, tgrid.axis(0)[-1])
    up = u_grid.points()
    u = np.broadcast_to(up[..., None, :], u_grid.dims + tgrid.dims + (model.n - 1,))
    t = np.broadcast_to(tgrid.axis(0), u_grid.dims + tgrid.dims)
    per = q * m * (2 * m if model.n == 3 else 1)
    vals = _evaluate(lambda f_, mo, U, T: _ball(f_, mo, U, T, q, m), f, model, u, t, per)
    return Sinogram(model, u_grid, tgrid, vals)


def forward_points(f, model: EccentricityModel, u, t, order: int | None = None,
                   angular_order: int | None = None) -> np.ndarray:
    """``R_E f`` at scattered ``(u, t)``; ``u`` has trailing axis ``n-1`` (optional for n = 2)."""
    f = _as_integrand(f, model)
    q, m = _orders(model, order, angular_order)
    per = q * m * (2 * m if model.n == 3 else 1)
    return _evaluate(lambda f_, mo, U, T: _ball(f_, mo, U, T, q, m), f, model, u, t, per)


def derived_exact(f, model: EccentricityModel, u, t, angular_order: int | None = None) -> np.ndarray:
    """``g(u, t) = C * int_{S^{n-1}} f(u + t A y) dsigma(y)`` at scattered points."""
    f = _as_integrand(f, model)
    _, m = _orders(model, None, angular_order)
    per = m * (2 * m if model.n == 3 else 1)
    return _evaluate(lambda f_, mo, U, T: _surface(f_, mo, U, T, m), f, model, u, t, per)


def derived_sinogram(f, model: EccentricityModel, u_grid: Grid, tgrid: Grid,
                     angular_order: int | None = None) -> DerivedSinogram:
    up = u_grid.points()
    u = np.broadcast_to(up[..., None, :], u_grid.dims + tgrid.dims + (model.n - 1,))
    t = np.broadcast_to(tgrid.axis(0), u_grid.dims + tgrid.dims)
    return DerivedSinogram(model, u_grid, tgrid, derived_exact(f, model, u, t, angular_order))


def volume_from_surface(f, model: EccentricityModel, u_grid: Grid, tgrid: Grid, nodes: int = 4,
                        angular_order: int | None = None) -> Sinogram:
    """``R_E f = int_0^t s^{n-1} g(u, s) ds`` accumulated cell by cell from exact surface data.

    Each t-cell gets a ``nodes``-point Gauss-Legendre rule, so the cost is
    ``nodes`` surface sinograms.  Much cheaper than :func:`forward` on large
    grids and accurate for phantoms that are smooth along ``t``.
    """
    if tgrid.origin[0] <= 0:
        raise ValidationError("t-grid must not include t <= 0")
    n = model.n
    edges = np.concatenate([[0.0], tgrid.axis(0)])
    s, w = gauss_legendre(nodes, edges[:-1], edges[1:])  # (nt, nodes)
    up = u_grid.points()
    u = np.broadcast_to(up[..., None, None, :], u_grid.dims + s.shape + (n - 1,))
    g = derived_exact(f, model, u, np.broadcast_to(s, u_grid.dims + s.shape), angular_order)
    cells = np.sum(g * s ** (n - 1) * w, axis=-1)
    return Sinogram(model, u_grid, tgrid, np.cumsum(cells, axis=-1))


def derive_numeric(s: Sinogram) -> DerivedSinogram:
    if s.t_grid.dims[0] < 3:
        raise ValidationError("derive_numeric needs at least 3 t nodes")
    d = np.gradient(s.values, s.t_grid.spacing[0], axis=-1, edge_order=2)
    return DerivedSinogram(s.model, s.u_grid, s.t_grid, d / s.t ** (s.model.n - 1))


# ------------------------------------------------------------ back projection


def _trapezoid_weights(grid: Grid) -> np.ndarray:
    w = np.ones(grid.dims)
    for i, m in enumerate(grid.dims):
        wi = np.full(m, grid.spacing[i])
        if m > 1:
            wi[0] *= 0.5
            wi[-1] *= 0.5
        shape = [1] * grid.ndim
        shape[i] = m
        w = w * wi.reshape(shape)
    return w


def _boundary_check(g: Sinogram, tol: float):
    v = np.abs(g.values)
    peak = v.max()
    if peak == 0:
        return
    edge = v[..., -1].max()
    for i in range(g.u_grid.ndim):
        edge = max(edge, np.take(v, 0, axis=i).max(), np.take(v, -1, axis=i).max())
    if edge > tol * peak:
        warnings.warn(f"data not negligible on the grid boundary ({edge / peak:.2e} of peak); "
                      "back projection is truncated", TruncationWarning, stacklevel=3)


def backproject(g: Sinogram, target: Grid, check_tol: float = 1e-3) -> ScalarField:
    """``R*_E g(x) = int g(u, rho(x, u)) du`` by the trapezoid rule in ``u``.

    ``g`` is interpolated linearly in ``t`` and taken as zero above ``t_max``
    and below the first ``t`` node.
    """
    model = g.model
    if target.ndim != model.n:
        raise ValidationError("target grid dimension must equal n")
    if check_tol is not None:
        _boundary_check(g, check_tol)
    x = target.points().reshape(-1, model.n)
    U = g.u_grid.points().reshape(-1, model.n - 1)
    W = _trapezoid_weights(g.u_grid).reshape(-1)
    G = g.values.reshape(len(U), -1)
    t = g.t

    def block(s: slice) -> np.ndarray:
        acc = np.zeros(s.stop - s.start)
        xs = x[s]
        for j in range(len(U)):
            if W[j] == 0:
                continue
            rho = scaled_radius(model, xs, U[j])
            acc += W[j] * np.interp(rho, t, G[j], left=0.0, right=0.0)
        return acc

    out = np.empty(len(x))
    chunked_map(block, len(x), 65536, out)
    return ScalarField(target, out.reshape(target.dims), model)


def backproject_function(phi: Callable, model: EccentricityModel, u_grid: Grid, x: np.ndarray) -> np.ndarray:
    """Back projection of an analytic ``phi(u, t)`` at points ``x`` (trapezoid in ``u`` only)."""
    x = np.asarray(x, float)
    pts = x.reshape(-1, model.n)
    U = u_grid.points().reshape(-1, model.n - 1)
    W = _trapezoid_weights(u_grid).reshape(-1)
    acc = np.zeros(len(pts))
    for j in range(len(U)):
        rho = scaled_radius(model, pts, U[j])
        uj = np.broadcast_to(U[j], pts[:, :-1].shape)
        acc += W[j] * phi(uj if model.n > 2 else uj[:, 0], rho)
    return acc.reshape(x.shape[:-1])


def duality_residual(f, phi: Callable, model: EccentricityModel, u_grid: Grid, tgrid: Grid,
                     x_grid: Grid, angular_order: int | None = None) -> tuple[float, float, float]:
    """Both sides of ``int int d_t R_E f * phi du dt = int f R*_E phi dx``.

    The left side uses exact surface data and the trapezoid rule on the
    ``(u, t)`` grid; the right side back-projects ``phi`` sampled on the same
    grid and integrates against ``f`` on ``x_grid``.
    """
    n = model.n
    g = derived_sinogram(f, model, u_grid, tgrid, angular_order)
    uu, tt = g.points()
    ph = phi(uu[..., 0] if n == 2 else uu, tt)
    wt = _trapezoid_weights(u_grid)[..., None] * tgrid.spacing[0]
    lhs = float(np.sum(g.values * tt ** (n - 1) * ph * wt))
    bp = backproject(DerivedSinogram(model, u_grid, tgrid, ph), x_grid, check_tol=None)
    fx = _as_integrand(f, model)(x_grid.points())
    rhs = float(np.sum(fx * bp.values) * x_grid.cell_volume)
    if lhs == 0 and rhs == 0:
        return 0.0, 0.0, 0.0
    return lhs, rhs, abs(lhs - rhs) / abs(rhs)


# ------------------------------------------------------------ moment operator


def moment_apply(s: Sinogram, i: int, kappa: tuple[float, float] | None = None) -> np.ndarray:
    """Apply ``D_i S = k_t * t * d_{u_i} S + k_u * u_i * d_t S`` to volume data ``S = R_E f``.

    With the default coefficients ``(a_i^2, 1)``, where ``a_1 = lam`` and
    ``a_i = nu`` otherwise, the result approximates ``d_t R_E(x_i f)``.
    Derivatives are second-order finite differences; axes of length 1 other
    than ``i`` are allowed.
    """
    model = s.model
    if not 1 <= i <= model.n - 1:
        raise ValidationError(f"axis index i must be in 1..{model.n - 1}")
    if s.kind != "sinogram":
        raise ValidationError("moment_apply acts on volume data R_E f, not on derived data")
    if s.u_grid.dims[i - 1] < 3 or s.t_grid.dims[0] < 3:
        raise ValidationError("need at least 3 nodes along u_i and t")
    a = model.axes[i - 1]
    k_t, k_u = kappa if kappa is not None else (a * a, 1.0)
    v = s.values
    du = np.gradient(v, s.u_grid.spacing[i - 1], axis=i - 1, edge_order=2)
    dt = np.gradient(v, s.t_grid.spacing[0], axis=-1, edge_order=2)
    shape = [1] * v.ndim
    shape[i - 1] = s.u_grid.dims[i - 1]
    ui = s.u_grid.axis(i - 1).reshape(shape)
    return k_t * s.t * du + k_u * ui * dt

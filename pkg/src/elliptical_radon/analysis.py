"""Sobolev norms of fields and data, the stability ratio, and the local-data probe.

Field norms use ``f_hat`` with the ``(2 pi)^{-n}`` Plancherel factor, so
``field_norm(f, 0)`` is the L2 norm.  Data norms use
``g~(k', eta) = (2 pi)^{n/2} H_n[g_hat(k', .)](eta)`` with the weight
``eta^{n-1}``; Plancherel then reads

    int int |g~|^2 eta^{n-1} d eta dk' = (2 pi)^{2n-1} int int |g|^2 t^{n-1} dt du .

The unweighted data norm of untruncated data diverges logarithmically in
``t`` (``g`` falls off like ``t^{1-n}``), so data are multiplied by a smooth
taper that is 1 on ``[0, a T]`` and falls to 0 at ``T = t_max``.  Ratios are
therefore taken at a fixed taper.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._parallel import chunked_map
from .core import (Gaussian, Grid, LocalDataSets, PhantomSpec, ScalarField, in_V, in_W, make_model,
                   sample_phantom, scaled_radius, EccentricityModel)
from .exceptions import ValidationError
from .spectral import _default_data, radial_kernel
from .transform import DerivedSinogram, forward_points

__all__ = [
    "SobolevReport",
    "ProbeReport",
    "field_norm",
    "data_norm",
    "data_l2_direct",
    "taper",
    "stability_ratio",
    "stability_family",
    "stability_sweep",
    "nullspace_probe",
    "probe_matrix",
    "containment_check",
    "outside_support_check",
    "PLANCHEREL_CONSTANT",
]

DEFAULT_TAPER = 0.5


def PLANCHEREL_CONSTANT(n: int) -> float:
    """Factor between the spectral and the direct weighted L2 norms of data (squared)."""
    return (2 * math.pi) ** (2 * n - 1)


@dataclass
class SobolevReport:
    gamma: float
    field_norm: float
    data_norm: float
    ratio: float
    zero_data: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ProbeReport:
    sets: LocalDataSets
    field_resolution: int
    data_resolution: tuple
    unknowns: int
    samples: int
    singular_values: np.ndarray
    condition_ratio: float
    rank: int = 0
    cell_centers: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "model": self.sets.model.to_dict(),
            "u0": list(self.sets.u0),
            "epsilon": self.sets.epsilon,
            "T": self.sets.T,
            "field_resolution": self.field_resolution,
            "data_resolution": list(self.data_resolution),
            "unknowns": self.unknowns,
            "samples": self.samples,
            "rank": self.rank,
            "condition_ratio": self.condition_ratio,
            "singular_values": [float(s) for s in self.singular_values],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "singular_value", "relative"])
            s0 = self.singular_values[0] if len(self.singular_values) else 1.0
            for i, s in enumerate(self.singular_values):
                w.writerow([i, repr(float(s)), repr(float(s / s0))])


# ------------------------------------------------------------ norms


def _sobolev_weight(k2: np.ndarray, gamma: float) -> np.ndarray:
    return (1.0 + k2) ** gamma


def field_norm(f: ScalarField, gamma: float, pad: int = 2) -> float:
    """``(sum |f_hat|^2 (1 + |k|^2)^gamma dk / (2 pi)^n)^{1/2}`` from a zero-padded FFT."""
    if gamma < 0:
        raise ValidationError("gamma must be >= 0")
    g = f.grid
    shape = tuple(pad * d for d in g.dims)
    F = np.fft.fftn(f.values, s=shape, axes=tuple(range(g.ndim)))
    ks = np.meshgrid(*[2 * np.pi * np.fft.fftfreq(s, h) for s, h in zip(shape, g.spacing)], indexing="ij")
    k2 = sum(k * k for k in ks)
    dk = np.prod([2 * np.pi / (s * h) for s, h in zip(shape, g.spacing)])
    total = np.sum(np.abs(F) ** 2 * _sobolev_weight(k2, gamma)) * g.cell_volume ** 2 * dk / (2 * np.pi) ** g.ndim
    return float(math.sqrt(total))


def taper(t: np.ndarray, t_max: float, start: float = DEFAULT_TAPER) -> np.ndarray:
    """1 on ``[0, start t_max]``, a cosine ramp to 0 at ``t_max``."""
    a = start * t_max
    s = np.clip((t - a) / (t_max - a), 0.0, 1.0)
    return np.cos(0.5 * np.pi * s) ** 2


def data_l2_direct(g: DerivedSinogram, start: float | None = DEFAULT_TAPER) -> float:
    """``(int int |tau g|^2 t^{n-1} dt du)^{1/2}`` by the rectangle rule."""
    t = g.t
    tau = taper(t, t[-1], start) if start is not None else 1.0
    n = g.model.n
    du = np.prod(g.u_grid.spacing)
    dt = g.t_grid.spacing[0]
    return float(math.sqrt(np.sum(np.abs(g.values * tau) ** 2 * t ** (n - 1)) * du * dt))


def data_norm(g: DerivedSinogram, gamma: float, start: float | None = DEFAULT_TAPER, pad: int = 2,
              eta_oversample: int = 4) -> float:
    """``(int int |g~|^2 (1 + |k'|^2 + eta^2)^gamma eta^{n-1} d eta dk')^{1/2}`` of the tapered data.

    ``g_hat`` comes from a zero-padded FFT over ``u``; ``H_n`` is the
    rectangle rule on the ``t`` grid, evaluated on a midpoint ``eta`` grid
    with step ``pi / (eta_oversample t_max)`` up to ``pi / dt``.
    """
    if gamma < 0:
        raise ValidationError("gamma must be >= 0")
    n = g.model.n
    t = g.t
    dt = g.t_grid.spacing[0]
    T = t[-1]
    tau = taper(t, T, start) if start is not None else np.ones_like(t)
    ug = g.u_grid
    shape = tuple(pad * d for d in ug.dims)
    F = np.fft.fftn(g.values * tau, s=shape, axes=tuple(range(n - 1))) * np.prod(ug.spacing)
    ks = np.meshgrid(*[2 * np.pi * np.fft.fftfreq(s, h) for s, h in zip(shape, ug.spacing)], indexing="ij")
    kp2 = sum(k * k for k in ks).reshape(-1)
    dk = np.prod([2 * np.pi / (s * h) for s, h in zip(shape, ug.spacing)])
    F = F.reshape(-1, len(t))
    deta = np.pi / (eta_oversample * T)
    eta = deta * (np.arange(int(math.ceil(np.pi / dt / deta))) + 0.5)
    kernel = radial_kernel(n, np.outer(eta, t)) * (t ** (n - 1) * dt)
    chunk = 256
    starts = list(range(0, len(F), chunk))

    def block(sl: slice) -> np.ndarray:
        res = np.empty(sl.stop - sl.start)
        for i, j in enumerate(range(sl.start, sl.stop)):
            rows = slice(starts[j], starts[j] + chunk)
            H = (2 * np.pi) ** (n / 2) * (F[rows] @ kernel.T)
            w = _sobolev_weight(kp2[rows, None] + eta[None, :] ** 2, gamma) * eta ** (n - 1)
            res[i] = np.sum(np.abs(H) ** 2 * w)
        return res

    parts = chunked_map(block, len(starts), 1, np.zeros(len(starts)))
    return float(math.sqrt(parts.sum() * deta * dk))


# ------------------------------------------------------------ stability


def _field_grid(f: PhantomSpec, h: float, margin: float = 0.5) -> Grid:
    lo, hi = f.bounding_box()
    half = np.maximum(np.abs(lo), np.abs(hi))
    lo_ = lo - margin
    hi_ = hi + margin
    pts = np.ceil((hi_ - lo_) / h).astype(int) + 1
    origin = list(lo_)
    # keep the last axis reflection symmetric
    pts[-1] = 2 * int(math.ceil((half[-1] + margin) / h)) + 1
    origin[-1] = -h * (pts[-1] - 1) / 2
    return Grid(tuple(origin), (h,) * len(pts), tuple(int(p) for p in pts))


def stability_ratio(f: PhantomSpec, model: EccentricityModel, gamma: float, t_max: float = 10.0,
                    du: float = 0.05, dt: float = 0.02, h: float = 0.05,
                    data: DerivedSinogram | None = None) -> SobolevReport:
    """``||f||_gamma / ||g||_{gamma + (n-1)/2}`` for a phantom and its simulated data."""
    field_ = sample_phantom(f, _field_grid(f, h), model)
    fn = field_norm(field_, gamma)
    if data is None:
        data = _default_data(f, model, t_max, du, dt)
    dn = data_norm(data, gamma + (model.n - 1) / 2)
    if dn == 0:
        return SobolevReport(gamma, fn, 0.0, 0.0 if fn == 0 else math.inf, zero_data=True)
    return SobolevReport(gamma, fn, dn, fn / dn)


def stability_family(n: int = 2, widths=(0.6, 0.7, 0.8, 0.9, 1.0), centers=(-1.0, 0.0, 1.0)) -> list[PhantomSpec]:
    """Gaussians at five widths and three hyperplane centres (15 phantoms for the defaults)."""
    fam = []
    for w in widths:
        for c in centers:
            fam.append(PhantomSpec((Gaussian((c,) + (0.0,) * (n - 2), (w,) * n),), n))
    return fam


def stability_sweep(model: EccentricityModel | None = None, gamma: float = 0.0, family=None,
                    **kw) -> list[SobolevReport]:
    model = model or make_model(math.sqrt(2), 2)
    family = family or stability_family(model.n)
    return [stability_ratio(f, model, gamma, **kw) for f in family]


# ------------------------------------------------------------ local data probe


def _seg_area(R: float, x0: float, x1: float, y0: float, y1: float) -> float:
    """Area of the disc ``|z| < R`` inside the rectangle ``[x0, x1] x [y0, y1]``."""
    x0, x1 = max(x0, -R), min(x1, R)
    if x1 <= x0 or y1 <= y0:
        return 0.0

    def S(x):  # antiderivative of sqrt(R^2 - x^2)
        x = min(max(x, -R), R)
        return 0.5 * (x * math.sqrt(max(R * R - x * x, 0.0)) + R * R * math.asin(x / R))

    cuts = {x0, x1}
    for y in (y0, y1):
        if abs(y) < R:
            c = math.sqrt(R * R - y * y)
            cuts.update(v for v in (-c, c) if x0 < v < x1)
    xs = sorted(cuts)
    area = 0.0
    for a, b in zip(xs[:-1], xs[1:]):
        m = 0.5 * (a + b)
        s = math.sqrt(max(R * R - m * m, 0.0))
        top_is_circle = s < y1
        bot_is_circle = -s > y0
        top = min(y1, s)
        bot = max(y0, -s)
        if top <= bot:
            continue
        seg = 0.0
        seg += (S(b) - S(a)) if top_is_circle else y1 * (b - a)
        seg -= -(S(b) - S(a)) if bot_is_circle else y0 * (b - a)
        area += seg
    return area


def _probe_cells(sets: LocalDataSets, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Cells of the rectangle inscribed in ``V_T``; returns lower corners and widths (upper half only).

    The rectangle is ``|x_1 - u0| <= lam T / sqrt 2``, ``|x_n| <= nu T / sqrt 2``;
    the ``x_n`` side is split into ``r`` cells, paired by reflection.
    """
    m = sets.model
    if m.n != 2:
        raise ValidationError("nullspace_probe supports n = 2")
    a = m.lam * sets.T / math.sqrt(2)
    b = m.nu * sets.T / math.sqrt(2)
    hx = 2 * a / r
    hy = 2 * b / r
    x_lo = sets.u0[0] - a + hx * np.arange(r)
    y_lo = -b + hy * np.arange(r)
    upper = y_lo + 0.5 * hy >= 0 if r % 2 == 0 else y_lo + hy > 0
    X, Y = np.meshgrid(x_lo, y_lo[upper], indexing="ij")
    lo = np.stack([X.ravel(), Y.ravel()], axis=-1)
    return lo, np.array([hx, hy])


def probe_matrix(sets: LocalDataSets, r: int, data_resolution=(16, 32), max_entries: int = 4_000_000) -> tuple:
    """Dense matrix of ``R_E`` from even cell indicators in ``V_T`` to midpoint samples of ``U_{T,eps}``.

    Entries are exact areas: the ellipse maps to a disc of radius ``t`` under
    ``A^{-1}`` and cells map to rectangles, so each entry is ``C`` times a
    disc-rectangle area.
    """
    m = sets.model
    lo, h = _probe_cells(sets, r)
    nu_, nt = data_resolution
    du = 2 * sets.epsilon / nu_
    dt = sets.T / nt
    u = sets.u0[0] - sets.epsilon + du * (np.arange(nu_) + 0.5)
    t = dt * (np.arange(nt) + 0.5)
    rows = nu_ * nt
    if rows * len(lo) > max_entries:
        raise ValidationError(f"probe matrix {rows} x {len(lo)} exceeds {max_entries} entries")
    r_odd = r % 2 == 1
    M = np.zeros((rows, len(lo)))

    def col(j):
        x0, y0 = lo[j]
        x1, y1 = x0 + h[0], y0 + h[1]
        out = np.empty(rows)
        k = 0
        for ui in u:
            a0, a1 = (x0 - ui) / m.lam, (x1 - ui) / m.lam
            for ti in t:
                if r_odd and y0 < 0:  # the central cell straddles x_n = 0 and is its own mirror
                    area = _seg_area(ti, a0, a1, y0 / m.nu, y1 / m.nu)
                else:
                    area = _seg_area(ti, a0, a1, y0 / m.nu, y1 / m.nu) + _seg_area(ti, a0, a1, -y1 / m.nu, -y0 / m.nu)
                out[k] = m.c_lambda * area
                k += 1
        return out

    chunked_map(lambda s: np.stack([col(j) for j in range(s.start, s.stop)]), len(lo), 4, M.T)
    return M, lo + 0.5 * h


def nullspace_probe(sets: LocalDataSets, r: int, data_resolution=(16, 32), rank_tol: float = 1e-10) -> ProbeReport:
    """Singular values of the restricted forward map; full column rank mirrors local uniqueness."""
    if r < 1 or r > 12:
        raise ValidationError("field resolution must be between 1 and 12")
    M, centers = probe_matrix(sets, r, data_resolution)
    s = np.linalg.svd(M, compute_uv=False)
    ratio = float(s[-1] / s[0]) if s[0] > 0 else 0.0
    rank = int(np.sum(s > rank_tol * s[0]))
    return ProbeReport(sets, r, tuple(data_resolution), M.shape[1], M.shape[0], s, ratio, rank, centers)


def containment_check(sets: LocalDataSets, samples: int = 100_000, seed: int = 0) -> int:
    """Number of ellipsoid points outside ``V_T`` for random ``(u, t)`` in ``W_T``; 0 expected for ``nu >= 1``."""
    m = sets.model
    n = m.n
    rng = np.random.default_rng(seed)
    u0 = np.asarray(sets.u0)
    out = []
    need = samples
    while need > 0:
        batch = 2 * need + 16
        du = rng.uniform(-sets.T, sets.T, (batch, n - 1))
        t = rng.uniform(0, sets.T, batch)
        pts = np.concatenate([u0 + du, t[:, None]], axis=-1)
        ok = in_W(sets, pts)
        out.append(pts[ok][:need])
        need -= int(min(ok.sum(), need))
    ut = np.concatenate(out)
    # uniform points in the unit ball
    z = rng.standard_normal((samples, n))
    z /= np.linalg.norm(z, axis=-1, keepdims=True)
    z *= rng.uniform(0, 1, samples)[:, None] ** (1 / n)
    base = np.concatenate([ut[:, :-1], np.zeros((samples, 1))], axis=-1)
    x = base + ut[:, -1:] * m.axes * z
    return int(np.sum(~in_V(sets, x)))


def outside_support_check(sets: LocalDataSets, f: PhantomSpec, samples: int = 200, seed: int = 0) -> float:
    """``max |R_E f| / sup|f|`` over random points of ``W_T``; ``f`` must avoid ``V_T``."""
    m = sets.model
    rng = np.random.default_rng(seed)
    # sufficient: each primitive's support ball stays at scaled distance >= T from u0
    for p in f.primitives:
        gap = float(scaled_radius(m, p.full_center(), np.asarray(sets.u0))) - p.support_radius() / m.axes.min()
        if gap < sets.T:
            raise ValidationError("phantom support meets V_T")
    pts = []
    u0 = np.asarray(sets.u0)
    while len(pts) < samples:
        du = rng.uniform(-sets.T, sets.T, m.n - 1)
        t = rng.uniform(0, sets.T)
        p = np.concatenate([u0 + du, [t]])
        if in_W(sets, p) and t > 0:
            pts.append(p)
    pts = np.array(pts)
    vals = forward_points(f, m, pts[:, :-1], pts[:, -1])
    return float(np.max(np.abs(vals)) / f.sup_norm_bound())

"""Desk-scale acceptance checks shared by the ``selftest`` command and the test suite.

Each ``criterion_*`` function returns a :class:`CriterionResult`; thresholds
are the documented ones and are never relaxed here.  Values recorded from the
first verified run (stability bound, probe floor, moment coefficients) live
in ``data/fixtures.json``.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from . import analysis, chirp, spectral, transform
from .exceptions import TruncationWarning
from .core import (BallBump, Gaussian, Grid, LocalDataSets, PhantomSpec, make_model, sample_phantom,
                   symmetric_grid, unit_ball_volume)

__all__ = ["CriterionResult", "CRITERIA", "run_all", "load_fixtures", "format_result"]


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: dict
    thresholds: dict
    seconds: float = 0.0
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed, "measured": self.measured,
                "thresholds": self.thresholds, "seconds": round(self.seconds, 3), "notes": self.notes}


def format_result(r: CriterionResult) -> str:
    tag = "PASS" if r.passed else "FAIL"
    vals = ", ".join(f"{k}={_fmt(v)}" for k, v in r.measured.items())
    return f"[{tag}] criterion {r.number:2d} {r.name}: {vals} ({r.seconds:.1f}s)"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.3e}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def load_fixtures() -> dict:
    return json.loads(resources.files("elliptical_radon").joinpath("data/fixtures.json").read_text())


def _timed(fn):
    def wrapper(*a, **kw):
        t0 = time.perf_counter()
        r = fn(*a, **kw)
        r.seconds = time.perf_counter() - t0
        return r

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


SQRT2 = math.sqrt(2)


def gaussian_phantom(n: int = 2, width: float = 1.0, center: float = 0.0) -> PhantomSpec:
    return PhantomSpec((Gaussian((center,) + (0.0,) * (n - 2), (width,) * n),), n)


def two_bump_phantom() -> PhantomSpec:
    return PhantomSpec((BallBump((-1.2,), 0.8, 4, 1.0), BallBump((1.4,), 0.8, 4, 0.8)), 2)


@lru_cache(maxsize=4)
def _gaussian_data(n: int):
    m = make_model(SQRT2, n)
    if n == 2:
        return spectral._default_data(gaussian_phantom(2), m, 12.0, 0.0625, 0.02)
    return spectral._default_data(gaussian_phantom(3, 0.7), m, 8.0, 0.25, 0.05, angular_order=16)


@lru_cache(maxsize=1)
def _fourier_2d():
    g = _gaussian_data(2)
    return spectral.invert_fourier(g, symmetric_grid(2, 4.0, 64))


# ------------------------------------------------------------ criteria


@_timed
def criterion_1() -> CriterionResult:
    """Forward transform of f = 1 against the ellipsoid volume."""
    one = lambda x: np.ones(np.shape(x)[:-1])
    m2 = make_model(SQRT2, 2)
    ug = Grid((-1.0,), (2.0 / 31,), (32,))
    tg = transform.t_grid(2.0, 32)
    t0 = time.perf_counter()
    s2 = transform.forward(one, m2, ug, tg, order=64)
    runtime = time.perf_counter() - t0
    exact2 = unit_ball_volume(2) * m2.c_lambda * tg.axis(0) ** 2
    err2 = float(np.max(np.abs(s2.values / exact2 - 1)))
    m3 = make_model(SQRT2, 3)
    ug3 = Grid((-1.0, -1.0), (0.5, 0.5), (5, 5))
    tg3 = transform.t_grid(2.0, 8)
    s3 = transform.forward(one, m3, ug3, tg3)
    exact3 = unit_ball_volume(3) * m3.c_lambda * tg3.axis(0) ** 3
    err3 = float(np.max(np.abs(s3.values / exact3 - 1)))
    ok = err2 <= 1e-8 and err3 <= 1e-6 and runtime < 1.0
    return CriterionResult(1, "analytic volume", ok, {"rel_err_n2": err2, "rel_err_n3": err3, "runtime_32x32_s": runtime},
                           {"rel_err_n2": 1e-8, "rel_err_n3": 1e-6, "runtime_32x32_s": 1.0})


def duality_pair():
    m = make_model(SQRT2, 2)
    f = PhantomSpec((Gaussian((0.3,), (0.7, 0.7)),), 2)

    def phi(u, t):
        return np.exp(-u ** 2 - (t - 2.0) ** 2 / 0.3)

    return m, f, phi


def duality_gap(h: float) -> float:
    m, f, phi = duality_pair()
    ug = Grid((-8.0,), (h,), (int(round(16 / h)) + 1,))
    tg = transform.t_grid(6.0, int(round(6 / h)))
    xg = symmetric_grid(2, 4.5, int(round(9 / h)))
    return transform.duality_residual(f, phi, m, ug, tg, xg)[2]


@_timed
def criterion_2() -> CriterionResult:
    """Duality pairing at the default step 0.025 and at half that step."""
    g1 = duality_gap(0.025)
    g2 = duality_gap(0.0125)
    shrink = g1 / g2 if g2 > 0 else math.inf
    return CriterionResult(2, "duality", g1 <= 1e-3 and shrink >= 4.0, {"gap": g1, "gap_refined": g2, "shrink": shrink},
                           {"gap": 1e-3, "shrink": 4.0})


@_timed
def criterion_3() -> CriterionResult:
    """Shifting the phantom by whole u-cells shifts the data by the same cells."""
    errs = []
    for n in (2, 3):
        m = make_model(SQRT2, n)
        h = 0.1
        k = 5
        dims = (40,) * (n - 1)
        ug = Grid((-2.0,) * (n - 1), (h,) * (n - 1), dims)
        tg = transform.t_grid(2.0, 10)
        base = (0.3,) + (0.0,) * (n - 2)
        shifted = (0.3 + k * h,) + (0.0,) * (n - 2)
        f0 = PhantomSpec((Gaussian(base, (0.5,) * n),), n)
        f1 = PhantomSpec((Gaussian(shifted, (0.5,) * n),), n)
        ao = 12 if n == 3 else None
        s0 = transform.derived_sinogram(f0, m, ug, tg, ao).values
        s1 = transform.derived_sinogram(f1, m, ug, tg, ao).values
        scale = np.abs(s0).max()
        errs.append(float(np.max(np.abs(s1[k:] - s0[:-k])) / scale))
    return CriterionResult(3, "shift invariance", max(errs) <= 1e-12, {"rel_err_n2": errs[0], "rel_err_n3": errs[1]},
                           {"rel_err": 1e-12})


@_timed
def criterion_4() -> CriterionResult:
    """Odd functions in x_n are annihilated."""
    errs = []
    for n in (2, 3):
        m = make_model(SQRT2, n)
        c = np.append(np.full(n - 1, 0.2), 0.0)
        odd = lambda x, c=c: x[..., -1] * np.exp(-np.sum((x - c) ** 2, axis=-1))
        absf = lambda x: np.abs(odd(x))
        ug = Grid((-2.0,) * (n - 1), (0.5,) * (n - 1), (9,) * (n - 1))
        tg = transform.t_grid(3.0, 8)
        s = transform.forward(odd, m, ug, tg).values
        scale = transform.forward(absf, m, ug, tg).values.max()
        errs.append(float(np.abs(s).max() / scale))
    return CriterionResult(4, "odd annihilation", max(errs) <= 1e-12, {"rel_n2": errs[0], "rel_n3": errs[1]},
                           {"rel": 1e-12})


@_timed
def criterion_5() -> CriterionResult:
    """Fourier-slice residual on a 5 x 5 probe and the vanishing condition."""
    m = make_model(SQRT2, 2)
    f = gaussian_phantom(2)
    g = _gaussian_data(2)
    xi = np.array([[a, b] for a in np.linspace(-2, 2, 5) for b in (-2.0, -1.0, 0.5, 1.0, 2.0)])
    fhat = lambda k: math.pi * np.exp(-np.sum(k ** 2, axis=-1) / 4)
    res = float(spectral.slice_residual(f, m, xi, data=g, fhat=fhat).max())
    van = max(spectral.vanishing_ratio(g, [k]) for k in (0.5, 1.0, 2.0))
    return CriterionResult(5, "Fourier slice", res <= 1e-2 and van <= 1e-4, {"residual": res, "vanishing": van},
                           {"residual": 1e-2, "vanishing": 1e-4})


def _rel(a, b) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


@_timed
def criterion_6() -> CriterionResult:
    """Fourier inversion: Gaussian and two-bump phantoms (n = 2), Gaussian at 24^3 (n = 3)."""
    t0 = time.perf_counter()
    out = symmetric_grid(2, 4.0, 64)
    rec = _fourier_2d()
    err2 = _rel(rec.values, sample_phantom(gaussian_phantom(2), out).values)
    m = make_model(SQRT2, 2)
    tb = two_bump_phantom()
    g = spectral._default_data(tb, m, 12.0, 0.0625, 0.02)
    r2 = spectral.invert_fourier(g, out).values
    x = out.axis(0)
    cell = out.spacing[0]
    offs = []
    for c, (lo, hi) in zip((-1.2, 1.4), ((-4, 0.1), (0.1, 4))):
        sel = (x > lo) & (x < hi)
        sub = r2[sel]
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        offs.append(max(abs(x[sel][i] - c), abs(out.axis(1)[j])) / cell)
    runtime2 = time.perf_counter() - t0
    g3 = _gaussian_data(3)
    out3 = symmetric_grid(3, 3.0, 24)
    rec3 = spectral.invert_fourier(g3, out3)
    err3 = _rel(rec3.values, sample_phantom(gaussian_phantom(3, 0.7), out3).values)
    ok = err2 <= 0.05 and max(offs) <= 1.0 and runtime2 <= 120 and err3 <= 0.10
    return CriterionResult(6, "Fourier inversion", ok,
                           {"rel_l2_n2": err2, "argmax_offset_cells": [float(o) for o in offs],
                            "runtime_n2_s": runtime2, "rel_l2_n3": err3},
                           {"rel_l2_n2": 0.05, "argmax_offset_cells": 1.0, "runtime_n2_s": 120, "rel_l2_n3": 0.10})


@_timed
def criterion_7() -> CriterionResult:
    """Chirp inversion at 32^2 and agreement with the Fourier reconstruction."""
    m = make_model(SQRT2, 2)
    f = gaussian_phantom(2)
    g = spectral._default_data(f, m, 8.0, 0.1, 0.02)
    cd = chirp.compute_G(g, chirp.default_w_grid(g.t[-1] ** 2, 15.0))
    out = symmetric_grid(2, 4.0, 32)
    rec, rep = chirp.invert_chirp(cd, out, trunc_box=(chirp.complete_radius(g), 15.0), return_report=True)
    truth = sample_phantom(f, out).values
    err = _rel(rec.values, truth)
    fourier = _fourier_2d().interpolator()(out.points())
    cross = _rel(rec.values, fourier)
    return CriterionResult(7, "chirp inversion", err <= 0.10 and cross <= 0.12,
                           {"rel_l2": err, "cross_method": cross, "restored_share": rep.cone_fraction},
                           {"rel_l2": 0.10, "cross_method": 0.12})


@_timed
def criterion_8() -> CriterionResult:
    """Convolution identity at three sample points, two refinement levels."""
    m = make_model(SQRT2, 2)
    f = PhantomSpec((Gaussian((0.0,), (0.8, 0.8)),), 2)
    uc, a, b = 0.3, 0.5, 1.0

    def phi(u, t):
        x = np.clip(1 - ((u - uc) / a) ** 2, 0, None)
        y = np.clip(1 - (t / b) ** 2, 0, None)
        return x ** 3 * y ** 3

    samples = [(0.2, 1.0), (-0.5, 1.5), (1.0, 2.0)]
    g1 = spectral.convolution_residual(f, phi, m, samples, (uc, a, b), level=1)["max_gap"]
    g2 = spectral.convolution_residual(f, phi, m, samples, (uc, a, b), level=2)["max_gap"]
    return CriterionResult(8, "convolution identity", g1 <= 0.02 and g2 < g1, {"max_gap": g1, "max_gap_refined": g2},
                           {"max_gap": 0.02})


@_timed
def criterion_9() -> CriterionResult:
    """Stability ratio over the 15-phantom Gaussian family (gamma = 0)."""
    fx = load_fixtures()["stability"]
    reps = analysis.stability_sweep(make_model(SQRT2, 2), 0.0)
    r = np.array([x.ratio for x in reps])
    band = float(r.max() / r.min())
    ok = bool(np.all(np.isfinite(r))) and band <= 2.0 and float(r.max()) <= fx["bound"]
    return CriterionResult(9, "stability sweep", ok, {"min_ratio": float(r.min()), "max_ratio": float(r.max()), "band": band},
                           {"band": 2.0, "bound": fx["bound"]})


def moment_calibration(n: int, i: int, points: int = 12, seed: int = 0, h: float = 1e-3):
    """Fit ``(k_t, k_u)`` so ``D_i`` of volume data matches ``d_t R_E(x_i f)``; return fit and errors."""
    m = make_model(SQRT2, n)
    f = PhantomSpec((Gaussian((0.4,) + (0.2,) * (n - 2), (0.8,) * n),), n)
    xf = lambda x: x[..., i - 1] * f(x)
    rng = np.random.default_rng(seed)
    cols, target = [], []
    for _ in range(points):
        u = rng.uniform(-1.5, 1.5, n - 1)
        t = rng.uniform(0.5, 2.5)
        # a 3-node stencil per axis; central differences at the middle node
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            s = transform.forward(f, m, Grid(tuple(u - h), (h,) * (n - 1), (3,) * (n - 1)),
                                  Grid((t - h,), (h,), (3,)))
        c = (1,) * n
        cols.append([transform.moment_apply(s, i, (1.0, 0.0))[c], transform.moment_apply(s, i, (0.0, 1.0))[c]])
        target.append(t ** (n - 1) * transform.derived_exact(xf, m, u[None], np.array([t]),
                                                              angular_order=64 if n == 3 else 256)[0])
    A = np.array(cols)
    y = np.array(target)
    kappa = np.linalg.lstsq(A, y, rcond=None)[0]
    err = float(np.linalg.norm(A @ kappa - y) / np.linalg.norm(y))
    literal = np.array([m.c_lambda * m.nu, m.c_lambda])
    err_literal = float(np.linalg.norm(A @ literal - y) / np.linalg.norm(y))
    return kappa, err, err_literal, (A, y)


@_timed
def criterion_10() -> CriterionResult:
    """Moment operator after calibration: n = 2 axis 1, n = 3 axes 1 and 2."""
    fx = load_fixtures()["kappa"]
    measured, ok = {}, True
    for n, i in ((2, 1), (3, 1), (3, 2)):
        kappa, err, err_lit, (A, y) = moment_calibration(n, i)
        fixed = np.array(fx[f"n{n}_i{i}"])
        err_fixed = float(np.linalg.norm(A @ fixed - y) / np.linalg.norm(y))
        measured[f"n{n}_i{i}_kappa"] = [float(k) for k in kappa]
        measured[f"n{n}_i{i}_err"] = err_fixed
        measured[f"n{n}_i{i}_err_literal"] = err_lit
        ok = ok and err_fixed <= 1e-3
    return CriterionResult(10, "moment operator", ok, measured, {"err": 1e-3})


@_timed
def criterion_11(seed: int = 0) -> CriterionResult:
    m = make_model(SQRT2, 2)
    sets = LocalDataSets(m, (0.0,), 0.2, 1.0)
    viol = analysis.containment_check(sets, 100_000, seed)
    m3 = make_model(2.0, 3)
    viol3 = analysis.containment_check(LocalDataSets(m3, (0.0, 0.0), 0.2, 1.0), 100_000, seed)
    f = PhantomSpec((BallBump((3.0,), 1.0),), 2)
    leak = analysis.outside_support_check(sets, f, 200, seed)
    ok = viol == 0 and viol3 == 0 and leak <= 1e-10
    return CriterionResult(11, "geometric containment", ok,
                           {"violations_n2": viol, "violations_n3": viol3, "outside_leak": leak},
                           {"violations": 0, "outside_leak": 1e-10})


@_timed
def criterion_12() -> CriterionResult:
    fx = load_fixtures()["probe"]
    sets = LocalDataSets(make_model(SQRT2, 2), (0.0,), 0.2, 1.0)
    a = analysis.nullspace_probe(sets, 8)
    b = analysis.nullspace_probe(sets, 8)
    repro = float(np.max(np.abs(a.singular_values - b.singular_values)) / a.singular_values[0])
    ok = a.rank == a.unknowns and a.condition_ratio >= fx["floor"] and repro <= 1e-8
    return CriterionResult(12, "local probe", ok,
                           {"rank": a.rank, "unknowns": a.unknowns, "sigma_ratio": a.condition_ratio,
                            "reproducibility": repro},
                           {"floor": fx["floor"], "reproducibility": 1e-8})


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 13)}


def run_all(which=None, seed: int = 0, echo=None) -> list[CriterionResult]:
    out = []
    for i in which or sorted(CRITERIA):
        r = CRITERIA[i](seed) if i == 11 else CRITERIA[i]()
        out.append(r)
        if echo:
            echo(format_result(r))
    return out

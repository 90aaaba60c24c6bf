"""scikit-learn style wrappers around the forward model and both inversions.

``X`` is a phantom (or a list of phantoms) for :class:`EllipticalRadonTransform`
and derived data (or a list) for the inverters; ``transform`` returns a
single object or a list accordingly.
"""

from __future__ import annotations

import math

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .chirp import compute_G, complete_radius, default_w_grid, invert_chirp
from .core import Grid, PhantomSpec, ScalarField, make_model, symmetric_grid
from .exceptions import ValidationError
from .spectral import FarFieldConfig, invert_fourier
from .transform import DerivedSinogram, derived_sinogram, t_grid

__all__ = ["EllipticalRadonTransform", "FourierInverter", "ChirpInverter"]


def _as_list(X):
    return (list(X), True) if isinstance(X, (list, tuple)) else ([X], False)


def _check_param(cond: bool, msg: str):
    if not cond:
        raise ValidationError(msg)


class EllipticalRadonTransform(TransformerMixin, BaseEstimator):
    """Phantom -> derived data ``t^{1-n} d_t R_E f`` on a grid covering the phantom."""

    def __init__(self, lam: float = math.sqrt(2), n: int = 2, t_max: float = 12.0, du: float = 0.0625,
                 dt: float = 0.02, angular_order: int | None = None):
        self.lam = lam
        self.n = n
        self.t_max = t_max
        self.du = du
        self.dt = dt
        self.angular_order = angular_order

    def fit(self, X=None, y=None):
        _check_param(self.t_max > 0 and self.du > 0 and self.dt > 0, "t_max, du and dt must be positive")
        self.model_ = make_model(self.lam, self.n)
        return self

    def _u_grid(self, f: PhantomSpec) -> Grid:
        lo, hi = f.bounding_box()
        m = self.model_
        half = [max(abs(lo[i]), abs(hi[i])) + m.hyperplane_axes[i] * self.t_max for i in range(m.n - 1)]
        pts = [2 * int(math.ceil(h / self.du)) + 1 for h in half]
        return Grid(tuple(-self.du * (p - 1) / 2 for p in pts), (self.du,) * (m.n - 1), tuple(pts))

    def transform(self, X):
        check_is_fitted(self, "model_")
        items, many = _as_list(X)
        out = []
        for f in items:
            if not isinstance(f, PhantomSpec):
                raise ValidationError("EllipticalRadonTransform expects PhantomSpec inputs")
            tg = t_grid(self.t_max, int(round(self.t_max / self.dt)))
            out.append(derived_sinogram(f, self.model_, self._u_grid(f), tg, self.angular_order))
        return out if many else out[0]


class _Inverter(TransformerMixin, BaseEstimator):
    def _output_grid(self, n: int) -> Grid:
        return symmetric_grid(n, self.half_width, self.points)

    def fit(self, X, y=None):
        items, _ = _as_list(X)
        for g in items:
            if not isinstance(g, DerivedSinogram):
                raise ValidationError("inverters expect DerivedSinogram inputs")
        self.model_ = items[0].model
        if any(g.model != self.model_ for g in items):
            raise ValidationError("all inputs must share one eccentricity model")
        self.grid_ = self._output_grid(self.model_.n)
        return self

    def transform(self, X):
        check_is_fitted(self, "grid_")
        items, many = _as_list(X)
        out = []
        for g in items:
            if g.model != self.model_:
                raise ValidationError("input model differs from the fitted model")
            out.append(self._invert(g))
        return out if many else out[0]


class FourierInverter(_Inverter):
    """Fourier-slice inversion; ``far_field_terms=0`` disables the tail model."""

    def __init__(self, half_width: float = 4.0, points: int = 64, far_field_terms: int = 3,
                 method: str = "hankel"):
        self.half_width = half_width
        self.points = points
        self.far_field_terms = far_field_terms
        self.method = method

    def _invert(self, g: DerivedSinogram) -> ScalarField:
        ff = FarFieldConfig(n_terms=self.far_field_terms) if self.far_field_terms > 0 else None
        return invert_fourier(g, self.grid_, method=self.method, far_field=ff)


class ChirpInverter(_Inverter):
    """Quadratic-phase inversion (n = 2 validated)."""

    def __init__(self, half_width: float = 4.0, points: int = 32, gamma_max: float = 15.0,
                 gamma_min: float | None = None, u_max: float | None = None, richardson: bool = False):
        self.half_width = half_width
        self.points = points
        self.gamma_max = gamma_max
        self.gamma_min = gamma_min
        self.u_max = u_max
        self.richardson = richardson

    def _invert(self, g: DerivedSinogram) -> ScalarField:
        s_max = g.t[-1] ** 2
        cd = compute_G(g, default_w_grid(s_max, self.gamma_max), richardson=self.richardson)
        u_max = self.u_max if self.u_max is not None else complete_radius(g)
        rec, self.report_ = invert_chirp(cd, self.grid_, trunc_box=(u_max, self.gamma_max),
                                         gamma_min=self.gamma_min, richardson=self.richardson,
                                         return_report=True)
        return rec

"""Ellipsoid geometry, sampling grids, even phantoms and local-data sets.

Every ellipsoid handled here is a solid ellipsoid of rotation whose foci lie
on a line parallel to the ``x_1`` axis inside the hyperplane ``x_n = 0``.  The
eccentricity is fixed by a single parameter ``lam > 1``; the focal half
distance ``t`` and the center ``u`` (a point of the hyperplane) vary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exceptions import ValidationError

__all__ = [
    "EccentricityModel",
    "Ellipsoid",
    "Grid",
    "ScalarField",
    "Gaussian",
    "BallBump",
    "Box",
    "PhantomSpec",
    "LocalDataSets",
    "make_model",
    "contains",
    "foci",
    "volume",
    "unit_ball_volume",
    "unit_sphere_area",
    "scaled_radius",
    "in_U",
    "in_V",
    "in_W",
    "sample_phantom",
    "symmetrize",
    "symmetric_grid",
]

SUPPORTED_DIMENSIONS = (2, 3)
# primitives are cut off where they fall below this fraction of their peak
SUPPORT_CUTOFF = 1e-14


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def unit_sphere_area(n: int) -> float:
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


@dataclass(frozen=True)
class EccentricityModel:
    """Fixed geometry of the ellipsoid family.

    Semi-axes of ``E_{u,t}`` are ``lam * t`` along ``x_1`` and ``nu * t`` in
    every other direction; ``c_lambda = lam * nu**(n-1)`` is the Jacobian of the
    map from the unit ball.
    """

    n: int
    lam: float
    nu: float
    c_lambda: float

    @property
    def axes(self) -> np.ndarray:
        """Diagonal of the scaling matrix ``A`` (length ``n``)."""
        return np.array([self.lam] + [self.nu] * (self.n - 1))

    @property
    def hyperplane_axes(self) -> np.ndarray:
        """Diagonal of ``A`` restricted to the hyperplane (length ``n-1``)."""
        return self.axes[:-1]

    def to_dict(self) -> dict:
        return {"n": self.n, "lambda": self.lam}

    @classmethod
    def from_dict(cls, d: dict) -> "EccentricityModel":
        return make_model(float(d["lambda"]), int(d["n"]))


def make_model(lam: float, n: int) -> EccentricityModel:
    if not isinstance(n, (int, np.integer)) or int(n) not in SUPPORTED_DIMENSIONS:
        raise ValidationError(f"dimension n={n!r} unsupported; expected one of {SUPPORTED_DIMENSIONS}")
    lam = float(lam)
    if not np.isfinite(lam) or lam <= 1.0:
        raise ValidationError(f"lambda must be > 1 (got {lam})")
    nu = math.sqrt(lam * lam - 1.0)
    n = int(n)
    return EccentricityModel(n=n, lam=lam, nu=nu, c_lambda=lam * nu ** (n - 1))


@dataclass(frozen=True)
class Ellipsoid:
    model: EccentricityModel
    center: tuple
    t: float

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.center))
        if len(c) != self.model.n - 1:
            raise ValidationError(f"center must have {self.model.n - 1} entries")
        object.__setattr__(self, "center", c)
        if not self.t > 0:
            raise ValidationError("t must be positive")


def scaled_radius(model: EccentricityModel, x, u) -> np.ndarray:
    """``rho(x, u) = |A^{-1}(x - (u, 0))|`` with broadcasting over leading axes."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    a = model.axes
    d = x[..., :-1] - u
    s = np.sum((d / a[:-1]) ** 2, axis=-1) + (x[..., -1] / a[-1]) ** 2
    return np.sqrt(s)


def contains(e: Ellipsoid, x) -> np.ndarray | bool:
    """Closed-set membership test; vectorised over leading axes of ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != e.model.n:
        raise ValidationError(f"points must have {e.model.n} coordinates")
    rho = scaled_radius(e.model, x, np.asarray(e.center))
    out = rho <= e.t * (1 + 1e-15)
    return bool(out) if out.ndim == 0 else out


def foci(e: Ellipsoid) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(e.center)
    c1 = np.concatenate([[u[0] + e.t], u[1:], [0.0]])
    c2 = np.concatenate([[u[0] - e.t], u[1:], [0.0]])
    return c1, c2


def volume(e: Ellipsoid) -> float:
    m = e.model
    return unit_ball_volume(m.n) * m.c_lambda * e.t ** m.n


# ---------------------------------------------------------------- grids


@dataclass(frozen=True)
class Grid:
    """Uniform node-centred grid: node ``j`` on axis ``i`` is ``origin[i] + j*spacing[i]``."""

    origin: tuple
    spacing: tuple
    dims: tuple

    def __post_init__(self):
        o = tuple(float(v) for v in np.atleast_1d(self.origin))
        s = tuple(float(v) for v in np.atleast_1d(self.spacing))
        d = tuple(int(v) for v in np.atleast_1d(self.dims))
        if not (len(o) == len(s) == len(d)):
            raise ValidationError("origin, spacing and dims must have equal length")
        if any(v <= 0 for v in s) or any(v < 1 for v in d):
            raise ValidationError("spacing must be positive and dims at least 1")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "spacing", s)
        object.__setattr__(self, "dims", d)

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    def axis(self, i: int) -> np.ndarray:
        return self.origin[i] + self.spacing[i] * np.arange(self.dims[i])

    def axes(self) -> list[np.ndarray]:
        return [self.axis(i) for i in range(self.ndim)]

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``dims + (ndim,)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def is_symmetric_last_axis(self, rtol: float = 1e-12) -> bool:
        """True when reflecting the last coordinate maps nodes onto nodes."""
        o, h, m = self.origin[-1], self.spacing[-1], self.dims[-1]
        return abs(2 * o + (m - 1) * h) <= rtol * max(1.0, abs(o), h * m)

    def to_dict(self) -> dict:
        return {"origin": list(self.origin), "spacing": list(self.spacing), "dims": list(self.dims)}

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return cls(tuple(d["origin"]), tuple(d["spacing"]), tuple(d["dims"]))


def symmetric_grid(n: int, half_width, points) -> Grid:
    """Grid centred on the origin with ``points`` nodes per axis spanning ``[-w, w)``.

    Using ``h = 2w/points`` and origin ``-w`` for an even count would break the
    reflection symmetry of the last axis, so the grid is built as
    ``x_j = h*(j - (points-1)/2)``; the node set is then closed under every
    sign flip.
    """
    hw = np.broadcast_to(np.asarray(half_width, float), (n,))
    pts = np.broadcast_to(np.asarray(points, int), (n,))
    h = 2 * hw / pts
    origin = -h * (pts - 1) / 2
    return Grid(tuple(origin), tuple(h), tuple(int(p) for p in pts))


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray
    model: EccentricityModel | None = None
    even: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.dims:
            raise ValidationError(f"values shape {v.shape} does not match grid dims {self.grid.dims}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dims(self):
        return self.grid.dims

    @property
    def origin(self):
        return self.grid.origin

    @property
    def spacing(self):
        return self.grid.spacing

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.values ** 2) * self.grid.cell_volume))

    def interpolator(self) -> Callable[[np.ndarray], np.ndarray]:
        """Multilinear interpolant, zero outside the grid."""
        from scipy.interpolate import RegularGridInterpolator

        rgi = RegularGridInterpolator(self.grid.axes(), self.values, bounds_error=False, fill_value=0.0)
        return lambda pts: rgi(np.asarray(pts, float).reshape(-1, self.grid.ndim)).reshape(np.shape(pts)[:-1])


def symmetrize(f: ScalarField) -> ScalarField:
    if not f.grid.is_symmetric_last_axis():
        raise ValidationError("grid is not symmetric about x_n = 0; cannot symmetrize")
    v = 0.5 * (f.values + f.values[..., ::-1])
    return ScalarField(f.grid, v, f.model, even=True)


# ---------------------------------------------------------------- phantoms


def _as_vec(v, length: int, name: str) -> np.ndarray:
    a = np.atleast_1d(np.asarray(v, dtype=float))
    if a.size == 1 and length > 1:
        a = np.full(length, float(a[0]))
    if a.shape != (length,):
        raise ValidationError(f"{name} must have {length} entries")
    return a


@dataclass(frozen=True)
class Gaussian:
    """``amplitude * exp(-sum(((x - c) / w)**2))`` with ``c = (center, 0)``.

    ``widths`` has ``n`` entries; ``x_n`` appears only squared, so the
    primitive is even.
    """

    center: tuple
    widths: tuple
    amplitude: float = 1.0

    kind = "gaussian"

    @property
    def n(self) -> int:
        return len(self.center) + 1

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        c = np.append(self.center, 0.0)
        w = np.asarray(self.widths, float)
        return self.amplitude * np.exp(-np.sum(((x - c) / w) ** 2, axis=-1))

    def full_center(self) -> np.ndarray:
        return np.append(np.asarray(self.center, float), 0.0)

    def support_radius(self) -> float:
        # exp(-s^2) < SUPPORT_CUTOFF beyond s = sqrt(ln(1/cutoff))
        return math.sqrt(math.log(1 / SUPPORT_CUTOFF)) * max(self.widths)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        r = math.sqrt(math.log(1 / SUPPORT_CUTOFF)) * np.asarray(self.widths, float)
        c = self.full_center()
        return c - r, c + r

    def to_dict(self) -> dict:
        return {"kind": self.kind, "center": list(self.center), "widths": list(self.widths),
                "amplitude": self.amplitude}


@dataclass(frozen=True)
class BallBump:
    """``amplitude * (1 - |x - c|^2 / R^2)^order`` inside the ball, zero outside.

    The bump is ``C^{order-1}``; ``order`` is the smoothness parameter.
    """

    center: tuple
    radius: float
    order: int = 4
    amplitude: float = 1.0

    kind = "ball_bump"

    @property
    def n(self) -> int:
        return len(self.center) + 1

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        c = self.full_center()
        s = 1.0 - np.sum((x - c) ** 2, axis=-1) / self.radius ** 2
        return self.amplitude * np.where(s > 0, np.clip(s, 0, None) ** self.order, 0.0)

    def full_center(self) -> np.ndarray:
        return np.append(np.asarray(self.center, float), 0.0)

    def support_radius(self) -> float:
        return float(self.radius)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        c = self.full_center()
        return c - self.radius, c + self.radius

    def to_dict(self) -> dict:
        return {"kind": self.kind, "center": list(self.center), "radius": self.radius,
                "order": self.order, "amplitude": self.amplitude}


@dataclass(frozen=True)
class Box:
    """Constant ``amplitude`` on ``[lo, hi]`` with ``lo_n = -hi_n`` (even by construction)."""

    lo: tuple
    hi: tuple
    amplitude: float = 1.0

    kind = "box"

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi):
            raise ValidationError("box corners must have equal length")
        if abs(lo[-1] + hi[-1]) > 1e-14 * max(1.0, abs(hi[-1])):
            raise ValidationError("box must be symmetric in x_n (lo_n = -hi_n)")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValidationError("box must have lo < hi on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n(self) -> int:
        return len(self.lo)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        inside = np.all((x >= np.asarray(self.lo)) & (x <= np.asarray(self.hi)), axis=-1)
        return self.amplitude * inside.astype(float)

    def full_center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    def support_radius(self) -> float:
        return 0.5 * float(np.linalg.norm(np.asarray(self.hi) - np.asarray(self.lo)))

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.lo), np.asarray(self.hi)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lo": list(self.lo), "hi": list(self.hi), "amplitude": self.amplitude}


_PRIMITIVES = {"gaussian": Gaussian, "ball_bump": BallBump, "box": Box}


@dataclass(frozen=True)
class PhantomSpec:
    """Sum of even primitives; callable on arrays of points with last axis ``n``."""

    primitives: tuple = field(default_factory=tuple)
    n: int = 2

    def __post_init__(self):
        prims = tuple(self.primitives)
        for p in prims:
            if p.n != self.n:
                raise ValidationError(f"primitive {p.kind} has dimension {p.n}, phantom has {self.n}")
        object.__setattr__(self, "primitives", prims)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        out = np.zeros(x.shape[:-1])
        for p in self.primitives:
            out = out + p(x)
        return out

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.primitives:
            z = np.zeros(self.n)
            return z, z
        los, his = zip(*(p.bounding_box() for p in self.primitives))
        return np.min(los, axis=0), np.max(his, axis=0)

    def sup_norm_bound(self) -> float:
        return float(sum(abs(p.amplitude) for p in self.primitives))

    def to_dict(self) -> dict:
        return {"n": self.n, "primitives": [p.to_dict() for p in self.primitives]}

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomSpec":
        prims = []
        for pd in d["primitives"]:
            pd = dict(pd)
            kind = pd.pop("kind")
            if kind not in _PRIMITIVES:
                raise ValidationError(f"unknown phantom primitive {kind!r}")
            for key in ("center", "widths", "lo", "hi"):
                if key in pd:
                    pd[key] = tuple(pd[key])
            prims.append(_PRIMITIVES[kind](**pd))
        return cls(tuple(prims), int(d["n"]))


def sample_phantom(spec: PhantomSpec | Callable, grid: Grid, model: EccentricityModel | None = None) -> ScalarField:
    vals = np.asarray(spec(grid.points()), float)
    even = isinstance(spec, PhantomSpec)
    return ScalarField(grid, vals, model, even=even)


# ---------------------------------------------------------------- local data sets


@dataclass(frozen=True)
class LocalDataSets:
    """Data patch ``U``, zero region ``V`` and data cone ``W`` of the local uniqueness result."""

    model: EccentricityModel
    u0: tuple
    epsilon: float
    T: float

    def __post_init__(self):
        u0 = tuple(float(v) for v in np.atleast_1d(self.u0))
        if len(u0) != self.model.n - 1:
            raise ValidationError(f"u0 must have {self.model.n - 1} entries")
        if not (self.epsilon > 0 and self.T > 0):
            raise ValidationError("epsilon and T must be positive")
        object.__setattr__(self, "u0", u0)


def _split_ut(sets: LocalDataSets, point) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(point, float)
    if p.shape[-1] != sets.model.n:
        raise ValidationError(f"(u, t) points must have {sets.model.n} coordinates")
    return p[..., :-1], p[..., -1]


def in_U(sets: LocalDataSets, point):
    u, t = _split_ut(sets, point)
    du = np.linalg.norm(u - np.asarray(sets.u0), axis=-1)
    out = (du < sets.epsilon) & (t >= 0) & (t < sets.T)
    return bool(out) if np.ndim(out) == 0 else out


def in_V(sets: LocalDataSets, x):
    x = np.asarray(x, float)
    if x.shape[-1] != sets.model.n:
        raise ValidationError(f"points must have {sets.model.n} coordinates")
    out = scaled_radius(sets.model, x, np.asarray(sets.u0)) < sets.T
    return bool(out) if np.ndim(out) == 0 else out


def in_W(sets: LocalDataSets, point):
    u, t = _split_ut(sets, point)
    du = np.linalg.norm(u - np.asarray(sets.u0), axis=-1)
    out = (t >= 0) & (t < sets.T) & (du + t < sets.T)
    return bool(out) if np.ndim(out) == 0 else out

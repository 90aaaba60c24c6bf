"""Gauss-Legendre helpers and direction rules on the unit circle and sphere.

Direction rules can be restricted to a spherical cap around an axis lying in
the hyperplane ``y_n = 0``.  Every rule produced here is mapped onto itself by
the reflection ``y_n -> -y_n``, which keeps the forward operator's
annihilation of odd functions exact up to round-off.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _gl(m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(m: int, a=-1.0, b=1.0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the ``m``-point rule on ``[a, b]`` (broadcast over array ends)."""
    x, w = _gl(int(m))
    a = np.asarray(a, float)[..., None]
    b = np.asarray(b, float)[..., None]
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def composite_gauss_legendre(m: int, a: float, b: float, panels: int) -> tuple[np.ndarray, np.ndarray]:
    edges = np.linspace(a, b, panels + 1)
    x, w = gauss_legendre(m, edges[:-1], edges[1:])
    return x.ravel(), w.ravel()


def cap_cosine(r, qnorm, radius):
    """Cosine of the half-angle of the cap ``{y : |r y - q| <= radius}``.

    Returns values <= -1 for the full sphere and > 1 for an empty cap.
    """
    r = np.asarray(r, float)
    qn = np.asarray(qnorm, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = (r * r + qn * qn - radius * radius) / (2.0 * r * qn)
    c = np.where(qn * r > 0, c, np.where(qn < radius, -2.0, 2.0))
    return c


def circle_arc_rule(theta0, cos_half, m: int):
    """Directions on ``S^1`` within the arc ``|theta - theta0| <= arccos(cos_half)``.

    Returns ``(y, w)`` with ``y`` of shape ``theta0.shape + (m, 2)``.
    """
    alpha = np.arccos(np.clip(cos_half, -1.0, 1.0))
    x, w = _gl(int(m))
    alpha = np.asarray(alpha)[..., None]
    th = np.asarray(theta0, float)[..., None] + alpha * x
    y = np.stack([np.cos(th), np.sin(th)], axis=-1)
    return y, alpha * w


def sphere_cap_rule(axis, cos_half, m_polar: int, m_azimuth: int):
    """Directions on ``S^2`` in the cap ``y . axis >= cos_half``.

    ``axis`` (shape ``(..., 3)``) must have zero third component.  The azimuth
    is measured from ``e_3`` so that the node set is symmetric under
    ``y_3 -> -y_3``.  Returns ``(y, w)`` with ``y`` shaped
    ``batch + (m_polar * m_azimuth, 3)``.
    """
    axis = np.asarray(axis, float)
    c0 = np.clip(np.asarray(cos_half, float), -1.0, 1.0)
    ct, wt = gauss_legendre(m_polar, c0, 1.0)  # batch + (mp,)
    st = np.sqrt(np.clip(1.0 - ct * ct, 0.0, None))
    phi = 2 * np.pi * (np.arange(m_azimuth) + 0.5) / m_azimuth
    e3 = np.array([0.0, 0.0, 1.0])
    eb = np.cross(axis, e3)  # in the hyperplane, orthogonal to axis
    a = axis[..., None, None, :]
    b = eb[..., None, None, :]
    ct_ = ct[..., :, None, None]
    st_ = st[..., :, None, None]
    cp = np.cos(phi)[:, None]
    sp = np.sin(phi)[:, None]
    y = ct_ * a + st_ * (cp * b + sp * e3)
    w = (wt[..., :, None] * (2 * np.pi / m_azimuth)) * np.ones(m_azimuth)
    shape = y.shape[:-3] + (m_polar * m_azimuth, 3)
    return y.reshape(shape), w.reshape(shape[:-1])


def full_sphere_rule(n: int, m: int):
    """Rule for the whole sphere ``S^{n-1}`` (n = 2: ``m`` uniform angles; n = 3: ``m`` x ``2m``)."""
    if n == 2:
        th = 2 * np.pi * (np.arange(m) + 0.5) / m
        return np.stack([np.cos(th), np.sin(th)], axis=-1), np.full(m, 2 * np.pi / m)
    y, w = sphere_cap_rule(np.array([1.0, 0.0, 0.0]), -1.0, m, 2 * m)
    return y, w

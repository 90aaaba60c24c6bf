"""Property-based checks; ``derandomize=True`` keeps runs reproducible."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from elliptical_radon import (Ellipsoid, Gaussian, LocalDataSets, PhantomSpec, ScalarField, in_V, io, make_model,
                              symmetric_grid, symmetrize, volume)
from elliptical_radon.analysis import field_norm
from elliptical_radon.cli import RunConfig
from elliptical_radon.transform import derived_exact, forward_points

SETTINGS = settings(max_examples=30, deadline=None, derandomize=True)
lams = st.floats(1.01, 4.0)
dims = st.sampled_from([2, 3])


@SETTINGS
@given(lams, dims, st.floats(0.05, 5.0))
def test_volume_homogeneous(lam, n, t):
    m = make_model(lam, n)
    c = (0.0,) * (n - 1)
    assert volume(Ellipsoid(m, c, 2 * t)) == np_approx(2 ** n * volume(Ellipsoid(m, c, t)))


def np_approx(x, rel=1e-12):
    import pytest

    return pytest.approx(x, rel=rel)


@SETTINGS
@given(st.floats(math.sqrt(2), 4.0), dims, st.integers(0, 2 ** 31))
def test_ellipsoids_from_cone_stay_in_V(lam, n, seed):
    m = make_model(lam, n)
    rng = np.random.default_rng(seed)
    sets = LocalDataSets(m, tuple(rng.uniform(-1, 1, n - 1)), 0.2, 1.5)
    # a point of W_T and points of its ellipsoid
    d = rng.standard_normal(n - 1)
    d /= np.linalg.norm(d)
    r = rng.uniform(0, 0.999)
    t = rng.uniform(0, 1 - r) * sets.T
    u = np.asarray(sets.u0) + r * sets.T * d
    y = rng.standard_normal((200, n))
    y *= (rng.uniform(0, 1, 200) ** (1 / n) / np.linalg.norm(y, axis=1))[:, None]
    x = np.concatenate([np.broadcast_to(u, (200, n - 1)), np.zeros((200, 1))], 1) + t * m.axes * y
    assert np.all(in_V(sets, x))


@SETTINGS
@given(lams, st.floats(-2, 2), st.floats(-3, 3), st.floats(0.2, 3))
def test_forward_translation(lam, c, s, t):
    m = make_model(lam, 2)
    f0 = PhantomSpec((Gaussian((c,), (0.7, 0.9)),), 2)
    f1 = PhantomSpec((Gaussian((c + s,), (0.7, 0.9)),), 2)
    a = forward_points(f0, m, np.array([[0.1]]), np.array([t]))
    b = forward_points(f1, m, np.array([[0.1 + s]]), np.array([t]))
    assert abs(a[0] - b[0]) <= 1e-12 * max(abs(a[0]), 1e-300)


@SETTINGS
@given(lams, st.floats(0.1, 3), st.floats(-5, 5), st.floats(-5, 5))
def test_derived_linear(lam, t, a, b):
    m = make_model(lam, 2)
    gf, gh = Gaussian((0.2,), (1.0, 0.6)), Gaussian((-0.4,), (0.5, 1.1))
    u, tt = np.array([[0.3]]), np.array([t])
    both = PhantomSpec((Gaussian(gf.center, gf.widths, a), Gaussian(gh.center, gh.widths, b)), 2)
    lhs = derived_exact(both, m, u, tt)[0]
    pf = derived_exact(PhantomSpec((gf,), 2), m, u, tt)[0]
    ph = derived_exact(PhantomSpec((gh,), 2), m, u, tt)[0]
    assert abs(lhs - (a * pf + b * ph)) <= 1e-13 * (abs(a) * abs(pf) + abs(b) * abs(ph) + 1e-300)


@SETTINGS
@given(st.integers(0, 2 ** 31), st.integers(2, 9))
def test_symmetrize_idempotent(seed, pts):
    g = symmetric_grid(2, 1.0, pts)
    f = ScalarField(g, np.random.default_rng(seed).standard_normal(g.dims))
    once = symmetrize(f)
    np.testing.assert_array_equal(symmetrize(once).values, once.values)
    np.testing.assert_array_equal(once.values, once.values[:, ::-1])


@SETTINGS
@given(st.integers(0, 2 ** 31), st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_field_norm_monotone_in_gamma(seed, g1, g2):
    g = symmetric_grid(2, 2.0, 16)
    f = ScalarField(g, np.random.default_rng(seed).standard_normal(g.dims))
    lo, hi = sorted((g1, g2))
    assert field_norm(f, lo) <= field_norm(f, hi) * (1 + 1e-12)


@settings(max_examples=15, deadline=None, derandomize=True)
@given(st.integers(0, 2 ** 31), st.booleans())
def test_pair_round_trip(tmp_path_factory, seed, cplx):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((3, 5))
    if cplx:
        v = v + 1j * rng.standard_normal((3, 5))
    base = tmp_path_factory.mktemp("pair") / "x"
    io.write_pair(base, v, {"k": seed})
    back, meta = io.read_pair(base)
    np.testing.assert_array_equal(back, v)
    assert meta["k"] == seed and meta["complex"] == cplx


@SETTINGS
@given(lams, st.sampled_from([2, 3]), st.floats(0.5, 20), st.floats(1e-3, 1.0), st.integers(0, 1000),
       st.one_of(st.none(), st.floats(0.01, 5)))
def test_config_round_trip(lam, n, t_max, du, seed, gmin):
    c = RunConfig()
    c.model.lam, c.model.n, c.sinogram.t_max, c.sinogram.du, c.seed = lam, n, t_max, du, seed
    c.chirp.gamma_min = gmin
    back = RunConfig.from_dict(__import__("json").loads(c.to_json()))
    assert back == c

import json
import math
import warnings

import numpy as np
import pytest

from elliptical_radon import (BallBump, Gaussian, LocalDataSets, PhantomSpec, ScalarField, ValidationError,
                              make_model, symmetric_grid)
from elliptical_radon import analysis as an
from elliptical_radon.transform import DerivedSinogram

SQRT2 = math.sqrt(2)


def _gauss(half=8.0, pts=96):
    g = symmetric_grid(2, half, pts)
    return ScalarField(g, np.exp(-0.5 * np.sum(g.points() ** 2, -1)))


def test_field_norm_gamma0_is_l2():
    f = _gauss()
    assert an.field_norm(f, 0.0) == pytest.approx(f.l2_norm(), rel=1e-8)


def test_field_norm_homogeneous():
    f = _gauss()
    f2 = ScalarField(f.grid, 2 * f.values)
    assert an.field_norm(f2, 1.3) == pytest.approx(2 * an.field_norm(f, 1.3), rel=1e-13)


def test_field_norm_gamma1_radial_oracle():
    # (2pi)^-2 int (1 + r^2) |2 pi e^{-r^2/2}|^2 2 pi r dr = 2 pi
    assert an.field_norm(_gauss(), 1.0) == pytest.approx(math.sqrt(2 * math.pi), rel=1e-6)


def test_field_norm_rejects_negative_gamma():
    with pytest.raises(ValidationError):
        an.field_norm(_gauss(), -1.0)


def test_data_norm_zero_and_homogeneous(gauss_data2):
    z = DerivedSinogram(gauss_data2.model, gauss_data2.u_grid, gauss_data2.t_grid, np.zeros_like(gauss_data2.values))
    assert an.data_norm(z, 0.5) == 0.0
    g3 = DerivedSinogram(gauss_data2.model, gauss_data2.u_grid, gauss_data2.t_grid, 3 * gauss_data2.values)
    assert an.data_norm(g3, 0.5) == pytest.approx(3 * an.data_norm(gauss_data2, 0.5), rel=1e-12)


def test_plancherel_constant(gauss_data2):
    spectral = an.data_norm(gauss_data2, 0.0)
    direct = an.data_l2_direct(gauss_data2)
    assert (spectral / direct) ** 2 == pytest.approx(an.PLANCHEREL_CONSTANT(2), rel=0.02)


def test_stability_zero_phantom(model2):
    rep = an.stability_ratio(PhantomSpec((), 2), model2, 0.0, t_max=2.0, du=0.25, dt=0.1)
    assert rep.field_norm == 0 and rep.data_norm == 0 and rep.zero_data


@pytest.mark.slow
def test_stability_ratio_shift_invariant(model2):
    a = an.stability_ratio(PhantomSpec((Gaussian((0.0,), (0.8, 0.8)),), 2), model2, 0.5)
    b = an.stability_ratio(PhantomSpec((Gaussian((1.0,), (0.8, 0.8)),), 2), model2, 0.5)
    assert b.ratio == pytest.approx(a.ratio, rel=0.01)
    assert json.loads(json.dumps(a.to_dict()))["gamma"] == 0.5


def test_stability_family_size():
    fam = an.stability_family()
    assert len(fam) == 15 and all(f.n == 2 for f in fam)


def test_seg_area_against_monte_carlo():
    rng = np.random.default_rng(0)
    z = rng.uniform(-1.5, 1.5, (400_000, 2))
    inside = np.hypot(z[:, 0], z[:, 1]) < 1.2
    for box in [(-0.3, 0.9, 0.1, 1.4), (-1.5, 1.5, -1.5, 1.5), (0.5, 1.4, -0.2, 0.3)]:
        x0, x1, y0, y1 = box
        mc = np.mean(inside & (z[:, 0] > x0) & (z[:, 0] < x1) & (z[:, 1] > y0) & (z[:, 1] < y1)) * 9
        assert an._seg_area(1.2, *box) == pytest.approx(mc, abs=0.01)
    assert an._seg_area(1.2, -2, 2, -2, 2) == pytest.approx(math.pi * 1.44, rel=1e-12)


@pytest.fixture(scope="module")
def sets():
    return LocalDataSets(make_model(SQRT2, 2), (0.0,), 0.2, 1.0)


def test_probe_single_cell(sets):
    rep = an.nullspace_probe(sets, 1)
    assert rep.unknowns == 1 and rep.singular_values[0] > 0


@pytest.mark.parametrize("r", [4, 8])
def test_probe_full_rank(sets, r):
    rep = an.nullspace_probe(sets, r)
    assert rep.rank == rep.unknowns == r * r // 2


def test_probe_reproducible(sets):
    a = an.nullspace_probe(sets, 8).singular_values
    b = an.nullspace_probe(sets, 8).singular_values
    assert np.max(np.abs(a - b)) <= 1e-8 * a[0]


def test_probe_range(sets):
    with pytest.raises(ValidationError):
        an.nullspace_probe(sets, 0)
    with pytest.raises(ValidationError):
        an.nullspace_probe(sets, 13)


def test_probe_report_outputs(sets, tmp_path):
    rep = an.nullspace_probe(sets, 4)
    d = json.loads(rep.to_json())
    assert d["unknowns"] == rep.unknowns and len(d["singular_values"]) == rep.unknowns
    rep.write_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "index,singular_value,relative" and len(lines) == rep.unknowns + 1


def test_containment(sets):
    assert an.containment_check(sets, 100_000, seed=0) == 0
    assert an.containment_check(LocalDataSets(make_model(3.0, 3), (0.5, 0.0), 0.2, 2.0), 20_000, seed=1) == 0


def test_containment_below_sqrt2():
    # n = 2: the only hyperplane axis is lam > 1, so rho(x, u0) <= |u - u0| / lam + t < T
    s = LocalDataSets(make_model(1.1, 2), (0.0,), 0.2, 1.0)
    assert an.containment_check(s, 20_000, seed=0) == 0
    # n = 3: offsets along x~ are scaled by 1 / nu > 1 when lam < sqrt 2, and ellipsoids leave V_T
    s3 = LocalDataSets(make_model(1.1, 3), (0.0, 0.0), 0.2, 1.0)
    assert an.containment_check(s3, 20_000, seed=0) > 0


def test_outside_support(sets):
    f = PhantomSpec((BallBump((3.0,), 1.0),), 2)
    assert an.outside_support_check(sets, f, 200, seed=0) <= 1e-10


def test_outside_support_rejects_overlap(sets):
    with pytest.raises(ValidationError):
        an.outside_support_check(sets, PhantomSpec((BallBump((0.5,), 1.0),), 2))

import json
import math

import numpy as np
import pytest

from elliptical_radon import DataIOError, Grid, ScalarField, ValidationError, io, make_model, symmetric_grid
from elliptical_radon.spectral import fourier_nd
from elliptical_radon.transform import DerivedSinogram, Sinogram, t_grid


@pytest.fixture
def model():
    return make_model(math.sqrt(2), 2)


def test_field_round_trip(tmp_path, model):
    g = symmetric_grid(2, 1.0, 6)
    f = ScalarField(g, np.arange(36.0).reshape(6, 6), model, even=True)
    io.write_field(tmp_path / "f", f, {"note": "x"})
    back = io.read_field(tmp_path / "f.bin")
    assert back.grid == g and back.model == model and back.even
    np.testing.assert_array_equal(back.values, f.values)
    raw = (tmp_path / "f.bin").read_bytes()
    assert raw == f.values.astype("<f8").tobytes()
    meta = json.loads((tmp_path / "f.json").read_text())
    assert meta["note"] == "x" and meta["shape"] == [6, 6] and meta["dtype"] == "<f8"


def test_sinogram_kinds(tmp_path, model):
    ug, tg = Grid((-1.0,), (0.5,), (5,)), t_grid(1.0, 4)
    v = np.random.default_rng(0).standard_normal((5, 4))
    io.write_sinogram(tmp_path / "s", Sinogram(model, ug, tg, v))
    io.write_sinogram(tmp_path / "d", DerivedSinogram(model, ug, tg, v))
    s, d = io.read_sinogram(tmp_path / "s"), io.read_sinogram(tmp_path / "d")
    assert type(s) is Sinogram and type(d) is DerivedSinogram
    np.testing.assert_array_equal(d.values, v)


def test_complex_interleaved(tmp_path, model):
    g = symmetric_grid(2, 1.0, 4)
    spec = fourier_nd(ScalarField(g, np.random.default_rng(1).standard_normal((4, 4))))
    io.write_spectrum(tmp_path / "k", spec, model)
    raw = np.frombuffer((tmp_path / "k.bin").read_bytes(), "<f8")
    np.testing.assert_array_equal(raw[0::2], spec.values.real.ravel())
    np.testing.assert_array_equal(raw[1::2], spec.values.imag.ravel())
    vals, meta = io.read_pair(tmp_path / "k")
    assert meta["complex"] and meta["order"] == "fft"
    np.testing.assert_array_equal(vals, spec.values)


def test_deterministic_bytes(tmp_path, model):
    f = ScalarField(symmetric_grid(2, 1.0, 4), np.ones((4, 4)), model)
    io.write_field(tmp_path / "a", f, {"b": 1, "a": 2})
    io.write_field(tmp_path / "b", f, {"a": 2, "b": 1})
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_errors(tmp_path, model):
    with pytest.raises(DataIOError):
        io.read_pair(tmp_path / "missing")
    f = ScalarField(symmetric_grid(2, 1.0, 4), np.ones((4, 4)), model)
    io.write_field(tmp_path / "f", f)
    (tmp_path / "f.bin").write_bytes(b"\0" * 8)
    with pytest.raises(DataIOError):
        io.read_field(tmp_path / "f")
    io.write_field(tmp_path / "f", f)
    with pytest.raises(ValidationError):
        io.read_sinogram(tmp_path / "f")
    (tmp_path / "f.json").write_text("{not json")
    with pytest.raises(DataIOError):
        io.read_field(tmp_path / "f")


def test_config_hash_order_independent():
    assert io.config_hash({"a": 1, "b": [1, 2]}) == io.config_hash({"b": [1, 2], "a": 1})
    assert io.config_hash({"a": 1}) != io.config_hash({"a": 2})

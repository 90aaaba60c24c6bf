import json
import subprocess
import sys

import numpy as np
import pytest

from elliptical_radon import io
from elliptical_radon.cli import RunConfig, main

SMALL = {
    "sinogram": {"t_max": 8.0, "du": 0.1, "dt": 0.04},
    "field_grid": {"half_width": 3.0, "points": 16},
    "phantom": {"n": 2, "primitives": [{"kind": "gaussian", "center": [0.0], "widths": [0.8, 0.8]}]},
}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(SMALL))
    return str(p)


def run(*argv):
    return main([str(a) for a in argv])


def test_config_round_trip():
    c = RunConfig.from_dict(SMALL)
    assert RunConfig.from_dict(json.loads(c.to_json())) == c
    assert RunConfig.from_dict(RunConfig().to_dict()) == RunConfig()


def test_default_pipeline_error_report(tmp_path):
    out = tmp_path / "run"
    assert run("forward", "-o", out / "g", "--derived-only") == 0
    assert run("invert", out / "g_derived", "-o", out / "rec", "--truth", "config") == 0
    rep = json.loads((out / "rec_report.json").read_text())
    assert rep["relative_l2"] <= 0.05


def test_outputs_byte_identical(tmp_path, cfg_path, monkeypatch):
    # same relative paths in both runs, since sidecars record the input path
    for name, threads in (("a", "1"), ("b", "3")):
        (tmp_path / name).mkdir()
        monkeypatch.chdir(tmp_path / name)
        monkeypatch.setenv("ELLIPTICAL_RADON_THREADS", threads)
        assert run("forward", "-c", cfg_path, "-o", "g") == 0
        assert run("invert", "g_derived", "-c", cfg_path, "-o", "r") == 0
    for f in ("g_volume.bin", "g_volume.json", "g_derived.bin", "g_derived.json", "r.bin", "r.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_sidecar_metadata(tmp_path, cfg_path):
    assert run("phantom", "-c", cfg_path, "-o", tmp_path / "p") == 0
    meta = json.loads((tmp_path / "p.json").read_text())
    for key in ("model", "grid", "config", "config_hash", "package_version", "version"):
        assert key in meta
    assert meta["config_hash"] == io.config_hash(meta["config"])
    assert RunConfig.from_dict(meta["config"]).to_dict() == meta["config"]


def test_lambda_mismatch_writes_nothing(tmp_path, cfg_path):
    assert run("forward", "-c", cfg_path, "-o", tmp_path / "g", "--derived-only") == 0
    before = sorted(p.name for p in tmp_path.iterdir())
    code = run("invert", tmp_path / "g_derived", "-c", cfg_path, "--lambda", "1.5", "-o", tmp_path / "bad",
               "--truth", "config", "--dump-spectrum", tmp_path / "spec")
    assert code == 2
    assert sorted(p.name for p in tmp_path.iterdir()) == before


def test_exit_codes(tmp_path, cfg_path):
    assert run("invert", tmp_path / "nope", "-o", tmp_path / "x") == 4
    bad = tmp_path / "bad.json"
    bad.write_text('{"model": {"lam": 0.5}}')
    assert run("phantom", "-c", bad, "-o", tmp_path / "x") == 2
    bad.write_text("{broken")
    assert run("phantom", "-c", bad, "-o", tmp_path / "x") == 2
    with pytest.raises(SystemExit) as e:
        run("invert", "x", "-o", "y", "--method", "magic")
    assert e.value.code == 2
    cfg = dict(SMALL, tolerances={"invert_rel_l2": 1e-12})
    strict = tmp_path / "strict.json"
    strict.write_text(json.dumps(cfg))
    assert run("forward", "-c", strict, "-o", tmp_path / "g", "--derived-only") == 0
    assert run("invert", tmp_path / "g_derived", "-c", strict, "-o", tmp_path / "r", "--truth", "config") == 3


def test_other_subcommands(tmp_path, cfg_path):
    d = tmp_path
    assert run("forward", "-c", cfg_path, "-o", d / "g") == 0
    assert run("derive", d / "g_volume", "-c", cfg_path, "-o", d / "gd") == 0
    a, b = io.read_sinogram(d / "gd"), io.read_sinogram(d / "g_derived")
    mid = slice(5, -5)
    assert np.abs(a.values[:, mid] - b.values[:, mid]).max() < 1e-2 * np.abs(b.values).max()
    assert run("derive", d / "g_derived", "-c", cfg_path, "-o", d / "x") == 2
    assert run("backproject", d / "g_derived", "-c", cfg_path, "-o", d / "bp") == 0
    assert run("invert", d / "g_volume", "-c", cfg_path, "-o", d / "x") == 2
    assert run("invert", d / "g_derived", "-c", cfg_path, "-o", d / "r", "--dump-spectrum", d / "k") == 0
    assert io.read_pair(d / "k")[1]["type"] == "spectral_field"
    assert run("export-csv", d / "r", "-o", d / "r.csv") == 0
    rows = (d / "r.csv").read_text().splitlines()
    assert rows[0] == "x1,x2,value" and len(rows) == 16 * 16 + 1
    assert run("export-csv", d / "k", "-o", d / "k.csv") == 0
    assert (d / "k.csv").read_text().splitlines()[0] == "i1,i2,re,im"
    assert run("probe-local", "-c", cfg_path, "--r", "4", "-o", d / "probe") == 0
    probe = json.loads((d / "probe.json").read_text())
    assert probe["rank"] == probe["unknowns"] == 8 and probe["containment_violations"] == 0
    assert (d / "probe.csv").exists()


def test_chirp_flags(tmp_path, cfg_path):
    d = tmp_path
    assert run("forward", "-c", cfg_path, "-o", d / "g", "--derived-only") == 0
    with pytest.warns(Warning):
        code = run("invert", d / "g_derived", "-c", cfg_path, "-o", d / "c", "--method", "chirp", "--gamma-min", "0.5",
                   "--trunc-box", "4,6", "--truth", "config", "--dump-spectrum", d / "chirp")
    assert code == 0
    meta = json.loads((d / "c.json").read_text())
    assert meta["config"]["chirp"]["gamma_min"] == 0.5
    assert meta["config"]["chirp"]["u_max"] == 4.0 and meta["config"]["chirp"]["gamma_max"] == 6.0
    assert meta["chirp_report"]["u_max"] == 4.0
    chirp = io.read_chirp(d / "chirp")
    assert chirp.values.dtype == complex
    assert json.loads((d / "c_report.json").read_text())["relative_l2"] < 0.2


def test_analyze(tmp_path, cfg_path):
    assert run("analyze", "-c", cfg_path, "--gamma", "0.5", "-o", tmp_path / "a.json") == 0
    rep = json.loads((tmp_path / "a.json").read_text())
    assert rep["kind"] == "stability" and rep["report"]["gamma"] == 0.5 and rep["report"]["ratio"] > 0


def test_selftest_subset(tmp_path, capsys):
    empty = tmp_path / "empty.json"
    empty.write_text("")
    assert run("selftest", "-c", empty, "--only", "1,11", "--report", tmp_path / "s.json") == 0
    out = capsys.readouterr().out
    assert "2/2 criteria passed" in out
    assert run("selftest", "--only", "99") == 2


@pytest.mark.slow
def test_selftest_empty_config_full(tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text("{}")
    proc = subprocess.run([sys.executable, "-m", "elliptical_radon", "selftest", "-c", str(empty)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert "12/12 criteria passed" in proc.stdout

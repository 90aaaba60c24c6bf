"""File pairs: raw little-endian float64 payload plus a JSON sidecar.

``base.bin`` holds the array in row-major order (last axis fastest); complex
arrays are stored interleaved ``(re, im)``.  ``base.json`` holds the grids,
the model and whatever extra metadata the caller supplies.  Sidecars are
written with sorted keys and no timestamps so repeated runs are
byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .core import EccentricityModel, Grid, ScalarField
from .exceptions import DataIOError, ValidationError
from .transform import DerivedSinogram, Sinogram

__all__ = [
    "split_base",
    "write_pair",
    "read_pair",
    "write_field",
    "read_field",
    "write_sinogram",
    "read_sinogram",
    "write_spectrum",
    "write_chirp",
    "read_chirp",
    "config_hash",
]

FORMAT = "elliptical-radon/1"


def split_base(path) -> Path:
    """``out/f``, ``out/f.bin`` and ``out/f.json`` all name the pair ``out/f``."""
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".bin", ".json") else p


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]


def write_pair(path, values: np.ndarray, meta: dict) -> Path:
    base = split_base(path)
    arr = np.asarray(values)
    is_complex = np.iscomplexobj(arr)
    payload = np.ascontiguousarray(arr.astype(np.complex128) if is_complex else arr.astype(np.float64))
    raw = payload.view(np.float64) if is_complex else payload
    meta = dict(meta)
    meta.update({"format": FORMAT, "version": __version__, "dtype": "<f8", "complex": bool(is_complex),
                 "shape": list(arr.shape)})
    try:
        base.parent.mkdir(parents=True, exist_ok=True)
        base.with_suffix(".bin").write_bytes(raw.astype("<f8").tobytes())
        base.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise DataIOError(f"cannot write {base}: {exc}") from exc
    return base


def read_pair(path) -> tuple[np.ndarray, dict]:
    base = split_base(path)
    try:
        meta = json.loads(base.with_suffix(".json").read_text())
        raw = base.with_suffix(".bin").read_bytes()
    except FileNotFoundError as exc:
        raise DataIOError(f"missing file: {exc.filename}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise DataIOError(f"cannot read {base}: {exc}") from exc
    if meta.get("format") != FORMAT:
        raise DataIOError(f"{base}.json is not an {FORMAT} sidecar")
    shape = tuple(meta["shape"])
    count = int(np.prod(shape)) * (2 if meta["complex"] else 1)
    data = np.frombuffer(raw, dtype="<f8")
    if data.size != count:
        raise DataIOError(f"{base}.bin holds {data.size} values, sidecar expects {count}")
    data = data.astype(np.float64)
    if meta["complex"]:
        data = data.view(np.complex128)
    return data.reshape(shape), meta


def _model(meta: dict) -> EccentricityModel | None:
    return EccentricityModel.from_dict(meta["model"]) if meta.get("model") else None


def write_field(path, f: ScalarField, extra: dict | None = None) -> Path:
    meta = {"type": "scalar_field", "grid": f.grid.to_dict(), "model": f.model.to_dict() if f.model else None,
            "even": bool(f.even)}
    meta.update(extra or {})
    return write_pair(path, f.values, meta)


def read_field(path) -> ScalarField:
    vals, meta = read_pair(path)
    if meta.get("type") != "scalar_field":
        raise ValidationError(f"{path} is a {meta.get('type')}, expected scalar_field")
    return ScalarField(Grid.from_dict(meta["grid"]), vals, _model(meta), bool(meta.get("even", False)))


def write_sinogram(path, s: Sinogram, extra: dict | None = None) -> Path:
    meta = {"type": "sinogram", "kind": s.kind, "u_grid": s.u_grid.to_dict(), "t_grid": s.t_grid.to_dict(),
            "model": s.model.to_dict()}
    meta.update(extra or {})
    return write_pair(path, s.values, meta)


def read_sinogram(path) -> Sinogram:
    vals, meta = read_pair(path)
    if meta.get("type") != "sinogram":
        raise ValidationError(f"{path} is a {meta.get('type')}, expected sinogram")
    cls = {"sinogram": Sinogram, "derived": DerivedSinogram}.get(meta.get("kind"))
    if cls is None:
        raise ValidationError(f"unknown sinogram kind {meta.get('kind')!r}")
    return cls(_model(meta), Grid.from_dict(meta["u_grid"]), Grid.from_dict(meta["t_grid"]), vals)


def write_spectrum(path, spec, model: EccentricityModel | None = None, extra: dict | None = None) -> Path:
    """A :class:`~elliptical_radon.spectral.SpectralField`; values stay in FFT order."""
    meta = {"type": "spectral_field", "grid": spec.grid.to_dict(), "order": "fft",
            "model": model.to_dict() if model else None}
    meta.update(extra or {})
    return write_pair(path, spec.values, meta)


def write_chirp(path, chirp, extra: dict | None = None) -> Path:
    meta = {"type": "chirp", "u_grid": chirp.u_grid.to_dict(), "model": chirp.model.to_dict(),
            "w": [float(v) for v in chirp.w], "jump": [float(v) for v in np.ravel(chirp.jump)],
            "s_max": chirp.s_max, "sigma": chirp.sigma, "richardson": chirp.richardson}
    meta.update(extra or {})
    return write_pair(path, chirp.values, meta)


def read_chirp(path):
    from .chirp import ChirpData

    vals, meta = read_pair(path)
    if meta.get("type") != "chirp":
        raise ValidationError(f"{path} is a {meta.get('type')}, expected chirp")
    ug = Grid.from_dict(meta["u_grid"])
    return ChirpData(_model(meta), ug, np.array(meta["w"]), vals, np.array(meta["jump"]).reshape(ug.dims),
                     float(meta["s_max"]), float(meta["richardson"]), float(meta["sigma"]))

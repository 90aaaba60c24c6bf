"""Command-line pipeline: ``elliptical-radon <subcommand> [options]``.

Every subcommand reads an optional JSON config (``--config``), applies flag
overrides, and writes file pairs whose sidecars carry the model, grids,
package version, the full resolved config and its hash.  Exit codes: 0 ok,
2 validation, 3 numerical tolerance, 4 I/O.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, analysis, io, selftest
from ._parallel import THREADS_ENV
from .chirp import compute_G, complete_radius, default_w_grid, invert_chirp
from .core import Gaussian, Grid, LocalDataSets, PhantomSpec, make_model, sample_phantom, symmetric_grid
from .exceptions import DataIOError, EllipticalRadonError, NumericalToleranceError, ValidationError
from .spectral import FarFieldConfig, invert_fourier
from .transform import DerivedSinogram, backproject, derive_numeric, derived_sinogram, t_grid, volume_from_surface

__all__ = ["RunConfig", "main", "build_parser"]


# ------------------------------------------------------------ configuration


@dataclass
class ModelConfig:
    lam: float = math.sqrt(2)
    n: int = 2


@dataclass
class FieldGridConfig:
    half_width: float = 4.0
    points: int = 64


@dataclass
class SinogramConfig:
    t_max: float = 12.0
    du: float = 0.0625
    dt: float = 0.02
    angular_order: int | None = None
    volume_nodes: int = 4


@dataclass
class FourierConfig:
    method: str = "hankel"
    far_field_terms: int = 3
    pad: int = 2


@dataclass
class ChirpConfig:
    gamma_max: float = 15.0
    gamma_min: float | None = None
    u_max: float | None = None
    richardson: bool = False
    tol: float = 0.05


@dataclass
class AnalysisConfig:
    gamma: float = 0.0
    sweep: bool = False
    t_max: float = 10.0
    du: float = 0.05
    dt: float = 0.02


@dataclass
class ProbeConfig:
    u0: list = field(default_factory=lambda: [0.0])
    epsilon: float = 0.2
    T: float = 1.0
    r: int = 8
    data_resolution: list = field(default_factory=lambda: [16, 32])
    containment_samples: int = 100_000


@dataclass
class ToleranceConfig:
    invert_rel_l2: float | None = None


_SECTIONS = {
    "model": ModelConfig,
    "field_grid": FieldGridConfig,
    "sinogram": SinogramConfig,
    "fourier": FourierConfig,
    "chirp": ChirpConfig,
    "analysis": AnalysisConfig,
    "probe": ProbeConfig,
    "tolerances": ToleranceConfig,
}


@dataclass
class RunConfig:
    """Everything a run depends on.  ``phantom`` is a phantom dict; ``None`` means a unit Gaussian."""

    model: ModelConfig = field(default_factory=ModelConfig)
    field_grid: FieldGridConfig = field(default_factory=FieldGridConfig)
    sinogram: SinogramConfig = field(default_factory=SinogramConfig)
    fourier: FourierConfig = field(default_factory=FourierConfig)
    chirp: ChirpConfig = field(default_factory=ChirpConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    phantom: dict | None = None
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ValidationError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown config keys: {sorted(extra)}")
        kw = {}
        for name, sub in _SECTIONS.items():
            if name in d:
                kw[name] = _section(sub, d[name], name)
        if "phantom" in d:
            kw["phantom"] = d["phantom"]
        if "seed" in d:
            kw["seed"] = int(d["seed"])
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        make_model(self.model.lam, self.model.n)
        if self.field_grid.points < 2 or self.field_grid.half_width <= 0:
            raise ValidationError("field_grid needs points >= 2 and half_width > 0")
        s = self.sinogram
        if not (s.t_max > 0 and s.du > 0 and s.dt > 0):
            raise ValidationError("sinogram t_max, du and dt must be positive")
        if self.fourier.method not in ("hankel", "backproject"):
            raise ValidationError(f"unknown Fourier method {self.fourier.method!r}")
        if self.phantom is not None and PhantomSpec.from_dict(self.phantom).n != self.model.n:
            raise ValidationError("phantom dimension differs from model n")

    def phantom_spec(self) -> PhantomSpec:
        if self.phantom is None:
            n = self.model.n
            return PhantomSpec((Gaussian((0.0,) * (n - 1), (1.0,) * n),), n)
        return PhantomSpec.from_dict(self.phantom)

    def model_obj(self):
        return make_model(self.model.lam, self.model.n)

    def field_grid_obj(self) -> Grid:
        return symmetric_grid(self.model.n, self.field_grid.half_width, self.field_grid.points)


def _section(cls, d, name):
    if not isinstance(d, dict):
        raise ValidationError(f"config section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    extra = set(d) - known
    if extra:
        raise ValidationError(f"unknown keys in {name!r}: {sorted(extra)}")
    return cls(**d)


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataIOError(f"cannot read config {path}: {exc}") from exc
    if not text.strip():
        return RunConfig()
    try:
        return RunConfig.from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    except TypeError as exc:
        raise ValidationError(f"bad config value: {exc}") from exc


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    o = {
        ("model", "lam"): getattr(args, "lam", None),
        ("model", "n"): getattr(args, "n", None),
        ("field_grid", "half_width"): getattr(args, "half_width", None),
        ("field_grid", "points"): getattr(args, "points", None),
        ("sinogram", "t_max"): getattr(args, "t_max", None),
        ("sinogram", "du"): getattr(args, "du", None),
        ("sinogram", "dt"): getattr(args, "dt", None),
        ("chirp", "gamma_min"): getattr(args, "gamma_min", None),
        ("analysis", "gamma"): getattr(args, "gamma", None),
        ("probe", "r"): getattr(args, "r", None),
    }
    for (sec, key), val in o.items():
        if val is not None:
            setattr(getattr(cfg, sec), key, val)
    if getattr(args, "trunc_box", None) is not None:
        cfg.chirp.u_max, cfg.chirp.gamma_max = args.trunc_box
    if getattr(args, "richardson", False):
        cfg.chirp.richardson = True
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "sweep", False):
        cfg.analysis.sweep = True
    cfg.validate()
    return cfg


# ------------------------------------------------------------ helpers


def _run_meta(cfg: RunConfig, command: str, **extra) -> dict:
    d = cfg.to_dict()
    meta = {"command": command, "config": d, "config_hash": io.config_hash(d), "package_version": __version__}
    meta.update(extra)
    return meta


def _check_model(cfg: RunConfig, model, what: str) -> None:
    if model is None:
        return
    if model.n != cfg.model.n or not math.isclose(model.lam, cfg.model.lam, rel_tol=1e-12, abs_tol=0.0):
        raise ValidationError(
            f"{what} has lambda={model.lam!r}, n={model.n}; config has lambda={cfg.model.lam!r}, n={cfg.model.n}")


def _write_json(path, obj) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc


def _data_u_grid(f: PhantomSpec, model, t_max: float, du: float) -> Grid:
    lo, hi = f.bounding_box()
    half = [max(abs(lo[i]), abs(hi[i])) + model.hyperplane_axes[i] * t_max for i in range(model.n - 1)]
    pts = [2 * int(math.ceil(h / du)) + 1 for h in half]
    return Grid(tuple(-du * (p - 1) / 2 for p in pts), (du,) * (model.n - 1), tuple(pts))


def _derived_input(path, cfg: RunConfig) -> DerivedSinogram:
    s = io.read_sinogram(path)
    _check_model(cfg, s.model, str(path))
    if not isinstance(s, DerivedSinogram):
        raise ValidationError(f"{path} holds volume data; run 'derive' first")
    return s


# ------------------------------------------------------------ commands


def cmd_phantom(cfg: RunConfig, args) -> int:
    f = cfg.phantom_spec()
    field_ = sample_phantom(f, cfg.field_grid_obj(), cfg.model_obj())
    io.write_field(args.output, field_, _run_meta(cfg, "phantom", phantom=f.to_dict()))
    return 0


def cmd_forward(cfg: RunConfig, args) -> int:
    f = cfg.phantom_spec()
    m = cfg.model_obj()
    sc = cfg.sinogram
    ug = _data_u_grid(f, m, sc.t_max, sc.du)
    tg = t_grid(sc.t_max, int(round(sc.t_max / sc.dt)))
    g = derived_sinogram(f, m, ug, tg, sc.angular_order)
    meta = _run_meta(cfg, "forward", phantom=f.to_dict())
    base = io.split_base(args.output)
    if not args.derived_only:
        vol = volume_from_surface(f, m, ug, tg, sc.volume_nodes, sc.angular_order)
        io.write_sinogram(base.with_name(base.name + "_volume"), vol, meta)
    io.write_sinogram(base.with_name(base.name + "_derived"), g, meta)
    return 0


def cmd_derive(cfg: RunConfig, args) -> int:
    s = io.read_sinogram(args.input)
    _check_model(cfg, s.model, args.input)
    if isinstance(s, DerivedSinogram):
        raise ValidationError(f"{args.input} already holds derived data")
    io.write_sinogram(args.output, derive_numeric(s), _run_meta(cfg, "derive", source=str(args.input)))
    return 0


def cmd_backproject(cfg: RunConfig, args) -> int:
    g = _derived_input(args.input, cfg)
    b = backproject(g, cfg.field_grid_obj(), check_tol=None)
    io.write_field(args.output, b, _run_meta(cfg, "backproject", source=str(args.input)))
    return 0


def _truth_field(args, cfg: RunConfig, grid: Grid):
    if args.truth is None:
        return None
    if args.truth == "config":
        return sample_phantom(cfg.phantom_spec(), grid).values
    t = io.read_field(args.truth)
    if t.grid != grid:
        raise ValidationError("truth field grid differs from the reconstruction grid")
    return t.values


def cmd_invert(cfg: RunConfig, args) -> int:
    g = _derived_input(args.input, cfg)
    grid = cfg.field_grid_obj()
    truth = _truth_field(args, cfg, grid)
    extra = {"method": args.method, "source": str(args.input)}
    dump = None
    if args.method == "fourier":
        fc = cfg.fourier
        ff = FarFieldConfig(n_terms=fc.far_field_terms) if fc.far_field_terms > 0 else None
        rec, spec = invert_fourier(g, grid, method=fc.method, far_field=ff, pad=fc.pad, return_spectrum=True)
        if args.dump_spectrum:
            dump = lambda meta: io.write_spectrum(args.dump_spectrum, spec, g.model, meta)
    else:
        cc = cfg.chirp
        cd = compute_G(g, default_w_grid(g.t[-1] ** 2, cc.gamma_max), richardson=cc.richardson)
        u_max = cc.u_max if cc.u_max is not None else complete_radius(g)
        rec, rep = invert_chirp(cd, grid, trunc_box=(u_max, cc.gamma_max), gamma_min=cc.gamma_min,
                                richardson=cc.richardson, tol=cc.tol, return_report=True)
        extra["chirp_report"] = asdict(rep)
        if args.dump_spectrum:
            dump = lambda meta: io.write_chirp(args.dump_spectrum, cd, meta)
    report = {"method": args.method, "grid": grid.to_dict(), "model": g.model.to_dict()}
    if truth is not None:
        err = float(np.linalg.norm(rec.values - truth) / np.linalg.norm(truth))
        report["relative_l2"] = err
        extra["relative_l2"] = err
    meta = _run_meta(cfg, "invert", **extra)
    io.write_field(args.output, rec, meta)
    if dump is not None:
        dump(meta)
    if truth is not None:
        report.update({"config_hash": meta["config_hash"], "package_version": __version__})
        base = io.split_base(args.output)
        _write_json(base.with_name(base.name + "_report.json"), report)
        limit = cfg.tolerances.invert_rel_l2
        if limit is not None and report["relative_l2"] > limit:
            raise NumericalToleranceError(f"relative L2 error {report['relative_l2']:.4g} exceeds {limit}")
    return 0


def cmd_analyze(cfg: RunConfig, args) -> int:
    m = cfg.model_obj()
    ac = cfg.analysis
    kw = {"t_max": ac.t_max, "du": ac.du, "dt": ac.dt}
    if ac.sweep:
        reps = analysis.stability_sweep(m, ac.gamma, **kw)
        ratios = [r.ratio for r in reps]
        body = {"kind": "stability_sweep", "reports": [r.to_dict() for r in reps],
                "min_ratio": min(ratios), "max_ratio": max(ratios), "band": max(ratios) / min(ratios)}
    else:
        f = cfg.phantom_spec()
        body = {"kind": "stability", "phantom": f.to_dict(), "report": analysis.stability_ratio(f, m, ac.gamma, **kw).to_dict()}
    body.update(_run_meta(cfg, "analyze"))
    _write_json(args.output, body)
    return 0


def cmd_probe_local(cfg: RunConfig, args) -> int:
    pc = cfg.probe
    sets = LocalDataSets(cfg.model_obj(), tuple(pc.u0), pc.epsilon, pc.T)
    rep = analysis.nullspace_probe(sets, pc.r, tuple(pc.data_resolution))
    body = rep.to_dict()
    body["containment_violations"] = analysis.containment_check(sets, pc.containment_samples, cfg.seed)
    body.update(_run_meta(cfg, "probe-local"))
    base = io.split_base(args.output)
    _write_json(base.with_suffix(".json"), body)
    try:
        rep.write_csv(base.with_suffix(".csv"))
    except OSError as exc:
        raise DataIOError(f"cannot write {base}.csv: {exc}") from exc
    return 0


def cmd_selftest(cfg: RunConfig, args) -> int:
    which = sorted({int(x) for x in args.only.split(",")}) if args.only else None
    if which and not set(which) <= set(selftest.CRITERIA):
        raise ValidationError("criteria are numbered 1..12")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        results = selftest.run_all(which, seed=cfg.seed, echo=print)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    if args.report:
        _write_json(args.report, {"results": [r.to_dict() for r in results], **_run_meta(cfg, "selftest")})
    return 0 if passed == len(results) else NumericalToleranceError.exit_code


def cmd_export_csv(cfg: RunConfig, args) -> int:
    vals, meta = io.read_pair(args.input)
    kind = meta.get("type")
    if kind == "scalar_field" or kind == "spectral_field":
        g = Grid.from_dict(meta["grid"])
        coords = g.points().reshape(-1, g.ndim)
        names = [f"x{i + 1}" for i in range(g.ndim)] if kind == "scalar_field" else [f"i{i + 1}" for i in range(g.ndim)]
        if kind == "spectral_field":
            coords = np.stack(np.meshgrid(*[np.arange(d) for d in g.dims], indexing="ij"), -1).reshape(-1, g.ndim)
    elif kind in ("sinogram", "chirp"):
        ug = Grid.from_dict(meta["u_grid"])
        second = Grid.from_dict(meta["t_grid"]).axis(0) if kind == "sinogram" else np.array(meta["w"])
        up = ug.points().reshape(-1, ug.ndim)
        coords = np.concatenate([np.repeat(up, len(second), 0), np.tile(second, len(up))[:, None]], axis=1)
        names = [f"u{i + 1}" for i in range(ug.ndim)] + (["t"] if kind == "sinogram" else ["w"])
    else:
        raise ValidationError(f"cannot export file type {kind!r}")
    flat = vals.reshape(-1)
    cols = names + (["re", "im"] if np.iscomplexobj(flat) else ["value"])
    try:
        with open(args.output, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for c, v in zip(coords, flat):
                row = [repr(float(x)) for x in c]
                row += [repr(float(v.real)), repr(float(v.imag))] if np.iscomplexobj(flat) else [repr(float(v))]
                w.writerow(row)
    except OSError as exc:
        raise DataIOError(f"cannot write {args.output}: {exc}") from exc
    return 0


# ------------------------------------------------------------ parser


def _box(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected U_MAX,GAMMA_MAX") from None
    return a, b


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="elliptical-radon", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="JSON run config (flags override it)")
    common.add_argument("--lambda", dest="lam", type=float, help="eccentricity parameter (> 1)")
    common.add_argument("--n", type=int, choices=(2, 3), help="dimension")
    common.add_argument("--seed", type=int, help="seed for sampled checks (default 0)")
    common.add_argument("--threads", type=int, help=f"worker threads (sets {THREADS_ENV})")
    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--half-width", type=float)
    grid.add_argument("--points", type=int)
    sino = argparse.ArgumentParser(add_help=False)
    sino.add_argument("--t-max", type=float)
    sino.add_argument("--du", type=float)
    sino.add_argument("--dt", type=float)

    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("phantom", parents=[common, grid], help="sample the config phantom")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_phantom)

    s = sub.add_parser("forward", parents=[common, sino], help="simulate volume and derived data")
    s.add_argument("-o", "--output", required=True, help="base; writes <base>_volume and <base>_derived")
    s.add_argument("--derived-only", action="store_true")
    s.set_defaults(func=cmd_forward)

    s = sub.add_parser("derive", parents=[common], help="numerical t^{1-n} d/dt of volume data")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_derive)

    s = sub.add_parser("backproject", parents=[common, grid], help="back-project derived data")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_backproject)

    s = sub.add_parser("invert", parents=[common, grid], help="reconstruct from derived data")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--method", choices=("fourier", "chirp"), default="fourier")
    s.add_argument("--truth", help="field file, or 'config' to sample the config phantom")
    s.add_argument("--dump-spectrum", metavar="PATH", help="also write the spectrum (Fourier) or chirp data")
    s.add_argument("--gamma-min", type=float, help="chirp: inner gamma cut-off")
    s.add_argument("--trunc-box", type=_box, metavar="U_MAX,GAMMA_MAX", help="chirp truncation box")
    s.add_argument("--richardson", action="store_true", help="chirp: step-halving error checks")
    s.set_defaults(func=cmd_invert)

    s = sub.add_parser("analyze", parents=[common], help="Sobolev stability report")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--gamma", type=float)
    s.add_argument("--sweep", action="store_true", help="run the 15-phantom family")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("probe-local", parents=[common], help="local-data SVD probe")
    s.add_argument("-o", "--output", required=True, help="base; writes <base>.json and <base>.csv")
    s.add_argument("--r", type=int, help="cells per axis")
    s.set_defaults(func=cmd_probe_local)

    s = sub.add_parser("selftest", parents=[common], help="run the acceptance criteria")
    s.add_argument("--only", help="comma-separated criterion numbers")
    s.add_argument("--report", help="write a JSON summary here")
    s.set_defaults(func=cmd_selftest)

    s = sub.add_parser("export-csv", parents=[common], help="dump any file pair as CSV")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_export_csv)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return ValidationError.exit_code
        os.environ[THREADS_ENV] = str(args.threads)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return args.func(cfg, args)
    except EllipticalRadonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataIOError.exit_code


if __name__ == "__main__":
    sys.exit(main())

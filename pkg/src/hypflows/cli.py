"""Declarative experiment runner.

Usage::

    python3 -m hypflows {geometry,simulate,verify,audit} --config run.json [--out DIR] [--seed N] [--quiet]

A run config is one JSON document (see ``RunConfig``).  Outputs are
``<prefix>_series.csv`` (simulate, audit) and ``<prefix>_summary.json``.
Exit status: 0 success, 1 usage or config error, 2 invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from . import functionals as fn
from .expr import ExpressionError
from .flow import (COLUMNS, ConeViolation, FlowConfig, FlowError, ICFLaw, InvariantViolation, MCFLaw,
                   default_icf_weight, run_flow)
from .geometry import GeometryError, GraphHypersurface, geometry_identity_residuals, graph_geometry, sphere_closed_forms
from .profiles import ProfileError, RadialProfile, WeightProfile, profile_from_fhat, weight_from_ode
from .sphere import GridError, GridMode, build_grid

COMMANDS = ("geometry", "simulate", "verify", "audit")


class ConfigError(ValueError):
    pass


class OutputError(OSError):
    pass


@dataclass
class GridSpec:
    mode: str = "axisymmetric"
    n: int = 2
    resolution: object = 32


@dataclass
class ShapeSpec:
    """r = radius + sum a cos(j theta) sin(theta)^m cos(m psi); entries [j, a] or [j, m, a].

    The sin(theta)^m factor keeps non-axisymmetric modes smooth at the poles.

    With ``relative`` the perturbation multiplies the radius instead.
    """

    radius: float = 1.0
    harmonics: list = field(default_factory=list)
    relative: bool = False


@dataclass
class WeightSpec:
    """kind: const (value), radial (expr in r), f or g (expr in lp), ode."""

    kind: str = "const"
    value: float = 1.0
    expr: Optional[str] = None
    boundary: Optional[list] = None
    s_domain: Optional[list] = None


@dataclass
class LawSpec:
    kind: str = "mcf"
    k: int = 2
    fhat: Optional[str] = "r-1"
    fbar: Optional[str] = None
    domain: list = field(default_factory=lambda: [0.5, 3.0])
    normalization: float = 1.0
    weight: Optional[WeightSpec] = None


@dataclass
class RunSpec:
    t_max: float = 20.0
    grad_tol: float = 1e-8
    c_cfl: float = 0.2
    record_every: int = 1
    dt_max: float = 0.05


@dataclass
class VerifySpec:
    k: int = 1
    weight: WeightSpec = field(default_factory=WeightSpec)
    f_const: object = None
    samples: int = 0
    amplitude: float = 0.1
    modes: int = 3


@dataclass
class OutputSpec:
    dir: str = "out"
    prefix: str = "run"


@dataclass
class RunConfig:
    command: str = "simulate"
    grid: GridSpec = field(default_factory=GridSpec)
    shape: ShapeSpec = field(default_factory=ShapeSpec)
    law: LawSpec = field(default_factory=LawSpec)
    run: RunSpec = field(default_factory=RunSpec)
    verify: VerifySpec = field(default_factory=VerifySpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    seed: int = 0
    series_csv: Optional[str] = None

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        cfg = _build(cls, data, "config")
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def validate(self):
        def need(cond, where, msg):
            if not cond:
                raise ConfigError(f"{where}: {msg}")

        need(self.command in COMMANDS, "command", f"must be one of {', '.join(COMMANDS)}")
        g = self.grid
        need(g.mode in [m.value for m in GridMode], "grid.mode", "must be radial, axisymmetric or full2d")
        need(isinstance(g.n, int) and 2 <= g.n <= 6, "grid.n", "must be an integer in 2..6")
        res = g.resolution
        ok = isinstance(res, int) or (isinstance(res, list) and len(res) == 2 and all(isinstance(x, int) for x in res))
        need(ok, "grid.resolution", "must be an integer or [N_theta, N_psi]")
        s = self.shape
        need(_num(s.radius) and 0 < s.radius < 25, "shape.radius", "must lie in (0, 25)")
        need(not (g.mode == "radial" and s.harmonics), "shape.harmonics", "radial grids carry spheres only")
        for i, h in enumerate(s.harmonics):
            need(isinstance(h, list) and len(h) in (2, 3) and all(_num(x) for x in h),
                 f"shape.harmonics[{i}]", "must be [j, a] or [j, m, a]")
            need(len(h) == 2 or h[1] == 0 or g.mode == "full2d", f"shape.harmonics[{i}]",
                 "psi modes need a full2d grid")
        law = self.law
        need(law.kind in ("mcf", "icf"), "law.kind", "must be mcf or icf")
        if law.kind == "icf":
            need(isinstance(law.k, int) and 2 <= law.k <= g.n, "law.k", f"must be an integer in 2..n={g.n}")
        else:
            need(law.fhat is not None or law.fbar is not None, "law", "mcf needs fhat or fbar")
            need(len(law.domain) == 2 and 0 < law.domain[0] < law.domain[1], "law.domain", "must be [lo, hi] with 0 < lo < hi")
        r = self.run
        need(_num(r.t_max) and 0 < r.t_max <= 1e4, "run.t_max", "must lie in (0, 1e4]")
        need(_num(r.grad_tol) and 0 < r.grad_tol < 1, "run.grad_tol", "must lie in (0, 1)")
        need(_num(r.c_cfl) and 0 < r.c_cfl <= 1, "run.c_cfl", "must lie in (0, 1]")
        need(isinstance(r.record_every, int) and r.record_every >= 1, "run.record_every", "must be an integer >= 1")
        need(_num(r.dt_max) and r.dt_max > 0, "run.dt_max", "must be positive")
        v = self.verify
        need(isinstance(v.k, int) and v.k >= 1, "verify.k", "must be an integer >= 1")
        need(isinstance(v.samples, int) and 0 <= v.samples <= 100000, "verify.samples", "must lie in 0..100000")
        need(_num(v.amplitude) and 0 <= v.amplitude < 0.5, "verify.amplitude", "must lie in [0, 0.5)")
        need(isinstance(v.modes, int) and 1 <= v.modes <= 16, "verify.modes", "must lie in 1..16")
        need(v.f_const is None or v.f_const == "sphere" or (_num(v.f_const) and v.f_const > 0),
             "verify.f_const", 'must be null, "sphere" or a positive number')
        for where, w in (("verify.weight", v.weight), ("law.weight", law.weight)):
            if w is not None:
                need(w.kind in ("const", "radial", "f", "g", "ode"), f"{where}.kind",
                     "must be const, radial, f, g or ode")
        need(isinstance(self.seed, int) and self.seed >= 0, "seed", "must be a non-negative integer")


def _num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{where}: unknown field {key!r}")
    nested = {"grid": GridSpec, "shape": ShapeSpec, "law": LawSpec, "run": RunSpec,
              "verify": VerifySpec, "output": OutputSpec, "weight": WeightSpec}
    kwargs = {}
    for key, val in data.items():
        sub = nested.get(key)
        if sub is not None and val is not None:
            val = _build(sub, val, f"{where}.{key}" if where != "config" else key)
        kwargs[key] = val
    return cls(**kwargs)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return RunConfig.from_json(text)


def make_grid(cfg: RunConfig):
    g = cfg.grid
    res = tuple(g.resolution) if isinstance(g.resolution, list) else g.resolution
    return build_grid(g.mode, g.n, res)


def make_surface(cfg: RunConfig, grid) -> GraphHypersurface:
    s = cfg.shape
    theta, psi = grid.node_theta(), grid.node_psi()
    pert = np.zeros(grid.size)
    for h in s.harmonics:
        if len(h) == 2:
            j, a = h
            pert = pert + a * np.cos(j * theta)
        else:
            j, m, a = h
            pert = pert + a * np.cos(j * theta) * np.sin(theta) ** m * np.cos(m * psi)
    r = s.radius * (1.0 + pert) if s.relative else s.radius + pert
    return GraphHypersurface(grid, r)


def make_weight(spec: WeightSpec, n: int, k: int):
    if spec.kind == "const":
        return float(spec.value)
    if spec.kind == "radial":
        return RadialProfile.from_expression(spec.expr, n)
    if spec.kind == "f":
        return WeightProfile.from_f_expression(spec.expr, n, k)
    if spec.kind == "g":
        return WeightProfile.from_g_expression(spec.expr, n, k)
    return weight_from_ode(k, n, spec.boundary, spec.s_domain)


def make_law(cfg: RunConfig):
    law, n = cfg.law, cfg.grid.n
    if law.kind == "mcf":
        if law.fhat is not None:
            return MCFLaw(profile_from_fhat(law.fhat, n, law.domain, law.normalization))
        return MCFLaw(RadialProfile.from_expression(law.fbar, n, tuple(law.domain)))
    weight = make_weight(law.weight, n, law.k) if law.weight is not None else None
    if weight is not None and not isinstance(weight, WeightProfile):
        raise ConfigError("law.weight: icf weights must be of kind f, g or ode")
    return ICFLaw(law.k, weight)


# ---------------------------------------------------------------- outputs

def _clean(obj):
    """JSON-safe copy: non-finite floats become null, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def series_csv_text(columns: dict) -> str:
    """CSV with '%.17g' floats and '\\n' line endings; header only when empty."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    nrows = len(columns[COLUMNS[0]]) if columns else 0
    for i in range(nrows):
        writer.writerow(["%.17g" % float(columns[c][i]) for c in COLUMNS])
    return buf.getvalue()


def summary_json_text(summary: dict) -> str:
    return json.dumps(_clean(summary), indent=2, allow_nan=False) + "\n"


def _write(path: str, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from None


def emit_outputs(results: dict, out_dir: str, prefix: str) -> list:
    """Write ``series`` (if present) as CSV and ``summary`` as JSON; return paths."""
    paths = []
    if "series" in results:
        path = os.path.join(out_dir, f"{prefix}_series.csv")
        _write(path, series_csv_text(results["series"]))
        paths.append(path)
    path = os.path.join(out_dir, f"{prefix}_summary.json")
    _write(path, summary_json_text(results["summary"]))
    paths.append(path)
    return paths


def read_series_csv(path: str) -> dict:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read series {path}: {exc.strerror}") from None
    if not rows or tuple(rows[0]) != COLUMNS:
        raise ConfigError(f"{path}: header does not match the time-series columns")
    return {c: np.array([float(r[i]) for r in rows[1:]]) for i, c in enumerate(COLUMNS)}


# ---------------------------------------------------------------- pipelines

def run_geometry(cfg: RunConfig) -> dict:
    grid = make_grid(cfg)
    geo = graph_geometry(make_surface(cfg, grid))
    n = grid.n
    summary = {
        "command": "geometry",
        "grid": asdict(cfg.grid),
        "area": geo.area,
        "W0": fn.weighted_volume(geo),
        "r_min": float(np.min(geo.r)),
        "r_max": float(np.max(geo.r)),
        "H_min": float(np.min(geo.H)),
        "H_max": float(np.max(geo.H)),
        "u_min": float(np.min(geo.u)),
        "minkowski_residuals": [fn.curvature_integrals(geo, m)["minkowski_residual"] for m in range(1, n + 1)],
        "identity_residuals": geometry_identity_residuals(geo),
    }
    if np.ptp(geo.r) == 0:
        summary["sphere_closed_forms"] = sphere_closed_forms(n, float(geo.r[0]))
    return {"summary": summary}


def _flow_config(cfg: RunConfig) -> FlowConfig:
    grid = make_grid(cfg)
    r = cfg.run
    return FlowConfig(make_surface(cfg, grid), make_law(cfg), t_max=r.t_max, grad_tol=r.grad_tol,
                      c_cfl=r.c_cfl, record_every=r.record_every, dt_max=r.dt_max)


def _audit(columns: dict, cfg: RunConfig) -> dict:
    weight_kind = None
    if cfg.law.kind == "icf":
        w = cfg.law.weight
        if w is None:
            weight_kind = "superlinear"
        elif w.kind == "ode":
            weight_kind = "ode"
    return fn.monotonicity_audit(columns, cfg.law.kind, weight_kind=weight_kind)


def run_simulate(cfg: RunConfig) -> dict:
    fc = _flow_config(cfg)
    res = run_flow(fc)
    columns = res.series.as_columns()
    summary = {"command": "simulate", "config": cfg.to_dict(), "result": res.summary}
    if len(res.series) >= 3:
        summary["audit"] = _audit(columns, cfg)
    law = fc.law
    geo = res.final.geometry
    if isinstance(law, MCFLaw):
        summary["inequality"] = fn.michael_simon_report(geo, 1, law.profile).to_dict()
    elif law.k < geo.n:
        weight = law.weight or default_icf_weight(geo.n, law.k)
        summary["inequality"] = fn.michael_simon_report(geo, law.k, weight).to_dict()
    return {"series": columns, "summary": summary}


def run_verify(cfg: RunConfig, rng) -> dict:
    n, k = cfg.grid.n, cfg.verify.k
    if k >= n:
        raise ConfigError(f"verify.k: k=n unsupported in (1.13) (k={k}, n={n})" if k == n
                          else f"verify.k: k={k} exceeds n={n}")
    grid = make_grid(cfg)
    weight = make_weight(cfg.verify.weight, n, k)
    geo = graph_geometry(make_surface(cfg, grid))
    report = fn.michael_simon_report(geo, k, weight, cfg.verify.f_const)
    summary = {"command": "verify", "config": cfg.to_dict(), "k": k, "lhs": report.lhs,
               "rhs": report.rhs, "gap": report.gap, "report": report.to_dict()}
    if cfg.verify.samples:
        res = cfg.grid.resolution
        summary["sampling"] = fn.random_perturbation_study(
            n, k, weight, rng, samples=cfg.verify.samples, R=cfg.shape.radius,
            amplitude=cfg.verify.amplitude, modes=cfg.verify.modes,
            resolution=res if isinstance(res, int) else 64, f_const=cfg.verify.f_const)
    return {"summary": summary}


def run_audit(cfg: RunConfig) -> dict:
    if cfg.series_csv:
        columns = read_series_csv(cfg.series_csv)
        if len(columns["t"]) < 3:
            raise ConfigError(f"series_csv: {cfg.series_csv} has fewer than 3 records")
        out = {"summary": {"command": "audit", "source": cfg.series_csv}}
    else:
        out = run_simulate(cfg)
        columns = out["series"]
        out["summary"]["command"] = "audit"
    out["summary"]["audit"] = _audit(columns, cfg)
    return out


def run_config(cfg: RunConfig) -> dict:
    rng = np.random.default_rng(cfg.seed)
    if cfg.command == "geometry":
        return run_geometry(cfg)
    if cfg.command == "simulate":
        return run_simulate(cfg)
    if cfg.command == "verify":
        return run_verify(cfg, rng)
    return run_audit(cfg)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hypflows", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run config")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    parser.add_argument("--seed", type=int, help="RNG seed (overrides seed)")
    parser.add_argument("--quiet", action="store_true")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0

    def say(msg, err=False):
        if err or not args.quiet:
            print(msg, file=sys.stderr if err else sys.stdout)

    try:
        cfg = load_config(args.config)
        cfg.command = args.command
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.output.dir = args.out
        cfg.validate()
        results = run_config(cfg)
        paths = emit_outputs(results, cfg.output.dir, cfg.output.prefix)
    except (ConfigError, OutputError, ExpressionError, ProfileError, GridError) as exc:
        say(f"error: {exc}", err=True)
        return 1
    except (InvariantViolation, ConeViolation, GeometryError, FlowError, fn.FunctionalError) as exc:
        say(f"invariant violated: {exc}", err=True)
        return 2
    for p in paths:
        say(f"wrote {p}")
    return 0

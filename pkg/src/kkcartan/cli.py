"""Command-line front end: run a job, print or write a report, exit 0 iff every check passes.

Jobs come from flags, from a JSON config (``--config``) or both; flags win. Exit codes:
0 all checks pass, 1 at least one check failed, 2 malformed configuration or input.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import fixtures as fx
from .errors import DomainError, GeometryError
from .report import Check, ReportBundle

JOBS = ("curvature", "reduce", "constraints", "weyl", "wave", "suite")
FORMATS = ("json", "csv")


class ConfigError(ValueError):
    """A malformed job description; the message names the offending field."""


@dataclass
class JobConfig:
    """Everything a job needs. Field names double as the JSON config keys."""

    job: str
    fixture: str | None = None
    input: str | None = None
    points: list[str] = field(default_factory=list)
    grid: int = 32
    fd_step: float | None = None
    quad: str | None = None
    out: str | None = None
    format: str = "json"
    tol: float | None = None
    dim: int = 3
    probe: str | None = None
    data: str | None = None
    iters: int = 30
    criteria: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.job not in JOBS:
            raise ConfigError(f"job: expected one of {', '.join(JOBS)}, got {self.job!r}")
        if self.format not in FORMATS:
            raise ConfigError(f"format: expected json or csv, got {self.format!r}")
        for name in ("tol", "fd_step"):
            v = getattr(self, name)
            if v is not None and not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"{name}: must be a positive number, got {v!r}")
        if not (isinstance(self.grid, int) and self.grid >= 8):
            raise ConfigError(f"grid: must be an integer >= 8, got {self.grid!r}")
        if not (isinstance(self.iters, int) and self.iters >= 1):
            raise ConfigError(f"iters: must be a positive integer, got {self.iters!r}")
        if self.dim not in (2, 3):
            raise ConfigError(f"dim: must be 2 or 3, got {self.dim!r}")
        for name in ("input",):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{name}: file not found: {path}")
        if isinstance(self.points, str):
            self.points = [self.points]

    @classmethod
    def from_mapping(cls, d: dict, origin: str = "config") -> "JobConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"{origin}: top level must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"{origin}: unknown field {unknown[0]!r}")
        if "job" not in d:
            raise ConfigError(f"{origin}: missing field 'job'")
        return cls(**d)

    @classmethod
    def load(cls, path: str) -> dict:
        """Read a JSON config into a plain mapping, reporting syntax errors by line and column."""
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config: file not found: {path}")
        try:
            d = json.loads(p.read_text())
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from None
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        return d


# -- parsing helpers ------------------------------------------------------------


def _float_list(text: str, what: str) -> list[float]:
    try:
        return [float(eval_number(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def eval_number(text: str) -> float:
    """Plain numbers and simple fractions such as ``2/3`` or ``-1/3``."""
    t = text.strip()
    m = re.fullmatch(r"([+-]?[\d.eE+-]+)/([\d.eE+-]+)", t)
    if m:
        return float(m.group(1)) / float(m.group(2))
    return float(t)


def parse_point(text: str | None, chart) -> np.ndarray:
    """``t=2,r=3`` or positional ``2,3,0,0``. Unnamed coordinates sit at 0 when the box allows,
    otherwise at the middle of their range."""
    box = np.array(chart.domain_box)
    x = np.where((box[:, 0] <= 0) & (box[:, 1] >= 0), 0.0, box.mean(axis=1))
    if text:
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if all("=" in p for p in parts):
            for p in parts:
                name, value = (s.strip() for s in p.split("=", 1))
                if name not in chart.coord_names:
                    raise ConfigError(f"point: unknown coordinate {name!r}, chart has {', '.join(chart.coord_names)}")
                try:
                    x[chart.coord_names.index(name)] = eval_number(value)
                except ValueError:
                    raise ConfigError(f"point: bad value for {name}: {value!r}") from None
        elif any("=" in p for p in parts):
            raise ConfigError(f"point: mix of named and positional coordinates in {text!r}")
        else:
            vals = _float_list(text, "point")
            if len(vals) != chart.dim:
                raise ConfigError(f"point: expected {chart.dim} coordinates, got {len(vals)}")
            x = np.array(vals)
    if not chart.contains(x):
        raise ConfigError(f"point: {text!r} lies outside the chart box {chart.domain_box}")
    return x


def point_label(chart, x) -> str:
    return ",".join(f"{n}={v:.6g}" for n, v in zip(chart.coord_names, x))


def resolve_frame(name: str | None):
    if not name:
        raise ConfigError("fixture: required for this job")
    try:
        return fx.fixture_by_name(name)
    except (GeometryError, ValueError, IndexError) as err:
        raise ConfigError(f"fixture: {err}") from None


def _guard(name: str, fn):
    """Run one check-producing step; downstream failures become failing checks."""
    try:
        return list(fn())
    except (ConfigError, KeyboardInterrupt):
        raise
    except Exception as err:
        return [Check.failed(name, err)]


# -- jobs -----------------------------------------------------------------------


def curvature_job(cfg: JobConfig) -> ReportBundle:
    from .cartan_curvature import coordinate_riemann_oracle, curvature_two_forms, solve_spin_connection

    frame = resolve_frame(cfg.fixture)
    points = [parse_point(p, frame.chart) for p in (cfg.points or [None])]
    fd = cfg.fd_step is not None
    tol = cfg.tol or (1e-4 if fd else 1e-5)
    bundle = ReportBundle.new("curvature", cfg.fixture, mode="fd" if fd else "analytic", fd_step=cfg.fd_step)
    route = "finite differences" if fd else "analytic partials"

    def run():
        if fd:
            curv = curvature_two_forms(frame, solve_spin_connection(frame, mode="fd", fd_step=cfg.fd_step))
            oracle = coordinate_riemann_oracle(frame.metric(), mode="fd", fd_step=cfg.fd_step)
        else:
            curv = curvature_two_forms(frame)
            oracle = coordinate_riemann_oracle(frame.metric())
        n = frame.dim
        for x in points:
            mine, ref = curv.frame(x), oracle.in_frame(frame, x)
            label = point_label(frame.chart, x)
            for a in range(n):
                for b in range(a + 1, n):
                    for c in range(n):
                        for d in range(c + 1, n):
                            yield Check(f"Riem^{a}_{b}{c}{d}[{label}]", float(mine[a, b, c, d]),
                                        float(ref[a, b, c, d]), tol, f"oracle: Christoffel route, {route}")

    return bundle.extend(_guard("curvature", run))


KK_FIXTURES = ("curved", "polarized", "kasner_kk")


def resolve_kk(cfg: JobConfig):
    from .dimensional_reduction import KKData, kasner_kk
    from .frame_algebra import Chart
    from .suite import curved_kk

    if cfg.input:
        d = JobConfig.load(cfg.input)
        try:
            c = d["chart"]
            chart = Chart(c["coords"], c.get("signature", (-1, 1, 1)), c["box"])
            return KKData.from_expressions(chart, d.get("gamma", "0"), d.get("A"), d.get("metric"),
                                           d.get("parameters")), cfg.input
        except KeyError as err:
            raise ConfigError(f"input: missing field {err.args[0]!r}") from None
        except (GeometryError, ValueError, TypeError) as err:
            raise ConfigError(f"input: {err}") from None
    name = cfg.fixture or "curved"
    head, _, args = name.partition(":")
    if head == "curved":
        return curved_kk(), name
    if head == "polarized":
        return curved_kk(A=None), name
    if head == "kasner_kk":
        ps = _float_list(args, "fixture")
        if len(ps) != 3:
            raise ConfigError("fixture: kasner_kk needs three exponents, e.g. kasner_kk:2/3,2/3,-1/3")
        return kasner_kk(*ps), name
    raise ConfigError(f"fixture: unknown reduction fixture {head!r}, expected one of {', '.join(KK_FIXTURES)}")


def reduce_job(cfg: JobConfig) -> ReportBundle:
    from .cartan_curvature import contract_curvature, curvature_two_forms
    from .dimensional_reduction import (
        assemble_kk_coframe, assemble_riemann, project_4d_ricci, reduced_riemann, reduced_scalar_curvature,
        ricci_projections,
    )

    kk, label = resolve_kk(cfg)
    points = [parse_point(p, kk.chart3) for p in (cfg.points or [None])]
    tol = cfg.tol or 1e-5
    bundle = ReportBundle.new("reduce", label)

    def run():
        curv = curvature_two_forms(assemble_kk_coframe(kk))
        con = contract_curvature(curv)
        for x in points:
            x4 = np.append(x, 0.0)
            tag = point_label(kk.chart3, x)
            blocks = assemble_riemann(reduced_riemann(kk, x))
            yield Check(f"riemann_blocks[{tag}]", float(np.max(np.abs(blocks - curv.lowered(x4)))), 0.0, tol,
                        "oracle: 4D Cartan pipeline on the assembled coframe", "le")
            direct = project_4d_ricci(kk, con.ricci_frame(x4), x)
            reduced = ricci_projections(kk, x)
            for key in ("horizontal", "mixed", "fibre"):
                yield Check(f"ricci_{key}[{tag}]", float(np.max(np.abs(reduced[key] - direct[key]))), 0.0, tol,
                            "oracle: projected 4D Ricci", "le")
            yield Check(f"scalar_curvature[{tag}]", float(reduced_scalar_curvature(kk, x)), float(con.scalar(x4)),
                        tol, "oracle: 4D scalar curvature")

    return bundle.extend(_guard("reduce", run))


def resolve_state(cfg: JobConfig):
    from .adm_phase_space import Grid2D, kasner_slice, load_state
    from .suite import synthetic_state

    if cfg.input:
        try:
            return load_state(cfg.input), cfg.input, None
        except Exception as err:
            raise ConfigError(f"input: cannot read canonical state: {err}") from None
    name = cfg.fixture or ""
    head, _, args = name.partition(":")
    if head == "kasner":
        ps = _float_list(args, "fixture")
        if len(ps) != 3:
            raise ConfigError("fixture: kasner needs three exponents, e.g. kasner:2/3,2/3,-1/3")
        t = 1.0
        for p in cfg.points[:1]:
            m = re.fullmatch(r"\s*t\s*=\s*(\S+)\s*", p)
            if not m:
                raise ConfigError(f"point: slice jobs take a single time, e.g. t=1.5; got {p!r}")
            t = eval_number(m.group(1))
        if t <= 0:
            raise ConfigError(f"point: the Kasner slice needs t > 0, got {t}")
        return kasner_slice(*ps, t, Grid2D.square(cfg.grid))[0], name, (ps, t)
    variants = {"synthetic": {}, "synthetic_kk": {"kk": True}, "synthetic_twist": {"twist": True}}
    if head in variants:
        return synthetic_state(cfg.grid, **variants[head]), name, None
    raise ConfigError(f"fixture: expected kasner:p1,p2,p3 or one of {', '.join(variants)}; got {name!r}")


def constraints_job(cfg: JobConfig) -> ReportBundle:
    from .adm_phase_space import hamiltonian_constraint, momentum_constraint

    state, label, _ = resolve_state(cfg)
    tol = cfg.tol or 1e-6
    bundle = ReportBundle.new("constraints", label, grid=state.grid.nx)

    def run():
        yield Check("hamiltonian_sup", float(np.max(np.abs(hamiltonian_constraint(state)))), 0.0, tol,
                    "constraint vanishes on solutions", "le")
        yield Check("momentum_sup", float(np.max(np.abs(momentum_constraint(state)))), 0.0, tol,
                    "constraint vanishes on solutions", "le")

    return bundle.extend(_guard("constraints", run))


def weyl_job(cfg: JobConfig) -> ReportBundle:
    from .adm_phase_space import bel_robinson_density, lifted_weyl, weyl_adm
    from .cartan_curvature import curvature_two_forms, weyl_tensor

    state, label, kasner = resolve_state(cfg)
    tol = cfg.tol or 1e-3
    bundle = ReportBundle.new("weyl", label, grid=state.grid.nx)

    def run():
        w = weyl_adm(state)
        ref = lifted_weyl(state)
        for k, v in w.as_dict().items():
            r = getattr(ref, k)
            err = float(np.max(np.abs(v - r)) / max(1.0, np.max(np.abs(r))))
            yield Check(f"{k}_vs_lifted", err, 0.0, tol, "oracle: Weyl tensor of the lifted slice", "le")
        yield Check("bel_robinson_density_min", float(np.min(bel_robinson_density(w, state))), 0.0, 0.0,
                    "sum of squares", "ge")
        if kasner:
            ps, t = kasner
            W = weyl_tensor(curvature_two_forms(fx.kasner(*ps))).frame([t, 0.0, 0.0, 0.0])
            qbar = np.array([t ** (2 * p) for p in ps])
            vol = np.sqrt(qbar.prod())
            pairs = [("E_11", w.E_ab[0, 0, 0, 0], vol * W[0, 1, 0, 1] / qbar[0]),
                     ("E_22", w.E_ab[1, 1, 0, 0], vol * W[0, 2, 0, 2] / qbar[1]),
                     ("E_33", w.E_33[0, 0], vol * W[0, 3, 0, 3] * qbar[2])]
            for name, mine, frame_value in pairs:
                yield Check(f"kasner.{name}", float(mine), float(frame_value), 1e-5, "oracle: 4D frame Weyl")
            b = max(float(np.max(np.abs(x))) for x in (w.B_ab, w.B_3a, w.B_33))
            yield Check("kasner.B_sup", b, 0.0, 1e-8, "closed form: diagonal Kasner has no magnetic part", "le")

    return bundle.extend(_guard("weyl", run))


def resolve_wave_data(cfg: JobConfig):
    """Return ``(data, exact)``; ``exact(x, t)`` is a closed-form reference or None."""
    from .expressions import Expression
    from .suite import radial_gaussian
    from .wave_kernels import CauchyData, plane_wave_data, smooth_bump

    dim = cfg.dim
    source = cfg.data or "unit_velocity"
    path = Path(source)
    if path.suffix == ".json" or path.is_file():
        d = JobConfig.load(source)
        unknown = sorted(set(d) - {"u0", "u1", "source", "nonlinearity", "center", "parameters"})
        if unknown:
            raise ConfigError(f"data: unknown field {unknown[0]!r}")
        try:
            kw = {}
            if d.get("nonlinearity"):
                ex = Expression(d["nonlinearity"], ("u",), d.get("parameters"))
                kw["nonlinearity"] = lambda u: ex.on_grid(u=np.asarray(u, dtype=float))
            if d.get("center") is not None:
                kw["center"] = np.asarray(d["center"], dtype=float)
            data = CauchyData.from_expressions(dim, str(d.get("u0", "0")), str(d.get("u1", "0")), d.get("source"),
                                               d.get("parameters"), label=source, **kw)
        except (ValueError, GeometryError, TypeError) as err:
            raise ConfigError(f"data: {err}") from None
        return data, None
    head, _, args = source.partition(":")
    if head == "plane":
        k = np.array(_float_list(args, "data")) if args else np.ones(dim)
        if len(k) != dim:
            raise ConfigError(f"data: plane wave needs {dim} wave numbers")
        return plane_wave_data(k), lambda x, t: float(np.sin(k @ x - np.linalg.norm(k) * t))
    if head == "unit_velocity":
        return CauchyData(dim, u1=lambda Y: 1.0), lambda x, t: t
    if head == "unit_source":
        return CauchyData(dim, source=lambda Y, s: 1.0), lambda x, t: 0.5 * t * t
    if head == "bump":
        return CauchyData(dim, u1=smooth_bump(1.0)), None
    if head == "cubic":
        p0, g0 = radial_gaussian(0.6)
        p1, g1 = radial_gaussian(0.3)
        data = CauchyData(dim, g0, g1, nonlinearity=lambda u: -u**3, center=np.zeros(dim))
        if dim != 3:
            return data, None
        from .wave_kernels import radial_fdtd

        return data, lambda x, t: float(radial_fdtd(p0, p1, t, np.linalg.norm(x), lambda u: -u**3)[0])
    raise ConfigError(f"data: unknown wave fixture {head!r}; expected plane, unit_velocity, unit_source, bump, "
                      "cubic or a JSON file")


def wave_job(cfg: JobConfig) -> ReportBundle:
    from .wave_kernels import QuadratureSpec, duhamel_solve

    data, exact = resolve_wave_data(cfg)
    if not cfg.probe:
        raise ConfigError(f"probe: required, give {cfg.dim} coordinates and a time, e.g. 0.1,0.2,0.3,0.7")
    vals = _float_list(cfg.probe, "probe")
    if len(vals) != cfg.dim + 1:
        raise ConfigError(f"probe: expected {cfg.dim} coordinates and a time, got {len(vals)} numbers")
    x, t = np.array(vals[:-1]), vals[-1]
    try:
        quad = QuadratureSpec.parse(cfg.quad) if cfg.quad else QuadratureSpec()
    except (ValueError, GeometryError) as err:
        raise ConfigError(f"quad: {err}") from None
    bundle = ReportBundle.new("wave", cfg.data or "unit_velocity", dim=cfg.dim, quad=repr(quad))

    def run():
        res = duhamel_solve(data, x, t, quad, iters=cfg.iters)
        bundle.result = {"value": float(res.value), "error_estimate": float(res.error_estimate),
                         "iterate_history": [float(v) for v in res.iterate_history]}
        if exact is not None:
            oracle = cfg.data and cfg.data.startswith("cubic")
            yield Check("value", float(res.value), float(exact(x, t)), cfg.tol or (1e-3 if oracle else 1e-8),
                        "oracle: radial FDTD" if oracle else "closed form")

    return bundle.extend(_guard("wave", run))


def suite_job(cfg: JobConfig) -> ReportBundle:
    from .suite import run_suite, thread_count

    if not cfg.criteria:
        raise ConfigError("criteria: pass --all or --criteria 1,2,...")
    try:
        threads = thread_count()
        checks = run_suite(cfg.criteria, threads)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    return ReportBundle.new("suite", "acceptance", criteria=list(cfg.criteria)).extend(checks)


RUNNERS = {"curvature": curvature_job, "reduce": reduce_job, "constraints": constraints_job, "weyl": weyl_job,
           "wave": wave_job, "suite": suite_job}


def run_job(cfg: JobConfig) -> ReportBundle:
    return RUNNERS[cfg.job](cfg)


# -- argument handling ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON job description; flags override its fields")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("--tol", type=float, help="override the default check tolerance")

    source = argparse.ArgumentParser(add_help=False)
    source.add_argument("--fixture")
    source.add_argument("--input", help="data file for the job")
    source.add_argument("--point", action="append", dest="points",
                        help="evaluation point, e.g. t=2 or 2,0,0,0; repeatable")

    parser = argparse.ArgumentParser(prog="kkcartan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="job", required=True)
    p = sub.add_parser("curvature", parents=[common, source], help="frame Riemann components against the oracle")
    p.add_argument("--fd-step", type=float, dest="fd_step", help="use finite differences with this step")
    sub.add_parser("reduce", parents=[common, source], help="reduced curvature against the 4D pipeline")
    for name, text in (("constraints", "Hamiltonian and momentum constraints"), ("weyl", "electric and magnetic Weyl")):
        p = sub.add_parser(name, parents=[common, source], help=text)
        p.add_argument("--grid", type=int, help="points per side of the periodic grid")
    p = sub.add_parser("wave", parents=[common], help="wave equation value at a probe point")
    p.add_argument("--dim", type=int, choices=(2, 3))
    p.add_argument("--probe", help="x1,...,xd,t")
    p.add_argument("--data", help="plane[:k], unit_velocity, unit_source, bump, cubic or a JSON file")
    p.add_argument("--quad", help="quadrature orders, e.g. sphere=24x48,time=12,tol=1e-9")
    p.add_argument("--iters", type=int)
    p = sub.add_parser("suite", parents=[common], help="acceptance checks")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--all", action="store_true")
    g.add_argument("--criteria", help="comma-separated criterion numbers")
    return parser


def config_from_args(args: argparse.Namespace) -> JobConfig:
    base = JobConfig.load(args.config) if args.config else {}
    if base.get("job", args.job) != args.job:
        raise ConfigError(f"job: config says {base['job']!r} but the command is {args.job!r}")
    base["job"] = args.job
    flags = {k: v for k, v in vars(args).items() if k not in ("config", "job", "all") and v is not None}
    if getattr(args, "all", False):
        from .suite import CRITERIA

        flags["criteria"] = [c.number for c in CRITERIA]
    elif isinstance(flags.get("criteria"), str):
        try:
            flags["criteria"] = [int(v) for v in flags["criteria"].split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"criteria: expected comma-separated integers, got {args.criteria!r}") from None
    base.update(flags)
    return JobConfig.from_mapping(base, args.config or "flags")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        bundle = run_job(cfg)
    except (ConfigError, DomainError) as err:
        print(f"kkcartan: error: {err}", file=sys.stderr)
        return 2
    text = bundle.emit(cfg.format)
    if cfg.out:
        try:
            Path(cfg.out).write_text(text)
        except OSError as err:
            print(f"kkcartan: error: out: {err}", file=sys.stderr)
            return 2
    else:
        sys.stdout.write(text)
    return bundle.exit_code


if __name__ == "__main__":
    sys.exit(main())

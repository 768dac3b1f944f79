"""Command-line front end.

Every subcommand prints one JSON report on stdout (sorted keys, timings in
their own block) and exits 0 when a verdict was produced, 1 on usage
errors and 2 on numeric failures.  Parameters are resolved as
flag > ``CONFPLANE_<NAME>`` environment variable > built-in default, and
the resolved values are echoed in the report.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from importlib import resources
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import __version__
from .asymptotics import AlphaConfig, alpha_estimate, alpha_estimate_grid, classify_completeness, profile
from .beltrami import (
    BeltramiCoefficient,
    BeltramiError,
    ConvergenceError,
    _zgrid,
    decompose,
    pi_roundtrip,
    solve_beltrami,
)
from .deform import (
    ProfileError,
    RevolutionProfile,
    completion_curvature,
    completion_path,
    cone_cap_profile,
    convex_path,
    flatness_test,
    revolve,
    revolve_curvature,
)
from .expr import ExprDomainError, ExprError, ExprSyntaxError, parse, to_text
from .field import (
    GridFormatError,
    MetricGrid,
    MetricPositivityError,
    ScalarGrid,
    curvature,
    curvature_verdict,
    default_tolerance,
    is_subharmonic,
    read_cpg1,
    sample,
    write_cpg1,
)
from .oracle import OracleConfig, conformal_length, cross_validate, polyline, ray_escape_search
from .plots import write_csv, write_heatmap

SCHEMA_VERSION = "1.0"
ENV_PREFIX = "CONFPLANE_"

# name -> (type, default); a None tolerance is derived from the grid
DEFAULTS: dict[str, tuple[Callable, Any]] = {
    "window": (float, 4.0),
    "n": (int, 129),
    "r_max": (float, 1e6),
    "angles": (int, 64),
    "tol": (float, None),
    "band": (float, 0.02),
    "bel_n": (int, 256),
    "bel_tol": (float, 1e-10),
    "max_iter": (int, 200),
}


def report_schema() -> dict:
    """The JSON schema every report validates against."""
    text = resources.files("confplane").joinpath("schema/report-v1.json").read_text(encoding="utf-8")
    return json.loads(text)


class UsageError(Exception):
    def __init__(self, message: str, parser: Optional[argparse.ArgumentParser] = None):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self)


def _resolve(args: argparse.Namespace, names: Sequence[str]) -> dict:
    out = {}
    for name in names:
        typ, default = DEFAULTS[name]
        flag = getattr(args, name, None)
        env = os.environ.get(ENV_PREFIX + name.upper())
        if flag is not None:
            out[name] = flag
        elif env is not None:
            try:
                out[name] = typ(env)
            except ValueError:
                raise UsageError(f"environment variable {ENV_PREFIX + name.upper()}={env!r} is not a valid {typ.__name__}")
        else:
            out[name] = default
    return out


class _Timer:
    def __init__(self):
        self.stages: dict[str, float] = {}

    @contextmanager
    def __call__(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.stages[name] = self.stages.get(name, 0.0) + time.perf_counter() - t0


def _clean(obj):
    """JSON-safe copy: non-finite floats become null, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):  # str enums
        return obj.value
    return obj


def _digest(path: str) -> dict:
    data = Path(path).read_bytes()
    return {"path": str(path), "sha256": hashlib.sha256(data).hexdigest()}


def _expr_echo(text: str) -> dict:
    return {"text": text, "normalized": to_text(parse(text))}


def _grid_stats(g: ScalarGrid) -> dict:
    v = g.values[g.valid]
    if v.size == 0:
        return {"min": None, "max": None, "valid_nodes": 0}
    return {"min": float(v.min()), "max": float(v.max()), "valid_nodes": int(v.size)}


def _grid_rows(g: ScalarGrid) -> list:
    return [[float(v) if ok else None for v, ok in zip(row, vrow)] for row, vrow in zip(g.values, g.valid)]


def _curvature_tol(u: ScalarGrid, tol: Optional[float]) -> float:
    # Laplacian round-off, scaled by the e^{2u} factor of K
    base = default_tolerance(u) if tol is None else tol
    return base * float(np.exp(2.0 * np.max(u.values[u.valid])))


def _load_u(args, params) -> tuple[ScalarGrid, dict]:
    if getattr(args, "grid", None):
        g = read_cpg1(args.grid)
        return g, {"grid": _digest(args.grid)}
    if not args.u:
        raise UsageError("one of --u or --grid is required", args._parser)
    return sample(parse(args.u), params["window"], params["n"]), {"u": _expr_echo(args.u)}


# --------------------------------------------------------------------------
# subcommands; each returns (input echo, parameters, result)


def cmd_analyze(args, timer):
    p = _resolve(args, ["window", "n", "r_max", "angles", "tol", "band"])
    u = parse(args.u)
    acfg = AlphaConfig(band=p["band"], analysis_L=p["window"], analysis_n=p["n"])
    ocfg = OracleConfig(angles=p["angles"], R_max=p["r_max"])
    with timer("sample"):
        grid = sample(u, p["window"], p["n"])
    with timer("subharmonic"):
        sub = is_subharmonic(grid, p["tol"])
    with timer("cross_validate"):
        cv = cross_validate(u, p["r_max"], acfg, ocfg)
    with timer("flatness"):
        ftol = default_tolerance(grid) if p["tol"] is None else p["tol"]
        flat = flatness_test(u, ftol, p["window"], p["n"])
    _write_outputs(args, timer, grid=grid, escape=cv.escape, u=u, config=acfg)
    result = {
        "subharmonic": sub.as_dict(),
        "alpha": cv.alpha.as_dict(),
        "completeness": {
            "verdict": cv.completeness.value,
            "complete": cv.completeness.value != "Incomplete",
            "threshold": 1.0,
            "band": [cv.alpha.lower, cv.alpha.upper],
        },
        "oracle": cv.escape.as_dict(),
        "agreement": cv.agreement,
        "heuristic": cv.heuristic,
        "flatness": {"flat": flat, "tol": ftol},
    }
    return {"u": _expr_echo(args.u)}, dict(p, alpha_config=acfg.as_dict(), oracle_config=ocfg.as_dict()), result


def cmd_alpha(args, timer):
    p = _resolve(args, ["window", "n", "r_max", "band"])
    acfg = AlphaConfig(band=p["band"], analysis_L=p["window"], analysis_n=p["n"])
    with timer("alpha"):
        if args.grid:
            g = read_cpg1(args.grid)
            est = alpha_estimate_grid(g, config=acfg)
            echo = {"grid": _digest(args.grid)}
        elif args.u:
            u = parse(args.u)
            est = alpha_estimate(u, p["r_max"], config=acfg)
            echo = {"u": _expr_echo(args.u)}
        else:
            raise UsageError("one of --u or --grid is required", args._parser)
    if args.u and args.profile_csv:
        with timer("outputs"):
            _profile_csv(args.profile_csv, parse(args.u), acfg, p["r_max"])
    verdict = classify_completeness(est)
    return echo, dict(p, alpha_config=acfg.as_dict()), {"alpha": est.as_dict(), "completeness": {"verdict": verdict.value, "threshold": 1.0, "band": [est.lower, est.upper]}}


def cmd_curvature(args, timer):
    p = _resolve(args, ["window", "n", "tol"])
    with timer("sample"):
        grid, echo = _load_u(args, p)
    with timer("curvature"):
        K = curvature(grid)
        tol = _curvature_tol(grid, p["tol"])
        verdict = curvature_verdict(K, tol)
        sub = is_subharmonic(grid, p["tol"])
    if args.out:
        write_cpg1(K, args.out)
    if args.svg:
        write_heatmap(args.svg, K, "K")
    result = {
        "verdict": verdict,
        "flat": verdict == "flat",
        "tol": tol,
        "K": _grid_stats(K),
        "subharmonic": sub.as_dict(),
    }
    if args.include_grid:
        result["K_grid"] = _grid_rows(K)
    p = dict(p, window=grid.L, n=grid.n)
    return echo, p, result


def cmd_complete(args, timer):
    p = _resolve(args, ["window", "n", "r_max", "angles", "band"])
    acfg = AlphaConfig(band=p["band"], analysis_L=p["window"], analysis_n=p["n"])
    ocfg = OracleConfig(angles=p["angles"], R_max=p["r_max"])
    with timer("cross_validate"):
        cv = cross_validate(parse(args.u), p["r_max"], acfg, ocfg)
    if args.rays_csv:
        write_csv(args.rays_csv, cv.escape.rays_csv_rows())
    result = {
        "completeness": {"verdict": cv.completeness.value, "threshold": 1.0, "band": [cv.alpha.lower, cv.alpha.upper]},
        "alpha": cv.alpha.as_dict(),
        "oracle": cv.escape.as_dict(include_rays=args.include_rays),
        "agreement": cv.agreement,
        "heuristic": cv.heuristic,
    }
    return {"u": _expr_echo(args.u)}, dict(p, alpha_config=acfg.as_dict(), oracle_config=ocfg.as_dict()), result


def _parse_points(text: str) -> list:
    try:
        return [[float(c) for c in pt.split(",")] for pt in text.split(";") if pt.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --path {text!r}: expected 'x,y;x,y;...'") from exc


def cmd_oracle(args, timer):
    p = _resolve(args, ["r_max", "angles"])
    u = parse(args.u)
    if args.path:
        with timer("length"):
            path = polyline(_parse_points(args.path))
            res = conformal_length(u, path)
        result = {
            "mode": "path",
            "length": res.value,
            "error": res.error,
            "converged": res.converged,
            "euclidean_length": path.euclidean_length,
            "tol": 1e-9,
        }
        return {"u": _expr_echo(args.u), "path": args.path}, p, result
    with timer("rays"):
        rep = ray_escape_search(u, p["angles"], p["r_max"])
    if args.rays_csv:
        write_csv(args.rays_csv, rep.rays_csv_rows())
    return {"u": _expr_echo(args.u)}, p, dict(rep.as_dict(include_rays=args.include_rays), mode="rays")


def _read_metric(args) -> tuple[MetricGrid, dict]:
    grids = [read_cpg1(getattr(args, k)) for k in ("E", "F", "G")]
    if len({(g.n, g.L) for g in grids}) != 1:
        raise UsageError("E, F and G grids must share n and L")
    valid = grids[0].valid & grids[1].valid & grids[2].valid
    g = MetricGrid.from_arrays(grids[0].L, *(x.values for x in grids), valid=valid)
    return g, {k: _digest(getattr(args, k)) for k in ("E", "F", "G")}


def cmd_beltrami(args, timer):
    if args.action == "solve":
        p = _resolve(args, ["window", "bel_n", "bel_tol", "max_iter"])
        if p["bel_n"] % 2:
            raise UsageError("--bel-n must be even")
        N = p["bel_n"] + 1
        L = p["window"]
        X, Y = _zgrid(L, N).real, _zgrid(L, N).imag
        with timer("sample"):
            re = sample(parse(args.mu_re), L, N).values
            im = sample(parse(args.mu_im), L, N).values
            mu = BeltramiCoefficient(L, re + 1j * im)
        with timer("solve"):
            phi = solve_beltrami(mu, tol=p["bel_tol"], max_iter=p["max_iter"])
        if args.out_prefix:
            write_cpg1(ScalarGrid(L, N, phi.values.real), f"{args.out_prefix}phi_re.cpg")
            write_cpg1(ScalarGrid(L, N, phi.values.imag), f"{args.out_prefix}phi_im.cpg")
        if args.svg:
            write_heatmap(args.svg, ScalarGrid(L, N, np.abs(mu.values)), "|mu|", diverging=False)
        a, b = phi.normalization
        info = phi.info
        c = N // 2
        result = {
            "iterations": info.iterations,
            "residual": info.residual,
            "contraction": info.contraction,
            "converged": info.residual <= p["bel_tol"],
            "tol": p["bel_tol"],
            "support_radius": info.support_radius,
            "max_mu": mu.max_modulus,
            "normalization": {"a": [a.real, a.imag], "b": [b.real, b.imag]},
            "phi_at_0": [float(phi.values[c, c].real), float(phi.values[c, c].imag)],
            "max_displacement": float(np.max(np.abs(phi.values - (X + 1j * Y)))),
        }
        echo = {"mu_re": _expr_echo(args.mu_re), "mu_im": _expr_echo(args.mu_im)}
        return echo, p, result

    g, echo = _read_metric(args)
    if args.action == "decompose":
        with timer("decompose"):
            d = decompose(g)
        if args.out_prefix:
            write_cpg1(d.lam, f"{args.out_prefix}lambda.cpg")
            write_cpg1(d.mu.real_grid(), f"{args.out_prefix}mu_re.cpg")
            write_cpg1(d.mu.imag_grid(), f"{args.out_prefix}mu_im.cpg")
        if args.svg:
            absmu = np.where(d.mu.valid, np.abs(d.mu.values), np.nan)
            write_heatmap(args.svg, ScalarGrid(g.L, g.n, absmu, d.mu.valid), "|mu|", diverging=False)
        result = {"lambda": _grid_stats(d.lam), "max_mu": d.mu.max_modulus, "mu_below_one": d.mu.max_modulus < 1.0}
        return echo, {"window": g.L, "n": g.n}, result

    p = _resolve(args, ["bel_tol", "max_iter"])
    with timer("roundtrip"):
        rep, phi, f = pi_roundtrip(g, fraction=args.fraction, tol=p["bel_tol"], max_iter=p["max_iter"])
    if args.out_prefix:
        write_cpg1(f, f"{args.out_prefix}factor.cpg")
    result = dict(rep.as_dict(), tol=p["bel_tol"], deviation_target=1e-2)
    return echo, dict(p, window=g.L, n=g.n, fraction=args.fraction), result


def cmd_deform(args, timer):
    if args.action == "convex":
        p = _resolve(args, ["r_max"])
        u0, u1 = parse(args.u0), parse(args.u1)
        if not 0.0 <= args.s <= 1.0:
            raise UsageError("--s must lie in [0, 1]")
        e = convex_path(u0, u1, args.s)
        result = {"u": to_text(e)}
        if args.estimate:
            with timer("alpha"):
                result["alpha"] = alpha_estimate(e, p["r_max"]).as_dict()
        echo = {"u0": _expr_echo(args.u0), "u1": _expr_echo(args.u1), "s": args.s}
        return echo, p, result

    if args.action == "complete-path":
        p = _resolve(args, ["window", "n"])
        if args.s < 0:
            raise UsageError("--s must be nonnegative")
        with timer("metric"):
            g = completion_path(parse(args.u), args.s, p["window"], p["n"])
        with timer("curvature"):
            curv = completion_curvature(parse(args.u), args.s, p["window"], p["n"])
        if args.out_prefix:
            for k in ("E", "F", "G"):
                write_cpg1(getattr(g, k), f"{args.out_prefix}{k}.cpg")
        result = {"E": _grid_stats(g.E), "curvature": curv, "curvature_asserted": False}
        return {"u": _expr_echo(args.u), "s": args.s}, p, result

    p = _resolve(args, ["window", "n"])
    if args.f:
        prof = RevolutionProfile.from_expr(args.f)
        echo = {"f": _expr_echo(args.f)}
    else:
        prof = cone_cap_profile()
        echo = {"profile": "cone-cap"}
    with timer("metric"):
        g = revolve(prof, p["window"], p["n"])
    X, Y = g.E.mesh()
    r = np.hypot(X, Y)
    with timer("curvature"):
        K = revolve_curvature(prof, r)
    if args.out_prefix:
        for k in ("E", "F", "G"):
            write_cpg1(getattr(g, k), f"{args.out_prefix}{k}.cpg")
    if args.svg:
        write_heatmap(args.svg, ScalarGrid(g.L, g.n, K), "K", diverging=True)
    result = {
        "profile": prof.label,
        "E": _grid_stats(g.E),
        "G": _grid_stats(g.G),
        "K": {"min": float(K.min()), "max": float(K.max())},
        "nonnegative": bool(K.min() >= -1e-9),
        "tol": 1e-9,
    }
    return echo, p, result


def _profile_csv(path, u, cfg: AlphaConfig, r_max: float):
    count = max(int(math.ceil(math.log(r_max / cfg.r0) / math.log(cfg.rho))), 3) + 1
    prof = profile(u, cfg.r0, cfg.rho, count, cfg.m)
    rows = [["r", "log_r", "M"]] + [[repr(float(r)), repr(float(t)), repr(float(m))] for r, t, m in zip(prof.radii, prof.t, prof.values)]
    write_csv(path, rows)


def _write_outputs(args, timer, grid, escape, u, config):
    with timer("outputs"):
        if getattr(args, "rays_csv", None):
            write_csv(args.rays_csv, escape.rays_csv_rows())
        if getattr(args, "profile_csv", None):
            _profile_csv(args.profile_csv, u, config, escape.R_max)
        if getattr(args, "svg", None):
            write_heatmap(args.svg, curvature(grid), "K")


# --------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, *names: str) -> None:
    # accepted after the subcommand as well; SUPPRESS keeps the global value otherwise
    p.add_argument("--pretty", action="store_true", default=argparse.SUPPRESS, help="indent the JSON report")
    flags = {
        "window": ("--window", float, "half-width L of the sampling square [-L, L]^2"),
        "n": ("--n", int, "nodes per axis"),
        "r_max": ("--r-max", float, "largest radius for alpha / ray integration"),
        "angles": ("--angles", int, "number of rays"),
        "tol": ("--tol", float, "subharmonicity / flatness tolerance (default: round-off scaled by 1/h^2)"),
        "band": ("--band", float, "allowance added to the upper end of the alpha band"),
        "bel_n": ("--bel-n", int, "FFT size (even)"),
        "bel_tol": ("--bel-tol", float, "fixed-point residual tolerance"),
        "max_iter": ("--max-iter", int, "fixed-point iteration cap"),
    }
    for name in names:
        flag, typ, help_ = flags[name]
        default = DEFAULTS[name][1]
        p.add_argument(flag, dest=name, type=typ, default=None, help=f"{help_} (env {ENV_PREFIX}{name.upper()}, default {default})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="confplane", description="Completeness and curvature of conformal metrics e^{-2u} g0 on the plane.")
    parser.add_argument("--version", action="version", version=f"confplane {__version__}")
    parser.add_argument("--pretty", action="store_true", help="indent the JSON report")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(func=func, _parser=sp)
        return sp

    sp = add("analyze", cmd_analyze, "full report: subharmonicity, alpha, completeness, ray oracle, flatness")
    sp.add_argument("--u", required=True, help="conformal factor u(x, y)")
    _common(sp, "window", "n", "r_max", "angles", "tol", "band")
    sp.add_argument("--rays-csv", help="per-ray partial lengths (CSV)")
    sp.add_argument("--profile-csv", help="circle maxima M(r) (CSV)")
    sp.add_argument("--svg", help="curvature heatmap (SVG)")

    sp = add("alpha", cmd_alpha, "estimate alpha(u) = lim M(r, u) / log r")
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--u", help="conformal factor u(x, y)")
    src.add_argument("--grid", help="CPG1 grid of u (window-limited estimate)")
    _common(sp, "window", "n", "r_max", "band")
    sp.add_argument("--profile-csv", help="circle maxima M(r) (CSV)")

    sp = add("curvature", cmd_curvature, "Gauss curvature K = e^{2u} lap(u) on a grid")
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--u", help="conformal factor u(x, y)")
    src.add_argument("--grid", help="CPG1 grid of u")
    _common(sp, "window", "n", "tol")
    sp.add_argument("--out", help="write K as a CPG1 grid")
    sp.add_argument("--svg", help="curvature heatmap (SVG)")
    sp.add_argument("--include-grid", action="store_true", help="embed K in the report")

    sp = add("complete", cmd_complete, "completeness verdict cross-checked with the ray oracle")
    sp.add_argument("--u", required=True)
    _common(sp, "window", "n", "r_max", "angles", "band")
    sp.add_argument("--rays-csv", help="per-ray partial lengths (CSV)")
    sp.add_argument("--include-rays", action="store_true")

    sp = add("oracle", cmd_oracle, "conformal length of a polyline, or the radial ray search")
    sp.add_argument("--u", required=True)
    sp.add_argument("--path", help="polyline 'x,y;x,y;...' (omit for the ray search)")
    _common(sp, "r_max", "angles")
    sp.add_argument("--rays-csv", help="per-ray partial lengths (CSV)")
    sp.add_argument("--include-rays", action="store_true")

    sp = add("beltrami", cmd_beltrami, "Beltrami solver, metric decomposition and round trip")
    bsub = sp.add_subparsers(dest="action", parser_class=_Parser, metavar="ACTION")
    bsub.required = True
    b = bsub.add_parser("solve", help="solve phi_zbar = mu phi_z")
    b.set_defaults(_parser=b)
    b.add_argument("--mu-re", default="0", help="real part of mu(x, y)")
    b.add_argument("--mu-im", default="0", help="imaginary part of mu(x, y)")
    _common(b, "window", "bel_n", "bel_tol", "max_iter")
    b.add_argument("--out-prefix", help="write <prefix>phi_re.cpg and <prefix>phi_im.cpg")
    b.add_argument("--svg", help="|mu| heatmap (SVG)")
    for action, help_ in (("decompose", "split g into lambda and mu"), ("roundtrip", "decompose, solve and rebuild g")):
        b = bsub.add_parser(action, help=help_)
        b.set_defaults(_parser=b)
        for k in ("E", "F", "G"):
            b.add_argument(f"--{k}", required=True, help=f"CPG1 grid of {k}")
        b.add_argument("--out-prefix")
        if action == "decompose":
            b.add_argument("--svg", help="|mu| heatmap (SVG)")
            _common(b)
        else:
            b.add_argument("--fraction", type=float, default=0.25, help="inner window fraction for the deviation")
            _common(b, "bel_tol", "max_iter")

    sp = add("deform", cmd_deform, "deformation paths and surfaces of revolution")
    dsub = sp.add_subparsers(dest="action", parser_class=_Parser, metavar="ACTION")
    dsub.required = True
    d = dsub.add_parser("convex", help="s u1 + (1 - s) u0")
    d.set_defaults(_parser=d)
    d.add_argument("--u0", required=True)
    d.add_argument("--u1", required=True)
    d.add_argument("--s", type=float, required=True)
    d.add_argument("--estimate", action="store_true", help="also estimate alpha of the combination")
    _common(d, "r_max")
    d = dsub.add_parser("complete-path", help="(s + e^{-2u}) g0")
    d.set_defaults(_parser=d)
    d.add_argument("--u", required=True)
    d.add_argument("--s", type=float, required=True)
    _common(d, "window", "n")
    d.add_argument("--out-prefix", help="write <prefix>E.cpg, F.cpg, G.cpg")
    d = dsub.add_parser("revolve", help="graph of z = f(r), r = sqrt(x^2 + y^2)")
    d.set_defaults(_parser=d)
    d.add_argument("--f", help="profile in the variable x (read as r); default: the cone-cap profile")
    _common(d, "window", "n")
    d.add_argument("--out-prefix", help="write <prefix>E.cpg, F.cpg, G.cpg")
    d.add_argument("--svg", help="curvature heatmap (SVG)")
    return parser


def _emit(report: dict, pretty: bool, stream) -> None:
    stream.write(json.dumps(_clean(report), sort_keys=True, indent=2 if pretty else None, allow_nan=False) + "\n")


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    t0 = time.perf_counter()
    timer = _Timer()
    args = None
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # --help / --version
            return int(exc.code or 0)
        if not getattr(args, "command", None):
            raise UsageError("a subcommand is required", parser)
        echo, params, result = args.func(args, timer)
    except UsageError as exc:
        stderr.write(f"confplane: error: {exc}\n")
        (exc.parser or parser).print_help(stderr)
        return 1
    except (ExprSyntaxError, GridFormatError, FileNotFoundError) as exc:
        stderr.write(f"confplane: error: {exc}\n")
        return 1
    except (ExprDomainError, ExprError, MetricPositivityError, BeltramiError, ConvergenceError, ProfileError, FloatingPointError, ValueError) as exc:
        stderr.write(f"confplane: numeric failure: {exc}\n")
        report = {
            "schema_version": SCHEMA_VERSION,
            "tool": {"name": "confplane", "version": __version__},
            "command": _command_name(args),
            "error": {"type": type(exc).__name__, "message": str(exc)},
            "timings": {"total_s": time.perf_counter() - t0},
        }
        _emit(report, False, stdout)
        return 2
    timer.stages["total"] = time.perf_counter() - t0
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "confplane", "version": __version__},
        "command": _command_name(args),
        "input": echo,
        "parameters": params,
        "result": result,
        "timings": {f"{k}_s": v for k, v in timer.stages.items()},
    }
    _emit(report, args.pretty, stdout)
    return 0


def _command_name(args) -> str:
    if args is None:
        return ""
    action = getattr(args, "action", None)
    return f"{args.command} {action}" if action else args.command


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

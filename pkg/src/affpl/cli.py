"""Batch front end: parse a problem config, run, emit surface + report.

Usage: affpl <kind> --config <path> [--out-dir <path>] [--seed <int>]
       [--validate-only]

Kinds: ma-solve, bvp2, maximize, residual, legendre, diagnose. Outputs
are deterministic given config + seed: a surface table (x1,x2,u[,w], 17
significant digits, lattice row-major) and a flat key = value report with
a versioned schema line and the canonical config echo.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import diagnostics, functional, legendre
from .convexcore import ConvexGridFunction, normal_image_mass
from .errors import AffplError, ConfigError
from .expressions import compile_expression
from .lattice import GridDomain, build_domain, disc_domain, square_domain
from .solvers import (
    BVP2Problem,
    PenaltyProblem,
    MaximizeReport,
    affine_maximal_residual,
    maximize_variational,
    solve_ma_dirichlet,
    solve_second_bvp,
)

SCHEMA = "affpl-report v1"
KINDS = ("ma-solve", "bvp2", "maximize", "residual", "legendre", "diagnose")

_REQUIRED = {
    "ma-solve": ("domain", "h", "g"),
    "bvp2": ("domain", "h", "phi", "psi"),
    "maximize": ("domain", "h", "phi"),
    "residual": ("domain", "h", "u"),
    "legendre": ("domain", "h", "u"),
    "diagnose": ("domain", "h", "u"),
}


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config: top level must be an object")
    return cfg


def validate_config(cfg: dict, kind: str | None = None) -> list[str]:
    """Full parse and invariant check without running; returns violations."""
    problems: list[str] = []
    k = kind or cfg.get("kind")
    if k not in KINDS:
        problems.append(f"kind: must be one of {', '.join(KINDS)}")
        return problems
    for key in _REQUIRED[k]:
        if key not in cfg:
            problems.append(f"{key}: required for kind={k}")
    if problems:
        return problems
    try:
        _build_domain_from(cfg)
    except Exception as exc:
        problems.append(f"domain: {exc}")
    for key in ("phi", "psi", "f", "g", "u", "density", "exact"):
        if key in cfg and cfg[key] is not None:
            try:
                fn = compile_expression(cfg[key], key)
                fn(np.array([[0.0, 0.0], [0.5, -0.5]]))
            except ConfigError as exc:
                problems.append(str(exc))
    return problems


def _build_domain_from(cfg: dict, key: str = "domain") -> GridDomain:
    spec = cfg.get(key)
    h = cfg.get("h") if key == "domain" else spec.get("h", cfg.get("h"))
    if not isinstance(spec, dict):
        raise ConfigError(f"{key}: must be an object with a 'shape'")
    if not isinstance(h, (int, float)) or h <= 0:
        raise ConfigError("h: must be a positive number")
    shape = spec.get("shape")
    center = tuple(spec.get("center", (0.0, 0.0)))
    if shape == "square":
        size = spec.get("size")
        if not isinstance(size, (int, float)) or size <= 0:
            raise ConfigError(f"{key}.size: must be a positive half-side")
        return square_domain(float(size), float(h), center)
    if shape == "disc":
        size = spec.get("size")
        if not isinstance(size, (int, float)) or size <= 0:
            raise ConfigError(f"{key}.size: must be a positive radius")
        return disc_domain(float(size), float(h), center)
    if shape == "polygon":
        verts = spec.get("vertices")
        if not isinstance(verts, list) or len(verts) < 3:
            raise ConfigError(f"{key}.vertices: need at least 3 vertices")
        try:
            return build_domain(np.asarray(verts, dtype=float), float(h))
        except AffplError as exc:
            # name the first offending vertex index for reflex polygons
            arr = np.asarray(verts, dtype=float)
            v1 = np.roll(arr, -1, axis=0) - arr
            v2 = np.roll(arr, -2, axis=0) - np.roll(arr, -1, axis=0)
            cross = v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
            area = 0.5 * float(np.dot(arr[:, 0], np.roll(arr[:, 1], -1))
                               - np.dot(np.roll(arr[:, 0], -1), arr[:, 1]))
            sign = -1.0 if area < 0 else 1.0
            bad = np.flatnonzero(sign * cross < 0)
            where = f" at vertex index {int(bad[0] + 1)}" if len(bad) else ""
            raise ConfigError(f"{key}.vertices: {exc}{where}") from exc
    raise ConfigError(f"{key}.shape: must be square, disc, or polygon")


def _expr_field(cfg, key, domain, default=None):
    if key not in cfg or cfg[key] is None:
        if default is None:
            raise ConfigError(f"{key}: required")
        return np.full(domain.num_nodes, float(default))
    return compile_expression(cfg[key], key)(domain.nodes)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def write_report(path: str, cfg: dict, entries: dict) -> None:
    lines = [SCHEMA]
    lines.append("config = " + json.dumps(cfg, sort_keys=True, separators=(",", ":")))
    for key in entries:
        lines.append(f"{key} = {_fmt(entries[key])}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_surface(path: str, domain: GridDomain, u: np.ndarray,
                  w: np.ndarray | None = None) -> None:
    cols = ["x1", "x2", "u"] + (["w"] if w is not None else [])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for k in range(domain.num_nodes):
            row = [domain.nodes[k, 0], domain.nodes[k, 1], u[k]]
            if w is not None:
                row.append(w[k])
            fh.write(",".join("%.17g" % v for v in row) + "\n")


def read_surface(path: str):
    """Re-ingest a surface file: returns (nodes, u, w-or-None)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    nodes = data[:, :2]
    u = data[:, 2]
    w = data[:, 3] if len(header) > 3 else None
    return nodes, u, w


def _l2(values: np.ndarray, domain: GridDomain) -> float:
    ok = np.isfinite(values)
    if not np.any(ok):
        return float("nan")
    return float(np.sqrt(np.sum(values[ok] ** 2 * domain.cell_area[ok])))


def _residual_entries(res, domain, prefix="residual") -> dict:
    vals = res.values
    ok = np.isfinite(vals)
    return {
        f"{prefix}_sup": float(np.max(np.abs(vals[ok]))) if ok.any() else float("nan"),
        f"{prefix}_l2": _l2(np.where(ok, vals, 0.0), domain),
        f"{prefix}_nodes": int(ok.sum()),
        f"{prefix}_excluded": res.excluded,
    }


def run(kind: str, cfg: dict, out_dir: str, seed: int) -> dict:
    """Execute one problem; writes artifacts, returns the report entries."""
    problems = validate_config(cfg, kind)
    if problems:
        raise ConfigError("; ".join(problems))
    os.makedirs(out_dir, exist_ok=True)
    d = _build_domain_from(cfg)
    out = cfg.get("output", {})
    surface_path = os.path.join(out_dir, out.get("surface", "surface.txt"))
    report_path = os.path.join(out_dir, out.get("report", "report.txt"))
    rng = np.random.default_rng(seed)
    entries: dict = {"kind": kind, "seed": seed, "nodes": d.num_nodes,
                     "interior_nodes": int(d.interior.sum()), "h": d.h,
                     "threads": int(os.environ.get("AFFPL_THREADS", "1"))}

    if kind == "ma-solve":
        g = _expr_field(cfg, "g", d)
        info: dict = {}
        tol = cfg.get("tolerances", {}).get("tol_ma")
        if cfg.get("density") is not None:
            density = _expr_field(cfg, "density", d)
            u = solve_ma_dirichlet(d, g, masses=density * d.cell_area,
                                   tol_ma=tol, info=info)
        elif cfg.get("masses") is not None:
            u = solve_ma_dirichlet(d, g, masses=_expr_field(cfg, "masses", d),
                                   tol_ma=tol, info=info)
        else:
            raise ConfigError("density: one of density/masses required for ma-solve")
        entries["iterations"] = info.get("iterations", info.get("sweeps", 0))
        entries["mass_defect"] = info.get("mass_defect", float("nan"))
        if cfg.get("exact") is not None:
            exact = _expr_field(cfg, "exact", d)
            entries["sup_error_vs_exact"] = float(np.max(np.abs(u.values - exact)))
        fv = functional.functional_value(u, _expr_field(cfg, "f", d, default=0.0))
        entries.update(area=fv.area, load=fv.load, total=fv.total)
        write_surface(surface_path, d, u.values)

    elif kind == "bvp2":
        p = BVP2Problem.build(
            d,
            _expr_field(cfg, "phi", d),
            _expr_field(cfg, "psi", d),
            _expr_field(cfg, "f", d, default=0.0),
            steps=int(cfg.get("schedules", {}).get("steps", 8)),
            tol_fixed=float(cfg.get("tolerances", {}).get("tol_fixed", 1e-8)),
        )
        sol = solve_second_bvp(p)
        entries.update(
            iterations=sol.iterations, converged=sol.converged,
            w_min=sol.w_bounds[0], w_max=sol.w_bounds[1],
            w_bound_constant=max(sol.w_bounds[1], 1.0 / max(sol.w_bounds[0], 1e-300)),
            coupling_defect=sol.coupling_defect,
        )
        entries.update(_residual_entries(sol.residual_L, d))
        fv = functional.functional_value(sol.u, p.f)
        entries.update(area=fv.area, load=fv.load, total=fv.total)
        write_surface(surface_path, d, sol.u.values, sol.w)

    elif kind == "maximize":
        sched = cfg.get("schedules", {})
        prob = PenaltyProblem.build(
            d,
            _expr_field(cfg, "phi", d),
            _expr_field(cfg, "f", d, default=0.0),
            r_factor=float(sched.get("r_factor", 3.0)),
            k_schedule=tuple(sched.get("k", (4, 16, 64))),
            j_schedule=tuple(sched.get("j", (4, 8, 12))),
        )
        rep = MaximizeReport()
        u = maximize_variational(prob, init=cfg.get("init", "phik"), report=rep)
        trace = np.asarray(rep.j_trace)
        entries.update(
            sweeps=rep.sweeps,
            j_final=trace[-1] if len(trace) else float("nan"),
            j_monotone=bool(np.all(np.diff(trace) >= -1e-9 * (1 + np.abs(trace[:-1])))),
            penalty_margin=rep.penalty_margin,
            nonconvex_projections=rep.nonconvex_projections,
            boundary_trace_error=rep.boundary_trace_error,
            stalled=rep.stalled,
        )
        fvres = _fv_battery(u, rng)
        entries["optimality_residual"] = fvres
        fv = functional.functional_value(u, prob.f_omega)
        entries.update(area=fv.area, load=fv.load, total=fv.total)
        write_surface(surface_path, d, u.values)

    elif kind == "residual":
        u = ConvexGridFunction(d, _expr_field(cfg, "u", d))
        res = affine_maximal_residual(u, _expr_field(cfg, "f", d, default=0.0))
        entries.update(_residual_entries(res, d))
        ha = res.mean_curvature
        ok = np.isfinite(ha)
        entries["mean_curvature_sup"] = float(np.max(np.abs(ha[ok]))) if ok.any() else float("nan")
        write_surface(surface_path, d, u.values)

    elif kind == "legendre":
        u = ConvexGridFunction(d, _expr_field(cfg, "u", d))
        pair = legendre.DualPair.build(u)
        entries.update(
            dual_nodes=pair.dual.domain.num_nodes,
            dual_spacing=pair.dual.domain.h,
            biconjugate_defect=pair.biconjugate_defect(),
            primal_area=functional.affine_area(u),
            dual_area=legendre.dual_area(pair.dual),
        )
        if cfg.get("inner") is not None:
            inner = _build_domain_from(cfg, "inner")
            gap = legendre.duality_gap(pair, inner)
            entries.update(gap_primal=gap["primal"], gap_dual=gap["dual"],
                           gap_abs=gap["gap"], gap_relative=gap["relative"])
        write_surface(surface_path, pair.dual.domain, pair.dual.values)

    elif kind == "diagnose":
        u = ConvexGridFunction(d, _expr_field(cfg, "u", d))
        det_rep = diagnostics.det_bounds_check(u, _expr_field(cfg, "f", d, default=0.0))
        sc = diagnostics.strict_convexity_report(u)
        gi = diagnostics.gauss_image_check(u)
        meas = normal_image_mass(u, require_convex=False)
        entries.update(
            det_upper_ok=det_rep.upper_ok, det_lower_ok=det_rep.lower_ok,
            det_lower_min=det_rep.lower_min, sup_du=det_rep.sup_du,
            alpha_plus=sc.growth.alpha_plus, alpha_minus=sc.growth.alpha_minus,
            alpha_in_band=sc.growth.in_band, segment_flag=sc.segment_flag,
            sublevel_nested=sc.sublevel.nested,
            gauss_aperture=gi.aperture, gauss_circumradius=gi.circumradius,
            hemisphere_risk=gi.hemisphere_risk,
            total_mass=meas.total_mass(),
            singular_mass=float(np.sum(meas.singular[d.interior])),
        )
        write_surface(surface_path, d, u.values)
    else:
        raise ConfigError(f"kind: unknown kind {kind}")

    write_report(report_path, cfg, entries)
    return entries


def _fv_battery(u: ConvexGridFunction, rng, count: int = 50) -> float:
    """Max normalized first variation over a battery of interior bumps."""
    d = u.domain
    ki = d.interior_idx
    from . import _geom

    inset = _geom.signed_inset_distance(d.nodes, d.polygon)
    centers = ki[inset[ki] > 4 * d.h]
    if len(centers) == 0:
        centers = ki
    worst = 0.0
    for _ in range(count):
        c = d.nodes[centers[rng.integers(0, len(centers))]]
        r = 2 * d.h + rng.uniform(0, 2 * d.h)
        r2 = np.sum((d.nodes - c) ** 2, axis=1)
        eta = np.where(r2 < r * r, (r * r - r2) ** 2, 0.0) / r ** 4
        norm = functional.integrate(np.abs(eta), d)
        if norm <= 0:
            continue
        try:
            fv = functional.first_variation(u, eta)
        except AffplError:
            continue
        worst = max(worst, abs(fv) / norm)
    return worst


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="affpl", description="Affine Plateau problem toolbox"
    )
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--config", required=True)
    parser.add_argument("--out-dir", default=".")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--validate-only", action="store_true")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.validate_only:
            problems = validate_config(cfg, args.kind)
            if problems:
                for p in problems:
                    print(p)
            else:
                print("ok: no violations")
            return 0
        entries = run(args.kind, cfg, args.out_dir, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AffplError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    for k, v in entries.items():
        print(f"{k} = {_fmt(v)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

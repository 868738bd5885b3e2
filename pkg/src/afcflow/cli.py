"""Command line front end.

Subcommands: ``mesh-info``, ``run``, ``dmp``, ``temporal``, ``spatial``.
Any long option can also be given in a ``--config`` file of ``key = value``
lines (``#`` starts a comment, dashes or underscores in keys); options on the
command line take precedence.

Exit status: 0 on success, 2 for configuration errors, 3 when a solver fails.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from . import experiments, fem
from .fem import ConvergenceError
from .mesh import build_uniform_mesh, mesh_quality, write_mesh
from .problems import PROBLEMS, get_problem
from .stabilization import write_limiter_csv
from .timestepping import VARIANTS, DivergenceError, Integrator, SchemeConfig

EXIT_CONFIG = 2
EXIT_SOLVER = 3


class ConfigError(ValueError):
    pass


def read_config(path) -> dict:
    out = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _int_list(text):
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}") from None


def _schemes(text):
    names = [s.strip().replace("-", "_") for s in str(text).split(",") if s.strip()]
    for s in names:
        if s not in VARIANTS:
            raise ConfigError(f"unknown scheme {s!r}; choose from {', '.join(VARIANTS)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="afcflow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value file with defaults for any option")
        p.add_argument("--out", help="CSV output path")
        return p

    p = common(sub.add_parser("mesh-info", help="mesh statistics"))
    p.add_argument("--m", help="subdivisions per side")
    p.add_argument("--dump", help="write the mesh in plain-text form")

    p = common(sub.add_parser("run", help="single run"))
    p.add_argument("--problem")
    p.add_argument("--scheme", help=f"one of {', '.join(VARIANTS)}")
    p.add_argument("--m")
    p.add_argument("--n0", help="number of time steps")
    p.add_argument("--cfl", help="k = cfl * h0 (used when --n0 is absent)")
    p.add_argument("--t-final")
    p.add_argument("--dump-limiter", help="CSV path for the final limiter state")

    p = common(sub.add_parser("dmp", help="bound-preservation table"))
    p.add_argument("--m")
    p.add_argument("--steps")
    p.add_argument("--flux")
    p.add_argument("--initial")
    p.add_argument("--scheme")

    p = common(sub.add_parser("temporal", help="temporal convergence study"))
    p.add_argument("--problem")
    p.add_argument("--scheme", help="comma-separated schemes")
    p.add_argument("--m")
    p.add_argument("--n0", help="comma-separated step counts")
    p.add_argument("--ref-n0")
    p.add_argument("--t-final")

    p = common(sub.add_parser("spatial", help="spatial convergence study"))
    p.add_argument("--problem")
    p.add_argument("--scheme", help="comma-separated schemes")
    p.add_argument("--m", help="comma-separated mesh sizes")
    p.add_argument("--cfl")
    p.add_argument("--t-final")
    return parser


def _merged(args) -> dict:
    opts = {}
    if getattr(args, "config", None):
        opts.update(read_config(args.config))
    for key, value in vars(args).items():
        if value is not None:
            opts[key] = value
    return opts


def _get(opts, key, default=None, cast=str):
    value = opts.get(key, default)
    if value is None:
        return None
    try:
        return cast(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {value!r}") from None


def cmd_mesh_info(opts, out):
    mesh = build_uniform_mesh(_get(opts, "m", 10, int))
    gamma, rho = mesh_quality(mesh)
    print(f"nodes: {mesh.n_nodes}", file=out)
    print(f"triangles: {mesh.n_triangles}", file=out)
    print(f"interior nodes: {mesh.interior_ids.size}", file=out)
    print(f"edges: {mesh.edges.shape[0]}", file=out)
    print(f"h0={mesh.h0:g}", file=out)
    print(f"h={mesh.h:.6g}", file=out)
    print(f"shape regularity={gamma:.6g} quasi-uniformity={rho:.6g}", file=out)
    if opts.get("dump"):
        write_mesh(mesh, opts["dump"])
    return 0


def cmd_run(opts, out):
    problem = get_problem(_get(opts, "problem", "advect-13"))
    scheme = _schemes(_get(opts, "scheme", "afc"))
    if len(scheme) != 1:
        raise ConfigError("run takes exactly one scheme")
    mesh = build_uniform_mesh(_get(opts, "m", 20, int))
    t_final = _get(opts, "t_final", problem.t_final, float)
    n0 = _get(opts, "n0", None, int)
    cfl = _get(opts, "cfl", None if n0 else 0.1, float)
    case = problem.case
    cfg = SchemeConfig(scheme[0], mesh, problem.flux, t_final, n0=n0, cfl=cfl,
                       source=case.source if case else None)
    u0 = fem.interpolate(mesh, problem.initial, problem.initial.zero_boundary)
    integ = Integrator(cfg)
    k, steps = cfg.time_step()
    final, report = integ.integrate(u0)
    print(f"problem={problem.name} scheme={cfg.variant} M={mesh.M} k={k:.6g} steps={steps}",
          file=out)
    print(f"min={final.min():.6e} max={final.max():.6e} "
          f"bounds=[{report.g_min:.6e}, {report.g_max:.6e}] "
          f"{'kept' if report.within_bounds else 'violated'}", file=out)
    if case is not None:
        err = fem.l2_error(mesh, final, case.exact, t_final)
        print(f"L2 error={err:.6e}", file=out)
    if opts.get("out"):
        with open(opts["out"], "w", newline="") as fh:
            out_csv = csv.writer(fh, lineterminator="\n")
            out_csv.writerow(["x", "y", "value"])
            out_csv.writerows(np.column_stack([mesh.nodes, final]).tolist())
    if opts.get("dump_limiter"):
        fluxes, factors = integ.limiter(final, t_final)
        write_limiter_csv(mesh, factors, fluxes, opts["dump_limiter"])
    return 0


def cmd_dmp(opts, out):
    table = experiments.dmp_table(
        M=_get(opts, "m", 10, int),
        steps=_get(opts, "steps", 10, int),
        flux=_get(opts, "flux", "advect-13"),
        initial=_get(opts, "initial", "gauss"),
        variants=_schemes(_get(opts, "scheme", "standard,afc")),
    )
    print(f"k={table.k:.6g}", file=out)
    print(experiments.format_dmp(table), file=out)
    if opts.get("out"):
        with open(opts["out"], "w", newline="") as fh:
            variants = list(table.values)
            out_csv = csv.writer(fh, lineterminator="\n")
            out_csv.writerow(["x"] + variants)
            cols = [table.x] + [table.values[v] for v in variants]
            out_csv.writerows(np.column_stack(cols).tolist())
    return 0


def _emit(tables, problem, kind, opts, out):
    print(f"problem={problem}", file=out)
    print(experiments.format_table(tables, kind), file=out)
    if opts.get("out"):
        experiments.write_csv(tables, problem, opts["out"])
    failed = any(row.note for rows in tables.values() for row in rows)
    return EXIT_SOLVER if failed else 0


def cmd_temporal(opts, out):
    problem = _get(opts, "problem", "advect-13")
    tables = experiments.temporal_convergence(
        problem,
        variants=_schemes(_get(opts, "scheme", "standard,afc")),
        M=_get(opts, "m", 50, int),
        n0_list=_get(opts, "n0", None, _int_list),
        ref_n0=_get(opts, "ref_n0", None, int),
        t_final=_get(opts, "t_final", None, float),
    )
    return _emit(tables, problem, "N0", opts, out)


def cmd_spatial(opts, out):
    problem = _get(opts, "problem", "trig-advect")
    tables = experiments.spatial_convergence(
        problem,
        variants=_schemes(_get(opts, "scheme", "standard,afc")),
        m_list=_get(opts, "m", "10,20,40,80", _int_list),
        cfl=_get(opts, "cfl", 0.1, float),
        t_final=_get(opts, "t_final", 0.01, float),
    )
    return _emit(tables, problem, "h0", opts, out)


COMMANDS = {
    "mesh-info": cmd_mesh_info,
    "run": cmd_run,
    "dmp": cmd_dmp,
    "temporal": cmd_temporal,
    "spatial": cmd_spatial,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](_merged(args), out)
    except (DivergenceError, ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

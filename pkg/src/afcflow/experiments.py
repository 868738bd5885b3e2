"""Convergence studies, the bound-preservation table, and table output."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import fem
from .fem import ConvergenceError
from .mesh import build_uniform_mesh
from .problems import builtin_flux, builtin_initial, get_problem
from .timestepping import DivergenceError, Integrator, SchemeConfig


@dataclass
class ConvergenceRow:
    resolution: float
    error: float
    order: float | None = None
    note: str = ""


def compute_orders(errors, ratio: float = 2.0) -> list:
    """Observed orders ``log(e_{k-1}/e_k) / log(ratio)``; ``None`` where undefined."""
    if not ratio > 1.0:
        raise ValueError("refinement ratio must exceed 1")
    orders = [None]
    for prev, cur in zip(errors[:-1], errors[1:]):
        if prev is None or cur is None or not (prev > 0.0 and cur > 0.0):
            orders.append(None)
        elif not (math.isfinite(prev) and math.isfinite(cur)):
            orders.append(None)
        else:
            orders.append(math.log(prev / cur) / math.log(ratio))
    return orders


def _rows(resolutions, errors, ratio=2.0, notes=None):
    orders = compute_orders(errors, ratio)
    notes = notes or [""] * len(errors)
    return [ConvergenceRow(r, e, o, n) for r, e, o, n in zip(resolutions, errors, orders, notes)]


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("AFC_THREADS", "1")))
    except ValueError:
        return 1


def _map(func, jobs):
    workers = min(worker_count(), len(jobs))
    if workers <= 1:
        return [func(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, *zip(*jobs)))


def _temporal_variant(problem_name, variant, M, n0_list, ref_n0, t_final):
    problem = get_problem(problem_name)
    mesh = build_uniform_mesh(M)
    u0 = fem.interpolate(mesh, problem.initial, problem.initial.zero_boundary)
    mass = fem.assemble_mass(mesh)

    def solve(n0):
        cfg = SchemeConfig(variant, mesh, problem.flux, t_final, n0=n0,
                           source=problem.case.source if problem.case else None)
        return Integrator(cfg).integrate(u0)[0]

    try:
        reference = solve(ref_n0)
    except (DivergenceError, ConvergenceError) as exc:
        return [ConvergenceRow(n, math.nan, None, f"reference failed: {exc}") for n in n0_list]
    errors, notes = [], []
    for n0 in n0_list:
        try:
            errors.append(fem.discrete_l2_norm(mass, solve(n0) - reference))
            notes.append("")
        except (DivergenceError, ConvergenceError) as exc:
            errors.append(math.nan)
            notes.append(f"diverged: {exc}")
    return _rows(n0_list, errors, 2.0, notes)


def temporal_convergence(problem: str, variants=("standard", "afc"), M: int = 50,
                         n0_list=None, ref_n0=None, t_final=None) -> dict:
    """Temporal errors against a fine-step reference computed with the same scheme.

    Errors are ``sqrt(e^T M e)`` at the final time, with ``e`` the coefficient
    difference to the reference.
    """
    p = get_problem(problem)
    n0_list = list(n0_list or p.n0_list)
    ref_n0 = int(ref_n0 or p.ref_n0)
    t_final = float(t_final or p.t_final)
    if not n0_list:
        raise ValueError(f"problem {problem!r} has no default step counts; pass n0_list")
    if ref_n0 <= max(n0_list):
        raise ValueError("reference N0 must exceed every study N0")
    ratios = {b / a for a, b in zip(n0_list[:-1], n0_list[1:])}
    if ratios and ratios != {2.0}:
        raise ValueError("study N0 values must double from one level to the next")
    jobs = [(problem, v, M, n0_list, ref_n0, t_final) for v in variants]
    return dict(zip(variants, _map(_temporal_variant, jobs)))


def _spatial_variant(problem_name, variant, m_list, cfl, t_final):
    case = get_problem(problem_name).case
    errors, notes = [], []
    for M in m_list:
        mesh = build_uniform_mesh(M)
        u0 = fem.interpolate(mesh, case.initial)
        cfg = SchemeConfig(variant, mesh, case.flux, t_final, cfl=cfl, source=case.source)
        try:
            final = Integrator(cfg).integrate(u0)[0]
            errors.append(fem.l2_error(mesh, final, case.exact, t_final))
            notes.append("")
        except (DivergenceError, ConvergenceError) as exc:
            errors.append(math.nan)
            notes.append(f"diverged: {exc}")
    return _rows([1.0 / M for M in m_list], errors, 2.0, notes)


def spatial_convergence(problem: str, variants=("standard", "afc"), m_list=(10, 20, 40, 80),
                        cfl: float = 0.1, t_final: float = 0.01) -> dict:
    """Errors against the manufactured solution with ``k = cfl * h0``."""
    p = get_problem(problem)
    if p.case is None:
        raise ValueError(f"problem {problem!r} has no exact solution")
    m_list = list(m_list)
    ratios = {b / a for a, b in zip(m_list[:-1], m_list[1:])}
    if ratios and ratios != {2.0}:
        raise ValueError("mesh sizes must double from one level to the next")
    jobs = [(problem, v, m_list, cfl, t_final) for v in variants]
    return dict(zip(variants, _map(_spatial_variant, jobs)))


@dataclass
class DMPTable:
    x: np.ndarray
    values: dict  # variant -> coefficients along the sampled line
    reports: dict  # variant -> StepReport
    y: float
    k: float


def dmp_table(M: int = 10, steps: int = 10, flux: str = "advect-13", initial: str = "gauss",
              exponent: float = 1.01, y: float = 0.1, variants=("standard", "afc")) -> DMPTable:
    """Final coefficients along the grid line ``y`` after ``steps`` steps.

    The step is ``k = h**exponent / 10`` with ``h`` the triangle diameter.
    """
    mesh = build_uniform_mesh(M)
    q = int(round(y * M))
    if not math.isclose(q / M, y, abs_tol=1e-12):
        raise ValueError(f"y={y} is not a grid line of the M={M} mesh")
    k = mesh.h**exponent / 10.0
    fl, u0f = builtin_flux(flux), builtin_initial(initial)
    u0 = fem.interpolate(mesh, u0f, u0f.zero_boundary)
    line = np.arange(M + 1) + q * (M + 1)
    values, reports = {}, {}
    for v in variants:
        final, rep = Integrator(SchemeConfig(v, mesh, fl, steps * k, n0=steps)).integrate(u0)
        values[v] = final[line]
        reports[v] = rep
    return DMPTable(mesh.nodes[line, 0], values, reports, y, k)


def fmt(value, precision=4) -> str:
    """Scientific notation with ``precision`` decimals; ``repr`` when None."""
    if value is None:
        return ""
    if precision is None:
        return repr(float(value))
    return f"{value:.{precision}e}"


def fmt_order(order, precision=4) -> str:
    if order is None:
        return ""
    if precision is None:
        return repr(float(order))
    return f"{order:.{precision}f}"


def fmt_resolution(res, kind) -> str:
    if kind == "h0":
        return f"1/{round(1.0 / res)}"
    return str(int(res))


def format_table(tables: dict, kind: str = "N0") -> str:
    """Aligned text with one error/order column pair per variant."""
    variants = list(tables)
    header = [kind]
    for v in variants:
        header += [v, "order"]
    lines = [header]
    n = len(next(iter(tables.values()))) if tables else 0
    for r in range(n):
        row = [fmt_resolution(tables[variants[0]][r].resolution, kind)]
        for v in variants:
            cell = tables[v][r]
            row += [fmt(cell.error) if cell.error == cell.error else "diverged",
                    fmt_order(cell.order)]
        lines.append(row)
    widths = [max(len(line[c]) for line in lines) for c in range(len(header))]
    return "\n".join("  ".join(s.rjust(w) for s, w in zip(line, widths)) for line in lines)


def write_csv(tables: dict, problem: str, path) -> None:
    with open(path, "w") as fh:
        fh.write("resolution,error,order,variant,problem\n")
        for variant, rows in tables.items():
            for row in rows:
                fh.write(
                    f"{float(row.resolution)!r},{fmt(row.error, None)},"
                    f"{fmt_order(row.order, None)},{variant},{problem}\n"
                )


def format_dmp(table: DMPTable) -> str:
    variants = list(table.values)
    lines = [["x"] + variants]
    for i, x in enumerate(table.x):
        lines.append([f"{x:.1f}"] + [fmt(table.values[v][i]) for v in variants])
    widths = [max(len(line[c]) for line in lines) for c in range(len(lines[0]))]
    body = "\n".join("  ".join(s.rjust(w) for s, w in zip(line, widths)) for line in lines)
    flags = []
    for v in variants:
        neg = int(np.sum(table.values[v] < 0.0))
        flags.append(f"{v}: {neg} negative value(s) on y={table.y:g}, "
                     f"bounds {'kept' if table.reports[v].within_bounds else 'violated'}")
    return body + "\n" + "\n".join(flags)

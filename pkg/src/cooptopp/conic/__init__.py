"""Conic programs and the solve contract shared by all backends."""

from __future__ import annotations

import time

import numpy as np
import scipy.sparse as sp

from ..errors import ConfigError
from .ipm import SolveReport, SolverSettings, primal_residual, solve_ipm, standard_form
from .program import Cone, ConicProgram, ProgramBuilder, dump, dumps, load, loads, validate


def solve_clarabel(program: ConicProgram, settings: SolverSettings = SolverSettings()) -> SolveReport:
    """Adapter for the external Clarabel solver (optional dependency)."""
    try:
        import clarabel
    except ImportError:
        raise ConfigError("backend 'clarabel' requested but the clarabel package is not installed") from None
    t0 = time.perf_counter()
    sf = standard_form(program)
    if sf.infeasible:
        return SolveReport("infeasible", None, message=f"presolve: {sf.infeasible}", backend="clarabel")
    n = sf.c.size
    A = sp.vstack([sf.A, sf.G]).tocsc()
    rhs = np.concatenate([sf.b, sf.h])
    cones = []
    if sf.b.size:
        cones.append(clarabel.ZeroConeT(sf.b.size))
    if sf.cones.l:
        cones.append(clarabel.NonnegativeConeT(sf.cones.l))
    for g in sf.cones.groups:
        cones.extend(clarabel.SecondOrderConeT(g.dim) for _ in range(g.count))
    opts = clarabel.DefaultSettings()
    opts.verbose = settings.verbose
    opts.max_iter = settings.max_iter
    opts.tol_feas = opts.tol_gap_rel = opts.tol_gap_abs = settings.tol
    sol = clarabel.DefaultSolver(sp.csc_matrix((n, n)), sf.c, A, rhs, cones, opts).solve()
    name = str(sol.status)
    status = {"Solved": "optimal", "PrimalInfeasible": "infeasible", "DualInfeasible": "unbounded",
              "MaxIterations": "max-iter"}.get(name, "numerical-failure")
    report = SolveReport(status, None, backend="clarabel", iterations=int(sol.iterations),
                         time=time.perf_counter() - t0, message=name)
    if status != "optimal":
        return report
    x = np.empty(program.n)
    x[sf.keep] = np.asarray(sol.x)
    x[sf.fixed] = sf.fixed_values
    z_all = np.asarray(sol.z)
    y = np.zeros(program.m)
    y[sf.rows] = z_all[:sf.b.size]
    report.x, report.y, report.z = x, y, z_all[sf.b.size:]
    report.objective = program.objective(x)
    report.primal_residual = primal_residual(program, x)
    report.gap = abs(sol.obj_val - sol.obj_val_dual) / max(1.0, abs(sol.obj_val))
    return report


BACKENDS = {"ipm": solve_ipm, "clarabel": solve_clarabel}


def solve(program: ConicProgram, settings: SolverSettings = SolverSettings()) -> SolveReport:
    """Solve ``program`` with the backend named in ``settings`` (default: built-in IPM)."""
    try:
        backend = BACKENDS[settings.backend]
    except KeyError:
        raise ConfigError(f"unknown solver backend {settings.backend!r}; known: {sorted(BACKENDS)}") from None
    return backend(program, settings)


__all__ = ["Cone", "ConicProgram", "ProgramBuilder", "SolveReport", "SolverSettings", "solve",
           "solve_ipm", "solve_clarabel", "validate", "dump", "dumps", "load", "loads",
           "primal_residual", "standard_form"]

"""Scenario files and the end-to-end pipeline behind the command-line tool.

A scenario is a TOML document naming the robots, the carried object, the path,
the grid, the grasp contacts and the solver settings. ``run_scenario`` walks it
through the pipeline stages model -> IK -> coefficients -> build -> solve ->
audit; any failure leaves with the name of the stage it came from.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .conic import SolverSettings, dump
from .errors import ConfigError, CoopToppError, InfeasibleError, SolverError
from .grasp import AXES, ContactModel
from .manipulators import build_model
from .oracles import audit_coverage, audit_passed, audit_rows, constraint_audit
from .paths import (CATALOG, PathGrid, catalog_path, coupled_pose, linear_path, load_path_csv,
                    polynomial_path, sweep_inverse_kinematics)
from .rigid import GraspOffset, RigidObjectModel
from .transcription import (active_constraint_report, assemble_coefficients, build_program,
                            parse_mode, recover_trajectory, solve_program)

__version__ = "0.1.0"

MIN_GRID = 10
BUILTIN = ("pointmass-rail", "stanford-duo", "planar-3r-duo", "lift")


# --- configuration ----------------------------------------------------------------

@dataclass
class ScenarioConfig:
    """Resolved scenario: everything needed to reproduce a run."""

    name: str
    robots: list
    object: dict
    path: object
    grid: int = 80
    mode: str = "rigid"
    sdot0: float = 0.0
    sdotT: float = 0.0
    solver: dict = field(default_factory=dict)
    active_tol: float = 1e-3
    audit_tol: float = 1e-6
    strict_euler: bool = False
    compare_paths: list = field(default_factory=list)
    compare_modes: list = field(default_factory=lambda: ["rigid"])
    bench_grids: list = field(default_factory=lambda: [30, 100, 300, 1000])
    seed: int = 0
    out: Optional[str] = None
    description: str = ""
    base_dir: Optional[str] = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.robots:
            raise ConfigError("scenario lists no robots")
        if int(self.grid) != self.grid or self.grid < MIN_GRID:
            raise ConfigError(f"grid K must be an integer >= {MIN_GRID}, got {self.grid}")
        self.grid = int(self.grid)
        for mode in [self.mode, *self.compare_modes]:
            check_mode_contacts(mode, self.robots)
        for entry in self.robots:
            build_robot(entry)
        if self.sdot0 < 0 or self.sdotT < 0:
            raise ConfigError("boundary path velocities must be nonnegative")
        if not self.active_tol > 0:
            raise ConfigError("active-constraint tolerance must be positive")
        try:
            self.solver_settings()
        except TypeError as exc:
            raise ConfigError(f"[solver]: {exc}") from None

    def solver_settings(self) -> SolverSettings:
        return SolverSettings(**self.solver)

    def identity(self) -> dict:
        """The fields that determine the numbers (output location excluded)."""
        keys = ("name", "robots", "object", "path", "grid", "mode", "sdot0", "sdotT", "solver",
                "active_tol", "audit_tol", "strict_euler", "seed")
        return {k: getattr(self, k) for k in keys}

    def config_hash(self) -> str:
        blob = json.dumps(self.identity(), sort_keys=True, default=_jsonable)
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, **kw) -> "ScenarioConfig":
        cfg = copy.deepcopy(self)
        for key, value in kw.items():
            if value is None:
                continue
            if key == "solver_tol":
                cfg.solver = dict(cfg.solver, tol=float(value))
            elif key == "path":
                cfg.path = value
            elif not hasattr(cfg, key):
                raise ConfigError(f"unknown override {key!r}")
            else:
                setattr(cfg, key, value)
        cfg.validate()
        return cfg


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(f"not serializable: {type(v)}")


def check_mode_contacts(mode: str, robots: Sequence[dict]):
    """Frictional mode needs a non-rigid contact on every robot."""
    kind, _ = parse_mode(mode)
    if kind != "frictional":
        return
    for r in robots:
        contact = r.get("contact")
        if contact is None or contact.get("kind", "rigid") == "rigid":
            raise ConfigError(f"mode {mode!r} needs a frictional contact on robot "
                              f"{r.get('name', '?')!r}; rigid or missing contacts only support "
                              "rigid and fixed modes")


def scenario_file(name: str) -> Path:
    """Locate a scenario by file path or built-in name."""
    p = Path(name)
    if p.suffix == ".toml" and p.exists():
        return p
    ref = resources.files("cooptopp") / "scenarios" / f"{name}.toml"
    if ref.is_file():
        return Path(str(ref))
    raise ConfigError(f"no scenario file {name!r}; built-in scenarios: {', '.join(BUILTIN)}")


def _read_toml(path: Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None


KNOWN_KEYS = {"name", "description", "robots", "object", "path", "grid", "mode", "boundary",
              "solver", "active_tol", "audit_tol", "strict_euler", "compare", "bench", "seed"}


def load_scenario(name: str) -> ScenarioConfig:
    path = scenario_file(name)
    doc = _read_toml(path)
    unknown = set(doc) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    base = path.parent
    robots = []
    for r in doc.get("robots", []):
        r = dict(r)
        if "file" in r:
            # a model file supplies defaults, the scenario entry overrides them
            inc = _read_toml(base / r.pop("file"))
            r = {**inc, **r}
        robots.append(r)
    boundary = doc.get("boundary", {})
    compare = doc.get("compare", {})
    bench = doc.get("bench", {})
    try:
        return ScenarioConfig(
            name=doc.get("name", path.stem), description=doc.get("description", ""),
            robots=robots, object=doc.get("object", {}), path=doc.get("path", "P.1"),
            grid=doc.get("grid", 80), mode=doc.get("mode", "rigid"),
            sdot0=float(boundary.get("sdot0", 0.0)), sdotT=float(boundary.get("sdotT", 0.0)),
            solver=dict(doc.get("solver", {})), active_tol=float(doc.get("active_tol", 1e-3)),
            audit_tol=float(doc.get("audit_tol", 1e-6)),
            strict_euler=bool(doc.get("strict_euler", False)),
            compare_paths=list(compare.get("paths", [])),
            compare_modes=list(compare.get("modes", ["rigid"])),
            bench_grids=list(bench.get("grids", [30, 100, 300, 1000])),
            seed=int(doc.get("seed", 0)), base_dir=str(base))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


# --- builders ----------------------------------------------------------------------

ROBOT_META = {"name", "kind", "contact", "grasp", "ik_hint", "torque_limit"}


def build_robot(entry: dict):
    params = {k: v for k, v in entry.items() if k not in ROBOT_META}
    if "torque_limit" in entry:
        lim = np.asarray(entry["torque_limit"], dtype=float)
        params["torque_lower"], params["torque_upper"] = -lim, lim
    for key in ("base_position", "torque_lower", "torque_upper", "velocity_bound", "axis"):
        if key in params:
            params[key] = np.asarray(params[key], dtype=float)
    if "kind" not in entry:
        raise ConfigError(f"robot {entry.get('name', '?')!r} has no kind")
    try:
        return build_model(entry["kind"], name=entry.get("name", entry["kind"]), **params)
    except TypeError as exc:
        raise ConfigError(f"robot {entry.get('name', '?')!r}: {exc}") from None


def build_object(spec: dict, robots: Sequence[dict]) -> RigidObjectModel:
    offsets = []
    for r in robots:
        g = r.get("grasp", {})
        offsets.append(GraspOffset(g.get("position", (0, 0, 0)), g.get("orientation", (0, 0, 0))))
    if "mass" not in spec:
        raise ConfigError("[object] needs a mass")
    gravity = spec.get("gravity", (0.0, 0.0, -9.81))
    if "inertia" in spec:
        return RigidObjectModel(float(spec["mass"]), np.asarray(spec["inertia"], float),
                                np.asarray(gravity, float), tuple(offsets))
    if "dims" in spec:
        return RigidObjectModel.cuboid(float(spec["mass"]), spec["dims"], offsets, gravity)
    raise ConfigError("[object] needs either dims (cuboid) or an inertia matrix")


def build_path(spec, base_dir: Optional[str] = None):
    if isinstance(spec, str):
        if spec in CATALOG:
            return catalog_path(spec)
        p = Path(spec)
        if not p.is_absolute() and base_dir and not p.exists():
            p = Path(base_dir) / p
        if p.suffix == ".csv":
            if not p.exists():
                raise ConfigError(f"path file {spec!r} not found")
            return load_path_csv(p)
        raise ConfigError(f"path {spec!r} is neither a catalog name ({', '.join(sorted(CATALOG))}) "
                          "nor a CSV file")
    kind = spec.get("kind")
    if kind == "linear":
        return linear_path(spec["start"], spec["end"], spec.get("euler", (0, 0, 0)),
                           name=spec.get("name", "line"))
    if kind == "polynomial":
        return polynomial_path(spec["position"], spec["euler"], name=spec.get("name", "poly"))
    if kind in ("catalog", "csv"):
        return build_path(spec["name"] if kind == "catalog" else spec["file"], base_dir)
    raise ConfigError(f"unknown path kind {kind!r}; expected linear, polynomial, catalog or csv")


def path_label(spec) -> str:
    if isinstance(spec, str):
        return spec
    return spec.get("name", spec.get("kind", "path"))


def _contact_rotation(normal, axis: str, tangent):
    """Contact frame with the normal on ``axis`` and ``tangent`` on the next axis."""
    n = np.asarray(normal, float)
    n = n / np.linalg.norm(n)
    t = np.asarray(tangent, float)
    t = t - (t @ n) * n
    if np.linalg.norm(t) < 1e-9:
        raise ConfigError("contact tangent is parallel to the normal")
    t /= np.linalg.norm(t)
    a = AXES[axis]
    R = np.zeros((3, 3))
    R[:, a], R[:, (a + 1) % 3], R[:, (a + 2) % 3] = n, t, np.cross(n, t)
    return R


def build_contacts(robots: Sequence[dict]) -> list:
    out = []
    for r in robots:
        c = dict(r.get("contact", {"kind": "rigid"}))
        tangent = c.pop("tangent", None)
        if tangent is not None:
            c["rotation"] = _contact_rotation(c.get("normal", (1, 0, 0)),
                                              c.get("normal_axis", "z"), tangent)
        try:
            out.append(ContactModel(**c))
        except TypeError as exc:
            raise ConfigError(f"contact of robot {r.get('name', '?')!r}: {exc}") from None
    return out


# --- pipeline ----------------------------------------------------------------------

@contextmanager
def stage(name: str, timings: Optional[dict] = None):
    """Tag any pipeline error raised inside with ``name`` and time the block."""
    t0 = time.perf_counter()
    try:
        yield
    except CoopToppError as exc:
        if "stage" not in exc.__dict__:
            exc.stage = name
        raise
    finally:
        if timings is not None:
            timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0


@dataclass
class Prepared:
    """Models, sampled joint path and path coefficients shared by several solves."""

    models: list
    obj: RigidObjectModel
    path: object
    contacts: list
    sampled: object
    coefs: object
    timings: dict


def prepare(cfg: ScenarioConfig, path_spec=None, grid: Optional[int] = None) -> Prepared:
    timings: dict = {}
    path_spec = cfg.path if path_spec is None else path_spec
    K = cfg.grid if grid is None else grid
    with stage("model", timings):
        models = [build_robot(r) for r in cfg.robots]
        obj = build_object(cfg.object, cfg.robots)
        contacts = build_contacts(cfg.robots)
        path = build_path(path_spec, cfg.base_dir)
    with stage("IK", timings):
        q0 = []
        for i, (m, r) in enumerate(zip(models, cfg.robots)):
            hint = r.get("ik_hint")
            q0.append(m.inverse_kin(coupled_pose(path, obj, i, 0.0),
                                    None if hint is None else np.asarray(hint, float)))
        sampled = sweep_inverse_kinematics(models, path, obj, PathGrid(K), q0)
    with stage("coefficients", timings):
        coefs = assemble_coefficients(models, obj, path, PathGrid(K), sampled,
                                      strict_euler=cfg.strict_euler)
    return Prepared(models, obj, path, contacts, sampled, coefs, timings)


@dataclass
class RunResult:
    config: ScenarioConfig
    mode: str
    prepared: Prepared
    program: object
    report: object
    solution: object
    active: object
    audit: list
    timings: dict

    @property
    def T(self) -> float:
        return self.solution.T

    @property
    def audit_ok(self) -> bool:
        return audit_passed(self.audit)


def solve_prepared(cfg: ScenarioConfig, prep: Prepared, mode: Optional[str] = None,
                   audit: bool = True) -> RunResult:
    mode = cfg.mode if mode is None else mode
    timings = dict(prep.timings)
    with stage("build", timings):
        check_mode_contacts(mode, cfg.robots)
        tp = build_program(mode, prep.coefs, prep.contacts, cfg.sdot0, cfg.sdotT)
    with stage("solve", timings):
        report = solve_program(tp, cfg.solver_settings())
        if report.status == "infeasible":
            raise InfeasibleError(f"program infeasible: {report.message}")
        sol = recover_trajectory(report, tp)
        active = active_constraint_report(sol, prep.coefs, cfg.active_tol)
    results = []
    if audit:
        with stage("audit", timings):
            results = constraint_audit(sol, tp, prep.models, prep.obj, prep.path, cfg.audit_tol)
    return RunResult(cfg, mode, prep, tp, report, sol, active, results, timings)


def run_scenario(cfg: ScenarioConfig, mode: Optional[str] = None) -> RunResult:
    return solve_prepared(cfg, prepare(cfg), mode)


# --- outputs -----------------------------------------------------------------------

@dataclass
class RunManifest:
    config_hash: str
    version: str
    scenario: str
    path: str
    mode: str
    grid: int
    started: str
    finished: str
    T: Optional[float]
    status: str
    audit_passed: Optional[bool]
    outputs: dict
    timings: dict
    seed: int = 0
    error: Optional[dict] = None

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True, default=_jsonable)

    @classmethod
    def load(cls, path) -> "RunManifest":
        with open(path) as fh:
            return cls(**json.load(fh))


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def gnuplot_script(result: RunResult, csv_name: str) -> str:
    """Normalized torques and path speed against ``s``, one panel per robot."""
    coefs = result.prepared.coefs
    lines = ["set datafile separator ','", "set key outside right", "set xlabel 's'",
             f"set multiplot layout {coefs.N + 1},1"]
    col = 5
    for i, (lo, hi) in enumerate(zip(coefs.torque_lower, coefs.torque_upper)):
        lines.append(f"set ylabel 'robot {i + 1} torque (normalized)'")
        lines.append("set yrange [-1.1:1.1]")
        curves = []
        for j in range(len(lo)):
            mid, half = (hi[j] + lo[j]) / 2, (hi[j] - lo[j]) / 2
            curves.append(f"'{csv_name}' every ::1 using 1:((${col} - ({mid:.6g})) / {half:.6g}) "
                          f"with lines title 'joint {j + 1}'")
            col += 1
        lines.append("plot " + ", \\\n     ".join(curves))
    lines.append("set ylabel 'sdot / sdot_max'")
    lines.append("set autoscale y")
    lines.append(f"plot '{csv_name}' every ::1 using 1:(sqrt($2)) with lines title 'sdot'")
    lines.append("unset multiplot")
    return "\n".join(lines) + "\n"


def summary_text(result: RunResult) -> str:
    sol, rep = result.solution, result.report
    cov = audit_coverage(result.program, result.audit) if result.audit else {}
    failed = [r for r in result.audit if not r.passed]
    out = [f"scenario  {result.config.name}",
           f"path      {path_label(result.config.path)}",
           f"mode      {result.mode}",
           f"grid      K={result.prepared.coefs.K}",
           f"status    {rep.status} after {rep.iterations} iterations "
           f"(primal {rep.primal_residual:.1e}, dual {rep.dual_residual:.1e}, gap {rep.gap:.1e})",
           f"T         {sol.T:.6f} s",
           f"active    {result.active.summary()}",
           "timings   " + ", ".join(f"{k} {v:.2f}s" for k, v in result.timings.items()),
           f"audit     {len(result.audit) - len(failed)}/{len(result.audit)} checks passed"]
    for r in failed:
        out.append(f"  FAIL {r.line()}")
    gaps = [f for f, n in cov.items() if n == 0]
    if gaps:
        out.append(f"  unaudited families: {', '.join(gaps)}")
    return "\n".join(out) + "\n"


def write_outputs(result: RunResult, out_dir, dump_program: bool = False) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"solution": out / "solution.csv", "audit": out / "audit.csv",
             "summary": out / "summary.txt", "plot": out / "plot.gp"}
    result.solution.to_csv(files["solution"], result.active)
    with open(files["audit"], "w", newline="") as fh:
        csv.writer(fh).writerows(audit_rows(result.audit))
    files["summary"].write_text(summary_text(result))
    files["plot"].write_text(gnuplot_script(result, files["solution"].name))
    if dump_program:
        files["program"] = out / "program.txt"
        with open(files["program"], "w") as fh:
            dump(result.program.program, fh)
    return {k: str(v) for k, v in files.items()}


def run(cfg: ScenarioConfig, out_dir=None, dump_program: bool = False):
    """Run one scenario, write its outputs and manifest; returns ``(manifest, result, error)``."""
    out_dir = out_dir or cfg.out
    started = _now()
    np.random.seed(cfg.seed)
    result, error = None, None
    try:
        result = run_scenario(cfg)
    except CoopToppError as exc:
        error = exc
    outputs = {}
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        if result is not None:
            outputs = write_outputs(result, out_dir, dump_program)
    status = result.report.status if result is not None else "error"
    err = None
    if error is not None:
        err = {"stage": error.stage, "type": type(error).__name__, "message": str(error)}
        if isinstance(error, SolverError) and error.report is not None:
            status = error.report.status
    manifest = RunManifest(
        config_hash=cfg.config_hash(), version=__version__, scenario=cfg.name,
        path=path_label(cfg.path), mode=cfg.mode, grid=cfg.grid, started=started,
        finished=_now(), T=None if result is None else float(result.T), status=status,
        audit_passed=None if result is None else result.audit_ok, outputs=outputs,
        timings={} if result is None else result.timings, seed=cfg.seed, error=err)
    if out_dir is not None:
        mpath = Path(out_dir) / "manifest.json"
        manifest.outputs["manifest"] = str(mpath)
        mpath.write_text(manifest.to_json())
    return manifest, result, error


# --- comparison and benchmark -----------------------------------------------------------

@dataclass
class ComparisonCell:
    T: Optional[float]
    status: str
    stage: Optional[str] = None
    message: str = ""


@dataclass
class ComparisonTable:
    paths: list
    modes: list
    cells: dict

    def value(self, path, mode) -> Optional[float]:
        return self.cells[(path, mode)].T

    def ordering(self, reference: str = "rigid", rtol: float = 1e-6) -> dict:
        """``{(path, mode): '<' | '=' | '>' | None}`` of each mode against ``reference``."""
        out = {}
        for p in self.paths:
            ref = self.value(p, reference) if reference in self.modes else None
            for m in self.modes:
                if m == reference:
                    continue
                v = self.value(p, m)
                if ref is None or v is None:
                    out[(p, m)] = None
                elif abs(v - ref) <= rtol * max(abs(ref), 1.0):
                    out[(p, m)] = "="
                else:
                    out[(p, m)] = "<" if ref < v else ">"
        return out

    def rows(self):
        yield ["path", *self.modes, *[f"rigid_vs_{m}" for m in self.modes if m != "rigid"]]
        order = self.ordering()
        for p in self.paths:
            vals = []
            for m in self.modes:
                c = self.cells[(p, m)]
                vals.append(f"{c.T:.6f}" if c.T is not None else f"{c.status.upper()}")
            marks = [order.get((p, m)) or "n/a" for m in self.modes if m != "rigid"]
            yield [p, *vals, *marks]

    def text(self) -> str:
        rows = list(self.rows())
        widths = [max(len(str(r[j])) for r in rows) for j in range(len(rows[0]))]
        lines = ["  ".join(str(v).rjust(w) for v, w in zip(r, widths)) for r in rows]
        order = self.ordering()
        bad = [k for k, v in order.items() if v == ">"]
        if "rigid" in self.modes and len(self.modes) > 1:
            lines.append("rigid column minimal in every row" if not bad else
                         "ORDERING VIOLATED: " + ", ".join(f"{p}/{m}" for p, m in bad))
        return "\n".join(lines) + "\n"

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(self.rows())


def _solve_cell(cfg, prep, mode):
    if isinstance(prep, CoopToppError):
        return ComparisonCell(None, "error", prep.stage, str(prep))
    try:
        res = solve_prepared(cfg, prep, mode, audit=False)
        return ComparisonCell(res.T, res.report.status)
    except InfeasibleError as exc:
        return ComparisonCell(None, "infeasible", exc.stage, str(exc))
    except CoopToppError as exc:
        return ComparisonCell(None, "error", exc.stage, str(exc))


def _prepare_or_error(cfg, path_spec, grid=None):
    try:
        return prepare(cfg, path_spec, grid)
    except CoopToppError as exc:
        return exc


def compare(cfg: ScenarioConfig, modes: Sequence[str], paths: Optional[Sequence] = None,
            workers: Optional[int] = None) -> ComparisonTable:
    """Solve every (path, mode) pair; coefficients are shared across modes of one path."""
    paths = list(paths or cfg.compare_paths or [cfg.path])
    modes = list(modes)
    for m in modes:
        check_mode_contacts(m, cfg.robots)
    workers = workers or min(8, os.cpu_count() or 1)
    labels = [path_label(p) for p in paths]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        preps = list(pool.map(lambda p: _prepare_or_error(cfg, p), paths))
        jobs = [(lab, m, pool.submit(_solve_cell, cfg, prep, m))
                for lab, prep in zip(labels, preps) for m in modes]
        cells = {(lab, m): fut.result() for lab, m, fut in jobs}
    return ComparisonTable(labels, modes, cells)


@dataclass
class BenchRow:
    K: int
    ik: float
    assembly: float
    build: float
    solve: float
    iterations: int
    T: float
    status: str


@dataclass
class BenchTable:
    rows: list

    def assembly_slope(self) -> tuple:
        """Least-squares fit ``assembly ~ c * K**p``; returns ``(p, c)``."""
        K = np.array([r.K for r in self.rows], float)
        t = np.array([r.ik + r.assembly for r in self.rows], float)
        p, logc = np.polyfit(np.log(K), np.log(t), 1)
        return float(p), float(np.exp(logc))

    def linear_slope(self) -> float:
        """Seconds per node of ``ik + assembly`` from a straight-line fit."""
        K = np.array([r.K for r in self.rows], float)
        t = np.array([r.ik + r.assembly for r in self.rows], float)
        return float(np.polyfit(K, t, 1)[0])

    def table_rows(self):
        yield ["K", "ik_s", "assembly_s", "build_s", "solve_s", "iterations", "T", "status"]
        for r in self.rows:
            yield [r.K, f"{r.ik:.4f}", f"{r.assembly:.4f}", f"{r.build:.4f}", f"{r.solve:.4f}",
                   r.iterations, f"{r.T:.6f}", r.status]

    def text(self) -> str:
        rows = list(self.table_rows())
        widths = [max(len(str(r[j])) for r in rows) for j in range(len(rows[0]))]
        lines = ["  ".join(str(v).rjust(w) for v, w in zip(r, widths)) for r in rows]
        if len(self.rows) >= 2:
            p, _ = self.assembly_slope()
            lines.append(f"ik+assembly: {1e3 * self.linear_slope():.3f} ms per node, "
                         f"log-log exponent {p:.2f}")
        return "\n".join(lines) + "\n"

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(self.table_rows())


def bench(cfg: ScenarioConfig, grids: Optional[Sequence[int]] = None,
          workers: int = 1) -> BenchTable:
    """Time IK, coefficient assembly, program build and solve on each grid.

    Runs are sequential by default so the timings do not compete for cores.
    """
    grids = list(grids or cfg.bench_grids)
    for K in grids:
        if K < MIN_GRID:
            raise ConfigError(f"bench grids must be >= {MIN_GRID}, got {K}")

    def one(K):
        prep = prepare(cfg, grid=K)
        res = solve_prepared(cfg, prep, audit=False)
        t = res.timings
        return BenchRow(K, t["IK"], t["coefficients"], t["build"], res.report.time,
                        res.report.iterations, res.T, res.report.status)

    if workers <= 1:
        rows = [one(K) for K in grids]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, grids))
    return BenchTable(rows)


# --- randomized model checks ---------------------------------------------------------

def model_checks(cfg: ScenarioConfig, samples: int = 20, seed: Optional[int] = None) -> list:
    """Random-configuration checks of every robot model of the scenario.

    Mass matrix symmetric positive definite, Jacobian against finite
    differences of forward kinematics, and the inverse-kinematics round trip.
    Returns ``(robot, check, worst, tol, passed)`` tuples.
    """
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    out = []
    for entry in cfg.robots:
        model = build_robot(entry)
        hint = entry.get("ik_hint")
        center = np.zeros(model.dof) if hint is None else np.asarray(hint, float)
        spd, jac, ik = np.inf, 0.0, 0.0
        for _ in range(samples):
            q = center + rng.uniform(-0.3, 0.3, model.dof)
            M = model.mass_matrix(q)
            spd = min(spd, np.linalg.eigvalsh(0.5 * (M + M.T)).min() if np.allclose(M, M.T) else -1)
            jac = max(jac, jacobian_fd_error(model, q))
            pose = model.forward_kin(q)
            try:
                q_back = model.inverse_kin(pose, q + rng.uniform(-0.05, 0.05, model.dof))
                back = model.forward_kin(q_back)
                ik = max(ik, np.linalg.norm(back.position - pose.position),
                         np.linalg.norm(back.rotation - pose.rotation))
            except CoopToppError:
                ik = np.inf
        name = entry.get("name", entry["kind"])
        out.append((name, "mass-matrix-spd", spd, 0.0, spd > 0))
        out.append((name, "jacobian-fd", jac, 1e-6, jac <= 1e-6))
        out.append((name, "ik-round-trip", ik, 1e-8, ik <= 1e-8))
    return out


def jacobian_fd_error(model, q, h: float = 1e-6) -> float:
    """Largest deviation of the geometric Jacobian from central differences of FK."""
    J = model.jacobian(q)
    Jfd = np.zeros_like(J)
    for j in range(model.dof):
        dq = np.zeros(model.dof)
        dq[j] = h
        p1, p0 = model.forward_kin(q + dq), model.forward_kin(q - dq)
        Jfd[:3, j] = (p1.position - p0.position) / (2 * h)
        dR = (p1.rotation - p0.rotation) / (2 * h)
        W = dR @ model.forward_kin(q).rotation.T
        Jfd[3:, j] = [W[2, 1], W[0, 2], W[1, 0]]
    return float(np.max(np.abs(J - Jfd)))


__all__ = [
    "ScenarioConfig", "load_scenario", "scenario_file", "check_mode_contacts", "build_robot",
    "build_object", "build_path", "build_contacts", "prepare", "solve_prepared", "run_scenario",
    "run", "RunManifest", "RunResult", "Prepared", "compare", "ComparisonTable", "bench",
    "BenchTable", "model_checks", "jacobian_fd_error", "summary_text", "write_outputs", "stage",
    "BUILTIN", "__version__",
]

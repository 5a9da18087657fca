"""Command-line front end: ``cooptopp run | compare | bench | check | scenarios``.

Exit codes: 0 success, 2 configuration, 3 kinematics, 4 infeasible,
5 solver failure, 6 audit failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import AuditError, ConfigError, CoopToppError
from .scenario import (BUILTIN, __version__, bench, compare, load_scenario, model_checks,
                       path_label, run, summary_text)

EXIT_OK = 0


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text):
    try:
        return [int(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--scenario", required=True,
                   help=f"built-in name ({', '.join(BUILTIN)}) or a .toml file")
    p.add_argument("--grid", type=int, help="number of grid intervals K (>= 10)")
    p.add_argument("--solver-tol", type=float, help="interior-point stopping tolerance")
    p.add_argument("--active-tol", type=float, help="relative tolerance for active-constraint flags")
    p.add_argument("--seed", type=int, help="seed for the randomized checks (recorded in the manifest)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cooptopp", description="Time-optimal motion of cooperating manipulators.")
    parser.add_argument("--version", action="version", version=f"cooptopp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="solve one scenario and write its outputs")
    _common(p)
    p.add_argument("--path", help="catalog path (P.1 ... P.5) or a CSV file")
    p.add_argument("--mode", help="rigid, frictional or fixed:<rule>")
    p.add_argument("--out", help="output directory (default runs/<scenario>-<path>-<mode>)")
    p.add_argument("--dump-program", action="store_true", help="also write the conic program")

    p = sub.add_parser("compare", help="traversal times for every path and mode")
    _common(p)
    p.add_argument("--path", type=_csv_list, help="comma-separated paths")
    p.add_argument("--mode", type=_csv_list, help="comma-separated modes")
    p.add_argument("--out", help="CSV file for the table")
    p.add_argument("--workers", type=int, help="worker threads")

    p = sub.add_parser("bench", help="assembly and solve time against grid size")
    _common(p)
    p.add_argument("--grids", type=_int_list, help="comma-separated grid sizes")
    p.add_argument("--out", help="CSV file for the timings")

    p = sub.add_parser("check", help="randomized consistency checks of the scenario's models")
    _common(p)
    p.add_argument("--samples", type=int, default=20)

    sub.add_parser("scenarios", help="list the built-in scenarios")
    return parser


def _load(args, **extra):
    cfg = load_scenario(args.scenario)
    return cfg.with_overrides(grid=args.grid, solver_tol=args.solver_tol,
                              active_tol=args.active_tol, seed=args.seed, **extra)


def cmd_run(args) -> int:
    cfg = _load(args, path=args.path, mode=args.mode)
    out = args.out or str(Path("runs") / f"{cfg.name}-{path_label(cfg.path)}-"
                          f"{cfg.mode.replace(':', '-')}")
    manifest, result, error = run(cfg, out, args.dump_program)
    if error is not None:
        raise error
    print(summary_text(result), end="")
    print(f"manifest  {manifest.outputs['manifest']}")
    if not result.audit_ok:
        raise AuditError("constraint audit failed; see audit.csv")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load(args)
    modes = args.mode or cfg.compare_modes
    table = compare(cfg, modes, args.path, workers=args.workers)
    print(table.text(), end="")
    for (p, m), cell in table.cells.items():
        if cell.T is None:
            print(f"{p}/{m}: {cell.status} at stage {cell.stage}: {cell.message}")
    if args.out:
        table.to_csv(args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load(args)
    table = bench(cfg, args.grids)
    print(table.text(), end="")
    if args.out:
        table.to_csv(args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    cfg = _load(args)
    rows = model_checks(cfg, args.samples)
    bad = 0
    for robot, check, worst, tol, ok in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {robot:10s} {check:16s} worst {worst:.3g} (tol {tol:g})")
        bad += not ok
    return EXIT_OK if not bad else ConfigError.exit_code


def cmd_scenarios(args) -> int:
    for name in BUILTIN:
        cfg = load_scenario(name)
        print(f"{name:16s} {cfg.description}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "bench": cmd_bench, "check": cmd_check,
            "scenarios": cmd_scenarios}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CoopToppError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

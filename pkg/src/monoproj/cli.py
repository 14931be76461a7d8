"""Command-line interface.

Exit codes: 0 success, 1 simulation aborted (too many failed replications),
2 input error, 3 invariant violation, 4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import gridio, plotting
from .bands import BandError, compare_bands, correct_band
from .interpolate import Interpolator, Scheme
from .isotonic import SolverConfig, lemma3_bound_check, project_monotone, violation_diagnostic
from .lattice import LatticeError, mesh
from .simulation import (
    FULL_REPS,
    FULL_SIZES,
    Example,
    InvariantViolation,
    SimConfig,
    SimulationAborted,
    config_dict,
    run_simulation,
)

log = logging.getLogger("monoproj")

EXIT_OK, EXIT_ABORTED, EXIT_INPUT, EXIT_INVARIANT, EXIT_NONCONVERGED = 0, 1, 2, 3, 4
INPUT_ERRORS = (gridio.GridFormatError, LatticeError, BandError, ValueError, OSError)


def _solver(args) -> SolverConfig:
    return SolverConfig(args.tol_dykstra, args.max_sweeps, args.tol_monotone)


def _emit_json(obj, path) -> None:
    if path:
        gridio.atomic_write_json(path, obj)
    else:
        json.dump(obj, sys.stdout, indent=2, sort_keys=True, default=gridio._json_default)
        sys.stdout.write("\n")


def cmd_project(args) -> int:
    table = gridio.read_grid(args.input)
    f = table.grid()
    cfg = _solver(args)
    res = project_monotone(f, cfg)
    diag = violation_diagnostic(f)
    star = res.projected
    gridio.atomic_write(args.output, gridio.format_table(table, {"value": star.values}))
    report = {
        "shape": list(f.lattice.shape),
        "kappa": diag.kappa,
        "worst_pair": [list(p.coords) for p in diag.worst_pair] if diag.worst_pair else None,
        "mesh": mesh(f.lattice),
        "iterations": res.iterations,
        "converged": res.converged,
        "max_kkt_residual": res.max_kkt_residual,
        "max_abs_change": f.sup_distance(star),
        "kappa_bound_holds": lemma3_bound_check(f, res, cfg.tol_monotone, kappa=diag.kappa),
    }
    if args.eval:
        pts_cols = gridio.read_dataset(args.eval, [n.lower() for n in table.axis_names])
        pts = np.column_stack(list(pts_cols.values()))
        itp = Interpolator(star, Scheme(args.scheme), check_monotone=res.converged)
        vals = itp(table.to_unit(pts))
        rows = [dict(zip(table.axis_names, map(float, p)), value=float(v)) for p, v in zip(pts, vals)]
        text = gridio.format_rows(rows)
        if args.eval_out:
            gridio.atomic_write(args.eval_out, text)
        else:
            sys.stdout.write(text)
        report["interpolation_scheme"] = args.scheme
    _emit_json(report, args.diagnostics)
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_band_correct(args) -> int:
    table, band = gridio.read_band(args.input, args.level)
    corrected = correct_band(band, _solver(args))
    gridio.atomic_write(
        args.output,
        gridio.format_table(table, {"lower": corrected.lower.values, "upper": corrected.upper.values}),
    )
    wi, wc = band.width, corrected.width
    report = {
        "sum_width_initial": float(wi.sum()),
        "sum_width_corrected": float(wc.sum()),
        "sup_width_initial": float(wi.max()),
        "sup_width_corrected": float(wc.max()),
        "sum_width_ratio": float(wi.sum() / wc.sum()) if wc.sum() > 0 else 1.0,
        "sup_width_ratio": float(wi.max() / wc.max()) if wc.max() > 0 else 1.0,
        "converged": corrected.converged,
    }
    if args.truth:
        truth_table = gridio.read_grid(args.truth)
        cmp = compare_bands(band, corrected, truth_table.grid())
        report["covered_initial"] = cmp.covered_initial
        report["covered_corrected"] = cmp.covered_corrected
    _emit_json(report, args.comparison)
    return EXIT_OK if corrected.converged else EXIT_NONCONVERGED


def _dump_replay(out: Path, exc: InvariantViolation, cfg: SimConfig) -> None:
    stem = out / f"replay_{cfg.example.value}_n{cfg.n}_rep{exc.rep}"
    gridio.atomic_write_json(
        f"{stem}.json",
        {"message": str(exc), "rep": exc.rep, "seed": exc.seed, "config": config_dict(cfg)},
    )
    if exc.data is not None:
        gridio.atomic_write(f"{stem}_data.csv", gridio.dataset_text(exc.data))


def cmd_simulate(args) -> int:
    example = Example(args.example)
    sizes = list(FULL_SIZES) if args.full else args.n
    reps = FULL_REPS if args.full else args.reps
    out = Path(args.out)
    configs = [
        SimConfig(
            example, n, reps, args.seed, args.level,
            band_draws=args.draws, boot_reps=args.boot_reps,
            grid_mode=args.grid_mode, solver=_solver(args),
        )
        for n in sizes
    ]
    rows, cells = [], []
    for cfg in configs:
        log.info("running %s n=%d reps=%d", example.value, cfg.n, cfg.reps)
        try:
            report = run_simulation(cfg)
        except InvariantViolation as exc:
            _dump_replay(out, exc, cfg)
            log.error("%s", exc)
            return EXIT_INVARIANT
        except SimulationAborted as exc:
            log.error("%s", exc)
            return EXIT_ABORTED
        rows.extend(report.rows)
        cell = report.summary()
        cell["failures"] = [{"rep": r, "error": e} for r, e in report.failures]
        cells.append(cell)

    gridio.atomic_write(out / "report.csv", gridio.format_rows(rows))
    gridio.atomic_write(out / "ecdf.csv", gridio.format_rows(plotting.ecdf_rows(rows)))
    summary = {
        "example": example.value,
        "config": {k: v for k, v in config_dict(configs[0]).items() if k != "n"},
        "sizes": sizes,
        "cells": cells,
        "coverage_table": {
            "n": [c["n"] for c in cells],
            "initial_band": [c.get("coverage_initial") for c in cells],
            "monotone_band": [c.get("coverage_corrected") for c in cells],
        },
    }
    gridio.atomic_write_json(out / "summary.json", summary)
    if not args.no_figures and rows:
        fig = plotting.ecdf_figure(rows, title=example.value)
        gridio.atomic_write(out / "figures" / f"ecdf_{example.value}.svg", plotting.figure_svg(fig))
    if not all(c["all_converged"] for c in cells):
        return EXIT_NONCONVERGED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="monoproj", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp):
        d = SolverConfig()
        sp.add_argument("--tol-dykstra", type=float, default=d.tol_dykstra,
                        help="sup-norm change per sweep to stop at (default %(default)g)")
        sp.add_argument("--max-sweeps", type=int, default=d.max_sweeps,
                        help="Dykstra sweep limit (default %(default)d)")
        sp.add_argument("--tol-monotone", type=float, default=d.tol_monotone,
                        help="allowed monotonicity residual (default %(default)g)")

    sp = sub.add_parser("project", help="project a grid CSV onto the monotone cone")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--diagnostics", help="write diagnostics JSON here instead of stdout")
    sp.add_argument("--eval", help="CSV of points (axis columns) to evaluate the projection at")
    sp.add_argument("--eval-out", help="where to write interpolated values (default stdout)")
    sp.add_argument("--scheme", choices=[s.value for s in Scheme], default=Scheme.MULTILINEAR.value)
    solver_flags(sp)
    sp.set_defaults(func=cmd_project)

    sp = sub.add_parser("band-correct", help="project both endpoints of a band CSV")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--comparison", help="write width/coverage JSON here instead of stdout")
    sp.add_argument("--truth", help="grid CSV of the true function, for coverage flags")
    sp.add_argument("--level", type=float, default=0.95)
    solver_flags(sp)
    sp.set_defaults(func=cmd_band_correct)

    sp = sub.add_parser("simulate", help="run a seeded simulation study")
    sp.add_argument("example", choices=[e.value for e in Example])
    sp.add_argument("--n", type=int, nargs="+", default=[100, 1000], help="sample sizes")
    sp.add_argument("--reps", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--level", type=float, default=0.95)
    sp.add_argument("--out", default="sim_out", help="output directory")
    sp.add_argument("--full", action="store_true",
                    help=f"n in {list(FULL_SIZES)} with {FULL_REPS} replications each")
    sp.add_argument("--draws", type=int, default=1000, help="multiplier draws (G-computation bands)")
    sp.add_argument("--boot-reps", type=int, default=200, help="bootstrap replicates (conditional CDF bands)")
    sp.add_argument("--grid-mode", choices=["observed", "equispaced"], default="observed")
    sp.add_argument("--scheme", choices=[s.value for s in Scheme], default=Scheme.MULTILINEAR.value,
                    help="interpolation scheme (recorded only; metrics are computed on the grid)")
    sp.add_argument("--no-figures", action="store_true")
    solver_flags(sp)
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"monoproj: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

"""Seeded Monte Carlo studies for the two estimation examples.

Each replication runs generate -> fit -> estimate on a grid -> project ->
band -> corrected band -> metrics. Deterministic guarantees of the
projection (error never increases, coverage never lost, widths preserved,
the kappa bound) are asserted on every replication; statistical summaries
are only reported.

Every replication draws from its own Philox stream keyed by
``(seed, replication index)``, so results do not depend on execution order
or on the number of worker processes.
"""

from __future__ import annotations

import enum
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit

from . import gcomp, loclin
from .bands import Band, BandError, correct_band, multiplier_band
from .isotonic import (
    ProjectionResult,
    SolverConfig,
    lemma3_bound_check,
    project_array,
    project_monotone,
    violation_diagnostic,
)
from .lattice import GridFunction, Lattice

log = logging.getLogger(__name__)

THREADS_ENV = "MONOPROJ_THREADS"
FAILURE_LIMIT = 0.05
FULL_SIZES = (100, 250, 500, 750, 1000)
FULL_REPS = 1000


class Example(enum.Enum):
    GCOMP1D = "gcomp1d"
    GCOMP2D = "gcomp2d"
    CONDDIST = "conddist"


class InvariantViolation(AssertionError):
    """A deterministic property of the projection failed in some replication."""

    def __init__(self, message: str, rep: int, seed: int, data=None):
        super().__init__(f"replication {rep} (seed {seed}): {message}")
        self.rep = rep
        self.seed = seed
        self.data = data


class SimulationAborted(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    example: Example
    n: int
    reps: int = 100
    seed: int = 0
    level: float = 0.95
    band_draws: int = 1000
    boot_reps: int = 200
    grid_mode: str = "observed"
    solver: SolverConfig = SolverConfig()
    workers: Optional[int] = None

    def __post_init__(self):
        if self.n < 50:
            raise ValueError("simulation sample size must be at least 50")
        if self.reps < 1:
            raise ValueError("need at least one replication")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(rep,))
    return np.random.Generator(np.random.Philox(ss))


def gen_gcomp(n: int, rng: np.random.Generator) -> gcomp.ObsBinary:
    """``W1 ~ Bern(0.5)``, ``W2 ~ U(-1, 1)``, logistic exposure, logit-normal outcome."""
    w1 = (rng.random(n) < 0.5).astype(float)
    w2 = rng.uniform(-1.0, 1.0, n)
    b = gcomp.TRUE_PROPENSITY
    a = (rng.random(n) < expit(b[0] + b[1] * w1 + b[2] * w2)).astype(float)
    c = gcomp.TRUE_OUTCOME_MEAN
    z = c[0] + c[1] * a + c[2] * w2 + gcomp.TRUE_OUTCOME_SD * rng.standard_normal(n)
    return gcomp.ObsBinary(expit(z), a, w1, w2)


def gen_conddist(n: int, rng: np.random.Generator) -> loclin.ObsCont:
    """``A ~ Beta(2, 3)`` built from two Gamma draws; ``logit(Y) | A ~ N(m(A), 1)``."""
    g2 = rng.standard_gamma(2.0, n)
    g3 = rng.standard_gamma(3.0, n)
    a = g2 / (g2 + g3)
    z = loclin.conditional_median_logit(a) + rng.standard_normal(n)
    return loclin.ObsCont(a, expit(z))


def _row_projection(f: GridFunction, cfg: SolverConfig) -> ProjectionResult:
    """Project every t-line of a 2 x m grid separately (the univariate correction)."""
    arr = f.array
    out = np.empty_like(arr)
    sweeps, converged, kkt = 0, True, 0.0
    for r in range(arr.shape[0]):
        x, s, c, k = project_array(arr[r], cfg)
        out[r] = x
        sweeps, converged, kkt = max(sweeps, s), converged and c, max(kkt, k)
    return ProjectionResult(f.with_values(out.ravel()), sweeps, converged, kkt)


def _row_band(b: Band, cfg: SolverConfig) -> Band:
    lo = _row_projection(b.lower, cfg)
    up = _row_projection(b.upper, cfg)
    up_v = np.maximum(up.projected.values, lo.projected.values)
    return Band(lo.projected, up.projected.with_values(up_v), b.level, lo.converged and up.converged)


def _row_kappa_bound(f: GridFunction, p: ProjectionResult, tol: float) -> tuple[bool, float]:
    t = f.lattice.axes[1]
    ok, kappa = True, 0.0
    for r in range(f.lattice.shape[0]):
        lat = Lattice([t])
        fr = GridFunction(lat, f.array[r])
        pr = ProjectionResult(GridFunction(lat, p.projected.array[r]), 1, True, 0.0)
        kr = violation_diagnostic(fr).kappa
        ok = ok and lemma3_bound_check(fr, pr, tol, kappa=kr)
        kappa = max(kappa, kr)
    return ok, kappa


def _axis_violations(f: GridFunction) -> list[bool]:
    arr = f.array
    return [bool(arr.shape[j] > 1 and np.any(np.diff(arr, axis=j) < 0)) for j in range(arr.ndim)]


def _gcomp_stage(cfg: SimConfig, rng):
    data = gen_gcomp(cfg.n, rng)
    fits = gcomp.fit_nuisance(data)
    grid = gcomp.evaluation_grid(data.y, cfg.grid_mode)
    est = gcomp.bivariate_stack(
        gcomp.aipw_curve(data, fits, 0, grid),
        gcomp.aipw_curve(data, fits, 1, grid),
    )
    t = grid.axes[0]
    truth = est.values.with_values(np.concatenate([gcomp.truth_curve(0, t), gcomp.truth_curve(1, t)]))
    band = multiplier_band(est, cfg.level, cfg.band_draws, rng)
    return data, est.values, truth, band, math.sqrt(cfg.n), {"grid_points": est.lattice.size}


def _conddist_stage(cfg: SimConfig, rng):
    data = gen_conddist(cfg.n, rng)
    h = loclin.select_bandwidth(data)
    k = loclin.KernelSpec(h)
    grid = loclin.square_grid(cfg.n)
    surf = loclin.loclin_grid(data, k, grid, clip=False)
    band = loclin.bootstrap_band(data, k, grid, cfg.level, cfg.boot_reps, rng)
    extra = {"grid_points": grid.size, "bandwidth": h, "n_clipped": surf.n_clipped}
    return data, surf.values, loclin.truth_curve(grid), band, math.sqrt(cfg.n * h), extra


ESTIMATION_ERRORS = (gcomp.NuisanceError, loclin.DegenerateWindowError, BandError, RuntimeError, np.linalg.LinAlgError)


def run_replication(cfg: SimConfig, rep: int) -> dict:
    """One replication; returns its metrics row.

    Raises
    ------
    InvariantViolation
        If a deterministic guarantee fails after a converged projection.
    """
    rng = replication_rng(cfg.seed, rep)
    stage = _conddist_stage if cfg.example is Example.CONDDIST else _gcomp_stage
    data, theta, truth, band, r_n, extra = stage(cfg, rng)
    tol = cfg.solver.tol_monotone

    if cfg.example is Example.GCOMP1D:
        proj = _row_projection(theta, cfg.solver)
        band_c = _row_band(band, cfg.solver)
        lemma_ok, kappa = _row_kappa_bound(theta, proj, tol)
    else:
        proj = project_monotone(theta, cfg.solver)
        band_c = correct_band(band, cfg.solver)
        kappa = violation_diagnostic(theta).kappa
        lemma_ok = lemma3_bound_check(theta, proj, tol, kappa=kappa)

    star = proj.projected
    err_init = theta.sup_distance(truth)
    err_corr = star.sup_distance(truth)
    w_init, w_corr = band.width, band_c.width
    viol = _axis_violations(theta)
    row = {
        "example": cfg.example.value,
        "n": cfg.n,
        "rep": rep,
        "grid_points": extra["grid_points"],
        "bandwidth": extra.get("bandwidth", float("nan")),
        "scaled_discrepancy": r_n * theta.sup_distance(star),
        "err_initial": err_init,
        "err_corrected": err_corr,
        "error_ratio": err_init / err_corr if err_corr > 0 else 1.0,
        "sup_width_initial": float(w_init.max()),
        "sup_width_corrected": float(w_corr.max()),
        "width_ratio": float(w_init.max() / w_corr.max()),
        "sum_width_initial": float(w_init.sum()),
        "sum_width_corrected": float(w_corr.sum()),
        "covered_initial": band.covers(truth),
        "covered_corrected": band_c.covers(truth),
        "violation_axis1": viol[0],
        "violation_axis2": viol[1],
        "kappa": kappa,
        "kappa_bound_ok": bool(lemma_ok),
        "sweeps": proj.iterations,
        "converged": bool(proj.converged and band_c.converged),
    }
    if row["converged"]:
        _assert_invariants(row, band_c, truth, tol, cfg, rep, data)
    return row


def _assert_invariants(row, band_c, truth, tol, cfg, rep, data) -> None:
    problems = []
    if row["err_corrected"] > row["err_initial"] + tol:
        problems.append("projection increased the sup-norm error against the truth")
    if row["covered_initial"] and not band_c.covers(truth, tol):
        problems.append("corrected band lost coverage that the initial band had")
    s0, s1 = row["sum_width_initial"], row["sum_width_corrected"]
    if abs(s1 - s0) > 1e-9 * max(1.0, abs(s0)):
        problems.append(f"summed band width changed: {s0!r} -> {s1!r}")
    if row["sup_width_corrected"] > row["sup_width_initial"] + 1e-9:
        problems.append("maximal band width increased")
    if not row["kappa_bound_ok"]:
        problems.append("kappa bound on the projection discrepancy failed")
    if problems:
        raise InvariantViolation("; ".join(problems), rep, cfg.seed, data)


def _worker(args):
    cfg, rep = args
    try:
        return rep, run_replication(cfg, rep), None
    except ESTIMATION_ERRORS as exc:
        return rep, None, f"{type(exc).__name__}: {exc}"


def worker_count(cfg: SimConfig) -> int:
    if cfg.workers is not None:
        return max(1, cfg.workers)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            count = int(env)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {env!r}") from None
        if count < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
        return count
    return os.cpu_count() or 1


@dataclass
class SimReport:
    config: SimConfig
    rows: list[dict] = field(default_factory=list)
    failures: list[tuple[int, str]] = field(default_factory=list)

    @property
    def all_converged(self) -> bool:
        return all(r["converged"] for r in self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def summary(self) -> dict:
        return summarize(self.rows, self.failures, self.config)


def run_simulation(cfg: SimConfig) -> SimReport:
    jobs = [(cfg, rep) for rep in range(cfg.reps)]
    workers = min(worker_count(cfg), cfg.reps)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_worker, jobs, chunksize=max(1, cfg.reps // (4 * workers))))
    else:
        results = [_worker(j) for j in jobs]
    report = SimReport(cfg)
    for rep, row, err in sorted(results, key=lambda r: r[0]):
        if row is None:
            report.failures.append((rep, err))
        else:
            report.rows.append(row)
    if len(report.failures) > FAILURE_LIMIT * cfg.reps:
        raise SimulationAborted(
            f"{len(report.failures)} of {cfg.reps} replications failed; first: {report.failures[0][1]}"
        )
    return report


QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
FIGURE_METRICS = ("scaled_discrepancy", "error_ratio", "width_ratio")


def summarize(rows: list[dict], failures, cfg: SimConfig) -> dict:
    def col(name):
        return np.array([r[name] for r in rows], dtype=float)

    out = {
        "example": cfg.example.value,
        "n": cfg.n,
        "reps": cfg.reps,
        "seed": cfg.seed,
        "level": cfg.level,
        "completed": len(rows),
        "failed": len(failures),
        "all_converged": all(r["converged"] for r in rows),
    }
    if not rows:
        return out
    out["coverage_initial"] = round(100 * float(col("covered_initial").mean()), 1)
    out["coverage_corrected"] = round(100 * float(col("covered_corrected").mean()), 1)
    out["violations_both_axes"] = float(np.mean(col("violation_axis1") * col("violation_axis2")))
    out["quantiles"] = {
        m: {str(q): float(np.quantile(col(m), q)) for q in QUANTILES} for m in FIGURE_METRICS
    }
    return out


def full_config_grid(example: Example, seed: int, **kw) -> list[SimConfig]:
    return [SimConfig(example, n, FULL_REPS, seed, **kw) for n in FULL_SIZES]


def config_dict(cfg: SimConfig) -> dict:
    d = asdict(cfg)
    d["example"] = cfg.example.value
    return d

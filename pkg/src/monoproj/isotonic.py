"""L2 projection of grid functions onto the component-wise monotone cone.

Chains are solved exactly with the pool adjacent violators algorithm. For
d >= 2 the monotone cone is the intersection of the d cones "non-decreasing
along axis j", so Dykstra's alternating projections over those cones, each
solved by line-wise PAVA, converge to the projection onto the intersection.

A brute-force min-max oracle over upper and lower sets is included for
checking the solver on tiny lattices.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .lattice import (
    GridFunction,
    GridIndex,
    Lattice,
    LatticeError,
    MAX_ORACLE_POINTS,
    enumerate_upper_sets,
    require_same_lattice,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    tol_dykstra: float = 1e-10
    max_sweeps: int = 10_000
    tol_monotone: float = 1e-8

    def __post_init__(self):
        if self.tol_dykstra <= 0 or self.tol_monotone <= 0:
            raise ValueError("solver tolerances must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be positive")


@dataclass(frozen=True)
class ProjectionResult:
    projected: GridFunction
    iterations: int
    converged: bool
    max_kkt_residual: float


@dataclass(frozen=True)
class ViolationDiagnostic:
    kappa: float
    worst_pair: Optional[tuple[GridIndex, GridIndex]] = None


def pava(values, weights=None) -> np.ndarray:
    """Weighted least-squares projection onto non-decreasing vectors.

    Parameters
    ----------
    values : array_like
        Sequence to monotonize.
    weights : array_like, optional
        Positive weights, unit weights by default.

    Returns
    -------
    numpy.ndarray
        Non-decreasing vector; every pooled block carries the weighted mean
        of its inputs.
    """
    y = np.ascontiguousarray(values, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("pava needs at least one value")
    if weights is None:
        w = np.ones_like(y)
    else:
        w = np.ascontiguousarray(weights, dtype=float).ravel()
        if w.shape != y.shape:
            raise ValueError("weights and values differ in length")
        if np.any(~(w > 0)):
            raise ValueError("weights must be strictly positive")
    out = np.empty_like(y)
    _kernels.pava_weighted(y, w, out)
    return out


def _project_axis(x: np.ndarray, axis: int) -> np.ndarray:
    moved = np.ascontiguousarray(np.moveaxis(x, axis, -1))
    rows = moved.reshape(-1, moved.shape[-1])
    out = np.empty_like(rows)
    _kernels.pava_rows(rows, out)
    return np.moveaxis(out.reshape(moved.shape), -1, axis)


def monotonicity_residual(x: np.ndarray) -> float:
    """Largest decrease between neighbouring points along any axis (0 if monotone)."""
    worst = 0.0
    for axis in range(x.ndim):
        if x.shape[axis] > 1:
            worst = max(worst, float(np.max(-np.diff(x, axis=axis), initial=0.0)))
    return worst


def project_array(theta: np.ndarray, cfg: SolverConfig = SolverConfig()):
    """Array-level projection. Returns ``(projected, sweeps, converged, kkt)``."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 1 or sum(n > 1 for n in theta.shape) <= 1:
        flat = pava(theta.ravel()).reshape(theta.shape)
        return flat, 1, True, monotonicity_residual(flat)

    axes = [j for j, n in enumerate(theta.shape) if n > 1]
    x = theta.copy()
    corrections = [np.zeros_like(theta) for _ in axes]
    converged = False
    sweep = 0
    for sweep in range(1, cfg.max_sweeps + 1):
        start = x
        for k, axis in enumerate(axes):
            shifted = x + corrections[k]
            y = _project_axis(shifted, axis)
            corrections[k] = shifted - y
            x = y
        change = float(np.max(np.abs(x - start)))
        if change < cfg.tol_dykstra and monotonicity_residual(x) < cfg.tol_monotone:
            converged = True
            break
    # KKT: theta - x = sum of corrections, each lying in the polar of its
    # axis cone; what remains is feasibility and complementarity.
    kkt = monotonicity_residual(x)
    for p in corrections:
        kkt = max(kkt, abs(float(np.vdot(p, x))))
    if not converged:
        log.warning("Dykstra stopped after %d sweeps without converging", sweep)
    return x, sweep, converged, kkt


def project_monotone(f: GridFunction, cfg: SolverConfig = SolverConfig()) -> ProjectionResult:
    """Isotonic regression of ``f`` over its lattice (unweighted least squares)."""
    x, sweeps, converged, kkt = project_array(f.array, cfg)
    return ProjectionResult(
        projected=f.with_values(x.ravel()),
        iterations=sweeps,
        converged=converged,
        max_kkt_residual=kkt,
    )


def _set_masks(lat: Lattice) -> tuple[np.ndarray, np.ndarray]:
    uppers = enumerate_upper_sets(lat)
    up = np.zeros((len(uppers), lat.size), dtype=bool)
    for r, s in enumerate(uppers):
        up[r, list(s)] = True
    # complements of upper sets are exactly the lower sets
    return up, ~up


def oracle_minmax(f: GridFunction, check_minmax: bool = True) -> GridFunction:
    """Exact isotonic regression by enumerating upper and lower sets.

    Evaluates ``max_{U containing t} min_{L containing t} avg(U & L)`` at every
    point, and optionally confirms it equals the min-max form.
    """
    lat = f.lattice
    if lat.size > MAX_ORACLE_POINTS:
        raise LatticeError(f"oracle limited to {MAX_ORACLE_POINTS} points, got {lat.size}")
    up, low = _set_masks(lat)
    inter = up[:, None, :] & low[None, :, :]
    counts = inter.sum(axis=2)
    sums = inter.astype(float) @ f.values
    with np.errstate(invalid="ignore", divide="ignore"):
        avg = sums / counts
    out = np.empty(lat.size)
    for t in range(lat.size):
        block = avg[np.ix_(up[:, t], low[:, t])]
        out[t] = block.min(axis=1).max()
        if check_minmax:
            other = block.max(axis=0).min()
            if not np.isclose(out[t], other, rtol=0, atol=1e-12):
                raise AssertionError(f"max-min {out[t]} != min-max {other} at point {t}")
    return f.with_values(out)


def _coords_and_indices(lat: Lattice):
    return (
        np.ascontiguousarray(lat.points()),
        np.ascontiguousarray(lat.index_array().astype(np.int64)),
    )


def violation_diagnostic(f: GridFunction) -> ViolationDiagnostic:
    """Largest distance between comparable points whose values tie or reverse."""
    coords, idx = _coords_and_indices(f.lattice)
    kappa, i, j = _kernels.kappa_scan(coords, idx, np.ascontiguousarray(f.values))
    if i < 0:
        return ViolationDiagnostic(0.0, None)
    return ViolationDiagnostic(kappa, (f.lattice.grid_index(i), f.lattice.grid_index(j)))


def local_oscillation(f: GridFunction, radius: float) -> float:
    """``max |f(s) - f(t)|`` over lattice pairs within max-norm ``radius``."""
    coords, _ = _coords_and_indices(f.lattice)
    return float(_kernels.local_oscillation(coords, np.ascontiguousarray(f.values), radius))


def lemma3_bound_check(
    f: GridFunction,
    p: ProjectionResult,
    tol: float = SolverConfig().tol_monotone,
    kappa: Optional[float] = None,
) -> bool:
    """Check ``max|f* - f| <= max_{|s - t| <= kappa} |f(s) - f(t)|``.

    The inequality holds deterministically for the exact projection; ``tol``
    absorbs solver error.
    """
    require_same_lattice(f, p.projected)
    if kappa is None:
        kappa = violation_diagnostic(f).kappa
    lhs = f.sup_distance(p.projected)
    rhs = local_oscillation(f, kappa * (1 + 1e-12))
    return lhs <= rhs + tol

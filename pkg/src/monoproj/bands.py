"""Uniform confidence bands on a lattice and their monotone correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .isotonic import SolverConfig, project_monotone
from .lattice import GridFunction, LatticeError, require_same_lattice


class BandError(ValueError):
    pass


@dataclass(frozen=True)
class Band:
    lower: GridFunction
    upper: GridFunction
    level: float = 0.95
    converged: bool = True
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        require_same_lattice(self.lower, self.upper)
        if not 0.0 < self.level < 1.0:
            raise BandError("band level must lie in (0, 1)")
        bad = np.flatnonzero(self.lower.values > self.upper.values)
        if bad.size:
            where = self.lower.lattice.grid_index(int(bad[0])).coords
            raise BandError(f"lower endpoint exceeds upper endpoint at {where}")

    @property
    def lattice(self):
        return self.lower.lattice

    @property
    def width(self) -> np.ndarray:
        return self.upper.values - self.lower.values

    def covers(self, truth: GridFunction, tol: float = 0.0) -> bool:
        require_same_lattice(self.lower, truth)
        v = truth.values
        return bool(np.all(self.lower.values <= v + tol) and np.all(v <= self.upper.values + tol))


@dataclass(frozen=True)
class BandComparison:
    sum_width_initial: float
    sum_width_corrected: float
    sup_width_initial: float
    sup_width_corrected: float
    covered_initial: bool
    covered_corrected: bool


def construct_wald(
    theta: GridFunction,
    sigma: GridFunction,
    c_alpha: float,
    r_n: float,
    level: float = 0.95,
) -> Band:
    """``theta -/+ c_alpha * sigma / r_n`` at every lattice point."""
    require_same_lattice(theta, sigma)
    if not c_alpha > 0:
        raise BandError("critical value must be positive")
    if not r_n > 0:
        raise BandError("rate r_n must be positive")
    if np.any(~(sigma.values > 0)):
        raise BandError("scale function must be strictly positive")
    half = c_alpha * sigma.values / r_n
    return Band(theta.with_values(theta.values - half), theta.with_values(theta.values + half), level)


def correct_band(b: Band, cfg: SolverConfig = SolverConfig()) -> Band:
    """Project both endpoints onto the monotone cone.

    Order preservation of the projection keeps ``lower* <= upper*``; any
    rounding-level crossing left by an inexact solve is clamped away.
    """
    lo = project_monotone(b.lower, cfg)
    up = project_monotone(b.upper, cfg)
    lo_v = lo.projected.values
    up_v = np.maximum(up.projected.values, lo_v)
    return Band(
        lo.projected,
        up.projected.with_values(up_v),
        b.level,
        converged=lo.converged and up.converged,
    )


def compare_bands(initial: Band, corrected: Band, truth: GridFunction) -> BandComparison:
    require_same_lattice(initial.lower, corrected.lower, truth)
    wi, wc = initial.width, corrected.width
    return BandComparison(
        sum_width_initial=float(wi.sum()),
        sum_width_corrected=float(wc.sum()),
        sup_width_initial=float(wi.max()),
        sup_width_corrected=float(wc.max()),
        covered_initial=initial.covers(truth),
        covered_corrected=corrected.covers(truth),
    )


def multiplier_band(est, level: float = 0.95, draws: int = 1000, rng=None, chunk: int = 500) -> Band:
    """Studentized sup-t band from estimated influence functions.

    The critical value is the ``level`` quantile of
    ``sup_t |n^{-1/2} sum_i xi_i phi_i(t)| / sigma(t)`` over independent
    standard normal multipliers ``xi``; the band is
    ``theta -/+ q * sigma / sqrt(n)``.

    Parameters
    ----------
    est : EstimateWithInfluence
        Point estimate on a lattice and its ``n x m`` influence matrix.
    level : float
        Simultaneous coverage level.
    draws : int
        Number of multiplier draws (at least 100).
    rng : int, numpy.random.Generator or None
        Seed or generator for the multipliers.
    """
    phi = np.asarray(est.influence, dtype=float)
    n, m = phi.shape
    if n < 2:
        raise BandError("need at least two observations")
    if draws < 100:
        raise BandError("need at least 100 multiplier draws")
    if m != est.values.lattice.size:
        raise LatticeError("influence matrix does not match the lattice")
    sigma = phi.std(axis=0)
    flat = np.flatnonzero(~(sigma > 1e-12 * max(1.0, float(np.abs(phi).max(initial=0.0)))))
    if flat.size:
        where = est.values.lattice.grid_index(int(flat[0])).coords
        raise BandError(f"influence function has zero variance at grid point {where}")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    scaled = phi / sigma
    sups = np.empty(draws)
    for start in range(0, draws, chunk):
        k = min(chunk, draws - start)
        xi = gen.standard_normal((k, n))
        sups[start:start + k] = np.abs(xi @ scaled).max(axis=1) / np.sqrt(n)
    q = float(np.quantile(sups, level))
    theta = est.values
    return construct_wald(theta, theta.with_values(sigma), q, np.sqrt(n), level)

"""Local linear estimation of a conditional distribution function.

``theta(t1, t2) = P(Y <= t1 | A = t2)`` is estimated by smoothing the
indicators ``I(Y_i <= t1)`` against ``A_i`` with a local linear fit at
``t2``. Grid functions produced here use axis order ``(t1, t2)``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logit, ndtr

from .bands import Band
from .lattice import GridFunction, Lattice, LatticeError

log = logging.getLogger(__name__)

GRAM_FLOOR = 1e-12
SIGMA_FLOOR = 1e-6


class DegenerateWindowError(ValueError):
    def __init__(self, t2_values):
        self.t2 = [float(t) for t in np.atleast_1d(t2_values)]
        shown = ", ".join(f"{t:.6g}" for t in self.t2[:5])
        more = "" if len(self.t2) <= 5 else f" (+{len(self.t2) - 5} more)"
        super().__init__(f"degenerate local linear window at t2 = {shown}{more}")


class Kernel(enum.Enum):
    EPANECHNIKOV = "epanechnikov"
    TRIWEIGHT = "triweight"

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        inside = np.abs(u) < 1
        r = np.where(inside, 1.0 - u * u, 0.0)
        if self is Kernel.EPANECHNIKOV:
            return 0.75 * r
        return (35.0 / 32.0) * r ** 3


@dataclass(frozen=True)
class KernelSpec:
    bandwidth: float
    kind: Kernel = Kernel.EPANECHNIKOV

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")


@dataclass(frozen=True)
class ObsCont:
    """Columnar sample of ``(a, y)`` pairs."""

    a: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if a.size != y.size:
            raise ValueError("columns differ in length")
        if np.any((a < 0) | (a > 1)):
            raise ValueError("exposure must lie in [0, 1]")
        if np.any((y <= 0) | (y >= 1)):
            raise ValueError("outcomes must lie strictly inside (0, 1)")
        a.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.a.size

    def take(self, idx) -> ObsCont:
        return ObsCont(self.a[idx], self.y[idx])


@dataclass(frozen=True)
class LocalMoments:
    s0: np.ndarray
    s1: np.ndarray
    s2: np.ndarray

    @property
    def g(self) -> np.ndarray:
        return self.s0 * self.s2 - self.s1 ** 2


def local_moments(a: np.ndarray, k: KernelSpec, t2) -> tuple[LocalMoments, np.ndarray, np.ndarray]:
    """Kernel moments at each ``t2`` plus the offset and kernel matrices (``len(t2) x n``)."""
    t2 = np.atleast_1d(np.asarray(t2, dtype=float))
    h = k.bandwidth
    n = a.size
    d = a[None, :] - t2[:, None]
    kern = k.kind(d / h)
    scale = n * h
    mom = LocalMoments(
        kern.sum(axis=1) / scale,
        (d * kern).sum(axis=1) / scale,
        (d * d * kern).sum(axis=1) / scale,
    )
    return mom, d, kern


def _degenerate(a: np.ndarray, k: KernelSpec, t2: np.ndarray, g: np.ndarray) -> np.ndarray:
    # windows are open intervals (t2 - h, t2 + h) for both kernels
    ua = np.unique(a)
    h = k.bandwidth
    distinct = np.searchsorted(ua, t2 + h, side="left") - np.searchsorted(ua, t2 - h, side="right")
    return (distinct < 2) | ~(g > GRAM_FLOOR)


def smoother_weights(a: np.ndarray, k: KernelSpec, t2) -> np.ndarray:
    """Local linear weights ``w_i(t2)``, one row per ``t2``.

    The fitted value of any response ``z`` at ``t2`` is ``w(t2) @ z``.
    """
    t2 = np.atleast_1d(np.asarray(t2, dtype=float))
    mom, d, kern = local_moments(a, k, t2)
    g = mom.g
    bad = _degenerate(a, k, t2, g)
    if bad.any():
        raise DegenerateWindowError(t2[bad])
    scale = a.size * k.bandwidth
    return (mom.s2[:, None] - mom.s1[:, None] * d) * kern / (scale * g[:, None])


def local_linear_fit(a, z, k: KernelSpec, t2) -> np.ndarray:
    """Local linear smooth of responses ``z`` on ``a``, evaluated at ``t2``."""
    a = np.asarray(a, dtype=float)
    return smoother_weights(a, k, t2) @ np.asarray(z, dtype=float)


def loclin_eval(data: ObsCont, k: KernelSpec, t1: float, t2: float) -> float:
    z = (data.y <= t1).astype(float)
    return float(local_linear_fit(data.a, z, k, t2)[0])


@dataclass(frozen=True)
class LocalLinearSurface:
    values: GridFunction
    n_clipped: int
    boundary_t2: np.ndarray  # mask over the t2 axis: within h of {0, 1}


def _surface(a: np.ndarray, y: np.ndarray, k: KernelSpec, grid: Lattice) -> np.ndarray:
    t1, t2 = grid.axes
    w = smoother_weights(a, k, t2)
    ind = (y[:, None] <= t1[None, :]).astype(float)
    return ind.T @ w.T  # (t1, t2)


def loclin_grid(data: ObsCont, k: KernelSpec, grid: Lattice, clip: bool = True) -> LocalLinearSurface:
    """Evaluate the estimator over a 2-D ``(t1, t2)`` lattice.

    With ``clip`` the values are truncated to the CDF range [0, 1] and the
    number of truncated points is reported.
    """
    if grid.dims != 2:
        raise LatticeError("loclin_grid needs a (t1, t2) lattice")
    vals = _surface(data.a, data.y, k, grid)
    n_clipped = int(np.sum((vals < 0) | (vals > 1)))
    if clip:
        vals = np.clip(vals, 0.0, 1.0)
    h = k.bandwidth
    t2 = grid.axes[1]
    return LocalLinearSurface(GridFunction(grid, vals), n_clipped, (t2 < h) | (t2 > 1 - h))


def select_bandwidth(data: ObsCont, constant: float = 2.0) -> float:
    """Rule of thumb ``h = C * sd(A) * n^(-1/5)``, clamped to ``[2/sqrt(n), 0.5]``."""
    n = len(data)
    if n < 30:
        raise ValueError(f"bandwidth rule needs n >= 30, got {n}")
    sd = float(np.std(data.a, ddof=1))
    if not sd > 0:
        raise ValueError("exposure has zero variance")
    h = constant * sd * n ** (-0.2)
    return float(min(max(h, 2.0 / math.sqrt(n)), 0.5))


def bootstrap_band(
    data: ObsCont,
    k: KernelSpec,
    grid: Lattice,
    level: float = 0.95,
    reps: int = 200,
    rng=None,
    max_fail: float = 0.05,
) -> Band:
    """Variable-width nonparametric bootstrap band around the unclipped estimate.

    Pairs are resampled with replacement and the surface recomputed with the
    same bandwidth. ``sigma(t)`` is the bootstrap SD (floored), and the
    critical value is the ``level`` quantile of
    ``sup_t |theta_b(t) - theta(t)| / sigma(t)``.
    """
    if reps < 100:
        raise ValueError("need at least 100 bootstrap replicates")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    theta = _surface(data.a, data.y, k, grid).ravel()
    n = len(data)
    boots = []
    failed = 0
    for _ in range(reps):
        idx = gen.integers(0, n, size=n)
        try:
            boots.append(_surface(data.a[idx], data.y[idx], k, grid).ravel())
        except DegenerateWindowError:
            failed += 1
    if failed > max_fail * reps:
        raise RuntimeError(f"{failed} of {reps} bootstrap replicates had degenerate windows")
    if failed:
        log.info("dropped %d degenerate bootstrap replicates", failed)
    boots = np.asarray(boots)
    sigma = np.maximum(boots.std(axis=0, ddof=1), SIGMA_FLOOR)
    sups = np.max(np.abs(boots - theta) / sigma, axis=1)
    q = float(np.quantile(sups, level))
    half = q * sigma
    return Band(
        GridFunction(grid, theta - half),
        GridFunction(grid, theta + half),
        level,
        diagnostics={"failed_replicates": failed, "critical_value": q},
    )


def truth_curve(grid: Lattice) -> GridFunction:
    """``Phi(logit(t1) - 0.5 * [1 + (t2 - 1.2)^2])`` under the simulation design."""
    if grid.dims != 2:
        raise LatticeError("truth_curve needs a (t1, t2) lattice")
    t1, t2 = np.meshgrid(*grid.axes, indexing="ij")
    if np.any((t1 <= 0) | (t1 >= 1)):
        raise LatticeError("t1 must lie inside (0, 1)")
    return GridFunction(grid, ndtr(logit(t1) - conditional_median_logit(t2)))


def conditional_median_logit(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return 0.5 * (1.0 + (a - 1.2) ** 2)


def square_grid(
    n: int,
    t1_range: tuple[float, float] = (0.4, 0.9),
    t2_range: tuple[float, float] = (0.05, 0.8),
    cap: int = 120,
) -> Lattice:
    """Equally spaced grid with spacing at most ``n^(-4/5)`` on both axes, capped per axis."""
    step = n ** (-0.8)
    axes = []
    for lo, hi in (t1_range, t2_range):
        count = min(cap, int(math.ceil((hi - lo) / step - 1e-9)) + 1)
        axes.append(np.linspace(lo, hi, max(count, 2)))
    return Lattice(axes)

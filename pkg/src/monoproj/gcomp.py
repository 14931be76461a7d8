"""AIPW estimation of a G-computed distribution function.

The target is ``theta_a0(t) = E_W{ P(Y <= t | A = a0, W) }`` for a binary
exposure ``A`` and covariates ``W = (W1, W2)``. Nuisances are fitted with the
parametric forms that are correctly specified for the simulation design:
a logistic propensity in ``(1, w1, w2)`` and a Gaussian linear model for
``logit(Y)`` in ``(1, a, w2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit, ndtr

from .lattice import GridFunction, Lattice, LatticeError

PROPENSITY_TRUNCATION = (0.01, 0.99)

# simulation design
TRUE_PROPENSITY = (0.5, 1.0, -2.0)
TRUE_OUTCOME_MEAN = (0.2, -0.3, -4.0)
TRUE_OUTCOME_SD = math.sqrt(0.3)


class NuisanceError(RuntimeError):
    pass


@dataclass(frozen=True)
class ObsBinary:
    """Columnar sample of ``(y, a, w1, w2)`` observations."""

    y: np.ndarray
    a: np.ndarray
    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        cols = {k: np.asarray(getattr(self, k), dtype=float).ravel() for k in ("y", "a", "w1", "w2")}
        n = cols["y"].size
        if any(c.size != n for c in cols.values()):
            raise ValueError("columns differ in length")
        if np.any((cols["y"] <= 0) | (cols["y"] >= 1)):
            raise ValueError("outcomes must lie strictly inside (0, 1)")
        if np.any((cols["a"] != 0) & (cols["a"] != 1)):
            raise ValueError("exposure must be binary")
        if np.any((cols["w1"] != 0) & (cols["w1"] != 1)):
            raise ValueError("w1 must be binary")
        if np.any(np.abs(cols["w2"]) >= 1):
            raise ValueError("w2 must lie in (-1, 1)")
        for k, v in cols.items():
            v.setflags(write=False)
            object.__setattr__(self, k, v)

    def __len__(self) -> int:
        return self.y.size

    def take(self, idx) -> ObsBinary:
        return ObsBinary(self.y[idx], self.a[idx], self.w1[idx], self.w2[idx])


@dataclass(frozen=True)
class NuisanceFits:
    propensity_coef: np.ndarray  # intercept, w1, w2
    outcome_coef: np.ndarray  # intercept, a, w2
    outcome_sd: float

    def __post_init__(self):
        if not self.outcome_sd > 0:
            raise NuisanceError("outcome residual SD must be positive")

    def propensity(self, a0: int, w1, w2) -> np.ndarray:
        """``g(a0 | w)`` truncated to ``PROPENSITY_TRUNCATION``."""
        b = self.propensity_coef
        p1 = np.clip(expit(b[0] + b[1] * np.asarray(w1) + b[2] * np.asarray(w2)), *PROPENSITY_TRUNCATION)
        return p1 if a0 == 1 else 1.0 - p1

    def outcome_mean(self, a, w2) -> np.ndarray:
        c = self.outcome_coef
        return c[0] + c[1] * np.asarray(a, dtype=float) + c[2] * np.asarray(w2, dtype=float)


def true_nuisance() -> NuisanceFits:
    return NuisanceFits(np.array(TRUE_PROPENSITY), np.array(TRUE_OUTCOME_MEAN), TRUE_OUTCOME_SD)


def _logistic_irls(X: np.ndarray, y: np.ndarray, tol: float = 1e-10, max_iter: int = 100) -> np.ndarray:
    beta = np.zeros(X.shape[1])
    for _ in range(max_iter):
        p = expit(X @ beta)
        w = p * (1 - p)
        hess = X.T @ (X * w[:, None])
        try:
            step = np.linalg.solve(hess, X.T @ (y - p))
        except np.linalg.LinAlgError as exc:
            raise NuisanceError("singular information matrix in logistic fit") from exc
        beta = beta + step
        if not np.all(np.isfinite(beta)) or np.max(np.abs(beta)) > 50:
            raise NuisanceError("logistic fit diverged (possible separation)")
        if np.max(np.abs(step)) < tol:
            return beta
    raise NuisanceError(f"logistic fit did not converge in {max_iter} iterations")


def fit_nuisance(data: ObsBinary) -> NuisanceFits:
    n = len(data)
    if n < 20:
        raise NuisanceError(f"need at least 20 observations, got {n}")
    if data.a.min() == data.a.max():
        raise NuisanceError("both exposure arms must be present")
    Xg = np.column_stack([np.ones(n), data.w1, data.w2])
    prop = _logistic_irls(Xg, data.a)
    Xq = np.column_stack([np.ones(n), data.a, data.w2])
    z = logit(data.y)
    coef, *_ = np.linalg.lstsq(Xq, z, rcond=None)
    rss = float(np.sum((z - Xq @ coef) ** 2))
    sd = math.sqrt(rss / (n - 3))
    if sd <= 1e-12 * max(1.0, float(np.abs(z).max())):
        raise NuisanceError("outcome model has zero residual variance")
    return NuisanceFits(prop, coef, sd)


def qbar(fits: NuisanceFits, t, a, w2) -> np.ndarray:
    """Fitted ``P(Y <= t | A = a, W2 = w2)``; broadcasts over its arguments."""
    t = np.asarray(t, dtype=float)
    if np.any((t <= 0) | (t >= 1)):
        raise ValueError("t must lie strictly inside (0, 1)")
    return ndtr((logit(t) - fits.outcome_mean(a, w2)) / fits.outcome_sd)


@dataclass(frozen=True)
class EstimateWithInfluence:
    """Estimates on a lattice with the ``n x m`` matrix of influence values."""

    values: GridFunction
    influence: np.ndarray
    truncation_warning: bool = False
    notes: dict = field(default_factory=dict)

    @property
    def lattice(self) -> Lattice:
        return self.values.lattice


def aipw_curve(data: ObsBinary, fits: NuisanceFits, a0: int, grid: Lattice) -> EstimateWithInfluence:
    if grid.dims != 1:
        raise LatticeError("aipw_curve evaluates on a one-dimensional grid of t values")
    t = grid.axes[0]
    if t[0] <= 0 or t[-1] >= 1:
        raise LatticeError("evaluation points must lie inside (0, 1)")
    q = qbar(fits, t[None, :], a0, data.w2[:, None])
    g = fits.propensity(a0, data.w1, data.w2)
    arm = data.a == a0
    resid = (data.y[:, None] <= t[None, :]) - q
    term = (arm / g)[:, None] * resid + q
    theta = term.mean(axis=0)
    at_floor = np.mean(g[arm] <= PROPENSITY_TRUNCATION[0]) if arm.any() else 0.0
    return EstimateWithInfluence(
        GridFunction(grid, theta),
        term - theta,
        truncation_warning=bool(at_floor > 0.10),
    )


def bivariate_stack(curve0: EstimateWithInfluence, curve1: EstimateWithInfluence) -> EstimateWithInfluence:
    """Stack the a0 = 0 and a0 = 1 curves into a ``2 x m`` estimate on {0, 1} x T."""
    if curve0.lattice != curve1.lattice or curve0.lattice.dims != 1:
        raise LatticeError("curves must share the same one-dimensional t-grid")
    if curve0.influence.shape != curve1.influence.shape:
        raise LatticeError("influence matrices differ in shape")
    lat = Lattice([[0.0, 1.0], curve0.lattice.axes[0]])
    values = np.concatenate([curve0.values.values, curve1.values.values])
    return EstimateWithInfluence(
        GridFunction(lat, values),
        np.hstack([curve0.influence, curve1.influence]),
        truncation_warning=curve0.truncation_warning or curve1.truncation_warning,
    )


def evaluation_grid(y: np.ndarray, mode: str = "observed", lo: float = 0.1, hi: float = 0.9) -> Lattice:
    """t-grid for the estimator.

    ``observed`` uses every distinct outcome in ``[lo, hi]``; ``equispaced``
    uses ``ceil(sqrt(n))`` equally spaced points on ``[lo, hi]``.
    """
    if mode == "observed":
        t = np.unique(y[(y >= lo) & (y <= hi)])
        if t.size == 0:
            raise LatticeError(f"no observed outcomes in [{lo}, {hi}]")
    elif mode == "equispaced":
        t = np.linspace(lo, hi, max(2, math.ceil(math.sqrt(len(y)))))
    else:
        raise ValueError(f"unknown grid mode {mode!r}")
    return Lattice([t])


def truth_curve(a0: int, t, tol: float = 1e-10) -> np.ndarray:
    """True G-computed CDF under the simulation design.

    The inner CDF does not depend on ``w1``; the ``w2`` integral over the
    uniform law on (-1, 1) uses Gauss-Legendre, doubling the order until
    successive values agree to ``tol``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    c = TRUE_OUTCOME_MEAN

    def rule(order):
        nodes, wts = np.polynomial.legendre.leggauss(order)
        mu = c[0] + c[1] * a0 + c[2] * nodes
        vals = ndtr((logit(t)[:, None] - mu[None, :]) / TRUE_OUTCOME_SD)
        return 0.5 * vals @ wts

    order = 32
    prev = rule(order)
    while order < 4096:
        order *= 2
        cur = rule(order)
        if np.max(np.abs(cur - prev)) < tol:
            return cur
        prev = cur
    return prev

"""Off-grid evaluation of a monotone grid function.

Both schemes return a convex combination of the vertex values of the cell
enclosing the query point, which is what keeps the sup-norm guarantees of
the projection valid between lattice points.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .isotonic import monotonicity_residual
from .lattice import GridFunction, LatticeError


class Scheme(enum.Enum):
    NEAREST = "nearest"
    MULTILINEAR = "multilinear"


def _cell(ax: np.ndarray, x: float) -> tuple[int, float]:
    """Lower vertex index and fractional position of ``x`` in its cell.

    A point on a shared face goes to the cell with the smaller index.
    """
    if ax.size == 1:
        return 0, 0.0
    k = int(np.searchsorted(ax, x, side="left")) - 1
    k = min(max(k, 0), ax.size - 2)
    lam = (x - ax[k]) / (ax[k + 1] - ax[k])
    return k, float(min(max(lam, 0.0), 1.0))


def _nearest(ax: np.ndarray, x: float) -> int:
    # argmin returns the first minimiser, so ties go to the lower index
    return int(np.argmin(np.abs(ax - x)))


@dataclass(frozen=True)
class Interpolator:
    source: GridFunction
    scheme: Scheme = Scheme.MULTILINEAR
    check_monotone: bool = True

    def __post_init__(self):
        if self.check_monotone and monotonicity_residual(self.source.array) > 1e-8:
            raise ValueError("interpolation source must be monotone")

    def _check_point(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float).ravel()
        lat = self.source.lattice
        if t.size != lat.dims:
            raise LatticeError(f"expected a {lat.dims}-vector, got {t.size} coordinates")
        for x, ax in zip(t, lat.axes):
            if x < ax[0] or x > ax[-1]:
                raise LatticeError(f"point {t.tolist()} outside the lattice bounding box")
        return t

    def weights(self, t) -> list[tuple[tuple[int, ...], float]]:
        """Vertices and convex weights used to evaluate at ``t``."""
        t = self._check_point(t)
        lat = self.source.lattice
        if self.scheme is Scheme.NEAREST:
            return [(tuple(_nearest(ax, x) for ax, x in zip(lat.axes, t)), 1.0)]
        cells = [_cell(ax, x) for ax, x in zip(lat.axes, t)]
        out = []
        for corner in itertools.product((0, 1), repeat=lat.dims):
            idx, w = [], 1.0
            for (k, lam), bit, n in zip(cells, corner, lat.shape):
                if n == 1:
                    if bit:
                        w = 0.0
                    idx.append(0)
                    continue
                idx.append(k + bit)
                w *= lam if bit else 1.0 - lam
            if w > 0.0:
                out.append((tuple(idx), w))
        return out

    def eval(self, t) -> float:
        arr = self.source.array
        return float(sum(w * arr[idx] for idx, w in self.weights(t)))

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.array([self.eval(p) for p in pts])

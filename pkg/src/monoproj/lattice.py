"""Rectangular lattices in [0, 1]^d and functions defined on them.

Grid values are always stored flat in row-major order over the axes (the
last axis varies fastest), so ``values.reshape(lattice.shape)`` recovers
the d-dimensional array.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_ORACLE_POINTS = 16


class LatticeError(ValueError):
    """Raised for malformed lattices, indices or grid functions."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


class Lattice:
    """Cartesian product of strictly increasing coordinate vectors.

    Parameters
    ----------
    axes : sequence of array_like
        One coordinate vector per dimension. Each must be non-empty,
        strictly increasing and contained in [0, 1].
    """

    __slots__ = ("axes", "shape", "size")

    def __init__(self, axes: Sequence[Sequence[float]]):
        if len(axes) == 0:
            raise LatticeError("a lattice needs at least one axis")
        frozen = []
        for j, ax in enumerate(axes):
            ax = np.asarray(ax, dtype=float).ravel()
            if ax.size == 0:
                raise LatticeError(f"axis {j} is empty")
            if not np.all(np.isfinite(ax)):
                raise LatticeError(f"axis {j} contains non-finite coordinates")
            if np.any(np.diff(ax) <= 0):
                raise LatticeError(f"axis {j} is not strictly increasing")
            if ax[0] < 0.0 or ax[-1] > 1.0:
                raise LatticeError(f"axis {j} leaves the unit interval")
            frozen.append(_frozen(ax))
        self.axes = tuple(frozen)
        self.shape = tuple(ax.size for ax in self.axes)
        self.size = int(np.prod(self.shape))

    @property
    def dims(self) -> int:
        return len(self.axes)

    def __repr__(self) -> str:
        return f"Lattice(shape={self.shape})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Lattice):
            return NotImplemented
        return self.shape == other.shape and all(
            np.array_equal(a, b) for a, b in zip(self.axes, other.axes)
        )

    def __hash__(self) -> int:
        return hash(tuple(ax.tobytes() for ax in self.axes))

    def index_array(self) -> np.ndarray:
        """Integer axis indices of every point, shape ``(size, dims)``."""
        grids = np.meshgrid(*[np.arange(n) for n in self.shape], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def points(self) -> np.ndarray:
        """Coordinates of every point in storage order, shape ``(size, dims)``."""
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def flat_index(self, idx: GridIndex | Sequence[int]) -> int:
        coords = idx.coords if isinstance(idx, GridIndex) else tuple(idx)
        check_index(coords, self)
        return int(np.ravel_multi_index(coords, self.shape))

    def grid_index(self, flat: int) -> GridIndex:
        if not 0 <= flat < self.size:
            raise LatticeError(f"flat index {flat} out of range for {self!r}")
        return GridIndex(tuple(int(i) for i in np.unravel_index(flat, self.shape)))


@dataclass(frozen=True)
class GridIndex:
    coords: tuple[int, ...]


def check_index(coords: Sequence[int], lat: Lattice) -> None:
    if len(coords) != lat.dims:
        raise LatticeError(f"index {tuple(coords)} has wrong dimension for {lat!r}")
    for c, n in zip(coords, lat.shape):
        if not 0 <= c < n:
            raise LatticeError(f"index {tuple(coords)} out of bounds for {lat!r}")


class GridFunction:
    """Real values attached to the points of a lattice."""

    __slots__ = ("lattice", "values")

    def __init__(self, lattice: Lattice, values):
        vals = np.asarray(values, dtype=float).ravel()
        if vals.size != lattice.size:
            raise LatticeError(
                f"got {vals.size} values for a lattice with {lattice.size} points"
            )
        if not np.all(np.isfinite(vals)):
            raise LatticeError("grid function values must be finite")
        self.lattice = lattice
        self.values = _frozen(vals)

    @property
    def array(self) -> np.ndarray:
        return self.values.reshape(self.lattice.shape)

    def __getitem__(self, idx) -> float:
        return float(self.values[self.lattice.flat_index(idx)])

    def __repr__(self) -> str:
        return f"GridFunction({self.lattice!r})"

    def with_values(self, values) -> GridFunction:
        return GridFunction(self.lattice, values)

    def sup_distance(self, other: GridFunction) -> float:
        """``max_t |self(t) - other(t)|`` over the shared lattice."""
        require_same_lattice(self, other)
        return float(np.max(np.abs(self.values - other.values)))


def require_same_lattice(*funcs: GridFunction) -> None:
    first = funcs[0].lattice
    for f in funcs[1:]:
        if f.lattice is not first and f.lattice != first:
            raise LatticeError("grid functions live on different lattices")


def partial_le(a: GridIndex, b: GridIndex, lat: Lattice) -> bool:
    """Component-wise order on lattice indices."""
    check_index(a.coords, lat)
    check_index(b.coords, lat)
    return all(x <= y for x, y in zip(a.coords, b.coords))


def mesh(lat: Lattice, domain: Sequence[tuple[float, float]] | None = None) -> float:
    """Largest max-norm distance from a point of ``domain`` to the lattice.

    For a product grid the nearest lattice point can be found axis by axis,
    so the sup over the box is the largest per-axis value of the boundary
    gaps and half the largest interior gap.
    """
    if domain is None:
        domain = [(0.0, 1.0)] * lat.dims
    if len(domain) != lat.dims:
        raise LatticeError("domain must give one (low, high) pair per axis")
    worst = 0.0
    for ax, (lo, hi) in zip(lat.axes, domain):
        if ax[0] < lo or ax[-1] > hi:
            raise LatticeError("domain does not enclose the lattice")
        gaps = [ax[0] - lo, hi - ax[-1]]
        if ax.size > 1:
            gaps.append(0.5 * float(np.max(np.diff(ax))))
        worst = max(worst, *gaps)
    return float(worst)


def _successor_masks(lat: Lattice) -> list[int]:
    """Bitmask of immediate successors (one step up one axis) of each point."""
    masks = []
    for flat in range(lat.size):
        coords = np.unravel_index(flat, lat.shape)
        m = 0
        for j in range(lat.dims):
            if coords[j] + 1 < lat.shape[j]:
                up = list(coords)
                up[j] += 1
                m |= 1 << int(np.ravel_multi_index(up, lat.shape))
        masks.append(m)
    return masks


def enumerate_upper_sets(lat: Lattice) -> list[frozenset[int]]:
    """All upper sets of a small lattice, as sets of flat indices.

    A set is upward closed iff it contains the immediate successors of each
    of its members, which is all that is checked per candidate subset.
    """
    if lat.size > MAX_ORACLE_POINTS:
        raise LatticeError(
            f"upper-set enumeration limited to {MAX_ORACLE_POINTS} points, got {lat.size}"
        )
    succ = _successor_masks(lat)
    out = []
    for mask in range(1 << lat.size):
        ok = True
        for i in range(lat.size):
            if mask >> i & 1 and succ[i] & ~mask:
                ok = False
                break
        if ok:
            out.append(frozenset(i for i in range(lat.size) if mask >> i & 1))
    return out


def enumerate_lower_sets(lat: Lattice) -> list[frozenset[int]]:
    full = frozenset(range(lat.size))
    return [full - u for u in enumerate_upper_sets(lat)]


def regular_axis(lo: float, hi: float, count: int) -> np.ndarray:
    if count < 1:
        raise LatticeError("axis needs at least one point")
    if count == 1:
        return np.array([0.5 * (lo + hi)])
    return np.linspace(lo, hi, count)


def product_lattice(*axes: Sequence[float]) -> Lattice:
    return Lattice(list(axes))


def iter_indices(lat: Lattice):
    for coords in itertools.product(*[range(n) for n in lat.shape]):
        yield GridIndex(coords)

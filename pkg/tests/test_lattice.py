import itertools

import numpy as np
import pytest

from monoproj.lattice import (
    GridFunction,
    GridIndex,
    Lattice,
    LatticeError,
    enumerate_lower_sets,
    enumerate_upper_sets,
    mesh,
    partial_le,
)


def test_lattice_validation():
    with pytest.raises(LatticeError):
        Lattice([])
    with pytest.raises(LatticeError):
        Lattice([[]])
    with pytest.raises(LatticeError):
        Lattice([[0.2, 0.2]])
    with pytest.raises(LatticeError):
        Lattice([[0.5, 1.5]])
    with pytest.raises(LatticeError):
        Lattice([[0.0, np.nan]])


def test_grid_function_shape_and_access():
    lat = Lattice([[0, 1], [0, 0.5, 1]])
    f = GridFunction(lat, np.arange(6))
    assert f.array.shape == (2, 3)
    assert f[(1, 2)] == 5.0
    assert f[GridIndex((0, 1))] == 1.0
    with pytest.raises(LatticeError):
        GridFunction(lat, np.arange(5))
    with pytest.raises(LatticeError):
        GridFunction(lat, [0, 1, 2, 3, 4, np.inf])
    with pytest.raises(ValueError):
        f.values[0] = 3.0


def test_partial_le_examples():
    lat = Lattice([[0, 1], [0, 1]])
    assert partial_le(GridIndex((0, 0)), GridIndex((1, 1)), lat)
    assert not partial_le(GridIndex((0, 1)), GridIndex((1, 0)), lat)
    assert partial_le(GridIndex((1, 0)), GridIndex((1, 0)), lat)
    with pytest.raises(LatticeError):
        partial_le(GridIndex((0, 2)), GridIndex((1, 0)), lat)


def test_partial_le_is_partial_order(rng):
    lat = Lattice([np.linspace(0, 1, 4)] * 3)
    for _ in range(300):
        a, b, c = (GridIndex(tuple(int(v) for v in rng.integers(0, 4, 3))) for _ in range(3))
        assert partial_le(a, a, lat)
        if partial_le(a, b, lat) and partial_le(b, a, lat):
            assert a == b
        if partial_le(a, b, lat) and partial_le(b, c, lat):
            assert partial_le(a, c, lat)


@pytest.mark.parametrize(
    "axes, expected",
    [([[0, 0.5, 1]], 0.25), ([[0, 1], [0, 1]], 0.5), ([[0.25, 0.75]], 0.25)],
)
def test_mesh_examples(axes, expected):
    assert mesh(Lattice(axes)) == pytest.approx(expected, abs=1e-15)


def test_mesh_refinement_never_increases(rng):
    for _ in range(50):
        ax = np.sort(rng.random(5))
        finer = np.union1d(ax, rng.random(3))
        assert mesh(Lattice([finer, ax])) <= mesh(Lattice([ax, ax])) + 1e-15


@pytest.mark.parametrize("shape, count", [((2,), 3), ((2, 2), 6), ((3, 3), 20)])
def test_upper_set_counts(shape, count):
    lat = Lattice([np.linspace(0, 1, s) for s in shape])
    assert len(enumerate_upper_sets(lat)) == count


def test_chain_upper_sets_are_tails():
    lat = Lattice([[0, 1]])
    assert set(enumerate_upper_sets(lat)) == {frozenset(), frozenset({1}), frozenset({0, 1})}


@pytest.mark.parametrize("shape", [(2,), (3,), (2, 2), (2, 3), (3, 3), (2, 2, 2)])
def test_upper_lower_duality(shape):
    lat = Lattice([np.linspace(0, 1, s) for s in shape])
    pts = list(itertools.product(*[range(s) for s in shape]))

    def is_upper(s):
        return all(
            np.ravel_multi_index(q, shape) in s
            for i in s
            for q in pts
            if all(x <= y for x, y in zip(np.unravel_index(i, shape), q))
        )

    uppers = set(enumerate_upper_sets(lat))
    full = frozenset(range(lat.size))
    for mask in range(1 << lat.size):
        s = frozenset(i for i in range(lat.size) if mask >> i & 1)
        assert (s in uppers) == is_upper(s)
    assert set(enumerate_lower_sets(lat)) == {full - u for u in uppers}


def test_enumeration_size_guard():
    with pytest.raises(LatticeError):
        enumerate_upper_sets(Lattice([np.linspace(0, 1, 17)]))

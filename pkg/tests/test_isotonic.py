import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_grid, random_monotone
from monoproj.isotonic import (
    SolverConfig,
    lemma3_bound_check,
    monotonicity_residual,
    oracle_minmax,
    pava,
    project_monotone,
    violation_diagnostic,
)
from monoproj.lattice import GridFunction, GridIndex, Lattice, LatticeError

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def grid_of(values, shape):
    lat = Lattice([np.linspace(0, 1, s) if s > 1 else [0.5] for s in shape])
    return GridFunction(lat, np.asarray(values, dtype=float).ravel())


# --- pava -------------------------------------------------------------------

@pytest.mark.parametrize(
    "values, weights, expected",
    [
        ([1, 2, 3], None, [1, 2, 3]),
        ([2, 1], None, [1.5, 1.5]),
        ([1, 3, 2, 4], None, [1, 2.5, 2.5, 4]),
        ([3, 1], [1, 3], [1.5, 1.5]),
    ],
)
def test_pava_examples(values, weights, expected):
    np.testing.assert_allclose(pava(values, weights), expected, rtol=0, atol=1e-15)


def test_pava_errors():
    with pytest.raises(ValueError):
        pava([])
    with pytest.raises(ValueError):
        pava([1, 2], [1, 0])
    with pytest.raises(ValueError):
        pava([1, 2], [1, 2, 3])


@given(arrays(float, st.integers(1, 30), elements=finite), st.data())
def test_pava_blocks_are_weighted_means(y, data):
    w = data.draw(arrays(float, y.shape, elements=st.floats(0.1, 10)))
    x = pava(y, w)
    assert np.all(np.diff(x) >= -1e-9)
    # level sets carry the weighted mean of their inputs
    edges = np.flatnonzero(np.abs(np.diff(x)) > 1e-9 * (1 + np.abs(x[1:]))) + 1
    for block in np.split(np.arange(y.size), edges):
        np.testing.assert_allclose(x[block], np.average(y[block], weights=w[block]), rtol=1e-9, atol=1e-9)


# --- projection ---------------------------------------------------------------

def test_monotone_grid_unchanged():
    f = grid_of([[1, 2], [3, 4]], (2, 2))
    res = project_monotone(f)
    np.testing.assert_array_equal(res.projected.values, f.values)
    assert res.iterations == 1 and res.converged


def test_two_by_two_fixture():
    f = grid_of([[1, 0], [0, 1]], (2, 2))
    res = project_monotone(f)
    np.testing.assert_allclose(res.projected.values, [1 / 3, 1 / 3, 1 / 3, 1], atol=1e-9)
    np.testing.assert_allclose(oracle_minmax(f).values, [1 / 3, 1 / 3, 1 / 3, 1], atol=1e-15)
    assert res.max_kkt_residual < 1e-8


@pytest.mark.parametrize("shape", [(1, 6), (6, 1), (1, 1, 5)])
def test_degenerate_axes_reduce_to_pava(shape, rng):
    y = rng.standard_normal(int(np.prod(shape)))
    res = project_monotone(grid_of(y, shape))
    np.testing.assert_array_equal(res.projected.values, pava(y))


@pytest.mark.parametrize("shape", [(2, 2), (2, 3), (3, 3), (2, 2, 2), (4, 4), (8,)])
def test_matches_oracle(shape, rng):
    for _ in range(25):
        f = random_grid(rng, shape)
        got = project_monotone(f).projected
        assert got.sup_distance(oracle_minmax(f)) <= 1e-7


def test_oracle_examples_and_guard():
    lat = Lattice([[0, 1]])
    np.testing.assert_allclose(oracle_minmax(GridFunction(lat, [2, 1])).values, [1.5, 1.5])
    mono = GridFunction(Lattice([[0, 0.5, 1]] * 2), np.arange(9.0))
    np.testing.assert_allclose(oracle_minmax(mono).values, mono.values)
    with pytest.raises(LatticeError):
        oracle_minmax(GridFunction(Lattice([np.linspace(0, 1, 17)]), np.zeros(17)))


def test_non_convergence_is_flagged(rng):
    f = random_grid(rng, (30, 30))
    res = project_monotone(f, SolverConfig(max_sweeps=2))
    assert not res.converged
    assert res.iterations == 2


def test_large_grid_converges(rng):
    f = random_grid(rng, (60, 50))
    res = project_monotone(f)
    assert res.converged
    assert monotonicity_residual(res.projected.array) < 1e-8
    assert res.max_kkt_residual < 1e-6
    assert abs(res.projected.values.sum() - f.values.sum()) <= 1e-9 * max(1, np.abs(f.values).sum())


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol_dykstra=0)
    with pytest.raises(ValueError):
        SolverConfig(max_sweeps=0)


shapes = st.sampled_from([(5,), (3, 3), (2, 4), (2, 2, 2), (4, 5)])


@st.composite
def grid_pair(draw):
    shape = draw(shapes)
    m = int(np.prod(shape))
    a = draw(arrays(float, m, elements=st.floats(-10, 10)))
    b = draw(arrays(float, m, elements=st.floats(-10, 10)))
    return grid_of(a, shape), grid_of(b, shape)


@settings(max_examples=60, deadline=None)
@given(grid_pair())
def test_contraction_and_idempotence(pair):
    f, g = pair
    pf = project_monotone(f).projected
    pg = project_monotone(g).projected
    assert pf.sup_distance(pg) <= f.sup_distance(g) + 1e-7
    ppf = project_monotone(pf).projected
    assert ppf.sup_distance(pf) <= 1e-7
    assert abs(pf.values.sum() - f.values.sum()) <= 1e-9 * max(1.0, np.abs(f.values).sum())


@settings(max_examples=60, deadline=None)
@given(grid_pair(), st.data())
def test_order_preservation(pair, data):
    f, _ = pair
    bump = data.draw(arrays(float, f.lattice.size, elements=st.floats(0, 5)))
    g = f.with_values(f.values + bump)
    pf = project_monotone(f).projected
    pg = project_monotone(g).projected
    assert np.all(pf.values <= pg.values + 1e-7)


def test_closer_to_any_monotone_target(rng):
    for shape in [(6,), (3, 4), (2, 3, 2)]:
        for _ in range(30):
            f = random_grid(rng, shape)
            g = random_monotone(rng, f.lattice)
            pf = project_monotone(f).projected
            assert pf.sup_distance(g) <= f.sup_distance(g) + 1e-8


# --- kappa and the oscillation bound -----------------------------------------

def test_kappa_examples():
    assert violation_diagnostic(GridFunction(Lattice([[0, 0.5, 1]]), [1, 2, 3])).kappa == 0.0
    d = violation_diagnostic(GridFunction(Lattice([[0, 1]]), [2, 1]))
    assert d.kappa == 1.0 and d.worst_pair == (GridIndex((0,)), GridIndex((1,)))
    d = violation_diagnostic(GridFunction(Lattice([[0, 1 / 3, 2 / 3, 1]]), [1, 3, 2, 4]))
    assert d.kappa == pytest.approx(1 / 3)
    assert d.worst_pair == (GridIndex((1,)), GridIndex((2,)))


def test_kappa_matches_brute_force(rng):
    for _ in range(30):
        f = random_grid(rng, (3, 4))
        pts = f.lattice.points()
        idx = f.lattice.index_array()
        best = 0.0
        for i in range(f.lattice.size):
            for j in range(f.lattice.size):
                if i != j and np.all(idx[i] <= idx[j]) and f.values[j] <= f.values[i]:
                    best = max(best, float(np.max(np.abs(pts[i] - pts[j]))))
        assert violation_diagnostic(f).kappa == pytest.approx(best, abs=1e-15)


def test_kappa_bound_examples():
    f = GridFunction(Lattice([[0, 1]]), [2, 1])
    assert lemma3_bound_check(f, project_monotone(f))
    mono = GridFunction(Lattice([[0, 0.5, 1]]), [0, 1, 2])
    assert lemma3_bound_check(mono, project_monotone(mono))


def test_kappa_bound_random_3x3(rng):
    for _ in range(1000):
        f = random_grid(rng, (3, 3))
        assert lemma3_bound_check(f, project_monotone(f))


def test_kappa_bound_lattice_mismatch():
    f = GridFunction(Lattice([[0, 1]]), [2, 1])
    other = project_monotone(GridFunction(Lattice([[0, 0.5]]), [2, 1]))
    with pytest.raises(LatticeError):
        lemma3_bound_check(f, other)

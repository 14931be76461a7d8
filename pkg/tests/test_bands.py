import numpy as np
import pytest

from conftest import random_grid, random_monotone
from monoproj.bands import (
    Band,
    BandError,
    compare_bands,
    construct_wald,
    correct_band,
    multiplier_band,
)
from monoproj.gcomp import EstimateWithInfluence
from monoproj.lattice import GridFunction, Lattice, LatticeError


def line(values, axis=None):
    values = np.asarray(values, dtype=float)
    return GridFunction(Lattice([axis if axis is not None else np.linspace(0, 1, values.size)]), values)


def test_wald_examples():
    b = construct_wald(line([0.5], [0.5]), line([0.1], [0.5]), 1.96, 10)
    assert b.lower.values[0] == pytest.approx(0.4804) and b.upper.values[0] == pytest.approx(0.5196)
    b = construct_wald(line([0.2, 0.8]), line([0.1, 0.2]), 2, 20)
    np.testing.assert_allclose(b.lower.values, [0.19, 0.78])
    np.testing.assert_allclose(b.upper.values, [0.21, 0.82])


def test_wald_preconditions():
    th, sg = line([0.2, 0.8]), line([0.1, 0.2])
    with pytest.raises(BandError):
        construct_wald(th, sg, 0, 20)
    with pytest.raises(BandError):
        construct_wald(th, sg, 2, 0)
    with pytest.raises(BandError):
        construct_wald(th, line([0.1, 0.0]), 2, 20)


def test_band_validation():
    with pytest.raises(BandError):
        Band(line([1, 2]), line([0, 3]))
    with pytest.raises(LatticeError):
        Band(line([0, 0]), line([1, 1], [0, 0.5]))
    with pytest.raises(BandError):
        Band(line([0, 0]), line([1, 1]), level=1.0)


def test_pava_band_fixture():
    b = Band(line([2, 1]), line([3, 2]))
    c = correct_band(b)
    np.testing.assert_allclose(c.lower.values, [1.5, 1.5])
    np.testing.assert_allclose(c.upper.values, [2.5, 2.5])
    cmp = compare_bands(b, c, line([1.4, 1.6]))
    assert cmp.sum_width_initial == pytest.approx(2.0) and cmp.sum_width_corrected == pytest.approx(2.0)
    # 1.4 lies below the initial lower endpoint 2, so neither band covers it
    assert not cmp.covered_initial and not cmp.covered_corrected
    cmp = compare_bands(b, c, line([2.0, 2.0]))
    assert cmp.covered_initial and cmp.covered_corrected


def test_monotone_band_unchanged():
    b = Band(line([0, 1, 2]), line([1, 2, 3]))
    c = correct_band(b)
    np.testing.assert_array_equal(c.lower.values, b.lower.values)
    np.testing.assert_array_equal(c.upper.values, b.upper.values)
    cmp = compare_bands(b, b, line([0.5, 1.5, 2.5]))
    assert cmp.sum_width_initial == cmp.sum_width_corrected
    assert cmp.covered_initial == cmp.covered_corrected


def test_random_band_properties(rng):
    for _ in range(1000):
        truth = random_monotone(rng, random_grid(rng, (3, 3)).lattice)
        center = truth.with_values(truth.values + 0.1 * rng.standard_normal(truth.lattice.size))
        half = rng.exponential(0.5, center.lattice.size)
        b = Band(center.with_values(center.values - half), center.with_values(center.values + half))
        c = correct_band(b)
        cmp = compare_bands(b, c, truth)
        assert abs(cmp.sum_width_corrected - cmp.sum_width_initial) <= 1e-9 * cmp.sum_width_initial
        assert cmp.sup_width_corrected <= cmp.sup_width_initial + 1e-9
        assert not cmp.covered_initial or cmp.covered_corrected
        assert np.all(c.lower.values <= c.upper.values)


def _estimate(phi, theta=None):
    m = phi.shape[1]
    lat = Lattice([np.linspace(0.1, 0.9, m)] if m > 1 else [[0.5]])
    vals = np.zeros(m) if theta is None else theta
    return EstimateWithInfluence(GridFunction(lat, vals), phi)


def test_multiplier_zero_variance_names_point():
    with pytest.raises(BandError, match=r"\(1,\)"):
        multiplier_band(_estimate(np.column_stack([np.r_[1.0, -1.0].repeat(25), np.zeros(50)])))
    with pytest.raises(BandError):
        multiplier_band(_estimate(np.zeros((10, 3))))


def test_multiplier_single_point_quantile():
    rng = np.random.default_rng(5)
    phi = rng.standard_normal((400, 1))
    phi -= phi.mean()
    b = multiplier_band(_estimate(phi), 0.95, draws=10_000, rng=rng)
    sigma = phi.std()
    q = (b.upper.values[0] - b.lower.values[0]) / 2 * np.sqrt(400) / sigma
    assert q == pytest.approx(1.959964, abs=0.05)


def test_multiplier_width_scales_root_n():
    rng = np.random.default_rng(11)
    base = rng.standard_normal((500, 4)) @ np.array([[1, .5, .2, 0], [0, 1, .5, .2], [0, 0, 1, .5], [0, 0, 0, 1]])
    base -= base.mean(axis=0)
    w1 = multiplier_band(_estimate(base), draws=4000, rng=1).width
    w2 = multiplier_band(_estimate(np.vstack([base, base])), draws=4000, rng=2).width
    np.testing.assert_allclose(w1 / w2, np.sqrt(2), rtol=0.05)


def test_multiplier_deterministic_for_seed():
    phi = np.random.default_rng(3).standard_normal((60, 5))
    a = multiplier_band(_estimate(phi), rng=9)
    b = multiplier_band(_estimate(phi), rng=9)
    np.testing.assert_array_equal(a.lower.values, b.lower.values)


def test_multiplier_preconditions():
    with pytest.raises(BandError):
        multiplier_band(_estimate(np.ones((1, 2))))
    with pytest.raises(BandError):
        multiplier_band(_estimate(np.random.default_rng(0).standard_normal((20, 2))), draws=50)

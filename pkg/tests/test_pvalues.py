import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from snetfdr.distributions import BivariateGaussian, DimensionError, Exponential, Gaussian, Product, UniformCube
from snetfdr.metrics import ks_statistic, uniform_cdf
from snetfdr.pvalues import PValueVector, SequentialUniformizer, fold_transform, sequential_uniformizer, survival_pvalue


def test_survival_examples():
    assert survival_pvalue(Gaussian(0, 1), 0.0) == 0.5
    assert survival_pvalue(Gaussian(0, 1), 40.0) == pytest.approx(0.0, abs=1e-300)
    assert survival_pvalue(Exponential(2), 0.5) == pytest.approx(math.exp(-1), abs=1e-7)
    with pytest.raises(DimensionError):
        survival_pvalue(UniformCube(2), [0.1, 0.2])


def test_fold_examples():
    assert fold_transform(0.5) == 0.0
    assert fold_transform(0.0) == 1.0
    assert fold_transform(0.9) == pytest.approx(0.8)
    for bad in (-0.1, 1.2, float("nan")):
        with pytest.raises(ValueError):
            fold_transform(bad)


def test_survival_uniform_under_null(rng):
    y = Gaussian(0, 1).sample(rng, 100_000)
    assert ks_statistic(survival_pvalue(Gaussian(0, 1), y), uniform_cdf) < 0.01


def test_fold_preserves_uniformity(rng):
    assert ks_statistic(fold_transform(rng.random(100_000)), uniform_cdf) < 0.01


def test_pvalue_vector_validation(tmp_path):
    with pytest.raises(ValueError):
        PValueVector.from_values([0.2, 1.5])
    with pytest.raises(ValueError):
        PValueVector(np.array([0.1, 0.2]), np.array([3, 3]))
    v = PValueVector(np.array([0.25, 0.5]), np.array([7, 9]))
    v.to_csv(tmp_path / "p.csv")
    raw = (tmp_path / "p.csv").read_bytes()
    assert raw == b"sensor_id,p\n7,0.25\n9,0.5\n"
    PValueVector(np.array([[0.1, 0.2]]), np.array([0])).to_csv(tmp_path / "q.csv")
    assert (tmp_path / "q.csv").read_text().splitlines()[0] == "sensor_id,p1,p2"


def test_uniformizer_examples():
    prod = Product((Gaussian(0, 1), Gaussian(0, 1)))
    np.testing.assert_allclose(sequential_uniformizer(prod, [0.0, 0.0]), [0.5, 0.5])
    out = sequential_uniformizer(prod, [8.0, 0.0])
    assert out[0] < 1e-14 and out[1] == pytest.approx(0.5)


def test_uniformizer_null_draws_uniform(rng):
    prod = Product((Gaussian(0, 1), Gaussian(0, 1)))
    u = sequential_uniformizer(prod, prod.sample(rng, 100_000))
    for j in range(2):
        assert ks_statistic(u[:, j], uniform_cdf) < 0.01
    assert abs(np.corrcoef(u.T)[0, 1]) < 0.01
    counts, _, _ = np.histogram2d(u[:, 0], u[:, 1], bins=10, range=[[0, 1], [0, 1]])
    assert stats.chisquare(counts.ravel()).pvalue > 0.001


def test_uniformizer_correlated_quadrature_matches_closed_form(rng):
    bg = BivariateGaussian((0.0, 0.0), (1.0, 1.0), 0.6)
    y = bg.sample(rng, 400)
    closed = SequentialUniformizer(bg)(y)
    quad = SequentialUniformizer(bg, method="quadrature", nodes=2049)(y)
    np.testing.assert_allclose(quad, closed, atol=2e-4)


def test_uniformizer_correlated_null_uniform(rng):
    bg = BivariateGaussian((1.0, -1.0), (2.0, 0.5), -0.7)
    u = sequential_uniformizer(bg, bg.sample(rng, 100_000))
    for j in range(2):
        assert ks_statistic(u[:, j], uniform_cdf) < 0.01
    counts, _, _ = np.histogram2d(u[:, 0], u[:, 1], bins=10, range=[[0, 1], [0, 1]])
    assert stats.chisquare(counts.ravel()).pvalue > 0.001


def test_uniformizer_degenerate_slice():
    from snetfdr.distributions import Tabulated

    tab = np.ones((8, 8))
    tab[:4, :] = 0.0  # no mass for y1 < 0.5
    u = SequentialUniformizer(Tabulated(tab), nodes=257)
    with pytest.raises(ValueError):
        u(np.array([[0.2, 0.5]]))
    assert 0 <= u(np.array([0.7, 0.5]))[1] <= 1


@given(p=st.floats(0, 1))
def test_fold_range_and_symmetry(p):
    assert 0 <= fold_transform(p) <= 1
    assert fold_transform(p) == pytest.approx(fold_transform(1 - p), abs=1e-15)


@given(y=st.floats(-20, 20), shift=st.floats(0.0, 5.0))
def test_survival_monotone(y, shift):
    g = Gaussian(0, 1)
    assert survival_pvalue(g, y + shift) <= survival_pvalue(g, y) + 1e-15

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmvlab.ensembles import sample_reference
from cmvlab.rng import RngStream
from cmvlab.samples import PointConfiguration, SpectrumSample
from cmvlab.stats import (CountingQuery, EdgeEffectWarning, TestFunction,
                          counting_probability, ks_distance,
                          laplace_functional, rescale, spacing_sample,
                          tv_distance_to_poisson)

TWO_PI = 2 * math.pi


def pc(points, window):
    return PointConfiguration(points=np.asarray(points, float), window=window)


class TestRescale:
    def test_example(self):
        sp = SpectrumSample(angles=np.sort([0.0, np.pi / 2, np.pi,
                                            -np.pi / 2]), n=4, meta={})
        cfg = rescale(sp)
        assert np.allclose(np.sort(cfg.points),
                           [-TWO_PI, 0.0, TWO_PI, 2 * TWO_PI])
        assert cfg.window == (-4 * np.pi, 4 * np.pi)
        assert len(cfg) == 4


class TestTestFunction:
    def test_kinds_shapes(self):
        x = np.linspace(-2, 2, 401)
        for kind in ("triangle", "bump", "indicator_smooth"):
            f = TestFunction(kind, center=0.0, width=2.0, height=1.5)
            y = f(x)
            assert np.all(y >= 0) and y.max() <= 1.5 + 1e-12
            assert np.all(y[np.abs(x) >= 1.0] == 0.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            TestFunction("box", 0, 1, 1)
        with pytest.raises(ValueError):
            TestFunction("bump", 0, -1, 1)

    def test_integral(self):
        f = TestFunction("triangle", center=1.0, width=2.0, height=3.0)
        assert f.integral() == pytest.approx(3.0, rel=1e-6)


class TestLaplaceFunctional:
    def test_zero_function(self):
        f = TestFunction("triangle", 0.0, 1.0, 0.0)
        assert laplace_functional(pc([0.1, -0.2], (-1, 1)), f) == 1.0

    def test_empty_configuration(self):
        f = TestFunction("bump", 0.0, 1.0, 1.0)
        assert laplace_functional(pc([], (-1, 1)), f) == 1.0

    def test_edge_warning(self):
        f = TestFunction("bump", 0.0, 10.0, 1.0)
        with pytest.warns(EdgeEffectWarning):
            laplace_functional(pc([0.0], (-1, 1)), f)

    def test_poisson_reference_mean(self):
        # E X_f = exp(integral of (e^-f - 1) / 2 pi) for the Poisson process.
        f = TestFunction("triangle", 0.0, 8.0, 1.3)
        vals = [laplace_functional(
                    sample_reference("poisson", (-20.0, 20.0),
                                     RngStream(10, t)), f)
                for t in range(20_000)]
        expect = math.exp(f.integral(lambda y: (np.exp(-y) - 1.0) / TWO_PI))
        se = np.std(vals, ddof=1) / math.sqrt(len(vals))
        assert abs(np.mean(vals) - expect) < 3 * se

    def test_monotone_in_f(self):
        cfgp = pc([-0.5, 0.2, 0.4], (-1, 1))
        small = TestFunction("triangle", 0.0, 1.5, 0.5)
        large = TestFunction("triangle", 0.0, 1.5, 1.5)
        assert laplace_functional(cfgp, large) <= laplace_functional(
            cfgp, small)


class TestCounting:
    def test_query_validation(self):
        with pytest.raises(ValueError):
            CountingQuery(intervals=((0, 1), (0.5, 2)), counts=(1, 1))
        with pytest.raises(ValueError):
            CountingQuery(intervals=((0, 1),), counts=(-1,))
        with pytest.raises(ValueError):
            CountingQuery(intervals=(), counts=())

    def test_impossible_count(self):
        q = CountingQuery(intervals=((0.0, 1.0),), counts=(99,))
        samples = [pc([0.5], (0, 2)) for _ in range(10)]
        assert counting_probability(samples, q) == 0.0

    def test_poisson_void_probability(self):
        q = CountingQuery(intervals=((0.0, TWO_PI),), counts=(0,))
        samples = [sample_reference("poisson", (0.0, TWO_PI),
                                    RngStream(11, t))
                   for t in range(20_000)]
        p = counting_probability(samples, q)
        se = math.sqrt(math.exp(-1) * (1 - math.exp(-1)) / len(samples))
        assert abs(p - math.exp(-1)) < 3 * se

    def test_clock_single_point_certain(self):
        q = CountingQuery(intervals=((0.0, TWO_PI),), counts=(1,))
        samples = [sample_reference("clock", (0.0, TWO_PI), RngStream(12, t))
                   for t in range(500)]
        assert counting_probability(samples, q) == 1.0

    def test_partition_of_unity(self):
        samples = [sample_reference("poisson", (0.0, TWO_PI),
                                    RngStream(13, t))
                   for t in range(2000)]
        total = sum(counting_probability(
            samples, CountingQuery(intervals=((0.0, TWO_PI),), counts=(k,)))
            for k in range(30))
        assert total == pytest.approx(1.0)


class TestSpacings:
    def test_clock(self, stream):
        cfgp = sample_reference("clock", (-10 * np.pi, 10 * np.pi), stream)
        gaps = spacing_sample(cfgp, core_fraction=1.0)
        assert np.allclose(gaps, TWO_PI)

    def test_example_chain(self):
        sp = SpectrumSample(angles=np.sort([0.0, np.pi / 2, np.pi,
                                            -np.pi / 2]), n=4, meta={})
        gaps = spacing_sample(rescale(sp), core_fraction=1.0)
        assert np.allclose(gaps, TWO_PI)

    def test_poisson_exponential_gaps(self):
        gaps = []
        for t in range(3000):
            cfgp = sample_reference("poisson", (-40 * np.pi, 40 * np.pi),
                                    RngStream(14, t))
            gaps.append(spacing_sample(cfgp, core_fraction=0.5))
        gaps = np.concatenate(gaps)
        # KS against Exponential(mean 2 pi)
        sorted_g = np.sort(gaps)
        emp = np.arange(1, gaps.size + 1) / gaps.size
        ref = 1.0 - np.exp(-sorted_g / TWO_PI)
        assert np.max(np.abs(emp - ref)) < 0.02

    def test_few_points(self):
        assert spacing_sample(pc([0.3], (-1, 1)), 1.0).size == 0
        with pytest.raises(ValueError):
            spacing_sample(pc([0.1, 0.2], (-1, 1)), 0.0)


class TestKsDistance:
    def test_identical(self):
        a = np.array([0.1, 0.5, 2.0])
        assert ks_distance(a, a) == 0.0

    def test_disjoint(self):
        assert ks_distance([0.1, 0.2], [2.5, 2.7]) == 1.0

    def test_half(self):
        assert ks_distance([1.0], [1.0, 2.0]) == pytest.approx(0.5)

    def test_empty_error(self):
        with pytest.raises(ValueError):
            ks_distance([], [1.0])

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=40),
           st.lists(st.floats(-100, 100), min_size=1, max_size=40))
    @settings(max_examples=100, deadline=None)
    def test_bounds_and_symmetry(self, a, b):
        d = ks_distance(a, b)
        assert 0.0 <= d <= 1.0
        assert d == pytest.approx(ks_distance(b, a))


def test_tv_distance_zero_for_exact_pmf():
    from scipy.stats import poisson
    counts = np.repeat(np.arange(20), np.maximum(
        (poisson.pmf(np.arange(20), 1.0) * 1e6).astype(int), 0))
    assert tv_distance_to_poisson(counts, 1.0) < 5e-4

import math

import numpy as np
import pytest
from scipy.stats import kstest, ks_2samp

from cmvlab.ensembles import (cbe_log_density, cbe_two_point_gap_density,
                              log_partition_function, partition_function,
                              sample_cbe, sample_reference)
from cmvlab.errors import DomainError
from cmvlab.rng import RngStream
from cmvlab.samples import PointConfiguration
from cmvlab.stats import spacing_sample, rescale

TWO_PI = 2 * math.pi


class TestPartitionFunction:
    def test_n1(self):
        for beta in (0.1, 1.0, 7.3):
            assert partition_function(1, beta) == pytest.approx(1.0)

    def test_n2_beta2(self):
        assert partition_function(2, 2.0) == pytest.approx(2.0)

    def test_log_space_survives_large_arguments(self):
        val = log_partition_function(500, 4.0)   # beta n / 2 = 1000
        assert np.isfinite(val) and val > 0

    def test_mc_normalization(self, stream):
        # Z_{2,2} = E |e^{i t1} - e^{i t2}|^2 over independent uniforms.
        gen = stream.generator()
        th = gen.uniform(-np.pi, np.pi, (200_000, 2))
        w = 2.0 - 2.0 * np.cos(th[:, 0] - th[:, 1])
        assert abs(np.mean(w) - 2.0) < 0.02


class TestLogDensity:
    def test_n1(self):
        assert cbe_log_density(2.0, [0.4]) == pytest.approx(-math.log(TWO_PI))

    def test_n2_beta2_antipodal(self):
        val = cbe_log_density(2.0, [0.0, np.pi])
        expect = math.log(4.0 / 2.0) - 2 * math.log(TWO_PI)
        assert val == pytest.approx(expect)

    def test_beta0_is_uniform(self):
        assert cbe_log_density(0.0, [0.1, 0.7, 2.0]) == pytest.approx(
            -3 * math.log(TWO_PI))

    def test_coincident_angles(self):
        assert cbe_log_density(2.0, [0.3, 0.3]) == -np.inf


class TestSampleCbe:
    def test_n1_uniform(self):
        vals = np.array([
            sample_cbe(2.0, 1, RngStream(1, t)).angles[0]
            for t in range(4000)])
        assert kstest((vals + np.pi) / TWO_PI, "uniform").pvalue > 0.01

    def test_two_point_gap_density(self):
        draws = 20_000
        gaps = np.empty(2 * draws)
        for t in range(draws):
            sp = sample_cbe(2.0, 2, RngStream(2, t), tol=1e-9)
            d = sp.angles[1] - sp.angles[0]
            gaps[2 * t] = d
            gaps[2 * t + 1] = TWO_PI - d
        hist, edges = np.histogram(gaps, bins=40, range=(0, TWO_PI),
                                   density=True)
        centers = 0.5 * (edges[1:] + edges[:-1])
        ref = cbe_two_point_gap_density(2.0, centers)
        assert np.max(np.abs(hist - ref)) < 0.03

    def test_mean_count_in_arc(self):
        # Rotation invariance: expected count in [a, b) is n (b-a) / 2 pi.
        n, trials = 16, 2000
        a, b = 0.3, 1.1
        counts = []
        for t in range(trials):
            ang = sample_cbe(1.0, n, RngStream(3, t), tol=1e-8).angles
            counts.append(np.sum((ang >= a) & (ang < b)))
        mean = np.mean(counts)
        se = np.std(counts, ddof=1) / math.sqrt(trials)
        assert abs(mean - n * (b - a) / TWO_PI) < 4 * se

    def test_rotation_invariance_of_spacings(self):
        # Independent draws; one set rotated by a fixed angle. Spacing
        # samples must agree in distribution.
        def spacings(seed, rot):
            out = []
            for t in range(300):
                sp = sample_cbe(2.0, 16, RngStream(seed, t), tol=1e-8)
                ang = np.sort((sp.angles + rot + np.pi) % TWO_PI - np.pi)
                out.append(np.diff(ang) * 16)
            return np.concatenate(out)
        p = ks_2samp(spacings(4, 0.0), spacings(5, 1.234)).pvalue
        assert p > 0.01

    def test_beta_large_is_clock(self):
        trials, n = 1000, 16
        good = 0
        for t in range(trials):
            sp = sample_cbe(1e4, n, RngStream(6, t), tol=1e-8)
            gaps = np.diff(sp.angles) * n
            good += np.all(np.abs(gaps - TWO_PI) < 0.5)
        assert good >= 0.99 * trials

    def test_beta_small_is_poisson(self):
        trials, n = 4000, 16
        counts = np.empty(trials)
        for t in range(trials):
            sp = sample_cbe(1e-4, n, RngStream(7, t), tol=1e-8)
            counts[t] = np.sum(np.abs(sp.angles) < TWO_PI / (2 * n))
        ratio = np.var(counts, ddof=1) / np.mean(counts)
        assert 0.9 <= ratio <= 1.1

    def test_invalid_beta(self, stream):
        with pytest.raises(DomainError):
            sample_cbe(0.0, 4, stream)


class TestReferences:
    def test_clock_window_count(self, stream):
        pc = sample_reference("clock", (-10 * np.pi, 10 * np.pi), stream)
        assert len(pc) == 10
        assert np.allclose(np.diff(pc.points), TWO_PI)

    def test_poisson_count_distribution(self):
        counts = [len(sample_reference("poisson", (0.0, TWO_PI),
                                       RngStream(8, t)))
                  for t in range(20_000)]
        from cmvlab.stats import tv_distance_to_poisson
        assert tv_distance_to_poisson(np.array(counts), 1.0) < 0.01

    def test_poisson_disjoint_independence(self):
        c1, c2 = [], []
        for t in range(20_000):
            pc = sample_reference("poisson", (0.0, 4.0), RngStream(9, t))
            c1.append(np.sum(pc.points < 1.0))
            c2.append(np.sum(pc.points >= 3.0))
        rho = np.corrcoef(c1, c2)[0, 1]
        assert abs(rho) < 0.01 + 3.0 / math.sqrt(20_000)

    def test_unknown_kind(self, stream):
        with pytest.raises(ValueError):
            sample_reference("bogus", (0, 1), stream)

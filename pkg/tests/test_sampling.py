import math

import numpy as np
import pytest
from scipy.stats import kstest

from cmvlab.errors import ConfigurationError, DomainError
from cmvlab.rng import RngStream
from cmvlab.sampling import (CoefficientSequence, DecaySchedule, make_schedule,
                             sample_sequence, sample_theta_nu,
                             theta_inverse_moment, theta_log_moment,
                             theta_moment_quad, validate_schedule)


class TestThetaNu:
    def test_second_moment_nu5(self, stream):
        z = sample_theta_nu(5.0, stream, size=1_000_000)
        assert abs(np.mean(np.abs(z) ** 2) - 2.0 / 6.0) < 1e-3

    def test_log_square_moment_nu5(self, stream):
        z = sample_theta_nu(5.0, stream.substream(1), size=1_000_000)
        val = np.mean(np.log(1.0 / (1.0 - np.abs(z) ** 2)) ** 2)
        assert abs(val - 0.5) < 5e-3      # Gamma(3) (2/4)^2

    def test_large_nu_concentrates_at_zero(self, stream):
        z = sample_theta_nu(1e6, stream.substream(2), size=1000)
        assert np.mean(np.abs(z) ** 2 < 1e-4) >= 0.99

    def test_domain_error(self, stream):
        with pytest.raises(DomainError):
            sample_theta_nu(1.0, stream)

    def test_strictly_inside_disk(self, stream):
        z = sample_theta_nu(1.2, stream.substream(3), size=200_000)
        assert np.max(np.abs(z)) < 1.0

    @pytest.mark.parametrize("nu", [2.0, 3.0, 5.0, 11.0, 101.0])
    def test_moment_grid_within_five_sigma(self, nu, stream):
        ns = 100_000
        z = sample_theta_nu(nu, stream.substream(4, int(nu)), size=ns)
        r2 = np.abs(z) ** 2
        se = np.std(r2, ddof=1) / math.sqrt(ns)
        assert abs(np.mean(r2) - 2.0 / (nu + 1.0)) < 5 * se

    def test_phase_uniformity(self, stream):
        z = sample_theta_nu(3.0, stream.substream(5), size=100_000)
        args = (np.angle(z) + 2 * np.pi) % (2 * np.pi)
        assert kstest(args / (2 * np.pi), "uniform").pvalue > 0.01


class TestScheduleConstruction:
    def test_critical_example(self):
        sched = make_schedule("critical", beta=2.0)
        assert sched.nu(0) == pytest.approx(3.0)
        assert sched.second_moment(0) == pytest.approx(0.5)

    def test_fast_example(self):
        sched = make_schedule("fast", decay_exponent=2.0)
        assert sched.second_moment(9) == pytest.approx(0.01)

    def test_slow_example(self):
        sched = make_schedule("slow", epsilon=0.5)
        assert sched.second_moment(3) == pytest.approx(0.5)

    def test_moment_cap_keeps_coefficients_inside_disk(self):
        for sched in (make_schedule("fast", decay_exponent=2.0),
                      make_schedule("slow", epsilon=0.5)):
            m = sched.second_moment(np.arange(100))
            assert np.all(m > 0) and np.all(m < 1)
            assert np.all(sched.nu(np.arange(100)) > 1)

    def test_parameter_validation(self):
        with pytest.raises(ConfigurationError):
            make_schedule("critical")                    # missing beta
        with pytest.raises(ConfigurationError):
            make_schedule("critical", beta=2.0, epsilon=0.5)
        with pytest.raises(ConfigurationError):
            make_schedule("slow", epsilon=1.5)
        with pytest.raises(ConfigurationError):
            make_schedule("fast", decay_exponent=0.5)
        with pytest.raises(ConfigurationError):
            make_schedule("nope")
        with pytest.raises(ConfigurationError):
            make_schedule("critical", beta=2.0, law="bogus")

    def test_json_round_trip(self):
        sched = make_schedule("critical", beta=2.0,
                              law="fixed_modulus_uniform_phase")
        again = DecaySchedule.from_json(sched.to_json())
        assert again == sched

    def test_custom_schedule_not_serializable(self):
        sched = make_schedule("custom",
                              custom_moments=lambda k: 0.3 / (1.0 + k))
        assert sched.second_moment(2) == pytest.approx(0.1)
        with pytest.raises(ConfigurationError):
            sched.to_json()


class TestSampleSequence:
    def test_n1_empty(self, stream):
        seq = sample_sequence(make_schedule("critical", beta=2.0), 1, stream)
        assert seq.alphas.size == 0
        assert 0.0 <= seq.eta < 2 * np.pi

    def test_determinism(self, stream):
        sched = make_schedule("slow", epsilon=0.5)
        a = sample_sequence(sched, 50, RngStream(3, 9))
        b = sample_sequence(sched, 50, RngStream(3, 9))
        assert np.array_equal(a.alphas, b.alphas)
        assert a.eta == b.eta

    def test_moduli_inside_disk(self, stream):
        for regime, kw in (("critical", {"beta": 0.2}),
                           ("slow", {"epsilon": 0.9})):
            seq = sample_sequence(make_schedule(regime, **kw), 2000,
                                  stream.substream(6))
            assert np.max(np.abs(seq.alphas)) < 1.0

    def test_empirical_moments_match_exact_targets(self):
        # 100 independent draws of a long sequence; per-index sample mean of
        # |alpha_k|^2 must sit within 3 Monte Carlo sigma of 2/(beta(k+1)+2).
        sched = make_schedule("critical", beta=2.0)
        ks = [0, 10, 100]
        vals = np.stack([
            np.abs(sample_sequence(sched, 101 + 1, RngStream(77, t)).alphas
                   [ks]) ** 2
            for t in range(100)])
        for j, k in enumerate(ks):
            target = 2.0 / (2.0 * (k + 1) + 2.0)
            se = np.std(vals[:, j], ddof=1) / 10.0
            assert abs(np.mean(vals[:, j]) - target) < 3 * se

    def test_fixed_modulus_law(self, stream):
        sched = make_schedule("critical", beta=2.0,
                              law="fixed_modulus_uniform_phase")
        seq = sample_sequence(sched, 30, stream.substream(7))
        expect = np.sqrt(sched.second_moment(np.arange(29)))
        assert np.allclose(np.abs(seq.alphas), expect)

    def test_coefficient_sequence_validation(self):
        with pytest.raises(DomainError):
            CoefficientSequence(alphas=np.array([1.0 + 0j]), eta=0.0)


class TestValidateSchedule:
    def test_closed_forms_match_quadrature(self):
        # Beta-integral closed forms vs numeric integration, slow schedule.
        sched = make_schedule("slow", epsilon=0.5)
        for k in (0, 10, 100):
            nu = float(sched.nu(k))
            for m in (2.0, 1.5):
                val, err = theta_moment_quad(nu, fn_t=lambda t: t ** m)
                assert abs(val - theta_log_moment(nu, m)) < 1e-8
            val, _ = theta_moment_quad(nu,
                                       fn_t=lambda t: math.exp(0.1 * t))
            assert abs(val - theta_inverse_moment(nu, 0.1)) < 1e-8
            val, _ = theta_moment_quad(nu, lambda u: u)  # E|alpha|^2
            assert abs(val - float(sched.second_moment(k))) < 1e-8

    def test_inverse_moment_bounded_for_slow(self):
        sched = make_schedule("slow", epsilon=0.5)
        inv = theta_inverse_moment(sched.nu(np.arange(200)), 0.1)
        assert np.all(np.isfinite(inv))
        expected = (sched.nu(0) - 1.0) / (sched.nu(0) - 1.0 - 0.2)
        assert inv[0] == pytest.approx(expected)

    def test_log_moment_example(self):
        # critical beta=2, k=4: nu=11, E log^2 = 2 (2/10)^2 = 0.08
        sched = make_schedule("critical", beta=2.0)
        assert theta_log_moment(sched.nu(4), 2.0) == pytest.approx(0.08)

    def test_classification(self):
        d = validate_schedule(make_schedule("fast", decay_exponent=2.0), 1000)
        assert d.satisfies_clock and not d.satisfies_poisson
        d = validate_schedule(make_schedule("critical", beta=2.0), 1000)
        assert d.satisfies_cbe and not d.satisfies_clock
        assert d.cbe_beta == pytest.approx(2.0)
        d = validate_schedule(make_schedule("slow", epsilon=0.5), 1000)
        assert d.satisfies_poisson and not d.satisfies_clock
        assert not d.satisfies_cbe

    def test_fixed_modulus_critical_satisfies_cbe(self):
        sched = make_schedule("critical", beta=2.0,
                              law="fixed_modulus_uniform_phase")
        d = validate_schedule(sched, 1000)
        assert d.satisfies_cbe

    def test_report_is_jsonable(self):
        import json
        d = validate_schedule(make_schedule("critical", beta=1.0), 100)
        json.dumps(d.to_dict())

import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from cmvlab.cmv import build_truncation
from cmvlab.errors import DomainError
from cmvlab.experiments import upsilon_identity_margins
from cmvlab.prufer import (RelativePhaseState, count_in_arcs,
                           count_in_arcs_many, locate_eigenvalues,
                           locate_in_window, phase_at,
                           phase_derivative_at_zero, relative_phase,
                           rotate_to_gamma, upsilon)
from cmvlab.rng import RngStream
from cmvlab.sampling import (CoefficientSequence, make_schedule,
                             sample_sequence)

from conftest import circle_distance

TWO_PI = 2 * math.pi


def upsilon_series(psi, gamma, terms=40):
    """The defining power series, summed directly (test oracle)."""
    total = 0.0
    for ell in range(1, terms + 1):
        total += (2.0 / ell) * np.imag(
            (np.exp(1j * ell * psi) - 1.0) * gamma ** ell)
    return total


class TestUpsilon:
    def test_zero_cases(self):
        assert upsilon(1.3, 0.0) == 0.0
        assert upsilon(0.0, 0.4 + 0.2j) == 0.0

    def test_value_against_series(self):
        assert upsilon(np.pi / 2, 0.5) == pytest.approx(0.92730, abs=1e-4)

    def test_series_agreement_grid(self):
        # 20 x 20 grid with |gamma| <= 0.6: branch must match the series.
        psis = np.linspace(-3.0, 3.0, 20)
        rads = np.linspace(0.03, 0.6, 5)
        args = np.linspace(0.0, TWO_PI, 4, endpoint=False)
        worst = 0.0
        for p in psis:
            for r in rads:
                for a in args:
                    g = r * np.exp(1j * a)
                    worst = max(worst, abs(upsilon(p, g)
                                           - upsilon_series(p, g)))
        assert worst < 1e-8

    def test_range(self):
        rng = np.random.default_rng(0)
        g = 0.99 * np.exp(2j * np.pi * rng.random(500))
        vals = upsilon(rng.uniform(-np.pi, np.pi, 500), g)
        assert np.all(np.abs(vals) < TWO_PI)

    def test_domain(self):
        with pytest.raises(DomainError):
            upsilon(0.5, 1.0 + 0j)

    @given(st.floats(-3.1, 3.1), st.floats(0.0, 0.8),
           st.floats(0.0, TWO_PI))
    @settings(max_examples=200, deadline=None)
    def test_series_agreement_property(self, psi, r, arg):
        g = r * np.exp(1j * arg)
        assert upsilon(psi, g) == pytest.approx(
            upsilon_series(psi, g, terms=200), abs=1e-6)

    def test_quadrature_identities(self):
        for name, margin, tol in upsilon_identity_margins():
            assert margin <= tol, name


class TestRotateToGamma:
    def test_real_coefficients_fixed_point(self):
        seq = CoefficientSequence(alphas=np.array([0.3, -0.5, 0.7]), eta=1.1)
        state = rotate_to_gamma(seq)
        assert np.allclose(state.gammas, seq.alphas)
        assert state.omega == pytest.approx((-1.1) % TWO_PI)

    def test_hand_checked_step(self):
        seq = CoefficientSequence(alphas=np.array([0.5j, 0.1]), eta=0.0)
        state = rotate_to_gamma(seq)
        # B_1(1) = (1 + i/2)/(1 - i/2) = 0.6 + 0.8i
        assert state.gammas[1] == pytest.approx((0.6 + 0.8j) * 0.1)

    def test_rotation_preserves_moduli_and_unimodularity(self):
        seq = sample_sequence(make_schedule("critical", beta=2.0), 10_001,
                              RngStream(9))
        state = rotate_to_gamma(seq)
        assert np.max(np.abs(np.abs(state.gammas) - np.abs(seq.alphas))) \
            < 1e-12


class TestRelativePhase:
    def test_free_phase_is_linear(self):
        state = RelativePhaseState(gammas=np.zeros(7, complex), omega=0.0)
        tr = relative_phase(state, 0.31)
        assert np.allclose(tr.values, 0.31 * np.arange(1, 9))

    def test_monotone_in_theta(self):
        seq = sample_sequence(make_schedule("critical", beta=2.0), 100,
                              RngStream(10))
        state = RelativePhaseState(gammas=seq.alphas, omega=0.0)
        for t in range(100):
            th = np.sort(RngStream(11, t).generator().uniform(-3, 3, 2))
            lo, hi = phase_at(state, th)
            assert lo < hi

    def test_sign_matches_theta(self):
        seq = sample_sequence(make_schedule("slow", epsilon=0.5), 64,
                              RngStream(12))
        state = RelativePhaseState(gammas=seq.alphas, omega=0.0)
        tr_pos = relative_phase(state, 0.2)
        tr_neg = relative_phase(state, -0.2)
        assert np.all(tr_pos.values > 0)
        assert np.all(tr_neg.values < 0)

    def test_martingale_mean(self):
        # E psi_s(theta) = (s+1) theta for rotationally invariant laws;
        # psi_s takes s recurrence steps, so s coefficients.
        theta, s_idx, trials = 0.3, 99, 10_000
        sched = make_schedule("critical", beta=2.0)
        gammas = np.stack([
            sample_sequence(sched, s_idx + 1, RngStream(13, t)).alphas
            for t in range(trials)])
        from cmvlab import kernels
        psis = kernels.phase_final_many(
            gammas, np.full((trials, 1), theta))[:, 0]
        se = psis.std(ddof=1) / math.sqrt(trials)
        assert abs(psis.mean() - (s_idx + 1) * theta) < 4 * se

    def test_variance_identity(self):
        # Var[psi_m - x m'/n] telescopes into summed squared increments.
        n, trials, x = 500, 10_000, 2.0
        theta = x / n
        sched = make_schedule("critical", beta=2.0)
        gammas = np.stack([
            sample_sequence(sched, n, RngStream(14, t)).alphas
            for t in range(trials)])
        psi = np.full(trials, theta)
        sq_sum = np.zeros(trials)
        for k in range(n - 1):
            ups = upsilon(psi, gammas[:, k])
            sq_sum += ups ** 2
            psi = psi + theta + ups
        d = psi - n * theta       # psi_{n-1} - (n) theta, zero-mean
        paired = d ** 2 - sq_sum  # martingale square identity, mean zero
        se = paired.std(ddof=1) / math.sqrt(trials)
        assert abs(paired.mean()) < 4 * se


class TestLocate:
    def test_free_case_exact(self):
        n, omega = 12, 1.234
        state = RelativePhaseState(gammas=np.zeros(n - 1, complex),
                                   omega=omega)
        sp = locate_eigenvalues(state, tol=1e-13)
        expect = np.sort((omega % TWO_PI + TWO_PI * np.arange(n)) / n)
        expect = np.sort((expect + np.pi) % TWO_PI - np.pi)
        assert np.max(np.abs(sp.angles - expect)) < 1e-12

    @pytest.mark.parametrize("regime,kw", [
        ("critical", {"beta": 2.0}),
        ("fast", {"decay_exponent": 2.0}),
        ("slow", {"epsilon": 0.5}),
    ])
    @pytest.mark.parametrize("n", [2, 8, 32])
    def test_oracle_equivalence(self, regime, kw, n):
        sched = make_schedule(regime, **kw)
        for seed in range(3):
            seq = sample_sequence(sched, n, RngStream(seed, 21))
            sp = locate_eigenvalues(rotate_to_gamma(seq), tol=1e-12)
            ev = np.sort(np.angle(sla.eigvals(build_truncation(seq))))
            assert circle_distance(sp.angles, ev) < 1e-8

    def test_gaps_sum_to_full_circle(self):
        seq = sample_sequence(make_schedule("slow", epsilon=0.5), 40,
                              RngStream(15))
        sp = locate_eigenvalues(rotate_to_gamma(seq), tol=1e-12)
        gaps = np.diff(np.concatenate([sp.angles,
                                       [sp.angles[0] + TWO_PI]]))
        assert gaps.sum() == pytest.approx(TWO_PI, abs=1e-9)
        assert np.all(gaps >= 0)

    def test_window_subset_and_counts(self):
        seq = sample_sequence(make_schedule("critical", beta=1.5), 60,
                              RngStream(16))
        state = rotate_to_gamma(seq)
        sp = locate_eigenvalues(state, tol=1e-12)
        win = (-1.2, 0.7)
        inside = sp.angles[(sp.angles > win[0]) & (sp.angles <= win[1])]
        sub = locate_in_window(state, win, tol=1e-12)
        assert sub.size == inside.size
        assert np.max(np.abs(sub - inside)) < 1e-10 if sub.size else True
        assert count_in_arcs(state, [win])[0] == inside.size

    def test_count_many_matches_scalar(self):
        sched = make_schedule("slow", epsilon=0.5)
        arcs = [[-0.4, -0.1], [0.2, 0.5]]
        gammas, omegas, scalar = [], [], []
        for t in range(20):
            seq = sample_sequence(sched, 32, RngStream(17, t))
            st_ = RelativePhaseState(gammas=seq.alphas, omega=-seq.eta)
            gammas.append(st_.gammas)
            omegas.append(st_.omega)
            scalar.append(count_in_arcs(st_, arcs))
        many = count_in_arcs_many(np.stack(gammas), np.array(omegas), arcs)
        assert np.array_equal(many, np.stack(scalar))

    def test_tolerance_is_honored(self):
        seq = sample_sequence(make_schedule("critical", beta=2.0), 24,
                              RngStream(18))
        state = rotate_to_gamma(seq)
        coarse = locate_eigenvalues(state, tol=1e-6).angles
        fine = locate_eigenvalues(state, tol=1e-13).angles
        assert np.max(np.abs(coarse - fine)) < 1e-6


class TestPhaseDerivative:
    def test_free_case(self):
        state = RelativePhaseState(gammas=np.zeros(9, complex), omega=0.0)
        assert phase_derivative_at_zero(state) == pytest.approx(10.0)

    def test_two_site_value(self):
        state = RelativePhaseState(gammas=np.array([0.5 + 0j]), omega=0.0)
        assert phase_derivative_at_zero(state) == pytest.approx(4.0)

    def test_finite_difference(self):
        seq = sample_sequence(make_schedule("critical", beta=2.0), 30,
                              RngStream(19))
        state = rotate_to_gamma(seq)
        h = 1e-6
        lo, hi = phase_at(state, np.array([-h, h]))
        fd = (hi - lo) / (2 * h)
        assert phase_derivative_at_zero(state) == pytest.approx(fd, rel=1e-5)

    def test_positive(self):
        for t in range(10):
            seq = sample_sequence(make_schedule("slow", epsilon=0.8), 50,
                                  RngStream(20, t))
            state = rotate_to_gamma(seq)
            assert phase_derivative_at_zero(state) > 0

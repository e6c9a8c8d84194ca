import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import digamma

from mimorelay import bounds
from mimorelay.precoder import SystemConfig, power_scalars

LOG2E = math.log2(math.e)


def harmonic_exact(n):
    return float(sum((Fraction(1, k) for k in range(1, n + 1)), Fraction(0)))


def ceiling_constant_ref(M, N):
    return (
        math.log2(M / (N * (N - 1)))
        + LOG2E * harmonic_exact(N - 2)
        - LOG2E / N * sum(float(digamma(M - k)) for k in range(N))
    )


def high_snr_ref(cfg):
    rho1, rho2 = power_scalars(cfg)
    M, N = cfg.M, cfg.N
    inner = rho1 * 2 ** (-cfg.B1 / (M - 1)) + (1 + rho1 * M) * 2 ** (-cfg.B2 / (N - 1))
    return 0.5 * math.log2(1 + rho2 * (N - 1) * inner)


class TestSpecialFunctions:
    def test_digamma_one(self):
        assert bounds.digamma_int(1) == pytest.approx(-0.5772156649015329, abs=1e-15)

    def test_recurrence_exact(self):
        assert bounds.digamma_int(2) - bounds.digamma_int(1) == 1.0

    def test_digamma_four(self):
        assert bounds.digamma_int(4) == pytest.approx(-bounds.EULER_GAMMA + 11 / 6, abs=1e-15)
        assert bounds.digamma_int(4) == pytest.approx(1.2561176684318, abs=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 3, 7, 20, 64, 65, 500, 10_000])
    def test_digamma_vs_scipy(self, n):
        assert bounds.digamma_int(n) == pytest.approx(float(digamma(n)), rel=1e-14, abs=1e-15)

    def test_recurrence(self):
        for n in range(1, 60):
            assert bounds.digamma_int(n + 1) - bounds.digamma_int(n) == pytest.approx(1 / n, abs=1e-15)

    def test_domain(self):
        with pytest.raises(ValueError):
            bounds.digamma_int(0)
        with pytest.raises(ValueError):
            bounds.digamma_int(2.5)

    @pytest.mark.parametrize("bits", [0, 1, 5, 10, 16, 20, 21, 25, 30])
    def test_harmonic_vs_digamma(self, bits):
        n = 2**bits
        assert bounds.harmonic_number(n) == pytest.approx(float(digamma(n + 1)) + bounds.EULER_GAMMA, rel=1e-13)

    def test_harmonic_zero(self):
        assert bounds.harmonic_number(0) == 0.0 and bounds.harmonic_number(1) == 1.0


class TestCeilings:
    def test_constant_4_2(self):
        c = bounds.ceiling_constant(4, 2)
        ref = 1.0 - LOG2E / 2 * (float(digamma(4)) + float(digamma(3)))
        assert c == pytest.approx(ref, abs=1e-9)
        assert c == pytest.approx(-0.5718, abs=1e-4)

    @pytest.mark.parametrize("M,N", [(2, 2), (3, 2), (4, 3), (5, 5), (6, 4)])
    def test_constant_general(self, M, N):
        assert bounds.ceiling_constant(M, N) == pytest.approx(ceiling_constant_ref(M, N), abs=1e-12)

    def test_R_U2_example(self):
        ref = math.log2(1.5) + LOG2E * 1.5 + ceiling_constant_ref(4, 2)
        assert bounds.ceiling_R_U2(4, 2, 1) == pytest.approx(ref, abs=1e-12)
        assert bounds.ceiling_R_U2(4, 2, 1) == pytest.approx(2.177, abs=1e-3)

    def test_R_U2_zero_bits(self):
        M, N = 5, 3
        ref = math.log2(1 + (N - 1)) + LOG2E / (N - 1) + bounds.ceiling_constant(M, N)
        assert bounds.ceiling_R_U2(M, N, 0) == pytest.approx(ref, abs=1e-12)

    def test_R_U1_term_by_term(self):
        M, N, B1 = 4, 2, 6
        ref = (
            math.log2(1 - (M - N) / M * 2 ** (-B1 / (M - 1)))
            + LOG2E / (M - 1) * harmonic_exact(2**B1)
            + LOG2E * harmonic_exact(M - 2)
            + LOG2E / (N - 1)
            + ceiling_constant_ref(M, N)
        )
        assert bounds.ceiling_R_U1(M, N, B1) == pytest.approx(ref, abs=1e-12)

    def test_R_U1_zero_bits_harmonic_is_one(self):
        M, N = 4, 2
        parts = math.log2(1 - (M - N) / M) + LOG2E / (M - 1) + LOG2E * 1.5 + LOG2E + bounds.ceiling_constant(M, N)
        assert bounds.ceiling_R_U1(M, N, 0) == pytest.approx(parts, abs=1e-12)

    @pytest.mark.parametrize("fn", [bounds.ceiling_R_U1, bounds.ceiling_R_U2])
    def test_monotone_in_bits(self, fn):
        vals = [fn(4, 2, b) for b in range(0, 31)]
        assert np.all(np.diff(vals) > 0)

    def test_shared_constant(self):
        # the ceilings differ across (M, N) at fixed bits only through c(M, N) and the M-terms
        d2 = bounds.ceiling_R_U2(6, 3, 5) - bounds.ceiling_R_U2(5, 3, 5)
        assert d2 == pytest.approx(bounds.ceiling_constant(6, 3) - bounds.ceiling_constant(5, 3), abs=1e-12)

    def test_large_bits_warns(self):
        with pytest.warns(bounds.ApproximationWarning):
            v = bounds.ceiling_R_U2(4, 2, 31)
        assert np.isfinite(v)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            bounds.ceiling_R_U2(4, 2, 30)

    def test_domain(self):
        with pytest.raises(ValueError):
            bounds.ceiling_R_U1(2, 3, 2)
        with pytest.raises(ValueError):
            bounds.ceiling_R_U2(4, 2, -1)


class TestHighSnrBound:
    @settings(max_examples=100, deadline=None)
    @given(
        N=st.integers(2, 5), dM=st.integers(0, 3), p1=st.floats(-10, 50), p2=st.floats(-10, 50),
        B1=st.integers(0, 40), B2=st.integers(0, 40),
    )
    def test_formula(self, N, dM, p1, p2, B1, B2):
        cfg = SystemConfig.from_db(N + dM, N, p1, p2, B1=B1, B2=B2)
        assert bounds.rate_loss_bound_high_snr(cfg) == pytest.approx(high_snr_ref(cfg), rel=1e-12, abs=1e-15)

    def test_ideal_feedback_is_zero(self):
        assert bounds.high_snr_bound(4, 2, 100, 100, None, None) == 0.0
        assert bounds.high_snr_bound(4, 2, 100, 100, 4000, 4000) == 0.0

    def test_exact_plan_gives_half(self):
        plan = bounds.scale_bits(4, 2, 100, 100, 2, 0.5)
        assert bounds.high_snr_bound(4, 2, 100, 100, plan.B1_exact, plan.B2_exact) == pytest.approx(0.5, abs=1e-9)

    def test_ceiled_plan(self):
        v = bounds.rate_loss_bound_high_snr(SystemConfig(4, 2, 100.0, 100.0, B1=14, B2=7))
        assert v <= 0.5
        assert v == pytest.approx(0.4558, abs=1e-3)


class TestFirstTerm:
    def test_ideal_feedback(self):
        est = bounds.first_term_estimate(4, 2, None, trials=50)
        assert est.expectation == 0.0 and est.term == 0.0

    def test_decreasing_in_bits(self):
        prev = None
        for B1 in (2, 5, 8, 11, 14):
            est = bounds.first_term_estimate(4, 2, B1, trials=4000, seed=3)
            if prev is not None:
                assert est.term <= prev.term + 3 * np.hypot(est.term_std_error, prev.term_std_error)
            prev = est

    def test_deterministic(self):
        a = bounds.first_term_estimate(4, 2, 6, trials=300, seed=4)
        b = bounds.first_term_estimate(4, 2, 6, trials=300, seed=4)
        assert a == b

    def test_reference_loop(self):
        # per-trial recomputation with an explicit eigen-solver
        from mimorelay.cmatrix import RngStream, haar_from_gaussian, sample_gaussian_matrix
        from mimorelay.quantizer import apply_quantizer, draw_noise

        x, _ = bounds.first_term_samples(4, 2, 5, trials=20, seed=6)
        for i in range(20):
            gen = RngStream(6, i).generator()
            V = haar_from_gaussian(sample_gaussian_matrix(4, 2, gen))
            vhat, eps, _ = apply_quantizer(V.T, draw_noise(gen, 2, 4, 5, "explicit"), 5, "explicit")
            Q = V.conj().T @ vhat.T @ vhat.conj() @ V
            lam = np.min(np.linalg.eigvals(Q).real)
            assert x[i] == pytest.approx(np.mean(np.sqrt(eps)) / lam, rel=1e-9)


class TestBitScaling:
    def test_example_plan(self):
        plan = bounds.scale_bits(4, 2, 100, 100, 2, 0.5)
        assert plan.alpha == 0.0
        assert plan.B1_exact == pytest.approx(3 * (math.log2(100) - math.log2(4.02)), abs=1e-12)
        assert plan.B1_exact == pytest.approx(13.911, abs=2e-3)
        assert plan.B2_exact == pytest.approx(math.log2(100), abs=1e-12)
        assert (plan.B1, plan.B2) == (14, 7)

    def test_alpha(self):
        for N in (2, 3, 5):
            for b in (1.5, 2, 4):
                plan = bounds.scale_bits(N + 1, N, 10, 10, b, 0.5)
                assert plan.alpha == pytest.approx(math.log2(2 * (N - 1) / (N * (b - 1))), abs=1e-14)

    def test_clamped(self):
        plan = bounds.scale_bits(4, 2, 1.0, 1.0)
        assert plan.B1 == 0 and plan.B1_exact < 0 and plan.clamped

    @settings(max_examples=100, deadline=None)
    @given(
        N=st.integers(2, 6), dM=st.integers(0, 4), p1=st.floats(0, 40), p2=st.floats(0, 40),
        b=st.floats(1.05, 16), theta=st.floats(0.01, 0.99),
    )
    def test_closure(self, N, dM, p1, p2, b, theta):
        M = N + dM
        P1, P2 = 10 ** (p1 / 10), 10 ** (p2 / 10)
        plan = bounds.scale_bits(M, N, P1, P2, b, theta)
        assert bounds.high_snr_bound(M, N, P1, P2, plan.B1_exact, plan.B2_exact) == pytest.approx(
            0.5 * math.log2(b), abs=1e-9
        )
        assert plan.B1 == max(0, math.ceil(plan.B1_exact)) and plan.B2 == max(0, math.ceil(plan.B2_exact))
        if not plan.clamped:
            assert bounds.high_snr_bound(M, N, P1, P2, plan.B1, plan.B2) <= 0.5 * math.log2(b) + 1e-12

    def test_theta_family_same_bound(self):
        vals = []
        for theta in np.linspace(0.05, 0.95, 19):
            plan = bounds.scale_bits(5, 3, 300, 80, 3, theta)
            vals.append(bounds.high_snr_bound(5, 3, 300, 80, plan.B1_exact, plan.B2_exact))
        np.testing.assert_allclose(vals, 0.5 * math.log2(3), atol=1e-12)

    @pytest.mark.parametrize("kw", [dict(b=1.0), dict(theta=0.0), dict(theta=1.0)])
    def test_invalid(self, kw):
        args = dict(b=2.0, theta=0.5)
        args.update(kw)
        with pytest.raises(ValueError):
            bounds.scale_bits(4, 2, 10, 10, **args)

    def test_b1_limit_example(self):
        assert bounds.b1_limit(4, 2, 100) == pytest.approx(3 * math.log2(100) + 3 * math.log2(0.25), abs=1e-12)
        assert bounds.b1_limit(4, 2, 100) == pytest.approx(13.931, abs=1e-3)

    @pytest.mark.parametrize("M,N,P2", [(4, 2, 100), (6, 3, 1e3), (4, 4, 10)])
    def test_b1_limit_matches_large_P1(self, M, N, P2):
        assert bounds.b1_limit(M, N, P2) == pytest.approx(bounds.scale_bits(M, N, 1e12, P2).B1_exact, abs=1e-6)

    def test_b1_limit_slope(self):
        d = bounds.b1_limit(5, 2, 1e3) - bounds.b1_limit(5, 2, 1e2)
        assert d == pytest.approx(4 * math.log2(10), abs=1e-12)

    def test_db_approx(self):
        a1, a2 = bounds.bits_db_approx(4, 2, 10, 20)
        assert a2 == pytest.approx(20 / 3, abs=1e-12)
        assert a2 == pytest.approx(bounds.scale_bits(4, 2, 10, 100).B2_exact, abs=0.03)
        plan = bounds.scale_bits(4, 2, 10, 100)
        # log2 P2 vs P2_dB / 3 differ by the factor 10 log10(2) / 3 ~ 1.0034
        assert a1 == pytest.approx(plan.B1_exact, abs=3 * 20 * abs(math.log2(10) / 10 - 1 / 3) + 1e-9)

    def test_db_approx_slopes_and_offsets(self):
        lo = bounds.bits_db_approx(5, 3, 10, 10)
        hi = bounds.bits_db_approx(5, 3, 10, 25)
        assert (hi[1] - lo[1]) / 15 == pytest.approx(2 / 3, abs=1e-12)
        assert (hi[0] - lo[0]) / 15 == pytest.approx(4 / 3, abs=1e-12)
        # offsets do not depend on P2
        assert lo[0] - 4 / 3 * 10 == pytest.approx(hi[0] - 4 / 3 * 25, abs=1e-12)


class TestSumFeedback:
    def test_definition(self):
        plan = bounds.scale_bits(4, 2, 50, 200, 2, 0.3)
        assert bounds.sum_feedback(4, 2, 50, 200, 2, 0.3) == pytest.approx(2 * (plan.B1_exact + plan.B2_exact))

    @pytest.mark.parametrize("M,N", [(2, 2), (4, 2), (4, 4), (6, 3)])
    def test_strictly_convex_in_theta(self, M, N):
        th = np.linspace(0.01, 0.99, 999)
        f = np.array([bounds.sum_feedback(M, N, 100, 100, 2, t) for t in th])
        assert np.all(np.diff(f, 2) > 0)

    @pytest.mark.parametrize("M,N", [(2, 2), (4, 2), (4, 4), (6, 3), (6, 2)])
    def test_minimized_at_theta_star(self, M, N):
        th = np.linspace(0, 1, 10_001)[1:-1]
        f = np.array([bounds.sum_feedback(M, N, 100, 100, 2, t) for t in th])
        assert th[np.argmin(f)] == pytest.approx(bounds.optimal_theta(M, N), abs=1e-4)


class TestOptimalTheta:
    def test_values(self):
        assert bounds.optimal_theta(4, 2) == 0.75
        for M in range(2, 8):
            assert bounds.optimal_theta(M, M) == 0.5

    def test_grid_argmax_and_curvature(self):
        th = np.linspace(0, 1, 10_001)[1:-1]
        for M in range(2, 7):
            for N in range(2, M + 1):
                obj = (M - 1) * np.log(th) + (N - 1) * np.log1p(-th)
                t = bounds.optimal_theta(M, N)
                assert abs(th[np.argmax(obj)] - t) <= 1e-4
                # second derivative of theta^(M-1) (1-theta)^(N-1) at the optimum, by central differences
                g = lambda x: x ** (M - 1) * (1 - x) ** (N - 1)
                h = 1e-4
                assert (g(t + h) - 2 * g(t) + g(t - h)) / h**2 < 0

    def test_domain(self):
        with pytest.raises(ValueError):
            bounds.optimal_theta(1, 2)

"""Shadowed-Rice channel: densities, constants, MGF, and the sampler."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lrfhss_lab import channel as ch

ALL_PRESETS = [ch.preset(env) for env in ch.Environment]


class TestPresets:
    def test_values(self):
        p = ch.preset(ch.Environment.AVERAGE)
        assert (p.b0, p.m, p.omega) == (0.126, 10.1, 0.835)
        p = ch.preset(ch.Environment.FREQUENT_HEAVY)
        assert (p.b0, p.m, p.omega) == (0.063, 0.739, 8.97e-4)
        p = ch.preset(ch.Environment.INFREQUENT_LIGHT)
        assert (p.b0, p.m, p.omega) == (0.158, 19.4, 1.29)

    def test_mean_power(self):
        assert ch.preset(ch.Environment.AVERAGE).mean_power == pytest.approx(1.087)

    def test_validation(self):
        with pytest.raises(ValueError):
            ch.ShadowedRiceParams(0.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            ch.ShadowedRiceParams(0.1, -1.0, 1.0)


class TestSeriesConstants:
    def test_average_environment_leading_factor(self):
        # frozen from the closed form (2 b0 m / (2 b0 m + Omega))^m / (2 b0)
        sc = ch.series_constants(ch.preset(ch.Environment.AVERAGE))
        assert sc.a_const == pytest.approx(0.2259813414936422, rel=1e-12)
        assert sc.b_const == pytest.approx(1.0 / 0.252, rel=1e-12)

    def test_convergence_ratio_below_one(self):
        for p in ALL_PRESETS:
            assert 0.0 < ch.series_constants(p).convergence_ratio < 1.0

    def test_c_fn_is_geometric(self):
        sc = ch.series_constants(ch.preset(ch.Environment.AVERAGE))
        assert sc.c_fn(3) == pytest.approx(sc.c1 ** 3)


class TestPowerPdf:
    @pytest.mark.parametrize("p", ALL_PRESETS, ids=[e.value for e in ch.Environment])
    def test_normalization(self, p):
        from scipy.integrate import quad
        mass, _ = quad(lambda r: ch.power_pdf(r, p), 0.0, np.inf)
        assert mass == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("p", ALL_PRESETS, ids=[e.value for e in ch.Environment])
    def test_mean_matches_moment_identity(self, p):
        from scipy.integrate import quad
        mean, _ = quad(lambda r: r * ch.power_pdf(r, p), 0.0, np.inf)
        assert mean == pytest.approx(p.mean_power, rel=1e-6)

    def test_asymptotic_branch_is_continuous(self):
        # the large-argument branch must join the series branch smoothly
        p = ch.preset(ch.Environment.AVERAGE)
        sc = ch.series_constants(p)
        r_switch = 600.0 / sc.c1
        lo = ch.power_pdf(r_switch * 0.999, p)
        hi = ch.power_pdf(r_switch * 1.001, p)
        assert math.isfinite(lo) and math.isfinite(hi)
        assert hi == pytest.approx(lo, rel=1e-3)

    def test_rayleigh_degenerate_case(self):
        p = ch.ShadowedRiceParams(0.126, 0.0, 0.0)
        assert ch.power_pdf(1.3, p) == pytest.approx(
            math.exp(-1.3 / 0.252) / 0.252, rel=1e-12)

    def test_negative_power_rejected(self):
        with pytest.raises(ValueError):
            ch.power_pdf(-0.1, ch.preset(ch.Environment.AVERAGE))

    @given(st.floats(0.0, 20.0))
    @settings(max_examples=100)
    def test_nonnegative(self, r):
        assert ch.power_pdf(r, ch.preset(ch.Environment.AVERAGE)) >= 0.0


class TestEnvelopePdf:
    def test_change_of_variables(self):
        p = ch.preset(ch.Environment.AVERAGE)
        h = 0.8
        assert ch.envelope_pdf(h, p) == pytest.approx(
            2.0 * h * ch.power_pdf(h * h, p), rel=1e-12)


class TestMgf:
    def test_zero_is_one(self):
        for p in ALL_PRESETS:
            assert ch.power_mgf(0.0, p) == pytest.approx(1.0)

    def test_derivative_at_zero_is_mean(self):
        p = ch.preset(ch.Environment.AVERAGE)
        eps = 1e-7
        deriv = (ch.power_mgf(eps, p) - ch.power_mgf(-eps, p)) / (2.0 * eps)
        assert deriv == pytest.approx(p.mean_power, rel=1e-5)

    def test_outside_convergence_region(self):
        p = ch.preset(ch.Environment.AVERAGE)
        with pytest.raises(ValueError):
            ch.power_mgf(100.0, p)

    def test_matches_sampler_laplace(self):
        p = ch.preset(ch.Environment.AVERAGE)
        rng = np.random.default_rng(5)
        draws = ch.sample_power(rng, p, size=200_000)
        s = -0.7
        empirical = np.exp(s * draws).mean()
        assert empirical == pytest.approx(ch.power_mgf(s, p), rel=5e-3)


class TestSampler:
    @pytest.mark.parametrize("p", ALL_PRESETS, ids=[e.value for e in ch.Environment])
    def test_mean_power(self, p):
        rng = np.random.default_rng(11)
        draws = ch.sample_power(rng, p, size=200_000)
        assert draws.mean() == pytest.approx(p.mean_power, rel=2e-2)

    def test_distribution_matches_pdf(self):
        # KS-style check of the empirical CDF against the integrated density
        from scipy.integrate import quad
        p = ch.preset(ch.Environment.AVERAGE)
        rng = np.random.default_rng(3)
        draws = np.sort(ch.sample_power(rng, p, size=50_000))
        for q in (0.1, 0.5, 0.9):
            x = float(draws[int(q * len(draws))])
            cdf, _ = quad(lambda r: ch.power_pdf(r, p), 0.0, x)
            assert cdf == pytest.approx(q, abs=0.01)

    def test_scalar_mode(self):
        rng = np.random.default_rng(0)
        value = ch.sample_power(rng, ch.preset(ch.Environment.AVERAGE))
        assert isinstance(value, float) and value >= 0.0

    def test_deterministic_under_seed(self):
        p = ch.preset(ch.Environment.AVERAGE)
        a = ch.sample_power(np.random.default_rng(42), p, size=10)
        b = ch.sample_power(np.random.default_rng(42), p, size=10)
        assert np.array_equal(a, b)

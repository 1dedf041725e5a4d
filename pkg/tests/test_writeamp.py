"""Tests for the closed-form write-amplification predictors."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import lambertw as scipy_lambertw

from trim_oracle.markov import rho_eff
from trim_oracle.writeamp import (
    TempSpec,
    lambert_w0,
    wa_agarwal,
    wa_agarwal_trim,
    wa_hot_cold_separated,
    wa_hu,
    wa_hu_trim,
    wa_mixed_naive,
    wa_multi_temp,
    wa_xiang,
    wa_xiang_trim,
)


def bisect_w0(x, iters=200):
    """Independent oracle: w*e^w is increasing on [-1, 0]."""
    lo, hi = -1.0, 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid * math.exp(mid) < x:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestLambertW:
    def test_zero(self):
        assert lambert_w0(0.0) == 0.0

    def test_branch_point(self):
        assert lambert_w0(-1.0 / math.e) == pytest.approx(-1.0, abs=1e-7)

    def test_against_bisection_oracle(self):
        x = -2.0 * math.exp(-2.0)
        assert bisect_w0(x) == pytest.approx(-0.406375739959960, abs=1e-12)
        assert lambert_w0(x) == pytest.approx(-0.406375739959960, abs=1e-10)

    def test_round_trip_grid(self):
        xs = np.linspace(-1.0 / math.e, 0.0, 10_001)
        for x in xs:
            w = lambert_w0(float(x))
            assert abs(w * math.exp(w) - x) <= 1e-12
            assert -1.0 <= w <= 0.0

    def test_against_scipy(self):
        xs = np.linspace(-1.0 / math.e + 1e-9, -1e-9, 513)
        ours = np.array([lambert_w0(float(x)) for x in xs])
        ref = np.real(scipy_lambertw(xs))
        assert np.max(np.abs(ours - ref)) < 1e-9

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            lambert_w0(-1.0)
        with pytest.raises(ValueError):
            lambert_w0(0.5)


class TestUniformModels:
    def test_agarwal_values(self):
        assert wa_agarwal(1.0).value == pytest.approx(1.0)
        assert wa_agarwal(1 / 9).value == pytest.approx(5.0)

    def test_agarwal_floor_at_half(self):
        assert wa_agarwal(1e9).value == pytest.approx(0.5, rel=1e-6)

    def test_xiang_at_rho_one(self):
        assert wa_xiang(1.0).value == pytest.approx(1.2550, abs=2e-4)

    def test_xiang_limits(self):
        assert wa_xiang(100.0).value == pytest.approx(1.0, abs=1e-4)
        assert wa_xiang(0.001).value > 50.0

    def test_xiang_strictly_decreasing(self):
        grid = np.linspace(0.01, 10.0, 500)
        values = [wa_xiang(float(r)).value for r in grid]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert values[-1] > 1.0

    def test_rho_domain(self):
        for fn in (wa_agarwal, wa_xiang):
            with pytest.raises(ValueError):
                fn(0.0)
            with pytest.raises(ValueError):
                fn(-0.5)


class TestTrimModels:
    def test_agarwal_trim_value(self):
        assert wa_agarwal_trim(1 / 9, 0.1).value == pytest.approx(2.5, rel=1e-12)

    def test_agarwal_trim_reduces_to_plain(self):
        assert wa_agarwal_trim(0.3, 0.0).value == pytest.approx(
            wa_agarwal(0.3).value, rel=1e-14
        )

    def test_agarwal_trim_below_one_flagged_not_clamped(self):
        pred = wa_agarwal_trim(1 / 9, 0.35)
        assert pred.value < 1.0
        assert pred.below_one
        # s = 0.3/0.65; closed form check
        s = 0.3 / 0.65
        assert pred.value == pytest.approx((1 + 1 / 9) / (2 * (1 + 1 / 9 - s)), rel=1e-12)

    def test_xiang_trim_reduces_to_plain(self):
        assert wa_xiang_trim(0.25, 0.0).value == pytest.approx(
            wa_xiang(0.25).value, rel=1e-14
        )

    def test_xiang_trim_matches_effective_rho(self):
        assert wa_xiang_trim(1 / 9, 0.1).value == pytest.approx(
            wa_xiang(0.25).value, rel=1e-12
        )

    @given(rho=st.floats(0.01, 5.0), q=st.floats(0.0, 0.45))
    @settings(max_examples=300)
    def test_effective_rho_identity(self, rho, q):
        direct = wa_xiang_trim(rho, q).value
        via_eff = wa_xiang(rho_eff(rho, q)).value if q > 0 else wa_xiang(rho).value
        assert direct == pytest.approx(via_eff, rel=1e-12)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            wa_xiang_trim(0.1, 0.5)
        with pytest.raises(ValueError):
            wa_agarwal_trim(-0.1, 0.2)


class TestHuPipeline:
    def test_p1_approaches_one_and_wa_blows_up(self):
        # p1 = e^{-1.9(t/u - 1)} -> 1 as u -> t, collapsing the reclaimable space
        pred = wa_hu(4096, 4095.9999, 64, 8)
        assert pred.value > 1e4

    def test_u_model_domain(self):
        with pytest.raises(ValueError):
            wa_hu(4096, 4096, 64, 1)
        with pytest.raises(ValueError):
            wa_hu(4096, 0, 64, 1)

    def test_known_value_at_desk_geometry(self):
        assert wa_hu(65536, 58982, 64, 16).value == pytest.approx(5.1806, abs=2e-3)

    def test_trim_variant_uses_u_eff(self):
        t, u, n_p, r = 65536, 58982, 64, 16
        q = 0.2
        s = (1 - 2 * q) / (1 - q)
        assert wa_hu_trim(t, u, q, n_p, r).value == pytest.approx(
            wa_hu(t, u * s, n_p, r).value, rel=1e-14
        )

    def test_trim_variant_at_q_zero(self):
        assert wa_hu_trim(65536, 58982, 0.0, 64, 16).value == pytest.approx(
            wa_hu(65536, 58982, 64, 16).value, rel=1e-14
        )

    def test_hu_trim_more_optimistic_than_xiang_trim(self):
        rho = (65536 - 58982) / 58982
        assert wa_hu_trim(65536, 58982, 0.2, 64, 16).value < wa_xiang_trim(rho, 0.2).value

    def test_window_one_is_accepted(self):
        assert wa_hu(4096, 3686, 64, 8, window=1).value > 1.0

    def test_pstar_distribution_sums_to_one(self):
        # reconstruct the pipeline's distribution via the returned mean:
        # A = n_p / (n_p - mean) must be consistent for a couple of configs
        for t, u, n_p, r in [(65536, 58982, 64, 16), (16384, 13107, 128, 4),
                             (16384, 8192, 256, 4)]:
            a = wa_hu(t, u, n_p, r).value
            mean = n_p * (1 - 1 / a)
            assert 0.0 <= mean < n_p


class TestTemperatureModels:
    def frame(self, split=0.5):
        # hot 10% of space, 90% of requests; S_f = 0.2 desk frame
        t, n_p = 65536, 64
        u = round(t * 0.8)
        u_h = int(u * 0.1)
        u_c = u - u_h
        blocks = t // n_p
        min_h = -(-u_h // n_p)
        min_c = -(-u_c // n_p)
        spare = blocks - min_h - min_c
        extra_h = round(split * spare)
        k_h = (min_h + extra_h) * n_p
        return TempSpec(
            user_lbas=(u_h, u_c),
            pages=(k_h, t - k_h),
            request_probs=(0.9, 0.1),
            trim_probs=(0.2, 0.1),
        )

    def test_write_weights(self):
        spec = self.frame()
        assert spec.write_weights[0] == pytest.approx(0.72 / 0.81, rel=1e-12)
        assert spec.write_weights[1] == pytest.approx(0.09 / 0.81, rel=1e-12)
        assert sum(spec.write_weights) == pytest.approx(1.0, abs=1e-12)

    def test_separated_is_weighted_sum(self):
        spec = self.frame()
        by_hand = sum(
            alpha * wa_xiang_trim(rho, q).value
            for alpha, rho, q in zip(spec.write_weights, spec.rhos, spec.trim_probs)
        )
        assert wa_hot_cold_separated(spec).value == pytest.approx(by_hand, rel=1e-14)

    def test_collapse_chain_to_uniform(self):
        # equal trim rates and proportional allocation behave as one device
        t = 65536
        u = 52428
        u_h, u_c = 13107, u - 13107
        k_h = u_h * t // u
        spec = TempSpec((u_h, u_c), (k_h, t - k_h), (0.25, 0.75), (0.15, 0.15))
        rho = (t - u) / u
        # allocation rounding moves per-pool rho a hair off the uniform value
        assert wa_hot_cold_separated(spec).value == pytest.approx(
            wa_xiang_trim(rho, 0.15).value, rel=1e-3
        )

    def test_multi_temp_collapses_to_single(self):
        spec = TempSpec((52428,), (65536,), (1.0,), (0.2,))
        rho = (65536 - 52428) / 52428
        assert wa_multi_temp(spec).value == pytest.approx(
            wa_xiang_trim(rho, 0.2).value, rel=1e-14
        )

    def test_multi_temp_matches_hot_cold_at_two(self):
        spec = self.frame()
        assert wa_multi_temp(spec).value == pytest.approx(
            wa_hot_cold_separated(spec).value, rel=1e-14
        )

    def test_three_equal_temps_match_single(self):
        t, u = 65536, 52428
        sizes = (17476, 17476, u - 2 * 17476)
        pages = [sizes[0] * t // u, sizes[1] * t // u]
        pages.append(t - sum(pages))
        spec = TempSpec(sizes, tuple(pages), (1 / 3, 1 / 3, 1 / 3), (0.1, 0.1, 0.1))
        rho = (t - u) / u
        assert wa_multi_temp(spec).value == pytest.approx(
            wa_xiang_trim(rho, 0.1).value, rel=1e-3
        )

    def test_mixed_naive_single_temp_collapses(self):
        spec = TempSpec((52428,), (65536,), (1.0,), (0.2,))
        assert wa_mixed_naive(spec).value == pytest.approx(
            wa_xiang_trim((65536 - 52428) / 52428, 0.2).value, rel=1e-12
        )

    def test_mixed_naive_uses_pooled_u_eff(self):
        spec = self.frame()
        u_eff = sum(
            u * (1 - 2 * q) / (1 - q) for u, q in zip(spec.user_lbas, spec.trim_probs)
        )
        t = sum(spec.pages)
        assert wa_mixed_naive(spec).value == pytest.approx(
            wa_xiang((t - u_eff) / u_eff).value, rel=1e-12
        )

    def test_hot_cold_requires_two_temps(self):
        spec = TempSpec((52428,), (65536,), (1.0,), (0.2,))
        with pytest.raises(ValueError):
            wa_hot_cold_separated(spec)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            TempSpec((100, 100), (64, 256), (0.5, 0.5), (0.1, 0.1))  # k <= u
        with pytest.raises(ValueError):
            TempSpec((100, 100), (256, 256), (0.6, 0.6), (0.1, 0.1))  # p sum
        with pytest.raises(ValueError):
            TempSpec((100, 100), (256, 256), (0.5, 0.5), (0.1, 0.6))  # q domain

"""Step-size correction tests: order statistics, the rho factor, both
correction rules, the selection-mass fit and the ratio check."""

from __future__ import annotations

import math
from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psaes.core import derive_params, expected_norm
from psaes.correction import (
    BRANCH_FULL_RATIO,
    BRANCH_SCALED,
    BRANCH_SKIPPED,
    CorrectionConfig,
    RhoInputs,
    correct_general,
    correct_reformulated,
    correction_ratio,
    delta_for_L,
    expected_order_stat,
    mu_w_fit,
    rho,
    theorem1_ratio_check,
    weighted_order_stat_sum,
)


def inputs_for(lam: int, n: int = 2, mu_proxy: float = 0.0, sigma: float = 1.0,
               include_sigma_scale: bool = True) -> RhoInputs:
    params = derive_params(lam, n)
    return RhoInputs(lambda_r=lam, weights=params.weights, mu_w=params.mu_w,
                     n=n, mu_proxy=mu_proxy, sigma=sigma,
                     include_sigma_scale=include_sigma_scale)


class TestExpectedOrderStat:
    def test_median_rank_is_proxy(self):
        base = inputs_for(7)
        assert expected_order_stat(4, base) == pytest.approx(0.0, abs=1e-12)

    def test_first_rank_lambda6(self):
        # quantile 0.625/6.25 = 0.1
        base = inputs_for(6)
        assert expected_order_stat(1, base) == pytest.approx(-1.2815515655446004,
                                                             rel=1e-10)

    def test_antisymmetry(self):
        base = inputs_for(6, mu_proxy=1.7, sigma=2.3)
        for i in range(1, 7):
            left = expected_order_stat(i, base)
            right = expected_order_stat(7 - i, base)
            assert left + right == pytest.approx(2 * 1.7, rel=1e-12)

    def test_sigma_scaling_toggle(self):
        scaled = inputs_for(6, sigma=3.0)
        plain = inputs_for(6, sigma=3.0, include_sigma_scale=False)
        assert expected_order_stat(1, scaled) == pytest.approx(
            3.0 * expected_order_stat(1, plain))

    def test_rejects_out_of_range_rank(self):
        base = inputs_for(6)
        with pytest.raises(ValueError):
            expected_order_stat(0, base)
        with pytest.raises(ValueError):
            expected_order_stat(7, base)

    def test_against_independent_quantile_oracle(self):
        # stdlib inverse normal CDF, independent of the implementation path
        nd = NormalDist()
        base = inputs_for(6, mu_proxy=0.4, sigma=1.3)
        for i in range(1, 7):
            expected = 0.4 + 1.3 * nd.inv_cdf((i - 0.375) / 6.25)
            assert expected_order_stat(i, base) == pytest.approx(expected, rel=1e-9)

    def test_against_monte_carlo_order_stats(self):
        rng = np.random.default_rng(0)
        draws = np.sort(rng.standard_normal((300_000, 6)), axis=1)
        mc = draws.mean(axis=0)
        base = inputs_for(6)
        for i in range(1, 7):
            assert abs(expected_order_stat(i, base) - mc[i - 1]) < 0.02


class TestRho:
    def test_frozen_values_lambda6(self):
        # brute-force oracle: weights and quantiles evaluated by hand
        base = inputs_for(6)
        assert weighted_order_stat_sum(base) == pytest.approx(1.0153057308650117,
                                                              rel=1e-12)
        assert rho(base) == pytest.approx(1.332602570873007, rel=1e-12)

    def test_n1_reduces_to_inverse_s(self):
        base = inputs_for(6, n=1)
        S = weighted_order_stat_sum(base)
        assert rho(base) == pytest.approx(1.0 / S, rel=1e-12)

    def test_guard_signals_skip(self):
        # large positive proxy drives S nonpositive
        assert rho(inputs_for(6, mu_proxy=10.0)) is None

    def test_monotone_in_proxy_within_region(self):
        # decreasing the proxy raises rho while S^2 mu_w <= n - 1
        base = inputs_for(6, sigma=0.5)
        lo = rho(inputs_for(6, mu_proxy=0.3, sigma=0.5))
        hi = rho(inputs_for(6, mu_proxy=0.1, sigma=0.5))
        assert lo is not None and hi is not None and hi >= lo

    def test_continuity_in_proxy(self):
        base_val = rho(inputs_for(6, mu_proxy=0.2, sigma=0.7))
        bumped = rho(inputs_for(6, mu_proxy=0.2 + 1e-6, sigma=0.7))
        assert abs(bumped - base_val) < 1e-3


class TestCorrectionRatio:
    def test_skip_on_either_none(self):
        assert correction_ratio(None, 1.0) is None
        assert correction_ratio(1.0, None) is None

    def test_plain_ratio(self):
        assert correction_ratio(1.2, 0.8) == pytest.approx(1.5)


class TestCorrectGeneral:
    def test_equal_factors_leave_sigma(self):
        assert correct_general(0.7, 1.31, 1.31) == pytest.approx(0.7)

    def test_ratio_applied(self):
        assert correct_general(0.5, 1.2, 1.0) == pytest.approx(0.6)

    def test_degenerate_skips(self):
        assert correct_general(0.5, None, 1.0) == 0.5
        assert correct_general(0.5, 1.2, None) == 0.5

    def test_ratio_at_least_one_on_descending_proxy(self):
        # frozen population, proxy strictly decreasing, guarded region
        r_old = rho(inputs_for(6, mu_proxy=0.4, sigma=0.5))
        r_new = rho(inputs_for(6, mu_proxy=0.2, sigma=0.5))
        assert correct_general(1.0, r_new, r_old) >= 1.0


class TestCorrectReformulated:
    CONFIG = CorrectionConfig(kappa=0.5, L=6, variant="reformulated")

    def test_long_path_skips(self):
        sigma, branch = correct_reformulated(
            0.9, 1.4, 1.0, p_sigma_norm=2.0, expected_norm_n=expected_norm(2),
            lambda_new=6, lambda_old=6, config=self.CONFIG)
        assert sigma == 0.9
        assert branch == BRANCH_SKIPPED

    def test_small_population_change_damps(self):
        sigma, branch = correct_reformulated(
            1.0, 1.4, 1.0, p_sigma_norm=0.5, expected_norm_n=expected_norm(2),
            lambda_new=6, lambda_old=6, config=self.CONFIG)
        assert sigma == pytest.approx(0.5 * 1.4)
        assert branch == BRANCH_SCALED

    def test_large_population_change_full_ratio(self):
        sigma, branch = correct_reformulated(
            1.0, 1.4, 1.0, p_sigma_norm=0.5, expected_norm_n=expected_norm(2),
            lambda_new=16, lambda_old=6, config=self.CONFIG)
        assert sigma == pytest.approx(1.4)
        assert branch == BRANCH_FULL_RATIO

    def test_degenerate_rho_leaves_sigma(self):
        for lam_new, branch_expected in ((6, BRANCH_SCALED), (16, BRANCH_FULL_RATIO)):
            sigma, branch = correct_reformulated(
                1.0, None, 1.0, p_sigma_norm=0.5, expected_norm_n=expected_norm(2),
                lambda_new=lam_new, lambda_old=6, config=self.CONFIG)
            assert sigma == 1.0
            assert branch == branch_expected

    def test_never_exceeds_general(self):
        for ratio in (0.8, 1.0, 1.3, 2.0):
            general = correct_general(1.0, ratio, 1.0)
            damped, branch = correct_reformulated(
                1.0, ratio, 1.0, p_sigma_norm=0.1,
                expected_norm_n=expected_norm(2), lambda_new=6, lambda_old=6,
                config=self.CONFIG)
            assert branch == BRANCH_SCALED
            assert damped <= general

    @given(
        p_norm=st.floats(0.0, 4.0),
        d_lambda=st.integers(min_value=-30, max_value=30),
        ratio=st.floats(0.2, 4.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_branch_partition(self, p_norm, d_lambda, ratio):
        chi = expected_norm(2)
        sigma, branch = correct_reformulated(
            1.0, ratio, 1.0, p_sigma_norm=p_norm, expected_norm_n=chi,
            lambda_new=6 + d_lambda, lambda_old=6, config=self.CONFIG)
        assert branch in (BRANCH_SKIPPED, BRANCH_SCALED, BRANCH_FULL_RATIO)
        assert (branch == BRANCH_SKIPPED) == (p_norm >= chi)
        if branch == BRANCH_SCALED:
            assert abs(d_lambda) < self.CONFIG.L
        if branch == BRANCH_FULL_RATIO:
            assert abs(d_lambda) >= self.CONFIG.L


class TestMuWFit:
    def test_fit_at_lambda6(self):
        assert mu_w_fit(6) == pytest.approx(2.118, abs=1e-12)
        exact = derive_params(6, 2).mu_w
        assert abs(mu_w_fit(6) - exact) < 0.1

    def test_delta_for_significance_level(self):
        assert delta_for_L(6) == 1.5852

    def test_fit_quality_over_range(self):
        worst = max(abs(mu_w_fit(lam) - derive_params(lam, 2).mu_w)
                    for lam in range(6, 101))
        assert worst < 0.8


class TestTheorem1Check:
    def test_constant_proxy_is_exactly_one(self):
        base = inputs_for(6, sigma=0.5)
        assert theorem1_ratio_check([0.3, 0.3, 0.3], base)
        r = rho(inputs_for(6, mu_proxy=0.3, sigma=0.5))
        assert r / r == 1.0

    def test_descending_grid(self):
        base = inputs_for(6, sigma=0.7)
        assert theorem1_ratio_check([3.0, 2.0, 1.0, 0.5], base)

    def test_rejects_increasing_sequence(self):
        base = inputs_for(6, sigma=0.7)
        with pytest.raises(ValueError):
            theorem1_ratio_check([1.0, 2.0], base)

    @given(data=st.data())
    @settings(max_examples=300, deadline=None)
    def test_random_descending_pairs_in_guarded_region(self, data):
        # pairs with S > 0 on both sides and S^2 mu_w <= n - 1, the region
        # where the ratio claim holds
        base = inputs_for(6, sigma=1.0)
        s_cap = math.sqrt((base.n - 1) / base.mu_w)
        s0 = weighted_order_stat_sum(inputs_for(6, mu_proxy=0.0, sigma=1.0))
        lo = base.sigma * s0 - s_cap  # proxy giving S = s_cap
        hi = base.sigma * s0          # proxy giving S = 0
        a = data.draw(st.floats(lo, hi, exclude_max=True))
        b = data.draw(st.floats(lo, a))
        assert theorem1_ratio_check([a, b], base)

"""Population-size adaptation tests: vech layout, Fisher whitening,
the Monte Carlo normalization and the population-size update."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from psaes.core import (
    DistributionState,
    advance_gamma,
    derive_params,
    initial_paths,
)
from psaes.psa import (
    ParamDelta,
    compute_delta_theta,
    estimate_expected_sqnorm,
    fisher_sqrt_apply,
    initial_psa_state,
    unvech,
    update_lambda,
    update_p_theta,
    vech,
    vech_index,
)

from tests.test_core import make_state, neutral_generation


class TestVech:
    def test_index_examples(self):
        assert vech_index(1, 1, 2) == 1
        assert vech_index(2, 1, 2) == 2
        assert vech_index(2, 2, 2) == 3
        assert vech_index(3, 3, 3) == 6

    def test_rejects_upper_triangle(self):
        with pytest.raises(ValueError):
            vech_index(1, 2, 3)

    def test_layout_matches_index_formula(self):
        n = 4
        M = np.arange(n * n, dtype=float).reshape(n, n)
        M = (M + M.T) / 2
        v = vech(M)
        for j in range(1, n + 1):
            for i in range(j, n + 1):
                assert v[vech_index(i, j, n) - 1] == M[i - 1, j - 1]

    @pytest.mark.parametrize("n", [2, 3, 5, 8])
    def test_roundtrip_identity(self, n):
        rng = np.random.default_rng(n)
        A = rng.standard_normal((n, n))
        M = A + A.T
        np.testing.assert_array_equal(unvech(vech(M), n), M)

    @given(st.integers(min_value=1, max_value=7), st.data())
    @settings(max_examples=40, deadline=None)
    def test_roundtrip_property(self, n, data):
        entries = data.draw(
            st.lists(
                st.floats(-1e6, 1e6, allow_nan=False),
                min_size=n * (n + 1) // 2,
                max_size=n * (n + 1) // 2,
            )
        )
        v = np.array(entries)
        np.testing.assert_array_equal(vech(unvech(v, n)), v)


class TestDeltaTheta:
    def test_identical_states_zero(self):
        state = make_state(m=(1.0, 2.0), sigma=1.5, C=[[2.0, 0.5], [0.5, 1.0]])
        d = compute_delta_theta(state, state.m, state.sigma, state.C)
        assert d.theta.shape == (5,)
        np.testing.assert_array_equal(d.theta, np.zeros(5))

    def test_length_is_n_times_n_plus_3_over_2(self):
        for n in (2, 3, 5):
            state = make_state(m=np.zeros(n), C=np.eye(n))
            d = compute_delta_theta(state, state.m + 1.0, 2.0, np.eye(n))
            assert d.theta.shape == (n * (n + 3) // 2,)

    def test_pure_mean_shift(self):
        state = make_state(m=(0.0, 0.0), sigma=1.0)
        d = compute_delta_theta(state, np.array([1.0, 0.0]), 1.0, np.eye(2))
        np.testing.assert_array_equal(d.theta, [1.0, 0.0, 0.0, 0.0, 0.0])


class TestFisherSqrt:
    def test_zero_maps_to_zero(self):
        state = make_state(sigma=1.7, C=[[2.0, 0.3], [0.3, 1.0]])
        d = ParamDelta(delta_m=np.zeros(2), delta_sigma_vech=np.zeros(3))
        np.testing.assert_array_equal(fisher_sqrt_apply(d, state), np.zeros(5))

    def test_identity_sigma_mean_block(self):
        state = make_state()
        d = ParamDelta(delta_m=np.array([1.0, 0.0]), delta_sigma_vech=np.zeros(3))
        out = fisher_sqrt_apply(d, state)
        np.testing.assert_allclose(out[:2], [1.0, 0.0])
        np.testing.assert_allclose(out[2:], np.zeros(3))

    def test_scaled_sigma_mean_block(self):
        # Sigma = 4I via sigma=2, C=I: mean block is delta_m / 2
        state = make_state(sigma=2.0)
        d = ParamDelta(delta_m=np.array([2.0, 0.0]), delta_sigma_vech=np.zeros(3))
        out = fisher_sqrt_apply(d, state)
        np.testing.assert_allclose(out[:2], [1.0, 0.0])

    def test_squared_norm_matches_trace_form(self):
        # ||vech-weighted W||^2 must equal tr(W W)/2 for the covariance block
        rng = np.random.default_rng(5)
        for _ in range(20):
            A = rng.standard_normal((3, 3))
            C = A @ A.T + 3 * np.eye(3)
            state = make_state(m=np.zeros(3), sigma=rng.uniform(0.5, 2.0), C=C)
            B = rng.standard_normal((3, 3))
            d_sigma = B + B.T
            d = ParamDelta(delta_m=rng.standard_normal(3), delta_sigma_vech=vech(d_sigma))
            out = fisher_sqrt_apply(d, state)
            sigma_mat = state.sigma**2 * state.C
            inv = np.linalg.inv(sigma_mat)
            inv_sqrt = np.linalg.cholesky(inv) if False else _mat_inv_sqrt(sigma_mat)
            W = inv_sqrt @ d_sigma @ inv_sqrt
            expected = d.delta_m @ inv @ d.delta_m + 0.5 * np.sum(W * W)
            assert float(np.sum(out**2)) == pytest.approx(expected, rel=1e-10)


def _mat_inv_sqrt(M):
    vals, vecs = np.linalg.eigh(M)
    return (vecs / np.sqrt(vals)) @ vecs.T


class TestEstimator:
    def test_rejects_zero_samples(self):
        state = make_state()
        params = derive_params(6, 2)
        with pytest.raises(ValueError):
            estimate_expected_sqnorm(state, initial_paths(2), params,
                                     np.random.default_rng(0), 0)

    def test_single_sample_estimate_is_that_sample(self):
        # with M = 1 the estimate is the lone sample's squared norm:
        # deterministic for a fixed stream and reproducible
        state = make_state(sigma=1.3, C=[[2.0, 0.4], [0.4, 1.0]])
        params = derive_params(6, 2)
        paths = initial_paths(2)
        a = estimate_expected_sqnorm(state, paths, params,
                                     np.random.default_rng(9), 1)
        b = estimate_expected_sqnorm(state, paths, params,
                                     np.random.default_rng(9), 1)
        assert a == b
        assert a > 0.0
        # and averaging M single-sample estimates equals one M-sample estimate
        # in expectation; check they are in the same ballpark
        big = estimate_expected_sqnorm(state, paths, params,
                                       np.random.default_rng(10), 4096)
        singles = [estimate_expected_sqnorm(state, paths, params,
                                            np.random.default_rng(100 + k), 1)
                   for k in range(400)]
        assert np.mean(singles) == pytest.approx(big, rel=0.25)

    def test_rotation_invariance(self):
        # sqrt(F) whitens Sigma, so the estimate should not depend on the
        # orientation of C beyond Monte Carlo error
        params = derive_params(6, 2)
        paths = initial_paths(2)
        theta = 0.7
        R = np.array([[math.cos(theta), -math.sin(theta)],
                      [math.sin(theta), math.cos(theta)]])
        C = np.diag([4.0, 1.0])
        state_a = make_state(C=C)
        state_b = make_state(C=R @ C @ R.T)
        est_a = [estimate_expected_sqnorm(state_a, paths, params,
                                          np.random.default_rng(k), 256)
                 for k in range(30)]
        est_b = [estimate_expected_sqnorm(state_b, paths, params,
                                          np.random.default_rng(1000 + k), 256)
                 for k in range(30)]
        se = math.hypot(np.std(est_a) / math.sqrt(30), np.std(est_b) / math.sqrt(30))
        assert abs(np.mean(est_a) - np.mean(est_b)) < 2 * se + 1e-12

    def test_variance_halves_with_double_m(self):
        state = make_state()
        params = derive_params(6, 2)
        paths = initial_paths(2)
        small = [estimate_expected_sqnorm(state, paths, params,
                                          np.random.default_rng(k), 64)
                 for k in range(100)]
        large = [estimate_expected_sqnorm(state, paths, params,
                                          np.random.default_rng(5000 + k), 128)
                 for k in range(100)]
        ratio = np.var(small) / np.var(large)
        assert 1.3 < ratio < 3.2    # target 2, wide band for 100 repetitions


class TestPTheta:
    def test_zero_delta_decays(self):
        psa = initial_psa_state(2, 6)
        psa.p_theta = np.ones(5)
        new = update_p_theta(psa, np.zeros(5), estimate=1.0)
        np.testing.assert_allclose(new, 0.6 * np.ones(5))

    def test_unit_normalized_first_step(self):
        psa = initial_psa_state(2, 6)
        fisher_delta = np.array([3.0, 0.0, 0.0, 0.0, 0.0])
        new = update_p_theta(psa, fisher_delta, estimate=9.0)
        assert float(np.sum(new**2)) == pytest.approx(0.4 * 1.6)

    def test_rejects_degenerate_estimate(self):
        psa = initial_psa_state(2, 6)
        with pytest.raises(ValueError):
            update_p_theta(psa, np.ones(5), estimate=0.0)

    def test_neutral_longrun_calibration(self):
        # E||p_theta||^2 tracks gamma_theta under fitness-independent ranking
        from psaes.core import (
            rank_population,
            sample_population,
            update_covariance,
            update_mean,
            update_p_c_and_h,
            update_p_sigma,
            update_sigma_csa,
        )
        from psaes.core import EvolutionPaths

        rng = np.random.default_rng(23)
        state = make_state()
        params = derive_params(6, 2)
        paths = initial_paths(2)
        psa = initial_psa_state(2, 6)
        norms = []
        for g in range(1000):
            pts = sample_population(state, params, rng)
            pop = rank_population(pts, rng.random(6))
            m_new = update_mean(state, pop, params)
            p_s = update_p_sigma(paths, state, m_new, params)
            g_s = advance_gamma(paths.gamma_sigma, params.c_sigma)
            sigma_new = update_sigma_csa(state, p_s, g_s, params, 2)
            p_c, h = update_p_c_and_h(paths, state, m_new, params, p_s, g_s, 2)
            g_c = advance_gamma(paths.gamma_c, params.c_c, active=float(h))
            C_new = update_covariance(state, p_c, g_c, pop, params)

            delta = compute_delta_theta(state, m_new, sigma_new, C_new)
            fisher_delta = fisher_sqrt_apply(delta, state)
            est = estimate_expected_sqnorm(state, paths, params,
                                           np.random.default_rng(70_000 + g), 128)
            psa.p_theta = update_p_theta(psa, fisher_delta, est)
            psa.gamma_theta = advance_gamma(psa.gamma_theta, psa.beta)
            norms.append(float(np.sum(psa.p_theta**2)))
            state = DistributionState(m=m_new, sigma=sigma_new, C=C_new,
                                      generation=g + 1)
            paths = EvolutionPaths(p_sigma=p_s, p_c=p_c, gamma_sigma=g_s, gamma_c=g_c)
        assert float(np.mean(norms[50:])) == pytest.approx(1.0, rel=0.15)

    def test_rotation_invariance_of_path_norm(self):
        # rotating the whole problem leaves ||p_theta|| distributionally alone
        params = derive_params(6, 2)
        theta = 1.1
        R = np.array([[math.cos(theta), -math.sin(theta)],
                      [math.sin(theta), math.cos(theta)]])
        C = np.diag([3.0, 0.5])

        def one_norm(state, k):
            rng = np.random.default_rng(k)
            paths = initial_paths(2)
            psa = initial_psa_state(2, 6)
            st_new, _, _ = neutral_generation(state, paths, params, rng)
            delta = compute_delta_theta(state, st_new.m, st_new.sigma, st_new.C)
            fd = fisher_sqrt_apply(delta, state)
            est = estimate_expected_sqnorm(state, paths, params,
                                           np.random.default_rng(90_000 + k), 128)
            return float(np.linalg.norm(update_p_theta(psa, fd, est)))

        base = make_state(m=(1.0, -0.5), C=C)
        rot = make_state(m=R @ np.array([1.0, -0.5]), C=R @ C @ R.T)
        a = [one_norm(base, k) for k in range(400)]
        b = [one_norm(rot, 40_000 + k) for k in range(400)]
        assert stats.ks_2samp(a, b).pvalue > 0.01


class TestLambdaUpdate:
    def test_balanced_path_freezes(self):
        psa = initial_psa_state(2, 6)
        psa.lambda_real = 20.0
        gamma = 0.8
        p = np.zeros(5)
        p[0] = math.sqrt(psa.alpha * gamma)
        lam_real, lam_r = update_lambda(psa, gamma, p)
        assert lam_real == pytest.approx(20.0)
        assert lam_r == 20

    def test_short_path_grows(self):
        psa = initial_psa_state(2, 6)
        psa.lambda_real = 100.0
        lam_real, lam_r = update_lambda(psa, 1.0, np.zeros(5))
        assert lam_real == pytest.approx(100.0 * math.exp(0.4))
        assert lam_r == round(100.0 * 1.4918246976412703)

    def test_bounds(self):
        psa = initial_psa_state(2, 6)
        assert psa.lambda_min == 6
        assert psa.lambda_max == 512 * 6

        psa.lambda_real = 5.2 / math.exp(0.4 * 1.0)
        lam_real, lam_r = update_lambda(psa, 1.0, np.zeros(5))
        assert lam_real == pytest.approx(5.2)
        assert lam_r == 6

        psa.lambda_real = 5000.0
        p = np.zeros(5)
        lam_real, lam_r = update_lambda(psa, 1.0, p)
        assert lam_r == 3072

    def test_round_half_away_from_zero(self):
        psa = initial_psa_state(2, 6)
        psa.lambda_real = 6.5 / math.exp(0.4)
        _, lam_r = update_lambda(psa, 1.0, np.zeros(5))
        assert lam_r == 7

    def test_beta_zero_freezes_adaptation(self):
        psa = initial_psa_state(2, 6)
        psa.beta = 0.0
        psa.p_theta = np.full(5, 0.3)
        psa.lambda_real = 11.0
        new_p = update_p_theta(psa, np.ones(5), estimate=1.0)
        np.testing.assert_allclose(new_p, psa.p_theta)
        lam_real, lam_r = update_lambda(psa, psa.gamma_theta, new_p)
        assert lam_real == pytest.approx(11.0)
        assert lam_r == 11

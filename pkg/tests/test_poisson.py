"""Tests for the truncated-Poisson layer: hand values, normalization, moments."""

import math

import numpy as np
import pytest

from popbo.errors import DomainError
from popbo.poisson import (
    RankPosterior,
    TruncatedPoisson,
    correct_ranking_probability,
    log_factorials,
    log_partial_exp_sum,
    pmf,
    pmf_vector,
    truncated_mean,
    truncated_variance,
    untruncated_mean_variance,
)


def brute_force_pmf(rate, max_rank):
    """Direct power-series evaluation, safe for small rates only."""
    terms = np.array([rate ** k / math.factorial(k) for k in range(max_rank + 1)])
    return terms / terms.sum()


class TestLogHelpers:
    def test_log_factorials_table(self):
        table = log_factorials(5)
        expected = [math.log(math.factorial(k)) for k in range(6)]
        np.testing.assert_allclose(table, expected, rtol=1e-15)

    def test_log_factorials_zero(self):
        np.testing.assert_array_equal(log_factorials(0), [0.0])

    def test_log_factorials_negative_raises(self):
        with pytest.raises(DomainError):
            log_factorials(-1)

    def test_partial_sum_matches_direct(self):
        for rate in (0.3, 1.0, 4.5):
            direct = sum(rate ** k / math.factorial(k) for k in range(7))
            assert math.isclose(log_partial_exp_sum(rate, 6), math.log(direct),
                                rel_tol=1e-13)

    def test_partial_sum_empty_is_neg_inf(self):
        assert log_partial_exp_sum(2.0, -1) == -math.inf

    def test_partial_sum_rate_zero(self):
        # Only the k = 0 term survives: S(m) = 1.
        assert log_partial_exp_sum(0.0, 5) == 0.0

    def test_partial_sum_vectorized(self):
        rates = np.array([0.5, 1.0, 2.0])
        out = log_partial_exp_sum(rates, 3)
        for r, o in zip(rates, out):
            assert math.isclose(o, log_partial_exp_sum(float(r), 3), rel_tol=1e-15)

    def test_partial_sum_huge_rate_finite(self):
        # 1e4^20 / 20! overflows in linear space; the log form must not.
        out = log_partial_exp_sum(1e4, 20)
        assert math.isfinite(out)


class TestPmfHandValues:
    def test_zero_rate_puts_all_mass_at_zero(self):
        dist = TruncatedPoisson(0.0, 3)
        assert pmf(dist, 0) == 1.0
        assert pmf(dist, 1) == 0.0
        assert pmf(dist, 3) == 0.0

    def test_rate_one_max_rank_one(self):
        np.testing.assert_allclose(pmf_vector(1.0, 1), [0.5, 0.5], rtol=1e-14)

    def test_rate_two_max_rank_two(self):
        # Terms 1, 2, 2 -> p(2) = 2/5.
        assert math.isclose(pmf(TruncatedPoisson(2.0, 2), 2), 0.4, rel_tol=1e-13)

    def test_pmf_vector_matches_scalar(self):
        dist = TruncatedPoisson(3.7, 6)
        vec = pmf_vector(3.7, 6)
        for k in range(7):
            assert math.isclose(vec[k], pmf(dist, k), rel_tol=1e-13)

    def test_out_of_support_raises(self):
        dist = TruncatedPoisson(1.0, 4)
        with pytest.raises(DomainError):
            pmf(dist, 5)
        with pytest.raises(DomainError):
            pmf(dist, -1)

    def test_negative_rate_raises(self):
        with pytest.raises(DomainError):
            TruncatedPoisson(-0.1, 3)


class TestNormalizationGrid:
    @pytest.mark.parametrize("rate", [0.01, 0.1, 1.0, 5.0, 50.0, 1e3, 1e4])
    @pytest.mark.parametrize("max_rank", [0, 1, 5, 20, 100])
    def test_mass_sums_to_one(self, rate, max_rank):
        total = pmf_vector(rate, max_rank).sum()
        assert abs(total - 1.0) <= 1e-12

    @pytest.mark.parametrize("rate", [0.1, 1.0, 5.0])
    @pytest.mark.parametrize("max_rank", [1, 5, 20])
    def test_matches_brute_force(self, rate, max_rank):
        np.testing.assert_allclose(pmf_vector(rate, max_rank),
                                   brute_force_pmf(rate, max_rank), rtol=1e-11)


class TestMoments:
    def test_mean_rate_one_max_rank_one(self):
        assert math.isclose(truncated_mean(TruncatedPoisson(1.0, 1)), 0.5,
                            rel_tol=1e-13)

    def test_mean_rate_three_max_rank_two(self):
        # Terms 1, 3, 4.5 -> mean = (3 + 9) / 8.5.
        assert math.isclose(truncated_mean(TruncatedPoisson(3.0, 2)), 12.0 / 8.5,
                            rel_tol=1e-13)

    def test_mean_degenerate_cases(self):
        assert truncated_mean(TruncatedPoisson(5.0, 0)) == 0.0
        assert truncated_mean(TruncatedPoisson(0.0, 7)) == 0.0

    @pytest.mark.parametrize("rate", [0.1, 1.0, 5.0, 50.0])
    @pytest.mark.parametrize("max_rank", [1, 5, 20])
    def test_mean_matches_expectation_sum(self, rate, max_rank):
        p = pmf_vector(rate, max_rank)
        expected = float(np.dot(np.arange(max_rank + 1), p))
        assert abs(truncated_mean(TruncatedPoisson(rate, max_rank)) - expected) <= 1e-10

    def test_variance_matches_expectation_sums(self):
        dist = TruncatedPoisson(2.5, 8)
        p = pmf_vector(2.5, 8)
        ks = np.arange(9, dtype=float)
        mu = float(np.dot(ks, p))
        assert math.isclose(truncated_variance(dist),
                            float(np.dot(ks * ks, p)) - mu * mu, rel_tol=1e-11)

    def test_mean_below_rate(self):
        # Truncation removes high ranks, so the mean cannot exceed the rate.
        for rate in (0.5, 2.0, 10.0):
            assert truncated_mean(TruncatedPoisson(rate, 6)) < rate

    def test_untruncated_moments_equal_rate(self):
        mean, var = untruncated_mean_variance(3.25)
        assert mean == 3.25 and var == 3.25

    def test_untruncated_rejects_negative(self):
        with pytest.raises(DomainError):
            untruncated_mean_variance(-1.0)


class TestCorrectRankingProbability:
    def test_zero_gap_is_coin_flip(self):
        assert correct_ranking_probability(0.0, 1.0) == 0.5

    def test_two_sigma_scaled_gap(self):
        # gap = 2 * sqrt(2) * sigma -> Phi(2) = 0.97725...
        sigma = 0.7
        p = correct_ranking_probability(2.0 * math.sqrt(2.0) * sigma, sigma)
        assert math.isclose(p, 0.9772498680518208, rel_tol=1e-12)

    def test_one_sigma_scaled_gap(self):
        sigma = 1.3
        p = correct_ranking_probability(math.sqrt(2.0) * sigma, sigma)
        assert math.isclose(p, 0.8413447460685429, rel_tol=1e-12)

    def test_monotone_in_gap(self):
        gaps = np.linspace(-3.0, 3.0, 41)
        probs = [correct_ranking_probability(float(g), 0.8) for g in gaps]
        assert all(b > a for a, b in zip(probs, probs[1:]))

    def test_symmetry(self):
        p_plus = correct_ranking_probability(1.1, 0.6)
        p_minus = correct_ranking_probability(-1.1, 0.6)
        assert math.isclose(p_plus + p_minus, 1.0, rel_tol=1e-12)

    def test_sigma_must_be_positive(self):
        with pytest.raises(DomainError):
            correct_ranking_probability(1.0, 0.0)
        with pytest.raises(DomainError):
            correct_ranking_probability(1.0, -0.5)


class TestRankPosterior:
    def test_accepts_consistent_fields(self):
        p = pmf_vector(1.0, 1)
        post = RankPosterior(pmf=p, mean=0.5, stddev=math.sqrt(0.5))
        assert post.mean == 0.5

    def test_rejects_unnormalized_pmf(self):
        with pytest.raises(DomainError):
            RankPosterior(pmf=np.array([0.5, 0.4]), mean=0.4, stddev=math.sqrt(0.4))

    def test_rejects_inconsistent_mean(self):
        with pytest.raises(DomainError):
            RankPosterior(pmf=np.array([0.5, 0.5]), mean=0.9, stddev=math.sqrt(0.9))

    def test_rejects_wrong_stddev(self):
        with pytest.raises(DomainError):
            RankPosterior(pmf=np.array([0.5, 0.5]), mean=0.5, stddev=0.5)

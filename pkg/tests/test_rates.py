import math

import numpy as np
import pytest

from dnarate import (
    ChannelParams,
    EnumerationCapError,
    SchemeParams,
    achievable_outer_rate_exact,
    achievable_outer_rate_mc,
    asymptotic_rate,
    block_capacity,
    channel_capacity,
    gap_to_capacity,
    mean_gated_capacity,
    multi_draw_capacity,
    optimize_scheme,
    overall_rate,
    r_max,
    validate_scheme,
)

C1 = multi_draw_capacity(1, 0.1)
C2 = multi_draw_capacity(2, 0.1)
RIX1 = 0.999 * C1


def params_for(c, beta=0.05, p=0.1):
    return ChannelParams(c=c, beta=beta, p=p)


class TestParamValidation:
    def test_channel_params(self):
        with pytest.raises(ValueError):
            ChannelParams(c=0, beta=0.05, p=0.1)
        with pytest.raises(ValueError):
            ChannelParams(c=1, beta=1.0, p=0.1)
        with pytest.raises(ValueError):
            ChannelParams(c=1, beta=0.05, p=0.6)

    def test_scheme_params(self):
        with pytest.raises(ValueError):
            SchemeParams(K=0, r_ix=0.5, r_in=0.5, r_out=0.5)
        with pytest.raises(ValueError):
            SchemeParams(K=1, r_ix=1.0, r_in=0.5, r_out=0.5)
        with pytest.raises(ValueError):
            SchemeParams(K=1, r_ix=0.5, r_in=0.5, r_out=0.0)
        assert SchemeParams(K=1, r_ix=0.5, r_in=0.5, r_out=1.0).r_out == 1.0


class TestChannelCapacity:
    def test_low_reading_rate(self):
        assert channel_capacity(params_for(1)) == pytest.approx(0.370762, abs=1e-4)

    def test_high_reading_rate(self):
        assert channel_capacity(params_for(10)) == pytest.approx(0.940040, abs=1e-4)

    def test_vanishing_reading_rate(self):
        assert abs(channel_capacity(params_for(1e-12))) <= 1e-9

    def test_tail_eps_validated(self):
        with pytest.raises(ValueError):
            channel_capacity(params_for(1), tail_eps=0.0)


class TestBlockCapacity:
    def test_all_zero(self):
        assert block_capacity((0, 0, 0, 0), 0.1, 0.5) == 0.0

    def test_mean_of_gated(self):
        assert block_capacity((1, 0), 0.1, 0.5304) == pytest.approx(C1 / 2, abs=1e-9)

    def test_permutation_invariance(self):
        a = block_capacity((0, 1, 2, 5), 0.1, RIX1)
        b = block_capacity((5, 2, 1, 0), 0.1, RIX1)
        assert a == b


class TestExactOuterRate:
    def test_single_strand_blocks_one_draw(self):
        # with K = 1 and r_in just below one draw's capacity, a block survives
        # iff its strand is drawn at all: mass 1 - e^{-1}
        scheme = SchemeParams(K=1, r_ix=RIX1, r_in=C1 - 1e-9, r_out=1.0)
        est = achievable_outer_rate_exact(params_for(1), scheme)
        assert est.method == "exact" and est.stderr == 0.0
        assert est.value == pytest.approx(1 - math.exp(-1), abs=1e-9 + est.truncation_mass)

    def test_single_strand_blocks_two_draws(self):
        scheme = SchemeParams(K=1, r_ix=RIX1, r_in=C2 - 1e-9, r_out=1.0)
        est = achievable_outer_rate_exact(params_for(1), scheme)
        assert est.value == pytest.approx(1 - 2 * math.exp(-1), abs=1e-9 + est.truncation_mass)

    def test_inner_rate_near_one_supports_nothing(self):
        for K in (1, 2, 3):
            scheme = SchemeParams(K=K, r_ix=RIX1, r_in=1 - 1e-9, r_out=1.0)
            assert achievable_outer_rate_exact(params_for(2), scheme).value == 0.0

    def test_monotone_in_inner_rate(self):
        params = params_for(2)
        vals = []
        for r_in in np.linspace(0.05, 0.95, 19):
            scheme = SchemeParams(K=2, r_ix=RIX1, r_in=float(r_in), r_out=1.0)
            vals.append(achievable_outer_rate_exact(params, scheme).value)
        assert all(b <= a for a, b in zip(vals, vals[1:]))

    def test_truncation_accounted(self):
        scheme = SchemeParams(K=2, r_ix=RIX1, r_in=0.01, r_out=1.0)
        est = achievable_outer_rate_exact(params_for(2), scheme, tail_eps=1e-6)
        # everything except the all-zero block qualifies at tiny r_in
        assert est.value == pytest.approx(
            1 - math.exp(-4), abs=1e-12 + est.truncation_mass
        )
        assert 0.0 <= est.truncation_mass < 1e-6

    def test_cap_refused_loudly(self):
        scheme = SchemeParams(K=64, r_ix=RIX1, r_in=0.5, r_out=1.0)
        with pytest.raises(EnumerationCapError, match="Monte-Carlo"):
            achievable_outer_rate_exact(params_for(4), scheme, enum_cap=10_000)


class TestMonteCarloOuterRate:
    def test_matches_closed_form(self):
        scheme = SchemeParams(K=1, r_ix=RIX1, r_in=RIX1, r_out=1.0)
        est = achievable_outer_rate_mc(params_for(1), scheme, samples=10**6, seed=42)
        assert est.method == "monte_carlo"
        assert est.value == pytest.approx(1 - math.exp(-1), abs=3 * est.stderr)
        assert est.stderr == pytest.approx(
            math.sqrt(est.value * (1 - est.value) / 10**6)
        )

    @pytest.mark.parametrize("c", [2, 4])
    @pytest.mark.parametrize("K", [1, 2, 3])
    def test_matches_exact(self, K, c):
        params = params_for(c)
        scheme = SchemeParams(K=K, r_ix=RIX1, r_in=0.45, r_out=1.0)
        exact = achievable_outer_rate_exact(params, scheme)
        mc = achievable_outer_rate_mc(params, scheme, samples=200_000, seed=K)
        assert abs(exact.value - mc.value) <= 3 * mc.stderr + exact.truncation_mass

    def test_single_sample_is_bernoulli(self):
        scheme = SchemeParams(K=2, r_ix=RIX1, r_in=0.5, r_out=1.0)
        for seed in range(6):
            est = achievable_outer_rate_mc(params_for(1), scheme, samples=1, seed=seed)
            assert est.value in (0.0, 1.0)

    def test_bit_identical_reruns(self):
        scheme = SchemeParams(K=3, r_ix=RIX1, r_in=0.4, r_out=1.0)
        a = achievable_outer_rate_mc(params_for(2), scheme, samples=150_000, seed=9)
        b = achievable_outer_rate_mc(params_for(2), scheme, samples=150_000, seed=9)
        assert a == b

    def test_worker_count_invariance(self):
        scheme = SchemeParams(K=2, r_ix=RIX1, r_in=0.5, r_out=1.0)
        runs = [
            achievable_outer_rate_mc(params_for(2), scheme, samples=200_000, seed=3, threads=t)
            for t in (1, 2, 8)
        ]
        assert runs[0] == runs[1] == runs[2]


class TestOverallRate:
    def test_no_overhead_limit(self):
        assert overall_rate(1 - 1e-12, 1.0, 1 - 1e-12, 1e-15) == pytest.approx(
            1.0, abs=1e-9
        )

    def test_hand_product(self):
        # 0.632121 * 0.531004 * (1 - 0.05/0.530473) = 0.304022 by hand
        val = overall_rate(0.531004, 0.632121, 0.530473, 0.05)
        assert val == pytest.approx(0.304022, abs=2e-6)
        assert abs(val - 0.306575) < 0.01

    def test_zero_outer_rate(self):
        assert overall_rate(0.5, 0.0, 0.5, 0.05) == 0.0

    def test_overhead_domain_error(self):
        with pytest.raises(ValueError):
            overall_rate(0.5, 0.5, 0.04, 0.05)


class TestAsymptoticRate:
    def test_low_reading_rate(self):
        assert asymptotic_rate(params_for(1), RIX1) == pytest.approx(0.364443, abs=5e-4)

    def test_high_reading_rate(self):
        r_ix = 0.999 * multi_draw_capacity(3, 0.1)
        assert asymptotic_rate(params_for(10), r_ix) == pytest.approx(0.930767, abs=5e-4)

    def test_mean_gated_peak(self):
        # peak of the large-K overall-rate curve sits at the mean gated capacity
        params = params_for(2)
        val = asymptotic_rate(params, RIX1)
        mean = mean_gated_capacity(params, RIX1)
        assert val / (1 - params.beta / RIX1) == pytest.approx(mean, abs=1e-12)
        assert mean == pytest.approx(0.634133, abs=1e-5)

    def test_beta_must_be_below_rix(self):
        with pytest.raises(ValueError):
            asymptotic_rate(params_for(1), 0.04)


class TestRMax:
    def test_threshold_draw_counts(self):
        assert r_max(params_for(1)).d_star == 1
        assert r_max(params_for(6)).d_star == 2
        assert r_max(params_for(10)).d_star == 3

    def test_values(self):
        assert r_max(params_for(1)).r_max == pytest.approx(0.3644, abs=5e-4)
        assert r_max(params_for(10)).r_max == pytest.approx(0.9308, abs=5e-4)

    def test_rix_used_sits_below_the_level(self):
        res = r_max(params_for(10))
        lo = multi_draw_capacity(res.d_star - 1, 0.1)
        hi = multi_draw_capacity(res.d_star, 0.1)
        assert lo < res.r_ix_used < hi
        assert res.r_ix_used == pytest.approx(0.999 * hi)

    def test_never_beats_capacity(self):
        for c in (1, 2, 4, 6, 8, 10):
            params = params_for(c)
            assert r_max(params).r_max <= channel_capacity(params) + 1e-9

    def test_epsilon_insensitivity(self):
        for c in (1, 6, 10):
            params = params_for(c)
            a = r_max(params, epsilon=1e-3)
            b = r_max(params, epsilon=5e-4)
            bound = params.beta * 1e-3 / multi_draw_capacity(a.d_star, 0.1) + 1e-6
            assert abs(a.r_max - b.r_max) < bound

    def test_epsilon_domain(self):
        with pytest.raises(ValueError):
            r_max(params_for(1), epsilon=0.2)


class TestGapToCapacity:
    def test_high_reading_rate_gap(self):
        assert gap_to_capacity(params_for(10)) == pytest.approx(0.009273, abs=5e-4)

    def test_nonnegative(self):
        for c in (1, 3, 7, 10):
            assert gap_to_capacity(params_for(c)) >= -1e-9

    def test_decreasing_in_cleanliness(self):
        gaps = [gap_to_capacity(params_for(4, p=p)) for p in (0.1, 0.05, 0.01, 0.001)]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))

    def test_decreasing_tail_in_reading_rate(self):
        # the gap rises until c = 4 and only then falls monotonically
        gaps = [gap_to_capacity(params_for(c)) for c in (4, 6, 8, 10)]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))


class TestValidateScheme:
    def test_valid_case(self):
        verdict = validate_scheme(
            params_for(1), SchemeParams(K=1, r_ix=0.5304, r_in=0.6, r_out=0.9)
        )
        assert verdict.ok and verdict.violations == ()

    def test_overhead_violation(self):
        verdict = validate_scheme(
            params_for(1), SchemeParams(K=1, r_ix=0.04, r_in=0.6, r_out=0.9)
        )
        assert not verdict.ok
        assert any("beta" in v and "r_ix" in v for v in verdict.violations)

    def test_quarter_noise_never_clusters(self):
        # h(0.5) = 1 wipes out the clustering margin for any inner rate
        for r_in in (0.1, 0.5, 0.99):
            verdict = validate_scheme(
                params_for(1, p=0.25),
                SchemeParams(K=1, r_ix=0.5, r_in=r_in, r_out=0.9),
            )
            assert not verdict.ok
            assert any("clustering" in v for v in verdict.violations)

    def test_all_violations_reported(self):
        verdict = validate_scheme(
            params_for(1, p=0.25), SchemeParams(K=1, r_ix=0.04, r_in=0.5, r_out=0.9)
        )
        assert len(verdict.violations) >= 1 and not verdict.ok


class TestOptimizeScheme:
    def test_plain_concatenation(self):
        res = optimize_scheme(params_for(1), 1, samples=10_000, seed=0)
        assert res.overall == pytest.approx(0.306575, abs=0.01)
        assert res.d_candidate == 1

    def test_small_block_dip(self):
        res = optimize_scheme(params_for(1), 3, samples=10_000, seed=0)
        assert res.overall == pytest.approx(0.219713, abs=0.01)

    def test_deterministic(self):
        a = optimize_scheme(params_for(2), 10, samples=20_000, seed=5)
        b = optimize_scheme(params_for(2), 10, samples=20_000, seed=5)
        assert a == b

    def test_never_beats_capacity(self):
        for c in (1, 2):
            res = optimize_scheme(params_for(c), 7, samples=10_000, seed=1)
            assert res.overall <= channel_capacity(params_for(c)) + 1e-6

    def test_large_k_limit_is_an_upper_bound(self):
        for K in (1, 10, 100):
            res = optimize_scheme(params_for(2), K, samples=10_000, seed=2)
            limit = asymptotic_rate(params_for(2), res.scheme.r_ix)
            slack = 3 * res.rate.stderr * res.scheme.r_in + 1e-9
            assert res.overall <= limit + slack

    def test_scheme_is_consistent(self):
        res = optimize_scheme(params_for(2), 4, samples=10_000, seed=3)
        recomputed = overall_rate(
            res.scheme.r_in, res.rate.value, res.scheme.r_ix, 0.05
        )
        assert res.overall == pytest.approx(recomputed, abs=1e-12)
        assert res.scheme.r_out == res.rate.value

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            optimize_scheme(params_for(1), 1, rin_grid=1)

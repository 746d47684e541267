import numpy as np
import pytest

from htif import DomainError, InsufficientDataError, RngHandle, TailModel
from htif.rv import sample_bounded_multiplier, sample_pareto
from htif.tailstats import (
    QUANTILE_GRID,
    default_hill_k,
    equivalence_ratio,
    hill_estimate,
    hill_sweep,
    lag_exceedance_ratios,
    radial_rv_check,
    spectral_estimate,
    upper_tail_independence,
)

from oracles import hill_ref, min_uniform_moment

MODEL = TailModel(alpha=0.6)


def pareto(n, seed, alpha=0.6, scale=1.0):
    return sample_pareto(TailModel(alpha=alpha, scale=scale), RngHandle(seed), n)


class TestHill:
    def test_matches_reference_implementation(self):
        x = pareto(5000, 31)
        for k in (16, 100, 777):
            ours = hill_estimate(x, k=k)
            assert ours.alpha_hat == pytest.approx(hill_ref(x, k), rel=1e-12)

    def test_stratified_pareto_sample_recovers_alpha(self):
        # deterministic quantile grid of the alpha=0.6 Pareto law
        u = (np.arange(200_000) + 0.5) / 200_000
        x = (1.0 - u) ** (-1.0 / 0.6)
        est = hill_estimate(x)
        assert abs(est.alpha_hat - 0.6) <= 0.02

    def test_random_pareto_sample_recovers_alpha(self):
        est = hill_estimate(pareto(100_000, 8))
        assert abs(est.alpha_hat - 0.6) <= 0.03
        assert est.covers(0.6)
        assert est.ci_low < est.alpha_hat < est.ci_high

    def test_default_k_rule(self):
        assert default_hill_k(100_000) == int(np.ceil(100_000 ** 0.6))
        x = pareto(4096, 2)
        assert hill_estimate(x).k == default_hill_k(4096)

    def test_interval_width_scales_with_k(self):
        x = pareto(50_000, 5)
        wide = hill_estimate(x, k=50)
        narrow = hill_estimate(x, k=5000)
        assert (wide.ci_high - wide.ci_low) > (narrow.ci_high - narrow.ci_low)

    def test_four_point_sample_by_hand(self):
        # descending order 8, 4, 2, 1 with k=2: mean log-ratio is 1.5 ln 2
        est = hill_estimate(np.array([1.0, 2.0, 4.0, 8.0]), k=2)
        assert est.alpha_hat == pytest.approx(1.0 / (1.5 * np.log(2.0)), rel=1e-12)

    def test_exact_quantile_grid_at_recommended_k(self):
        u = (np.arange(100_000) + 0.5) / 100_000
        x = (1.0 - u) ** (-1.0 / 0.6)
        est = hill_estimate(x, k=1000)
        assert abs(est.alpha_hat - 0.6) <= 0.04

    def test_scale_invariance(self):
        x = pareto(5000, 33)
        base = hill_estimate(x, k=200)
        scaled = hill_estimate(7.0 * x, k=200)
        assert scaled.alpha_hat == pytest.approx(base.alpha_hat, rel=1e-9)

    def test_single_order_statistic_allowed(self):
        est = hill_estimate(np.array([1.0, 2.0]), k=1)
        assert est.alpha_hat == pytest.approx(1.0 / np.log(2.0), rel=1e-12)

    def test_validation(self):
        with pytest.raises(DomainError):
            hill_estimate(np.array([1.0, -1.0, 2.0] * 10))
        with pytest.raises(InsufficientDataError):
            hill_estimate(np.array([1.0]))
        with pytest.raises(DomainError):
            hill_estimate(pareto(100, 1), k=0)
        with pytest.raises(DomainError):
            hill_estimate(pareto(100, 1), k=100)

    def test_sweep_agrees_with_single_estimates(self):
        x = pareto(20_000, 9)
        sweep = hill_sweep(x)
        assert len(sweep) >= 10
        ks = [e.k for e in sweep]
        assert ks == sorted(set(ks))
        for est in sweep[::5]:
            assert est.alpha_hat == hill_estimate(x, k=est.k).alpha_hat


class TestEquivalenceRatio:
    def test_identical_samples_give_exactly_one(self):
        x = pareto(20_000, 3)
        curve = equivalence_ratio(x, x, quantiles=(0.9, 0.99))
        assert curve.ratios == (1.0, 1.0)

    def test_scale_shift_matches_closed_form(self):
        # [DERIVED] P(X > z) / P(2X' > z) -> 2 ** -alpha for Pareto tails
        x = pareto(400_000, 21, scale=1.0)
        y = pareto(400_000, 22, scale=2.0)
        curve = equivalence_ratio(x, y, quantiles=(0.99, 0.999))
        expected = 2.0 ** -0.6
        assert abs(curve.ratios[0] - expected) <= 0.05
        assert abs(curve.ratios[1] - expected) <= 0.1

    def test_tail_index_mismatch_diverges_with_the_level(self):
        # heavier tail on top: the ratio must grow along the grid
        x = pareto(400_000, 23, alpha=0.6)
        y = pareto(400_000, 24, alpha=0.8)
        curve = equivalence_ratio(x, y, quantiles=(0.9, 0.99, 0.999, 0.9999))
        assert curve.ratios[-1] > 3.0 * curve.ratios[0]
        assert curve.ratios[-1] > 2.0

    def test_minimum_sample_size_enforced(self):
        x = pareto(100, 1)
        with pytest.raises(InsufficientDataError):
            equivalence_ratio(x, x)

    def test_empty_denominator_tail_is_an_error(self):
        x = np.ones(20_000)
        with pytest.raises(InsufficientDataError):
            equivalence_ratio(x, x, quantiles=(0.999,))

    def test_validation(self):
        x = pareto(20_000, 1)
        with pytest.raises(DomainError):
            equivalence_ratio(x, x, quantiles=(1.5,))
        with pytest.raises(DomainError):
            equivalence_ratio(x, x, quantiles=())


class TestLagRatios:
    def test_iid_sequence_has_vanishing_ratios(self):
        x = pareto(200_000, 14)
        dep = lag_exceedance_ratios(x, lags=(1, 2, 3), quantiles=(0.99, 0.999))
        assert dep.ratios.shape == (3, 2)
        assert dep.max_ratio() <= 0.05

    def test_periodic_sequence_scores_exactly_one_at_its_period(self):
        # long pattern, few repeats: grid thresholds stay interior while
        # x[h] == x[h + period] holds for every eligible offset
        pattern = pareto(100_000, 6)
        x = np.tile(pattern, 3)
        dep = lag_exceedance_ratios(x, lags=(100_000, 200_000), quantiles=QUANTILE_GRID)
        assert np.all(dep.ratios == 1.0)

    def test_empty_denominator_yields_zero(self):
        x = np.ones(1000)
        dep = lag_exceedance_ratios(x, lags=(1,), quantiles=(0.999,))
        assert dep.ratios[0, 0] == 0.0

    def test_validation(self):
        x = pareto(1000, 2)
        with pytest.raises(DomainError):
            lag_exceedance_ratios(x, lags=(0,))
        with pytest.raises(DomainError):
            lag_exceedance_ratios(x, lags=())
        with pytest.raises(InsufficientDataError):
            lag_exceedance_ratios(x[:5], lags=(10,))


class TestUpperTailIndependence:
    def test_comonotone_triple_is_exactly_one(self):
        x = pareto(20_000, 4)
        dep = upper_tail_independence(x, x, x)
        assert dep.ratios == (1.0, 1.0, 1.0, 1.0)

    def test_independent_pair_vanishes(self):
        x = pareto(300_000, 41)
        y = pareto(300_000, 42)
        ref = pareto(300_000, 43)
        dep = upper_tail_independence(x, y, ref, quantiles=(0.99, 0.999))
        assert dep.ratios[0] <= 0.05
        assert dep.ratios[1] <= 0.05

    def test_common_shock_pair_stays_bounded_away_from_zero(self):
        gen = RngHandle(51)
        w = sample_pareto(MODEL, gen, 400_000)
        u1 = sample_bounded_multiplier(0.5, 2.0, RngHandle(52), 400_000)
        u2 = sample_bounded_multiplier(0.5, 2.0, RngHandle(53), 400_000)
        dep = upper_tail_independence(u1 * w, u2 * w, w, quantiles=(0.999,))
        # [DERIVED] ratio tends to E[min(U1, U2) ** alpha]
        expected = min_uniform_moment(0.5, 2.0, 2, 0.6)
        assert abs(dep.ratios[0] - expected) <= 0.1
        assert dep.ratios[0] >= 0.3

    def test_validation(self):
        x = pareto(100, 1)
        with pytest.raises(DomainError):
            upper_tail_independence(x, x[:50], x)


class TestSpectral:
    def test_comonotone_pairs_put_all_mass_at_the_center(self):
        x = pareto(50_000, 61)
        est = spectral_estimate(np.column_stack([x, x]))
        assert np.all(np.abs(est.angles.sum(axis=1) - 1.0) <= 1e-12)
        assert np.all(np.abs(est.angles - 0.5) <= 1e-12)
        assert est.histogram.max() == 1.0
        assert abs(est.histogram.sum() - 1.0) <= 1e-12
        assert est.norm == "L1"
        assert est.dimension == 2
        assert est.to_dict()["norm"] == "L1"

    def test_independent_pairs_put_mass_near_the_axes(self):
        x = pareto(200_000, 62)
        y = pareto(200_000, 63)
        est = spectral_estimate(np.column_stack([x, y]))
        axis_mass = est.histogram[0] + est.histogram[-1]
        assert axis_mass >= 0.6

    def test_common_shock_pair_confined_to_multiplier_envelope(self):
        w = pareto(200_000, 64)
        u1 = sample_bounded_multiplier(0.5, 2.0, RngHandle(65), 200_000)
        u2 = sample_bounded_multiplier(0.5, 2.0, RngHandle(66), 200_000)
        est = spectral_estimate(np.column_stack([u1 * w, u2 * w]))
        # first-coordinate share is u1/(u1+u2), bounded inside [0.2, 0.8]
        assert est.angles[:, 0].min() >= 0.2 - 1e-12
        assert est.angles[:, 0].max() <= 0.8 + 1e-12

    def test_insufficient_exceedances(self):
        x = pareto(2000, 67)
        with pytest.raises(InsufficientDataError):
            spectral_estimate(np.column_stack([x, x]))

    def test_validation(self):
        with pytest.raises(DomainError):
            spectral_estimate(np.ones((100, 1)))
        bad = np.ones((100, 2))
        bad[3, 1] = -2.0
        with pytest.raises(DomainError):
            spectral_estimate(bad)


class TestRadialCheck:
    def test_unit_scaling_is_exactly_one(self):
        chk = radial_rv_check(pareto(20_000, 71), t_values=(1.0, 2.0))
        assert chk.ratios[0] == 1.0
        assert chk.expected[0] == 1.0

    def test_pareto_radii_follow_the_fitted_power_law(self):
        chk = radial_rv_check(pareto(400_000, 72), t_values=(1.0, 2.0, 4.0))
        assert abs(chk.alpha_hat - 0.6) <= 0.05
        assert max(chk.deviations) <= 0.03

    def test_accepts_vector_samples(self):
        x = pareto(50_000, 73)
        vecs = np.column_stack([0.25 * x, 0.75 * x])
        chk = radial_rv_check(vecs, t_values=(1.0, 2.0))
        assert abs(chk.ratios[1] - 2.0 ** -chk.alpha_hat) <= 0.05

    def test_three_dimensional_common_shock_vectors(self):
        # [DERIVED] L1 radius of (U_1 W, U_2 W, U_3 W) inherits the W tail
        w = pareto(400_000, 75)
        cols = [
            sample_bounded_multiplier(0.5, 2.0, RngHandle(76 + i), 400_000) * w
            for i in range(3)
        ]
        chk = radial_rv_check(
            np.column_stack(cols), t_values=(2.0, 4.0, 8.0), base_quantile=0.995
        )
        assert max(chk.deviations) <= 0.03

    def test_validation(self):
        x = pareto(1000, 74)
        with pytest.raises(DomainError):
            radial_rv_check(x, t_values=(0.0,))
        with pytest.raises(DomainError):
            radial_rv_check(x, base_quantile=1.0)

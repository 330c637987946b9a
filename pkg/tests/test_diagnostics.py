"""Diagnostics tests: normality checks, residuals, goodness of fit, ranking."""

import json
import math

import numpy as np
import numpy.testing as npt
import pytest

from pcdkit.baselines import baseline_mle
from pcdkit.copoun import PcdParams
from pcdkit.diagnostics import (
    chi_square_gof,
    compare_models,
    fitted_pmf,
    information_criteria,
    randomized_quantile_residuals,
    shapiro_wilk,
)
from pcdkit.estimation import build_fit_report, mle_fit
from pcdkit.freq import FrequencyTable
from pcdkit.numkernel import normal_cdf, normal_quantile, regularized_gamma_q
from pcdkit.pcd import pcd_cdf, pcd_pmf, pcd_sample
from conftest import GOLDEN_DIR


def _poisson_cdf(rate):
    def cdf(v):
        if v < 0:
            return 0.0
        return float(regularized_gamma_q(math.floor(v) + 1.0, rate))

    return cdf


class TestShapiroWilk:
    def test_matches_reference_oracle(self):
        with open(GOLDEN_DIR / "shapiro_reference.json",
                  encoding="utf-8") as fh:
            cases = json.load(fh)["cases"]
        assert len(cases) >= 10
        for case in cases:
            rng = np.random.default_rng(case["seed"])
            draw = getattr(rng, case["law"])(size=case["n"])
            result = shapiro_wilk(draw)
            assert abs(result.w - case["w"]) <= 1e-4, case["name"]
            assert abs(result.p - case["p"]) <= 1e-4, case["name"]

    def test_statistic_bounded_by_one(self):
        rng = np.random.default_rng(17)
        for n in (3, 10, 50, 800):
            result = shapiro_wilk(rng.normal(size=n))
            assert 0.0 < result.w <= 1.0
            assert 0.0 <= result.p <= 1.0

    def test_location_and_scale_invariant(self):
        rng = np.random.default_rng(23)
        x = rng.normal(size=60)
        base = shapiro_wilk(x)
        shifted = shapiro_wilk(5.0 + 2.5 * x)
        assert shifted.w == pytest.approx(base.w, rel=1e-12)

    def test_rejects_degenerate_input(self):
        with pytest.raises(ValueError):
            shapiro_wilk(np.full(10, 3.25))
        with pytest.raises(ValueError):
            shapiro_wilk(np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            shapiro_wilk(np.zeros(5001))
        with pytest.raises(ValueError):
            shapiro_wilk(np.array([1.0, math.nan, 2.0]))
        with pytest.raises(ValueError):
            shapiro_wilk(np.ones((4, 4)))

    def test_size_calibration_on_normal_samples(self):
        rng = np.random.default_rng(2024)
        rejections = sum(
            shapiro_wilk(rng.normal(size=100)).p < 0.05
            for _ in range(1000))
        assert 0.02 <= rejections / 1000 <= 0.09

    def test_power_against_skewed_samples(self):
        rng = np.random.default_rng(2025)
        rejections = sum(
            shapiro_wilk(rng.exponential(size=100)).p < 0.05
            for _ in range(400))
        assert rejections / 400 > 0.95


class TestRandomizedQuantileResiduals:
    def test_replay_is_exact(self):
        params = PcdParams(eta=1.0, phi=1.0)
        sample = pcd_sample(params, np.random.default_rng(40), 300)
        cdf = lambda y: float(pcd_cdf(params, y))
        first = randomized_quantile_residuals(cdf, sample, seed=123)
        again = randomized_quantile_residuals(cdf, sample, seed=123)
        npt.assert_array_equal(first.residuals, again.residuals)
        assert first.seed == 123
        assert first.shapiro_w == again.shapiro_w

    def test_fresh_seed_is_recorded_and_replayable(self):
        params = PcdParams(eta=1.0, phi=1.0)
        sample = pcd_sample(params, np.random.default_rng(41), 200)
        cdf = lambda y: float(pcd_cdf(params, y))
        result = randomized_quantile_residuals(cdf, sample)
        assert isinstance(result.seed, int)
        replay = randomized_quantile_residuals(cdf, sample,
                                               seed=result.seed)
        npt.assert_array_equal(result.residuals, replay.residuals)

    def test_residuals_live_inside_their_cdf_jump(self):
        params = PcdParams(eta=1.0, phi=1.0)
        sample = pcd_sample(params, np.random.default_rng(42), 400)
        cdf = lambda y: float(pcd_cdf(params, y))
        result = randomized_quantile_residuals(cdf, sample, seed=7)
        u = normal_cdf(result.residuals)
        for y, ui in zip(sample, u):
            lower = 0.0 if y == 0 else cdf(int(y) - 1)
            upper = cdf(int(y))
            assert lower - 1e-9 <= ui <= upper + 1e-9

    def test_per_observation_cdf_sequence(self):
        cdfs = [_poisson_cdf(1.0), _poisson_cdf(2.0), _poisson_cdf(5.0),
                _poisson_cdf(1.5)]
        result = randomized_quantile_residuals(cdfs,
                                               np.array([0, 2, 4, 1]),
                                               seed=11)
        assert result.residuals.size == 4

    def test_rejects_mismatched_cdf_list(self):
        with pytest.raises(ValueError, match="one cdf per observation"):
            randomized_quantile_residuals([_poisson_cdf(1.0)],
                                          np.array([0, 1, 2]), seed=1)

    def test_tiny_samples_skip_the_normality_check(self):
        result = randomized_quantile_residuals(_poisson_cdf(2.0),
                                               np.array([1, 3]), seed=3)
        assert result.residuals.size == 2
        assert math.isnan(result.shapiro_w)
        assert math.isnan(result.shapiro_p)

    def test_decreasing_cdf_is_an_error(self):
        steps = {0: 0.5, 1: 0.3, 2: 0.9}
        cdf = lambda y: steps.get(int(y), 1.0)
        with pytest.raises(ValueError,
                           match="not increasing at observation 1"):
            randomized_quantile_residuals(cdf, np.array([0, 1]), seed=5)

    def test_saturated_cdf_tie_maps_to_extreme_residual(self):
        # A cdf that has already reached 1.0 in floats produces a
        # degenerate jump interval; the residual saturates instead of
        # raising.
        cdf = lambda y: 1.0
        result = randomized_quantile_residuals(cdf, np.array([1, 2, 3]),
                                               seed=9)
        expected = normal_quantile(1.0 - 1e-12)
        npt.assert_allclose(result.residuals, expected, rtol=1e-12)
        assert math.isnan(result.shapiro_w)

    def test_rejects_invalid_samples(self):
        with pytest.raises(ValueError):
            randomized_quantile_residuals(_poisson_cdf(1.0),
                                          np.array([-1, 2]), seed=1)
        with pytest.raises(ValueError):
            randomized_quantile_residuals(_poisson_cdf(1.0),
                                          np.array([0.5, 2.0]), seed=1)
        with pytest.raises(ValueError):
            randomized_quantile_residuals(_poisson_cdf(1.0), np.array([]),
                                          seed=1)

    def test_calibration_and_gross_misspecification(self):
        # Over-dispersed data scored against its generating law keeps the
        # normality rejection rate near nominal; scored against an
        # equal-mean thin-tailed law it rejects essentially always.
        params = PcdParams(eta=1.0, phi=1.0)
        correct_cdf = lambda y: float(pcd_cdf(params, y))
        wrong_cdf = _poisson_cdf(2.5)
        rng = np.random.default_rng(31415)
        reject_correct = reject_wrong = 0
        reps = 200
        for _ in range(reps):
            sample = pcd_sample(params, rng, 500)
            seed_correct = int(rng.integers(2 ** 32))
            res_correct = randomized_quantile_residuals(
                correct_cdf, sample, seed=seed_correct)
            seed_wrong = int(rng.integers(2 ** 32))
            res_wrong = randomized_quantile_residuals(
                wrong_cdf, sample, seed=seed_wrong)
            reject_correct += res_correct.shapiro_p < 0.05
            reject_wrong += res_wrong.shapiro_p < 0.05
        assert reject_correct / reps <= 0.10
        assert reject_wrong / reps > 0.50


class TestChiSquareGof:
    def test_perfect_agreement_gives_zero(self):
        table = FrequencyTable.from_pairs([(0, 50), (1, 30), (2, 20)])
        pmf = {0: 0.5, 1: 0.3, 2: 0.2}
        result = chi_square_gof(table, lambda v: pmf.get(v, 0.0),
                                fitted_params=0)
        assert result.chi_sq == pytest.approx(0.0, abs=1e-12)
        assert result.df == 2
        assert result.p_value == 1.0
        assert len(result.cells) == 3

    def test_deficient_leading_cell_merges_right(self):
        table = FrequencyTable.from_pairs([(0, 2), (1, 30), (2, 20)])
        pmf = {0: 0.04, 1: 0.56, 2: 0.40}
        result = chi_square_gof(table, lambda v: pmf.get(v, 0.0),
                                fitted_params=0)
        assert len(result.cells) == 2
        first, second = result.cells
        assert (first.low, first.high, first.observed) == (0, 1, 32)
        assert second.low == 2 and second.high is None
        assert sum(cell.observed for cell in result.cells) == 52

    def test_lower_threshold_keeps_more_cells(self, los_table, thipcd_los):
        pmf = fitted_pmf(thipcd_los)
        default = chi_square_gof(los_table, pmf, fitted_params=3)
        loose = chi_square_gof(los_table, pmf, fitted_params=3,
                               min_expected=1.0)
        assert len(loose.cells) > len(default.cells)

    def test_length_of_stay_reference_binning(self, los_table, thipcd_los):
        result = chi_square_gof(los_table, fitted_pmf(thipcd_los),
                                fitted_params=3)
        assert len(result.cells) == 10
        assert [cell.low for cell in result.cells] == [0, 1, 2, 3, 4, 5, 6,
                                                       7, 8, 10]
        assert result.cells[8].high == 9
        assert result.cells[9].high is None
        assert sum(cell.observed for cell in result.cells) == 261
        assert result.chi_sq == pytest.approx(8.488422, abs=1e-4)
        assert result.df == 6
        assert result.p_value == pytest.approx(0.204458, abs=1e-4)

    def test_length_of_stay_fixed_df(self, los_table, thipcd_los):
        result = chi_square_gof(los_table, fitted_pmf(thipcd_los),
                                fitted_params=3, df_override=5)
        assert result.df == 5
        assert result.chi_sq == pytest.approx(8.488422, abs=1e-4)
        assert result.p_value == pytest.approx(0.131293, abs=1e-4)

    def test_thin_tailed_baseline_fits_badly(self, los_table, thipd_los):
        result = chi_square_gof(los_table, fitted_pmf(thipd_los),
                                fitted_params=2, df_override=5)
        assert result.chi_sq > 100.0
        assert result.chi_sq == pytest.approx(136.044, abs=0.1)
        assert result.p_value < 1e-6

    def test_p_values_uniform_under_the_true_model(self):
        params = PcdParams(eta=1.0, phi=1.0)
        pmf = lambda v: float(pcd_pmf(params, v))
        rng = np.random.default_rng(6174)
        reps = 500
        p_values = np.empty(reps)
        for i in range(reps):
            table = FrequencyTable.from_sample(pcd_sample(params, rng, 500))
            p_values[i] = chi_square_gof(table, pmf,
                                         fitted_params=0).p_value
        ordered = np.sort(p_values)
        grid = np.arange(1, reps + 1) / reps
        distance = max(float(np.max(grid - ordered)),
                       float(np.max(ordered - grid + 1.0 / reps)))
        assert distance < 1.6276 / math.sqrt(reps)

    def test_rejects_unusable_inputs(self):
        table = FrequencyTable.from_pairs([(0, 30), (1, 20)])
        uniform = lambda v: 0.5 if v in (0, 1) else 0.0
        with pytest.raises(ValueError, match="insufficient cells"):
            chi_square_gof(table, uniform, fitted_params=1)
        with pytest.raises(ValueError):
            chi_square_gof(table, uniform, fitted_params=-1)
        with pytest.raises(ValueError):
            chi_square_gof(table, uniform, fitted_params=0, min_expected=0.0)
        with pytest.raises(ValueError):
            chi_square_gof(table, uniform, fitted_params=0, df_override=0)
        with pytest.raises(ValueError):
            chi_square_gof(table, lambda v: -0.1, fitted_params=0)
        with pytest.raises(TypeError):
            chi_square_gof([(0, 30)], uniform, fitted_params=0)
        with pytest.raises(ValueError):
            chi_square_gof(FrequencyTable.from_pairs([(0, 4), (1, 5)]),
                           uniform, fitted_params=0)


class TestInformationCriteria:
    def test_exact_arithmetic(self):
        log_likelihood = -579.6249115407606
        result = information_criteria(log_likelihood, 3, 261)
        assert result.aic == pytest.approx(6.0 - 2.0 * log_likelihood,
                                           rel=1e-15)
        assert result.bic == pytest.approx(
            3.0 * math.log(261.0) - 2.0 * log_likelihood, rel=1e-15)

    def test_bic_collapses_to_k_at_unit_log_sample_size(self):
        assert information_criteria(0.0, 1, math.e).bic == 1.0

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            information_criteria(-1.0, 0, 100)
        with pytest.raises(ValueError):
            information_criteria(-1.0, 2, 0.5)


class TestFittedPmf:
    def test_rebuilds_each_model_family(self, thipcd_los, thipd_los):
        report = build_fit_report("pcd", {"eta": 1.0, "phi": 1.0},
                                  {"eta": 0.1, "phi": 0.1}, -10.0, 100,
                                  converged=True)
        pmf = fitted_pmf(report)
        assert pmf(0) == pytest.approx(9.0 / 32.0, rel=1e-12)
        pmf_inflated = fitted_pmf(thipcd_los)
        total = sum(pmf_inflated(v) for v in range(200))
        assert total == pytest.approx(1.0, abs=1e-9)
        pmf_poisson_inflated = fitted_pmf(thipd_los)
        assert pmf_poisson_inflated(0) == pytest.approx(11.277 / 261.0,
                                                        rel=0.01)

    def test_baseline_families_round_trip(self):
        sample = np.random.default_rng(71).poisson(2.0, 500)
        report = baseline_mle("poisson", sample)
        pmf = fitted_pmf(report)
        lam = report.estimates["lambda"]
        assert pmf(2) == pytest.approx(
            math.exp(-lam) * lam ** 2 / 2.0, rel=1e-12)

    def test_rejects_unknown_model(self):
        report = build_fit_report("weibull", {"shape": 1.0},
                                  {"shape": 0.1}, -10.0, 100,
                                  converged=True)
        with pytest.raises(ValueError, match="unknown model"):
            fitted_pmf(report)


class TestCompareModels:
    def test_length_of_stay_ranking(self, los_table, thipcd_los,
                                    thipd_los):
        comparison = compare_models([thipd_los, thipcd_los], los_table,
                                    df_override=5)
        assert comparison.best_model == "thipcd"
        assert comparison.rows[0].model == "thipcd"
        assert comparison.rows[0].best
        assert not comparison.rows[1].best
        assert comparison.rows[0].aic < comparison.rows[1].aic
        assert comparison.rows[0].chi_sq == pytest.approx(8.488422,
                                                          abs=1e-3)
        assert comparison.rows[1].chi_sq > 100.0

    def test_rejects_mismatched_sample_sizes(self, los_table):
        other = build_fit_report("poisson", {"lambda": 2.0},
                                 {"lambda": 0.1}, -100.0, 99,
                                 converged=True)
        own = build_fit_report("geometric", {"p": 0.4}, {"p": 0.02},
                               -110.0, 261, converged=True)
        with pytest.raises(ValueError, match="n="):
            compare_models([other, own], los_table)

    def test_rejects_single_report(self, los_table, thipcd_los):
        with pytest.raises(ValueError):
            compare_models([thipcd_los], los_table)

    def test_ranks_the_generating_model_first_in_most_replications(self):
        params = PcdParams(eta=1.0, phi=1.0)
        rng = np.random.default_rng(271828)
        reps, wins = 200, 0
        for _ in range(reps):
            table = FrequencyTable.from_sample(pcd_sample(params, rng, 500))
            fits = [mle_fit(table), baseline_mle("geometric", table)]
            comparison = compare_models(fits, table)
            wins += comparison.best_model == "pcd"
        assert wins / reps >= 0.80

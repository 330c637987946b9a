"""End-to-end acceptance checks, one printed verdict line per criterion.

Each test computes its sub-checks, prints a single
``ACCEPTANCE n: PASS|FAIL (...)`` line (also echoed in the terminal
summary), and then asserts.  Reference numbers are frozen expectations
for the bundled length-of-stay dataset and for seeded simulations.
"""

import json
import math
from time import perf_counter

import numpy as np
import pytest

from pcdkit.cli import load_counts, main
from pcdkit.copoun import PcdParams, cd_pdf
from pcdkit.diagnostics import (chi_square_gof, fitted_pmf,
                                randomized_quantile_residuals,
                                shapiro_wilk)
from pcdkit.estimation import (mle_fit, mom_asymptotic_variance,
                               mom_bias_experiment, mom_fit)
from pcdkit.freq import FrequencyTable
from pcdkit.inflated import thipcd_mle, thipd_mle
from pcdkit.numkernel import log_gamma, regularized_gamma_q
from pcdkit.pcd import (eta_from_mean_arrays, pcd_cdf,
                        pcd_factorial_moment, pcd_moments, pcd_pgf,
                        pcd_pmf, pcd_sample, support_truncation)
from pcdkit.regression import (RegressionData, pcd_regression_fit,
                               pcd_regression_loglik,
                               pcd_regression_loglik_expanded,
                               simulate_pcd_regression)
from conftest import GOLDEN_DIR, LOS_CSV, REGRESSION_CSV

RESULTS = []

# Frozen reference values for the bundled length-of-stay frequencies.
LOS_THIPCD_NEG_LOGLIK = 579.62
LOS_THIPCD_AIC = 1165.25
LOS_THIPCD_BIC = 1175.94
LOS_THIPCD_EXPECTED = (42.43, 39.91, 38.21, 47.00, 27.67, 21.10, 15.24,
                       10.54, 7.03, 4.56, 2.88, 1.79, 1.09, 0.65, 0.39)
LOS_THIPD_NEG_LOGLIK = 640.79
LOS_THIPD_AIC = 1285.58
LOS_THIPD_BIC = 1292.70
LOS_THIPD_EXPECTED_ZERO = 11.26
LOS_CHI_SQ = 8.81
LOS_CHI_SQ_P = 0.185

PARAM_GRID = (PcdParams(eta=0.25, phi=0.5), PcdParams(eta=0.5, phi=2.0),
              PcdParams(eta=1.0, phi=0.0), PcdParams(eta=1.0, phi=1.0),
              PcdParams(eta=4.0, phi=10.0))


def _verdict(number, checks, detail):
    ok = all(passed for passed, _ in checks)
    line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    RESULTS.append(line)
    print(line)
    failed = "; ".join(text for passed, text in checks if not passed)
    assert ok, f"failed sub-checks: {failed}"


def _quadrature_pmf(params, x):
    # Mixed-Poisson mass: integrate the Poisson kernel against the
    # continuous rate density by piecewise Gauss-Legendre quadrature.
    upper = (x + 40.0) / min(params.eta, 1.0) + 40.0
    nodes, weights = np.polynomial.legendre.leggauss(20)
    edges = np.linspace(0.0, upper, 201)
    log_fact = float(log_gamma(x + 1.0))
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        t = 0.5 * (hi + lo) + half * nodes
        kernel = np.exp(x * np.log(t) - t - log_fact)
        total += half * float(np.sum(weights * kernel * cd_pdf(params, t)))
    return total


def test_criterion_1_inflated_fit_reproduction():
    start = perf_counter()
    table = load_counts(str(LOS_CSV))
    report = thipcd_mle(table)
    neg_loglik = -report.log_likelihood
    pmf = fitted_pmf(report)
    expected = [table.n * pmf(v) for v in
                range(len(LOS_THIPCD_EXPECTED))]
    freq_dev = max(abs(e - r) for e, r in
                   zip(expected, LOS_THIPCD_EXPECTED))
    elapsed = perf_counter() - start
    checks = [
        (abs(neg_loglik - LOS_THIPCD_NEG_LOGLIK) <= 0.5,
         f"-loglik {neg_loglik:.4f} vs {LOS_THIPCD_NEG_LOGLIK} +/- 0.5"),
        (abs(report.aic - LOS_THIPCD_AIC) <= 1.0,
         f"AIC {report.aic:.4f} vs {LOS_THIPCD_AIC} +/- 1.0"),
        (abs(report.bic - LOS_THIPCD_BIC) <= 1.0,
         f"BIC {report.bic:.4f} vs {LOS_THIPCD_BIC} +/- 1.0"),
        (freq_dev <= 0.5,
         f"max expected-frequency deviation {freq_dev:.3f} > 0.5"),
        (elapsed < 5.0, f"runtime {elapsed:.1f}s >= 5s"),
    ]
    _verdict(1, checks,
             f"-loglik {neg_loglik:.2f}, AIC {report.aic:.2f}, "
             f"BIC {report.bic:.2f}, max freq dev {freq_dev:.3f}, "
             f"{elapsed:.1f}s")


def test_criterion_2_poisson_baseline_reproduction():
    start = perf_counter()
    table = load_counts(str(LOS_CSV))
    report = thipd_mle(table)
    neg_loglik = -report.log_likelihood
    expected_zero = table.n * fitted_pmf(report)(0)
    elapsed = perf_counter() - start
    checks = [
        (abs(neg_loglik - LOS_THIPD_NEG_LOGLIK) <= 0.5,
         f"-loglik {neg_loglik:.4f} vs {LOS_THIPD_NEG_LOGLIK} +/- 0.5"),
        (abs(report.aic - LOS_THIPD_AIC) <= 1.0,
         f"AIC {report.aic:.4f} vs {LOS_THIPD_AIC} +/- 1.0"),
        (abs(report.bic - LOS_THIPD_BIC) <= 1.0,
         f"BIC {report.bic:.4f} vs {LOS_THIPD_BIC} +/- 1.0"),
        (abs(expected_zero - LOS_THIPD_EXPECTED_ZERO) <= 0.3,
         f"expected count at zero {expected_zero:.3f} vs "
         f"{LOS_THIPD_EXPECTED_ZERO} +/- 0.3"),
    ]
    _verdict(2, checks,
             f"-loglik {neg_loglik:.2f}, AIC {report.aic:.2f}, "
             f"BIC {report.bic:.2f}, E[count at 0] {expected_zero:.2f}, "
             f"{elapsed:.1f}s")


def test_criterion_3_chi_square_comparison(los_table, thipcd_los,
                                           thipd_los):
    gof_main = chi_square_gof(los_table, fitted_pmf(thipcd_los),
                              fitted_params=3, df_override=5)
    gof_base = chi_square_gof(los_table, fitted_pmf(thipd_los),
                              fitted_params=2, df_override=5)
    checks = [
        (abs(gof_main.chi_sq - LOS_CHI_SQ) <= 1.0,
         f"chi-sq {gof_main.chi_sq:.4f} vs {LOS_CHI_SQ} +/- 1.0"),
        (abs(gof_main.p_value - LOS_CHI_SQ_P) <= 0.05,
         f"p {gof_main.p_value:.6f} vs {LOS_CHI_SQ_P} +/- 0.05"),
        (gof_base.chi_sq > 100.0,
         f"baseline chi-sq {gof_base.chi_sq:.2f} <= 100"),
    ]
    _verdict(3, checks,
             f"chi-sq {gof_main.chi_sq:.4f}, df {gof_main.df}, "
             f"p {gof_main.p_value:.6f}, "
             f"baseline chi-sq {gof_base.chi_sq:.1f}")


def test_criterion_4_distribution_correctness():
    start = perf_counter()
    norm_dev = quad_dev = geo_dev = fact_dev = pgf_one_dev = 0.0
    series_dev = 0.0
    min_di = math.inf
    for params in PARAM_GRID:
        upper = support_truncation(params, tol=1e-14)
        values = np.arange(upper + 1)
        mass = pcd_pmf(params, values)
        norm_dev = max(norm_dev, abs(1.0 - float(np.sum(mass))))
        for x in (0, 5, 10, 20, 30):
            direct = float(pcd_pmf(params, x))
            quad = _quadrature_pmf(params, x)
            quad_dev = max(quad_dev,
                           abs(direct - quad) / max(1.0, abs(quad)))
        for r in (1, 2, 3, 4):
            brute = float(np.sum(mass * np.prod(
                [values - j for j in range(r)], axis=0)))
            exact = pcd_factorial_moment(params, r)
            fact_dev = max(fact_dev, abs(brute - exact) / abs(exact))
        min_di = min(min_di, pcd_moments(params).dispersion_index)
        pgf_one_dev = max(pgf_one_dev,
                          abs(float(pcd_pgf(params, 1.0)) - 1.0))
        series = float(np.sum(mass * np.float_power(0.5, values)))
        series_dev = max(series_dev,
                         abs(series - float(pcd_pgf(params, 0.5))))
    geometric = PcdParams(eta=1.0, phi=0.0)
    for x in range(21):
        geo_dev = max(geo_dev, abs(float(pcd_pmf(geometric, x))
                                   - 0.5 ** (x + 1)) / 0.5 ** (x + 1))
    elapsed = perf_counter() - start
    checks = [
        (norm_dev < 1e-12, f"normalization remainder {norm_dev:.2e}"),
        (quad_dev < 1e-8, f"quadrature deviation {quad_dev:.2e}"),
        (geo_dev < 1e-12,
         f"geometric-reduction deviation {geo_dev:.2e}"),
        (fact_dev < 1e-8, f"factorial-moment deviation {fact_dev:.2e}"),
        (min_di > 1.0, f"dispersion index {min_di:.3f} <= 1"),
        (pgf_one_dev < 1e-12, f"pgf(1) deviation {pgf_one_dev:.2e}"),
        (series_dev < 1e-10, f"pgf series deviation {series_dev:.2e}"),
        (elapsed < 30.0, f"runtime {elapsed:.1f}s >= 30s"),
    ]
    _verdict(4, checks,
             f"normalization {norm_dev:.1e}, quadrature {quad_dev:.1e}, "
             f"geometric {geo_dev:.1e}, factorial {fact_dev:.1e}, "
             f"min DI {min_di:.2f}, pgf {max(pgf_one_dev, series_dev):.1e},"
             f" {elapsed:.1f}s")


def test_criterion_5_estimators():
    start = perf_counter()
    # Closed-form moment fit on a table whose first two sample moments
    # are exactly the theoretical moments at eta=1, phi=1.
    exact_table = FrequencyTable.from_pairs([(0, 10), (1, 9), (6, 11)])
    moment_params = mom_fit(exact_table)
    round_trip_dev = max(abs(moment_params.eta - 1.0),
                         abs(moment_params.phi - 1.0))

    truth = PcdParams(eta=1.0, phi=1.0)
    bias_result = mom_bias_experiment(truth, n=30, reps=2000,
                                      rng=np.random.default_rng(42))

    sample = pcd_sample(truth, np.random.default_rng(7), 5000)
    fit = mle_fit(FrequencyTable.from_sample(sample))
    eta_dev_se = (abs(fit.estimates["eta"] - 1.0)
                  / fit.standard_errors["eta"])
    phi_dev_se = (abs(fit.estimates["phi"] - 1.0)
                  / fit.standard_errors["phi"])

    reps, n = 2000, 2000
    rng = np.random.default_rng(20260101)
    means = np.array([pcd_sample(truth, rng, n).mean()
                      for _ in range(reps)])
    eta_hats = eta_from_mean_arrays(means, truth.phi)
    ratio = (float(np.var(eta_hats, ddof=1)) * n
             / mom_asymptotic_variance(truth))
    elapsed = perf_counter() - start
    checks = [
        (round_trip_dev < 1e-8,
         f"moment round-trip deviation {round_trip_dev:.2e}"),
        (bias_result.bias > 0.0,
         f"small-sample bias {bias_result.bias:.4f} not positive"),
        (eta_dev_se <= 3.0 and phi_dev_se <= 3.0,
         f"recovery deviations {eta_dev_se:.2f}, {phi_dev_se:.2f} SE"),
        (0.85 <= ratio <= 1.15,
         f"scaled variance ratio {ratio:.4f} outside [0.85, 1.15]"),
        (elapsed < 180.0, f"runtime {elapsed:.1f}s >= 180s"),
    ]
    _verdict(5, checks,
             f"round trip {round_trip_dev:.1e}, "
             f"bias {bias_result.bias:+.3f}, recovery "
             f"{max(eta_dev_se, phi_dev_se):.2f} SE, variance ratio "
             f"{ratio:.3f}, {elapsed:.0f}s")


def _load_bundled_regression():
    lines = REGRESSION_CSV.read_text(encoding="utf-8").splitlines()
    rows = [line.split(",") for line in lines[1:] if line.strip()]
    y = np.array([int(float(r[0])) for r in rows])
    design = np.column_stack([np.ones(y.size),
                              np.array([float(r[1]) for r in rows]),
                              np.array([float(r[2]) for r in rows])])
    return RegressionData(response=y, design=design,
                          column_names=("intercept", "x1", "x2"))


def test_criterion_6_regression():
    start = perf_counter()
    data = _load_bundled_regression()
    fit = pcd_regression_fit(data)
    truth = {"intercept": 0.5, "x1": -0.3, "x2": 0.8}
    beta_dev_se = max(abs(fit.coefficients[k] - v) / fit.se[k]
                      for k, v in truth.items())
    phi_dev_se = abs(fit.dispersion - 1.0) / fit.dispersion_se

    rng = np.random.default_rng(64)
    x = rng.normal(size=100)
    small = RegressionData(
        response=simulate_pcd_regression(
            np.column_stack([np.ones(100), x]), (0.4, 0.3), 1.0, rng),
        design=np.column_stack([np.ones(100), x]),
        column_names=("intercept", "x"))
    identity_dev = max(
        abs(pcd_regression_loglik(small, (0.4, 0.3), phi)
            - pcd_regression_loglik_expanded(small, (0.4, 0.3), phi))
        for phi in (1e-8, 0.3, 1.0, 4.0))

    rng = np.random.default_rng(501)
    ratios = []
    for _ in range(3):
        x_small = rng.normal(size=2000)
        design_small = np.column_stack([np.ones(2000), x_small])
        y_small = simulate_pcd_regression(design_small, (0.5, 0.4), 1.0,
                                          rng)
        fit_small = pcd_regression_fit(RegressionData(
            response=y_small, design=design_small,
            column_names=("intercept", "x")))
        design_big = np.vstack([design_small, design_small])
        y_more = simulate_pcd_regression(design_small, (0.5, 0.4), 1.0,
                                         rng)
        fit_big = pcd_regression_fit(RegressionData(
            response=np.concatenate([y_small, y_more]),
            design=design_big, column_names=("intercept", "x")))
        ratios.append(fit_small.se["x"] / fit_big.se["x"])
    shrink = float(np.median(ratios))
    shrink_dev = abs(shrink / math.sqrt(2.0) - 1.0)

    rng = np.random.default_rng(1234)
    sims, rejections = 500, 0
    for _ in range(sims):
        x_null = rng.normal(size=250)
        design_null = np.column_stack([np.ones(250), x_null])
        y_null = simulate_pcd_regression(design_null, (0.4, 0.0), 1.0,
                                         rng)
        fit_null = pcd_regression_fit(RegressionData(
            response=y_null, design=design_null,
            column_names=("intercept", "x")))
        rejections += fit_null.p["x"] < 0.05
    rate = rejections / sims
    elapsed = perf_counter() - start
    checks = [
        (beta_dev_se <= 3.0 and phi_dev_se <= 3.0,
         f"recovery deviations {beta_dev_se:.2f}, {phi_dev_se:.2f} SE"),
        (identity_dev < 1e-8,
         f"log-likelihood identity deviation {identity_dev:.2e}"),
        (shrink_dev <= 0.15,
         f"doubled-n SE ratio {shrink:.4f} departs from sqrt(2) "
         f"by {shrink_dev:.1%}"),
        (0.02 <= rate <= 0.09,
         f"null rejection rate {rate:.3f} outside [0.02, 0.09]"),
        (elapsed < 300.0, f"runtime {elapsed:.1f}s >= 300s"),
    ]
    _verdict(6, checks,
             f"recovery {max(beta_dev_se, phi_dev_se):.2f} SE, identity "
             f"{identity_dev:.1e}, SE ratio {shrink:.3f}, null rate "
             f"{rate:.3f}, {elapsed:.0f}s")


def test_criterion_7_diagnostics():
    start = perf_counter()
    params = PcdParams(eta=1.0, phi=1.0)
    correct_cdf = lambda y: float(pcd_cdf(params, y))
    wrong_cdf = lambda y: (0.0 if y < 0 else float(
        regularized_gamma_q(math.floor(y) + 1.0, 2.5)))
    rng = np.random.default_rng(31415)
    reps = 200
    reject_correct = reject_wrong = 0
    for _ in range(reps):
        sample = pcd_sample(params, rng, 500)
        seed_correct = int(rng.integers(2 ** 32))
        reject_correct += randomized_quantile_residuals(
            correct_cdf, sample, seed=seed_correct).shapiro_p < 0.05
        seed_wrong = int(rng.integers(2 ** 32))
        reject_wrong += randomized_quantile_residuals(
            wrong_cdf, sample, seed=seed_wrong).shapiro_p < 0.05
    correct_rate = reject_correct / reps
    wrong_rate = reject_wrong / reps

    pmf = lambda v: float(pcd_pmf(params, v))
    rng = np.random.default_rng(6174)
    gof_reps = 500
    p_values = np.sort([chi_square_gof(
        FrequencyTable.from_sample(pcd_sample(params, rng, 500)), pmf,
        fitted_params=0).p_value for _ in range(gof_reps)])
    grid = np.arange(1, gof_reps + 1) / gof_reps
    ks = max(float(np.max(grid - p_values)),
             float(np.max(p_values - grid + 1.0 / gof_reps)))
    ks_crit = 1.6276 / math.sqrt(gof_reps)

    with open(GOLDEN_DIR / "shapiro_reference.json",
              encoding="utf-8") as fh:
        cases = json.load(fh)["cases"]
    oracle_dev = 0.0
    for case in cases:
        draw = getattr(np.random.default_rng(case["seed"]),
                       case["law"])(size=case["n"])
        result = shapiro_wilk(draw)
        oracle_dev = max(oracle_dev, abs(result.w - case["w"]),
                         abs(result.p - case["p"]))
    elapsed = perf_counter() - start
    checks = [
        (correct_rate <= 0.10,
         f"rejection rate {correct_rate:.3f} under the true model"),
        (wrong_rate > 0.50,
         f"rejection rate {wrong_rate:.3f} under misspecification"),
        (ks < ks_crit,
         f"p-value uniformity KS {ks:.4f} >= {ks_crit:.4f}"),
        (oracle_dev <= 1e-4,
         f"normality-test oracle deviation {oracle_dev:.2e}"),
        (elapsed < 180.0, f"runtime {elapsed:.1f}s >= 180s"),
    ]
    _verdict(7, checks,
             f"residual rejection {correct_rate:.3f}/{wrong_rate:.3f}, "
             f"KS {ks:.4f} (crit {ks_crit:.4f}), oracle dev "
             f"{oracle_dev:.1e}, {elapsed:.0f}s")


def test_criterion_8_determinism(tmp_path, capsys):
    argv_tail = ["-n", "400", "--eta", "1.0", "--phi", "1.0",
                 "--seed", "73"]
    first = tmp_path / "a.txt"
    second = tmp_path / "b.txt"
    assert main(["simulate", "pcd", str(first)] + argv_tail) == 0
    assert main(["simulate", "pcd", str(second)] + argv_tail) == 0
    bytes_match = first.read_bytes() == second.read_bytes()

    assert main(["fit", "pcd", str(first)]) == 0
    fit_first = capsys.readouterr().out
    assert main(["fit", "pcd", str(second)]) == 0
    fit_second = capsys.readouterr().out
    fit_match = fit_first == fit_second

    assert main(["fit", "thipcd", str(LOS_CSV)]) == 0
    golden_run = capsys.readouterr().out
    with open(GOLDEN_DIR / "cli_fit_thipcd.json", encoding="utf-8") as fh:
        golden = json.load(fh)
    payload = json.loads(golden_run)
    golden_dev = max(
        abs(payload["estimates"][k] - golden["estimates"][k])
        for k in golden["estimates"])
    checks = [
        (bytes_match, "seeded simulation outputs differ"),
        (fit_match, "refit reports on identical simulations differ"),
        (golden_dev < 1e-9,
         f"stored-report deviation {golden_dev:.2e}"),
    ]
    _verdict(8, checks,
             f"simulation bytes identical: {bytes_match}, refit identical:"
             f" {fit_match}, golden dev {golden_dev:.1e}")

"""pcdkit: a count-data modeling toolkit built around an over-dispersed
mixed-Poisson family.

The package covers the continuous mixing distribution and the discrete
count family it induces (pmf, cdf, quantile, sampling, moments,
generating functions), method-of-moments and maximum-likelihood
estimation with Wald inference, a three-inflated variant, classical
baseline distributions, log-link count regression, residual and
goodness-of-fit diagnostics, and a batch command line interface.
"""

from .copoun import PcdParams, cd_cdf, cd_pdf, cd_sample
from .diagnostics import (ComparisonResult, ComparisonRow, GofCell, GofResult,
                          InformationCriteria, RqrResult, ShapiroResult,
                          chi_square_gof, compare_models, fitted_pmf,
                          information_criteria, randomized_quantile_residuals,
                          shapiro_wilk)
from .estimation import (BiasExperimentResult, FitReport, MomentError,
                         MomentOutsideParameterSpaceError,
                         MomentSystemInfeasibleError, mle_fit,
                         mom_asymptotic_variance, mom_bias_experiment,
                         mom_fit)
from .baselines import (BASELINE_FAMILIES, BaselineSpec, baseline_log_pmf,
                        baseline_mle, nb_prob)
from .freq import FrequencyTable, as_frequency_table
from .inflated import (InflatedMoments, InflatedParams, thipcd_cdf,
                       thipcd_cf, thipcd_inflation_gap, thipcd_log_pmf,
                       thipcd_loglik_split, thipcd_mgf, thipcd_mle,
                       thipcd_moments, thipcd_pgf, thipcd_pmf, thipcd_sample,
                       thipd_log_pmf, thipd_mle)
from .numkernel import (EvaluationError, NotPositiveDefiniteError,
                        OptimizerConfig, OptimResult, chisq_sf, log_gamma,
                        minimize, normal_cdf, normal_pdf, normal_quantile,
                        normal_sf, numeric_gradient, numeric_hessian,
                        regularized_gamma_p, regularized_gamma_q, solve_spd)
from .pcd import (MeanParams, PcdMoments, PmfEvaluation, eta_from_mean,
                  eta_from_mean_arrays, evaluate_pmf, pcd_cdf, pcd_cf,
                  pcd_factorial_moment, pcd_log_pmf, pcd_mgf, pcd_moments,
                  pcd_pgf, pcd_pmf, pcd_quantile, pcd_sample,
                  pcd_sample_given_eta, support_truncation)
from .regression import (ProfileTrace, RegressionData, RegressionFit,
                         nb_regression_fit, pcd_regression_fit,
                         pcd_regression_loglik,
                         pcd_regression_loglik_expanded,
                         poisson_regression_fit, profile_traces,
                         simulate_pcd_regression)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # mixing distribution and parameters
    "PcdParams", "cd_pdf", "cd_cdf", "cd_sample",
    # count family
    "MeanParams", "PmfEvaluation", "PcdMoments", "pcd_log_pmf", "pcd_pmf",
    "evaluate_pmf", "pcd_cdf", "pcd_quantile", "pcd_sample",
    "pcd_sample_given_eta", "pcd_factorial_moment", "pcd_moments", "pcd_pgf",
    "pcd_mgf", "pcd_cf", "eta_from_mean", "eta_from_mean_arrays",
    "support_truncation",
    # estimation
    "FitReport", "BiasExperimentResult", "MomentError",
    "MomentSystemInfeasibleError", "MomentOutsideParameterSpaceError",
    "mom_fit", "mom_asymptotic_variance", "mom_bias_experiment", "mle_fit",
    # three-inflated variant
    "InflatedParams", "InflatedMoments", "thipcd_log_pmf", "thipcd_pmf",
    "thipcd_cdf", "thipcd_inflation_gap", "thipcd_moments", "thipcd_pgf",
    "thipcd_mgf", "thipcd_cf", "thipcd_sample", "thipcd_loglik_split",
    "thipcd_mle", "thipd_log_pmf", "thipd_mle",
    # baselines
    "BASELINE_FAMILIES", "BaselineSpec", "baseline_log_pmf", "baseline_mle",
    "nb_prob",
    # regression
    "RegressionData", "RegressionFit", "ProfileTrace",
    "pcd_regression_loglik", "pcd_regression_loglik_expanded",
    "pcd_regression_fit", "poisson_regression_fit", "nb_regression_fit",
    "profile_traces", "simulate_pcd_regression",
    # diagnostics
    "ShapiroResult", "RqrResult", "GofCell", "GofResult",
    "InformationCriteria", "ComparisonRow", "ComparisonResult",
    "shapiro_wilk", "randomized_quantile_residuals", "chi_square_gof",
    "information_criteria", "fitted_pmf", "compare_models",
    # frequency tables
    "FrequencyTable", "as_frequency_table",
    # numerical kernel
    "OptimizerConfig", "OptimResult", "EvaluationError",
    "NotPositiveDefiniteError", "log_gamma", "regularized_gamma_p",
    "regularized_gamma_q", "normal_pdf", "normal_cdf", "normal_sf",
    "normal_quantile", "chisq_sf", "numeric_gradient", "numeric_hessian",
    "minimize", "solve_spd",
]

"""Baseline count distributions for model comparison.

Poisson, geometric, negative binomial, and zero-inflated Poisson:
log-pmf evaluation plus maximum-likelihood fitting that produces the
same FitReport shape as the main model fitters.  Poisson and geometric
estimates are closed-form; the other two are maximized numerically in
unconstrained coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .freq import as_frequency_table
from .numkernel import (
    NotPositiveDefiniteError,
    OptimizerConfig,
    log_gamma,
    numeric_hessian,
    solve_spd,
)
from .estimation import FitReport, build_fit_report, wald_fit

__all__ = [
    "BaselineSpec",
    "BASELINE_FAMILIES",
    "baseline_log_pmf",
    "baseline_mle",
    "nb_prob",
]

BASELINE_FAMILIES = ("poisson", "geometric", "negative_binomial", "zip")


@dataclass(frozen=True)
class BaselineSpec:
    """A baseline family name plus its named parameter values."""

    family: str
    parameters: dict

    def __post_init__(self):
        if self.family not in BASELINE_FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; "
                             f"expected one of {BASELINE_FAMILIES}")
        p = self.parameters
        if self.family == "poisson":
            if p.get("lambda", 0.0) <= 0.0:
                raise ValueError("poisson rate must be positive")
        elif self.family == "geometric":
            if not 0.0 < p.get("p", 0.0) < 1.0:
                raise ValueError("geometric success probability must be in (0, 1)")
        elif self.family == "negative_binomial":
            if p.get("mean", 0.0) <= 0.0 or p.get("dispersion", 0.0) <= 0.0:
                raise ValueError("negative binomial needs positive mean and dispersion")
        else:
            if p.get("lambda", 0.0) <= 0.0 or not 0.0 <= p.get("alpha", -1.0) < 1.0:
                raise ValueError("zip needs positive rate and alpha in [0, 1)")


def _poisson_log_pmf(lam, y):
    return -lam + y * np.log(lam) - log_gamma(y + 1.0)


def _geometric_log_pmf(p, y):
    return math.log(p) + y * math.log1p(-p)


def _nb_log_pmf(mean, dispersion, y):
    r, m = dispersion, mean
    return (log_gamma(y + r) - log_gamma(r) - log_gamma(y + 1.0)
            + r * math.log(r / (r + m)) + y * math.log(m / (r + m)))


def _zip_log_pmf(lam, alpha, y):
    y = np.asarray(y, dtype=float)
    plain = np.log1p(-alpha) + _poisson_log_pmf(lam, y)
    at_zero = math.log(alpha + (1.0 - alpha) * math.exp(-lam)) if alpha > 0.0 \
        else -lam
    out = np.where(y == 0.0, at_zero, plain)
    return out


def nb_prob(mean: float, dispersion: float) -> float:
    """Classic success-probability of the (size, prob) NB parametrization."""
    return dispersion / (dispersion + mean)


def baseline_log_pmf(spec: BaselineSpec, y):
    """Family-dispatched log pmf at nonnegative integer y (scalar or array)."""
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < 0.0) or np.any(y_arr != np.floor(y_arr)):
        raise ValueError("count values must be nonnegative integers")
    p = spec.parameters
    if spec.family == "poisson":
        out = _poisson_log_pmf(p["lambda"], y_arr)
    elif spec.family == "geometric":
        out = _geometric_log_pmf(p["p"], y_arr)
    elif spec.family == "negative_binomial":
        out = _nb_log_pmf(p["mean"], p["dispersion"], y_arr)
    else:
        out = _zip_log_pmf(p["lambda"], p["alpha"], y_arr)
    if np.isscalar(y) or y_arr.ndim == 0:
        return float(out)
    return out


def _closed_form_report(model_name: str, estimates: dict, nll_theta, theta_hat,
                        jacobian, log_likelihood: float, n: int,
                        ci_level: float) -> FitReport:
    # Closed-form estimates still get observed-information standard errors
    # so every family reports the same uncertainty contract.
    names = list(estimates)
    ses = {name: math.nan for name in names}
    try:
        hessian = numeric_hessian(nll_theta, np.asarray(theta_hat, dtype=float))
        cov = solve_spd(hessian, np.eye(len(names)))
        jac = np.asarray(jacobian, dtype=float)
        variances = np.diag(jac[:, None] * cov * jac[None, :])
        if np.all(variances > 0.0):
            for name, var in zip(names, variances):
                ses[name] = math.sqrt(var)
    except (NotPositiveDefiniteError, ValueError):
        pass
    return build_fit_report(model_name, estimates, ses, log_likelihood,
                            n, converged=True, ci_level=ci_level)


def baseline_mle(family: str, sample, config: OptimizerConfig | None = None,
                 ci_level: float = 0.95) -> FitReport:
    """Maximum-likelihood fit of one baseline family.

    Poisson and geometric use their closed forms (lambda = sample mean;
    p = 1 / (1 + mean)); the negative binomial and zero-inflated Poisson
    are maximized numerically over log/logit-transformed parameters.
    """
    if family not in BASELINE_FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    table = as_frequency_table(sample)
    if table.n < 2:
        raise ValueError("need at least two observations")
    values = np.asarray(table.values, dtype=float)
    counts = np.asarray(table.counts, dtype=float)
    n = table.n
    mean = table.mean()

    def weighted(logp):
        return float(np.dot(counts, logp))

    if family == "poisson":
        lam = mean
        loglik = weighted(_poisson_log_pmf(lam, values))
        return _closed_form_report(
            "poisson", {"lambda": lam},
            lambda t: -weighted(_poisson_log_pmf(math.exp(t[0]), values)),
            [math.log(lam)], [lam], loglik, n, ci_level)

    if family == "geometric":
        p = 1.0 / (1.0 + mean)
        loglik = weighted(np.log(p) + values * math.log1p(-p))
        logit_p = math.log(p / (1.0 - p))

        def nll(theta):
            prob = 1.0 / (1.0 + math.exp(-theta[0]))
            return -weighted(np.log(prob) + values * math.log1p(-prob))

        return _closed_form_report(
            "geometric", {"p": p}, nll, [logit_p], [p * (1.0 - p)],
            loglik, n, ci_level)

    if family == "negative_binomial":
        variance = max(table.variance(), 1e-12)
        dispersion0 = mean * mean / (variance - mean) if variance > mean else 10.0
        dispersion0 = min(max(dispersion0, 0.05), 1e4)

        def nll(theta):
            if np.max(np.abs(theta)) > 50.0:
                return 1e12 + float(np.sum(np.abs(theta)))
            m = math.exp(theta[0])
            r = math.exp(theta[1])
            return -weighted(log_gamma(values + r) - log_gamma(r)
                             - log_gamma(values + 1.0)
                             + r * math.log(r / (r + m))
                             + values * np.log(m / (r + m)))

        report, _ = wald_fit(
            "negative_binomial", nll,
            [math.log(mean), math.log(dispersion0)],
            lambda theta: (np.exp(theta), np.exp(theta)),
            ("mean", "dispersion"), n, config, ci_level)
        return report

    # zero-inflated Poisson
    share_zero = float(counts[values == 0.0].sum()) / n if np.any(values == 0.0) else 0.0
    alpha0 = min(max(share_zero / 2.0, 0.02), 0.9)
    lam0 = mean / (1.0 - alpha0)

    def nll(theta):
        if np.max(np.abs(theta)) > 50.0:
            return 1e12 + float(np.sum(np.abs(theta)))
        lam = math.exp(theta[0])
        alpha = 1.0 / (1.0 + math.exp(-theta[1]))
        return -weighted(_zip_log_pmf(lam, alpha, values))

    def to_natural(theta):
        lam = math.exp(theta[0])
        alpha = 1.0 / (1.0 + math.exp(-theta[1]))
        return np.array([lam, alpha]), np.array([lam, alpha * (1.0 - alpha)])

    report, _ = wald_fit(
        "zip", nll, [math.log(lam0), math.log(alpha0 / (1.0 - alpha0))],
        to_natural, ("lambda", "alpha"), n, config, ci_level)
    return report

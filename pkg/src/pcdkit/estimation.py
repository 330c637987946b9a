"""Parameter estimation for standalone Poisson-Copoun samples.

Closed-form method of moments, numerical maximum likelihood in
log-transformed coordinates, Wald confidence intervals from the observed
information, the delta-method asymptotic variance of the moment
estimator, and a Monte-Carlo bias experiment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .copoun import PcdParams
from .freq import FrequencyTable, as_frequency_table
from .numkernel import (
    NotPositiveDefiniteError,
    OptimizerConfig,
    OptimResult,
    minimize,
    normal_quantile,
    numeric_hessian,
    solve_spd,
)
from .pcd import log_pmf_core, pcd_moments, pcd_sample

__all__ = [
    "FitReport",
    "MomentError",
    "MomentSystemInfeasibleError",
    "MomentOutsideParameterSpaceError",
    "BiasExperimentResult",
    "mom_fit",
    "mom_asymptotic_variance",
    "mle_fit",
    "mom_bias_experiment",
    "build_fit_report",
    "wald_fit",
]


class MomentError(ValueError):
    """Base class for method-of-moments failures."""


class MomentSystemInfeasibleError(MomentError):
    """The sample moments admit no real solution."""


class MomentOutsideParameterSpaceError(MomentError):
    """The moment solution lands outside the parameter space."""


@dataclass(frozen=True)
class FitReport:
    """Universal fitter output: estimates, uncertainty, and fit criteria."""

    model_name: str
    estimates: dict
    standard_errors: dict
    ci_level: float
    ci_lower: dict
    ci_upper: dict
    log_likelihood: float
    aic: float
    bic: float
    n: int
    converged: bool

    @property
    def k(self) -> int:
        """Number of estimated parameters."""
        return len(self.estimates)

    def to_dict(self) -> dict:
        """Plain-dict view with a fixed, deterministic key order."""
        clean = lambda d: {k: (None if not math.isfinite(v) else v)
                           for k, v in d.items()}
        return {
            "model": self.model_name,
            "n": self.n,
            "converged": self.converged,
            "estimates": dict(self.estimates),
            "standard_errors": clean(self.standard_errors),
            "ci_level": self.ci_level,
            "ci_lower": clean(self.ci_lower),
            "ci_upper": clean(self.ci_upper),
            "log_likelihood": self.log_likelihood,
            "aic": self.aic,
            "bic": self.bic,
        }


@dataclass(frozen=True)
class BiasExperimentResult:
    """Monte-Carlo summary of the moment estimator of eta."""

    mean_eta_hat: float
    bias: float
    n_infeasible: int
    eta_hats: np.ndarray


def build_fit_report(model_name: str, estimates: dict, standard_errors: dict,
                     log_likelihood: float, n: int, converged: bool,
                     ci_level: float = 0.95) -> FitReport:
    """Assemble a FitReport, deriving AIC/BIC and Wald intervals."""
    if not 0.0 < ci_level < 1.0:
        raise ValueError("ci_level must be inside (0, 1)")
    k = len(estimates)
    z = normal_quantile(1.0 - (1.0 - ci_level) / 2.0)
    lower, upper = {}, {}
    for name, est in estimates.items():
        se = standard_errors.get(name, math.nan)
        lower[name] = est - z * se
        upper[name] = est + z * se
    return FitReport(
        model_name=model_name,
        estimates=dict(estimates),
        standard_errors=dict(standard_errors),
        ci_level=ci_level,
        ci_lower=lower,
        ci_upper=upper,
        log_likelihood=log_likelihood,
        aic=2.0 * k - 2.0 * log_likelihood,
        bic=k * math.log(n) - 2.0 * log_likelihood,
        n=n,
        converged=converged,
    )


def wald_fit(model_name: str, nll, theta0, to_natural, param_names,
             n: int, config: OptimizerConfig | None = None,
             ci_level: float = 0.95) -> tuple[FitReport, OptimResult]:
    """Shared maximum-likelihood driver in unconstrained coordinates.

    Minimizes ``nll`` from ``theta0``, maps the optimum through
    ``to_natural`` (returning natural-scale values and the diagonal
    Jacobian of the map), and produces observed-information standard
    errors carried to the natural scale by the delta method.
    """
    result = minimize(nll, np.asarray(theta0, dtype=float), config)
    natural, jacobian = to_natural(result.argmin)
    estimates = dict(zip(param_names, (float(v) for v in natural)))
    ses = {name: math.nan for name in param_names}
    try:
        hessian = numeric_hessian(nll, result.argmin)
        cov_theta = solve_spd(hessian, np.eye(len(param_names)))
        jac = np.asarray(jacobian, dtype=float)
        cov_natural = jac[:, None] * cov_theta * jac[None, :]
        variances = np.diag(cov_natural)
        if np.all(variances > 0.0):
            for name, var in zip(param_names, variances):
                ses[name] = math.sqrt(var)
    except (NotPositiveDefiniteError, ValueError):
        pass
    report = build_fit_report(
        model_name=model_name,
        estimates=estimates,
        standard_errors=ses,
        log_likelihood=-result.min_value,
        n=n,
        converged=result.converged,
        ci_level=ci_level,
    )
    return report, result


def _moment_solution(m1: float, m2: float) -> tuple[float, float]:
    denominator = m2 - m1
    if denominator <= 0.0:
        raise MomentSystemInfeasibleError(
            "moment system infeasible: second moment does not exceed the first"
        )
    discriminant = 9.0 * m1 * m1 + 4.0 * (m1 - m2)
    if discriminant < 0.0:
        raise MomentSystemInfeasibleError(
            "moment system infeasible: negative discriminant"
        )
    eta = (3.0 * m1 + math.sqrt(discriminant)) / denominator
    phi_denominator = 4.0 - m1 * eta
    if phi_denominator <= 0.0:
        raise MomentOutsideParameterSpaceError(
            "moment estimate outside parameter space: eta solution too large"
        )
    phi = (m1 * eta * eta - eta) / phi_denominator
    if phi < 0.0:
        raise MomentOutsideParameterSpaceError(
            "moment estimate outside parameter space: negative phi"
        )
    return eta, phi


def mom_fit(sample) -> PcdParams:
    """Method-of-moments estimates from the first two raw sample moments.

    eta solves (m1 - m2) eta^2 + 6 m1 eta - 4 = 0 (the displayed positive
    root), then phi = (m1 eta^2 - eta) / (4 - m1 eta).  Raises when the
    moment system has no solution inside the parameter space; callers may
    fall back to maximum likelihood.
    """
    table = as_frequency_table(sample)
    if table.n < 2:
        raise ValueError("need at least two observations")
    if table.variance() <= 0.0:
        raise ValueError("sample variance must be positive")
    eta, phi = _moment_solution(table.mean(), table.raw_moment(2))
    return PcdParams(eta=eta, phi=phi)


def mom_asymptotic_variance(params: PcdParams) -> float:
    """Delta-method asymptotic variance of sqrt(n) (eta_hat - eta).

    Composes the derivative of the mean-to-eta map,
    h'(mu) = -eta^2 (eta + phi)^2 / (eta^2 + 8 phi eta + 4 phi^2),
    with the count variance.
    """
    eta, phi = params.eta, params.phi
    slope = -(eta ** 2) * (eta + phi) ** 2 / (eta ** 2 + 8.0 * phi * eta
                                              + 4.0 * phi ** 2)
    return slope ** 2 * pcd_moments(params).variance


def _pcd_nll(values: np.ndarray, counts: np.ndarray):
    def nll(theta):
        if np.max(np.abs(theta)) > 100.0:
            return 1e12 + float(np.sum(np.abs(theta)))
        eta = math.exp(theta[0])
        phi = math.exp(theta[1])
        return -float(np.dot(counts, log_pmf_core(eta, phi, values)))
    return nll


def _pcd_start(table: FrequencyTable) -> np.ndarray:
    try:
        start = mom_fit(table)
        return np.array([math.log(start.eta), math.log(max(start.phi, 1e-3))])
    except (MomentError, ValueError):
        return np.array([math.log(1.0 / table.mean()), 0.0])


def mle_fit(sample, config: OptimizerConfig | None = None,
            ci_level: float = 0.95) -> FitReport:
    """Maximum-likelihood fit of (eta, phi) with Wald intervals.

    Optimizes in (ln eta, ln phi) so the simplex stays off the boundary,
    from two deterministic starting points, keeping the better optimum:
    the moment estimates when they are feasible, plus a near-boundary
    start at small phi.  The likelihood surface can carry two close local
    optima (an interior ridge osculates the phi -> 0 geometric slice), so
    a single interior start may undershoot the geometric nesting bound.
    Standard errors come from the inverse numeric Hessian mapped back
    through the exponential transform.
    """
    table = as_frequency_table(sample)
    if table.n < 2:
        raise ValueError("need at least two observations")
    values = np.asarray(table.values, dtype=float)
    counts = np.asarray(table.counts, dtype=float)
    nll = _pcd_nll(values, counts)

    def to_natural(theta):
        natural = np.exp(theta)
        return natural, natural

    starts = [_pcd_start(table),
              np.array([math.log(1.0 / table.mean()), -10.0])]
    best = None
    for theta0 in starts:
        candidate = wald_fit(
            model_name="pcd",
            nll=nll,
            theta0=theta0,
            to_natural=to_natural,
            param_names=("eta", "phi"),
            n=table.n,
            config=config,
            ci_level=ci_level,
        )
        if best is None or candidate[1].min_value < best[1].min_value:
            best = candidate
    report, _ = best
    return report


def mom_bias_experiment(params: PcdParams, n: int, reps: int,
                        rng: np.random.Generator) -> BiasExperimentResult:
    """Monte-Carlo bias of the moment estimator of eta.

    Draws ``reps`` samples of size ``n``, applies the closed-form
    estimator to each, skips (and counts) infeasible replications, and
    reports the mean estimate and its bias.
    """
    if reps < 100:
        raise ValueError("need at least 100 replications")
    if n < 2:
        raise ValueError("need sample size of at least 2")
    draws = pcd_sample(params, rng, reps * n).reshape(reps, n).astype(float)
    m1 = draws.mean(axis=1)
    m2 = (draws ** 2).mean(axis=1)
    denominator = m2 - m1
    discriminant = 9.0 * m1 ** 2 + 4.0 * (m1 - m2)
    feasible = (denominator > 0.0) & (discriminant >= 0.0)
    eta = np.full(reps, np.nan)
    safe = np.where(feasible, denominator, 1.0)
    eta[feasible] = ((3.0 * m1 + np.sqrt(np.clip(discriminant, 0.0, None)))
                     / safe)[feasible]
    phi_denominator = 4.0 - m1 * eta
    with np.errstate(invalid="ignore", divide="ignore"):
        phi = (m1 * eta ** 2 - eta) / phi_denominator
        feasible &= (phi_denominator > 0.0) & (phi >= 0.0)
    n_infeasible = int(reps - feasible.sum())
    if n_infeasible > reps // 2:
        raise RuntimeError(
            f"more than half of the replications were infeasible "
            f"({n_infeasible}/{reps})"
        )
    eta_hats = eta[feasible]
    mean_eta = float(eta_hats.mean())
    return BiasExperimentResult(
        mean_eta_hat=mean_eta,
        bias=mean_eta - params.eta,
        n_infeasible=n_infeasible,
        eta_hats=eta_hats,
    )

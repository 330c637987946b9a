"""Three-inflated count models.

The three-inflated Poisson-Copoun distribution (extra probability mass
alpha at the value 3 on top of the base count model) with pmf, moments,
generating functions, sampling, and maximum-likelihood fitting — plus
the analogous three-inflated Poisson used as its comparison baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .copoun import PcdParams
from .freq import as_frequency_table
from .numkernel import OptimizerConfig, log_gamma
from .estimation import FitReport, wald_fit
from .pcd import (
    log_pmf_core,
    pcd_log_pmf,
    pcd_moments,
    pcd_pgf,
    pcd_pmf,
    pcd_sample,
)

__all__ = [
    "InflatedParams",
    "InflatedMoments",
    "thipcd_log_pmf",
    "thipcd_pmf",
    "thipcd_cdf",
    "thipcd_inflation_gap",
    "thipcd_moments",
    "thipcd_pgf",
    "thipcd_mgf",
    "thipcd_cf",
    "thipcd_sample",
    "thipcd_loglik_split",
    "thipcd_mle",
    "thipd_log_pmf",
    "thipd_mle",
]

_INFLATED_VALUE = 3


@dataclass(frozen=True)
class InflatedParams:
    """PCD parameters plus the inflation weight alpha at the value 3."""

    eta: float
    phi: float
    alpha: float

    def __post_init__(self):
        PcdParams(self.eta, self.phi)  # reuse the base-pair validation
        if not np.isfinite(self.alpha) or not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")

    @property
    def base(self) -> PcdParams:
        return PcdParams(self.eta, self.phi)


@dataclass(frozen=True)
class InflatedMoments:
    """First four raw moments and the variance of the inflated model."""

    mean: float
    raw2: float
    raw3: float
    raw4: float
    variance: float


def thipcd_log_pmf(params: InflatedParams, y):
    """Log pmf: mass alpha + (1-alpha) p(3) at 3, (1-alpha) p(y) elsewhere."""
    base = params.base
    y_arr = np.asarray(y)
    base_log = pcd_log_pmf(base, y_arr)
    alpha = params.alpha
    if alpha == 0.0:
        out = np.asarray(base_log)
    else:
        at_three = math.log(alpha + (1.0 - alpha) * pcd_pmf(base, _INFLATED_VALUE))
        out = np.where(np.asarray(y_arr) == _INFLATED_VALUE,
                       at_three,
                       math.log1p(-alpha) + np.asarray(base_log))
    if np.isscalar(y) or y_arr.ndim == 0:
        return float(out)
    return out


def thipcd_pmf(params: InflatedParams, y):
    """Probability mass of the inflated model."""
    return np.exp(thipcd_log_pmf(params, y))


def thipcd_cdf(params: InflatedParams, x) -> float:
    """Cumulative distribution as a stable cumulative pmf sum."""
    x = math.floor(float(x))
    if x < 0:
        return 0.0
    support = np.arange(x + 1)
    total = float(np.sum(thipcd_pmf(params, support)))
    return min(total, 1.0)


def thipcd_inflation_gap(params: InflatedParams) -> float:
    """Excess probability at 3 over the base model: alpha (1 - p(3)) > 0."""
    if params.alpha <= 0.0:
        raise ValueError("the inflation gap is defined for alpha > 0")
    p3 = pcd_pmf(params.base, _INFLATED_VALUE)
    return params.alpha * (1.0 - p3)


def thipcd_moments(params: InflatedParams) -> InflatedMoments:
    """Raw moments 3^r alpha + (1-alpha) m_r; variance as raw2 - mean^2."""
    base = pcd_moments(params.base)
    alpha = params.alpha
    raws = {}
    for r, base_raw in zip((1, 2, 3, 4),
                           (base.mean, base.raw2, base.raw3, base.raw4)):
        raws[r] = 3.0 ** r * alpha + (1.0 - alpha) * base_raw
    return InflatedMoments(
        mean=raws[1],
        raw2=raws[2],
        raw3=raws[3],
        raw4=raws[4],
        variance=raws[2] - raws[1] ** 2,
    )


def thipcd_pgf(params: InflatedParams, s):
    """Generating function alpha s^3 + (1 - alpha) P_base(s)."""
    base_value = pcd_pgf(params.base, s)
    s_arr = np.asarray(s)
    out = params.alpha * s_arr ** 3 + (1.0 - params.alpha) * np.asarray(base_value)
    if np.isscalar(s) or s_arr.ndim == 0:
        return complex(out) if np.iscomplexobj(s_arr) else float(out)
    return out


def thipcd_mgf(params: InflatedParams, t: float) -> float:
    """Moment generating function, defined for e^t < 1 + eta."""
    t = float(t)
    if math.exp(t) >= 1.0 + params.eta:
        raise ValueError("mgf argument outside domain (requires e^t < 1 + eta)")
    return thipcd_pgf(params, math.exp(t))


def thipcd_cf(params: InflatedParams, t: float) -> complex:
    """Characteristic function."""
    return thipcd_pgf(params, np.exp(1j * float(t)))


def thipcd_sample(params: InflatedParams, rng: np.random.Generator,
                  n: int) -> np.ndarray:
    """Draw n counts: emit 3 with probability alpha, else a base draw.

    With alpha = 0 the call delegates directly to the base sampler, so
    the output stream is identical to pcd_sample under the same seed.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if params.alpha == 0.0:
        return pcd_sample(params.base, rng, n)
    inflate = rng.random(n) < params.alpha
    base_draws = pcd_sample(params.base, rng, n)
    return np.where(inflate, _INFLATED_VALUE, base_draws)


def thipcd_loglik_split(params: InflatedParams, sample) -> float:
    """Log-likelihood through the count-of-3s factorization.

    n0 ln(alpha + (1-alpha) p(3)) + sum over y != 3 of
    [ln(1-alpha) + ln p(y)].  Algebraically identical to summing
    thipcd_log_pmf; kept as a cross-check of that identity.
    """
    table = as_frequency_table(sample)
    values = np.asarray(table.values)
    counts = np.asarray(table.counts, dtype=float)
    base = params.base
    at_three = values == _INFLATED_VALUE
    n0 = float(counts[at_three].sum())
    p3 = pcd_pmf(base, _INFLATED_VALUE)
    total = 0.0
    if n0:
        total += n0 * math.log(params.alpha + (1.0 - params.alpha) * p3)
    rest_values = values[~at_three]
    rest_counts = counts[~at_three]
    if rest_values.size:
        total += float(np.dot(
            rest_counts,
            math.log1p(-params.alpha) + pcd_log_pmf(base, rest_values),
        ))
    return total


def _logistic(t: float) -> float:
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def thipcd_mle(sample, config: OptimizerConfig | None = None,
               ci_level: float = 0.95) -> FitReport:
    """Maximum-likelihood fit of (eta, phi, alpha).

    Optimizes the per-observation log-likelihood over (ln eta, ln phi,
    logit alpha) from two deterministic starting points, keeping the
    better optimum.  Standard errors come from the observed information
    with the delta method through the transforms.
    """
    table = as_frequency_table(sample)
    if table.n < 3:
        raise ValueError("need at least three observations")
    values = np.asarray(table.values, dtype=float)
    counts = np.asarray(table.counts, dtype=float)
    n = table.n

    if np.all(table.values == _INFLATED_VALUE):
        import warnings

        warnings.warn("all observations equal 3; the inflation weight is "
                      "at its upper boundary", RuntimeWarning, stacklevel=2)

    def nll(theta):
        if np.max(np.abs(theta)) > 60.0:
            return 1e12 + float(np.sum(np.abs(theta)))
        eta = math.exp(theta[0])
        phi = math.exp(theta[1])
        # The logistic saturates to exactly 1.0 past ~36 in doubles,
        # which would send log1p(-alpha) out of domain.
        alpha = min(max(_logistic(theta[2]), 1e-12), 1.0 - 1e-12)
        base_log = log_pmf_core(eta, phi, values)
        p3 = math.exp(log_pmf_core(eta, phi, float(_INFLATED_VALUE)))
        with np.errstate(divide="ignore"):
            terms = np.where(
                values == float(_INFLATED_VALUE),
                math.log(alpha + (1.0 - alpha) * p3),
                math.log1p(-alpha) + base_log,
            )
        return -float(np.dot(counts, terms))

    mean = table.mean()
    share_three = float(counts[values == float(_INFLATED_VALUE)].sum()) / n
    alpha0 = min(max(share_three / 2.0, 0.02), 0.9)
    starts = [
        np.array([0.0, 0.0, math.log(alpha0 / (1.0 - alpha0))]),
        np.array([math.log(1.0 / mean), math.log(2.0),
                  math.log(0.2 / 0.8)]),
    ]
    best = None
    for theta0 in starts:
        candidate = wald_fit("thipcd", nll, theta0, _thipcd_natural,
                             ("eta", "phi", "alpha"), n, config, ci_level)
        if best is None or candidate[1].min_value < best[1].min_value:
            best = candidate
    report, _ = best
    return report


def _thipcd_natural(theta):
    eta = math.exp(theta[0])
    phi = math.exp(theta[1])
    alpha = min(_logistic(theta[2]), 1.0 - 1e-8)
    return (np.array([eta, phi, alpha]),
            np.array([eta, phi, alpha * (1.0 - alpha)]))


def thipd_log_pmf(lam: float, alpha: float, y):
    """Three-inflated Poisson log pmf."""
    if lam <= 0.0:
        raise ValueError("lambda must be positive")
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < 0.0) or np.any(y_arr != np.floor(y_arr)):
        raise ValueError("count values must be nonnegative integers")
    poisson_log = -lam + y_arr * np.log(lam) - log_gamma(y_arr + 1.0)
    if alpha == 0.0:
        out = poisson_log
    else:
        p3 = math.exp(-lam) * lam ** 3 / 6.0
        out = np.where(y_arr == float(_INFLATED_VALUE),
                       math.log(alpha + (1.0 - alpha) * p3),
                       math.log1p(-alpha) + poisson_log)
    if np.isscalar(y) or y_arr.ndim == 0:
        return float(out)
    return out


def thipd_mle(sample, config: OptimizerConfig | None = None,
              ci_level: float = 0.95) -> FitReport:
    """Maximum-likelihood fit of the three-inflated Poisson (lambda, alpha)."""
    table = as_frequency_table(sample)
    if table.n < 2:
        raise ValueError("need at least two observations")
    values = np.asarray(table.values, dtype=float)
    counts = np.asarray(table.counts, dtype=float)
    n = table.n
    mean = table.mean()

    def nll(theta):
        if np.max(np.abs(theta)) > 60.0:
            return 1e12 + float(np.sum(np.abs(theta)))
        lam = math.exp(theta[0])
        alpha = min(max(_logistic(theta[1]), 1e-12), 1.0 - 1e-12)
        poisson_log = -lam + values * math.log(lam) - log_gamma(values + 1.0)
        p3 = math.exp(-lam) * lam ** 3 / 6.0
        terms = np.where(values == float(_INFLATED_VALUE),
                         math.log(alpha + (1.0 - alpha) * p3),
                         math.log1p(-alpha) + poisson_log)
        return -float(np.dot(counts, terms))

    def to_natural(theta):
        lam = math.exp(theta[0])
        alpha = min(_logistic(theta[1]), 1.0 - 1e-8)
        return (np.array([lam, alpha]),
                np.array([lam, alpha * (1.0 - alpha)]))

    report, _ = wald_fit(
        "thipd", nll,
        [math.log(mean), math.log(0.05 / 0.95)],
        to_natural, ("lambda", "alpha"), n, config, ci_level)
    return report

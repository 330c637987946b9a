"""The Poisson-Copoun discrete distribution.

Log-space pmf (the primitive everything else builds on), cumulative
distribution by stable summation, quantiles, exact sampling through the
latent-rate representation, factorial and raw moments, dispersion index,
generating functions, and the mean parametrization used by the
regression model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .copoun import PcdParams, cd_sample

__all__ = [
    "MeanParams",
    "PmfEvaluation",
    "PcdMoments",
    "pcd_log_pmf",
    "pcd_pmf",
    "pcd_cdf",
    "pcd_quantile",
    "pcd_sample",
    "pcd_sample_given_eta",
    "pcd_factorial_moment",
    "pcd_moments",
    "pcd_pgf",
    "pcd_mgf",
    "pcd_cf",
    "eta_from_mean",
    "support_truncation",
    "evaluate_pmf",
]


@dataclass(frozen=True)
class MeanParams:
    """Regression-facing parametrization (mu, phi) of the count model."""

    mu: float
    phi: float

    def __post_init__(self):
        if not np.isfinite(self.mu) or self.mu <= 0.0:
            raise ValueError("mu must be a positive finite real")
        if not np.isfinite(self.phi) or self.phi < 0.0:
            raise ValueError("phi must be a nonnegative finite real")


@dataclass(frozen=True)
class PmfEvaluation:
    """A single pmf evaluation carrying both linear and log scales."""

    value: int
    probability: float
    log_probability: float


@dataclass(frozen=True)
class PcdMoments:
    """First four raw moments plus variance and dispersion index."""

    mean: float
    raw2: float
    raw3: float
    raw4: float
    variance: float
    dispersion_index: float


def _validate_counts(x) -> np.ndarray:
    x_arr = np.asarray(x)
    if x_arr.size and not np.issubdtype(x_arr.dtype, np.integer):
        if not np.all(np.isfinite(x_arr)) or np.any(x_arr != np.floor(x_arr)):
            raise ValueError("count values must be nonnegative integers")
    if np.any(x_arr < 0):
        raise ValueError("count values must be nonnegative integers")
    return x_arr.astype(float)


def log_pmf_core(eta, phi, x):
    """Log pmf evaluated with arrays of eta broadcast against arrays of x.

    ln p(x) = 2 ln eta - ln(phi + eta) - (x + 4) ln(1 + eta)
              + logaddexp(3 ln(1 + eta), ln(phi eta^2 / 6) + ln((x+1)(x+2)(x+3)))

    The bracket is combined on the log scale so large x cannot overflow.
    phi = 0 drops the second bracket term entirely (geometric boundary).
    """
    eta = np.asarray(eta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    x = np.asarray(x, dtype=float)
    log1p_eta = np.log1p(eta)
    cubic_log = np.log(x + 1.0) + np.log(x + 2.0) + np.log(x + 3.0)
    with np.errstate(divide="ignore"):
        log_phi_term = np.where(
            phi > 0.0,
            np.log(np.where(phi > 0.0, phi, 1.0)) + 2.0 * np.log(eta) - math.log(6.0),
            -np.inf,
        )
    bracket = np.logaddexp(3.0 * log1p_eta, log_phi_term + cubic_log)
    return (2.0 * np.log(eta) - np.log(phi + eta)
            - (x + 4.0) * log1p_eta + bracket)


def pcd_log_pmf(params: PcdParams, x):
    """Log probability mass at nonnegative integer x (scalar or array)."""
    x_arr = _validate_counts(x)
    out = log_pmf_core(params.eta, params.phi, x_arr)
    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return float(out)
    return out


def pcd_pmf(params: PcdParams, x):
    """Probability mass at nonnegative integer x."""
    return np.exp(pcd_log_pmf(params, x))


def evaluate_pmf(params: PcdParams, x: int) -> PmfEvaluation:
    """Evaluate one pmf point on both scales."""
    logp = pcd_log_pmf(params, int(x))
    return PmfEvaluation(value=int(x), probability=math.exp(logp),
                         log_probability=logp)


def _pmf_prefix(params: PcdParams, upper: int) -> np.ndarray:
    """pmf values on 0..upper as a vector."""
    support = np.arange(upper + 1, dtype=float)
    return np.exp(log_pmf_core(params.eta, params.phi, support))


def pcd_cdf(params: PcdParams, x) -> float:
    """Cumulative distribution: sum of the pmf from 0 through floor(x).

    Accumulated in ascending order (small terms first would not matter
    here; the series is headed by its largest terms and saturates at 1).
    Values below 0 return 0.
    """
    x = math.floor(float(x))
    if x < 0:
        return 0.0
    total = float(np.sum(_pmf_prefix(params, x)))
    return min(total, 1.0)


def pcd_quantile(params: PcdParams, p: float) -> int:
    """Smallest x with cdf(x) >= p (left-continuous inverse).

    Exponential bracketing doubles the upper end until the cumulative
    mass covers p, then the answer is located by bisection on the stored
    cumulative values.
    """
    p = float(p)
    if not 0.0 <= p < 1.0:
        raise ValueError("quantile requires 0 <= p < 1")
    upper = 8
    cumulative = np.cumsum(_pmf_prefix(params, upper))
    while cumulative[-1] < p:
        if upper > 100_000_000:
            raise RuntimeError("quantile bracketing failed to cover p")
        upper *= 2
        cumulative = np.cumsum(_pmf_prefix(params, upper))
    return int(np.searchsorted(cumulative, p, side="left"))


def pcd_sample(params: PcdParams, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw n counts through the latent-rate representation.

    Each draw takes lambda from the Copoun sampler and then a Poisson
    variate at that rate; reproducible given the stream seed.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rates = cd_sample(params, rng, n)
    return rng.poisson(rates)


def pcd_sample_given_eta(eta, phi: float, rng: np.random.Generator) -> np.ndarray:
    """Draw one count per entry of an eta vector at common phi.

    Used by the regression simulator, where every row carries its own
    mean-driven eta.
    """
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 0.0):
        raise ValueError("eta entries must be positive")
    if phi < 0.0:
        raise ValueError("phi must be nonnegative")
    n = eta.size
    take_exponential = rng.random(n) < eta / (phi + eta)
    exponential_draws = rng.exponential(size=n) / eta
    gamma_draws = rng.gamma(shape=4.0, scale=1.0, size=n) / eta
    rates = np.where(take_exponential, exponential_draws, gamma_draws)
    return rng.poisson(rates)


def pcd_factorial_moment(params: PcdParams, r: int) -> float:
    """r-th factorial moment E[X(X-1)...(X-r+1)] for r >= 1."""
    if r < 1 or int(r) != r:
        raise ValueError("r must be a positive integer")
    eta, phi = params.eta, params.phi
    return (math.factorial(r) / (eta ** r * (phi + eta))
            * (eta + phi / 6.0 * (r + 1) * (r + 2) * (r + 3)))


def pcd_moments(params: PcdParams) -> PcdMoments:
    """Mean, second-to-fourth raw moments, variance, and dispersion index."""
    eta, phi = params.eta, params.phi
    f1 = pcd_factorial_moment(params, 1)
    f2 = pcd_factorial_moment(params, 2)
    f3 = pcd_factorial_moment(params, 3)
    f4 = pcd_factorial_moment(params, 4)
    mean = f1
    raw2 = f2 + f1
    raw3 = f3 + 3.0 * f2 + f1
    raw4 = f4 + 6.0 * f3 + 7.0 * f2 + f1
    variance = ((eta ** 3 + (5.0 * phi + 1.0) * eta ** 2
                 + 2.0 * phi * (2.0 * phi + 7.0) * eta + 4.0 * phi ** 2)
                / (eta ** 2 * (phi + eta) ** 2))
    dispersion = 1.0 + ((eta ** 2 + 14.0 * phi * eta + 4.0 * phi ** 2)
                        / (eta * (phi + eta) * (eta + 4.0 * phi)))
    return PcdMoments(mean=mean, raw2=raw2, raw3=raw3, raw4=raw4,
                      variance=variance, dispersion_index=dispersion)


def pcd_pgf(params: PcdParams, s):
    """Probability generating function E[s^X].

    The closed form is analytic for s < 1 + eta; arguments at or beyond
    that radius raise.  Complex s (on the unit circle) is accepted for
    the characteristic-function accessor.
    """
    eta, phi = params.eta, params.phi
    s_arr = np.asarray(s)
    if not np.iscomplexobj(s_arr) and np.any(np.asarray(s_arr, dtype=float) >= 1.0 + eta):
        raise ValueError("pgf argument outside radius of convergence (s >= 1 + eta)")
    base = eta - s_arr + 1.0
    out = eta * eta / (phi + eta) * ((base ** 3 + phi * eta * eta) / base ** 4)
    if np.isscalar(s) or s_arr.ndim == 0:
        return complex(out) if np.iscomplexobj(s_arr) else float(out)
    return out


def pcd_mgf(params: PcdParams, t: float) -> float:
    """Moment generating function E[e^{tX}], defined for e^t < 1 + eta."""
    t = float(t)
    if math.exp(t) >= 1.0 + params.eta:
        raise ValueError("mgf argument outside domain (requires e^t < 1 + eta)")
    return pcd_pgf(params, math.exp(t))


def pcd_cf(params: PcdParams, t: float) -> complex:
    """Characteristic function E[e^{itX}]."""
    return pcd_pgf(params, np.exp(1j * float(t)))


def eta_from_mean(mp: MeanParams) -> float:
    """The positive eta root that maps (mu, phi) back to the natural pair.

    eta = (1 - phi mu + sqrt((phi mu - 1)^2 + 16 phi mu)) / (2 mu);
    satisfies mean(eta, phi) = mu.
    """
    return float(eta_from_mean_arrays(mp.mu, mp.phi))


def eta_from_mean_arrays(mu, phi):
    """Vector form of the mean-to-eta map (regression hot path)."""
    mu = np.asarray(mu, dtype=float)
    phi = np.asarray(phi, dtype=float)
    pm = phi * mu
    eta = (1.0 - pm + np.sqrt((pm - 1.0) ** 2 + 16.0 * pm)) / (2.0 * mu)
    if not np.all(np.isfinite(eta)) or np.any(eta <= 0.0):
        raise ValueError("mean parametrization produced an invalid eta")
    return eta


def support_truncation(params: PcdParams, tol: float = 1e-14) -> int:
    """An upper support point beyond which the tail mass is below tol.

    Uses the ratio bound pmf(x+1)/pmf(x) <= (1 + 3/(x+1)) / (1 + eta),
    which for x large enough gives a dominating geometric tail with
    ratio strictly below 1.
    """
    eta = params.eta
    x = max(int(math.ceil(3.0 / eta)) + 1, 8)
    while True:
        ratio = (1.0 + 3.0 / (x + 1.0)) / (1.0 + eta)
        if ratio < 1.0:
            tail_bound = math.exp(pcd_log_pmf(params, x)) * ratio / (1.0 - ratio)
            if tail_bound < tol:
                return x
        if x > 100_000_000:
            raise RuntimeError("tail truncation search failed")
        x *= 2

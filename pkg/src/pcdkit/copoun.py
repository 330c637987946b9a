"""The continuous two-parameter Copoun mixing distribution.

Density, cumulative distribution, and exact sampling for the rate law
underlying the Poisson-Copoun count model.  The distribution is a
two-component mixture of Exponential(eta) and Gamma(shape=4, rate=eta)
with mixing weight eta / (phi + eta) on the exponential branch, which is
also how the sampler draws from it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PcdParams", "cd_pdf", "cd_cdf", "cd_sample"]


@dataclass(frozen=True)
class PcdParams:
    """Natural parameter pair (eta, phi) of the Copoun / Poisson-Copoun family.

    eta is the rate-like parameter (strictly positive); phi is the
    shape-mixing parameter (nonnegative, with phi = 0 the exponential /
    geometric boundary).
    """

    eta: float
    phi: float

    def __post_init__(self):
        if not np.isfinite(self.eta) or self.eta <= 0.0:
            raise ValueError("eta must be a positive finite real")
        if not np.isfinite(self.phi) or self.phi < 0.0:
            raise ValueError("phi must be a nonnegative finite real")

    @property
    def mixing_weight(self) -> float:
        """Probability mass of the Exponential(eta) mixture branch."""
        return self.eta / (self.phi + self.eta)


def cd_pdf(params: PcdParams, x):
    """Copoun density eta^2/(phi+eta) * (1 + phi eta^2 x^3 / 6) * exp(-eta x).

    Negative x returns 0 (the support is the positive half-line).
    """
    eta, phi = params.eta, params.phi
    x_arr = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        body = (eta * eta / (phi + eta)
                * (1.0 + phi * eta * eta * x_arr ** 3 / 6.0)
                * np.exp(-eta * x_arr))
    out = np.where(x_arr < 0.0, 0.0, body)
    if np.isscalar(x) or x_arr.ndim == 0:
        return float(out)
    return out


def cd_cdf(params: PcdParams, x):
    """Copoun cumulative distribution in closed form, clamped to [0, 1]."""
    eta, phi = params.eta, params.phi
    x_arr = np.asarray(x, dtype=float)
    poly = (phi * eta ** 3 * x_arr ** 3
            + 3.0 * phi * eta ** 2 * x_arr ** 2
            + 6.0 * phi * eta * x_arr)
    with np.errstate(over="ignore", invalid="ignore"):
        body = 1.0 - (1.0 + poly / (6.0 * (phi + eta))) * np.exp(-eta * x_arr)
    out = np.where(x_arr <= 0.0, 0.0, np.clip(body, 0.0, 1.0))
    if np.isscalar(x) or x_arr.ndim == 0:
        return float(out)
    return out


def cd_sample(params: PcdParams, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw n Copoun variates via the exponential/gamma mixture.

    With probability eta/(phi+eta) each draw comes from Exponential(eta),
    otherwise from Gamma(shape=4, rate=eta).  The generator is consumed in
    a fixed order (mixture indicators, then both branch vectors), so the
    output is reproducible given the stream seed.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    scale = 1.0 / params.eta
    take_exponential = rng.random(n) < params.mixing_weight
    exponential_draws = rng.exponential(scale=scale, size=n)
    gamma_draws = rng.gamma(shape=4.0, scale=scale, size=n)
    return np.where(take_exponential, exponential_draws, gamma_draws)

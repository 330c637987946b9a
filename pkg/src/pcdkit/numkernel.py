"""Shared numerical infrastructure for the fitting modules.

Special functions (log-gamma, regularized incomplete gamma, normal
cdf/quantile, chi-square survival function), central-difference
derivatives, a deterministic Nelder-Mead minimizer, and a Cholesky-based
solver for symmetric positive-definite systems.  Everything here is a
pure function of its inputs; there is no global mutable state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "OptimizerConfig",
    "OptimResult",
    "EvaluationError",
    "NotPositiveDefiniteError",
    "log_gamma",
    "regularized_gamma_p",
    "regularized_gamma_q",
    "normal_pdf",
    "normal_cdf",
    "normal_sf",
    "normal_quantile",
    "chisq_sf",
    "numeric_gradient",
    "numeric_hessian",
    "minimize",
    "solve_spd",
]

_EPS = np.finfo(float).eps
# Step sizes scaled by (1 + |x|): cube root of eps for first derivatives,
# fourth root for second derivatives (the usual truncation/roundoff balance).
_GRAD_STEP = _EPS ** (1.0 / 3.0)
_HESS_STEP = _EPS ** 0.25

_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


class EvaluationError(ValueError):
    """Objective returned a non-finite value at a probe point."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = None if point is None else np.asarray(point, dtype=float)


class NotPositiveDefiniteError(ValueError):
    """Cholesky factorization hit a non-positive pivot."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for the derivative-free minimizer."""

    max_iterations: int = 2000
    function_tolerance: float = 1e-10
    parameter_tolerance: float = 1e-8
    simplex_scale: float = 0.1

    def __post_init__(self):
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")
        for name in ("function_tolerance", "parameter_tolerance", "simplex_scale"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class OptimResult:
    """Outcome of a minimize() call."""

    argmin: np.ndarray
    min_value: float
    converged: bool
    iterations: int


# Lanczos approximation, g = 7, 9 coefficients (relative accuracy ~1e-15
# on the positive real axis).
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def log_gamma(x):
    """Natural log of the gamma function for x > 0.

    Vectorized Lanczos evaluation; arguments below 0.5 go through the
    reflection identity to keep the approximation away from the poles.

    Parameters
    ----------
    x : float or array_like of positive reals

    Returns
    -------
    float or ndarray
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0.0) or not np.all(np.isfinite(x_arr)):
        raise ValueError("log_gamma requires strictly positive finite x")
    small = x_arr < 0.5
    z = np.where(small, 1.0 - x_arr, x_arr) - 1.0
    acc = np.full_like(z, _LANCZOS_COEF[0])
    for i in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    main = _LN_SQRT_2PI + (z + 0.5) * np.log(t) - t + np.log(acc)
    if np.any(small):
        safe = np.where(small, x_arr, 0.25)
        main = np.where(small,
                        np.log(np.pi / np.sin(np.pi * safe)) - main,
                        main)
    if np.isscalar(x) or x_arr.ndim == 0:
        return float(main)
    return main


def _log_gamma_scalar(x: float) -> float:
    if x < 0.5:
        # Reflection keeps the Lanczos argument away from the poles.
        return math.log(math.pi / math.sin(math.pi * x)) - _log_gamma_scalar(1.0 - x)
    z = x - 1.0
    acc = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _LN_SQRT_2PI + (z + 0.5) * math.log(t) - t + math.log(acc)


def regularized_gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a)."""
    if a <= 0.0:
        raise ValueError("shape parameter a must be positive")
    if x < 0.0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_p_series(a, x)
    return 1.0 - _gamma_q_contfrac(a, x)


def regularized_gamma_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if a <= 0.0:
        raise ValueError("shape parameter a must be positive")
    if x < 0.0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_contfrac(a, x)


def _gamma_p_series(a: float, x: float) -> float:
    # Power series for P(a, x); converges fast for x < a + 1.
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(1000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    log_prefactor = -x + a * math.log(x) - _log_gamma_scalar(a)
    return total * math.exp(log_prefactor)


def _gamma_q_contfrac(a: float, x: float) -> float:
    # Modified Lentz evaluation of the continued fraction for Q(a, x).
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b if b != 0.0 else 1.0 / tiny
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    log_prefactor = -x + a * math.log(x) - _log_gamma_scalar(a)
    return math.exp(log_prefactor) * h


def normal_pdf(z):
    """Standard normal density (elementwise on arrays)."""
    z = np.asarray(z, dtype=float)
    out = np.exp(-0.5 * z * z) / _SQRT_2PI
    return float(out) if out.ndim == 0 else out


def _normal_cdf_scalar(z: float) -> float:
    if z == 0.0:
        return 0.5
    tail = 0.5 * regularized_gamma_q(0.5, 0.5 * z * z)
    return 1.0 - tail if z > 0.0 else tail


def normal_cdf(z):
    """Standard normal cumulative distribution function.

    Evaluated through the regularized incomplete gamma function, which
    keeps both tails accurate in relative terms.  Accepts scalars or
    arrays (elementwise).
    """
    arr = np.asarray(z, dtype=float)
    if arr.ndim == 0:
        return _normal_cdf_scalar(float(arr))
    flat = np.fromiter((_normal_cdf_scalar(v) for v in arr.ravel()),
                       dtype=float, count=arr.size)
    return flat.reshape(arr.shape)


def normal_sf(z):
    """Standard normal survival function 1 - Phi(z) (elementwise)."""
    return normal_cdf(np.negative(z))


# Rational approximation coefficients for the normal quantile
# (Acklam's algorithm; |relative error| < 1.2e-9 before polishing).
_NQ_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_NQ_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
_NQ_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_NQ_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00)
_NQ_P_LOW = 0.02425


def _tail_expansion(q):
    # Rational approximation on a tail, in q = sqrt(-2 ln p_tail).
    numer = ((((_NQ_C[0] * q + _NQ_C[1]) * q + _NQ_C[2]) * q + _NQ_C[3]) * q
             + _NQ_C[4]) * q + _NQ_C[5]
    denom = (((_NQ_D[0] * q + _NQ_D[1]) * q + _NQ_D[2]) * q + _NQ_D[3]) * q + 1.0
    return numer / denom


def normal_quantile(p):
    """Standard normal quantile Phi^{-1}(p) for p in (0, 1).

    Rational approximation refined by one Newton step against the
    internal normal cdf; absolute error well below 1e-9.  Accepts
    scalars or arrays (elementwise).
    """
    shaped = np.asarray(p, dtype=float)
    arr = np.atleast_1d(shaped).ravel().copy()
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise ValueError("normal_quantile requires 0 < p < 1")
    low = arr < _NQ_P_LOW
    high = arr > 1.0 - _NQ_P_LOW
    mid = ~(low | high)

    x = np.empty_like(arr)
    if np.any(low):
        x[low] = _tail_expansion(np.sqrt(-2.0 * np.log(arr[low])))
    if np.any(high):
        x[high] = -_tail_expansion(np.sqrt(-2.0 * np.log(1.0 - arr[high])))
    if np.any(mid):
        q = arr[mid] - 0.5
        r = q * q
        numer = ((((_NQ_A[0] * r + _NQ_A[1]) * r + _NQ_A[2]) * r + _NQ_A[3]) * r
                 + _NQ_A[4]) * r + _NQ_A[5]
        denom = ((((_NQ_B[0] * r + _NQ_B[1]) * r + _NQ_B[2]) * r + _NQ_B[3]) * r
                 + _NQ_B[4]) * r + 1.0
        x[mid] = numer * q / denom

    dens = normal_pdf(x)
    polish = dens > 1e-290
    if np.any(polish):
        cdf_vals = np.asarray(normal_cdf(x[polish]))
        x[polish] -= (cdf_vals - arr[polish]) / dens[polish]
    x[arr == 0.5] = 0.0
    if shaped.ndim == 0:
        return float(x[0])
    return x.reshape(shaped.shape)


def chisq_sf(x: float, df: int) -> float:
    """Chi-square survival function P(X > x) with df degrees of freedom."""
    if df < 1 or int(df) != df:
        raise ValueError("df must be a positive integer")
    x = float(x)
    if x < 0.0:
        raise ValueError("x must be nonnegative")
    return regularized_gamma_q(0.5 * df, 0.5 * x)


def _probe(f, point):
    value = f(point)
    if not np.isfinite(value):
        raise EvaluationError(
            f"objective is non-finite at probe point {np.asarray(point)}", point
        )
    return float(value)


def numeric_gradient(f, x, h=None):
    """Central-difference gradient of a scalar function.

    Parameters
    ----------
    f : callable mapping a 1-d array to a float
    x : array_like, point of evaluation
    h : float or array_like, optional
        Step sizes; defaults to cbrt(machine eps) * (1 + |x_i|).
    """
    x = np.asarray(x, dtype=float)
    if h is None:
        steps = _GRAD_STEP * (1.0 + np.abs(x))
    else:
        steps = np.broadcast_to(np.asarray(h, dtype=float), x.shape).copy()
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = steps[i]
        grad[i] = (_probe(f, x + e) - _probe(f, x - e)) / (2.0 * steps[i])
    return grad


def numeric_hessian(f, x):
    """Symmetric second-central-difference Hessian, returned as (H + H^T)/2."""
    x = np.asarray(x, dtype=float)
    n = x.size
    steps = _HESS_STEP * (1.0 + np.abs(x))
    hess = np.empty((n, n))
    f0 = _probe(f, x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = steps[i]
        hess[i, i] = (_probe(f, x + ei) - 2.0 * f0 + _probe(f, x - ei)) / steps[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = steps[j]
            hess[i, j] = (
                _probe(f, x + ei + ej)
                - _probe(f, x + ei - ej)
                - _probe(f, x - ei + ej)
                + _probe(f, x - ei - ej)
            ) / (4.0 * steps[i] * steps[j])
            hess[j, i] = hess[i, j]
    return 0.5 * (hess + hess.T)


def _initial_simplex(x0: np.ndarray, scale: float) -> np.ndarray:
    n = x0.size
    simplex = np.tile(x0, (n + 1, 1))
    for i in range(n):
        simplex[i + 1, i] += scale * (1.0 + abs(x0[i]))
    return simplex


def minimize(f, x0, config: OptimizerConfig | None = None) -> OptimResult:
    """Nelder-Mead simplex minimization.

    Deterministic given (f, x0, config): the initial simplex is built from
    fixed relative offsets and vertex ordering uses a stable sort, so
    repeated runs produce bit-identical results.  Non-finite objective
    values encountered during the search are treated as +inf; a
    non-finite value at the starting point raises.
    """
    if config is None:
        config = OptimizerConfig()
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not np.isfinite(f(x0)):
        raise EvaluationError("objective is non-finite at the starting point", x0)

    def feval(point):
        value = f(point)
        return float(value) if np.isfinite(value) else math.inf

    simplex = _initial_simplex(x0, config.simplex_scale)
    return _nelder_mead(feval, simplex, config)


def _nelder_mead(feval, simplex: np.ndarray, config: OptimizerConfig) -> OptimResult:
    alpha, gamma, beta, sigma = 1.0, 2.0, 0.5, 0.5
    simplex = np.array(simplex, dtype=float)
    values = np.array([feval(v) for v in simplex])
    iterations = 0
    converged = False
    while iterations < config.max_iterations:
        order = np.argsort(values, kind="stable")
        simplex = simplex[order]
        values = values[order]
        spread = values[-1] - values[0]
        width = np.max(np.abs(simplex[1:] - simplex[0]))
        if spread <= config.function_tolerance and width <= config.parameter_tolerance:
            converged = True
            break
        iterations += 1
        centroid = simplex[:-1].mean(axis=0)
        reflected = centroid + alpha * (centroid - simplex[-1])
        f_reflected = feval(reflected)
        if f_reflected < values[0]:
            expanded = centroid + gamma * (reflected - centroid)
            f_expanded = feval(expanded)
            if f_expanded < f_reflected:
                simplex[-1], values[-1] = expanded, f_expanded
            else:
                simplex[-1], values[-1] = reflected, f_reflected
        elif f_reflected < values[-2]:
            simplex[-1], values[-1] = reflected, f_reflected
        else:
            if f_reflected < values[-1]:
                contracted = centroid + beta * (reflected - centroid)
            else:
                contracted = centroid + beta * (simplex[-1] - centroid)
            f_contracted = feval(contracted)
            if f_contracted < min(f_reflected, values[-1]):
                simplex[-1], values[-1] = contracted, f_contracted
            else:
                for i in range(1, simplex.shape[0]):
                    simplex[i] = simplex[0] + sigma * (simplex[i] - simplex[0])
                    values[i] = feval(simplex[i])
    order = np.argsort(values, kind="stable")
    best = order[0]
    return OptimResult(
        argmin=simplex[best].copy(),
        min_value=float(values[best]),
        converged=converged,
        iterations=iterations,
    )


def solve_spd(a, b):
    """Solve A X = B for symmetric positive-definite A via Cholesky.

    Raises NotPositiveDefiniteError when the factorization fails, which
    for an observed-information matrix signals a non-maximum or a flat
    direction.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("A must be a square matrix")
    if not np.allclose(a, a.T, rtol=1e-8, atol=1e-8):
        raise ValueError("A must be symmetric")
    try:
        lower = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(
            "information matrix not positive definite"
        ) from exc
    y = np.linalg.solve(lower, b)
    return np.linalg.solve(lower.T, y)

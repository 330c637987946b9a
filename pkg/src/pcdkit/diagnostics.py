"""Model-adequacy diagnostics: randomized quantile residuals with a
Shapiro-Wilk normality check, chi-square goodness-of-fit with explicit
right-tail cell merging, information criteria, and AIC-ranked model
comparison tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .baselines import BASELINE_FAMILIES, BaselineSpec, baseline_log_pmf
from .copoun import PcdParams
from .estimation import FitReport
from .freq import FrequencyTable
from .inflated import InflatedParams, thipcd_pmf, thipd_log_pmf
from .numkernel import chisq_sf, normal_quantile, normal_sf
from .pcd import pcd_pmf

__all__ = [
    "ShapiroResult",
    "RqrResult",
    "GofResult",
    "GofCell",
    "InformationCriteria",
    "ComparisonRow",
    "ComparisonResult",
    "shapiro_wilk",
    "randomized_quantile_residuals",
    "chi_square_gof",
    "information_criteria",
    "fitted_pmf",
    "compare_models",
]

# Order-statistic weight corrections and the normalizing transforms of W
# follow Royston's algorithm (the approximation valid for 3 <= n <= 5000).
_WEIGHT_POLY_LAST = (-2.706056, 4.434685, -2.071190, -0.147981, 0.221157, 0.0)
_WEIGHT_POLY_SECOND = (-3.582633, 5.682633, -1.752461, -0.293762, 0.042981, 0.0)
_SMALL_N_MEAN = (-0.0006714, 0.025054, -0.39978, 0.5440)
_SMALL_N_LOG_SD = (-0.0020322, 0.062767, -0.77857, 1.3822)
_LARGE_N_MEAN = (0.0038915, -0.083751, -0.31082, -1.5861)
_LARGE_N_LOG_SD = (0.0030302, -0.082676, -0.4803)

_U_CLAMP = 1e-12


@dataclass(frozen=True)
class ShapiroResult:
    """Shapiro-Wilk statistic and approximate p-value."""

    w: float
    p: float


@dataclass(frozen=True)
class RqrResult:
    """Randomized quantile residuals plus their normality check."""

    residuals: np.ndarray
    shapiro_w: float
    shapiro_p: float
    seed: int | None

    def __post_init__(self):
        residuals = np.asarray(self.residuals, dtype=float)
        if not np.all(np.isfinite(residuals)):
            raise ValueError("residuals must be finite")
        residuals.flags.writeable = False
        object.__setattr__(self, "residuals", residuals)


@dataclass(frozen=True)
class GofCell:
    """One goodness-of-fit cell: inclusive value range plus O and E.

    ``high`` of ``None`` marks the open final cell that absorbs the
    upper tail.
    """

    low: int
    high: int | None
    observed: int
    expected: float

    def label(self) -> str:
        if self.high is None:
            return f"{self.low}+"
        if self.high == self.low:
            return str(self.low)
        return f"{self.low}-{self.high}"


@dataclass(frozen=True)
class GofResult:
    """Chi-square goodness-of-fit outcome."""

    cells: tuple
    chi_sq: float
    df: int
    p_value: float


@dataclass(frozen=True)
class InformationCriteria:
    aic: float
    bic: float


@dataclass(frozen=True)
class ComparisonRow:
    model: str
    log_likelihood: float
    aic: float
    bic: float
    chi_sq: float
    df: int
    p_value: float
    best: bool


@dataclass(frozen=True)
class ComparisonResult:
    """Model comparison rows, AIC-ascending, with the winner flagged."""

    rows: tuple
    best_model: str


def _poly(coefficients, x: float) -> float:
    value = 0.0
    for c in coefficients:
        value = value * x + c
    return value


def _shapiro_weights(n: int) -> np.ndarray:
    ranks = np.arange(1, n + 1, dtype=float)
    m = normal_quantile((ranks - 0.375) / (n + 0.25))
    msq = float(m @ m)
    if n == 3:
        return np.array([-math.sqrt(0.5), 0.0, math.sqrt(0.5)])
    u = 1.0 / math.sqrt(n)
    c = m / math.sqrt(msq)
    a = np.empty(n)
    a_last = _poly(_WEIGHT_POLY_LAST, u) + c[-1]
    if n > 5:
        a_second = _poly(_WEIGHT_POLY_SECOND, u) + c[-2]
        norm = ((msq - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2)
                / (1.0 - 2.0 * a_last ** 2 - 2.0 * a_second ** 2))
        a[2:-2] = m[2:-2] / math.sqrt(norm)
        a[-2] = a_second
        a[1] = -a_second
    else:
        norm = (msq - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * a_last ** 2)
        a[1:-1] = m[1:-1] / math.sqrt(norm)
    a[-1] = a_last
    a[0] = -a_last
    return a


def _shapiro_p_value(w: float, n: int) -> float:
    if n == 3:
        p = 6.0 / math.pi * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        return min(max(p, 0.0), 1.0)
    if w >= 1.0:
        return 1.0
    if n <= 11:
        gamma = -2.273 + 0.459 * n
        arg = gamma - math.log(1.0 - w)
        if arg <= 0.0:
            return 1.0
        w_transformed = -math.log(arg)
        mean = _poly(_SMALL_N_MEAN, float(n))
        sd = math.exp(_poly(_SMALL_N_LOG_SD, float(n)))
    else:
        w_transformed = math.log(1.0 - w)
        log_n = math.log(n)
        mean = _poly(_LARGE_N_MEAN, log_n)
        sd = math.exp(_poly(_LARGE_N_LOG_SD, log_n))
    return float(normal_sf((w_transformed - mean) / sd))


def shapiro_wilk(x) -> ShapiroResult:
    """Shapiro-Wilk W and approximate p-value for 3 <= n <= 5000."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("input must be a 1-d vector")
    n = x.size
    if not 3 <= n <= 5000:
        raise ValueError("sample size must be between 3 and 5000")
    if not np.all(np.isfinite(x)):
        raise ValueError("input must be finite")
    ordered = np.sort(x)
    scatter = float(np.sum((ordered - ordered.mean()) ** 2))
    if scatter <= 0.0:
        raise ValueError("input vector is constant")
    weights = _shapiro_weights(n)
    w = float((weights @ ordered) ** 2 / scatter)
    w = min(w, 1.0)
    return ShapiroResult(w=w, p=_shapiro_p_value(w, n))


def _fresh_seed() -> int:
    return int(np.random.SeedSequence().entropy % (2 ** 32))


def randomized_quantile_residuals(model_cdf, sample,
                                  seed: int | None = None) -> RqrResult:
    """Randomized quantile residuals for a discrete fitted model.

    ``model_cdf`` is either one cdf callable shared by all observations
    or a sequence with one callable per observation (regression case).
    For observation y, u is uniform on (F(y-1), F(y)] — the lower edge
    is 0 when y = 0 — and the residual is the standard normal quantile
    of u after clamping to [1e-12, 1 - 1e-12].  The seed actually used
    is recorded for exact replay.

    F(y) = F(y-1) is tolerated: a badly misspecified model can assign an
    observed value so little mass that both cdf values round to the same
    float (typically 1.0 deep in a thin tail).  The degenerate interval
    collapses to u = F(y), which the clamp turns into an extreme
    residual — the correct signal for data the model calls impossible.
    Only a strictly decreasing pair raises.
    """
    sample = np.asarray(sample)
    if sample.ndim != 1 or sample.size == 0:
        raise ValueError("sample must be a nonempty 1-d vector")
    if np.any(sample < 0) or np.any(sample != np.floor(sample)):
        raise ValueError("sample must hold nonnegative integers")
    n = sample.size
    if callable(model_cdf):
        cdfs = [model_cdf] * n
    else:
        cdfs = list(model_cdf)
        if len(cdfs) != n:
            raise ValueError("need one cdf per observation")
    if seed is None:
        seed = _fresh_seed()
    rng = np.random.default_rng(seed)

    lower = np.empty(n)
    upper = np.empty(n)
    for i, (y, cdf) in enumerate(zip(sample.astype(int), cdfs)):
        lower[i] = 0.0 if y == 0 else float(cdf(y - 1))
        upper[i] = float(cdf(y))
        if upper[i] < lower[i]:
            raise ValueError(f"cdf is not increasing at observation {i}")
    # 1 - U keeps the draw inside the half-open interval (lower, upper].
    u = lower + (upper - lower) * (1.0 - rng.random(n))
    u = np.clip(u, _U_CLAMP, 1.0 - _U_CLAMP)
    residuals = normal_quantile(u)
    if n >= 3 and np.ptp(residuals) > 0.0:
        check = shapiro_wilk(residuals)
        w, p = check.w, check.p
    else:
        w, p = math.nan, math.nan
    return RqrResult(residuals=residuals, shapiro_w=w, shapiro_p=p, seed=seed)


def chi_square_gof(observed: FrequencyTable, model_pmf, fitted_params: int,
                   min_expected: float = 5.0,
                   df_override: int | None = None) -> GofResult:
    """Chi-square goodness-of-fit with right-tail cell merging.

    Cells run over 0..max observed value with the final cell absorbing
    the upper-tail mass; while any cell's expected count is below
    ``min_expected``, the rightmost deficient cell merges into its left
    neighbor.  df = cells - 1 - fitted_params unless overridden.
    """
    if not isinstance(observed, FrequencyTable):
        raise TypeError("observed must be a FrequencyTable")
    if fitted_params < 0 or int(fitted_params) != fitted_params:
        raise ValueError("fitted_params must be a nonnegative integer")
    if min_expected <= 0.0:
        raise ValueError("min_expected must be positive")
    n = observed.n
    if n < 10:
        raise ValueError("need a total count of at least 10")
    max_value = int(observed.values[-1])
    support = np.arange(max_value + 1)
    counts = np.zeros(max_value + 1, dtype=np.int64)
    counts[observed.values] = observed.counts
    pmf = np.asarray([float(model_pmf(int(v))) for v in support])
    if np.any(pmf < 0.0) or not np.all(np.isfinite(pmf)):
        raise ValueError("model pmf produced invalid probabilities")
    expected = n * pmf
    # The final cell also receives the tail mass beyond the largest value.
    expected[-1] += n * max(1.0 - float(np.sum(pmf)), 0.0)

    lows = list(support)
    highs: list = list(support)
    highs[-1] = None
    observed_cells = list(counts)
    expected_cells = list(expected)
    while True:
        deficient = [i for i, e in enumerate(expected_cells) if e < min_expected]
        if not deficient:
            break
        if len(expected_cells) == 1:
            raise ValueError("insufficient cells: expected counts too small")
        i = deficient[-1]
        j = i - 1 if i > 0 else 1
        keep, drop = min(i, j), max(i, j)
        observed_cells[keep] += observed_cells[drop]
        expected_cells[keep] += expected_cells[drop]
        highs[keep] = highs[drop]
        del lows[drop], highs[drop], observed_cells[drop], expected_cells[drop]

    cells = len(expected_cells)
    if cells < fitted_params + 2:
        raise ValueError("insufficient cells after merging")
    if df_override is not None:
        if df_override < 1 or int(df_override) != df_override:
            raise ValueError("df_override must be a positive integer")
        df = int(df_override)
    else:
        df = cells - 1 - int(fitted_params)
    chi_sq = float(sum((o - e) ** 2 / e
                       for o, e in zip(observed_cells, expected_cells)))
    return GofResult(
        cells=tuple(GofCell(int(lo), None if hi is None else int(hi), int(o),
                            float(e))
                    for lo, hi, o, e in zip(lows, highs, observed_cells,
                                            expected_cells)),
        chi_sq=chi_sq,
        df=df,
        p_value=chisq_sf(chi_sq, df),
    )


def information_criteria(log_likelihood: float, k: int,
                         n: float) -> InformationCriteria:
    """AIC = 2k - 2l and BIC = k ln n - 2l, exact arithmetic."""
    if k < 1 or int(k) != k:
        raise ValueError("k must be a positive integer")
    if n < 1:
        raise ValueError("n must be at least 1")
    return InformationCriteria(aic=2.0 * k - 2.0 * log_likelihood,
                               bic=k * math.log(n) - 2.0 * log_likelihood)


def fitted_pmf(report: FitReport):
    """Rebuild the probability mass function a fit report describes."""
    estimates = report.estimates
    name = report.model_name
    if name == "pcd":
        params = PcdParams(eta=estimates["eta"], phi=estimates["phi"])
        return lambda v: float(pcd_pmf(params, v))
    if name == "thipcd":
        params = InflatedParams(eta=estimates["eta"], phi=estimates["phi"],
                                alpha=estimates["alpha"])
        return lambda v: float(thipcd_pmf(params, v))
    if name == "thipd":
        lam, alpha = estimates["lambda"], estimates["alpha"]
        return lambda v: float(np.exp(thipd_log_pmf(lam, alpha, v)))
    if name in BASELINE_FAMILIES:
        spec = BaselineSpec(family=name, parameters=dict(estimates))
        return lambda v: float(np.exp(baseline_log_pmf(spec, v)))
    raise ValueError(f"unknown model name: {name}")


def compare_models(reports, data: FrequencyTable,
                   min_expected: float = 5.0,
                   df_override: int | None = None) -> ComparisonResult:
    """Rank fitted models on shared data by AIC with fit statistics.

    Every report must describe the same sample (matching n); each row
    carries the model's log-likelihood, AIC, BIC, and chi-square
    goodness-of-fit at that model's own parameter count.
    """
    reports = list(reports)
    if len(reports) < 2:
        raise ValueError("need at least two fit reports to compare")
    for report in reports:
        if report.n != data.n:
            raise ValueError(
                f"report for {report.model_name} describes n={report.n}, "
                f"data has n={data.n}")
    rows = []
    for report in reports:
        gof = chi_square_gof(data, fitted_pmf(report), report.k,
                             min_expected=min_expected,
                             df_override=df_override)
        rows.append((report, gof))
    rows.sort(key=lambda pair: pair[0].aic)
    best_model = rows[0][0].model_name
    return ComparisonResult(
        rows=tuple(
            ComparisonRow(
                model=report.model_name,
                log_likelihood=report.log_likelihood,
                aic=report.aic,
                bic=report.bic,
                chi_sq=gof.chi_sq,
                df=gof.df,
                p_value=gof.p_value,
                best=report.model_name == best_model,
            )
            for report, gof in rows),
        best_model=best_model,
    )

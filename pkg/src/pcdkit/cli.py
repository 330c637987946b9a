"""Batch command-line front end.

Subcommands: ``fit`` (single model on count data), ``compare`` (several
models ranked by AIC with goodness-of-fit), ``regress`` (log-link count
regression with optional residual diagnostics), and ``simulate``
(deterministic sample generation).  Every file-writing run leaves a
manifest next to its output recording the command, input digest, seed,
tool version, and timestamp; report paths also render figures next to
the main document.

Exit codes: 0 success, 1 input or parameter error, 2 non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .baselines import BaselineSpec, baseline_log_pmf, baseline_mle, nb_prob
from .copoun import PcdParams
from .diagnostics import compare_models, fitted_pmf, randomized_quantile_residuals
from .estimation import (FitReport, MomentError, build_fit_report, mle_fit,
                         mom_fit)
from .freq import FrequencyTable
from .inflated import (InflatedParams, thipcd_mle, thipcd_sample, thipd_mle)
from .numkernel import normal_quantile, regularized_gamma_q
from .pcd import eta_from_mean_arrays, pcd_cdf, pcd_log_pmf, pcd_sample
from .plots import render_frequency_plot, render_profile_plot, render_qq_plot
from .regression import (RegressionData, nb_regression_fit,
                         pcd_regression_fit, poisson_regression_fit,
                         profile_traces)

__all__ = ["main", "load_counts", "RunManifest", "InputDataError"]

EXIT_SUCCESS = 0
EXIT_INPUT_ERROR = 1
EXIT_NO_CONVERGENCE = 2

_COUNT_MODELS = ("pcd", "thipcd", "thipd", "poisson", "geometric", "nb", "zip")
_BASELINE_BY_CLI = {"poisson": "poisson", "geometric": "geometric",
                    "nb": "negative_binomial", "zip": "zip"}
_REGRESSION_MODELS = ("pcd", "poisson", "nb")


class InputDataError(Exception):
    """Bad input file or invalid parameter combination (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    # Usage errors belong to the input-error exit code, not argparse's 2.
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_INPUT_ERROR)


class RunManifest:
    """Reproducibility record written next to every output file."""

    def __init__(self, command: str, input_digest: str, seed: int):
        self.command = command
        self.input_digest = input_digest
        self.seed = int(seed)
        self.tool_version = __version__
        self.timestamp = datetime.now(timezone.utc).isoformat()

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "input_digest": self.input_digest,
            "seed": self.seed,
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
        }

    def write(self, out_path: str) -> str:
        path = out_path + ".manifest.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")
        return path


def _digest_file(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def load_counts(path: str, fmt: str = "auto") -> FrequencyTable:
    """Read count data as raw lines or a ``value,count`` CSV.

    With ``fmt='auto'`` the file is treated as a frequency CSV when its
    first line is the ``value,count`` header, raw otherwise.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise InputDataError(f"cannot read {path}: {err.strerror}") from err
    lines = text.splitlines()
    if not any(line.strip() for line in lines):
        raise InputDataError(f"{path}: empty input file")
    if fmt == "auto":
        fmt = "freq" if lines[0].strip() == "value,count" else "raw"
    if fmt == "raw":
        sample = []
        for lineno, line in enumerate(lines, 1):
            token = line.strip()
            if not token:
                continue
            try:
                value = int(token)
            except ValueError:
                raise InputDataError(
                    f"{path}: line {lineno}: not an integer: {token!r}") from None
            if value < 0:
                raise InputDataError(
                    f"{path}: line {lineno}: negative count value {value}")
            sample.append(value)
        return FrequencyTable.from_sample(np.asarray(sample))
    if lines[0].strip() != "value,count":
        raise InputDataError(
            f"{path}: line 1: expected header 'value,count'")
    values, counts = [], []
    for lineno, line in enumerate(lines[1:], 2):
        token = line.strip()
        if not token:
            continue
        parts = token.split(",")
        if len(parts) != 2:
            raise InputDataError(
                f"{path}: line {lineno}: expected 'value,count' pair")
        try:
            value, count = int(parts[0]), int(parts[1])
        except ValueError:
            raise InputDataError(
                f"{path}: line {lineno}: non-integer entry") from None
        if value < 0 or count < 0:
            raise InputDataError(
                f"{path}: line {lineno}: negative entry")
        values.append(value)
        counts.append(count)
    try:
        return FrequencyTable(values=np.asarray(values),
                              counts=np.asarray(counts))
    except ValueError as err:
        raise InputDataError(f"{path}: {err}") from err


def _read_regression_csv(path: str, response: str, covariates):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [line for line in fh.read().splitlines() if line.strip()]
    except OSError as err:
        raise InputDataError(f"cannot read {path}: {err.strerror}") from err
    if not lines:
        raise InputDataError(f"{path}: empty input file")
    header = [name.strip() for name in lines[0].split(",")]
    if response not in header:
        raise InputDataError(f"{path}: response column not found: {response}")
    if covariates is None:
        covariates = [name for name in header if name != response]
    else:
        for name in covariates:
            if name not in header:
                raise InputDataError(
                    f"{path}: covariate column not found: {name}")
    if not covariates:
        raise InputDataError(f"{path}: no covariate columns")
    columns = {name: [] for name in header}
    for lineno, line in enumerate(lines[1:], 2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise InputDataError(
                f"{path}: line {lineno}: expected {len(header)} fields")
        for name, token in zip(header, parts):
            try:
                columns[name].append(float(token))
            except ValueError:
                raise InputDataError(
                    f"{path}: line {lineno}: non-numeric entry in "
                    f"column {name}") from None
    y = np.asarray(columns[response])
    if np.any(y < 0) or np.any(y != np.floor(y)):
        raise InputDataError(
            f"{path}: response column {response} must hold nonnegative "
            "integers")
    design = np.column_stack(
        [np.ones(y.size)] + [np.asarray(columns[name]) for name in covariates])
    try:
        return RegressionData(response=y.astype(int), design=design,
                              column_names=("intercept", *covariates))
    except ValueError as err:
        raise InputDataError(f"{path}: {err}") from err


def _json_text(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _fit_table_text(report: FitReport) -> str:
    rows = [f"model: {report.model_name}   n: {report.n}   "
            f"converged: {'yes' if report.converged else 'no'}"]
    level = f"{report.ci_level:g}"
    rows.append(f"{'parameter':<12}{'estimate':>14}{'std.error':>12}"
                f"{'ci' + level + '.low':>14}{'ci' + level + '.high':>14}")
    for name, est in report.estimates.items():
        se = report.standard_errors.get(name, math.nan)
        rows.append(f"{name:<12}{est:>14.6f}{se:>12.4f}"
                    f"{report.ci_lower[name]:>14.4f}"
                    f"{report.ci_upper[name]:>14.4f}")
    if report.model_name == "negative_binomial":
        p = nb_prob(report.estimates["mean"], report.estimates["dispersion"])
        rows.append(f"{'(success p)':<12}{p:>14.6f}")
    rows.append(f"log-likelihood: {report.log_likelihood:.6f}")
    rows.append(f"AIC: {report.aic:.6f}")
    rows.append(f"BIC: {report.bic:.6f}")
    return "\n".join(rows) + "\n"


def _comparison_payload(comparison) -> dict:
    return {
        "best_model": comparison.best_model,
        "rows": [
            {
                "model": row.model,
                "log_likelihood": row.log_likelihood,
                "aic": row.aic,
                "bic": row.bic,
                "chi_sq": row.chi_sq,
                "df": row.df,
                "p_value": row.p_value,
                "best": row.best,
            }
            for row in comparison.rows
        ],
    }


def _comparison_table_text(comparison) -> str:
    rows = [f"{'model':<20}{'-loglik':>12}{'AIC':>12}{'BIC':>12}"
            f"{'chi-sq':>12}{'df':>5}{'p-value':>10}"]
    for row in comparison.rows:
        flag = " *" if row.best else ""
        rows.append(f"{row.model + flag:<20}{-row.log_likelihood:>12.4f}"
                    f"{row.aic:>12.4f}{row.bic:>12.4f}{row.chi_sq:>12.4f}"
                    f"{row.df:>5d}{row.p_value:>10.4f}")
    rows.append(f"best model by AIC: {comparison.best_model}")
    return "\n".join(rows) + "\n"


def _regression_table_text(fit) -> str:
    rows = [f"model: {fit.model_name}   n: {fit.n}   "
            f"converged: {'yes' if fit.converged else 'no'}"]
    rows.append(f"{'parameter':<12}{'estimate':>14}{'std.error':>12}"
                f"{'z':>10}{'p':>12}")
    for name, est in fit.coefficients.items():
        rows.append(f"{name:<12}{est:>14.6f}{fit.se[name]:>12.4f}"
                    f"{fit.z[name]:>10.3f}{fit.p[name]:>12.3e}")
    if fit.dispersion is not None:
        se = fit.dispersion_se if fit.dispersion_se is not None else math.nan
        rows.append(f"{'dispersion':<12}{fit.dispersion:>14.6f}{se:>12.4f}")
    rows.append(f"log-likelihood: {fit.log_likelihood:.6f}")
    rows.append(f"AIC: {fit.aic:.6f}")
    rows.append(f"BIC: {fit.bic:.6f}")
    return "\n".join(rows) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _stem(out: str) -> str:
    base, ext = os.path.splitext(out)
    return base if ext else out


def _expected_counts(table: FrequencyTable, pmf, n: int) -> np.ndarray:
    values = np.arange(int(table.values[-1]) + 1)
    expected = np.array([n * pmf(int(v)) for v in values])
    return values, expected


def _full_observed(table: FrequencyTable) -> np.ndarray:
    values = np.arange(int(table.values[-1]) + 1)
    counts = np.zeros(values.size, dtype=int)
    counts[table.values] = table.counts
    return counts


def _mom_report(table: FrequencyTable, ci_level: float) -> FitReport:
    params = mom_fit(table)
    log_likelihood = float(np.sum(
        table.counts * pcd_log_pmf(params, table.values)))
    estimates = {"eta": params.eta, "phi": params.phi}
    absent = {"eta": math.nan, "phi": math.nan}
    return build_fit_report("pcd", estimates, absent, log_likelihood,
                            table.n, converged=True, ci_level=ci_level)


def _fit_model(model: str, table: FrequencyTable, method: str,
               ci_level: float) -> FitReport:
    if method == "mom":
        if model != "pcd":
            raise InputDataError("--method mom is only valid for model pcd")
        return _mom_report(table, ci_level)
    if model == "pcd":
        return mle_fit(table, ci_level=ci_level)
    if model == "thipcd":
        return thipcd_mle(table, ci_level=ci_level)
    if model == "thipd":
        return thipd_mle(table, ci_level=ci_level)
    return baseline_mle(_BASELINE_BY_CLI[model], table, ci_level=ci_level)


def _cmd_fit(args, argv) -> int:
    table = load_counts(args.input, args.format)
    try:
        report = _fit_model(args.model, table, args.method, args.ci_level)
    except MomentError as err:
        raise InputDataError(f"moment system infeasible: {err}") from err
    text = (_json_text(report.to_dict()) if args.output == "json"
            else _fit_table_text(report))
    _emit(text, args.out)
    if args.out is not None:
        RunManifest(" ".join(["pcdkit"] + argv), _digest_file(args.input),
                    args.seed).write(args.out)
        values, expected = _expected_counts(table, fitted_pmf(report), table.n)
        render_frequency_plot(values, _full_observed(table),
                              {report.model_name: expected},
                              _stem(args.out) + ".fit.png")
    return EXIT_SUCCESS if report.converged else EXIT_NO_CONVERGENCE


def _cmd_compare(args, argv) -> int:
    models = [name.strip() for name in args.models.split(",") if name.strip()]
    deduped = list(dict.fromkeys(models))
    if len(deduped) < 2:
        raise InputDataError("need at least two distinct models to compare")
    for model in deduped:
        if model not in _COUNT_MODELS:
            raise InputDataError(f"unknown model: {model}")
    table = load_counts(args.input, args.format)
    reports = [_fit_model(model, table, "mle", args.ci_level)
               for model in deduped]
    comparison = compare_models(reports, table,
                                min_expected=args.min_expected,
                                df_override=args.df_override)
    text = (_json_text(_comparison_payload(comparison))
            if args.output == "json" else _comparison_table_text(comparison))
    _emit(text, args.out)
    if args.out is not None:
        RunManifest(" ".join(["pcdkit"] + argv), _digest_file(args.input),
                    args.seed).write(args.out)
        expected_by_model = {}
        for report in reports:
            values, expected = _expected_counts(table, fitted_pmf(report),
                                                table.n)
            expected_by_model[report.model_name] = expected
        render_frequency_plot(values, _full_observed(table),
                              expected_by_model,
                              _stem(args.out) + ".compare.png")
    unconverged = [r.model_name for r in reports if not r.converged]
    if unconverged:
        sys.stderr.write(
            f"warning: no convergence for: {', '.join(unconverged)}\n")
        return EXIT_NO_CONVERGENCE
    return EXIT_SUCCESS


def _row_cdfs(fit, data: RegressionData):
    means = fit.fitted_means
    if fit.model_name == "pcd":
        phi = fit.dispersion
        etas = eta_from_mean_arrays(means, phi)
        return [
            (lambda eta: lambda y: float(
                pcd_cdf(PcdParams(eta=eta, phi=phi), y)))(float(eta))
            for eta in etas
        ]
    if fit.model_name == "poisson":
        # P(Y <= y) for Poisson(mu) via the upper incomplete gamma.
        return [
            (lambda mu: lambda y: regularized_gamma_q(y + 1.0, mu))(float(mu))
            for mu in means
        ]
    dispersion = fit.dispersion

    def make_nb(mu):
        spec = BaselineSpec(family="negative_binomial",
                            parameters={"mean": mu, "dispersion": dispersion})

        def cdf(y):
            support = np.arange(int(y) + 1)
            return float(np.sum(np.exp(baseline_log_pmf(spec, support))))

        return cdf

    return [make_nb(float(mu)) for mu in means]


def _regress_diagnostics(args, fit, data: RegressionData) -> dict:
    rqr = randomized_quantile_residuals(_row_cdfs(fit, data), data.response,
                                        seed=args.seed)
    stem = _stem(args.out)
    with open(stem + ".rqr.csv", "w", encoding="utf-8") as fh:
        fh.write("index,residual\n")
        for i, value in enumerate(rqr.residuals):
            fh.write(f"{i},{value:.12g}\n")
    n = rqr.residuals.size
    theoretical = normal_quantile(
        (np.arange(1, n + 1) - 0.375) / (n + 0.25))
    ordered = np.sort(rqr.residuals)
    with open(stem + ".qq.csv", "w", encoding="utf-8") as fh:
        fh.write("theoretical,sample\n")
        for t, s in zip(theoretical, ordered):
            fh.write(f"{t:.12g},{s:.12g}\n")
    render_qq_plot(theoretical, ordered, stem + ".qq.png")
    traces = profile_traces(data, fit)
    with open(stem + ".profile.csv", "w", encoding="utf-8") as fh:
        fh.write("parameter,value,log_likelihood\n")
        for trace in traces:
            for v, ll in zip(trace.values, trace.log_likelihood):
                fh.write(f"{trace.name},{v:.12g},{ll:.12g}\n")
    if traces:
        render_profile_plot(traces, stem + ".profile.png")
    return {
        "shapiro_w": rqr.shapiro_w,
        "shapiro_p": rqr.shapiro_p,
        "seed": rqr.seed,
    }


def _cmd_regress(args, argv) -> int:
    covariates = None
    if args.covariates is not None:
        covariates = [name.strip() for name in args.covariates.split(",")
                      if name.strip()]
    data = _read_regression_csv(args.input, args.response, covariates)
    if args.diagnostics and args.out is None:
        raise InputDataError("--diagnostics requires --out for its CSV "
                             "and figure files")
    fitter = {"pcd": pcd_regression_fit, "poisson": poisson_regression_fit,
              "nb": nb_regression_fit}[args.model]
    fit = fitter(data)
    payload = fit.to_dict()
    diagnostics = None
    if args.diagnostics:
        diagnostics = _regress_diagnostics(args, fit, data)
        payload["diagnostics"] = diagnostics
    if args.output == "json":
        text = _json_text(payload)
    else:
        text = _regression_table_text(fit)
        if diagnostics is not None:
            text += (f"shapiro-wilk: W={diagnostics['shapiro_w']:.6f} "
                     f"p={diagnostics['shapiro_p']:.6f} "
                     f"(seed {diagnostics['seed']})\n")
    _emit(text, args.out)
    if args.out is not None:
        RunManifest(" ".join(["pcdkit"] + argv), _digest_file(args.input),
                    args.seed).write(args.out)
    return EXIT_SUCCESS if fit.converged else EXIT_NO_CONVERGENCE


def _require_params(args, names) -> dict:
    params = {}
    for name in names:
        value = getattr(args, name if name != "lambda" else "lam")
        if value is None:
            raise InputDataError(
                f"model {args.model} requires --{name}")
        params[name] = value
    return params


def _simulate_draws(args, rng: np.random.Generator) -> np.ndarray:
    model = args.model
    n = args.n
    if model == "pcd":
        p = _require_params(args, ("eta", "phi"))
        return pcd_sample(PcdParams(eta=p["eta"], phi=p["phi"]), rng, n)
    if model == "thipcd":
        p = _require_params(args, ("eta", "phi", "alpha"))
        return thipcd_sample(
            InflatedParams(eta=p["eta"], phi=p["phi"], alpha=p["alpha"]),
            rng, n)
    if model == "thipd":
        p = _require_params(args, ("lambda", "alpha"))
        if p["lambda"] <= 0 or not 0 <= p["alpha"] < 1:
            raise InputDataError("need lambda > 0 and alpha in [0, 1)")
        inflate = rng.random(n) < p["alpha"]
        return np.where(inflate, 3, rng.poisson(p["lambda"], n))
    if model == "poisson":
        p = _require_params(args, ("lambda",))
        if p["lambda"] <= 0:
            raise InputDataError("need lambda > 0")
        return rng.poisson(p["lambda"], n)
    if model == "geometric":
        p = _require_params(args, ("p",))
        if not 0 < p["p"] < 1:
            raise InputDataError("need p in (0, 1)")
        return rng.geometric(p["p"], n) - 1
    if model == "nb":
        p = _require_params(args, ("mean", "dispersion"))
        if p["mean"] <= 0 or p["dispersion"] <= 0:
            raise InputDataError("need mean > 0 and dispersion > 0")
        success = nb_prob(p["mean"], p["dispersion"])
        return rng.negative_binomial(p["dispersion"], success, n)
    p = _require_params(args, ("lambda", "alpha"))
    if p["lambda"] <= 0 or not 0 <= p["alpha"] < 1:
        raise InputDataError("need lambda > 0 and alpha in [0, 1)")
    zeroed = rng.random(n) < p["alpha"]
    return np.where(zeroed, 0, rng.poisson(p["lambda"], n))


def _cmd_simulate(args, argv) -> int:
    if args.n < 1:
        raise InputDataError("need n >= 1")
    rng = np.random.default_rng(args.seed)
    try:
        draws = _simulate_draws(args, rng)
    except ValueError as err:
        raise InputDataError(str(err)) from err
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(str(int(v)) for v in draws) + "\n")
    RunManifest(" ".join(["pcdkit"] + argv), _digest_file(args.out),
                args.seed).write(args.out)
    return EXIT_SUCCESS


def _add_common(sub, *, seed=True, ci=False, fmt=False, out=True,
                output=False):
    if fmt:
        sub.add_argument("--format", choices=("auto", "raw", "freq"),
                         default="auto",
                         help="input layout (default: sniff the header)")
    if output:
        sub.add_argument("--output", choices=("json", "table"),
                         default="json", help="report rendering")
    if out:
        sub.add_argument("--out", default=None, metavar="PATH",
                         help="write the report here (plus manifest and "
                              "figures) instead of stdout")
    if ci:
        sub.add_argument("--ci-level", type=float, default=0.95,
                         help="two-sided confidence level (default 0.95)")
    if seed:
        sub.add_argument("--seed", type=int, default=0,
                         help="random seed recorded in the manifest")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pcdkit",
                     description="Count-data fitting, comparison, "
                                 "regression, and simulation.")
    parser.add_argument("--version", action="version",
                        version=f"pcdkit {__version__}")
    commands = parser.add_subparsers(dest="command", required=True,
                                     parser_class=_Parser)

    fit = commands.add_parser("fit", help="fit one model to count data")
    fit.add_argument("model", choices=_COUNT_MODELS)
    fit.add_argument("input", help="counts file (raw lines or value,count)")
    fit.add_argument("--method", choices=("mle", "mom"), default="mle")
    _add_common(fit, ci=True, fmt=True, output=True)
    fit.set_defaults(func=_cmd_fit)

    compare = commands.add_parser("compare",
                                  help="rank several models on shared data")
    compare.add_argument("models", help="comma-separated model list")
    compare.add_argument("input")
    compare.add_argument("--df-override", type=int, default=None,
                         help="fix the chi-square degrees of freedom")
    compare.add_argument("--min-expected", type=float, default=5.0,
                         help="cell-merging threshold (default 5)")
    _add_common(compare, ci=True, fmt=True, output=True)
    compare.set_defaults(func=_cmd_compare)

    regress = commands.add_parser("regress",
                                  help="log-link count regression")
    regress.add_argument("input", help="CSV with a header row")
    regress.add_argument("--response", required=True,
                         help="name of the response column")
    regress.add_argument("--covariates", default=None,
                         help="comma-separated covariate columns "
                              "(default: all non-response columns)")
    regress.add_argument("--model", choices=_REGRESSION_MODELS,
                         default="pcd")
    regress.add_argument("--diagnostics", action="store_true",
                         help="also emit residual, Q-Q, and profile "
                              "likelihood files (needs --out)")
    _add_common(regress, ci=True, output=True)
    regress.set_defaults(func=_cmd_regress)

    simulate = commands.add_parser("simulate",
                                   help="draw a reproducible sample")
    simulate.add_argument("model", choices=_COUNT_MODELS)
    simulate.add_argument("out", help="destination file for raw counts")
    simulate.add_argument("-n", type=int, required=True,
                          help="sample size")
    simulate.add_argument("--eta", type=float, default=None)
    simulate.add_argument("--phi", type=float, default=None)
    simulate.add_argument("--alpha", type=float, default=None)
    simulate.add_argument("--lambda", dest="lam", type=float, default=None)
    simulate.add_argument("--p", type=float, default=None)
    simulate.add_argument("--mean", type=float, default=None)
    simulate.add_argument("--dispersion", type=float, default=None)
    _add_common(simulate, out=False)
    simulate.set_defaults(func=_cmd_simulate)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except InputDataError as err:
        sys.stderr.write(f"error: {err}\n")
        return EXIT_INPUT_ERROR
    except (ValueError, TypeError) as err:
        sys.stderr.write(f"error: {err}\n")
        return EXIT_INPUT_ERROR
    except OSError as err:
        sys.stderr.write(f"error: {err}\n")
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())

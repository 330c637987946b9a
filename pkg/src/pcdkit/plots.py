"""Headless figure rendering for fit reports and regression diagnostics.

All functions draw onto standalone matplotlib Figure objects (no pyplot,
no global state) and write PNG files, so they are safe in batch jobs and
test runs without a display.
"""

from __future__ import annotations

import math

import numpy as np
from matplotlib.figure import Figure

__all__ = [
    "render_qq_plot",
    "render_profile_plot",
    "render_frequency_plot",
]

_DPI = 130


def render_qq_plot(theoretical, sample, path: str,
                   title: str = "Residual Q-Q plot") -> str:
    """Normal Q-Q scatter of residual quantiles with the identity line."""
    theoretical = np.asarray(theoretical, dtype=float)
    sample = np.asarray(sample, dtype=float)
    if theoretical.shape != sample.shape or theoretical.ndim != 1:
        raise ValueError("theoretical and sample quantiles must match 1-d")
    fig = Figure(figsize=(5.0, 5.0))
    ax = fig.subplots()
    ax.scatter(theoretical, sample, s=14, alpha=0.7, edgecolors="none",
               color="#1f6fb2")
    span = [min(theoretical.min(), sample.min()) - 0.3,
            max(theoretical.max(), sample.max()) + 0.3]
    ax.plot(span, span, color="#c44e52", linewidth=1.2)
    ax.set_xlabel("Theoretical quantile")
    ax.set_ylabel("Sample quantile")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI, format="png")
    return path


def render_profile_plot(traces, path: str) -> str:
    """One panel per parameter: profile log-likelihood over its grid."""
    traces = list(traces)
    if not traces:
        raise ValueError("no profile traces to plot")
    columns = min(len(traces), 2)
    rows = math.ceil(len(traces) / columns)
    fig = Figure(figsize=(5.0 * columns, 3.6 * rows))
    axes = fig.subplots(rows, columns, squeeze=False)
    for k, trace in enumerate(traces):
        ax = axes[k // columns][k % columns]
        ax.plot(trace.values, trace.log_likelihood, color="#1f6fb2",
                linewidth=1.5)
        ax.axvline(trace.estimate, color="#c44e52", linestyle="--",
                   linewidth=1.0)
        ax.set_xlabel(trace.name)
        ax.set_ylabel("profile log-likelihood")
        ax.grid(alpha=0.3)
    for k in range(len(traces), rows * columns):
        axes[k // columns][k % columns].set_visible(False)
    fig.suptitle("Profile log-likelihood", y=0.995)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI, format="png")
    return path


def render_frequency_plot(values, observed, expected_by_model: dict,
                          path: str, title: str = "Observed vs expected "
                          "frequencies") -> str:
    """Observed frequency bars with expected-count markers per model."""
    values = np.asarray(values)
    observed = np.asarray(observed, dtype=float)
    if values.shape != observed.shape or values.ndim != 1:
        raise ValueError("values and observed counts must match 1-d")
    fig = Figure(figsize=(7.2, 4.4))
    ax = fig.subplots()
    ax.bar(values, observed, width=0.8, color="#b8cbe0", edgecolor="#5b7c9d",
           label="observed")
    markers = ["o", "s", "^", "D", "v", "P", "X"]
    palette = ["#c44e52", "#2a9d5c", "#8060b8", "#c08030", "#3a7ca5",
               "#a04060", "#557755"]
    for k, (name, expected) in enumerate(expected_by_model.items()):
        expected = np.asarray(expected, dtype=float)
        if expected.shape != values.shape:
            raise ValueError(f"expected counts for {name} must match values")
        ax.plot(values, expected, marker=markers[k % len(markers)],
                color=palette[k % len(palette)], linewidth=1.2,
                markersize=5, label=name)
    ax.set_xlabel("count value")
    ax.set_ylabel("frequency")
    ax.set_title(title)
    ax.legend()
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI, format="png")
    return path

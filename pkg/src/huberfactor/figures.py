"""Figure rendering for the report-producing workflows.

Charts are drawn straight onto Agg canvases (no pyplot, no global
backend state) and written as PNG with the software tag stripped, so a
rerun with identical inputs produces byte-identical files.
"""

from __future__ import annotations

import numpy as np
from matplotlib.figure import Figure

__all__ = ["save_mc_figure", "save_backtest_figure"]

_BAR = "#4878a8"
_ACCENT = "#b85450"
_GRID = {"axis": "y", "color": "#dddddd", "linewidth": 0.8, "zorder": 0}
_DPI = 110


def _new_figure(width: float, height: float) -> Figure:
    return Figure(figsize=(width, height), dpi=_DPI)


def _save(fig: Figure, path) -> None:
    fig.savefig(path, format="png", metadata={"Software": None})


def _bar_panel(ax, labels, values, errors, title):
    x = np.arange(len(labels))
    ax.grid(**_GRID)
    ax.bar(x, values, 0.6, color=_BAR, zorder=2)
    if any(e is not None for e in errors):
        errs = [0.0 if e is None else e for e in errors]
        ax.errorbar(
            x, values, yerr=errs, fmt="none", ecolor="#333333",
            capsize=3, linewidth=1.0, zorder=3,
        )
    ax.set_xticks(x)
    ax.set_xticklabels(labels)
    ax.set_title(title, fontsize=10)
    ax.margins(y=0.15)


def save_mc_figure(report, path) -> None:
    """Render a Monte Carlo report to one PNG.

    Accuracy reports get one panel per metric with dispersion bars;
    rank reports get the mean estimate and the under/over counts.
    """
    names = list(report.methods)
    if report.mode == "accuracy":
        fig = _new_figure(9.0, 3.2)
        axes = fig.subplots(1, 3)
        panels = [
            ("median common-component error", "mee_cc", "mee_cc_iqr"),
            ("mean loading-space distance", "ave_fl", "ave_fl_sd"),
            ("mean factor-space distance", "ave_fs", "ave_fs_sd"),
        ]
        for ax, (title, key, err_key) in zip(axes, panels):
            vals = [report.methods[n][key] or 0.0 for n in names]
            errs = [report.methods[n][err_key] for n in names]
            _bar_panel(ax, names, vals, errs, title)
        fig.suptitle(f"{report.replications} replications", fontsize=10)
    else:
        fig = _new_figure(7.0, 3.2)
        ax_mean, ax_cnt = fig.subplots(1, 2)
        vals = [report.methods[n]["mean_rhat"] or 0.0 for n in names]
        _bar_panel(ax_mean, names, vals, [None] * len(names), "mean estimated rank")
        x = np.arange(len(names))
        ax_cnt.grid(**_GRID)
        under = [report.methods[n]["under_count"] for n in names]
        over = [report.methods[n]["over_count"] for n in names]
        ax_cnt.bar(x - 0.18, under, 0.36, color=_BAR, label="under", zorder=2)
        ax_cnt.bar(x + 0.18, over, 0.36, color=_ACCENT, label="over", zorder=2)
        ax_cnt.set_xticks(x)
        ax_cnt.set_xticklabels(names)
        ax_cnt.set_title("miss counts", fontsize=10)
        ax_cnt.legend(fontsize=8)
        fig.suptitle(f"{report.replications} replications", fontsize=10)
    fig.tight_layout(rect=(0, 0, 1, 0.94))
    _save(fig, path)


def save_backtest_figure(report, path) -> None:
    """Render a backtest report: cumulative returns and their histogram."""
    rets = np.asarray(report.oos_returns, dtype=float)
    fig = _new_figure(9.0, 3.4)
    ax_cum, ax_hist = fig.subplots(1, 2)

    ax_cum.grid(axis="both", color="#dddddd", linewidth=0.8, zorder=0)
    ax_cum.plot(np.arange(rets.size), np.cumsum(rets), color=_BAR, zorder=2)
    ax_cum.axhline(0.0, color="#999999", linewidth=0.8, zorder=1)
    ax_cum.set_title("cumulative out-of-sample return", fontsize=10)
    ax_cum.set_xlabel("month")

    ax_hist.grid(**_GRID)
    bins = max(5, min(30, rets.size // 4))
    ax_hist.hist(rets, bins=bins, color=_BAR, zorder=2)
    for tau, q in report.quantiles.items():
        ax_hist.axvline(q, color=_ACCENT, linewidth=0.9, zorder=3)
    ax_hist.set_title("monthly returns with quantile marks", fontsize=10)

    label = f"mean {report.mean_return:.4f}"
    if report.sharpe is not None:
        label += f", sharpe {report.sharpe:.3f}"
    fig.suptitle(label, fontsize=10)
    fig.tight_layout(rect=(0, 0, 1, 0.94))
    _save(fig, path)

"""Matplotlib rendering for the report-producing CLI paths.

Each function writes one PNG next to the delimited output and returns the
path. Rendering is headless (Agg) and optional at the CLI level.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.dates as mdates
import matplotlib.pyplot as plt
import numpy as np

_FIGSIZE = (10, 5)


def _finish(fig, ax_list, path):
    for ax in ax_list:
        ax.grid(True, alpha=0.3)
        ax.xaxis.set_major_formatter(mdates.DateFormatter("%Y-%m"))
    fig.autofmt_xdate()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_tail_dependence(series_by_side: dict, path):
    """Upper/lower tail dependence over time, one panel per basket side."""
    fig, axes = plt.subplots(
        len(series_by_side), 1, figsize=(_FIGSIZE[0], 3.2 * len(series_by_side)),
        sharex=True, squeeze=False,
    )
    for ax, (side, series) in zip(axes[:, 0], sorted(series_by_side.items())):
        ax.plot(series.dates, series.upper, label="upper", color="tab:red")
        ax.plot(series.dates, series.lower, label="lower", color="tab:blue")
        ax.set_ylim(-0.02, 1.02)
        ax.set_ylabel("tail dependence")
        ax.set_title(side)
        ax.legend(loc="upper left")
    return _finish(fig, list(axes[:, 0]), path)


def plot_cumulative_returns(adjusted, path):
    """Cumulative raw, downside-adjusted and upside-adjusted HML returns."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(adjusted.dates, adjusted.cum_raw, label="raw HML", color="black")
    ax.plot(adjusted.dates, adjusted.cum_down, label="downside adjusted",
            color="tab:red", linestyle="--")
    ax.plot(adjusted.dates, adjusted.cum_up, label="upside adjusted",
            color="tab:green", linestyle="--")
    ax.set_ylabel("cumulative log return")
    ax.legend(loc="best")
    return _finish(fig, [ax], path)


def plot_aic_differences(rows, path):
    """AIC difference series; positive values favor the CFG model."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    by_side = {}
    for rec in rows:
        by_side.setdefault(rec["side"], []).append(rec)
    for side, recs in sorted(by_side.items()):
        dates = [r["date"] for r in recs]
        if any(r["cg_minus_cfg"] is not None for r in recs):
            ax.plot(dates, [r["cg_minus_cfg"] for r in recs],
                    label=f"{side}: AIC(CG) - AIC(CFG)")
        if any(r["opc_minus_cfg"] is not None for r in recs):
            ax.plot(dates, [r["opc_minus_cfg"] for r in recs],
                    label=f"{side}: AIC(OPC) - AIC(CFG)", linestyle="--")
    ax.axhline(0.0, color="grey", linewidth=0.8)
    ax.set_ylabel("AIC difference")
    ax.legend(loc="best")
    return _finish(fig, [ax], path)


def plot_ks_rejections(table_rows, path):
    """Per-currency LogNormal vs l.g.g.d. K-S rejection-rate bars."""
    currencies = [r[0] for r in table_rows]
    lognormal = [float(r[3]) for r in table_rows]
    lggd = [float(r[4]) for r in table_rows]
    x = np.arange(len(currencies))
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(currencies)), 4.5))
    ax.bar(x - 0.2, lognormal, width=0.4, label="LogNormal", color="tab:orange")
    ax.bar(x + 0.2, lggd, width=0.4, label="log-generalized-gamma", color="tab:blue")
    ax.axhline(0.05, color="grey", linewidth=0.8, linestyle=":")
    ax.set_xticks(x)
    ax.set_xticklabels(currencies, rotation=45, ha="right")
    ax.set_ylabel("K-S rejection proportion (5% level)")
    ax.legend(loc="best")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_mixture_weights(fits_by_side: dict, path):
    """Mixture component weights over time per basket side."""
    sides = sorted(fits_by_side)
    fig, axes = plt.subplots(
        len(sides), 1, figsize=(_FIGSIZE[0], 3.2 * len(sides)),
        sharex=True, squeeze=False,
    )
    for ax, side in zip(axes[:, 0], sides):
        fits = sorted(fits_by_side[side], key=lambda f: f.end_date)
        if not fits:
            continue
        dates = [f.end_date for f in fits]
        families = [spec.family.value for spec, _ in fits[0].mixture.components]
        weights = np.array([[w for _, w in f.mixture.components] for f in fits])
        for col, fam in enumerate(families):
            ax.plot(dates, weights[:, col], label=fam)
        ax.set_ylim(-0.02, 1.02)
        ax.set_ylabel("mixture weight")
        ax.set_title(side)
        ax.legend(loc="upper left")
    return _finish(fig, list(axes[:, 0]), path)

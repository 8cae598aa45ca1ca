"""Command-line driver: simulate, fit-marginals, fit-copulas,
tail-dependence, backtest.

Every command is deterministic given (inputs, flags, seed). Output CSVs
start with a provenance comment carrying a hash of the effective
configuration, then a header row. Exit codes: 0 success (possibly with
warnings on partial window failures), 1 input error, 2 numerical failure
affecting every window.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import sys
from pathlib import Path

import click
import numpy as np
from scipy.stats import norm

from . import estimation, figures, marginals, portfolio, simulate, taildep
from .copulas import spec_from_dict
from .panel import (
    QuotePanel,
    apply_exclusions,
    extract_window,
    forward_fill,
    load_exclusions,
    load_panel,
    write_panel_csv,
)

EXIT_INPUT = 1
EXIT_NUMERIC = 2


def _config_hash(command: str, params: dict) -> str:
    blob = json.dumps({"command": command, **params}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _provenance(command: str, params: dict) -> str:
    return f"carrytail {command} config_hash={_config_hash(command, params)}"


def _write_csv(path, header, rows, comment: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x: float) -> str:
    return repr(float(x))


def _parse_k_grid(text: str | None):
    if text is None:
        return None
    try:
        lo, hi, n = text.split(":")
        return np.geomspace(float(lo), float(hi), int(n))
    except ValueError:
        raise click.UsageError(f"--k-grid must be lo:hi:n, got {text!r}") from None


def _load_input_panel(input_path, exclusions_path) -> QuotePanel:
    panel = load_panel(input_path)
    if exclusions_path:
        panel = apply_exclusions(panel, load_exclusions(exclusions_path))
    return forward_fill(panel)


def _fail_input(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_INPUT)


@click.group()
def main():
    """Tail dependence analytics for currency carry-trade baskets."""


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


@main.command("simulate")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", required=True, type=int)
@click.option("--currencies", default=25, show_default=True, type=int)
@click.option("--days", default=756, show_default=True, type=int)
@click.option("--start", default="2015-01-01", show_default=True)
@click.option("--copula", "copula_path", type=click.Path(exists=True, dir_okay=False),
              help="JSON copula/mixture spec; defaults to a CFG mixture.")
def simulate_cmd(out_dir, seed, currencies, days, start, copula_path):
    """Write a synthetic quote panel with known truth parameters."""
    params = dict(seed=seed, currencies=currencies, days=days, start=start,
                  copula=copula_path)
    try:
        copula = None
        if copula_path:
            with open(copula_path, encoding="utf-8") as fh:
                copula = spec_from_dict(json.load(fh))
        panel, truth = simulate.simulate_panel(
            n_currencies=currencies, n_days=days, seed=seed, copula=copula,
            start=dt.date.fromisoformat(start),
        )
        truth["config_hash"] = _config_hash("simulate", params)
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        _fail_input(str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_panel_csv(panel, out / "panel.csv", comment=_provenance("simulate", params))
    simulate.write_truth(truth, out / "truth.json")
    click.echo(f"wrote {out / 'panel.csv'} ({days} days x {currencies} currencies)")


# ---------------------------------------------------------------------------
# fit-marginals
# ---------------------------------------------------------------------------


@main.command("fit-marginals")
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--exclusions", "exclusions_path",
              type=click.Path(exists=True, dir_okay=False))
@click.option("--horizon", default=126, show_default=True, type=int,
              help="Window length in trading days (126 = 6 months, 252 = 1 year).")
@click.option("--stride", default=21, show_default=True, type=int)
@click.option("--k-grid", "k_grid_text", default=None, help="lo:hi:n geometric grid")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--figures/--no-figures", "render", default=True, show_default=True)
def fit_marginals(input_path, exclusions_path, horizon, stride, k_grid_text, out_dir,
                  render):
    """Rolling l.g.g.d. and LogNormal marginal fits with K-S rejection table."""
    params = dict(input=input_path, exclusions=exclusions_path, horizon=horizon,
                  stride=stride, k_grid=k_grid_text)
    k_grid = _parse_k_grid(k_grid_text)
    try:
        panel = _load_input_panel(input_path, exclusions_path)
    except (ValueError, OSError, KeyError) as exc:
        _fail_input(str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    comment = _provenance("fit-marginals", params)

    records = []
    tallies = {}
    attempts = 0
    for i in range(horizon, len(panel.dates), stride):
        date = panel.dates[i]
        for ccy in panel.currencies:
            attempts += 1
            try:
                window = extract_window(panel, date, horizon, [ccy])
            except ValueError:
                continue
            y = window.returns[:, 0]
            tally = tallies.setdefault(ccy, {"n": 0, "lggd": 0, "lognormal": 0})
            try:
                lggd = marginals.fit_lggd(y, k_grid)
                mu, sd = marginals.fit_lognormal(y)
            except ValueError as exc:
                click.echo(f"warning: {ccy} @ {date}: {exc}", err=True)
                continue
            ks_l = marginals.ks_test(y, lambda x: marginals.lggd_cdf(x, lggd.params))
            ks_n = marginals.ks_test(y, lambda x: norm.cdf(x, loc=mu, scale=sd))
            tally["n"] += 1
            tally["lggd"] += int(ks_l.reject_at_5pct)
            tally["lognormal"] += int(ks_n.reject_at_5pct)
            base = {"currency": ccy, "end_date": date.isoformat(),
                    "horizon_days": horizon}
            records.append(
                dict(base, model="lggd", k=lggd.params.k, u=lggd.params.u,
                     b=lggd.params.b, loglik=lggd.loglik,
                     ks_stat=ks_l.statistic, ks_p=ks_l.p_value)
            )
            ll_norm = float(
                np.sum(-0.5 * ((y - mu) / sd) ** 2 - np.log(sd) - 0.5 * np.log(2 * np.pi))
            )
            records.append(
                dict(base, model="lognormal", mu=mu, sigma=sd, loglik=ll_norm,
                     ks_stat=ks_n.statistic, ks_p=ks_n.p_value)
            )
    if not records:
        click.echo("error: no window could be fitted", err=True)
        sys.exit(EXIT_NUMERIC if attempts else EXIT_INPUT)
    fits_path = out / f"marginal_fits_{horizon}.jsonl"
    with open(fits_path, "w", encoding="utf-8") as fh:
        fh.write(f"# {comment}\n")
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    table_rows = [
        [ccy, horizon, t["n"],
         _fmt(t["lognormal"] / t["n"]) if t["n"] else _fmt(0.0),
         _fmt(t["lggd"] / t["n"]) if t["n"] else _fmt(0.0)]
        for ccy, t in sorted(tallies.items()) if t["n"]
    ]
    _write_csv(out / f"ks_rejections_{horizon}.csv",
               ["currency", "horizon_days", "n_windows",
                "lognormal_reject_rate", "lggd_reject_rate"],
               table_rows, comment)
    if render:
        figures.plot_ks_rejections(table_rows, out / f"ks_rejections_{horizon}.png")
    click.echo(f"wrote {fits_path} and {out / f'ks_rejections_{horizon}.csv'}")


# ---------------------------------------------------------------------------
# fit-copulas
# ---------------------------------------------------------------------------


def _run_rolling(panel, horizon, model, stride, seed, k_grid, workers=1):
    def progress(step, total, date):
        click.echo(f"  [{model}] window {step + 1}/{total} @ {date}", err=True)

    return portfolio.rolling_fit(
        panel, horizon, model, refit_stride=stride, seed=seed, k_grid=k_grid,
        progress=progress, workers=workers,
    )


@main.command("fit-copulas")
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--exclusions", "exclusions_path",
              type=click.Path(exists=True, dir_okay=False))
@click.option("--horizon", default=126, show_default=True, type=int,
              help="Window length in trading days (126 = 6 months, 252 = 1 year).")
@click.option("--model", default="cfg", show_default=True,
              type=click.Choice(["cfg", "cg", "opc", "all"]))
@click.option("--stride", default=21, show_default=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--k-grid", "k_grid_text", default=None)
@click.option("--workers", default=1, show_default=True, type=int,
              help="Process pool size for window fits (results are identical "
                   "for any value).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--figures/--no-figures", "render", default=True, show_default=True)
def fit_copulas(input_path, exclusions_path, horizon, model, stride, seed,
                k_grid_text, workers, out_dir, render):
    """Rolling mixture-copula fits per basket side; AIC comparison when
    several models are requested."""
    params = dict(input=input_path, exclusions=exclusions_path, horizon=horizon,
                  model=model, stride=stride, seed=seed, k_grid=k_grid_text)
    k_grid = _parse_k_grid(k_grid_text)
    try:
        panel = _load_input_panel(input_path, exclusions_path)
    except (ValueError, OSError, KeyError) as exc:
        _fail_input(str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    comment = _provenance("fit-copulas", params)
    models = [estimation.Model(model)] if model != "all" else list(estimation.Model)

    results = {}
    for m in models:
        result = _run_rolling(panel, horizon, m, stride, seed, k_grid, workers)
        for skip in result.skipped:
            click.echo(f"warning: skipped {skip.date} ({skip.side}): {skip.reason}",
                       err=True)
        if not result.high and not result.low:
            click.echo(f"error: every window failed for model {m.value}", err=True)
            sys.exit(EXIT_NUMERIC)
        results[m] = result
        fits_path = out / f"fits_{m.value}_{horizon}.jsonl"
        with open(fits_path, "w", encoding="utf-8") as fh:
            fh.write(f"# {comment}\n")
            for side, fits in result.fits_by_side().items():
                for fit in fits:
                    fh.write(json.dumps(fit.to_record(side), sort_keys=True) + "\n")
        click.echo(f"wrote {fits_path}")
        if render and m in (estimation.Model.CFG, estimation.Model.CG):
            figures.plot_mixture_weights(
                result.fits_by_side(), out / f"mixture_weights_{m.value}_{horizon}.png"
            )

    if len(models) > 1:
        rows, plot_rows = [], []
        by_key = {
            (m, side, fit.end_date): fit
            for m, result in results.items()
            for side, fits in result.fits_by_side().items()
            for fit in fits
        }
        dates = sorted({k[2] for k in by_key})
        for date in dates:
            for side in (portfolio.HIGH_IR, portfolio.LOW_IR):
                aic = {m: by_key[(m, side, date)].aic
                       for m in models if (m, side, date) in by_key}
                if estimation.Model.CFG not in aic:
                    continue
                cg = aic.get(estimation.Model.CG)
                opc = aic.get(estimation.Model.OPC)
                cg_diff = None if cg is None else cg - aic[estimation.Model.CFG]
                opc_diff = None if opc is None else opc - aic[estimation.Model.CFG]
                rows.append([date.isoformat(), side,
                             "" if cg_diff is None else _fmt(cg_diff),
                             "" if opc_diff is None else _fmt(opc_diff)])
                plot_rows.append({"date": date, "side": side,
                                  "cg_minus_cfg": cg_diff, "opc_minus_cfg": opc_diff})
        comparison = out / f"aic_comparison_{horizon}.csv"
        _write_csv(comparison, ["date", "side", "cg_minus_cfg", "opc_minus_cfg"],
                   rows, comment)
        click.echo(f"wrote {comparison}")
        if render and plot_rows:
            figures.plot_aic_differences(plot_rows, out / f"aic_differences_{horizon}.png")


# ---------------------------------------------------------------------------
# tail-dependence
# ---------------------------------------------------------------------------


@main.command("tail-dependence")
@click.option("--input", "fits_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--figures/--no-figures", "render", default=True, show_default=True)
def tail_dependence(fits_path, out_dir, render):
    """Per-date upper/lower tail dependence from a fits JSONL file."""
    params = dict(input=fits_path)
    try:
        fits_by_side = estimation.read_fits_jsonl(fits_path)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        _fail_input(f"cannot read fits file {fits_path}: {exc}")
    if not fits_by_side:
        _fail_input(f"fits file {fits_path} holds no records")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    series_by_side = {
        side: taildep.td_series(fits, basket_side=side)
        for side, fits in fits_by_side.items()
    }
    rows = []
    for side, series in sorted(series_by_side.items()):
        for date, up, low in zip(series.dates, series.upper, series.lower):
            rows.append([date.isoformat(), side, _fmt(up), _fmt(low)])
    rows.sort(key=lambda r: (r[0], r[1]))
    td_path = out / "td_series.csv"
    _write_csv(td_path, ["date", "basket", "upper_td", "lower_td"], rows,
               _provenance("tail-dependence", params))
    click.echo(f"wrote {td_path}")
    if render:
        figures.plot_tail_dependence(series_by_side, out / "tail_dependence.png")


# ---------------------------------------------------------------------------
# backtest
# ---------------------------------------------------------------------------


@main.command()
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--exclusions", "exclusions_path",
              type=click.Path(exists=True, dir_okay=False))
@click.option("--fits", "fits_path", type=click.Path(dir_okay=False),
              help="Precomputed fits JSONL; fitted in-run when omitted.")
@click.option("--horizon", default=126, show_default=True, type=int,
              help="Window length in trading days (126 = 6 months, 252 = 1 year).")
@click.option("--model", default="cfg", show_default=True,
              type=click.Choice(["cfg", "cg", "opc"]))
@click.option("--stride", default=21, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--k-grid", "k_grid_text", default=None)
@click.option("--workers", default=1, show_default=True, type=int)
@click.option("--adjust-rule", default="product", show_default=True,
              type=click.Choice(list(portfolio.ADJUST_RULES)))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--figures/--no-figures", "render", default=True, show_default=True)
def backtest(input_path, exclusions_path, fits_path, horizon, model, stride, seed,
             k_grid_text, workers, adjust_rule, out_dir, render):
    """Monthly HML carry returns with tail-exposure adjustments."""
    params = dict(input=input_path, exclusions=exclusions_path, fits=fits_path,
                  horizon=horizon, model=model, stride=stride, seed=seed,
                  k_grid=k_grid_text, adjust_rule=adjust_rule)
    try:
        panel = _load_input_panel(input_path, exclusions_path)
    except (ValueError, OSError, KeyError) as exc:
        _fail_input(str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    comment = _provenance("backtest", params)

    if fits_path:
        try:
            fits_by_side = estimation.read_fits_jsonl(fits_path)
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            _fail_input(f"cannot read fits file {fits_path}: {exc}")
    else:
        result = _run_rolling(panel, horizon, estimation.Model(model), stride, seed,
                              _parse_k_grid(k_grid_text), workers)
        for skip in result.skipped:
            click.echo(f"warning: skipped {skip.date} ({skip.side}): {skip.reason}",
                       err=True)
        if not result.high or not result.low:
            click.echo("error: no successful window fits", err=True)
            sys.exit(EXIT_NUMERIC)
        fits_by_side = result.fits_by_side()
    for side in (portfolio.HIGH_IR, portfolio.LOW_IR):
        if side not in fits_by_side or not fits_by_side[side]:
            _fail_input(f"fits are missing the {side} side")

    series = {side: taildep.td_series(fits, basket_side=side)
              for side, fits in fits_by_side.items()}

    month_ends = portfolio.monthly_return_dates(panel)
    first_fit = max(min(s.dates) for s in series.values())
    open_dates = [d for d in month_ends if d >= first_fit]
    if len(open_dates) < 2:
        _fail_input(
            f"tail dependence coverage starts {first_fit}; no monthly position "
            "can be opened after that date"
        )
    try:
        snapshots = {d: portfolio.build_baskets(panel, d) for d in open_dates[:-1]}
        returns = portfolio.carry_returns(panel, open_dates, baskets=snapshots)
        adjusted = portfolio.adjust_returns(
            returns, series[portfolio.HIGH_IR], series[portfolio.LOW_IR],
            rule=adjust_rule,
        )
    except ValueError as exc:
        _fail_input(str(exc))

    basket_rows = [
        [d.isoformat(), side, "|".join(getattr(snapshots[d], side))]
        for d in open_dates[:-1]
        for side in (portfolio.HIGH_IR, portfolio.LOW_IR)
    ]
    _write_csv(out / "baskets.csv", ["date", "side", "currencies"], basket_rows, comment)
    _write_csv(
        out / "returns.csv", ["date", "high", "low", "hml"],
        [[d.isoformat(), _fmt(h), _fmt(l), _fmt(m)]
         for d, h, l, m in zip(returns.dates, returns.high_leg, returns.low_leg,
                               returns.hml)],
        comment,
    )
    cum_raw, cum_down, cum_up = adjusted.cum_raw, adjusted.cum_down, adjusted.cum_up
    _write_csv(
        out / "adjusted.csv",
        ["date", "raw", "downside_adj", "upside_adj", "cum_raw", "cum_down", "cum_up"],
        [[d.isoformat(), _fmt(r), _fmt(dn), _fmt(up), _fmt(cr), _fmt(cd), _fmt(cu)]
         for d, r, dn, up, cr, cd, cu in zip(
             adjusted.dates, adjusted.raw, adjusted.downside_adj, adjusted.upside_adj,
             cum_raw, cum_down, cum_up)],
        comment,
    )
    raw = np.array(adjusted.raw)
    summary = {
        "config_hash": _config_hash("backtest", params),
        "n_months": len(adjusted.dates),
        "mean_raw": float(raw.mean()),
        "sd_raw": float(raw.std()),
        "cum_raw": float(cum_raw[-1]),
        "cum_down": float(cum_down[-1]),
        "cum_up": float(cum_up[-1]),
    }
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    click.echo(f"wrote {out / 'returns.csv'}, {out / 'adjusted.csv'}, "
               f"{out / 'baskets.csv'}, {out / 'summary.json'}")
    if render:
        figures.plot_cumulative_returns(adjusted, out / "cumulative_returns.png")
        figures.plot_tail_dependence(series, out / "tail_dependence.png")


if __name__ == "__main__":
    main()

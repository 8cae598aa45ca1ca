"""Carry-trade portfolio construction and tail-exposure-adjusted returns.

Currencies are ranked daily by the forward/spot ratio; the round(n/5)
smallest ratios (highest foreign rates) form the high-interest-rate basket
and the round(n/5) largest the low-interest-rate basket, sizes clipped to
[2, 6]. Rolling window fits run the two-stage estimation per basket side on
a refit stride. Monthly positions are held to the next month-end; the HML
return is the high leg minus the low leg. Adjusted returns scale the raw
series by (1 -/+ tail dependence) factors from both baskets.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from . import estimation
from .panel import QuotePanel, carry_signal, extract_window, month_end_dates
from .taildep import TailDependenceSeries

HIGH_IR = "high_ir"
LOW_IR = "low_ir"

MIN_BASKET, MAX_BASKET = 2, 6

ADJUST_RULES = ("product", "max")


@dataclass(frozen=True)
class BasketSnapshot:
    date: dt.date
    high_ir: tuple
    low_ir: tuple

    def __post_init__(self):
        if set(self.high_ir) & set(self.low_ir):
            raise ValueError("baskets must be disjoint")


@dataclass(frozen=True)
class CarryReturns:
    """Monthly basket log returns; hml = high_leg - low_leg elementwise."""

    dates: tuple
    hml: tuple
    high_leg: tuple
    low_leg: tuple

    def __post_init__(self):
        if not (len(self.dates) == len(self.hml) == len(self.high_leg) == len(self.low_leg)):
            raise ValueError("return series lengths differ")
        for h, l, m in zip(self.high_leg, self.low_leg, self.hml):
            if abs((h - l) - m) > 1e-12:
                raise ValueError("hml must equal high_leg - low_leg")


@dataclass(frozen=True)
class AdjustedReturns:
    dates: tuple
    raw: tuple
    downside_adj: tuple
    upside_adj: tuple

    def __post_init__(self):
        if not (len(self.dates) == len(self.raw) == len(self.downside_adj) == len(self.upside_adj)):
            raise ValueError("adjusted series lengths differ")

    @property
    def cum_raw(self) -> np.ndarray:
        return np.cumsum(self.raw)

    @property
    def cum_down(self) -> np.ndarray:
        return np.cumsum(self.downside_adj)

    @property
    def cum_up(self) -> np.ndarray:
        return np.cumsum(self.upside_adj)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def build_baskets(panel: QuotePanel, date: dt.date) -> BasketSnapshot:
    """Rank by carry signal and split off the two extreme quintile baskets.

    Low forward/spot ratio marks a high foreign rate, so the high-IR basket
    takes the smallest ratios. Ties at either boundary go to the
    lexicographically smaller currency code, which makes the ranking total
    and the construction deterministic.
    """
    signals = carry_signal(panel, date)
    n = len(signals)
    if n < 4:
        raise ValueError(f"only {n} available currencies at {date}; need >= 4")
    size = min(MAX_BASKET, max(MIN_BASKET, _round_half_up(n / 5)))
    asc = sorted(signals, key=lambda c: (signals[c], c))
    desc = sorted(signals, key=lambda c: (-signals[c], c))
    return BasketSnapshot(date=date, high_ir=tuple(asc[:size]), low_ir=tuple(desc[:size]))


@dataclass(frozen=True)
class SkipRecord:
    date: dt.date
    side: str
    reason: str


@dataclass(frozen=True)
class RollingFitResult:
    high: tuple
    low: tuple
    skipped: tuple

    def fits_by_side(self) -> dict:
        return {HIGH_IR: list(self.high), LOW_IR: list(self.low)}


def _fit_one_side(panel, date, i, horizon_days, model, side, currencies, seed, k_grid):
    """One (date, side) window job; seeded deterministically, returns a
    (side, fit-or-None, skip-or-None) triple so results merge in date order."""
    side_seed = int(
        np.random.SeedSequence(entropy=seed, spawn_key=(i, 0 if side == HIGH_IR else 1))
        .generate_state(1)[0]
    )
    try:
        window = extract_window(panel, date, horizon_days, currencies)
        pseudo = estimation.stage1_fit(window, k_grid)
        fit = estimation.stage2_fit(pseudo, model, seed=side_seed)
    except (ValueError, KeyError) as exc:
        return side, None, SkipRecord(date, side, str(exc))
    return side, fit, None


def rolling_fit(
    panel: QuotePanel,
    horizon_days: int,
    model,
    refit_stride: int = 1,
    seed: int = 0,
    k_grid=None,
    progress=None,
    workers: int = 1,
) -> RollingFitResult:
    """Refit both baskets on a stride of trading dates.

    Basket membership is fixed at each window's end date. Dates where a
    side cannot be fitted (thin universe, incomplete history, degenerate
    marginals) are recorded and skipped; the run continues. Per-(date, side)
    seeds are spawned deterministically from the base seed, so the result
    does not depend on ``workers``; jobs fan out over a process pool when
    workers > 1 and are merged back in date order.
    """
    if refit_stride < 1:
        raise ValueError("refit_stride must be >= 1")
    model = estimation.Model(model)
    fits = {HIGH_IR: [], LOW_IR: []}
    skipped = []
    jobs = []
    indices = range(horizon_days, len(panel.dates), refit_stride)
    for i in indices:
        date = panel.dates[i]
        try:
            baskets = build_baskets(panel, date)
        except (ValueError, KeyError) as exc:
            skipped.append(SkipRecord(date, "both", str(exc)))
            continue
        for side, currencies in ((HIGH_IR, baskets.high_ir), (LOW_IR, baskets.low_ir)):
            jobs.append((panel, date, i, horizon_days, model, side, currencies, seed, k_grid))

    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_fit_one_side, *zip(*jobs))) if jobs else []
        for step, (side, fit, skip) in enumerate(results):
            if progress is not None:
                progress(step, len(jobs), jobs[step][1])
            (fits[side].append(fit) if fit is not None else skipped.append(skip))
    else:
        for step, job in enumerate(jobs):
            if progress is not None:
                progress(step, len(jobs), job[1])
            side, fit, skip = _fit_one_side(*job)
            (fits[side].append(fit) if fit is not None else skipped.append(skip))
    return RollingFitResult(
        high=tuple(fits[HIGH_IR]), low=tuple(fits[LOW_IR]), skipped=tuple(skipped)
    )


def carry_returns(panel: QuotePanel, monthly_dates, baskets=None) -> CarryReturns:
    """Monthly carry legs held from each date to the next in the list.

    Each leg is the equal-weighted mean over its basket of the log payoff
    ln(F_t / S_{t+1m}); shorting the low-IR basket enters through
    hml = high_leg - low_leg. Positions are dated by their opening date.
    ``baskets`` may supply precomputed BasketSnapshots keyed by date
    (membership is otherwise ranked fresh at each opening date).
    """
    monthly_dates = list(monthly_dates)
    if len(monthly_dates) < 2:
        raise ValueError("need at least two monthly dates")
    dates_out, hml, high_leg, low_leg = [], [], [], []
    for open_date, settle_date in zip(monthly_dates, monthly_dates[1:]):
        i_open = panel.date_index(open_date)
        i_settle = panel.date_index(settle_date)
        snap = baskets[open_date] if baskets is not None else build_baskets(panel, open_date)
        legs = {}
        for side, currencies in ((HIGH_IR, snap.high_ir), (LOW_IR, snap.low_ir)):
            payoffs = []
            for ccy in currencies:
                j = panel.currency_index(ccy)
                fwd = panel.forward1m[i_open, j]
                settle = panel.spot[i_settle, j]
                if not (np.isfinite(fwd) and np.isfinite(settle)):
                    raise ValueError(
                        f"missing settlement price for {ccy} over {open_date} -> {settle_date}"
                    )
                payoffs.append(math.log(fwd / settle))
            legs[side] = float(np.mean(payoffs))
        dates_out.append(open_date)
        high_leg.append(legs[HIGH_IR])
        low_leg.append(legs[LOW_IR])
        hml.append(legs[HIGH_IR] - legs[LOW_IR])
    return CarryReturns(
        dates=tuple(dates_out), hml=tuple(hml),
        high_leg=tuple(high_leg), low_leg=tuple(low_leg),
    )


def monthly_return_dates(panel: QuotePanel) -> list:
    """Month-end trading dates of the panel (opening/settlement calendar)."""
    return month_end_dates(panel.dates)


def _lookup_td(series: TailDependenceSeries, date: dt.date) -> tuple[float, float]:
    """Tail dependence at the nearest fit date at or before ``date``."""
    idx = None
    for i, d in enumerate(series.dates):
        if d <= date:
            idx = i
        else:
            break
    if idx is None:
        raise ValueError(
            f"no {series.basket_side or 'tail dependence'} fit on or before {date}"
        )
    return series.upper[idx], series.lower[idx]


def adjust_returns(
    returns: CarryReturns,
    high_td: TailDependenceSeries,
    low_td: TailDependenceSeries,
    rule: str = "product",
) -> AdjustedReturns:
    """Scale monthly returns by the baskets' tail-dependence exposures.

    Downside: multiply by one minus the high basket's upper and the low
    basket's lower tail dependence; upside: by one plus the high basket's
    lower and the low basket's upper tail dependence. The default rule
    applies both factors multiplicatively; rule="max" uses a single
    1 -/+ max(...) factor instead.
    """
    if rule not in ADJUST_RULES:
        raise ValueError(f"unknown adjust rule {rule!r}; expected one of {ADJUST_RULES}")
    down, up = [], []
    for date, raw in zip(returns.dates, returns.hml):
        up_h, low_h = _lookup_td(high_td, date)
        up_l, low_l = _lookup_td(low_td, date)
        for v in (up_h, low_h, up_l, low_l):
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"tail dependence outside [0,1] at {date}: {v}")
        if rule == "product":
            down.append(raw * (1.0 - up_h) * (1.0 - low_l))
            up.append(raw * (1.0 + low_h) * (1.0 + up_l))
        else:
            down.append(raw * (1.0 - max(up_h, low_l)))
            up.append(raw * (1.0 + max(low_h, up_l)))
    return AdjustedReturns(
        dates=returns.dates, raw=returns.hml,
        downside_adj=tuple(down), upside_adj=tuple(up),
    )

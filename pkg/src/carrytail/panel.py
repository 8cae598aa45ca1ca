"""Quote panel ingestion: load, align, clean and window spot/forward data.

The input CSV is long-format with header ``date,currency,spot,forward_1m``,
one row per (date, currency), ISO-8601 dates, prices quoted per USD.
Availability marks the tradable universe: a currency is available from its
first observed date onward unless an exclusion rule masks it; days with a
missing quote inside that range are populated by ``forward_fill`` from the
previous close. All operations return new panels; a QuotePanel is never
mutated after construction.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, replace

import numpy as np

CSV_HEADER = ["date", "currency", "spot", "forward_1m"]
EXCLUSION_HEADER = ["currency", "from_date", "to_date", "reason"]


@dataclass(frozen=True)
class QuotePanel:
    """Aligned daily spot and 1-month-forward prices (date x currency)."""

    dates: tuple
    currencies: tuple
    spot: np.ndarray
    forward1m: np.ndarray
    available: np.ndarray

    def __post_init__(self):
        n, m = len(self.dates), len(self.currencies)
        for name in ("spot", "forward1m"):
            arr = getattr(self, name)
            if arr.shape != (n, m):
                raise ValueError(f"{name} must have shape {(n, m)}, got {arr.shape}")
        if self.available.shape != (n, m):
            raise ValueError("available mask shape mismatch")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")
        for name in ("spot", "forward1m"):
            arr = getattr(self, name)
            bad = self.available & np.isfinite(arr) & (arr <= 0)
            if np.any(bad):
                raise ValueError(f"non-positive {name} price at an available cell")
        for arr in (self.spot, self.forward1m):
            arr.setflags(write=False)
        self.available.setflags(write=False)

    def date_index(self, date: dt.date) -> int:
        try:
            return self._index()[date]
        except KeyError:
            raise KeyError(f"date {date} not in panel") from None

    def _index(self) -> dict:
        if not hasattr(self, "_idx"):
            object.__setattr__(self, "_idx", {d: i for i, d in enumerate(self.dates)})
        return self._idx

    def currency_index(self, code: str) -> int:
        try:
            return self.currencies.index(code)
        except ValueError:
            raise KeyError(f"unknown currency {code!r}") from None


@dataclass(frozen=True)
class ExclusionRule:
    """Masks a currency out of the universe over an optional date range."""

    currency: str
    from_date: dt.date | None = None
    to_date: dt.date | None = None
    reason: str = ""

    def __post_init__(self):
        if self.from_date and self.to_date and self.from_date > self.to_date:
            raise ValueError(
                f"exclusion range inverted for {self.currency}: "
                f"{self.from_date} > {self.to_date}"
            )


@dataclass(frozen=True)
class LogReturnWindow:
    """Daily log returns of the 1-month forward price over a trading window."""

    end_date: dt.date
    horizon_days: int
    currencies: tuple
    returns: np.ndarray

    def __post_init__(self):
        if self.horizon_days < 1:
            raise ValueError("horizon_days must be positive")
        if self.returns.shape != (self.horizon_days, len(self.currencies)):
            raise ValueError(
                f"returns must have shape {(self.horizon_days, len(self.currencies))}, "
                f"got {self.returns.shape}"
            )
        if np.any(~np.isfinite(self.returns)):
            raise ValueError("window returns must be finite")
        self.returns.setflags(write=False)


def _parse_date(text: str, line_no: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise ValueError(f"line {line_no}: invalid ISO date {text!r}") from None


def _parse_price(text: str, line_no: int, col: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise ValueError(f"line {line_no}: invalid {col} price {text!r}") from None
    if not math.isfinite(val) or val <= 0:
        raise ValueError(f"line {line_no}: non-positive {col} price {text!r}")
    return val


def load_panel(csv_path) -> QuotePanel:
    """Load a long-format quote CSV into an aligned panel.

    Dates come out sorted ascending; duplicate (date, currency) rows and
    non-positive prices are rejected with the offending line number.
    Availability starts at each currency's first observed date.
    """
    rows = {}
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = None
        header_line = 0
        for line_no, row in enumerate(reader, start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            header = [h.strip().lower() for h in row]
            header_line = line_no
            break
        if header is None:
            raise ValueError(f"{csv_path}: empty file")
        if header != CSV_HEADER:
            raise ValueError(
                f"{csv_path}: malformed header {header!r}, expected {CSV_HEADER!r}"
            )
        for line_no, row in enumerate(reader, start=header_line + 1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise ValueError(f"line {line_no}: expected 4 fields, got {len(row)}")
            date = _parse_date(row[0], line_no)
            ccy = row[1].strip()
            if not ccy:
                raise ValueError(f"line {line_no}: empty currency code")
            spot = _parse_price(row[2], line_no, "spot")
            fwd = _parse_price(row[3], line_no, "forward_1m")
            key = (date, ccy)
            if key in rows:
                raise ValueError(
                    f"line {line_no}: duplicate entry for ({date}, {ccy})"
                )
            rows[key] = (spot, fwd)
    if not rows:
        raise ValueError(f"{csv_path}: no data rows")
    dates = tuple(sorted({d for d, _ in rows}))
    currencies = tuple(sorted({c for _, c in rows}))
    n, m = len(dates), len(currencies)
    spot = np.full((n, m), np.nan)
    fwd = np.full((n, m), np.nan)
    observed = np.zeros((n, m), dtype=bool)
    d_idx = {d: i for i, d in enumerate(dates)}
    c_idx = {c: j for j, c in enumerate(currencies)}
    for (date, ccy), (s, f) in rows.items():
        i, j = d_idx[date], c_idx[ccy]
        spot[i, j], fwd[i, j] = s, f
        observed[i, j] = True
    available = np.maximum.accumulate(observed, axis=0)
    return QuotePanel(dates, currencies, spot, fwd, available)


def forward_fill(panel: QuotePanel) -> QuotePanel:
    """Carry the previous close into missing price cells.

    Availability is untouched (it tracks the tradable universe, not data
    gaps), so masking and filling commute; idempotent by construction.
    """
    spot = panel.spot.copy()
    fwd = panel.forward1m.copy()
    for arr in (spot, fwd):
        for j in range(arr.shape[1]):
            col = arr[:, j]
            last = np.nan
            for i in range(col.size):
                if np.isfinite(col[i]):
                    last = col[i]
                elif np.isfinite(last):
                    col[i] = last
    return replace(panel, spot=spot, forward1m=fwd)


def apply_exclusions(panel: QuotePanel, rules) -> QuotePanel:
    """Mask availability over each rule's (inclusive) date range."""
    available = panel.available.copy()
    n = len(panel.dates)
    for rule in rules:
        j = panel.currency_index(rule.currency)
        i0 = 0
        i1 = n
        if rule.from_date is not None:
            i0 = int(np.searchsorted(np.array(panel.dates), rule.from_date, side="left"))
        if rule.to_date is not None:
            i1 = int(np.searchsorted(np.array(panel.dates), rule.to_date, side="right"))
        available[i0:i1, j] = False
    return replace(panel, available=available)


def load_exclusions(csv_path) -> list:
    """Read exclusion rules from ``currency,from_date,to_date,reason`` CSV;
    empty from/to fields mean unbounded."""
    rules = []
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        while header and header[0].lstrip().startswith("#"):
            header = next(reader)
        header = [h.strip().lower() for h in header]
        if header != EXCLUSION_HEADER:
            raise ValueError(
                f"{csv_path}: malformed header {header!r}, expected {EXCLUSION_HEADER!r}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise ValueError(f"line {line_no}: expected 4 fields, got {len(row)}")
            from_date = _parse_date(row[1], line_no) if row[1].strip() else None
            to_date = _parse_date(row[2], line_no) if row[2].strip() else None
            rules.append(ExclusionRule(row[0].strip(), from_date, to_date, row[3]))
    return rules


def carry_signal(panel: QuotePanel, date: dt.date) -> dict:
    """Forward/spot ratio per available currency at one date.

    The ratio proxies the interest differential e^{(r - r^f)(T - t)}: a low
    ratio flags a high foreign rate. Raw ratios are returned; ordering into
    baskets is the portfolio layer's job.
    """
    i = panel.date_index(date)
    out = {}
    for j, ccy in enumerate(panel.currencies):
        if panel.available[i, j] and np.isfinite(panel.spot[i, j]) and np.isfinite(
            panel.forward1m[i, j]
        ):
            out[ccy] = float(panel.forward1m[i, j] / panel.spot[i, j])
    if len(out) < 2:
        raise ValueError(f"fewer than 2 available currencies at {date}")
    return out


def extract_window(
    panel: QuotePanel, end_date: dt.date, horizon_days: int, currencies
) -> LogReturnWindow:
    """Log returns of the 1-month forward over the horizon ending at end_date.

    Requires horizon_days + 1 consecutive panel dates with every requested
    currency available and priced (run forward_fill first if the data has
    gaps); raises naming the first deficient currency.
    """
    i_end = panel.date_index(end_date)
    i_start = i_end - horizon_days
    if i_start < 0:
        raise ValueError(
            f"insufficient history: window of {horizon_days} days before "
            f"{end_date} starts before the panel"
        )
    currencies = tuple(currencies)
    cols = [panel.currency_index(c) for c in currencies]
    fwd = panel.forward1m[i_start : i_end + 1, cols]
    avail = panel.available[i_start : i_end + 1, cols]
    for pos, ccy in enumerate(currencies):
        if not np.all(avail[:, pos]):
            raise ValueError(f"currency {ccy} not available over the full window")
        if np.any(~np.isfinite(fwd[:, pos])):
            raise ValueError(f"currency {ccy} has unfilled prices in the window")
    returns = np.diff(np.log(fwd), axis=0)
    return LogReturnWindow(end_date, horizon_days, currencies, returns)


def month_end_dates(dates) -> list:
    """Last trading date of each calendar month present in the sequence."""
    out = []
    for date in dates:
        if out and (out[-1].year, out[-1].month) == (date.year, date.month):
            out[-1] = date
        else:
            out.append(date)
    return out


def write_panel_csv(panel: QuotePanel, path, comment: str | None = None) -> None:
    """Serialize a panel back to the long-format CSV (observed cells only)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for i, date in enumerate(panel.dates):
            for j, ccy in enumerate(panel.currencies):
                if np.isfinite(panel.spot[i, j]) and np.isfinite(panel.forward1m[i, j]):
                    writer.writerow(
                        [date.isoformat(), ccy, repr(float(panel.spot[i, j])),
                         repr(float(panel.forward1m[i, j]))]
                    )

"""CSV ingestion of prices and universe metadata.

Price files are UTF-8 CSV with a header row, in one of two shapes detected
from the header:

* long form, exactly ``ticker,date,adjusted_close``;
* wide form, first column ``date`` and one column per ticker.

Universe files carry exactly ``ticker,market_cap,sector,book_value_per_share``.
Dates are ISO-8601 strings compared lexicographically; no calendar arithmetic
is performed.  Loading is strict: malformed rows raise with their line number,
while tickers violating universe rules (a gap or nonpositive price, a missing
cap/sector/book field) are dropped with a recorded reason so that
``len(input) == len(kept) + len(dropped)`` always holds.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError

PRICE_HEADER = ["ticker", "date", "adjusted_close"]
UNIVERSE_HEADER = ["ticker", "market_cap", "sector", "book_value_per_share"]

__all__ = [
    "PRICE_HEADER",
    "UNIVERSE_HEADER",
    "PricePanel",
    "UniverseSnapshot",
    "load_prices",
    "write_prices",
    "load_universe",
    "align",
]


@dataclass(frozen=True)
class PricePanel:
    """Tickers x dates matrix of adjusted close prices."""

    tickers: list[str]
    dates: list[str]
    prices: np.ndarray

    def __post_init__(self) -> None:
        if self.prices.shape != (len(self.tickers), len(self.dates)):
            raise DataError(
                f"price matrix shape {self.prices.shape} does not match "
                f"{len(self.tickers)} tickers x {len(self.dates)} dates")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise DataError("dates are not strictly increasing")
        if not np.all(self.prices > 0):
            raise DataError("price panel contains nonpositive values")


@dataclass(frozen=True)
class UniverseSnapshot:
    """Per-ticker market cap, sector label, and book value per share."""

    tickers: list[str]
    market_cap: dict[str, float]
    sector: dict[str, str]
    book_value: dict[str, float]
    cap_date: str = ""
    book_date: str = ""

    def restrict(self, tickers: list[str]) -> "UniverseSnapshot":
        kept = sorted(tickers)
        missing = [t for t in kept if t not in self.market_cap]
        if missing:
            raise DataError(f"tickers not in universe: {missing[:5]}")
        return UniverseSnapshot(
            tickers=kept,
            market_cap={t: self.market_cap[t] for t in kept},
            sector={t: self.sector[t] for t in kept},
            book_value={t: self.book_value[t] for t in kept},
            cap_date=self.cap_date, book_date=self.book_date)


def _read_rows(path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    """Header plus (line number, cells) for every data row."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        rows = [(reader.line_num, row) for row in reader if row]
    return [h.strip() for h in header], rows


def _parse_float(cell: str, path, line: int, column: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise DataError(
            f"{path}:{line}: cannot parse {column} value {cell!r}") from None


def _in_range(date: str, date_range) -> bool:
    if date_range is None:
        return True
    lo, hi = date_range
    return (lo is None or date >= lo) and (hi is None or date <= hi)


def load_prices(path, date_range=None):
    """Load a price panel, dropping tickers with gaps or nonpositive prices.

    Returns ``(panel, drops)`` where ``drops`` is a list of
    ``(ticker, reason)`` pairs.  ``date_range`` is an optional inclusive
    ``(start, end)`` pair of ISO date strings (either end may be None).
    """
    header, rows = _read_rows(path)
    if header == PRICE_HEADER:
        cells = {}
        for line, row in rows:
            if len(row) != 3:
                raise DataError(f"{path}:{line}: expected 3 columns, got {len(row)}")
            ticker, date, value = (c.strip() for c in row)
            if not _in_range(date, date_range):
                continue
            if (ticker, date) in cells:
                raise DataError(
                    f"{path}:{line}: duplicate row for {ticker} on {date}")
            cells[(ticker, date)] = ("" if value == "" else
                                     _parse_float(value, path, line, "adjusted_close"))
        tickers = sorted({t for t, _ in cells})
        dates = sorted({d for _, d in cells})
    elif header and header[0] == "date":
        tickers_in_file = header[1:]
        if len(set(tickers_in_file)) != len(tickers_in_file):
            raise DataError(f"{path}:1: duplicate ticker column in header")
        cells = {}
        dates_seen = []
        for line, row in rows:
            if len(row) != len(header):
                raise DataError(
                    f"{path}:{line}: expected {len(header)} columns, got {len(row)}")
            date = row[0].strip()
            if not _in_range(date, date_range):
                continue
            if date in dates_seen:
                raise DataError(f"{path}:{line}: duplicate date {date}")
            dates_seen.append(date)
            for ticker, value in zip(tickers_in_file, row[1:]):
                value = value.strip()
                cells[(ticker, date)] = ("" if value == "" else
                                         _parse_float(value, path, line, ticker))
        tickers = sorted(tickers_in_file)
        dates = sorted(dates_seen)
    else:
        raise DataError(
            f"{path}:1: unrecognized header {header!r}; expected "
            f"{PRICE_HEADER} (long form) or a leading 'date' column (wide form)")

    if not dates:
        raise DataError(f"{path}: no price rows in the requested date range")

    kept, drops, columns = [], [], []
    for t in tickers:
        series = [cells.get((t, d), "") for d in dates]
        gap = next((d for d, v in zip(dates, series) if v == ""), None)
        if gap is not None:
            drops.append((t, f"missing price on {gap}"))
            continue
        bad = next((d for d, v in zip(dates, series) if not v > 0), None)
        if bad is not None:
            drops.append((t, f"nonpositive price on {bad}"))
            continue
        kept.append(t)
        columns.append(series)
    if not kept:
        raise DataError(f"{path}: no tickers survive universe construction")
    panel = PricePanel(tickers=kept, dates=dates,
                       prices=np.array(columns, dtype=float))
    return panel, drops


def write_prices(panel: PricePanel, path) -> None:
    """Write a panel in long form; ``load_prices`` round-trips it exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PRICE_HEADER)
        for i, t in enumerate(panel.tickers):
            for j, d in enumerate(panel.dates):
                writer.writerow([t, d, repr(float(panel.prices[i, j]))])


def load_universe(path, cap_date: str = "", book_date: str = ""):
    """Load universe metadata, dropping tickers with missing fields.

    Tickers with zero or negative book value are retained; excluding them is
    a regression-stage decision.  Returns ``(universe, drops)``.
    """
    header, rows = _read_rows(path)
    if header != UNIVERSE_HEADER:
        raise DataError(
            f"{path}:1: unrecognized header {header!r}; expected {UNIVERSE_HEADER}")
    caps, sectors, books = {}, {}, {}
    drops, seen = [], set()
    for line, row in rows:
        if len(row) != 4:
            raise DataError(f"{path}:{line}: expected 4 columns, got {len(row)}")
        ticker, cap, sector, book = (c.strip() for c in row)
        if not ticker:
            raise DataError(f"{path}:{line}: empty ticker")
        if ticker in seen:
            raise DataError(f"{path}:{line}: duplicate ticker {ticker}")
        seen.add(ticker)
        missing = [name for name, cell in
                   (("market_cap", cap), ("sector", sector),
                    ("book_value_per_share", book)) if cell == ""]
        if missing:
            drops.append((ticker, f"missing {missing[0]}"))
            continue
        caps[ticker] = _parse_float(cap, path, line, "market_cap")
        sectors[ticker] = sector
        books[ticker] = _parse_float(book, path, line, "book_value_per_share")
    universe = UniverseSnapshot(
        tickers=sorted(caps), market_cap=caps, sector=sectors,
        book_value=books, cap_date=cap_date, book_date=book_date)
    return universe, drops


def align(panel: PricePanel, universe: UniverseSnapshot):
    """Restrict both inputs to their common tickers, in lexicographic order."""
    common = sorted(set(panel.tickers) & set(universe.tickers))
    if not common:
        raise DataError("price panel and universe share no tickers")
    index = {t: i for i, t in enumerate(panel.tickers)}
    sub = PricePanel(tickers=common, dates=list(panel.dates),
                     prices=panel.prices[[index[t] for t in common]])
    return sub, universe.restrict(common)

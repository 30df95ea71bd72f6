"""Regenerate the bundled synthetic fixtures and golden outputs.

Prices are simulated from the binary-tree engine with known per-ticker
volatility and growth targets, in day units (tau = 1), so tests can compare
recovered bubble ratios against the planted values.  Goldens are produced by
running the CLI itself on the fixtures.

Usage: python tools/make_fixtures.py
"""

from __future__ import annotations

import csv
import datetime as dt
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from bubbletree import TreeParams, mu_for_drift, simulate_walk, walk_to_prices  # noqa: E402
from bubbletree.cli import main as cli_main  # noqa: E402

DATA = ROOT / "tests" / "data"
GOLDEN = DATA / "golden"

N_DATES = 325  # yields K = 324 return columns
BASE_SEED = 20240

# ticker, sector, daily sigma, target kappa, s0, market cap, book per share
SPEC = [
    ("ACME", "Industrials", 0.020, 2.0, 55.0, 8.1e9, 14.2),
    ("BOLT", "Technology", 0.035, 1.0, 120.0, 6.3e10, 9.8),
    ("CRUX", "Technology", 0.050, 0.5, 18.0, 9.5e8, 3.1),
    ("DUNE", "Utilities", 0.012, 1.5, 74.0, 2.4e10, 31.0),
    ("EXON", "Industrials", 0.028, -0.5, 42.0, 3.3e9, 12.5),
    ("FLUX", "Technology", 0.045, 3.0, 9.0, 5.2e8, 0.0),
    ("GRIT", "Industrials", 0.018, 1.0, 66.0, 1.7e10, 22.4),
    ("HYDR", "Utilities", 0.015, 0.8, 88.0, 4.9e10, 40.3),
    ("IRIS", "Technology", 0.040, -1.0, 27.0, 1.2e9, -4.6),
    ("JOLT", "Industrials", 0.025, 2.5, 33.0, 2.8e9, 7.7),
    ("KELP", "Utilities", 0.010, 1.2, 101.0, 9.9e10, -12.0),
    ("LOOM", "Technology", 0.030, 0.0, 49.0, 7.4e9, 5.5),
]


def trading_dates(n: int) -> list[str]:
    out = []
    day = dt.date(2021, 1, 4)
    while len(out) < n:
        if day.weekday() < 5:
            out.append(day.isoformat())
        day += dt.timedelta(days=1)
    return out


def write_fixtures() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    dates = trading_dates(N_DATES)
    with open(DATA / "fixture_prices.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["ticker", "date", "adjusted_close"])
        for i, (ticker, _sector, sigma, kappa_target, s0, _cap, _book) in enumerate(SPEC):
            nu = kappa_target * sigma * sigma / 2.0
            params = TreeParams(sigma=sigma, mu=mu_for_drift(sigma, 1.0, nu),
                                tau=1.0, n_steps=N_DATES - 1, s0=s0)
            path = walk_to_prices(params, simulate_walk(params, BASE_SEED + i))
            for date, price in zip(dates, path.prices):
                writer.writerow([ticker, date, repr(float(price))])
    with open(DATA / "fixture_universe.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["ticker", "market_cap", "sector", "book_value_per_share"])
        for ticker, sector, _sigma, _k, _s0, cap, book in SPEC:
            writer.writerow([ticker, repr(float(cap)), sector, repr(float(book))])


def write_goldens() -> None:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        kdir = Path(tmp) / "kappa"
        rc = cli_main(["kappa", "--out-dir", str(kdir),
                       "--prices", str(DATA / "fixture_prices.csv"),
                       "--universe", str(DATA / "fixture_universe.csv"),
                       "--no-figures"])
        assert rc == 0, "kappa golden run failed"
        for name in ("summary.csv", "kappa_vanilla.csv", "kappa_demeaned.csv",
                     "kappa_logcap.csv", "kappa_cap.csv"):
            shutil.copy(kdir / name, GOLDEN / name)

        rdir = Path(tmp) / "regress"
        rc = cli_main(["regress", "--out-dir", str(rdir),
                       "--kappa-file", str(kdir / "kappa_vanilla.csv"),
                       "--universe", str(DATA / "fixture_universe.csv"),
                       "--prices", str(DATA / "fixture_prices.csv"),
                       "--no-figures"])
        assert rc == 0, "regress golden run failed"
        for name in ("regression_report.csv", "sector_counts.csv"):
            shutil.copy(rdir / name, GOLDEN / name)


if __name__ == "__main__":
    write_fixtures()
    write_goldens()
    print(f"fixtures and goldens written under {DATA}")

"""Cross-sectional OLS with named design columns and sector dummies.

Designs are assembled from per-ticker variable tables.  A ``sectors`` entry
in the variable list expands into one binary indicator column per distinct
sector label; each row of that block sums to exactly 1, so the block spans
the constant and requesting an intercept alongside a full sector block is a
collinearity error, not a silent fixup.

The solver uses a QR factorization (sector blocks with near-empty sectors are
too ill-conditioned for explicit normal equations).  R-squared is computed
against the mean of the regressand whenever a constant lies in the column
span (explicit intercept or a full sector block) and against zero otherwise;
the F statistic uses the matching total sum of squares and degrees of freedom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data_io import UniverseSnapshot
from .errors import DataError, DegreesOfFreedomError, RankError

__all__ = [
    "DesignMatrix",
    "RegressionResult",
    "build_design",
    "universe_variables",
    "ols",
    "filter_universe",
]

_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class DesignMatrix:
    """Named explanatory columns for a fixed ticker order."""

    tickers: list[str]
    columns: list[str]
    values: np.ndarray

    def __post_init__(self) -> None:
        n, k = self.values.shape
        if n != len(self.tickers) or k != len(self.columns):
            raise DataError(
                f"design shape {self.values.shape} does not match "
                f"{len(self.tickers)} tickers x {len(self.columns)} columns")


@dataclass(frozen=True)
class RegressionResult:
    names: list[str]
    estimates: np.ndarray
    stderr: np.ndarray
    tstats: np.ndarray
    r_squared: float
    adj_r_squared: float
    f_statistic: float
    f_dfn: int
    f_dfd: int
    n_obs: int
    n_params: int
    centered: bool
    residuals: np.ndarray


def universe_variables(universe: UniverseSnapshot,
                       snapshot_prices: Mapping[str, float] | None = None
                       ) -> dict[str, dict[str, float]]:
    """Per-ticker numeric variables derivable from a universe snapshot.

    Always provides ``ln_cap``.  When ``snapshot_prices`` maps tickers to a
    snapshot share price, also provides ``pb`` (price over book per share),
    ``bp`` (its inverse), and ``ln_pb`` where price and book are positive.
    """
    out: dict[str, dict[str, float]] = {"ln_cap": {}}
    for t in universe.tickers:
        c = universe.market_cap[t]
        if not c > 0:
            raise DataError(f"market cap for ticker {t} is not positive")
        out["ln_cap"][t] = math.log(c)
    if snapshot_prices is not None:
        out["pb"], out["bp"], out["ln_pb"] = {}, {}, {}
        for t in universe.tickers:
            if t not in snapshot_prices:
                continue
            price, book = snapshot_prices[t], universe.book_value[t]
            if book == 0:
                continue
            out["pb"][t] = price / book
            out["bp"][t] = book / price
            if book > 0 and price > 0:
                out["ln_pb"][t] = math.log(price / book)
    return out


def build_design(tickers: Sequence[str], variables: Sequence[str],
                 value_table: Mapping[str, Mapping[str, float]],
                 sectors: Mapping[str, str] | None = None,
                 intercept: bool = False) -> DesignMatrix:
    """Assemble a design matrix in declared column order.

    ``variables`` lists numeric variable names from ``value_table``; the
    special name ``"sectors"`` expands into the full indicator block.  An
    intercept column of ones is appended when ``intercept`` is set, which is
    rejected alongside a full sector block (the block already spans it).
    """
    tickers = list(tickers)
    if not tickers:
        raise DataError("empty ticker list")
    if intercept and "sectors" in variables:
        raise RankError(
            "intercept plus a full sector block is collinear: the sector "
            "indicators of each ticker already sum to 1")
    columns: list[str] = []
    cols: list[np.ndarray] = []
    for name in variables:
        if name == "sectors":
            if sectors is None:
                raise DataError("sector labels required for a sector block")
            missing = [t for t in tickers if not sectors.get(t)]
            if missing:
                raise DataError(f"no sector label for ticker {missing[0]}")
            for label in sorted({sectors[t] for t in tickers}):
                columns.append(f"sector:{label}")
                cols.append(np.array(
                    [1.0 if sectors[t] == label else 0.0 for t in tickers]))
        else:
            table = value_table.get(name)
            if table is None:
                raise DataError(f"unknown variable {name!r}")
            missing = [t for t in tickers if t not in table]
            if missing:
                raise DataError(
                    f"variable {name!r} missing for ticker {missing[0]}")
            columns.append(name)
            cols.append(np.array([float(table[t]) for t in tickers]))
    if intercept:
        columns.append("intercept")
        cols.append(np.ones(len(tickers)))
    if not cols:
        raise DataError("empty variable list")
    values = np.column_stack(cols)
    for j, name in enumerate(columns):
        if not np.any(values[:, j]):
            raise RankError(f"column {name!r} is identically zero")
    if np.linalg.matrix_rank(values) < len(columns):
        raise RankError(
            f"design with columns {columns} is rank deficient")
    return DesignMatrix(tickers=tickers, columns=columns, values=values)


def _constant_in_span(x: np.ndarray) -> bool:
    ones = np.ones(x.shape[0])
    coef, *_ = np.linalg.lstsq(x, ones, rcond=None)
    return bool(np.linalg.norm(x @ coef - ones) < 1e-8 * math.sqrt(x.shape[0]))


def ols(y: np.ndarray, design: DesignMatrix) -> RegressionResult:
    """Least-squares fit with classical (homoskedastic) standard errors."""
    x = design.values
    y = np.asarray(y, dtype=float).ravel()
    n, k = x.shape
    if y.shape != (n,):
        raise DataError(f"regressand has length {y.size}, design has {n} rows")
    if n <= k:
        raise DegreesOfFreedomError(
            f"{n} observations cannot identify {k} parameters")

    q, r = np.linalg.qr(x)
    diag = np.abs(np.diag(r))
    if diag.min() <= _RANK_RTOL * diag.max():
        raise RankError(f"design with columns {design.columns} is rank deficient")
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - x @ beta
    rss = float(resid @ resid)

    r_inv = np.linalg.solve(r, np.eye(k))
    s2 = rss / (n - k)
    stderr = np.sqrt(s2 * np.sum(r_inv * r_inv, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        tstats = np.where(stderr > 0, beta / stderr,
                          np.sign(beta) * np.inf)

    centered = _constant_in_span(x)
    if centered:
        tss = float(np.sum((y - y.mean()) ** 2))
        dfn = k - 1
    else:
        tss = float(y @ y)
        dfn = k
    exact_fit = rss <= 1e-20 * tss or rss == 0.0
    if exact_fit:
        r2 = 1.0
    else:
        r2 = 1.0 - rss / tss if tss > 0 else 0.0
    if centered:
        adj = 1.0 - (1.0 - r2) * (n - 1) / (n - k)
    else:
        adj = 1.0 - (1.0 - r2) * n / (n - k)
    if dfn <= 0:
        f_stat = math.nan
    elif exact_fit:
        f_stat = math.inf  # exact fit: report R^2 = 1 and a non-finite F
    else:
        f_stat = ((tss - rss) / dfn) / (rss / (n - k))
    return RegressionResult(
        names=list(design.columns), estimates=beta, stderr=stderr,
        tstats=tstats, r_squared=r2, adj_r_squared=adj, f_statistic=f_stat,
        f_dfn=dfn, f_dfd=n - k, n_obs=n, n_params=k, centered=centered,
        residuals=resid)


def filter_universe(universe: UniverseSnapshot):
    """Retain tickers with strictly positive book value.

    Returns ``(filtered, counts)`` where ``counts`` lists
    ``(sector, before, after)`` per sector, sorted by sector label.
    """
    kept = [t for t in universe.tickers if universe.book_value[t] > 0]
    before: dict[str, int] = {}
    after: dict[str, int] = {}
    for t in universe.tickers:
        before[universe.sector[t]] = before.get(universe.sector[t], 0) + 1
    for t in kept:
        after[universe.sector[t]] = after.get(universe.sector[t], 0) + 1
    counts = [(s, before[s], after.get(s, 0)) for s in sorted(before)]
    if not kept:
        raise DataError("no tickers with positive book value")
    return universe.restrict(kept), counts

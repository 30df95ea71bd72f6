"""Return panels, benchmark adjustments, and the bubble-ratio estimator.

The bubble ratio of a return series is kappa = 2 * Mean(R) / Var(R), the
sample analog of (growth rate of the expected price) / (its decay threshold).
It is dimensionless: rescaling the time step consistently leaves it unchanged,
and kappa < 1 marks a stock whose typical long-run path decays even though
its expected price may grow.

Returns are simple close-to-close returns P_t / P_{t-1} - 1 by default
(``kind="log"`` switches to log returns).  Benchmark adjustments subtract a
cross-sectional average: equal-weighted (demeaning), or weighted by log
market cap or market cap.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data_io import PricePanel, UniverseSnapshot
from .errors import DataError, InvalidParameterError, UndefinedKappaError

MODES = ("vanilla", "demeaned", "logcap", "cap")

__all__ = [
    "MODES",
    "ReturnPanel",
    "KappaSummary",
    "KappaReport",
    "compute_returns",
    "demean_cross_section",
    "benchmark_weights",
    "benchmark_adjust",
    "estimate_kappa",
    "kappa_report",
    "summarize",
    "density",
]


@dataclass(frozen=True)
class ReturnPanel:
    """N tickers x K dates of returns plus the benchmark mode that produced them.

    ``dates`` holds the K return dates (the later close of each pair).
    """

    tickers: list[str]
    dates: list[str]
    returns: np.ndarray
    mode: str

    def __post_init__(self) -> None:
        n, k = self.returns.shape
        if n != len(self.tickers) or k != len(self.dates):
            raise DataError(
                f"returns shape {self.returns.shape} does not match "
                f"{len(self.tickers)} tickers x {len(self.dates)} dates")
        if self.mode not in MODES:
            raise DataError(f"unknown benchmark mode {self.mode!r}")
        if not np.all(np.isfinite(self.returns)):
            raise DataError("returns contain non-finite values")
        if self.mode == "demeaned":
            worst = float(np.abs(self.returns.mean(axis=0)).max())
            if worst > 1e-10:
                raise DataError(
                    f"demeaned panel has column mean {worst:.3e} > 1e-10")


@dataclass(frozen=True)
class KappaSummary:
    """Order statistics and dispersion of a cross-section of kappa values."""

    count: int
    min: float
    q1: float
    median: float
    mean: float
    q3: float
    max: float
    stdev: float
    mad: float


@dataclass(frozen=True)
class KappaReport:
    per_ticker: dict[str, float]
    summary: KappaSummary


def compute_returns(panel: PricePanel, kind: str = "simple") -> ReturnPanel:
    """Close-to-close returns from an adjusted-price panel, mode ``vanilla``."""
    if kind not in ("simple", "log"):
        raise InvalidParameterError(f"unknown return kind {kind!r}")
    prices = panel.prices
    if prices.shape[1] < 2:
        raise DataError("need at least two dates to form returns")
    bad = np.argwhere(~(prices > 0))
    if bad.size:
        i, j = bad[0]
        raise DataError(
            f"nonpositive price for {panel.tickers[i]} on {panel.dates[j]}")
    ratio = prices[:, 1:] / prices[:, :-1]
    returns = np.log(ratio) if kind == "log" else ratio - 1.0
    return ReturnPanel(tickers=list(panel.tickers), dates=list(panel.dates[1:]),
                       returns=returns, mode="vanilla")


def demean_cross_section(panel: ReturnPanel) -> ReturnPanel:
    """Subtract the equal-weighted cross-sectional mean from every column.

    Idempotent: demeaning an already demeaned panel is the identity up to
    rounding.  Panels carrying a weighted-benchmark mode are rejected.
    """
    if panel.mode not in ("vanilla", "demeaned"):
        raise InvalidParameterError(
            f"demeaning expects a vanilla panel, got mode {panel.mode!r}")
    adjusted = panel.returns - panel.returns.mean(axis=0, keepdims=True)
    # pin column means to zero exactly; one further pass removes the
    # rounding residue so the panel invariant holds for any column scale
    adjusted = adjusted - adjusted.mean(axis=0, keepdims=True)
    return ReturnPanel(panel.tickers, panel.dates, adjusted, "demeaned")


def benchmark_weights(universe: UniverseSnapshot, tickers: list[str],
                      mode: str) -> np.ndarray:
    """Per-ticker benchmark weights: ln(cap) for ``logcap``, cap for ``cap``."""
    if mode not in ("logcap", "cap"):
        raise InvalidParameterError(f"unknown benchmark mode {mode!r}")
    out = np.empty(len(tickers))
    for i, t in enumerate(tickers):
        if t not in universe.market_cap:
            raise DataError(f"no market cap for ticker {t}")
        c = universe.market_cap[t]
        w = math.log(c) if (mode == "logcap" and c > 0) else c
        if not w > 0:
            raise DataError(
                f"benchmark weight for ticker {t} is not positive "
                f"(cap={c!r}, mode={mode})")
        out[i] = w
    return out


def benchmark_adjust(panel: ReturnPanel, weights: np.ndarray,
                     mode: str) -> ReturnPanel:
    """Subtract the ``weights``-weighted cross-sectional average return.

    Idempotent for a fixed weight vector: the weighted column averages of an
    adjusted panel are zero, so adjusting again changes nothing.
    """
    if mode not in ("logcap", "cap"):
        raise InvalidParameterError(f"unknown benchmark mode {mode!r}")
    if panel.mode not in ("vanilla", mode):
        raise InvalidParameterError(
            f"cannot apply a {mode} benchmark to a {panel.mode} panel")
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(panel.tickers),):
        raise DataError(
            f"{len(w)} weights for {len(panel.tickers)} tickers")
    if not np.all(w > 0):
        i = int(np.argmin(w > 0))
        raise DataError(
            f"nonpositive benchmark weight for ticker {panel.tickers[i]}")
    bench = (w @ panel.returns) / w.sum()
    return ReturnPanel(panel.tickers, panel.dates,
                       panel.returns - bench[None, :], mode)


def estimate_kappa(returns: np.ndarray) -> float:
    """2 * Mean / Var of a return series (sample variance, K-1 denominator)."""
    r = np.asarray(returns, dtype=float).ravel()
    if r.size < 2:
        raise InvalidParameterError(
            f"need at least 2 returns to estimate kappa, got {r.size}")
    var = float(r.var(ddof=1))
    # a constant series has zero variance even when pairwise summation
    # leaves rounding residue in the computed value
    if var == 0.0 or bool(np.all(r == r[0])):
        raise UndefinedKappaError(
            "return variance is zero; kappa is undefined")
    return 2.0 * float(r.mean()) / var


def kappa_report(panel: ReturnPanel, mad_kind: str = "mean") -> KappaReport:
    """Per-ticker kappa values plus their cross-sectional summary."""
    per_ticker: dict[str, float] = {}
    for i, t in enumerate(panel.tickers):
        try:
            per_ticker[t] = estimate_kappa(panel.returns[i])
        except UndefinedKappaError as exc:
            raise UndefinedKappaError(
                f"ticker {t} (mode {panel.mode}): {exc}") from exc
    values = np.array([per_ticker[t] for t in panel.tickers])
    return KappaReport(per_ticker=per_ticker,
                       summary=summarize(values, mad_kind=mad_kind))


def summarize(values: np.ndarray, mad_kind: str = "mean") -> KappaSummary:
    """Location and dispersion summary of a sample.

    Quartiles use linear interpolation between order statistics.  ``mad_kind``
    selects the absolute-deviation statistic about the median: ``"mean"``
    (default) or ``"median"``.  A single observation has stdev 0 by convention.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise InvalidParameterError("cannot summarize an empty sample")
    if mad_kind not in ("mean", "median"):
        raise InvalidParameterError(f"unknown mad_kind {mad_kind!r}")
    q1, med, q3 = np.percentile(v, (25, 50, 75))
    absdev = np.abs(v - med)
    mad = float(absdev.mean() if mad_kind == "mean" else np.median(absdev))
    stdev = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return KappaSummary(
        count=int(v.size), min=float(v.min()), q1=float(q1), median=float(med),
        mean=float(v.mean()), q3=float(q3), max=float(v.max()),
        stdev=stdev, mad=mad)


def _silverman_bandwidth(v: np.ndarray) -> float:
    std = float(v.std(ddof=1))
    q75, q25 = np.percentile(v, (75, 25))
    iqr = float(q75 - q25)
    scale = min(std, iqr / 1.34) if iqr > 0 else std
    return 0.9 * scale * v.size ** (-0.2)


def density(values: np.ndarray, grid_points: int = 512,
            bandwidth: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian kernel density on a uniform grid.

    Bandwidth defaults to the Silverman rule.  The grid extends 4 bandwidths
    past the sample range, so the trapezoid integral of the estimate is 1 to
    well within 1e-3.  A degenerate (all-equal) sample yields a narrow spike
    around the common value and a warning.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size < 2:
        raise InvalidParameterError(
            f"need at least 2 values for a density, got {v.size}")
    if grid_points < 8:
        raise InvalidParameterError("grid_points must be at least 8")
    bw = bandwidth if bandwidth is not None else _silverman_bandwidth(v)
    if not bw > 0:
        warnings.warn("degenerate sample (all values equal); "
                      "rendering a narrow spike", stacklevel=2)
        bw = max(abs(v[0]), 1.0) * 1e-3
    grid = np.linspace(v.min() - 4.0 * bw, v.max() + 4.0 * bw, grid_points)
    dens = np.zeros(grid_points)
    norm = 1.0 / (v.size * bw * math.sqrt(2.0 * math.pi))
    for chunk in np.array_split(v, max(1, v.size * grid_points // 2**22)):
        z = (grid[:, None] - chunk[None, :]) / bw
        dens += norm * np.exp(-0.5 * z * z).sum(axis=1)
    return grid, dens

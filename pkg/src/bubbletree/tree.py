"""Binary-tree stock price process: simulation, closed forms, Monte Carlo.

The underlying walk moves by +sqrt(tau) with probability p = (1 + mu*sqrt(tau))/2
and by -sqrt(tau) otherwise, independently at every step.  Prices are the
exponential map S_n = (1-d)^n * S0 * exp(sigma * W_n), so every closed form
below reduces to hyperbolic functions of sigma*sqrt(tau).

Closed forms implemented here:

* growth rate of the expected price
      nu = ln[cosh(sigma*sqrt(tau)) + mu*sqrt(tau)*sinh(sigma*sqrt(tau))] / tau
* its value at mu = 0 (the minimum needed for the typical path not to decay)
      nu_star = ln[cosh(sigma*sqrt(tau))] / tau
* the remainder nu_eff = nu - nu_star = ln[1 + mu*sqrt(tau)*tanh(sigma*sqrt(tau))]/tau,
  which governs the most probable (median) path rather than the mean path
* geometric-sum formulas for cumulative dividends along the most probable
  path and in expectation
* the at-the-money call value S0 * erf(sigma*sqrt(T) / (2*sqrt(2))) under a
  zero-growth (martingale) price measure

The Monte Carlo engine draws paths from the counter-based streams in
:mod:`bubbletree.rng`, so ensembles are deterministic for a given
``(params, n_paths, base_seed)`` and bitwise independent of worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .errors import InvalidParameterError
from .rng import BLOCK_SIZE, block_generator, n_blocks

__all__ = [
    "TreeParams",
    "WalkPath",
    "PricePath",
    "EnsembleStats",
    "step_probability",
    "mu_for_drift",
    "simulate_walk",
    "simulate_returns",
    "walk_to_prices",
    "walk_mean_variance",
    "drift_nu",
    "drift_lower_bound",
    "effective_drift",
    "expected_price",
    "most_probable_price",
    "dividends_most_probable",
    "dividends_expected",
    "atm_call_price",
    "mc_ensemble",
    "ensemble_paths",
    "sample_terminal_walks",
    "sample_terminal_prices",
    "exact_loss_probability",
    "exact_median_price",
]


# ---------------------------------------------------------------------------
# parameters and path containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TreeParams:
    """Constants of one tree configuration.

    sigma
        Log-volatility per square root of unit time, positive.
    mu
        Drift of the underlying walk per unit time.  Must satisfy
        ``|mu|*sqrt(tau) <= 1`` so the step-up probability stays in [0, 1].
    tau
        Time step, positive.
    n_steps
        Number of steps N.
    s0
        Initial price, positive.
    d
        Dividend fraction paid at every step n >= 1, in [0, 1).
    """

    sigma: float
    mu: float
    tau: float
    n_steps: int
    s0: float = 100.0
    d: float = 0.0

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise InvalidParameterError(f"sigma must be positive, got {self.sigma}")
        if not self.tau > 0:
            raise InvalidParameterError(f"tau must be positive, got {self.tau}")
        if not self.s0 > 0:
            raise InvalidParameterError(f"s0 must be positive, got {self.s0}")
        if not 0.0 <= self.d < 1.0:
            raise InvalidParameterError(f"d must lie in [0, 1), got {self.d}")
        if self.n_steps < 1:
            raise InvalidParameterError(f"n_steps must be >= 1, got {self.n_steps}")
        step_probability(self.mu, self.tau)  # validates |mu|*sqrt(tau) <= 1

    @property
    def p_up(self) -> float:
        return step_probability(self.mu, self.tau)

    def _check_step(self, n: int) -> None:
        if not 0 <= n <= self.n_steps:
            raise InvalidParameterError(
                f"step index {n} outside [0, {self.n_steps}]")


@dataclass(frozen=True)
class WalkPath:
    """One realized walk trajectory W_0 .. W_N plus the seed that produced it."""

    values: np.ndarray
    seed: int


@dataclass(frozen=True)
class PricePath:
    """Price and cumulative-dividend series derived from one walk."""

    prices: np.ndarray
    dividends_cum: np.ndarray


@dataclass(frozen=True)
class EnsembleStats:
    """Terminal-distribution summary of a Monte Carlo ensemble."""

    n_paths: int
    terminal_mean: float
    stderr_mean: float
    terminal_median: float
    q01: float
    q25: float
    q75: float
    q99: float
    loss_probability: float
    dividends_mean: float
    dividends_stderr: float


# ---------------------------------------------------------------------------
# elementary quantities
# ---------------------------------------------------------------------------

def step_probability(mu: float, tau: float) -> float:
    """Probability of an up step, (1 + mu*sqrt(tau))/2."""
    if not tau > 0:
        raise InvalidParameterError(f"tau must be positive, got {tau}")
    x = mu * math.sqrt(tau)
    if abs(x) > 1.0:
        raise InvalidParameterError(
            f"|mu|*sqrt(tau) = {abs(x):.6g} exceeds 1; step probability "
            "would leave [0, 1]")
    return 0.5 * (1.0 + x)


def _coshm1(x: float) -> float:
    """cosh(x) - 1 without cancellation for small x."""
    s = math.sinh(0.5 * x)
    return 2.0 * s * s


def mu_for_drift(sigma: float, tau: float, nu: float) -> float:
    """Walk drift mu that produces expected-price growth rate ``nu``.

    Inverts the growth-rate formula in closed form:
    mu = (exp(nu*tau) - cosh(sigma*sqrt(tau))) / (sqrt(tau)*sinh(sigma*sqrt(tau))),
    with the numerator assembled from expm1/coshm1 so small rates stay exact.
    """
    if not sigma > 0 or not tau > 0:
        raise InvalidParameterError("sigma and tau must be positive")
    rt = math.sqrt(tau)
    x = sigma * rt
    mu = (math.expm1(nu * tau) - _coshm1(x)) / (rt * math.sinh(x))
    if abs(mu) * rt > 1.0:
        raise InvalidParameterError(
            f"target growth rate {nu} is unreachable at sigma={sigma}, tau={tau}")
    return mu


def drift_nu(sigma: float, mu: float, tau: float) -> float:
    """Exponential growth rate of the expected price,
    ln[cosh(sigma*sqrt(tau)) + mu*sqrt(tau)*sinh(sigma*sqrt(tau))] / tau.

    For tau << 1/sigma^2 the value approaches sigma*mu + sigma^2/2; the exact
    expression is returned, never the small-tau approximation.  Evaluated as
    log1p of the argument minus one, so the 1/tau amplification does not
    expose the rounding of the hyperbolic terms.
    """
    step_probability(mu, tau)
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")
    rt = math.sqrt(tau)
    x = sigma * rt
    arg_m1 = _coshm1(x) + mu * rt * math.sinh(x)
    if not arg_m1 > -1.0:
        raise InvalidParameterError("growth-rate argument is not positive")
    return math.log1p(arg_m1) / tau


def drift_lower_bound(sigma: float, tau: float) -> float:
    """Minimum growth rate for a non-decaying typical path,
    ln(cosh(sigma*sqrt(tau)))/tau.

    Equals ``drift_nu(sigma, 0, tau)`` and approaches sigma^2/2 as tau -> 0.
    """
    if not sigma > 0 or not tau > 0:
        raise InvalidParameterError("sigma and tau must be positive")
    return math.log1p(_coshm1(sigma * math.sqrt(tau))) / tau


def effective_drift(sigma: float, mu: float, tau: float) -> float:
    """Growth rate of the most probable path relative to the decay threshold,
    ln[1 + mu*sqrt(tau)*tanh(sigma*sqrt(tau))] / tau.

    Equals drift_nu - drift_lower_bound exactly, via the factorization
    cosh(x) + a*sinh(x) = cosh(x) * (1 + a*tanh(x)).
    """
    step_probability(mu, tau)
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")
    rt = math.sqrt(tau)
    arg_m1 = mu * rt * math.tanh(sigma * rt)
    if not arg_m1 > -1.0:
        raise InvalidParameterError(
            f"1 + mu*sqrt(tau)*tanh(sigma*sqrt(tau)) = {1 + arg_m1:.6g} "
            "is not positive")
    return math.log1p(arg_m1) / tau


def walk_mean_variance(params: TreeParams, n: int) -> tuple[float, float]:
    """Mean and variance of W_n: (mu*n*tau, n*tau*(1 - mu^2*tau))."""
    params._check_step(n)
    t_n = n * params.tau
    return params.mu * t_n, t_n * (1.0 - params.mu**2 * params.tau)


# ---------------------------------------------------------------------------
# closed-form price and dividend values
# ---------------------------------------------------------------------------

def expected_price(params: TreeParams, n: int) -> float:
    """E(S_n) = (1-d)^n * S0 * exp(nu * n * tau), evaluated in log space."""
    params._check_step(n)
    nu = drift_nu(params.sigma, params.mu, params.tau)
    return params.s0 * math.exp(n * (math.log1p(-params.d) + nu * params.tau))


def most_probable_price(params: TreeParams, n: int) -> float:
    """Price along the most probable path, (1-d)^n * S0 * exp(sigma*mu*n*tau)."""
    params._check_step(n)
    g = params.sigma * params.mu * params.tau
    return params.s0 * math.exp(n * (math.log1p(-params.d) + g))


def _dividend_sum(params: TreeParams, n: int, growth: float) -> float:
    """d * exp(growth) * sum_{m=1}^{n} [(1-d) * exp(growth)]^(m-1) * S0.

    ``growth`` is the per-step log growth of the price proxy (sigma*mu*tau for
    the most probable path, nu*tau for the expectation).  The geometric ratio
    is exp(r) with r = log(1-d) + growth; expm1 keeps the quotient stable when
    |r| is tiny, and r == 0 is the removable singularity where the sum is n.
    """
    params._check_step(n)
    if params.d == 0.0:
        return 0.0
    r = math.log1p(-params.d) + growth
    if r == 0.0:
        ratio = float(n)
    else:
        ratio = math.expm1(n * r) / math.expm1(r)
    return params.d * math.exp(growth) * ratio * params.s0


def dividends_most_probable(params: TreeParams, n: int) -> float:
    """Cumulative dividends through step n along the most probable path."""
    return _dividend_sum(params, n, params.sigma * params.mu * params.tau)


def dividends_expected(params: TreeParams, n: int) -> float:
    """Expected cumulative dividends through step n.

    Always >= the most-probable-path value for sigma > 0, because the
    expected price grows at nu >= sigma*mu.
    """
    nu = drift_nu(params.sigma, params.mu, params.tau)
    return _dividend_sum(params, n, nu * params.tau)


def atm_call_price(s0: float, sigma: float, t: float) -> float:
    """At-the-money call value under the martingale measure, S0*erf(sigma*sqrt(t)/(2*sqrt(2)))."""
    if not s0 > 0 or not sigma > 0 or not t > 0:
        raise InvalidParameterError("s0, sigma and t must all be positive")
    return s0 * math.erf(sigma * math.sqrt(t) / (2.0 * math.sqrt(2.0)))


# ---------------------------------------------------------------------------
# exact lattice results (binomial law of the up-step count)
# ---------------------------------------------------------------------------

def _log_price(params: TreeParams, n, k):
    """log S_n for ``k`` up steps out of ``n``."""
    w = math.sqrt(params.tau) * (2.0 * np.asarray(k, dtype=float) - n)
    return math.log(params.s0) + n * math.log1p(-params.d) + params.sigma * w


def exact_loss_probability(params: TreeParams, n: int | None = None) -> float:
    """P(S_n < S0) from the binomial distribution of the up-step count."""
    n = params.n_steps if n is None else n
    params._check_step(n)
    if n == 0:
        return 0.0
    # S_n < S0  <=>  k < threshold
    threshold = 0.5 * n * (1.0 - math.log1p(-params.d) / (params.sigma * math.sqrt(params.tau)))
    k_max = math.ceil(threshold) - 1 if threshold != math.floor(threshold) \
        else int(threshold) - 1
    if k_max < 0:
        return 0.0
    return float(binom.cdf(k_max, n, params.p_up))


def exact_median_price(params: TreeParams, n: int | None = None) -> float:
    """Median of S_n via the binomial median of the up-step count."""
    n = params.n_steps if n is None else n
    params._check_step(n)
    if n == 0:
        return params.s0
    k_med = float(binom.ppf(0.5, n, params.p_up))
    return float(np.exp(_log_price(params, n, k_med)))


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def _step_signs(params: TreeParams, uniforms: np.ndarray) -> np.ndarray:
    return np.where(uniforms < params.p_up, 1.0, -1.0)


def simulate_walk(params: TreeParams, seed: int) -> WalkPath:
    """Simulate one walk; identical (params, seed) yields an identical path.

    The path equals path 0 of ``mc_ensemble(params, ..., base_seed=seed)``.
    """
    u = block_generator(seed, 0).random(params.n_steps)
    skeleton = np.concatenate(([0.0], np.cumsum(_step_signs(params, u))))
    return WalkPath(values=math.sqrt(params.tau) * skeleton, seed=seed)


def simulate_returns(params: TreeParams, seed: int) -> np.ndarray:
    """Per-step simple returns of the same path ``simulate_walk`` produces.

    Each return is (1-d)*exp(+-sigma*sqrt(tau)) - 1, computed directly from
    the step signs so no error accumulates along long series.
    """
    u = block_generator(seed, 0).random(params.n_steps)
    x = params.sigma * math.sqrt(params.tau)
    up = (1.0 - params.d) * math.exp(x) - 1.0
    down = (1.0 - params.d) * math.exp(-x) - 1.0
    return np.where(u < params.p_up, up, down)


def walk_to_prices(params: TreeParams, walk: WalkPath) -> PricePath:
    """Rebuild S_n = (1-d)^n * S0 * exp(sigma*W_n) and cumulative dividends."""
    w = np.asarray(walk.values, dtype=float)
    if w.shape != (params.n_steps + 1,):
        raise InvalidParameterError(
            f"walk has {w.shape[0] - 1} steps, params expect {params.n_steps}")
    n = np.arange(params.n_steps + 1)
    log_s = math.log(params.s0) + n * math.log1p(-params.d) + params.sigma * w
    prices = np.exp(log_s)
    if params.d == 0.0:
        divs = np.zeros_like(prices)
    else:
        # dividend at step m is d * (1-d)^(m-1) * S0 * exp(sigma*W_m)
        log_terms = (math.log(params.d) + math.log(params.s0)
                     + (n[1:] - 1) * math.log1p(-params.d)
                     + params.sigma * w[1:])
        divs = np.concatenate(([0.0], np.cumsum(np.exp(log_terms))))
    return PricePath(prices=prices, dividends_cum=divs)


def _block_terminals(params: TreeParams, base_seed: int, block: int,
                     rows: int, want_dividends: bool):
    """Up-step counts and terminal dividends for one block of paths."""
    n = params.n_steps
    u = block_generator(base_seed, block).random((rows, n))
    if want_dividends:
        signs = _step_signs(params, u)
        w = math.sqrt(params.tau) * np.cumsum(signs, axis=1)
        k = 0.5 * (signs.sum(axis=1) + n)
        log_terms = (math.log(params.d) + math.log(params.s0)
                     + np.arange(n) * math.log1p(-params.d)
                     + params.sigma * w)
        dividends = np.exp(log_terms).sum(axis=1)
    else:
        k = (u < params.p_up).sum(axis=1).astype(float)
        dividends = np.zeros(rows)
    return k, dividends


def _terminal_arrays(params: TreeParams, n_paths: int, base_seed: int,
                     workers: int = 1):
    """Terminal up-step counts and D_N for all paths, in block order."""
    if n_paths < 1:
        raise InvalidParameterError(f"n_paths must be >= 1, got {n_paths}")
    want_div = params.d > 0.0
    blocks = n_blocks(n_paths)
    rows = [min(BLOCK_SIZE, n_paths - b * BLOCK_SIZE) for b in range(blocks)]

    def job(b):
        return _block_terminals(params, base_seed, b, rows[b], want_div)

    if workers > 1 and blocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(blocks)))
    else:
        parts = [job(b) for b in range(blocks)]
    counts = np.concatenate([k for k, _ in parts])
    dividends = np.concatenate([d for _, d in parts])
    return counts, dividends


def sample_terminal_prices(params: TreeParams, n_paths: int, base_seed: int,
                           workers: int = 1) -> np.ndarray:
    """Terminal prices S_N of an ensemble, in path order."""
    counts, _ = _terminal_arrays(params, n_paths, base_seed, workers)
    return np.exp(_log_price(params, params.n_steps, counts))


def sample_terminal_walks(params: TreeParams, n_paths: int, base_seed: int,
                          workers: int = 1) -> np.ndarray:
    """Terminal walk values W_N of an ensemble, in path order."""
    counts, _ = _terminal_arrays(params, n_paths, base_seed, workers)
    return math.sqrt(params.tau) * (2.0 * counts - params.n_steps)


def mc_ensemble(params: TreeParams, n_paths: int, base_seed: int,
                workers: int = 1) -> EnsembleStats:
    """Summary statistics of the terminal distribution of an ensemble.

    Deterministic given (params, n_paths, base_seed); see :mod:`bubbletree.rng`
    for the per-path stream derivation.  ``workers`` only schedules block
    generation and cannot change any reported value.
    """
    counts, dividends = _terminal_arrays(params, n_paths, base_seed, workers)
    prices = np.exp(_log_price(params, params.n_steps, counts))
    q01, q25, q75, q99 = np.quantile(prices, (0.01, 0.25, 0.75, 0.99))
    if n_paths > 1:
        stderr = float(prices.std(ddof=1) / math.sqrt(n_paths))
        div_stderr = float(dividends.std(ddof=1) / math.sqrt(n_paths))
    else:
        stderr = div_stderr = 0.0
    return EnsembleStats(
        n_paths=n_paths,
        terminal_mean=float(prices.mean()),
        stderr_mean=stderr,
        terminal_median=float(np.median(prices)),
        q01=float(q01), q25=float(q25), q75=float(q75), q99=float(q99),
        loss_probability=float((prices < params.s0).mean()),
        dividends_mean=float(dividends.mean()),
        dividends_stderr=div_stderr,
    )


def ensemble_paths(params: TreeParams, count: int,
                   base_seed: int) -> list[tuple[WalkPath, PricePath]]:
    """The first ``count`` full paths of the ensemble keyed by ``base_seed``."""
    if count < 1:
        raise InvalidParameterError(f"count must be >= 1, got {count}")
    out: list[tuple[WalkPath, PricePath]] = []
    for b in range(n_blocks(count)):
        rows = min(BLOCK_SIZE, count - b * BLOCK_SIZE)
        u = block_generator(base_seed, b).random((rows, params.n_steps))
        signs = _step_signs(params, u)
        for r in range(rows):
            skeleton = np.concatenate(([0.0], np.cumsum(signs[r])))
            walk = WalkPath(values=math.sqrt(params.tau) * skeleton, seed=base_seed)
            out.append((walk, walk_to_prices(params, walk)))
    return out

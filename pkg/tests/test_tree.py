import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import binom

from bubbletree import tree
from bubbletree.errors import InvalidParameterError

# independently computed reference values (30-digit arithmetic)
LN_COSH_1 = 0.43378083048302719
EXPECTED_PRICE_252 = 102.02008002606769  # sigma=0.2, mu=0, tau=1/252, n=252, s0=100


def params(sigma=0.2, mu=0.0, tau=1 / 252, n_steps=252, s0=100.0, d=0.0):
    return tree.TreeParams(sigma=sigma, mu=mu, tau=tau, n_steps=n_steps,
                           s0=s0, d=d)


# ---------------------------------------------------------------------------
# parameters and step probability
# ---------------------------------------------------------------------------

class TestStepProbability:
    def test_driftless(self):
        assert tree.step_probability(0.0, 0.01) == 0.5

    def test_direct_arithmetic(self):
        assert tree.step_probability(1.0, 0.25) == 0.75

    def test_out_of_range(self):
        with pytest.raises(InvalidParameterError):
            tree.step_probability(-3.0, 1.0)

    @pytest.mark.parametrize("bad", [
        dict(sigma=0.0), dict(sigma=-1.0), dict(tau=0.0), dict(s0=0.0),
        dict(d=-0.1), dict(d=1.0), dict(n_steps=0), dict(mu=30.0),
    ])
    def test_invalid_params(self, bad):
        with pytest.raises(InvalidParameterError):
            params(**bad)


# ---------------------------------------------------------------------------
# walk simulation
# ---------------------------------------------------------------------------

class TestSimulateWalk:
    def test_deterministic(self):
        p = params()
        a = tree.simulate_walk(p, 11)
        b = tree.simulate_walk(p, 11)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, tree.simulate_walk(p, 12).values)

    def test_single_step_values(self):
        p = params(tau=1.0, n_steps=1)
        w = tree.simulate_walk(p, 0).values
        assert w[0] == 0.0
        assert w[1] in (1.0, -1.0)

    def test_increments_are_unit_steps(self):
        p = params(mu=1.5, tau=0.04, n_steps=500)
        w = tree.simulate_walk(p, 5).values
        np.testing.assert_allclose(np.abs(np.diff(w)), math.sqrt(p.tau),
                                   rtol=1e-12)

    def test_driftless_ensemble_mean(self):
        # E(W_N) = 0 and Var(W_N) = N*tau = 1, so the CLT band is 4/sqrt(M)
        p = params()
        w = tree.sample_terminal_walks(p, 100_000, 2024)
        assert abs(w.mean()) < 4.0 / math.sqrt(100_000)

    def test_mean_variance_mc_oracle(self):
        p = params(sigma=0.3, mu=0.8, tau=0.02, n_steps=64)
        w = tree.sample_terminal_walks(p, 100_000, 99)
        mean, var = tree.walk_mean_variance(p, 64)
        se_mean = math.sqrt(var / w.size)
        assert abs(w.mean() - mean) < 4 * se_mean
        se_var = var * math.sqrt(2.0 / (w.size - 1))
        assert abs(w.var(ddof=1) - var) < 4 * se_var


class TestWalkMeanVariance:
    def test_driftless(self):
        assert tree.walk_mean_variance(params(tau=1.0, n_steps=5), 5) == (0.0, 5.0)

    def test_with_drift(self):
        mean, var = tree.walk_mean_variance(
            params(mu=0.5, tau=1.0, n_steps=4), 4)
        assert mean == 2.0
        assert var == pytest.approx(3.0, rel=1e-15)

    def test_step_out_of_range(self):
        with pytest.raises(InvalidParameterError):
            tree.walk_mean_variance(params(n_steps=10), 11)


# ---------------------------------------------------------------------------
# growth-rate closed forms
# ---------------------------------------------------------------------------

class TestDriftClosedForms:
    def test_small_tau_limit(self):
        # nu -> sigma*mu + sigma^2/2 as tau -> 0
        assert tree.drift_nu(0.2, 0.0, 1e-8) == pytest.approx(0.02, abs=1e-6)
        assert tree.drift_lower_bound(0.2, 1e-8) == pytest.approx(0.02, abs=1e-6)
        assert tree.effective_drift(0.2, 0.1, 1e-8) == pytest.approx(0.02, abs=1e-6)

    def test_lower_bound_reference_value(self):
        assert tree.drift_lower_bound(1.0, 1.0) == pytest.approx(
            LN_COSH_1, rel=1e-15)

    def test_lower_bound_is_mu_zero_drift(self):
        for sigma in (0.1, 0.5, 2.0):
            for tau in (1e-3, 0.04, 1.0):
                assert tree.drift_nu(sigma, 0.0, tau) == tree.drift_lower_bound(
                    sigma, tau)

    def test_martingale_inversion(self):
        # mu_for_drift(sigma, tau, 0) must land exactly on nu = 0
        for sigma, tau in [(0.2, 1 / 252), (1.0, 0.01), (0.5, 0.25)]:
            mu = tree.mu_for_drift(sigma, tau, 0.0)
            assert mu < 0
            assert abs(tree.drift_nu(sigma, mu, tau)) < 1e-12

    def test_inversion_roundtrip(self):
        for nu in (-0.1, 0.0, 0.04, 0.3):
            mu = tree.mu_for_drift(0.3, 1 / 52, nu)
            assert tree.drift_nu(0.3, mu, 1 / 52) == pytest.approx(nu, abs=1e-12)

    def test_effective_drift_zero_mu(self):
        assert tree.effective_drift(0.7, 0.0, 0.1) == 0.0

    def test_effective_drift_sign(self):
        assert tree.effective_drift(0.3, 0.2, 0.01) > 0
        assert tree.effective_drift(0.3, -0.2, 0.01) < 0

    def test_identity_on_grid(self):
        # nu_eff = nu - nu* exactly, by the cosh/sinh factorization
        sigmas = np.linspace(0.05, 2.0, 10)
        mus = np.linspace(-0.9, 0.9, 10)
        taus = (1e-4, 1 / 252, 0.01, 0.25, 1.0)
        for sigma in sigmas:
            for mu in mus:
                for tau in taus:
                    if abs(mu) * math.sqrt(tau) >= 1:
                        continue
                    lhs = tree.effective_drift(sigma, mu, tau)
                    rhs = (tree.drift_nu(sigma, mu, tau)
                           - tree.drift_lower_bound(sigma, tau))
                    assert lhs == pytest.approx(rhs, abs=1e-12 * max(1, abs(rhs)))

    @given(sigma=st.floats(0.05, 2.0), mu=st.floats(-0.9, 0.9),
           tau=st.floats(1e-4, 1.0))
    def test_identity_property(self, sigma, mu, tau):
        if abs(mu) * math.sqrt(tau) >= 1:
            return
        lhs = tree.effective_drift(sigma, mu, tau)
        rhs = tree.drift_nu(sigma, mu, tau) - tree.drift_lower_bound(sigma, tau)
        assert lhs == pytest.approx(rhs, abs=1e-12 * max(1.0, abs(rhs)))


# ---------------------------------------------------------------------------
# price closed forms
# ---------------------------------------------------------------------------

class TestExpectedPrice:
    def test_martingale_config(self):
        p = params(sigma=0.2, mu=tree.mu_for_drift(0.2, 1 / 252, 0.0))
        for n in (0, 10, 252):
            assert tree.expected_price(p, n) == pytest.approx(100.0, rel=1e-12)

    def test_reference_value(self):
        assert tree.expected_price(params(), 252) == pytest.approx(
            EXPECTED_PRICE_252, rel=1e-13)

    def test_two_forms_agree(self):
        # bracket-power form vs exp(nu * t_n), both in log space
        for p in (params(sigma=0.35, mu=0.4, tau=0.01, n_steps=5000, d=0.002),
                  params(sigma=1.0, mu=-0.5, tau=0.25, n_steps=400)):
            x = p.sigma * math.sqrt(p.tau)
            q = p.p_up
            bracket = q * math.exp(x) + (1 - q) * math.exp(-x)
            for n in (1, 7, p.n_steps // 2, p.n_steps):
                direct = p.s0 * math.exp(
                    n * (math.log1p(-p.d) + math.log(bracket)))
                assert tree.expected_price(p, n) == pytest.approx(
                    direct, rel=1e-12)

    def test_dividend_factor_dominates(self):
        p = params(sigma=1e-6, mu=0.0, d=0.01, n_steps=10)
        assert tree.expected_price(p, 10) == pytest.approx(
            100.0 * 0.99**10, rel=1e-9)


class TestMostProbablePrice:
    def test_driftless(self):
        p = params(mu=0.0)
        for n in (0, 5, 252):
            assert tree.most_probable_price(p, n) == 100.0

    def test_martingale_config_decreasing(self):
        p = params(sigma=0.2, mu=tree.mu_for_drift(0.2, 1 / 252, 0.0))
        values = [tree.most_probable_price(p, n) for n in range(0, 252, 21)]
        assert all(a > b for a, b in zip(values, values[1:]))


class TestAtmCallPrice:
    def test_zero_horizon_limit(self):
        assert tree.atm_call_price(100.0, 0.2, 1e-18) == pytest.approx(0.0, abs=1e-8)

    def test_erf_reference_point(self):
        # sigma*sqrt(T) = 2*sqrt(2) lands on erf(1); the oracle is the
        # Maclaurin series 2/sqrt(pi) * sum (-1)^k / (k! (2k+1))
        erf1 = 2.0 / math.sqrt(math.pi) * sum(
            (-1) ** k / (math.factorial(k) * (2 * k + 1)) for k in range(25))
        value = tree.atm_call_price(1.0, 2.0 * math.sqrt(2.0), 1.0)
        assert value == pytest.approx(erf1, rel=1e-14)
        assert value == pytest.approx(0.8427007929497149, rel=1e-14)

    def test_long_horizon_saturates(self):
        assert tree.atm_call_price(100.0, 0.2, 10_000.0) == pytest.approx(
            100.0, rel=0.01)

    def test_monotone_in_horizon(self):
        values = [tree.atm_call_price(100.0, 0.2, t)
                  for t in np.linspace(0.25, 400, 60)]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_bounds(self):
        v = tree.atm_call_price(100.0, 0.3, 2.0)
        assert 0.0 < v < 100.0
        with pytest.raises(InvalidParameterError):
            tree.atm_call_price(100.0, 0.0, 1.0)


# ---------------------------------------------------------------------------
# dividends
# ---------------------------------------------------------------------------

class TestDividends:
    def test_zero_dividend(self):
        p = params(d=0.0)
        assert tree.dividends_most_probable(p, 100) == 0.0
        assert tree.dividends_expected(p, 100) == 0.0

    def test_driftless_closed_form(self):
        # mu = 0 collapses to S0 * (1 - (1-d)^n)
        p = params(mu=0.0, d=0.003, n_steps=5000)
        for n in (1, 10, 500, 5000):
            assert tree.dividends_most_probable(p, n) == pytest.approx(
                100.0 * (1.0 - 0.997**n), rel=1e-12)

    def test_driftless_recovers_initial_investment(self):
        p = params(mu=0.0, d=0.01, n_steps=5000)
        assert tree.dividends_most_probable(p, 5000) == pytest.approx(
            100.0, rel=1e-6)

    def test_degenerate_ratio_limit_branch(self):
        # (1-d) * exp(sigma*mu*tau) == 1 makes the geometric ratio exactly 1
        d = 0.01
        tau = 1.0
        sigma = 0.5
        mu = -math.log1p(-d) / (sigma * tau)
        p = params(sigma=sigma, mu=mu, tau=tau, n_steps=50, d=d)
        expected = 50 * d * math.exp(sigma * mu * tau) * 100.0
        assert tree.dividends_most_probable(p, 50) == pytest.approx(
            expected, rel=1e-12)

    def test_closed_form_matches_direct_sum(self):
        # term-by-term geometric series, summed independently
        for p in (params(sigma=0.3, mu=0.2, tau=1 / 252, n_steps=10_000, d=0.0008),
                  params(sigma=0.8, mu=-0.4, tau=0.02, n_steps=10_000, d=0.004)):
            m = np.arange(1, p.n_steps + 1, dtype=float)
            for growth, func in (
                    (p.sigma * p.mu * p.tau, tree.dividends_most_probable),
                    (tree.drift_nu(p.sigma, p.mu, p.tau) * p.tau,
                     tree.dividends_expected)):
                terms = p.d * (1 - p.d) ** (m - 1) * p.s0 * np.exp(growth * m)
                for n in (1, 13, 1000, 10_000):
                    assert func(p, n) == pytest.approx(
                        float(terms[:n].sum()), rel=1e-10)

    def test_expected_dominates_most_probable(self):
        for sigma in np.linspace(0.05, 1.5, 10):
            for mu in np.linspace(-0.8, 0.8, 10):
                for tau in (1e-3, 0.01, 0.1, 0.5, 1.0):
                    if abs(mu) * math.sqrt(tau) >= 1:
                        continue
                    p = params(sigma=sigma, mu=mu, tau=tau, n_steps=100, d=0.001)
                    for n in (1, 10, 100):
                        assert (tree.dividends_expected(p, n)
                                > tree.dividends_most_probable(p, n))

    def test_equality_in_small_sigma_limit(self):
        p = params(sigma=1e-8, mu=0.5, tau=0.01, n_steps=100, d=0.002)
        for n in (1, 50, 100):
            assert tree.dividends_expected(p, n) == pytest.approx(
                tree.dividends_most_probable(p, n), rel=1e-6)

    def test_mc_dividend_oracle(self):
        p = params(sigma=0.3, mu=0.2, tau=1 / 252, n_steps=256, d=0.001)
        stats = tree.mc_ensemble(p, 60_000, 314)
        closed = tree.dividends_expected(p, p.n_steps)
        assert abs(stats.dividends_mean - closed) < 3 * stats.dividends_stderr


# ---------------------------------------------------------------------------
# price-path reconstruction
# ---------------------------------------------------------------------------

class TestPricePath:
    def test_exact_reconstruction(self):
        p = params(sigma=0.4, mu=0.3, tau=0.01, n_steps=2000, d=0.0005)
        walk = tree.simulate_walk(p, 17)
        path = tree.walk_to_prices(p, walk)
        n = np.arange(p.n_steps + 1)
        recon = path.prices / (1 - p.d) ** n / p.s0
        np.testing.assert_allclose(recon, np.exp(p.sigma * walk.values),
                                   rtol=1e-12)

    def test_dividends_cumulative(self):
        p = params(d=0.002, n_steps=100)
        path = tree.walk_to_prices(p, tree.simulate_walk(p, 3))
        assert path.dividends_cum[0] == 0.0
        assert np.all(np.diff(path.dividends_cum) > 0)

    def test_returns_match_walk_prices(self):
        p = params(sigma=0.5, mu=-0.2, tau=0.02, n_steps=300, d=0.001)
        r = tree.simulate_returns(p, 21)
        path = tree.walk_to_prices(p, tree.simulate_walk(p, 21))
        np.testing.assert_allclose(r, path.prices[1:] / path.prices[:-1] - 1.0,
                                   rtol=1e-10)

    @given(seed=st.integers(0, 10_000), mu=st.floats(-2.0, 2.0),
           sigma=st.floats(0.05, 1.5))
    def test_reconstruction_property(self, seed, mu, sigma):
        p = params(sigma=sigma, mu=mu, tau=0.04, n_steps=64, d=0.001)
        walk = tree.simulate_walk(p, seed)
        path = tree.walk_to_prices(p, walk)
        n = np.arange(65)
        np.testing.assert_allclose(
            path.prices, (1 - p.d) ** n * p.s0 * np.exp(p.sigma * walk.values),
            rtol=1e-12)


# ---------------------------------------------------------------------------
# Monte Carlo ensembles
# ---------------------------------------------------------------------------

class TestEnsemble:
    def test_single_path_stats(self):
        p = params(n_steps=64, d=0.001)
        stats = tree.mc_ensemble(p, 1, 5)
        walk = tree.simulate_walk(p, 5)
        path = tree.walk_to_prices(p, walk)
        assert stats.terminal_mean == pytest.approx(path.prices[-1], rel=1e-12)
        assert stats.terminal_median == pytest.approx(path.prices[-1], rel=1e-12)
        assert stats.dividends_mean == pytest.approx(
            path.dividends_cum[-1], rel=1e-12)

    def test_martingale_loss_probability_exceeds_half(self):
        p = params(sigma=0.2, mu=tree.mu_for_drift(0.2, 1 / 252, 0.0),
                   n_steps=252 * 5)
        stats = tree.mc_ensemble(p, 50_000, 77)
        exact = tree.exact_loss_probability(p)
        assert exact > 0.5
        band = 4 * math.sqrt(exact * (1 - exact) / 50_000)
        assert abs(stats.loss_probability - exact) < band

    def test_driftless_median_matches_binomial(self):
        p = params(sigma=0.25, mu=0.0, n_steps=252, d=0.0005)
        stats = tree.mc_ensemble(p, 100_000, 123)
        target = p.s0 * (1 - p.d) ** p.n_steps
        assert tree.exact_median_price(p) == pytest.approx(target, rel=1e-12)
        # sample median may sit one lattice atom away from the population one
        atom = 2 * p.sigma * math.sqrt(p.tau)
        assert abs(math.log(stats.terminal_median / target)) <= atom + 1e-12

    def test_martingale_identity_checkpoints(self):
        # nu = 0: the MC mean stays on S0 at every checkpoint
        mu = tree.mu_for_drift(0.25, 1 / 252, 0.0)
        for n in (256, 512, 1024):
            p = params(sigma=0.25, mu=mu, n_steps=n)
            stats = tree.mc_ensemble(p, 100_000, 31 + n)
            assert abs(stats.terminal_mean - 100.0) < 4 * stats.stderr_mean

    def test_quantiles_ordered(self):
        p = params(n_steps=128)
        s = tree.mc_ensemble(p, 5000, 9)
        assert s.q01 <= s.q25 <= s.terminal_median <= s.q75 <= s.q99
        assert 0.0 <= s.loss_probability <= 1.0

    def test_worker_count_is_immaterial(self):
        p = params(n_steps=200, d=0.001)
        a = tree.mc_ensemble(p, 10_000, 4, workers=1)
        b = tree.mc_ensemble(p, 10_000, 4, workers=4)
        assert a == b

    def test_prefix_stability(self):
        p = params(n_steps=64)
        small = tree.sample_terminal_prices(p, 100, 8)
        large = tree.sample_terminal_prices(p, 5000, 8)
        assert np.array_equal(small, large[:100])

    def test_ensemble_paths_match_simulate_walk(self):
        p = params(n_steps=32, d=0.002)
        (walk0, path0), = tree.ensemble_paths(p, 1, 55)
        direct = tree.simulate_walk(p, 55)
        assert np.array_equal(walk0.values, direct.values)
        np.testing.assert_allclose(
            path0.prices, tree.walk_to_prices(p, direct).prices, rtol=0)


class TestAsymmetry:
    def test_loss_probability_grows_with_horizon(self):
        # exact binomial check, not Monte Carlo
        mu = tree.mu_for_drift(0.3, 1 / 64, 0.0)
        losses = []
        for n in (64, 256, 1024):
            p = params(sigma=0.3, mu=mu, tau=1 / 64, n_steps=n)
            losses.append(tree.exact_loss_probability(p))
        assert all(x > 0.5 for x in losses)
        assert losses[0] < losses[1] < losses[2]

    def test_exact_loss_probability_against_binomial_cdf(self):
        p = params(sigma=0.2, mu=-0.4, tau=0.01, n_steps=100)
        # S_N < S0 iff k < n/2 when d = 0
        assert tree.exact_loss_probability(p) == pytest.approx(
            float(binom.cdf(49, 100, p.p_up)), rel=1e-14)

import numpy as np
import pytest

from bubbletree import data_io, kappa
from bubbletree.errors import DataError


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


PRICES_LONG = """ticker,date,adjusted_close
AAA,2021-01-04,100.0
AAA,2021-01-05,101.0
AAA,2021-01-06,102.0
BBB,2021-01-04,50.0
BBB,2021-01-05,49.5
BBB,2021-01-06,50.5
GAP,2021-01-04,10.0
GAP,2021-01-06,10.5
"""


class TestLoadPrices:
    def test_long_form_drops_gapped_ticker(self, tmp_path):
        panel, drops = data_io.load_prices(write(tmp_path / "p.csv", PRICES_LONG))
        assert panel.tickers == ["AAA", "BBB"]
        assert panel.dates == ["2021-01-04", "2021-01-05", "2021-01-06"]
        assert drops == [("GAP", "missing price on 2021-01-05")]

    def test_completeness_accounting(self, tmp_path):
        panel, drops = data_io.load_prices(write(tmp_path / "p.csv", PRICES_LONG))
        assert len(panel.tickers) + len(drops) == 3

    def test_wide_form(self, tmp_path):
        text = ("date,AAA,BBB\n"
                "2021-01-04,100.0,50.0\n"
                "2021-01-05,101.0,\n"
                "2021-01-06,102.0,50.5\n")
        panel, drops = data_io.load_prices(write(tmp_path / "w.csv", text))
        assert panel.tickers == ["AAA"]
        assert drops == [("BBB", "missing price on 2021-01-05")]

    def test_nonpositive_price_dropped_with_reason(self, tmp_path):
        text = ("ticker,date,adjusted_close\n"
                "AAA,2021-01-04,100.0\nAAA,2021-01-05,-3.0\n"
                "BBB,2021-01-04,1.0\nBBB,2021-01-05,2.0\n")
        panel, drops = data_io.load_prices(write(tmp_path / "p.csv", text))
        assert panel.tickers == ["BBB"]
        assert drops == [("AAA", "nonpositive price on 2021-01-05")]

    def test_malformed_row_reports_line(self, tmp_path):
        text = ("ticker,date,adjusted_close\n"
                "AAA,2021-01-04,100.0\nAAA,2021-01-05,oops\n")
        with pytest.raises(DataError, match=r":3"):
            data_io.load_prices(write(tmp_path / "p.csv", text))

    def test_unknown_header(self, tmp_path):
        with pytest.raises(DataError, match="header"):
            data_io.load_prices(write(tmp_path / "p.csv", "a,b\n1,2\n"))

    def test_empty_result_is_error(self, tmp_path):
        text = "ticker,date,adjusted_close\nAAA,2021-01-04,100.0\n"
        with pytest.raises(DataError):
            data_io.load_prices(write(tmp_path / "p.csv", text),
                                date_range=("2030-01-01", None))

    def test_date_range_filter(self, tmp_path):
        panel, drops = data_io.load_prices(
            write(tmp_path / "p.csv", PRICES_LONG),
            date_range=("2021-01-05", "2021-01-06"))
        assert panel.dates == ["2021-01-05", "2021-01-06"]
        assert panel.tickers == ["AAA", "BBB"]
        assert drops == [("GAP", "missing price on 2021-01-05")]

    def test_range_can_rescue_gapped_ticker(self, tmp_path):
        # GAP trades on 01-04 and 01-06 only; restricting to 01-06 keeps it
        panel, drops = data_io.load_prices(
            write(tmp_path / "p.csv", PRICES_LONG),
            date_range=("2021-01-06", None))
        assert panel.tickers == ["AAA", "BBB", "GAP"]
        assert drops == []

    def test_duplicate_cell_is_error(self, tmp_path):
        text = ("ticker,date,adjusted_close\n"
                "AAA,2021-01-04,100.0\nAAA,2021-01-04,101.0\n")
        with pytest.raises(DataError, match="duplicate"):
            data_io.load_prices(write(tmp_path / "p.csv", text))

    def test_deterministic_reload(self, tmp_path):
        path = write(tmp_path / "p.csv", PRICES_LONG)
        a, da = data_io.load_prices(path)
        b, db = data_io.load_prices(path)
        assert a.tickers == b.tickers and a.dates == b.dates
        assert np.array_equal(a.prices, b.prices)
        assert da == db


class TestRoundTrip:
    def test_write_then_load_is_identity(self, tmp_path):
        rng = np.random.default_rng(23)
        panel = data_io.PricePanel(
            tickers=["AAA", "BBB", "CCC"],
            dates=[f"2021-02-{d:02d}" for d in range(1, 11)],
            prices=rng.uniform(5, 500, size=(3, 10)))
        path = tmp_path / "roundtrip.csv"
        data_io.write_prices(panel, path)
        loaded, drops = data_io.load_prices(path)
        assert drops == []
        assert loaded.tickers == panel.tickers
        assert loaded.dates == panel.dates
        np.testing.assert_allclose(loaded.prices, panel.prices, rtol=1e-12)

    def test_fixture_spans_325_dates(self, fixture_prices):
        panel, drops = data_io.load_prices(fixture_prices)
        assert drops == []
        assert len(panel.dates) == 325
        returns = kappa.compute_returns(panel)
        assert returns.returns.shape[1] == 324


UNIVERSE = """ticker,market_cap,sector,book_value_per_share
AAA,1e9,Industrials,12.0
BBB,2e10,Technology,3.5
CCC,,Technology,8.0
DDD,5e8,Utilities,-2.0
"""


class TestLoadUniverse:
    def test_missing_cap_dropped_with_reason(self, tmp_path):
        universe, drops = data_io.load_universe(write(tmp_path / "u.csv", UNIVERSE))
        assert universe.tickers == ["AAA", "BBB", "DDD"]
        assert drops == [("CCC", "missing market_cap")]

    def test_negative_book_retained(self, tmp_path):
        universe, _ = data_io.load_universe(write(tmp_path / "u.csv", UNIVERSE))
        assert universe.book_value["DDD"] == -2.0

    def test_duplicate_ticker_is_error(self, tmp_path):
        text = UNIVERSE + "AAA,3e9,Technology,1.0\n"
        with pytest.raises(DataError, match="AAA"):
            data_io.load_universe(write(tmp_path / "u.csv", text))

    def test_sector_counts_match_planted(self, fixture_universe):
        universe, drops = data_io.load_universe(fixture_universe)
        assert drops == []
        counts = {}
        for t in universe.tickers:
            counts[universe.sector[t]] = counts.get(universe.sector[t], 0) + 1
        assert counts == {"Industrials": 4, "Technology": 5, "Utilities": 3}

    def test_header_enforced(self, tmp_path):
        with pytest.raises(DataError, match="header"):
            data_io.load_universe(write(tmp_path / "u.csv", "ticker,cap\nA,1\n"))


class TestAlign:
    def panel(self, tickers):
        return data_io.PricePanel(
            tickers=tickers, dates=["2021-01-04", "2021-01-05"],
            prices=np.full((len(tickers), 2), 10.0))

    def universe(self, tickers):
        return data_io.UniverseSnapshot(
            tickers=sorted(tickers),
            market_cap={t: 1e9 for t in tickers},
            sector={t: "S" for t in tickers},
            book_value={t: 1.0 for t in tickers})

    def test_identical_sets(self):
        panel, universe = data_io.align(self.panel(["A", "B"]),
                                        self.universe(["A", "B"]))
        assert panel.tickers == ["A", "B"] == universe.tickers

    def test_disjoint_sets_error(self):
        with pytest.raises(DataError):
            data_io.align(self.panel(["A"]), self.universe(["B"]))

    def test_partial_overlap_lexicographic(self):
        panel, universe = data_io.align(self.panel(["C", "A", "B"]),
                                        self.universe(["B", "C", "Z"]))
        assert panel.tickers == ["B", "C"] == universe.tickers

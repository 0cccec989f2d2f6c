"""Price series, panels, cost vectors, compounding, and CSV round trips."""

import numpy as np
import pytest

from kellyfreq import (
    CompoundPanel,
    CostVector,
    PriceSeries,
    ReturnPanel,
    assemble_panel,
    compound,
    compound_extremes,
    read_price_csv,
    to_returns,
    write_compound_csv,
)
from kellyfreq.exceptions import (
    ConfigError,
    CostLengthMismatch,
    DataError,
    DuplicateSymbol,
    MalformedRow,
    NoCommonTimestamps,
    NonPositivePrice,
    PeriodExceedsData,
    SeriesTooShort,
)
from kellyfreq.market_data import as_cost_array


class TestPriceSeries:
    def test_returns_from_prices(self):
        s = PriceSeries("X", (0, 1, 2), np.array([100.0, 110.0, 99.0]))
        np.testing.assert_allclose(to_returns(s), [0.1, -0.1])

    def test_requires_two_prices(self):
        s = PriceSeries("X", (0,), np.array([100.0]))
        with pytest.raises(SeriesTooShort):
            to_returns(s)

    def test_rejects_nonpositive_price(self):
        with pytest.raises(NonPositivePrice):
            PriceSeries("X", (0, 1), np.array([100.0, 0.0]))

    def test_rejects_unsorted_timestamps(self):
        with pytest.raises(DataError):
            PriceSeries("X", (1, 0), np.array([1.0, 2.0]))

    def test_rejects_duplicate_timestamps(self):
        with pytest.raises(DataError):
            PriceSeries("X", (0, 0), np.array([1.0, 2.0]))


class TestReturnPanel:
    def test_basic_properties(self):
        panel = ReturnPanel(("A", "B"), np.zeros((5, 2)))
        assert panel.n_periods == 5
        assert panel.n_assets == 2

    def test_needs_two_assets(self):
        with pytest.raises(DataError):
            ReturnPanel(("A",), np.zeros((5, 1)))

    def test_rejects_duplicate_asset_names(self):
        with pytest.raises(DuplicateSymbol):
            ReturnPanel(("A", "A"), np.zeros((5, 2)))

    def test_rejects_total_loss_returns(self):
        X = np.zeros((3, 2))
        X[1, 0] = -1.0
        with pytest.raises(DataError):
            ReturnPanel(("A", "B"), X)

    def test_riskless_column_must_be_constant(self):
        X = np.zeros((3, 2))
        X[1, 0] = 0.01
        with pytest.raises(DataError):
            ReturnPanel(("A", "B"), X, riskless_index=0)

    def test_riskless_rate_exposed(self):
        X = np.column_stack([np.full(4, 0.02), np.arange(4) / 10.0])
        panel = ReturnPanel(("CASH", "B"), X, riskless_index=0)
        assert panel.riskless_rate == pytest.approx(0.02)

    def test_window_slices_rows(self):
        X = np.arange(12, dtype=float).reshape(6, 2) / 100.0
        panel = ReturnPanel(("A", "B"), X)
        sub = panel.window(2, 5)
        assert sub.n_periods == 3
        np.testing.assert_allclose(sub.samples, X[2:5])


class TestAssemblePanel:
    def test_intersection_join(self):
        a = PriceSeries("A", (0, 1, 2, 3), np.array([1.0, 2.0, 4.0, 8.0]))
        b = PriceSeries("B", (1, 2, 3, 4), np.array([10.0, 20.0, 10.0, 5.0]))
        panel = assemble_panel([a, b])
        # common stamps {1,2,3} leave two return periods
        assert panel.n_periods == 2
        np.testing.assert_allclose(panel.samples[:, 0], [1.0, 1.0])
        np.testing.assert_allclose(panel.samples[:, 1], [1.0, -0.5])

    def test_riskless_column_appended(self):
        a = PriceSeries("A", (0, 1, 2), np.array([1.0, 2.0, 4.0]))
        b = PriceSeries("B", (0, 1, 2), np.array([1.0, 1.0, 1.0]))
        panel = assemble_panel([a, b], rf=0.01, include_riskless=True)
        assert panel.assets == ("A", "B", "CASH")
        assert panel.riskless_index == 2
        np.testing.assert_allclose(panel.samples[:, 2], 0.01)

    def test_duplicate_symbol_rejected(self):
        a = PriceSeries("A", (0, 1), np.array([1.0, 2.0]))
        with pytest.raises(DuplicateSymbol):
            assemble_panel([a, a])

    def test_no_overlap_rejected(self):
        a = PriceSeries("A", (0, 1), np.array([1.0, 2.0]))
        b = PriceSeries("B", (5, 6), np.array([1.0, 2.0]))
        with pytest.raises(NoCommonTimestamps):
            assemble_panel([a, b])


class TestCostVector:
    def test_bounds(self):
        CostVector(np.array([0.0, 0.5]))
        with pytest.raises(DataError):
            CostVector(np.array([-0.01]))
        with pytest.raises(DataError):
            CostVector(np.array([0.995]))

    def test_constructors(self):
        np.testing.assert_allclose(CostVector.zero(3).costs, 0.0)
        np.testing.assert_allclose(CostVector.uniform(0.02, 2).costs, 0.02)

    def test_from_spec_scalar(self):
        cv = CostVector.from_spec("0.01", ["A", "B"])
        np.testing.assert_allclose(cv.costs, [0.01, 0.01])

    def test_from_spec_per_symbol_defaults_to_zero(self):
        cv = CostVector.from_spec("B=0.05", ["A", "B", "C"])
        np.testing.assert_allclose(cv.costs, [0.0, 0.05, 0.0])

    def test_from_spec_unknown_symbol(self):
        with pytest.raises(MalformedRow):
            CostVector.from_spec("Z=0.05", ["A", "B"])

    def test_from_spec_garbage(self):
        with pytest.raises(MalformedRow):
            CostVector.from_spec("lots", ["A"])

    def test_as_cost_array_coercions(self):
        np.testing.assert_allclose(as_cost_array(0.02, 3), 0.02)
        np.testing.assert_allclose(as_cost_array(CostVector.zero(2), 2), 0.0)
        with pytest.raises(CostLengthMismatch):
            as_cost_array([0.01, 0.02], 3)
        with pytest.raises(DataError):
            as_cost_array(1.0, 2)


class TestCompound:
    def test_nonoverlap_values_and_truncation(self):
        X = np.column_stack([
            [0.1, 0.2, 0.3, -0.1, 0.05],
            [0.0, 0.0, 0.0, 0.0, 0.0],
        ])
        panel = ReturnPanel(("A", "B"), X)
        cp = compound(panel, 2, 0.0, "nonoverlap")
        assert cp.n_blocks == 2  # fifth period dropped
        np.testing.assert_allclose(cp.raw[:, 0], [1.1 * 1.2 - 1, 1.3 * 0.9 - 1])
        np.testing.assert_allclose(cp.raw[:, 1], 0.0)

    def test_overlap_count_and_values(self):
        X = np.column_stack([[0.1, 0.2, 0.3], np.zeros(3)])
        panel = ReturnPanel(("A", "B"), X)
        cp = compound(panel, 2, 0.0, "overlap")
        assert cp.n_blocks == 2
        np.testing.assert_allclose(cp.raw[:, 0], [1.1 * 1.2 - 1, 1.2 * 1.3 - 1])

    def test_fee_adjustment_subtracts_costs(self):
        panel = ReturnPanel(("A", "B"), np.full((4, 2), 0.1))
        cp = compound(panel, 2, np.array([0.01, 0.03]), "nonoverlap")
        np.testing.assert_allclose(cp.fee_adjusted, cp.raw - np.array([0.01, 0.03]))

    def test_period_must_fit_data(self):
        panel = ReturnPanel(("A", "B"), np.zeros((3, 2)))
        with pytest.raises(PeriodExceedsData):
            compound(panel, 4, 0.0)
        with pytest.raises(PeriodExceedsData):
            compound(panel, 0, 0.0)

    def test_unknown_mode(self):
        panel = ReturnPanel(("A", "B"), np.zeros((3, 2)))
        with pytest.raises(ConfigError):
            compound(panel, 1, 0.0, "sideways")

    def test_from_blocks_promotes_vector(self):
        cp = CompoundPanel.from_blocks(np.array([0.1, -0.1]))
        assert cp.n_assets == 1
        assert cp.n_blocks == 2

    def test_extremes(self):
        lo, hi = compound_extremes(-0.1, 0.2, 3)
        assert lo == pytest.approx(0.9 ** 3 - 1)
        assert hi == pytest.approx(1.2 ** 3 - 1)
        with pytest.raises(DataError):
            compound_extremes(-1.0, 0.1, 2)


class TestPriceCsv:
    def test_round_trip_int_timestamps(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(
            "timestamp,symbol,price\n"
            "0,A,100.0\n0,B,50.0\n"
            "1,A,110.0\n1,B,55.0\n"
        )
        series = read_price_csv(path)
        assert [s.symbol for s in series] == ["A", "B"]
        np.testing.assert_allclose(series[0].prices, [100.0, 110.0])

    def test_iso_timestamps(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(
            "timestamp,symbol,price\n"
            "2024-01-01,A,10.0\n"
            "2024-01-02,A,12.0\n"
        )
        series = read_price_csv(path)
        np.testing.assert_allclose(to_returns(series[0]), [0.2])

    def test_malformed_price_names_line(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("timestamp,symbol,price\n0,A,100.0\n1,A,banana\n")
        with pytest.raises(MalformedRow, match="line 3"):
            read_price_csv(path)

    def test_mixed_timestamp_kinds_rejected(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("timestamp,symbol,price\n0,A,1.0\n2024-01-02,A,2.0\n")
        with pytest.raises(MalformedRow, match="line 3"):
            read_price_csv(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("time,sym,px\n0,A,1.0\n")
        with pytest.raises(MalformedRow, match="line 1"):
            read_price_csv(path)

    def test_nonpositive_price_rejected(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("timestamp,symbol,price\n0,A,-3.0\n")
        with pytest.raises(NonPositivePrice, match="line 2"):
            read_price_csv(path)

    def test_out_of_order_rows_rejected(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("timestamp,symbol,price\n1,A,1.0\n0,A,2.0\n")
        with pytest.raises(MalformedRow):
            read_price_csv(path)

    def test_write_compound_csv(self, tmp_path):
        cp = CompoundPanel.from_blocks(np.array([[0.1, 0.0], [-0.2, 0.01]]),
                                       costs=np.array([0.01, 0.0]))
        path = tmp_path / "c.csv"
        write_compound_csv(cp, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "block,asset,raw,fee_adjusted"
        assert len(lines) == 1 + 4

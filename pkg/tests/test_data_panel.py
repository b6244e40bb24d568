import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quantkit import data_panel as dp
from quantkit.errors import AlignmentError, DataError, InsufficientHistoryError, ParameterError, ParseError

DATES3 = ["2024-03-05", "2024-03-04", "2024-03-01"]


def _write(dirpath, tables):
    for key, fname in dp.FILES.items():
        dates, rows = tables[key]
        with open(os.path.join(dirpath, fname), "w") as fh:
            fh.write("\t".join(dates) + "\n")
            for t, vals in rows:
                fh.write(t + "\t" + "\t".join(vals) + "\n")


def _consistent(dates=DATES3):
    rows = [("AAA", ["10", "10.5", "11"]), ("BBB", ["20", "19.5", "21.25"])]
    return {k: (dates, rows) for k in dp.FILES}


class TestLoadPanel:
    def test_round_trip_shape(self, tmp_path):
        _write(tmp_path, _consistent())
        panel, ret = dp.load_panel(tmp_path)
        assert panel.shape == (2, 3)
        assert panel.tickers == ("AAA", "BBB")
        assert ret.convention == "overnight"

    def test_ticker_order_mismatch(self, tmp_path):
        t = _consistent()
        dates, rows = t["open"]
        t["open"] = (dates, rows[::-1])
        _write(tmp_path, t)
        with pytest.raises(AlignmentError, match="nrm.open.txt"):
            dp.load_panel(tmp_path)

    def test_one_by_one_fixture(self, tmp_path):
        tables = {
            "ret": (["2024-01-02"], [("X", ["0.01"])]),
            "open": (["2024-01-02"], [("X", ["10"])]),
            "close": (["2024-01-02"], [("X", ["11"])]),
            "volume": (["2024-01-02"], [("X", ["500"])]),
            "adj_close": (["2024-01-02"], [("X", ["5.5"])]),
        }
        _write(tmp_path, tables)
        panel, _ = dp.load_panel(tmp_path)
        assert panel.open[0, 0] == 10.0 and panel.close[0, 0] == 11.0
        assert panel.adj_close[0, 0] == 5.5

    def test_parse_error_location(self, tmp_path):
        t = _consistent()
        dates, rows = t["close"]
        t["close"] = (dates, [rows[0], ("BBB", ["20", "oops", "21"])])
        _write(tmp_path, t)
        with pytest.raises(ParseError) as exc:
            dp.load_panel(tmp_path)
        assert "3" in str(exc.value) and "oops" in str(exc.value)

    def test_missing_file(self, tmp_path):
        _write(tmp_path, _consistent())
        os.remove(tmp_path / "nrm.vol.txt")
        with pytest.raises(FileNotFoundError):
            dp.load_panel(tmp_path)

    def test_write_round_trip_bytes(self, tmp_path):
        panel, ret = dp.synthesize_panel(3, 4, 6)
        dp.write_panel(panel, ret, tmp_path / "a")
        p2, r2 = dp.load_panel(tmp_path / "a")
        dp.write_panel(p2, r2, tmp_path / "b")
        for fname in dp.FILES.values():
            a = (tmp_path / "a" / fname).read_text().rstrip()
            b = (tmp_path / "b" / fname).read_text().rstrip()
            assert a == b
        assert np.array_equal(p2.close, panel.close)

    def test_dates_must_descend(self):
        with pytest.raises(DataError):
            dp.PricePanel(("A",), ["2024-01-01", "2024-01-02"], [[1, 1]], [[1, 1]], [[1, 1]], [[1, 1]])


class TestOvernightReturns:
    def test_adjustment_chain(self):
        panel = dp.PricePanel(("A",), ["2024-01-02", "2024-01-01"], [[110.0, 90.0]], [[105.0, 100.0]],
                              [[105.0, 100.0]], [[1.0, 1.0]])
        r = dp.overnight_returns(panel).values
        assert r[0, 0] == pytest.approx(math.log(1.1), abs=1e-15)

    def test_zero_when_open_equals_prior_close(self):
        panel = dp.PricePanel(("A",), ["2024-01-03", "2024-01-02", "2024-01-01"], [[12.0, 11.0, 9.0]],
                              [[13.0, 12.0, 11.0]], [[13.0, 12.0, 11.0]], [[1.0] * 3])
        assert np.all(dp.overnight_returns(panel).values == 0.0)

    def test_split_invariance(self):
        # 2:1 split effective at the newer day: raw prices halve, adjusted history is rescaled
        base = dp.PricePanel(("A",), ["2024-01-02", "2024-01-01"], [[101.0, 99.0]], [[102.0, 100.0]],
                             [[102.0, 100.0]], [[1.0, 1.0]])
        split = dp.PricePanel(("A",), ["2024-01-02", "2024-01-01"], [[50.5, 99.0]], [[51.0, 100.0]],
                              [[51.0, 50.0]], [[2.0, 1.0]])
        a = dp.overnight_returns(base).values
        b = dp.overnight_returns(split).values
        assert np.allclose(a, b, rtol=0, atol=1e-15)

    def test_single_column_rejected(self):
        panel = dp.PricePanel(("A",), ["2024-01-01"], [[1.0]], [[1.0]], [[1.0]], [[1.0]])
        with pytest.raises(InsufficientHistoryError):
            dp.overnight_returns(panel)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.1, 10.0), st.integers(0, 4))
    def test_adjustment_rescaling_invariance(self, factor, seed):
        panel, _ = dp.synthesize_panel(seed, 3, 6)
        scaled = dp.PricePanel(panel.tickers, panel.dates, panel.open, panel.close, panel.adj_close * factor,
                               panel.volume)
        assert np.allclose(dp.overnight_returns(panel).values, dp.overnight_returns(scaled).values,
                           rtol=0, atol=1e-12)


class TestAddv:
    def _panel(self, vc):
        n = len(vc)
        dates = [f"2024-01-{d:02d}" for d in range(n + 1, 1, -1)]
        return dp.PricePanel(("A",), dates, [[1.0] * n], [[1.0] * n], [[1.0] * n], [vc])

    def test_hand_mean(self):
        assert dp.addv(self._panel([10.0, 20.0, 30.0]), 2)[0, 0] == 15.0

    def test_constant(self):
        assert np.all(dp.addv(self._panel([7.0] * 5), 3) == 7.0)

    def test_window_too_long(self):
        with pytest.raises(InsufficientHistoryError):
            dp.addv(self._panel([1.0, 2.0]), 3)

    def test_window_one_identity(self):
        panel, _ = dp.synthesize_panel(1, 3, 8)
        assert np.array_equal(dp.addv(panel, 1), panel.volume * panel.close)


class TestSynth:
    def test_deterministic(self):
        a, ra = dp.synthesize_panel(11, 4, 9)
        b, rb = dp.synthesize_panel(11, 4, 9)
        assert np.array_equal(a.close, b.close) and np.array_equal(ra.values, rb.values)

    def test_zero_vol_constant(self):
        p, r = dp.synthesize_panel(1, 2, 5, dp.SynthSpec(vol=0.0, drift=0.0))
        assert np.all(p.close == p.close[:, :1]) and np.all(p.open == p.close)
        assert np.all(r.values == 0.0)

    def test_invariants_hold(self):
        p, r = dp.synthesize_panel(1, 3, 5)
        assert p.shape == (3, 5) and np.all(p.close > 0) and np.all(p.volume >= 0)
        assert dp.check_ret_consistency(p, r) < 1e-12

    def test_bad_counts(self):
        with pytest.raises(ParameterError):
            dp.synthesize_panel(1, 0, 5)

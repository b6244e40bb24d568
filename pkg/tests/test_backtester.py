import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quantkit import backtester as bt
from quantkit.data_panel import PricePanel, ReturnPanel, synthesize_panel
from quantkit.errors import DataError, InsufficientHistoryError, ParameterError

SMALL = dict(days=12, d_r=3, d_addv=4, n_addv=5, inv_lvl=1e6, bnds=0.5)


class TestRebuildIndex:
    def test_examples(self):
        assert bt.rebuild_index(10, 10, 3) == 10
        assert bt.rebuild_index(1, 10, 3) == 1

    @settings(max_examples=100, deadline=None)
    @given(st.integers(2, 60), st.integers(1, 10), st.integers(0, 1000))
    def test_periodic_and_blockwise(self, d, d_r, seed):
        i = 1 + seed % d
        ix = bt.rebuild_index(i, d, d_r)
        assert i <= ix <= d and (d - ix) % d_r == 0 and ix - i < d_r
        if i + d_r <= d:
            assert bt.rebuild_index(i + d_r, d, d_r) - ix == d_r

    def test_range(self):
        with pytest.raises(ParameterError):
            bt.rebuild_index(0, 10, 3)


class TestCostAdjust:
    def test_identity(self):
        E = np.array([0.01, -0.02])
        out, tau = bt.cost_adjust(E, [1, 1], [1, 1], include=False)
        assert np.array_equal(out, E) and not tau.any()

    def test_uniform_ratio(self):
        out, tau = bt.cost_adjust([0.005, -0.0005, 0.0], [2.0] * 3, [4.0] * 3)
        assert np.allclose(tau, 1e-3, rtol=1e-15)
        assert out.tolist() == pytest.approx([0.004, 0.0, 0.0])

    def test_zero_addv(self):
        with pytest.raises(DataError):
            bt.cost_adjust([0.01], [1.0], [0.0])

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 10_000))
    def test_never_increases(self, seed):
        g = np.random.default_rng(seed)
        E = g.normal(0, 2e-3, 10)
        out, tau = bt.cost_adjust(E, g.uniform(0, 0.05, 10), g.uniform(1e5, 1e7, 10))
        assert np.all(np.abs(out) <= np.abs(E)) and np.all(out * E >= 0)
        assert tau.mean() == pytest.approx(1e-3)


class TestMetrics:
    def test_annualized(self):
        _, annual, _, _ = bt.performance_metrics([1e4, 3e4], inv_lvl=2e7)
        assert annual == pytest.approx(25.2)

    def test_constant_sharpe_flag(self):
        assert bt.performance_metrics([5.0] * 4)[2] is None

    def test_sharpe(self, rng):
        p = rng.normal(100, 50, 30)
        assert bt.performance_metrics(p)[2] == pytest.approx(p.mean() / p.std(ddof=1) * math.sqrt(252))

    def test_cps(self):
        # $100 on 10,000 shares traded: 5,000 in, 5,000 out
        assert bt.performance_metrics([100.0], [[5000.0]], [[1.0]])[3] == pytest.approx(1.0)

    def test_empty(self):
        with pytest.raises(InsufficientHistoryError):
            bt.performance_metrics([])


class TestConfig:
    def test_defaults(self):
        c = bt.BacktestConfig()
        assert (c.days, c.d_r, c.d_addv, c.n_addv, c.inv_lvl, c.bnds) == (1260, 21, 21, 2000, 2e7, 0.01)

    @pytest.mark.parametrize("bad", [dict(days=1), dict(d_r=1), dict(inv_lvl=0.0), dict(bnds=-1.0),
                                     dict(mode="carry"), dict(n_addv=0)])
    def test_invalid(self, bad):
        with pytest.raises(ParameterError):
            bt.BacktestConfig(**bad)


class TestRun:
    def test_bounds_and_gross(self):
        panel, ret = synthesize_panel(3, 8, 30)
        cfg = bt.BacktestConfig(**SMALL, incl_cost=True)
        rep = bt.run_backtest(panel, ret, cfg)
        traded = [j for j in range(rep.pnl.size) if j + 1 not in rep.no_trade_days]
        gross = np.abs(rep.holdings).sum(axis=0)
        assert np.allclose(gross[traded], cfg.inv_lvl, rtol=1e-12, atol=0)
        addv = (panel.volume * panel.close)
        for j in traded:
            if j + 1 in rep.bound_violations:
                continue
            ix = bt.rebuild_index(j + 2, cfg.days, cfg.d_r)
            cap = cfg.bnds * addv[:, ix - 1 : ix - 1 + cfg.d_addv].mean(axis=1)
            assert np.max(np.abs(rep.holdings[:, j]) - cap) <= 1e-6 * cfg.inv_lvl

    def test_zero_vol_panel(self):
        panel, ret = synthesize_panel(1, 4, 30)
        flat = np.full(panel.open.shape, 50.0)
        p0 = PricePanel(panel.tickers, panel.dates, flat, flat, flat, panel.volume)
        r0 = ReturnPanel(ret.tickers, ret.dates, np.zeros_like(ret.values))
        rep = bt.run_backtest(p0, r0, bt.BacktestConfig(**SMALL))
        assert not rep.holdings.any() and not rep.pnl.any()
        assert rep.sharpe is None and rep.cps is None

    def test_momentum_runs(self):
        panel, ret = synthesize_panel(5, 6, 30)
        rep = bt.run_backtest(panel, ret, bt.BacktestConfig(**SMALL, mode="momentum"))
        assert rep.pnl.shape == (11,) and np.isfinite(rep.total_pnl)

    def test_universe_subset(self):
        panel, ret = synthesize_panel(5, 8, 30)
        rep = bt.run_backtest(panel, ret, bt.BacktestConfig(**dict(SMALL, n_addv=3)))
        assert np.all(np.count_nonzero(rep.holdings, axis=0) <= 3)

    def test_history_check(self):
        panel, ret = synthesize_panel(5, 3, 10)
        with pytest.raises(InsufficientHistoryError):
            bt.run_backtest(panel, ret, bt.BacktestConfig(**SMALL))

    def test_deterministic_and_json(self):
        panel, ret = synthesize_panel(9, 5, 30)
        cfg = bt.BacktestConfig(**SMALL)
        a, b = bt.run_backtest(panel, ret, cfg), bt.run_backtest(panel, ret, cfg)
        assert np.array_equal(a.holdings, b.holdings)
        d = json.loads(json.dumps(a.to_dict()))
        assert d["config"]["days"] == 12 and len(d["pnl"]) == 11

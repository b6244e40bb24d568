import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quantkit import futures_fx as ff
from quantkit.errors import DegenerateError, InsufficientHistoryError, ParameterError


class TestCashAndCarry:
    def test_zero_rate(self):
        q = ff.FuturesQuote(100.0, 103.0, 0.0, 0.0, 0.5)
        assert ff.futures_fair_value(q) == 100.0 and ff.futures_basis(q) == pytest.approx(0.03)

    def test_hand(self):
        q = ff.FuturesQuote(100.0, 100.0, 2.0, 0.05, 1.0)
        assert ff.futures_fair_value(q) == pytest.approx(98 * math.exp(0.05), rel=1e-15)

    def test_fair_no_trade(self):
        F = 98 * math.exp(0.05)
        q = ff.FuturesQuote(100.0, F, 2.0, 0.05, 1.0)
        assert ff.basis_signal(ff.futures_basis(q)) == "none"
        assert ff.basis_signal(0.02, 0.01) == "sell_futures_buy_cash"
        assert ff.basis_signal(-0.02, 0.01) == "buy_futures_sell_cash"


class TestCommodities:
    def test_roll_ratio(self):
        assert ff.roll_ratio([52.0], [50.0])[0] > 1

    def test_hp(self):
        assert ff.hedging_pressure([10.0], [0.0])[0] == 1.0
        with pytest.raises(DegenerateError):
            ff.hedging_pressure([0.0], [0.0])

    def test_value(self):
        assert ff.commodity_value([40.0], [40.0])[0] == 1.0

    def test_hp_portfolio(self):
        spec = np.array([0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05])
        hedg = np.array([0.1, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.95])
        w = ff.hedging_pressure_portfolio(spec, hedg).weights
        assert w[0] > 0 and w[-1] < 0 and abs(w.sum()) < 1e-15

    def test_skew_portfolio(self, rng):
        R = rng.normal(size=(10, 200))
        R[0] = np.abs(R[0]) ** 3  # strongly right-skewed: shorted
        w = ff.skew_premium_portfolio(R).weights
        assert w[0] < 0 and abs(w.sum()) < 1e-15


class TestOU:
    def test_tau_zero(self):
        for k, a, s, X in [(0.5, 3.0, 0.2, 3.5), (5.0, 1.0, 1.0, -0.4)]:
            assert ff.ou_log_futures(ff.OUParams(k, a, s), X, 0.0) == X

    def test_large_kappa(self):
        p = ff.OUParams(1e6, 2.0, 0.3)
        assert ff.ou_log_futures(p, 5.0, 1.0) == pytest.approx(2.0 + 0.09 / 4e6, rel=1e-12)

    def test_fit_recovery(self):
        tau = np.array([0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0])
        p = ff.OUParams(1.0, math.log(50), 0.3)
        X = math.log(45.0)
        fit = ff.ou_fit(tau, ff.ou_log_futures(p, X, tau))
        assert fit.params.kappa == pytest.approx(1.0, rel=0.01)
        assert fit.params.a == pytest.approx(math.log(50), rel=0.01)
        assert fit.params.sigma == pytest.approx(0.3, rel=0.01)

    def test_fit_needs_three(self):
        with pytest.raises(InsufficientHistoryError):
            ff.ou_fit([0.5, 1.0], [1.0, 1.1])

    def test_params_validated(self):
        with pytest.raises(ParameterError):
            ff.OUParams(0.0, 1.0, 0.1)


class TestHedgeRatios:
    def test_spark(self):
        h = ff.hedge_ratio("spark", H=7.5)
        assert h.ratio == pytest.approx(0.552, abs=1e-15)
        assert Fraction(h.fuel_contracts, h.power_contracts) == Fraction(69, 125)
        assert (h.fuel_contracts, h.power_contracts) == (69, 125)

    def test_conversion_and_duration(self):
        assert ff.hedge_ratio("conversion_factor", C=1.0, M_B=1e5, M_F=1e5) == 1.0
        assert ff.hedge_ratio("duration", beta=1.2, D_B=500.0, D_F=100.0) == pytest.approx(6.0)
        with pytest.raises(DegenerateError):
            ff.hedge_ratio("duration", D_B=1.0, D_F=0.0)

    def test_cross(self, rng):
        f = rng.normal(size=500)
        s = 0.7 * f + 0.1 * rng.normal(size=500)
        assert ff.hedge_ratio("cross", spot_changes=s, futures_changes=f) == pytest.approx(
            np.polyfit(f, s, 1)[0], rel=1e-10)

    def test_weather_orthogonal(self):
        idx = np.array([1.0, -1.0, 1.0, -1.0])
        q = np.array([1.0, 1.0, -1.0, -1.0])
        assert ff.hedge_ratio("weather", demand=q, index=idx) == 0.0
        with pytest.raises(DegenerateError):
            ff.hedge_ratio("weather", demand=q, index=np.ones(4))

    def test_degree_days(self):
        assert ff.degree_days([60.0, 70.0], [70.0, 80.0]) == (10.0, 0.0)


class TestFuturesXsec:
    def test_contrarian_hand(self):
        assert np.allclose(ff.futures_xsec_weights([0.01, -0.01]).weights, [-0.5, 0.5])
        assert ff.futures_xsec_weights([0.02, 0.02, 0.02]).no_trade

    def test_trend_sign(self):
        w = ff.futures_xsec_weights([0.1, 0.2, 0.3], "trend_sign", sigma=[1.0, 1.0, 1.0]).weights
        assert np.allclose(w, 1 / 3)

    def test_tanh_limit(self):
        R = np.array([0.01, -0.02, 0.03])
        w = ff.futures_xsec_weights(R, "trend_tanh", sigma=[1.0, 1.0, 1.0], kappa=1e6).weights
        assert np.array_equal(np.sign(w), np.sign(R))

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 10_000))
    def test_neutrality(self, seed):
        g = np.random.default_rng(seed)
        R = g.normal(size=9)
        s = g.uniform(0.1, 1, 9)
        for mode in ("contrarian", "trend_demeaned", "trend_two_gamma"):
            wv = ff.futures_xsec_weights(R, mode, sigma=s)
            if wv.no_trade:
                continue
            assert abs(wv.weights.sum()) < 1e-12, mode
            if mode != "trend_demeaned":
                assert np.abs(wv.weights).sum() == pytest.approx(1.0, abs=1e-12)

    def test_filtered(self, rng):
        n = 8
        wv = ff.futures_xsec_weights(rng.normal(size=n), "contrarian_filtered",
                                     volume=rng.uniform(1, 2, n), volume_prev=np.ones(n),
                                     open_interest=rng.uniform(1, 2, n), open_interest_prev=np.ones(n))
        assert np.count_nonzero(wv.weights) <= 2 and abs(wv.weights.sum()) < 1e-15

    def test_calendar_stance(self):
        assert ff.calendar_spread_stance("supply-low-demand-high")["near"] == 1
        s = ff.calendar_spread_stance("supply-high-demand-low")
        assert (s["near"], s["deferred"]) == (-1, 1)


class TestFX:
    def test_equal_rates(self):
        p = ff.fx_parity(100.0, 0.03, 0.03)
        assert p.forward == 100.0 and p.forward_discount == 0.0

    def test_hand(self):
        assert ff.fx_parity(100.0, 0.02, 0.0).forward == pytest.approx(102.0)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.01, 1000), st.floats(-0.05, 0.05), st.floats(-0.05, 0.05))
    def test_cirp_round_trip_and_discount(self, S, rd, rf):
        p = ff.fx_parity(S, rd, rf)
        # borrow 1 domestic, buy foreign, deposit, sell forward, repay
        assert (1 / S) * (1 + rf) * p.forward - (1 + rd) == pytest.approx(0.0, abs=1e-14)
        assert abs(p.forward_discount - p.discount_approx) <= max(rd**2, rf**2) + 1e-15

    def test_carry_portfolios(self):
        w = ff.fx_carry_portfolio([0.04, 0.03, -0.01, -0.02], "hml", q=0.5).weights
        assert w.tolist() == [0.25, 0.25, -0.25, -0.25]
        assert ff.fx_carry_portfolio([0.01] * 4, "hml").no_trade
        assert np.allclose(ff.fx_carry_portfolio([0.01, 0.03, -0.01], "dollar").weights, 1 / 3)

    def test_triangular(self):
        arb = ff.triangular_arb(ff.FXQuote(1.2, 1.2), ff.FXQuote(0.9, 0.9), ff.FXQuote(1.05, 1.05))
        assert arb.forward_chain == pytest.approx(1.0286, abs=1e-4) and arb.profitable

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(1e-6, 0.01))
    def test_triangular_consistent(self, ab, bc, spread):
        ac = ab * bc
        arb = ff.triangular_arb(ff.FXQuote(ab, ab), ff.FXQuote(bc, bc), ff.FXQuote(ac, ac))
        assert arb.forward_chain == pytest.approx(1.0, rel=1e-14)
        assert arb.reverse_chain == pytest.approx(1.0, rel=1e-14)
        wide = ff.triangular_arb(ff.FXQuote(ab * (1 - spread), ab), ff.FXQuote(bc, bc), ff.FXQuote(ac, ac))
        assert wide.forward_chain < 1

    def test_hp_trend(self):
        rising = 100.0 - np.arange(30.0)  # most recent first
        assert ff.hp_trend_signal(rising, 3, 12) == "buy"
        assert ff.hp_trend_signal(np.full(30, 5.0), 3, 12) == "hold"
        with pytest.raises(InsufficientHistoryError):
            ff.hp_trend_signal(rising, 3, 40)

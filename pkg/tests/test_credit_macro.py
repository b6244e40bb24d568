import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from quantkit import credit_macro as cm
from quantkit.errors import ConvergenceError, DegenerateError, ParameterError


def tranche(losses, probs, a=0.03, d=0.07, pool=100.0, n=None):
    n = n or len(losses)
    times = np.arange(1, n + 1) * 0.25
    return cm.TrancheSpec(a, d, pool, times, np.exp(-0.03 * times), losses, probs)


class TestCDO:
    def test_hand_clamp(self):
        t = tranche([[5.0]], [[1.0]])
        assert cm.cdo_expected_loss(t, 0) == pytest.approx(2.0)

    def test_below_and_above(self):
        assert cm.cdo_expected_loss(tranche([[1.0]], [[1.0]]), 0) == 0.0
        assert cm.cdo_expected_loss(tranche([[50.0]], [[1.0]]), 0) == pytest.approx(4.0)

    def test_validation(self):
        with pytest.raises(ParameterError):
            tranche([[1.0, 2.0]], [[0.7, 0.6]])
        with pytest.raises(ParameterError):
            cm.TrancheSpec(0.07, 0.03, 100.0, [1.0], [0.9], [[1.0]], [[1.0]])

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(0, 200), min_size=1, max_size=5), st.floats(0, 50))
    def test_monotone_bounded(self, ls, bump):
        p = np.full(len(ls), 1.0 / len(ls))
        t = tranche([ls], [p])
        base = cm.cdo_expected_loss(t, 0)
        assert 0 <= base <= t.tranche_notional + 1e-12
        bumped = tranche([np.array(ls) + bump], [p])
        assert cm.cdo_expected_loss(bumped, 0) >= base - 1e-12

    def test_zero_losses(self):
        t = tranche([[0.0]] * 4, [[1.0]] * 4)
        v = cm.tranche_mtm_and_spread(t, 0.05)
        assert v.par_spread == 0.0
        assert v.mtm == pytest.approx(0.05 * np.sum(t.discounts * 0.25 * 4.0), rel=1e-14)

    def test_par_spread_zero_mtm(self, rng):
        losses = [np.sort(rng.uniform(0, 10, 3)) for _ in range(4)]
        probs = [np.full(3, 0.3)] * 4
        t = tranche(losses, probs)
        v = cm.tranche_mtm_and_spread(t, 0.01)
        assert cm.tranche_mtm_and_spread(t, v.par_spread).mtm == pytest.approx(0.0, abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0, 0.2), st.floats(0, 0.2))
    def test_linearity(self, s1, s2):
        t = tranche([[2.0, 6.0]] * 3, [[0.1, 0.05]] * 3)
        v1, v2 = cm.tranche_mtm_and_spread(t, s1), cm.tranche_mtm_and_spread(t, s2)
        assert v1.mtm - v2.mtm == pytest.approx((s1 - s2) * v1.risky_duration, rel=1e-12, abs=1e-14)
        assert v1.mtm == pytest.approx((s1 - v1.par_spread) * v1.risky_duration, rel=1e-12, abs=1e-14)

    def test_wiped_out(self):
        v = cm.tranche_mtm_and_spread(tranche([[100.0]] * 2, [[1.0]] * 2), 0.02)
        assert v.degenerate and math.isnan(v.par_spread)

    def test_deltas(self):
        assert cm.tranche_delta(3.0, 3.0) == 1.0
        assert cm.tranche_delta(2.0, 4.0) == 0.5
        low, high, ix = 2.0, 5.0, 4.0
        assert cm.tranche_delta(low, high) * cm.tranche_delta(high, ix) == pytest.approx(cm.tranche_delta(low, ix))
        with pytest.raises(DegenerateError):
            cm.tranche_delta(1.0, 0.0)

    def test_curve_trade(self):
        carry, pnl = cm.curve_trade_carry(100.0, 0.05, 100.0, 0.02, 0.25, 3.0, 1.0)
        assert carry == pytest.approx(0.75) and pnl == 2.0
        assert cm.curve_trade_carry(100.0, 0.05, 100.0, 0.02, 0.0)[0] == 0.0
        Ms = cm.curve_trade_short_notional(100.0, "carry", S_long=0.05, S_short=0.02)
        assert 100.0 * 0.05 == pytest.approx(Ms * 0.02)
        assert cm.curve_trade_short_notional(100.0, "duration", dur_long=3.0, dur_short=4.0) == 75.0


class TestMBS:
    def test_already_monotone(self):
        h = cm.mbs_monotone_hedge([0.01, 0.02, 0.03], [105.0, 103.0, 100.0], 0.05)
        assert h.fitted.tolist() == [105.0, 103.0, 100.0]

    def test_pool_pair(self):
        h = cm.mbs_monotone_hedge([0.01, 0.02, 0.03], [100.0, 102.0, 99.0], 0.05)
        assert h.fitted.tolist() == [101.0, 101.0, 99.0]

    def test_hedge_ratio(self):
        h = cm.mbs_monotone_hedge([0.01, 0.02, 0.03], [105.0, 103.0, 100.0], 0.05, at_rate=0.025)
        assert h.slope == pytest.approx(-300.0) and h.hedge_ratio == pytest.approx(6000.0)

    def test_errors(self):
        with pytest.raises(DegenerateError):
            cm.mbs_monotone_hedge([0.02] * 3, [1.0, 2.0, 3.0], 0.05)
        with pytest.raises(ParameterError):
            cm.mbs_monotone_hedge([0.01, 0.02], [1.0, 2.0], 0.05)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_projection_vs_qp(self, seed):
        g = np.random.default_rng(seed)
        n = int(g.integers(3, 7))
        R = np.sort(g.choice(np.arange(1, 100), n, replace=False) / 1000.0)
        P = 100 - 50 * R + g.normal(0, 1, n)
        h = cm.mbs_monotone_hedge(R, P, 0.05)
        assert np.all(np.diff(h.fitted) <= 1e-12)
        cons = [{"type": "ineq", "fun": (lambda x, i=i: x[i] - x[i + 1])} for i in range(n - 1)]
        ref = minimize(lambda x: np.sum((x - P) ** 2), np.full(n, P.mean()), constraints=cons,
                       method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
        assert np.sum((h.fitted - P) ** 2) <= ref.fun + 1e-9


class TestConvertibles:
    def test_hedge(self):
        assert cm.convertible_hedge(0.5, 10) == 5.0
        with pytest.raises(ParameterError):
            cm.convertible_hedge(1.5, 10)

    def test_root_at_zero(self):
        fn = lambda x: 10.0 * math.exp(-x)
        assert cm.convertible_oas(95.0 + 10.0, 95.0, fn) == 0.0

    def test_analytic(self):
        fn = lambda x: 10.0 * math.exp(-x)
        oas = cm.convertible_oas(100.0, 95.0, fn)
        assert oas == pytest.approx(math.log(2), abs=1e-8)
        assert abs(fn(oas) - 5.0) < 1e-8 * 95.0

    def test_toy_fixture(self):
        fn = cm.toy_intrinsic_valuation(60.0, 2.0, 100.0, 0.03, 2.0)
        target = fn(0.015)
        assert cm.convertible_oas(100.0 + target, 100.0, fn) == pytest.approx(0.015, abs=1e-8)

    def test_no_bracket(self):
        with pytest.raises(ConvergenceError):
            cm.convertible_oas(200.0, 95.0, lambda x: 10.0 * math.exp(-x))


class TestTax:
    def test_muni(self):
        assert cm.muni_tax_arb_return(0.04, 0.03, 0.0) == pytest.approx(0.01)
        assert cm.muni_tax_arb_return(0.04, 0.05, 0.4) == pytest.approx(0.01)

    def test_imputation(self):
        f = cm.imputation_flows(100.0, 0.3, 0.2)
        assert (f.dividend, f.credit, f.after_tax) == pytest.approx((70.0, 30.0, 80.0))
        assert f.taxable == pytest.approx(100.0) and f.personal_tax == pytest.approx(20.0)
        with pytest.raises(ParameterError):
            cm.imputation_flows(100.0, 1.0, 0.2)

    def test_put(self):
        v, pnl = cm.put_tax_arb(50.0, 2.0, 0.0, 60.0)
        assert v == 12.0 and pnl == 2.0
        assert cm.put_tax_arb(50.0, 2.0, 0.5, 60.0)[1] == pytest.approx(3.0)


class TestInflation:
    def test_zc_breakeven(self):
        f = cm.zero_coupon_inflation_flows(0.02, 5, 100.0, 100.0 * 1.02**5)
        assert f.net[0] == pytest.approx(0.0, abs=1e-15)
        assert cm.zero_coupon_inflation_flows(0.0, 3, 100.0, 108.0).net[0] == pytest.approx(0.08)

    def test_yoy_constant(self):
        f = cm.yoy_inflation_flows(0.025, [100.0] * 4)
        assert np.all(f.floating == 0) and np.allclose(f.net, -0.025)

    def test_tips_perfect_match(self):
        K, r = 0.01, 0.02
        t = np.array([1.0, 2.0, 3.0])
        # Treasury coupons r(1+K)^t are not a single rate, so match them per date
        res = cm.tips_arbitrage(100.0, r * (1 + K) ** t, 98.0, r, 0.0, t, np.ones(3))
        assert np.allclose(res.strips[:-1], r * ((1 + K) ** t[:-1] - 1))
        res0 = cm.tips_arbitrage(100.0, r, 98.0, r, 0.0, t, np.ones(3))
        assert np.all(res0.strips == 0.0)

    def test_tips_two_period_hand(self):
        res = cm.tips_arbitrage(101.0, 0.025, 99.0, 0.02, 0.01, [1.0, 2.0], [0.97, 0.94])
        assert res.strips[0] == pytest.approx(0.97 * 0.0048, rel=1e-12)
        assert res.strips[1] == pytest.approx(0.94 * (0.025 - 0.020402 - 0.0201), rel=1e-12)
        assert res.initial_flow == pytest.approx(101.0 - 99.0 - res.strips.sum())

    def test_tips_path_independent(self, rng):
        t = np.arange(1.0, 6.0)
        totals = []
        for _ in range(5):
            cpi = np.cumprod(1 + rng.normal(0.02, 0.01, 5))
            res = cm.tips_arbitrage(100.0, 0.03, 97.0, 0.015, 0.02, t, np.exp(-0.03 * t), cpi)
            assert np.allclose(res.tips_flows + res.swap_flows, res.totals, rtol=1e-14)
            totals.append(res.totals)
        assert all(np.array_equal(totals[0], x) for x in totals)


class TestWeatherEnergy:
    def test_indices(self):
        assert cm.weather_indices([65.0] * 3, [65.0] * 3) == (0.0, 0.0)
        assert cm.weather_indices([70.0], [90.0]) == (15.0, 0.0)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0, 100), st.floats(0, 40))
    def test_complementarity(self, lo, spread):
        cdd, hdd = cm.weather_indices([lo], [lo + spread])
        assert cdd * hdd == 0

    def test_hedge_ratio(self, rng):
        I = rng.uniform(0, 30, 100)
        q = 3.0 * I + rng.normal(0, 1, 100)
        assert cm.weather_hedge_ratio(q, I) == pytest.approx(np.polyfit(I, q, 1)[0], rel=1e-10)

    def test_spark(self):
        assert cm.spark_spread(50.0, 4.0, 7.5) == 20.0
        assert cm.spark_spread(30.0, 4.0, 7.5) == 0.0
        with pytest.raises(ParameterError):
            cm.spark_spread(1.0, 1.0, 0.0)


class TestMacro:
    def test_real_estate(self):
        assert cm.real_estate_return(100.0, 95.0, 5.0) == 0.0

    def test_commodity_allocation(self):
        assert cm.commodity_allocation(0.04, 0.03) == pytest.approx(0.25)
        assert cm.commodity_allocation(0.02, 0.03) == 0.0
        with pytest.raises(DegenerateError):
            cm.commodity_allocation(0.0, 0.01)

    def test_announcement(self):
        assert cm.announcement_rule(True) == 1.0
        assert cm.announcement_rule([True, False]).tolist() == [1.0, 0.0]

    def test_state_rank(self, rng):
        x = [rng.normal(size=20) for _ in range(5)]
        r = cm.macro_state_rank(*x)
        assert r.sum() == pytest.approx(0.0, abs=1e-12)
        w = cm.macro_momentum_portfolio(*x).weights
        assert abs(w.sum()) < 1e-15 and np.count_nonzero(w) == 4
        assert w[np.argmax(r)] > 0 and w[np.argmin(r)] < 0

    def test_equal_classes(self):
        out = cm.equal_weight_classes([np.array([0.5, -0.5]), np.array([1.0, -1.0])])
        assert out[0].weights.tolist() == [0.25, -0.25]

    def test_hmd(self, rng):
        p = rng.uniform(0, 0.2, 30)
        a = cm.hmd_portfolio(p, 0.06, 0.12)
        assert a.scale == 2.0 and a.weights[np.argmin(p)] > 0
        b = cm.hmd_portfolio(p, 0.06, 0.12, leverage=False)
        assert b.scale == 1.0

    def test_global_fi(self, rng):
        w = cm.global_fixed_income_portfolio([rng.normal(size=10) for _ in range(3)]).weights
        assert abs(w.sum()) < 1e-15

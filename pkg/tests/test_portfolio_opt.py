import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from quantkit import portfolio_opt as po
from quantkit import ts_stats
from quantkit.errors import DegenerateError, InsufficientHistoryError, NoSignalError, ParameterError


def random_spd(g, n, cond=50.0):
    Q, _ = np.linalg.qr(g.normal(size=(n, n)))
    ev = np.geomspace(1.0, 1.0 / cond, n)
    return (Q * ev) @ Q.T


def objective(E, C, lam, w):
    return E @ w - 0.5 * lam * w @ C @ w


class TestSharpe:
    def test_symmetric(self):
        assert np.allclose(po.sharpe_weights([1, 1], np.eye(2)).weights, [0.5, 0.5])

    def test_diag_hand(self):
        assert np.allclose(po.sharpe_weights([1, 1], np.diag([1.0, 4.0])).weights, [0.8, 0.2], atol=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.01, 100), st.floats(0.01, 100))
    def test_scale_invariance(self, seed, c, k):
        g = np.random.default_rng(seed)
        C = random_spd(g, 4)
        E = g.normal(size=4)
        a = po.sharpe_weights(E, C).weights
        assert np.allclose(po.sharpe_weights(c * E, k * C).weights, a, atol=1e-12)
        assert E @ np.linalg.solve(C, E) > 0 and a @ E > 0

    def test_errors(self):
        with pytest.raises(NoSignalError):
            po.sharpe_weights([0.0, 0.0], np.eye(2))
        with pytest.raises(DegenerateError):
            po.sharpe_weights([1.0, 1.0], np.ones((2, 2)))

    def test_factor_model_input(self, rng):
        m = ts_stats.stat_risk_model(rng.normal(size=(4, 50)))
        E = rng.normal(size=4)
        a = po.sharpe_weights(E, m).weights
        b = po.sharpe_weights(E, m.covariance()).weights
        assert np.allclose(a, b, atol=1e-10)


class TestDollarNeutral:
    def test_hand(self):
        assert np.allclose(po.dollar_neutral_weights([1, -1], np.eye(2)).weights, [0.5, -0.5])

    def test_constant_signal(self):
        assert po.dollar_neutral_weights([0.3] * 4, np.eye(4)).no_trade

    def test_lagrange_oracle(self, rng):
        C = random_spd(rng, 4)
        E = rng.normal(size=4)
        K = np.block([[C, np.ones((4, 1))], [np.ones((1, 4)), np.zeros((1, 1))]])
        sol = np.linalg.solve(K, np.concatenate([E, [0.0]]))
        want = sol[:4] / np.abs(sol[:4]).sum()
        assert np.allclose(po.dollar_neutral_weights(E, C).weights, want, atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.floats(-5, 5))
    def test_budget_and_shift(self, seed, shift):
        g = np.random.default_rng(seed)
        C = random_spd(g, 5)
        E = g.normal(size=5)
        w = po.dollar_neutral_weights(E, C).weights
        assert abs(w.sum()) < 1e-12 and np.abs(w).sum() == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(po.dollar_neutral_weights(E + shift, C).weights, w, atol=1e-9)


class TestBounded:
    def test_unconstrained(self, rng):
        C = random_spd(rng, 5)
        E = rng.normal(size=5)
        res = po.bounded_mv_optimize(po.OptProblem(E, C, risk_aversion=3.0))
        assert np.allclose(res.weights, np.linalg.solve(C, E) / 3.0, atol=1e-9)

    def test_binding_upper_hand(self):
        # diag(1, 2), E = (2, 1): unconstrained (2, 0.5); cap asset 1 at 1
        res = po.bounded_mv_optimize(po.OptProblem(np.array([2.0, 1.0]), np.diag([1.0, 2.0]), upper=[1.0, 10.0]))
        assert np.allclose(res.weights, [1.0, 0.5]) and res.at_upper.tolist() == [True, False]

    def test_inactive_bounds_match_closed_form(self, rng):
        C = random_spd(rng, 4)
        E = rng.normal(size=4) * 0.1
        w0 = np.linalg.solve(C, E)
        res = po.bounded_mv_optimize(po.OptProblem(E, C, lower=w0 - 1, upper=w0 + 1))
        assert np.allclose(res.weights, w0, atol=1e-9)

    def test_infeasible(self):
        with pytest.raises(ParameterError):
            po.bounded_mv_optimize(po.OptProblem(np.ones(2), np.eye(2), lower=[1, 1], upper=[0, 2]))
        with pytest.raises(ParameterError):
            po.bounded_mv_optimize(po.OptProblem(np.ones(2), np.eye(2), lower=[1, 1], upper=[2, 2],
                                                 A_eq=np.ones((1, 2)), b_eq=np.zeros(1)))

    def test_deterministic(self, rng):
        C = random_spd(rng, 6)
        E = rng.normal(size=6)
        p = po.OptProblem(E, C, lower=-0.3, upper=0.3, A_eq=np.ones((1, 6)), b_eq=np.zeros(1))
        a = po.bounded_mv_optimize(p).weights
        b = po.bounded_mv_optimize(p).weights
        assert np.array_equal(a, b)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_box_kkt(self, seed):
        g = np.random.default_rng(seed)
        n = int(g.integers(2, 8))
        C = random_spd(g, n, cond=float(g.uniform(2, 1e4)))
        E = g.normal(size=n)
        p = po.OptProblem(E, C, lower=-g.uniform(0, 1, n), upper=g.uniform(0, 1, n), risk_aversion=float(g.uniform(0.5, 5)))
        res = po.bounded_mv_optimize(p)
        assert po.kkt_check(p, res.weights, tol=1e-8)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_against_slsqp(self, seed):
        g = np.random.default_rng(seed)
        n = int(g.integers(3, 7))
        C = random_spd(g, n, cond=float(g.uniform(2, 100)))
        E = g.normal(size=n)
        lo, hi = -g.uniform(0.05, 1, n), g.uniform(0.05, 1, n)
        p = po.OptProblem(E, C, lower=lo, upper=hi, A_eq=np.ones((1, n)), b_eq=np.zeros(1))
        w = po.bounded_mv_optimize(p).weights
        ref = minimize(lambda x: -objective(E, C, 1.0, x), np.zeros(n), jac=lambda x: -(E - C @ x),
                       bounds=list(zip(lo, hi)), constraints=[{"type": "eq", "fun": lambda x: x.sum()}],
                       method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
        assert abs(w.sum()) < 1e-10 and np.all(w >= lo - 1e-12) and np.all(w <= hi + 1e-12)
        assert objective(E, C, 1.0, w) >= objective(E, C, 1.0, ref.x) - 1e-9

    def test_random_feasible_audit(self, rng):
        n = 4
        C = random_spd(rng, n)
        E = rng.normal(size=n)
        lo, hi = -0.5 * np.ones(n), 0.5 * np.ones(n)
        w = po.bounded_mv_optimize(po.OptProblem(E, C, lower=lo, upper=hi)).weights
        X = rng.uniform(lo, hi, (100_000, n))
        vals = X @ E - 0.5 * np.einsum("ij,jk,ik->i", X, C, X)
        assert objective(E, C, 1.0, w) >= vals.max() - 1e-12


class TestAlphaCombo:
    def test_single_alpha(self, rng):
        r = rng.normal(0.01, 0.02, (1, 10))
        w = po.alpha_combo_weights(r, 3).weights
        assert w.tolist() == [np.sign(r[0, :3].mean())]

    def test_identical_alphas(self, rng):
        r = rng.normal(0.01, 0.02, 10)
        w = po.alpha_combo_weights(np.vstack([r, r]), 4).weights
        assert np.allclose(w, [0.5, 0.5], atol=1e-12)

    def test_permutation_equivariance(self, rng):
        R = rng.normal(0, 0.02, (5, 30)) + rng.normal(0, 0.01, (5, 1))
        perm = np.array([3, 0, 4, 1, 2])
        a = po.alpha_combo_weights(R, 5).weights
        b = po.alpha_combo_weights(R[perm], 5).weights
        assert np.allclose(b, a[perm], atol=1e-12)

    def test_residual_orthogonal(self, rng):
        R = rng.normal(0, 0.02, (8, 6)) + rng.normal(0, 0.01, (8, 1))
        res = po.alpha_combo_weights(R, 3)
        L = res.loadings[:, np.any(res.loadings != 0, axis=0)]
        assert np.max(np.abs(L.T @ res.residuals)) < 1e-9
        assert np.abs(res.weights).sum() == pytest.approx(1.0)

    def test_errors(self, rng):
        with pytest.raises(InsufficientHistoryError):
            po.alpha_combo_weights(rng.normal(size=(3, 2)), 1)
        with pytest.raises(DegenerateError):
            po.alpha_combo_weights(np.ones((2, 5)), 2)


class TestVolTargetAndMinVar:
    def test_vol_target(self):
        assert po.vol_target_scale(0.2, 0.2) == 1.0
        assert po.vol_target_scale(0.4, 0.2) == 0.5
        assert po.vol_target_scale(0.1, 0.3, 2.0) == 2.0
        with pytest.raises(DegenerateError):
            po.vol_target_scale(0.0, 0.1)

    def test_rebalance(self):
        assert po.needs_rebalance(1.0, 1.2, 0.1) and not po.needs_rebalance(1.0, 1.05, 0.1)

    def test_minvar_hand(self):
        assert po.two_strategy_minvar(1, 1, 0) == (0.5, 0.5)
        w1, w2 = po.two_strategy_minvar(1, 2, 0)
        assert w1 == pytest.approx(0.8) and w2 == pytest.approx(0.2)
        with pytest.raises(DegenerateError):
            po.two_strategy_minvar(1, 1, 1)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(-0.99, 0.99))
    def test_minvar_optimal(self, s1, s2, rho):
        w1, w2 = po.two_strategy_minvar(s1, s2, rho)
        assert w1 + w2 == pytest.approx(1.0, abs=1e-15)
        var = w1**2 * s1**2 + w2**2 * s2**2 + 2 * w1 * w2 * rho * s1 * s2
        assert var <= min(s1, s2) ** 2 * (1 + 1e-12)

    def test_from_returns(self, rng):
        r1, r2 = rng.normal(size=200), 2 * rng.normal(size=200)
        w1, _ = po.two_strategy_minvar_from_returns(r1, r2)
        assert 0.5 < w1 < 1.0

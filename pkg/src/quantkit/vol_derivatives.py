"""Volatility-asset analytics: index theoretical volatility, VIX basis rule,
ETN hedges, volatility risk premium, variance swaps, gamma-hedge rebalancing
and the intraday ETF pair rule.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError, InsufficientHistoryError, ParameterError
from .portfolio_opt import OptProblem, bounded_mv_optimize
from .ts_stats import FactorCovModel

TRADING_DAYS = 252


@dataclass
class IndexVol:
    sigma: float
    specific_part: float | None = None
    factor_part: float | None = None
    subset: np.ndarray | None = None


def index_theoretical_vol(weights, vols, corr=None, model: FactorCovModel | None = None, subset_size=None):
    """sigma_I^2 = sum_ij w_i w_j sigma_i sigma_j rho_ij, or with the factor correlation psi.

    With a factor model the variance splits into sum w^2 sigma^2 xi^2 plus
    sum_A (sum_i B_iA w_i sigma_i)^2 where B holds sqrt(lambda_A) V_iA.
    ``subset_size`` returns the names with the smallest w^2 sigma^2 xi^2.
    """
    w = np.asarray(weights, float).ravel()
    s = np.asarray(vols, float).ravel()
    if w.shape != s.shape:
        raise ParameterError("weights and vols must align")
    if np.any(s < 0):
        raise ParameterError("volatilities must be >= 0")
    x = w * s
    if model is None:
        if corr is None:
            raise ParameterError("need a correlation matrix or a factor model")
        rho = np.atleast_2d(np.asarray(corr, float))
        if rho.shape != (w.size, w.size) or not np.allclose(rho, rho.T, atol=1e-12):
            raise ParameterError("correlation must be square and symmetric")
        if np.linalg.eigvalsh(rho).min() < -1e-10:
            raise ParameterError("correlation matrix is not positive semi-definite")
        var = float(x @ rho @ x)
        return IndexVol(float(np.sqrt(max(var, 0.0))))
    spec = float(np.sum(x * x * model.specific_var))
    fac = float(np.sum((model.loadings.T @ x) ** 2))
    sub = None
    if subset_size is not None:
        key = x * x * model.specific_var
        sub = np.sort(np.lexsort((np.arange(w.size), key))[: int(subset_size)])
    return IndexVol(float(np.sqrt(spec + fac)), spec, fac, sub)


# ------------------------------------------------------------- VIX basis


def vix_basis_signal(P_UX1, P_VIX, days_to_settle, position=0):
    """Daily roll D = (P_UX1 - P_VIX)/T and the four-threshold rule.

    ``position`` is +1 long UX1, -1 short, 0 flat. Returns (D, action).
    """
    if days_to_settle < 10:
        raise ParameterError("rule assumes at least 10 business days to settlement")
    D = (P_UX1 - P_VIX) / days_to_settle
    if position > 0:
        return D, "close_long" if D > -0.05 else "hold"
    if position < 0:
        return D, "close_short" if D < 0.05 else "hold"
    if D < -0.10:
        return D, "open_long"
    if D > 0.10:
        return D, "open_short"
    return D, "none"


def mini_futures_hedge(ux1_position, beta):
    """Index mini-futures to trade against a UX1 position given a regression beta."""
    return -ux1_position * beta


def vxx_hedge_ratio(rho, sigma_x, sigma_z):
    """h = rho sigma_X / sigma_Z units of the mid-term note per short VXX unit."""
    if sigma_z <= 0:
        raise DegenerateError("hedge instrument volatility must be positive")
    return rho * sigma_x / sigma_z


def basket_hedge_weights(C, sigma_x, rho, constraint=None):
    """Tracking-error hedge w = sigma_X C^{-1}(sigma o rho).

    ``constraint``: None, ``"sum_one"`` (sum w = 1) or ``"nonneg"`` (w >= 0).
    """
    C = np.atleast_2d(np.asarray(C, float))
    rho = np.asarray(rho, float).ravel()
    sig = np.sqrt(np.diag(C))
    if np.any(sig <= 0):
        raise DegenerateError("futures variances must be positive")
    if np.linalg.cond(C) > 1.0 / np.finfo(float).eps:
        raise DegenerateError("covariance matrix is singular")
    b = sigma_x * sig * rho
    w = np.linalg.solve(C, b)
    if constraint is None:
        return w
    if constraint == "sum_one":
        u = np.linalg.solve(C, np.ones_like(b))
        return w + u * (1.0 - w.sum()) / u.sum()
    if constraint == "nonneg":
        return bounded_mv_optimize(OptProblem(b, C, lower=np.zeros_like(b))).weights
    raise ParameterError(f"unknown constraint {constraint!r}")


# ----------------------------------------------------- premium and swaps


def realized_vol_pct(daily_returns, periods=TRADING_DAYS):
    """Zero-mean realized volatility, annualized, in percent."""
    r = np.asarray(daily_returns, float)
    if r.size < 2:
        raise InsufficientHistoryError("need at least 2 daily returns")
    return float(100.0 * np.sqrt(periods * np.mean(r * r)))


def vol_risk_premium(vix_start, daily_returns):
    """(VIX - realized vol in %, sell straddles?)."""
    prem = vix_start - realized_vol_pct(daily_returns)
    return float(prem), bool(prem > 0)


@dataclass(frozen=True)
class VarianceSwapTerms:
    notional: float
    strike: float
    annualization: float = TRADING_DAYS
    observations: int | None = None

    def __post_init__(self):
        if self.notional <= 0 or self.annualization <= 0:
            raise ParameterError("notional and annualization must be positive")
        if self.strike < 0:
            raise ParameterError("variance strike must be >= 0")
        if self.observations is not None and self.observations <= 0:
            raise ParameterError("observation count must be positive")


def realized_variance(log_returns, annualization=TRADING_DAYS):
    """v = (F/T) sum R^2; the mean is deliberately not subtracted."""
    r = np.asarray(log_returns, float)
    if r.size == 0:
        raise InsufficientHistoryError("no returns")
    return float(annualization * np.sum(r * r) / r.size)


def variance_swap_payoff(terms: VarianceSwapTerms, log_returns):
    r = np.asarray(log_returns, float)
    if terms.observations is not None and r.size != terms.observations:
        raise ParameterError(f"expected {terms.observations} returns, got {r.size}")
    return terms.notional * (realized_variance(r, terms.annualization) - terms.strike)


def log_returns_from_prices(prices):
    """R(t) = ln S(t)/S(t-1) for prices in chronological order."""
    S = np.asarray(prices, float)
    if np.any(S <= 0):
        raise ParameterError("prices must be positive")
    return np.diff(np.log(S))


@dataclass
class GammaHedge:
    trades: np.ndarray
    inventory: np.ndarray
    cost: float


def gamma_hedge_rebalance(delta_path, price_path, initial_hedge=True):
    """Trade the underlier to offset changes in option delta (chronological paths).

    At each step the trade is -(Delta(t) - Delta(t-1)); cost is sum trade*price.
    """
    d = np.asarray(delta_path, float)
    S = np.asarray(price_path, float)
    if d.shape != S.shape or d.ndim != 1:
        raise ParameterError("delta and price paths must be aligned 1-d arrays")
    trades = -np.diff(d, prepend=0.0 if initial_hedge else d[0])
    inv = np.cumsum(trades)
    return GammaHedge(trades, inv, float(trades @ S))


def skew_premium_differential(put_premium, call_premium):
    """Put minus call premium at mirrored OTM strikes."""
    return put_premium - call_premium


# ------------------------------------------------------ ETF intraday pair

ETF_ACTIONS = ("buy2_sell1", "buy1_sell2", "liquidate", "hold", "none")


def etf_pair_rule(bid1, ask1, bid2, ask2, kappa=1.002, position=0):
    """Intraday arbitrage between two ETFs on one index.

    ``position``: +1 long ETF2/short ETF1, -1 long ETF1/short ETF2, 0 flat.
    """
    if kappa < 1:
        raise ParameterError("kappa must be >= 1")
    if min(bid1, bid2) <= 0 or ask1 < bid1 or ask2 < bid2:
        raise ParameterError("invalid quotes")
    if position > 0:
        return "liquidate" if bid2 >= ask1 else "hold"
    if position < 0:
        return "liquidate" if bid1 >= ask2 else "hold"
    if bid1 >= ask2 * kappa:
        return "buy2_sell1"
    if bid2 >= ask1 * kappa:
        return "buy1_sell2"
    return "none"

"""CDO tranche valuation, MBS monotone hedge, convertibles, tax arbitrage,
inflation swaps and TIPS replication, weather and spark computations, and
macro overlays (real estate, state-variable ranking, inflation hedge,
announcement days, distress and global bond factor portfolios).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConvergenceError, DegenerateError, ParameterError
from .portfolio_opt import vol_target_scale
from .xsec_signals import WeightVector, combine_ranks, long_short_weights, quantile_members

# ------------------------------------------------------------------ CDO


@dataclass
class TrancheSpec:
    """Tranche [a, d) of a pool with per-date loss scenarios.

    ``losses[i]`` and ``probs[i]`` hold the outcomes (currency) and their
    probabilities at payment time ``times[i]``. Defaults settle on premium dates.
    """

    attachment: float
    detachment: float
    pool_notional: float
    times: np.ndarray
    discounts: np.ndarray
    losses: list
    probs: list
    t0: float = 0.0

    def __post_init__(self):
        if not 0 <= self.attachment < self.detachment <= 1:
            raise ParameterError("need 0 <= a < d <= 1")
        if self.pool_notional <= 0:
            raise ParameterError("pool notional must be positive")
        self.times = np.asarray(self.times, float).ravel()
        self.discounts = np.asarray(self.discounts, float).ravel()
        if self.times.size == 0:
            raise ParameterError("empty payment schedule")
        if self.discounts.shape != self.times.shape:
            raise ParameterError("one discount factor per payment date")
        if np.any(np.diff(np.concatenate([[self.t0], self.times])) <= 0):
            raise ParameterError("payment times must increase from t0")
        if len(self.losses) != self.times.size or len(self.probs) != self.times.size:
            raise ParameterError("one loss scenario set per payment date")
        self.losses = [np.asarray(x, float).ravel() for x in self.losses]
        self.probs = [np.asarray(x, float).ravel() for x in self.probs]
        for l, p in zip(self.losses, self.probs):
            if l.shape != p.shape:
                raise ParameterError("loss outcomes and probabilities must align")
            if np.any(p < 0) or p.sum() > 1 + 1e-12:
                raise ParameterError("probabilities must be >= 0 and sum to <= 1")

    @property
    def L_a(self):
        return self.attachment * self.pool_notional

    @property
    def L_d(self):
        return self.detachment * self.pool_notional

    @property
    def tranche_notional(self):
        return self.L_d - self.L_a

    @property
    def gaps(self):
        return np.diff(np.concatenate([[self.t0], self.times]))


def tranche_loss(losses, probs, L_a, L_d):
    """sum p max(min(l, L_d) - L_a, 0)."""
    l = np.asarray(losses, float)
    return float(np.sum(np.asarray(probs, float) * np.maximum(np.minimum(l, L_d) - L_a, 0.0)))


def cdo_expected_loss(tranche: TrancheSpec, i):
    """Expected tranche loss at payment index ``i``."""
    return tranche_loss(tranche.losses[i], tranche.probs[i], tranche.L_a, tranche.L_d)


@dataclass
class TrancheValuation:
    mtm: float
    par_spread: float
    risky_duration: float
    premium_leg: float
    contingent_leg: float
    degenerate: bool = False


def tranche_mtm_and_spread(tranche: TrancheSpec, spread):
    """MTM for the protection seller, par spread and risky duration."""
    L = np.array([cdo_expected_loss(tranche, i) for i in range(tranche.times.size)])
    D = tranche.discounts
    dur = float(np.sum(D * tranche.gaps * (tranche.tranche_notional - L)))
    cont = float(np.sum(D * np.diff(np.concatenate([[0.0], L]))))
    prem = spread * dur
    if dur == 0:
        return TrancheValuation(-cont, float("nan"), 0.0, 0.0, cont, degenerate=True)
    return TrancheValuation(prem - cont, cont / dur, dur, prem, cont)


def tranche_delta(hedged_duration, hedge_duration):
    """Hedge ratio D/D_hedge for index, senior-tranche or single-name CDS hedges."""
    if hedge_duration == 0:
        raise DegenerateError("hedge instrument has zero risky duration")
    return hedged_duration / hedge_duration


def curve_trade_carry(M_long, S_long, M_short, S_short, dt, mtm_long=0.0, mtm_short=0.0):
    """(carry, P&L) of a tranche curve trade."""
    if M_long <= 0 or M_short <= 0:
        raise ParameterError("notionals must be positive")
    return (M_long * S_long - M_short * S_short) * dt, mtm_long - mtm_short


def curve_trade_short_notional(M_long, scheme, S_long=None, S_short=None, dur_long=None, dur_short=None):
    """Short-leg notional under ``notional``, ``duration`` or ``carry`` neutrality.

    Durations are per unit notional.
    """
    if M_long <= 0:
        raise ParameterError("notional must be positive")
    if scheme == "notional":
        return float(M_long)
    if scheme == "duration":
        if not dur_short:
            raise DegenerateError("short leg has zero risky duration")
        return float(M_long * dur_long / dur_short)
    if scheme == "carry":
        if not S_short:
            raise DegenerateError("short leg spread is zero")
        return float(M_long * S_long / S_short)
    raise ParameterError(f"unknown neutrality scheme {scheme!r}")


# ------------------------------------------------------------------ MBS


@dataclass
class MBSHedge:
    rates: np.ndarray
    fitted: np.ndarray
    slopes: np.ndarray
    slope: float
    hedge_ratio: float


def mbs_monotone_hedge(rates, prices, swap_dv01, at_rate=None, weights=None):
    """Non-increasing least-squares fit of price on swap rate and a hedge ratio.

    The local slope comes from the fitted segment bracketing ``at_rate``
    (default: the latest sample); hedge = -slope / DV01.
    """
    R = np.asarray(rates, float).ravel()
    P = np.asarray(prices, float).ravel()
    if R.shape != P.shape:
        raise ParameterError("rates and prices must align")
    if R.size < 3:
        raise ParameterError("need at least 3 samples")
    if np.ptp(R) == 0:
        raise DegenerateError("all swap rates are equal")
    if np.unique(R).size != R.size:
        raise ParameterError("swap rates must be distinct")
    if swap_dv01 == 0:
        raise DegenerateError("swap DV01 is zero")
    w = np.ones_like(P) if weights is None else np.asarray(weights, float).ravel()
    order = np.argsort(R, kind="stable")
    Rs = R[order]
    fit = kernels.pav_decreasing(np.ascontiguousarray(P[order]), np.ascontiguousarray(w[order]))
    slopes = np.diff(fit) / np.diff(Rs)
    r0 = R[-1] if at_rate is None else float(at_rate)
    seg = int(np.clip(np.searchsorted(Rs, r0, side="right") - 1, 0, slopes.size - 1))
    return MBSHedge(Rs, fit, slopes, float(slopes[seg]), float(-slopes[seg] / swap_dv01))


# ---------------------------------------------------------- convertibles


def convertible_hedge(delta, conversion_ratio):
    """Shares to short per convertible: h = Delta * C."""
    if not 0 <= delta <= 1:
        raise ParameterError("delta must lie in [0, 1]")
    return delta * conversion_ratio


def convertible_oas(market_price, bond_price, valuation_fn, tol=1e-8, max_shift=1.0):
    """Parallel curve shift x with valuation_fn(x) = market_price - bond_price.

    Brackets grow outward from 1bp up to +/- ``max_shift`` (10,000bp), then
    bisection runs until the bracket is narrower than ``tol``.
    """
    target = market_price - bond_price

    def f(x):
        return valuation_fn(x) - target

    f0 = f(0.0)
    if f0 == 0:
        return 0.0
    lo = hi = None
    h = 1e-4
    while h <= max_shift * (1 + 1e-12):
        fp, fm = f(h), f(-h)
        if np.sign(fp) != np.sign(f0):
            lo, hi, flo = 0.0, h, f0
            break
        if np.sign(fm) != np.sign(f0):
            lo, hi, flo = -h, 0.0, fm
            break
        h = min(2 * h, max_shift) if h < max_shift else 2 * h
    if lo is None:
        raise ConvergenceError("no sign change within +/-10,000bp")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def toy_intrinsic_valuation(stock_price, conversion_ratio, par, rate, maturity):
    """Discounted intrinsic conversion value as a function of the curve shift.

    Test fixture only; this is not a production convertible model.
    """

    def value(shift):
        return max(conversion_ratio * stock_price - par, 0.0) * np.exp(-(rate + shift) * maturity)

    return value


# ---------------------------------------------------------- tax arbitrage


def muni_tax_arb_return(r_long, r_short, tau):
    """R = r_long - r_short (1 - tau)."""
    if not 0 <= tau < 1:
        raise ParameterError("tax rate must lie in [0, 1)")
    return r_long - r_short * (1 - tau)


@dataclass
class ImputationFlows:
    dividend: float
    credit: float
    taxable: float
    personal_tax: float
    after_tax: float


def imputation_flows(profit, tau_c, tau_p):
    """Full-credit dividend imputation when all after-tax profit is paid out."""
    if not 0 <= tau_c < 1 or not 0 <= tau_p < 1:
        raise ParameterError("tax rates must lie in [0, 1)")
    D = profit * (1 - tau_c)
    C = D * tau_c / (1 - tau_c)
    It = D / (1 - tau_c)
    T = It * tau_p
    return ImputationFlows(D, C, It, T, D * (1 - tau_p) / (1 - tau_c))


def put_tax_arb(S0, D, kappa, K):
    """(deep ITM put value, P&L) for the cum-dividend sale plus short put."""
    if S0 <= 0 or K <= 0:
        raise ParameterError("prices must be positive")
    v = K - (S0 - D * (1 + kappa))
    return v, S0 + v - K


# ------------------------------------------------------- inflation swaps


@dataclass
class InflationFlows:
    fixed: np.ndarray
    floating: np.ndarray

    @property
    def net(self):
        """Long-inflation buyer receives floating and pays fixed."""
        return self.floating - self.fixed


def zero_coupon_inflation_flows(K, T, I0, IT):
    if I0 <= 0 or IT <= 0:
        raise ParameterError("index values must be positive")
    return InflationFlows(np.array([(1 + K) ** T - 1]), np.array([IT / I0 - 1]))


def yoy_inflation_flows(K, index):
    """Annual flows from an index series I(0), I(1), ..., I(T)."""
    I = np.asarray(index, float).ravel()
    if np.any(I <= 0):
        raise ParameterError("index values must be positive")
    if I.size < 2:
        raise ParameterError("need at least two index values")
    return InflationFlows(np.full(I.size - 1, float(K)), I[1:] / I[:-1] - 1)


@dataclass
class TipsArbitrage:
    notionals: np.ndarray
    effective_coupons: np.ndarray
    strips: np.ndarray
    initial_flow: float
    totals: np.ndarray
    tips_flows: np.ndarray | None = None
    swap_flows: np.ndarray | None = None


def tips_arbitrage(P_treasury, r_treasury, P_tips, r_tips, K, times, strips_discounts, cpi_ratio=None):
    """Short Treasury against TIPS plus zero-coupon inflation swaps and STRIPS.

    ``times`` are in compounding periods with the last equal to maturity.
    ``cpi_ratio`` (I(t_i)/I(0)) optionally fills in the separate TIPS and swap
    legs; the per-date totals never depend on it.
    """
    t = np.asarray(times, float).ravel()
    Dt = np.asarray(strips_discounts, float).ravel()
    if t.size == 0 or Dt.shape != t.shape:
        raise ParameterError("schedule and STRIPS discounts must align")
    if np.any(np.diff(t) <= 0):
        raise ParameterError("payment times must increase")
    at_T = np.zeros(t.size)
    at_T[-1] = 1.0
    N = r_tips + at_T
    growth = (1 + K) ** t
    r_eff = r_tips * growth
    S = Dt * ((r_treasury - r_eff) + at_T * (1 - growth))
    totals = N * growth
    tips = swap = None
    if cpi_ratio is not None:
        ratio = np.asarray(cpi_ratio, float).ravel()
        if ratio.shape != t.shape or np.any(ratio <= 0):
            raise ParameterError("one positive CPI ratio per payment date")
        tips = N * ratio
        swap = N * (growth - ratio)
    C0 = P_treasury - P_tips - float(S.sum())
    return TipsArbitrage(N, r_eff, S, C0, totals, tips, swap)


# ---------------------------------------------------- weather and energy


def weather_indices(t_min, t_max, T_base=65.0):
    """(I_CDD, I_HDD) from daily minimum and maximum temperatures."""
    lo = np.asarray(t_min, float).ravel()
    hi = np.asarray(t_max, float).ravel()
    if lo.shape != hi.shape:
        raise ParameterError("min and max series must align")
    if np.any(hi < lo):
        raise ParameterError("daily max below daily min")
    T = 0.5 * (lo + hi)
    return float(np.maximum(0.0, T - T_base).sum()), float(np.maximum(0.0, T_base - T).sum())


def weather_hedge_ratio(demand, index, strike=None, kind="futures"):
    """Serial-covariance hedge ratio of weather-driven demand.

    ``kind``: futures (Cov(q, I)/Var(I)), ``put`` on an HDD index (sign
    flipped) or ``call`` on a CDD index.
    """
    q = np.asarray(demand, float).ravel()
    I = np.asarray(index, float).ravel()
    if q.shape != I.shape or q.size < 2:
        raise ParameterError("need aligned demand and index series of length >= 2")
    if kind == "futures":
        x, sign = I, 1.0
    elif kind == "put":
        x, sign = np.maximum(strike - I, 0.0), -1.0
    elif kind == "call":
        x, sign = np.maximum(I - strike, 0.0), 1.0
    else:
        raise ParameterError(f"unknown hedge kind {kind!r}")
    var = np.var(x, ddof=1)
    if var == 0:
        raise DegenerateError("hedge instrument payoff does not vary")
    return float(sign * np.cov(q, x, ddof=1)[0, 1] / var)


def spark_spread(P_E, P_F, H):
    """S = P_E - H P_F in $/Mwh."""
    if H <= 0:
        raise ParameterError("heat rate must be positive")
    return P_E - H * P_F


# ------------------------------------------------------------ macro overlays


def real_estate_return(P1, P2, C=0.0):
    """R = (P(t2) + C) / P(t1) - 1."""
    if P1 <= 0:
        raise ParameterError("initial value must be positive")
    return (P2 + C) / P1 - 1


def macro_state_rank(gdp_change, cpi_change, trade, monetary, risk):
    """Combined rank of the four state variables per country.

    The business-cycle variable is itself the 50/50 rank blend of real GDP
    growth changes and expected CPI changes.
    """
    cycle = combine_ranks([gdp_change, cpi_change])
    return combine_ranks([cycle, trade, monetary, risk])


def decile_long_short(score, q=0.1, tickers=None, label="decile"):
    s = np.asarray(score, float).ravel()
    top, bottom = quantile_members(s, q, tickers)
    if top.size == 0:
        return WeightVector(np.zeros(s.size), label, no_trade=True)
    return WeightVector(long_short_weights(s.size, top, bottom), label)


def macro_momentum_portfolio(gdp_change, cpi_change, trade, monetary, risk, q=0.1, tickers=None):
    """Zero-cost portfolio long the top and short the bottom decile of the macro rank."""
    rank = macro_state_rank(gdp_change, cpi_change, trade, monetary, risk)
    return decile_long_short(rank, q, tickers, "macro_momentum")


def equal_weight_classes(portfolios):
    """Combine per-asset-class weight vectors with equal class weights."""
    if not portfolios:
        raise ParameterError("no portfolios to combine")
    k = len(portfolios)
    return [WeightVector(np.asarray(getattr(p, "weights", p), float) / k, getattr(p, "label", "")) for p in portfolios]


def commodity_allocation(hi_yoy, ci_yoy):
    """CA = max(0, min((HI - CI)/HI, 1))."""
    if hi_yoy == 0:
        raise DegenerateError("headline inflation is zero; allocation undefined")
    return float(max(0.0, min((hi_yoy - ci_yoy) / hi_yoy, 1.0)))


def announcement_rule(is_announcement_day):
    """Full equity allocation on announcement days, treasuries otherwise.

    Accepts a bool or an array of bools; returns the equity fraction.
    """
    flags = np.asarray(is_announcement_day, bool)
    out = flags.astype(float)
    return float(out) if out.ndim == 0 else out


def global_fixed_income_portfolio(factor_scores, q=0.2, tickers=None):
    """Multi-factor country bond portfolio from caller-supplied factor scores."""
    return decile_long_short(combine_ranks(factor_scores), q, tickers, "global_fixed_income")


@dataclass
class HMDPortfolio:
    weights: np.ndarray
    scale: float
    base: np.ndarray = field(repr=False, default=None)


def hmd_portfolio(bankruptcy_prob, sigma_hat, sigma_target=0.12, q=0.1, leverage=True, tickers=None):
    """Healthy-minus-distressed weights scaled to a volatility target.

    Longs the lowest-probability decile and shorts the highest; probabilities
    come from an external model. Without leverage the scale caps at 1.
    """
    p = np.asarray(bankruptcy_prob, float).ravel()
    base = decile_long_short(-p, q, tickers, "hmd").weights
    s = vol_target_scale(sigma_hat, sigma_target, np.inf if leverage else 1.0)
    return HMDPortfolio(base * s, s, base)

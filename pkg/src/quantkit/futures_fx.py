"""Futures, FX and commodity analytics: fair value and basis, hedge ratios,
cross-sectional futures and commodity portfolios, OU term structures, FX
parity, carry portfolios and triangular arbitrage.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import ts_stats
from .errors import ConvergenceError, DegenerateError, InsufficientHistoryError, ParameterError
from .xsec_signals import WeightVector, long_short_weights, quantile_members

# ---------------------------------------------------------- cash & carry


@dataclass(frozen=True)
class FuturesQuote:
    spot: float
    futures: float
    dividends_pv: float
    rate: float
    tau: float  # T - t in years

    def __post_init__(self):
        if self.spot <= 0 or self.futures <= 0:
            raise ParameterError("prices must be positive")
        if self.tau <= 0:
            raise ParameterError("delivery must be after t")


def futures_fair_value(q: FuturesQuote):
    """F* = (S - D) exp(r (T - t))."""
    return float((q.spot - q.dividends_pv) * np.exp(q.rate * q.tau))


def futures_basis(q: FuturesQuote):
    """B = (F - F*)/S."""
    return float((q.futures - futures_fair_value(q)) / q.spot)


def basis_signal(basis, threshold=0.0):
    """Rich futures (B above threshold): sell futures, buy cash; cheap: the reverse."""
    if basis > threshold:
        return "sell_futures_buy_cash"
    if basis < -threshold:
        return "buy_futures_sell_cash"
    return "none"


# ------------------------------------------------------------- commodities


def roll_ratio(front, second):
    """phi = P1/P2; above 1 is backwardation."""
    P1, P2 = np.asarray(front, float), np.asarray(second, float)
    if np.any(P1 <= 0) or np.any(P2 <= 0):
        raise ParameterError("prices must be positive")
    return P1 / P2


def hedging_pressure(long_contracts, short_contracts):
    L, S = np.asarray(long_contracts, float), np.asarray(short_contracts, float)
    tot = L + S
    if np.any(tot <= 0):
        raise DegenerateError("no open contracts")
    return L / tot


def _equal_long_short(n, longs, shorts, label):
    longs, shorts = np.asarray(longs, int), np.asarray(shorts, int)
    if longs.size == 0 or shorts.size == 0:
        return WeightVector(np.zeros(n), label, no_trade=True)
    return WeightVector(long_short_weights(n, longs, shorts), label)


def roll_yield_portfolio(phi, q=0.1):
    phi = np.asarray(phi, float)
    top, bottom = quantile_members(phi, q)
    return _equal_long_short(phi.size, top, bottom, "roll_yield")


def hedging_pressure_portfolio(hp_speculators, hp_hedgers):
    """Long: top speculator half and bottom hedger quintile; short: bottom half and top quintile.

    Halves and quintiles are taken over the whole universe.
    """
    spec = np.asarray(hp_speculators, float)
    hedg = np.asarray(hp_hedgers, float)
    if np.any((spec < 0) | (spec > 1)) or np.any((hedg < 0) | (hedg > 1)):
        raise ParameterError("hedging pressure must lie in [0, 1]")
    n = spec.size
    top_half, bottom_half = quantile_members(spec, 0.5)
    hq_top, hq_bottom = quantile_members(hedg, 0.2)
    longs = np.intersect1d(top_half, hq_bottom)
    shorts = np.intersect1d(bottom_half, hq_top)
    return _equal_long_short(n, longs, shorts, "hedging_pressure")


def commodity_value(price_5y_ago, price_now):
    """v = P5/P0."""
    P5, P0 = np.asarray(price_5y_ago, float), np.asarray(price_now, float)
    if np.any(P0 <= 0) or np.any(P5 <= 0):
        raise ParameterError("prices must be positive")
    return P5 / P0


def commodity_value_portfolio(value, q=1 / 3):
    v = np.asarray(value, float)
    top, bottom = quantile_members(v, q)
    return _equal_long_short(v.size, top, bottom, "commodity_value")


def skew_premium_portfolio(returns, q=0.2):
    """Long the lowest-skew quintile, short the highest."""
    R = np.atleast_2d(np.asarray(returns, float))
    s = np.array([ts_stats.skewness(r) for r in R])
    top, bottom = quantile_members(s, q)
    return _equal_long_short(s.size, bottom, top, "skew_premium")


# ---------------------------------------------------------- OU term structure


@dataclass(frozen=True)
class OUParams:
    kappa: float
    a: float
    sigma: float

    def __post_init__(self):
        if self.kappa <= 0 or self.sigma < 0:
            raise ParameterError("need kappa > 0 and sigma >= 0")


def ou_log_futures(params: OUParams, X, tau):
    """ln F(t,T) for log spot X and tau = T - t."""
    tau = np.asarray(tau, float)
    if np.any(tau < 0):
        raise ParameterError("tau must be >= 0")
    k, a, s = params.kappa, params.a, params.sigma
    e = np.exp(-k * tau)
    return e * X + a * (1 - e) + s * s / (4 * k) * (1 - np.exp(-2 * k * tau))


def _ou_linear(kappa, tau, y, X):
    """Best (a, sigma^2[, X]) for fixed kappa; returns (coef, sse)."""
    e1 = np.exp(-kappa * tau)
    cols = [1 - e1, (1 - np.exp(-2 * kappa * tau)) / (4 * kappa)]
    if X is None:
        cols.append(e1)
        rhs = y
    else:
        rhs = y - e1 * X
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    if coef[1] < 0:
        # sigma^2 is bounded below by zero: refit without it
        A0 = np.delete(A, 1, axis=1)
        c0, *_ = np.linalg.lstsq(A0, rhs, rcond=None)
        coef = np.insert(c0, 1, 0.0)
    res = rhs - A @ coef
    return coef, float(res @ res)


@dataclass
class OUFit:
    params: OUParams
    X: float
    sse: float


def ou_fit(tau, log_futures, X=None, kappa_bounds=(1e-4, 100.0), tol=1e-12):
    """Least-squares fit of (kappa, a, sigma^2) to one observed log-futures curve.

    For fixed kappa the model is linear in (a, sigma^2) (and X when it is not
    given), so the fit profiles those out and minimizes the residual sum over
    log kappa: a 200-point log grid locates the basin, then a bounded Brent
    search refines it to ``tol``.
    """
    tau = np.asarray(tau, float)
    y = np.asarray(log_futures, float)
    if tau.shape != y.shape or np.unique(tau[tau > 0]).size < 3:
        raise InsufficientHistoryError("need at least 3 distinct positive maturities")
    lo, hi = np.log(kappa_bounds[0]), np.log(kappa_bounds[1])
    grid = np.linspace(lo, hi, 200)
    sse = np.array([_ou_linear(np.exp(g), tau, y, X)[1] for g in grid])
    j = int(np.argmin(sse))
    a_, b_ = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
    res = minimize_scalar(lambda g: _ou_linear(np.exp(g), tau, y, X)[1],
                          bounds=(a_, b_), method="bounded", options={"xatol": tol, "maxiter": 500})
    k = float(np.exp(res.x)) if res.fun <= sse[j] else float(np.exp(grid[j]))
    coef, err = _ou_linear(k, tau, y, X)
    best = OUFit(OUParams(k, float(coef[0]), float(np.sqrt(max(coef[1], 0.0)))),
                 float(X if X is not None else coef[2]), err)
    if not res.success:
        raise ConvergenceError("OU fit did not converge", best=best)
    return best


# ------------------------------------------------------------ hedge ratios


def _fraction_min_denominator(h, tol, max_den=10**6):
    if h < 0:
        n, d = _fraction_min_denominator(-h, tol, max_den)
        return -n, d
    d = np.arange(1, max_den + 1, dtype=np.int64)
    n = np.rint(h * d)
    ok = np.flatnonzero(np.abs(n / d - h) <= tol)
    if ok.size == 0:
        raise ParameterError("no integer ratio within tolerance")
    i = ok[0]
    return int(n[i]), int(d[i])


@dataclass
class SparkHedge:
    ratio: float
    fuel_contracts: int
    power_contracts: int


def hedge_ratio(kind, **kw):
    """Hedge ratios.

    cross: spot_changes, futures_changes (regression slope)
    conversion_factor: C, M_B, M_F
    duration: beta, D_B, D_F (dollar durations)
    spark: H, F_E=736, F_F=10000, tol=1e-6
    weather: demand, index (degree-day samples), instrument futures|put|call, K
    """
    if kind == "cross":
        s = np.asarray(kw["spot_changes"], float)
        f = np.asarray(kw["futures_changes"], float)
        vf = np.var(f, ddof=1)
        if vf == 0:
            raise DegenerateError("futures changes have zero variance")
        return float(np.cov(s, f, ddof=1)[0, 1] / vf)
    if kind == "conversion_factor":
        if kw["M_F"] <= 0:
            raise ParameterError("futures face value must be positive")
        return float(kw["C"] * kw["M_B"] / kw["M_F"])
    if kind == "duration":
        if kw["D_F"] == 0:
            raise DegenerateError("futures dollar duration is zero")
        return float(kw.get("beta", 1.0) * kw["D_B"] / kw["D_F"])
    if kind == "spark":
        F_E, F_F = kw.get("F_E", 736.0), kw.get("F_F", 10000.0)
        if F_F <= 0:
            raise ParameterError("contract sizes must be positive")
        h = kw["H"] * F_E / F_F
        nf, ne = _fraction_min_denominator(h, kw.get("tol", 1e-6))
        return SparkHedge(float(h), nf, ne)
    if kind == "weather":
        q = np.asarray(kw["demand"], float)
        idx = np.asarray(kw["index"], float)
        inst = kw.get("instrument", "futures")
        if inst == "futures":
            x, sign = idx, 1.0
        elif inst == "put":
            x, sign = np.maximum(kw["K"] - idx, 0.0), -1.0
        elif inst == "call":
            x, sign = np.maximum(idx - kw["K"], 0.0), 1.0
        else:
            raise ParameterError(f"unknown instrument {inst!r}")
        vx = np.var(x, ddof=1)
        if vx == 0:
            raise DegenerateError("hedge instrument payoff has zero variance")
        return float(sign * np.cov(q, x, ddof=1)[0, 1] / vx)
    raise ParameterError(f"unknown hedge kind {kind!r}")


def degree_days(t_min, t_max, base=65.0):
    """(CDD, HDD) index from daily min/max temperatures."""
    T = (np.asarray(t_min, float) + np.asarray(t_max, float)) / 2
    return float(np.sum(np.maximum(T - base, 0))), float(np.sum(np.maximum(base - T, 0)))


# ------------------------------------------------ cross-sectional futures

FUTURES_MODES = ("contrarian", "contrarian_filtered", "trend_sign", "trend_tanh",
                 "trend_demeaned", "trend_two_gamma")


def futures_xsec_weights(returns, mode="contrarian", sigma=None, sigma_power=0, kappa=None,
                         volume=None, volume_prev=None, open_interest=None, open_interest_prev=None,
                         demean_returns=False):
    """Capital weights with sum |w| = 1 for the futures contrarian/trend rules.

    ``sigma_power`` (0, 1 or 2) suppresses contrarian weights by sigma^-p; the
    trend modes always divide by sigma.
    """
    R = np.asarray(returns, float).ravel()
    n = R.size
    if mode == "contrarian_filtered":
        v = np.log(np.asarray(volume, float) / np.asarray(volume_prev, float))
        u = np.log(np.asarray(open_interest, float) / np.asarray(open_interest_prev, float))
        top_v, _ = quantile_members(v, 0.5)
        _, low_u = quantile_members(u[top_v], 0.5)
        sub = top_v[low_u]
        w = np.zeros(n)
        if sub.size == 0:
            return WeightVector(w, mode, no_trade=True)
        inner = futures_xsec_weights(R[sub], "contrarian",
                                     None if sigma is None else np.asarray(sigma, float)[sub], sigma_power)
        w[sub] = inner.weights
        return WeightVector(w, mode, inner.no_trade)
    if mode == "contrarian":
        d = -(R - R.mean())
        if sigma_power:
            s = np.asarray(sigma, float)
            if np.any(s <= 0):
                raise DegenerateError("volatilities must be positive")
            d = d / s**sigma_power
        tot = np.abs(d).sum()
        if tot == 0:
            return WeightVector(np.zeros(n), mode, no_trade=True)
        return WeightVector(d / tot, mode)
    if sigma is None:
        raise ParameterError("trend modes need volatilities")
    s = np.asarray(sigma, float)
    if np.any(s <= 0):
        raise DegenerateError("volatilities must be positive")
    base = R - R.mean() if demean_returns else R
    if mode == "trend_tanh":
        k = kappa if kappa is not None else float(np.std(R, ddof=1)) if n > 1 else 1.0
        if k <= 0:
            raise DegenerateError("tanh scale must be positive")
        eta = np.tanh(base / k)
    else:
        eta = np.sign(base)
    x = eta / s
    if mode == "trend_demeaned":
        x = x - x.mean()
    elif mode == "trend_two_gamma":
        pos, neg = x > 0, x < 0
        if not pos.any() or not neg.any():
            return WeightVector(np.zeros(n), mode, no_trade=True)
        w = np.zeros(n)
        w[pos] = 0.5 * x[pos] / x[pos].sum()
        w[neg] = -0.5 * x[neg] / x[neg].sum()
        return WeightVector(w, mode)
    elif mode not in ("trend_sign", "trend_tanh"):
        raise ParameterError(f"unknown mode {mode!r}")
    tot = np.abs(x).sum()
    if tot == 0:
        return WeightVector(np.zeros(n), mode, no_trade=True)
    w = x / tot
    if mode == "trend_demeaned":
        w -= w.mean()
    return WeightVector(w, mode)


def calendar_spread_stance(expectation):
    """Bull spread (+near, -deferred) for low supply / high demand, else the reverse."""
    if expectation == "supply-low-demand-high":
        return {"near": 1, "deferred": -1, "stance": "bull"}
    if expectation == "supply-high-demand-low":
        return {"near": -1, "deferred": 1, "stance": "bear"}
    raise ParameterError("unknown expectation")


# --------------------------------------------------------------------- FX


@dataclass
class FXParity:
    forward: float
    expected_spot: float
    forward_discount: float
    discount_approx: float
    uirp_excess: float | None = None


def fx_parity(spot, r_d, r_f, realized=None):
    """Covered parity forward, UIRP expected spot and the log forward discount.

    ``realized`` S(t+T), when given, yields the carry excess return of holding
    the foreign deposit: S(t+T)/S(t) (1+r_f) - (1+r_d).
    """
    if r_d <= -1 or r_f <= -1:
        raise ParameterError("rates must exceed -100%")
    if spot <= 0:
        raise ParameterError("spot must be positive")
    F = spot * (1 + r_d) / (1 + r_f)
    D = float(np.log((1 + r_f) / (1 + r_d)))
    ex = None if realized is None else float(realized / spot * (1 + r_f) - (1 + r_d))
    return FXParity(float(F), float(F), D, r_f - r_d, ex)


def forward_discount(spot, forward):
    """D = ln S - ln F."""
    return np.log(np.asarray(spot, float)) - np.log(np.asarray(forward, float))


def fx_carry_portfolio(discounts, mode="hml", q=1 / 3):
    """Carry positions in currency forwards (positive weight = buy the forward)."""
    D = np.asarray(discounts, float).ravel()
    n = D.size
    if mode == "single":
        w = np.sign(D)
        tot = np.abs(w).sum()
        return WeightVector(w / tot if tot else w, mode, no_trade=not tot)
    if mode == "dollar":
        m = D.mean()
        if m == 0:
            return WeightVector(np.zeros(n), mode, no_trade=True)
        return WeightVector(np.full(n, np.sign(m) / n), mode)
    if mode == "hml":
        if n < 2:
            raise InsufficientHistoryError("high-minus-low needs at least 2 currencies")
        if np.all(D == D[0]):
            return WeightVector(np.zeros(n), mode, no_trade=True)
        top, bottom = quantile_members(D, q)
        return _equal_long_short(n, top, bottom, mode)
    raise ParameterError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class FXQuote:
    """Bid/ask in quote-currency units per base-currency unit."""

    bid: float
    ask: float

    def __post_init__(self):
        if not 0 < self.bid <= self.ask:
            raise ParameterError("need ask >= bid > 0")


@dataclass
class TriangularArb:
    forward_chain: float  # A -> B -> C -> A
    reverse_chain: float  # A -> C -> B -> A
    profitable: bool


def triangular_arb(ab: FXQuote, bc: FXQuote, ac: FXQuote):
    """Round-trip rates through pairs A/B, B/C and A/C.

    Selling a base unit earns the bid; buying one costs the ask.
    """
    r1 = ab.bid * bc.bid / ac.ask
    r2 = ac.bid / (bc.ask * ab.ask)
    return TriangularArb(float(r1), float(r2), bool(r1 > 1 or r2 > 1))


def hp_trend_signal(series, T1, T2, lam=ts_stats.HP_LAMBDA_MONTHLY, rel_tol=1e-12):
    """HP-filter the spot series (most recent first) then compare MA(T1) and MA(T2)."""
    if not T1 < T2:
        raise ParameterError("need T1 < T2")
    S = np.asarray(series, float)
    if T2 > S.size:
        raise InsufficientHistoryError("MA length exceeds history")
    reg = ts_stats.hp_filter(S, lam).regular
    m1, m2 = ts_stats.sma(reg, T1), ts_stats.sma(reg, T2)
    if abs(m1 - m2) <= rel_tol * max(abs(m1), abs(m2), 1e-300):
        return "hold"
    return "buy" if m1 > m2 else "sell"

"""Cross-sectional stock/ETF signals, quantile portfolios and technical rules.

Tables are assets x time with column 0 the most recent observation. Monthly
momentum uses t = 0 for the latest month end.
"""
from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from . import ts_stats
from .errors import DegenerateError, InsufficientHistoryError, NoSignalError, ParameterError


@dataclass
class ScoreVector:
    """Per-asset signal values; ``degenerate`` marks assets whose score is undefined."""

    values: np.ndarray
    label: str = ""
    degenerate: np.ndarray | None = None


@dataclass
class WeightVector:
    """Signed weights; ``no_trade`` is set when filters leave nothing to hold."""

    weights: np.ndarray
    label: str = ""
    no_trade: bool = False
    meta: dict = field(default_factory=dict)


# ------------------------------------------------------------------ helpers


def month_end_columns(dates):
    """Indices of the last trading day of each calendar month.

    ``dates`` are ISO labels in descending order; the newest (possibly partial)
    month contributes its latest available day.
    """
    seen = set()
    out = []
    for j, d in enumerate(dates):
        day = _dt.date.fromisoformat(str(d))
        key = (day.year, day.month)
        if key not in seen:
            seen.add(key)
            out.append(j)
    return np.array(out, dtype=int)


def monthly_prices(dates, prices):
    cols = month_end_columns(dates)
    return np.asarray(prices, dtype=float)[:, cols]


def quantile_members(scores, q=0.1, tickers=None):
    """(top, bottom) index arrays holding floor(N*q) names each.

    Ties are broken by ticker order (or position when tickers are absent):
    the earlier ticker wins a place in either extreme.
    """
    s = np.asarray(scores, dtype=float)
    n = s.size
    k = int(np.floor(n * q + 1e-12))
    order_key = np.arange(n) if tickers is None else np.argsort(np.argsort(np.asarray(tickers), kind="stable"))
    top = np.lexsort((order_key, -s))[:k]
    bottom = np.lexsort((order_key, s))[:k]
    return np.sort(top), np.sort(bottom)


def long_short_weights(n, longs, shorts, sigma=None, power=0):
    """Dollar-neutral weights with sum |w| = 1.

    power 0 gives modulus-uniform 1/(2 N_L) and -1/(2 N_S); power 1 or 2 scales
    each name by sigma^-power before normalizing each side to 1/2.
    """
    w = np.zeros(n)
    for idx, sign in ((np.asarray(longs, int), 1.0), (np.asarray(shorts, int), -1.0)):
        if idx.size == 0:
            continue
        raw = np.ones(idx.size) if power == 0 else np.asarray(sigma, float)[idx] ** (-power)
        w[idx] = sign * 0.5 * raw / raw.sum()
    if not longs.size or not shorts.size:
        tot = np.abs(w).sum()
        if tot > 0:
            w /= tot
    return w


def _ols(y, X):
    """Least squares with intercept; returns (coef, fitted, residuals)."""
    A = np.column_stack([np.ones(len(y)), X])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    fit = A @ coef
    return coef, fit, y - fit


# ----------------------------------------------------------------- momentum


def simple_returns(prices):
    """R(t) = P(t)/P(t+1) - 1 along the time axis (column 0 newest)."""
    P = np.asarray(prices, dtype=float)
    return P[..., :-1] / P[..., 1:] - 1.0


def momentum_score(prices, mode="cumulative", T=12, S=1):
    """Price momentum over a formation window of T periods after skipping S.

    ``prices`` is assets x months, column 0 = t = 0. Modes: ``cumulative``
    P(S)/P(S+T) - 1, ``mean`` average of R(t) for t = S..S+T-1 and
    ``risk_adjusted`` that mean over its (T-1)-normalized volatility.
    """
    P = np.atleast_2d(np.asarray(prices, dtype=float))
    if T < 1 or S < 0:
        raise ParameterError("need T >= 1 and S >= 0")
    if P.shape[1] < S + T + 1:
        raise InsufficientHistoryError(f"need {S + T + 1} monthly prices, have {P.shape[1]}")
    if np.any(P[:, : S + T + 1] <= 0):
        raise ParameterError("prices must be positive")
    if mode == "cumulative":
        return P[:, S] / P[:, S + T] - 1.0
    R = simple_returns(P[:, S : S + T + 1])
    mean = R.mean(axis=1)
    if mode == "mean":
        return mean
    if mode == "risk_adjusted":
        if T < 2:
            raise InsufficientHistoryError("risk-adjusted momentum needs T >= 2")
        sd = np.sqrt(np.sum((R - mean[:, None]) ** 2, axis=1) / (T - 1))
        # compounding at a constant rate leaves only rounding noise in sd
        if np.any(sd <= 1e-12 * np.abs(mean)) or np.any(sd == 0):
            raise DegenerateError("zero volatility over the formation window")
        return mean / sd
    raise ParameterError(f"unknown momentum mode {mode!r}")


def earnings_surprises(eps, quarters=8):
    """E(t) - E(t+4) for the ``quarters`` most recent quarters (column 0 newest)."""
    E = np.atleast_2d(np.asarray(eps, dtype=float))
    if E.shape[1] < quarters + 4:
        raise InsufficientHistoryError(f"need {quarters + 4} quarters of EPS")
    return E[:, :quarters] - E[:, 4 : quarters + 4]


def sue_score(surprises):
    """SUE = current surprise over the sample SD of the last 8 surprises."""
    U = np.atleast_2d(np.asarray(surprises, dtype=float))
    if U.shape[1] < 8:
        raise InsufficientHistoryError("SUE needs 8 quarters of surprises")
    U = U[:, :8]
    sd = U.std(axis=1, ddof=1)
    degenerate = sd == 0
    vals = np.where(degenerate, np.nan, U[:, 0] / np.where(degenerate, 1.0, sd))
    return ScoreVector(vals, "sue", degenerate)


def value_score(book_per_share, price):
    b = np.asarray(book_per_share, dtype=float)
    p = np.asarray(price, dtype=float)
    if np.any(p <= 0):
        raise ParameterError("prices must be positive")
    return b / p


def low_vol_score(returns, window):
    """Historical volatility over the ``window`` most recent returns (n-1)."""
    R = np.atleast_2d(np.asarray(returns, dtype=float))
    if window < 2:
        raise InsufficientHistoryError("volatility needs window >= 2")
    if R.shape[1] < window:
        raise InsufficientHistoryError("window exceeds history")
    return R[:, :window].std(axis=1, ddof=1)


def impliedvol_change_score(call_change, put_change, mode="difference"):
    c = np.asarray(call_change, dtype=float)
    p = np.asarray(put_change, dtype=float)
    if mode == "call":
        return c
    if mode == "put":
        return p
    if mode == "difference":
        return c - p
    raise ParameterError(f"unknown mode {mode!r}")


def combine_ranks(scores):
    """Average of cross-sectionally demeaned ranks of each factor."""
    if len(scores) == 0:
        raise ParameterError("need at least one score vector")
    arrs = [np.asarray(getattr(s, "values", s), dtype=float).ravel() for s in scores]
    n = arrs[0].size
    if any(a.size != n for a in arrs):
        raise ParameterError("score vectors cover different universes")
    total = np.zeros(n)
    for a in arrs:
        r = rankdata(a)
        total += r - r.mean()
    return total / len(arrs)


def residual_momentum(stock_returns, factor_returns, est_window=36, T=12, S=1):
    """Risk-adjusted momentum of factor-regression residuals.

    The serial regression with intercept runs over t = S..S+est_window-1;
    residuals over t = S..S+T-1 omit the intercept. Factor columns that are
    identically zero carry no information and get a zero loading.
    """
    R = np.atleast_2d(np.asarray(stock_returns, dtype=float))
    F = np.asarray(factor_returns, dtype=float)
    if F.ndim == 1:
        F = F[None, :]
    if F.shape[1] != R.shape[1] and F.shape[0] == R.shape[1]:
        F = F.T
    need = S + max(est_window, T)
    if R.shape[1] < need or F.shape[1] < need:
        raise InsufficientHistoryError(f"residual momentum needs {need} months")
    Fe = F[:, S : S + est_window].T
    keep = np.any(Fe != 0, axis=0)
    A = np.column_stack([np.ones(est_window), Fe[:, keep]])
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise DegenerateError("singular factor regressors")
    scores = np.empty(R.shape[0])
    degenerate = np.zeros(R.shape[0], dtype=bool)
    Ff = F[:, S : S + T].T
    for i in range(R.shape[0]):
        coef, *_ = np.linalg.lstsq(A, R[i, S : S + est_window], rcond=None)
        beta = np.zeros(F.shape[0])
        beta[keep] = coef[1:]
        eps = R[i, S : S + T] - Ff @ beta
        m = eps.mean()
        sd = np.sqrt(np.sum((eps - m) ** 2) / (T - 1))
        scale = np.std(R[i, S : S + T]) + np.finfo(float).tiny
        if sd <= 1e-9 * scale:
            degenerate[i] = True
            scores[i] = np.nan
        else:
            scores[i] = m / sd
    return ScoreVector(scores, "residual_momentum", degenerate)


# ------------------------------------------------------------ mean reversion


def pairs_quantities(P_A, P_B, R_A, R_B, investment):
    """Share counts (Q_A, Q_B): sell the rich leg, buy the cheap one.

    Satisfies |Q_A| P_A + |Q_B| P_B = I and Q_A P_A + Q_B P_B = 0.
    """
    if investment <= 0 or P_A <= 0 or P_B <= 0:
        raise ParameterError("prices and investment must be positive")
    dA = R_A - 0.5 * (R_A + R_B)
    if dA == 0:
        raise NoSignalError("equal returns carry no pairs signal")
    sign = -1.0 if dA > 0 else 1.0
    return sign * investment / (2.0 * P_A), -sign * investment / (2.0 * P_B)


@dataclass
class GroupMeanRev:
    dollars: np.ndarray
    residuals: np.ndarray
    gamma: float
    singleton_groups: list


def _group_demean(x, codes, k):
    out = x.copy()
    for _ in range(2):  # second pass removes the rounding left by the first
        sums = np.bincount(codes, weights=out, minlength=k)
        cnt = np.bincount(codes, minlength=k)
        out = out - (sums / cnt)[codes]
    return out


def group_meanrev_weights(returns, groups, investment):
    """Dollar holdings D = -gamma * (group-demeaned returns) with sum|D| = I."""
    R = np.asarray(returns, dtype=float).ravel()
    g = np.asarray(groups)
    if g.shape != R.shape:
        raise ParameterError("every asset needs exactly one group")
    if investment <= 0:
        raise ParameterError("investment must be positive")
    labels, codes = np.unique(g, return_inverse=True)
    cnt = np.bincount(codes, minlength=len(labels))
    eps = _group_demean(R, codes, len(labels))
    singles = [labels[a].item() if hasattr(labels[a], "item") else labels[a] for a in np.flatnonzero(cnt == 1)]
    eps[np.isin(codes, np.flatnonzero(cnt == 1))] = 0.0
    tot = np.abs(eps).sum()
    if tot == 0:
        return GroupMeanRev(np.zeros_like(R), eps, 0.0, singles)
    gamma = investment / tot
    return GroupMeanRev(-gamma * eps, eps, gamma, singles)


def weighted_reg_residuals(returns, loadings, weights=None):
    """R~ = Z eps with eps = R - Omega Q^{-1} Omega' Z R and Q = Omega' Z Omega.

    R~ is orthogonal to every loading column. Solved as a least-squares
    problem on sqrt(Z)-scaled data with one refinement step.
    """
    R = np.asarray(returns, dtype=float).ravel()
    Om = np.asarray(loadings, dtype=float)
    if Om.ndim == 1:
        Om = Om[:, None]
    z = np.ones_like(R) if weights is None else np.asarray(weights, dtype=float).ravel()
    if np.any(z <= 0):
        raise ParameterError("regression weights must be positive")
    sq = np.sqrt(z)
    A = Om * sq[:, None]
    if np.linalg.matrix_rank(A) < Om.shape[1]:
        raise DegenerateError("loadings matrix is rank deficient")
    f, *_ = np.linalg.lstsq(A, sq * R, rcond=None)
    eps = R - Om @ f
    df, *_ = np.linalg.lstsq(A, sq * eps, rcond=None)
    eps = eps - Om @ df
    return z * eps


# -------------------------------------------------------- technical rules

ACTIONS = (
    "long", "short", "hold",
    "establish_long", "liquidate_long", "establish_short", "liquidate_short",
)


def _ma(hist, T, kind="sma", lam=None):
    if kind == "sma":
        return ts_stats.sma(hist, T)
    if kind == "ema":
        return ts_stats.ema(hist, T, lam if lam is not None else (T - 1) / (T + 1))
    raise ParameterError(f"unknown moving average {kind!r}")


def pivot_levels(high, low, close):
    """Pivot C = (H + L + Cl)/3, resistance 2C - L, support 2C - H."""
    C = (high + low + close) / 3.0
    return C, 2 * C - low, 2 * C - high


def technical_signal(history, rule, lengths=(), price=None, position=0, delta=0.02,
                     prev_bar=None, ma="sma", lam=None):
    """Trade action for one asset.

    ``history`` holds P(1), P(2), ... (most recent first) and ``price`` the
    current P. ``position`` (+1, 0, -1) matters for rules with separate
    establish/liquidate conditions. Ties always resolve to ``hold``.
    """
    h = np.asarray(history, dtype=float).ravel()
    if rule == "ma1":
        (T,) = lengths
        m = _ma(h, T, ma, lam)
        return "long" if price > m else "short" if price < m else "hold"
    if rule in ("ma2", "ma2_stop"):
        Ts, Tl = lengths
        if not Ts < Tl:
            raise ParameterError("need T' < T")
        a, b = _ma(h, Ts, ma, lam), _ma(h, Tl, ma, lam)
        if rule == "ma2":
            return "long" if a > b else "short" if a < b else "hold"
        P1 = h[0]
        if position > 0 and price < (1 - delta) * P1:
            return "liquidate_long"
        if position < 0 and price > (1 + delta) * P1:
            return "liquidate_short"
        if a > b and position <= 0:
            return "establish_long"
        if a < b and position >= 0:
            return "establish_short"
        return "hold"
    if rule == "ma3":
        T1, T2, T3 = lengths
        if not T1 < T2 < T3:
            raise ParameterError("need T1 < T2 < T3")
        a, b, c = (_ma(h, T, ma, lam) for T in (T1, T2, T3))
        if position > 0:
            return "liquidate_long" if a <= b else "hold"
        if position < 0:
            return "liquidate_short" if a >= b else "hold"
        if a > b > c:
            return "establish_long"
        if a < b < c:
            return "establish_short"
        return "hold"
    if rule == "pivot_sr":
        if prev_bar is None:
            raise ParameterError("pivot rule needs the prior (high, low, close)")
        C, R, S_ = pivot_levels(*prev_bar)
        if position > 0:
            return "liquidate_long" if price >= R else "hold"
        if position < 0:
            return "liquidate_short" if price <= S_ else "hold"
        return "establish_long" if price > C else "establish_short" if price < C else "hold"
    if rule == "donchian":
        (T,) = lengths
        w = h[:T] if T <= h.size else None
        if w is None:
            raise InsufficientHistoryError("channel length exceeds history")
        floor_, ceil_ = w.min(), w.max()
        if floor_ == ceil_:
            return "hold"
        if price == floor_:
            return "long"
        if price == ceil_:
            return "short"
        return "hold"
    raise ParameterError(f"unknown rule {rule!r}")


@dataclass
class MergerArbPosition:
    legs: dict
    credit: float


def merger_arb_position(deal_type, P_A, P_B=None, ratio=None):
    """Target long 1 share; for stock deals also short ``ratio`` acquirer shares."""
    if P_A <= 0:
        raise ParameterError("prices must be positive")
    if deal_type == "cash":
        return MergerArbPosition({"target": 1.0}, -float(P_A))
    if deal_type == "stock":
        if P_B is None or P_B <= 0 or ratio is None or ratio <= 0:
            raise ParameterError("stock deals need acquirer price and ratio > 0")
        return MergerArbPosition({"target": 1.0, "acquirer": -float(ratio)}, ratio * P_B - P_A)
    raise ParameterError("deal type must be 'cash' or 'stock'")


# -------------------------------------------------------------- ETF rules


def _decile_portfolio(score, dollar_neutral, q=0.1, tickers=None):
    n = len(score)
    top, bottom = quantile_members(score, q, tickers)
    if top.size == 0:
        return WeightVector(np.zeros(n), no_trade=True)
    if dollar_neutral:
        return WeightVector(long_short_weights(n, top, bottom))
    w = np.zeros(n)
    w[top] = 1.0 / top.size
    return WeightVector(w)


def factor_alphas(returns, factors):
    """Intercepts and R^2 of serial regressions of each row on the factors."""
    R = np.atleast_2d(np.asarray(returns, dtype=float))
    F = np.asarray(factors, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    if F.shape[0] != R.shape[1]:
        F = F.T
    alphas = np.empty(R.shape[0])
    r2 = np.empty(R.shape[0])
    for i, y in enumerate(R):
        coef, _, res = _ols(y, F)
        alphas[i] = coef[0]
        sst = np.sum((y - y.mean()) ** 2)
        r2[i] = 1.0 - np.sum(res**2) / sst if sst > 0 else np.nan
    return alphas, r2


def etf_rotation(rule, **kw):
    """ETF portfolio rules. See the individual keyword sets below.

    sector_momentum: scores, dollar_neutral=False
    ma_filtered:     scores, price, ma, dollar_neutral=False
    dual_momentum:   scores, index_price, index_ma, safe_asset
    alpha:           returns (assets x T), factors (T x k), dollar_neutral=True
    r2_selectivity:  alpha, r2
    ibs_reversion:   ibs
    multiasset_trend: cum_returns, sigma=None, scheme='R'|'R/sigma'|'R/sigma2',
                      price=None, ma=None, caps=None
    letf_pair:       investment, leverage
    """
    tickers = kw.get("tickers")
    if rule == "sector_momentum":
        return _decile_portfolio(np.asarray(kw["scores"], float), kw.get("dollar_neutral", False), tickers=tickers)
    if rule == "ma_filtered":
        s = np.asarray(kw["scores"], float)
        P, M = np.asarray(kw["price"], float), np.asarray(kw["ma"], float)
        top, bottom = quantile_members(s, 0.1, tickers)
        top = top[P[top] > M[top]]
        bottom = bottom[P[bottom] < M[bottom]] if kw.get("dollar_neutral", False) else bottom[:0]
        n = s.size
        if top.size == 0 and bottom.size == 0:
            return WeightVector(np.zeros(n), "ma_filtered", True)
        if bottom.size == 0:
            w = np.zeros(n)
            w[top] = 1.0 / top.size
            return WeightVector(w, "ma_filtered")
        return WeightVector(long_short_weights(n, top, bottom), "ma_filtered")
    if rule == "dual_momentum":
        s = np.asarray(kw["scores"], float)
        safe = int(kw["safe_asset"])
        if kw["index_price"] <= kw["index_ma"]:
            w = np.zeros(s.size)
            w[safe] = 1.0
            return WeightVector(w, "dual_momentum", meta={"regime": "risk_off"})
        masked = s.copy()
        masked[safe] = -np.inf
        top, _ = quantile_members(masked, 0.1, tickers)
        w = np.zeros(s.size)
        if top.size == 0:
            return WeightVector(w, "dual_momentum", True)
        w[top] = 1.0 / top.size
        return WeightVector(w, "dual_momentum", meta={"regime": "risk_on"})
    if rule == "alpha":
        alphas, _ = factor_alphas(kw["returns"], kw["factors"])
        wv = _decile_portfolio(alphas, kw.get("dollar_neutral", True), tickers=tickers)
        wv.meta["alpha"] = alphas
        return wv
    if rule == "r2_selectivity":
        a = np.asarray(kw["alpha"], float)
        r2 = np.asarray(kw["r2"], float)
        n = a.size
        q_r2 = _quantile_labels(r2, 5)
        longs, shorts = [], []
        for bucket, pick in ((0, "high"), (4, "low")):
            idx = np.flatnonzero(q_r2 == bucket)
            if idx.size == 0:
                continue
            sub = _quantile_labels(a[idx], 5)
            if pick == "high":
                longs.extend(idx[sub == 4])
            else:
                shorts.extend(idx[sub == 0])
        longs, shorts = np.array(longs, int), np.array(shorts, int)
        if longs.size == 0 or shorts.size == 0:
            return WeightVector(np.zeros(n), "r2_selectivity", True)
        return WeightVector(long_short_weights(n, longs, shorts), "r2_selectivity")
    if rule == "ibs_reversion":
        s = np.asarray(kw["ibs"], float)
        top, bottom = quantile_members(s, 0.1, tickers)
        if top.size == 0:
            return WeightVector(np.zeros(s.size), "ibs_reversion", True)
        return WeightVector(long_short_weights(s.size, bottom, top), "ibs_reversion")
    if rule == "multiasset_trend":
        return _multiasset_trend(**kw)
    if rule == "letf_pair":
        I = float(kw["investment"])
        if I <= 0:
            raise ParameterError("investment must be positive")
        legs = {"leveraged": -I / 2, "inverse_leveraged": -I / 2, "risk_free": I}
        return WeightVector(np.array([-0.5, -0.5, 1.0]), "letf_pair", meta={"dollars": legs, "leverage": kw.get("leverage")})
    raise ParameterError(f"unknown ETF rule {rule!r}")


def _quantile_labels(x, k):
    """Bucket 0..k-1 by rank; bucket sizes differ by at most one."""
    n = x.size
    order = np.lexsort((np.arange(n), x))
    labels = np.empty(n, dtype=int)
    labels[order] = (np.arange(n) * k) // n
    return labels


def _multiasset_trend(cum_returns, sigma=None, scheme="R", price=None, ma=None, caps=None, **_):
    R = np.asarray(cum_returns, float)
    keep = R > 0
    if price is not None and ma is not None:
        keep &= np.asarray(price, float) > np.asarray(ma, float)
    w = np.zeros(R.size)
    if not keep.any():
        return WeightVector(w, "multiasset_trend", True)
    if scheme == "R":
        raw = R
    elif scheme in ("R/sigma", "R/sigma2"):
        if sigma is None:
            raise ParameterError("sigma required for volatility-scaled weights")
        s = np.asarray(sigma, float)
        if np.any(s[keep] <= 0):
            raise DegenerateError("volatility must be positive")
        raw = R / (s if scheme == "R/sigma" else s**2)
    else:
        raise ParameterError(f"unknown scheme {scheme!r}")
    w[keep] = raw[keep] / raw[keep].sum()
    if caps is not None:
        w = _cap_weights(w, np.broadcast_to(np.asarray(caps, float), w.shape), keep)
    return WeightVector(w, "multiasset_trend")


def _cap_weights(w, caps, keep):
    """Clip at caps and hand the excess to uncapped names pro rata."""
    w = w.copy()
    if caps[keep].sum() < 1 - 1e-12:
        raise ParameterError("caps cannot absorb a fully invested portfolio")
    fixed = np.zeros(w.size, dtype=bool)
    for _ in range(w.size + 1):
        over = keep & ~fixed & (w > caps)
        if not over.any():
            break
        fixed |= over
        w[fixed] = caps[fixed]
        free = keep & ~fixed
        rest = 1.0 - w[fixed].sum()
        if free.any() and w[free].sum() > 0:
            w[free] *= rest / w[free].sum()
    return w

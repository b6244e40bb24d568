"""Out-of-sample intraday backtest: positions open at the open and close at
the close of the same day.

Column conventions follow the panel files (column 0 is the most recent day).
Loop column j trades on day j - 1: its signal uses data from columns >= j,
its P&L uses the open and close of column j - 1. Column 0 has no trade day
inside the panel and is dropped from every output.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .data_panel import PricePanel, ReturnPanel, rolling_mean, rolling_sd
from .errors import DataError, DegenerateError, InsufficientHistoryError, ParameterError
from .portfolio_opt import OptProblem, bounded_mv_optimize
from .ts_stats import stat_risk_model

log = logging.getLogger(__name__)

MODES = ("reversion", "momentum")
COST_BPS = 1e-3


@dataclass(frozen=True)
class BacktestConfig:
    days: int = 252 * 5
    d_r: int = 21
    d_addv: int = 21
    n_addv: int = 2000
    inv_lvl: float = 2e7
    bnds: float = 0.01
    incl_cost: bool = False
    mode: str = "reversion"

    def __post_init__(self):
        for name in ("days", "d_addv", "n_addv"):
            if int(getattr(self, name)) < 1:
                raise ParameterError(f"{name} must be >= 1")
        if self.days < 2:
            raise ParameterError("days must be >= 2 (the first column is dropped)")
        if self.d_r < 2:
            raise ParameterError("d_r must be >= 2 for a standard deviation")
        if not self.inv_lvl > 0:
            raise ParameterError("inv_lvl must be positive")
        if not self.bnds > 0:
            raise ParameterError("bnds must be positive")
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}")

    def required_history(self):
        return self.days + max(self.d_addv, self.d_r) + 1


@dataclass
class BacktestReport:
    tickers: tuple
    dates: tuple  # trade-day labels, one per reported column
    holdings: np.ndarray  # tickers x days-1, currency
    pnl: np.ndarray  # per-day P&L
    total_pnl: float
    annual_return_pct: float
    sharpe: float | None
    cps: float | None
    config: BacktestConfig
    no_trade_days: list = field(default_factory=list)
    bound_violations: list = field(default_factory=list)

    def to_dict(self):
        return {
            "config": asdict(self.config),
            "tickers": list(self.tickers),
            "dates": list(self.dates),
            "pnl": self.pnl.tolist(),
            "holdings": self.holdings.tolist(),
            "total_pnl": self.total_pnl,
            "annual_return_pct": self.annual_return_pct,
            "sharpe": self.sharpe,
            "cps": self.cps,
            "no_trade_days": self.no_trade_days,
            "bound_violations": self.bound_violations,
        }


def rebuild_index(i, d, d_r):
    """Anchor column (1-based) of the rebuild block holding column i."""
    if not 1 <= i <= d:
        raise ParameterError("need 1 <= i <= d")
    return d - ((d - i) // d_r) * d_r


def cost_adjust(E, sigma, addv, include=True):
    """Soft-threshold E by the linear cost tau = zeta sigma/A with mean tau = 10bp.

    Returns (E_eff, tau).
    """
    E = np.asarray(E, float)
    if not include:
        return E.copy(), np.zeros_like(E)
    A = np.asarray(addv, float)
    if np.any(A <= 0):
        raise DataError("zero ADDV in the trading universe")
    ratio = np.asarray(sigma, float) / A
    m = ratio.mean()
    # a universe with no volatility has nothing to scale against
    tau = np.zeros_like(E) if m == 0 else COST_BPS * ratio / m
    return np.sign(E) * np.maximum(np.abs(E) - tau, 0.0), tau


def performance_metrics(pnl, holdings=None, opens=None, inv_lvl=2e7):
    """(total, annualized %, Sharpe or None, cents per share or None)."""
    p = np.asarray(pnl, float)
    if p.size == 0:
        raise InsufficientHistoryError("empty P&L series")
    total = float(p.sum())
    annual = float(p.mean() * 252 / inv_lvl * 100)
    sd = p.std(ddof=1) if p.size > 1 else 0.0
    sharpe = None if sd == 0 or not np.isfinite(sd) else float(p.mean() / sd * math.sqrt(252))
    cps = None
    if holdings is not None and opens is not None:
        vol = 2 * float(np.sum(np.abs(np.asarray(holdings, float) / np.asarray(opens, float))))
        cps = None if vol == 0 else 100 * total / vol
    return total, annual, sharpe, cps


def _target_gross_weights(E, cov, lo, hi, max_steps=200):
    """Dollar-neutral bounded mean-variance weights with sum |w| = 1.

    Solves max E.w - w'Cw/(2 mu) and searches mu so the gross weight hits 1.
    Within one active set and sign pattern w is affine in mu, so the search
    bisects until both ends share a pattern and then interpolates exactly.
    Returns (w, capped); capped flags insufficient bound capacity.
    """
    n = E.size
    A = np.ones((1, n))

    def solve(mu):
        # mu E.w - w'Cw/2 has the same maximizer and keeps the Hessian fixed
        res = bounded_mv_optimize(OptProblem(mu * E, cov, lo, hi, A, np.zeros(1), risk_aversion=1.0))
        w = res.weights
        sgn = np.where(np.abs(w) > 1e-12 * np.abs(w).max(initial=0.0), np.sign(w), 0.0)
        return w, np.abs(w).sum(), (tuple(res.at_lower), tuple(res.at_upper), tuple(sgn))

    mu_lo, (w_lo, g_lo, p_lo) = 0.0, (np.zeros(n), 0.0, None)
    mu_hi = 1.0
    w_hi, g_hi, p_hi = solve(mu_hi)
    steps = 0
    while g_hi < 1:
        steps += 1
        mu_lo, w_lo, g_lo, p_lo = mu_hi, w_hi, g_hi, p_hi
        mu_hi *= 4.0
        w_hi, g_hi, p_hi = solve(mu_hi)
        if g_hi <= g_lo * (1 + 1e-12) or steps > max_steps:
            return w_hi, True
    if mu_lo == 0.0:
        # w(0) = 0 and w is linear on [0, mu_hi] when no bound is active there
        p_lo = (tuple(np.zeros(n, bool)),) * 2 + (p_hi[2],)
    for _ in range(max_steps):
        if p_lo == p_hi and g_hi > g_lo:
            t = (1.0 - g_lo) / (g_hi - g_lo)
            return w_lo + t * (w_hi - w_lo), False
        mid = 0.5 * (mu_lo + mu_hi)
        w_m, g_m, p_m = solve(mid)
        if g_m >= 1:
            mu_hi, w_hi, g_hi, p_hi = mid, w_m, g_m, p_m
        else:
            mu_lo, w_lo, g_lo, p_lo = mid, w_m, g_m, p_m
        if mu_hi - mu_lo <= 1e-15 * mu_hi and g_hi > g_lo:
            break
    t = (1.0 - g_lo) / (g_hi - g_lo) if g_hi > g_lo else 1.0
    return w_lo + t * (w_hi - w_lo), False


def run_backtest(panel: PricePanel, ret: ReturnPanel, config: BacktestConfig | None = None):
    """Run the intraday backtest loop on a loaded panel."""
    cfg = config or BacktestConfig()
    N, T = panel.shape
    if ret.values.shape != (N, T):
        raise DataError("return table does not match the price panel")
    if T < cfg.required_history():
        raise InsufficientHistoryError(f"need {cfg.required_history()} date columns, have {T}")
    if N < 1:
        raise DataError("empty universe")
    days = cfg.days
    addv = rolling_mean(panel.volume * panel.close, cfg.d_addv, days)
    ret_close = np.log(panel.adj_close[:, :-1] / panel.adj_close[:, 1:])
    tr = rolling_sd(ret_close, cfg.d_r, days)
    R = ret.values[:, :days]
    opn = panel.open[:, :days]
    cls = panel.close[:, :days]
    close1 = np.column_stack([cls[:, 0], cls[:, :-1]])
    open1 = np.column_stack([cls[:, 0], opn[:, :-1]])
    if cfg.mode == "reversion":
        signal = R
    else:
        # signal sits on the unshifted column, negated, while P&L uses the shifted day
        signal = -np.log(cls / opn)

    pnl = np.zeros((N, days))
    hold = np.zeros((N, days))
    no_trade, violations = [], []
    prev_ix = None
    take = liq = model = None
    for i in range(1, days + 1):
        j = i - 1
        ix = rebuild_index(i, days, cfg.d_r)
        if ix != prev_ix:
            liq = addv[:, ix - 1]
            if cfg.n_addv >= N:
                take = np.ones(N, bool)
            else:
                cutoff = np.sort(liq)[::-1][cfg.n_addv - 1]
                take = liq >= cutoff
            r1 = ret_close[take, ix - 1 : ix - 1 + cfg.d_r]
            try:
                model = stat_risk_model(r1)
            except DegenerateError as exc:
                log.info("risk model unavailable at anchor %d: %s", ix, exc)
                model = None
            prev_ix = ix
        E_raw = signal[take, j]
        E, tau = cost_adjust(E_raw, tr[take, j], addv[take, j], cfg.incl_cost)
        if not np.any(E):
            no_trade.append(j)
            continue
        if model is None:
            raise DataError(f"risk model undefined for trade column {j} with a nonzero signal")
        bound = cfg.bnds * liq[take] / cfg.inv_lvl
        w, capped = _target_gross_weights(E, model, -bound, bound)
        gross = np.abs(w).sum()
        if gross == 0:
            no_trade.append(j)
            continue
        if capped:
            violations.append(j)
        h = -w * cfg.inv_lvl / gross
        hold[take, j] = h
        pnl[take, j] = h * (close1[take, j] / open1[take, j] - 1.0) - np.abs(h) * tau

    hold = hold[:, 1:]
    daily = pnl[:, 1:].sum(axis=0)
    total, annual, sharpe, cps = performance_metrics(daily, hold, open1[:, 1:], cfg.inv_lvl)
    dates = tuple(panel.dates[: days - 1])
    return BacktestReport(
        panel.tickers, dates, hold, daily, total, annual, sharpe, cps, cfg,
        [j for j in no_trade if j > 0], [j for j in violations if j > 0],
    )

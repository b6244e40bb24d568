"""Portfolio construction: Sharpe-optimal, dollar-neutral and bounded
mean-variance weights, alpha combos, volatility targeting and two-strategy
minimum-variance mixing.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DegenerateError, InsufficientHistoryError, NoSignalError, ParameterError
from .ts_stats import FactorCovModel
from .xsec_signals import WeightVector

log = logging.getLogger(__name__)


def _dense(C):
    if isinstance(C, FactorCovModel):
        return C.covariance()
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.shape[0] != C.shape[1]:
        raise ParameterError("covariance must be square")
    return C


def _solve(C, b):
    if isinstance(C, FactorCovModel):
        return C.solve(b)
    C = _dense(C)
    if np.linalg.cond(C) > 1.0 / np.finfo(float).eps:
        raise DegenerateError("covariance matrix is singular")
    return np.linalg.solve(C, b)


def _normalize_abs(w):
    tot = np.abs(w).sum()
    return w / tot


def sharpe_weights(E, C):
    """w = gamma C^{-1} E with gamma > 0 fixed by sum |w| = 1."""
    E = np.asarray(E, dtype=float).ravel()
    if not np.any(E):
        raise NoSignalError("all expected returns are zero")
    return WeightVector(_normalize_abs(_solve(C, E)), "sharpe")


def dollar_neutral_weights(E, C):
    """Sharpe-optimal weights under sum w = 0 (closed-form Lagrange solution)."""
    E = np.asarray(E, dtype=float).ravel()
    ones = np.ones_like(E)
    a = _solve(C, E)
    b = _solve(C, ones)
    w = a - b * (ones @ a) / (ones @ b)
    scale = np.abs(a).sum()
    if scale == 0 or np.abs(w).sum() <= 1e-12 * scale:
        return WeightVector(np.zeros_like(E), "dollar_neutral", no_trade=True)
    w = _normalize_abs(w)
    # remove the last rounding residue from the budget constraint
    w -= w.sum() / w.size
    return WeightVector(w, "dollar_neutral")


# --------------------------------------------------------- bounded optimizer


@dataclass
class OptProblem:
    """max E.w - (lam/2) w'Cw  s.t. lower <= w <= upper, A w = b."""

    expected: np.ndarray
    cov: object
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    risk_aversion: float = 1.0


@dataclass
class OptResult:
    weights: np.ndarray
    iterations: int
    at_lower: np.ndarray
    at_upper: np.ndarray
    eq_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kkt_residual: float = 0.0


def _feasible_start(lo, hi, A, b):
    n = lo.size
    x0 = np.clip(np.zeros(n), lo, hi)
    if A is None or np.allclose(A @ x0, b, atol=1e-12):
        return x0
    from scipy.optimize import linprog

    bounds = [(None if np.isinf(l) else l, None if np.isinf(h) else h) for l, h in zip(lo, hi)]
    res = linprog(np.zeros(n), A_eq=A, b_eq=b, bounds=bounds, method="highs")
    if res.status != 0:
        raise ParameterError("infeasible constraint set")
    return np.clip(res.x, lo, hi)


def _eqp_step(G, g, A, free):
    """Minimize 1/2 p'Gp + g'p over free coordinates with A p = 0."""
    F = np.flatnonzero(free)
    n = g.size
    p = np.zeros(n)
    if F.size == 0:
        return p, np.zeros(0 if A is None else A.shape[0])
    GF = G[np.ix_(F, F)]
    if A is None:
        p[F] = np.linalg.solve(GF, -g[F])
        return p, np.zeros(0)
    AF = A[:, F]
    m = A.shape[0]
    K = np.block([[GF, AF.T], [AF, np.zeros((m, m))]])
    rhs = np.concatenate([-g[F], np.zeros(m)])
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    p[F] = sol[: F.size]
    return p, sol[F.size :]


def bounded_mv_optimize(problem: OptProblem, tol=1e-12, max_iter=None):
    """Primal active-set solve of the bounded mean-variance problem.

    Deterministic: ties in the release rule go to the lowest index. At the
    result free coordinates satisfy stationarity and clamped coordinates carry
    multipliers of the right sign.
    """
    E = np.asarray(problem.expected, dtype=float).ravel()
    n = E.size
    lam = float(problem.risk_aversion)
    if lam <= 0:
        raise ParameterError("risk aversion must be positive")
    G = lam * _dense(problem.cov)
    if G.shape != (n, n):
        raise ParameterError("covariance does not match expected returns")
    lo = np.full(n, -np.inf) if problem.lower is None else np.broadcast_to(np.asarray(problem.lower, float), (n,)).copy()
    hi = np.full(n, np.inf) if problem.upper is None else np.broadcast_to(np.asarray(problem.upper, float), (n,)).copy()
    if np.any(lo > hi):
        raise ParameterError("infeasible bounds: lower > upper")
    A = b = None
    if problem.A_eq is not None:
        A = np.atleast_2d(np.asarray(problem.A_eq, dtype=float))
        b = np.zeros(A.shape[0]) if problem.b_eq is None else np.asarray(problem.b_eq, float).ravel()
    w = _feasible_start(lo, hi, A, b)
    at_lo = (w <= lo) & np.isfinite(lo)
    at_hi = (w >= hi) & np.isfinite(hi) & ~at_lo
    fixed_eq = lo == hi
    max_iter = max_iter or 10 * n + 100
    scale = max(1.0, np.abs(E).max())
    nu = np.zeros(0)
    full_step = False
    for it in range(1, max_iter + 1):
        g = G @ w - E
        free = ~(at_lo | at_hi)
        p, nu = _eqp_step(G, g, A, free)
        # after an unblocked step w already minimizes over the working set;
        # a fresh p there is rounding noise on ill-conditioned problems
        if full_step or np.max(np.abs(p), initial=0.0) <= 1e-13 * max(1.0, np.abs(w).max()):
            full_step = False
            grad = g if A is None else g + A.T @ nu
            mult = np.where(at_lo, grad, np.where(at_hi, -grad, 0.0))
            mult[fixed_eq] = 0.0
            worst = int(np.argmin(mult))
            if mult[worst] >= -tol * scale:
                kkt = float(np.max(np.abs(grad[free]), initial=0.0))
                return OptResult(w, it, at_lo.copy(), at_hi.copy(), nu, kkt)
            at_lo[worst] = at_hi[worst] = False
            continue
        alpha, block, block_hi = 1.0, -1, False
        for i in np.flatnonzero(free):
            if p[i] < 0 and np.isfinite(lo[i]):
                a = (lo[i] - w[i]) / p[i]
                if a < alpha:
                    alpha, block, block_hi = a, i, False
            elif p[i] > 0 and np.isfinite(hi[i]):
                a = (hi[i] - w[i]) / p[i]
                if a < alpha:
                    alpha, block, block_hi = a, i, True
        w = w + max(alpha, 0.0) * p
        full_step = block < 0
        if block >= 0:
            if block_hi:
                w[block] = hi[block]
                at_hi[block] = True
            else:
                w[block] = lo[block]
                at_lo[block] = True
    raise ConvergenceError("active-set iteration cap reached", best=w)


def kkt_check(problem: OptProblem, w, tol=1e-8):
    """True when ``w`` satisfies box-constrained KKT (no equality constraints)."""
    E = np.asarray(problem.expected, float)
    n = E.size
    grad = E - problem.risk_aversion * _dense(problem.cov) @ w  # ascent direction
    lo = np.full(n, -np.inf) if problem.lower is None else np.broadcast_to(problem.lower, (n,))
    hi = np.full(n, np.inf) if problem.upper is None else np.broadcast_to(problem.upper, (n,))
    s = max(1.0, np.abs(E).max())
    for i in range(n):
        if w[i] < lo[i] - tol or w[i] > hi[i] + tol:
            return False
        at_l, at_h = abs(w[i] - lo[i]) <= tol, abs(w[i] - hi[i]) <= tol
        if at_l and at_h:
            continue
        if at_l:
            ok = grad[i] <= tol * s
        elif at_h:
            ok = grad[i] >= -tol * s
        else:
            ok = abs(grad[i]) <= tol * s
        if not ok:
            return False
    return True


# --------------------------------------------------------------- alpha combo


@dataclass
class AlphaComboResult:
    weights: np.ndarray
    sigma: np.ndarray
    residuals: np.ndarray
    loadings: np.ndarray
    used_pinv: bool


def alpha_combo_weights(alpha_returns, d):
    """Eleven-step alpha weighting on an N x (M+1) return table (column 0 newest)."""
    R = np.atleast_2d(np.asarray(alpha_returns, dtype=float))
    N, T = R.shape
    M = T - 1
    if M < 2:
        raise InsufficientHistoryError("alpha combo needs M >= 2 (T = M + 1 >= 3)")
    if not 1 <= d <= T:
        raise ParameterError("moving-average length d must be in [1, M+1]")
    X = R - R.mean(axis=1, keepdims=True)
    sigma = np.sqrt(np.sum(X * X, axis=1) / M)
    if np.any(sigma == 0):
        raise DegenerateError("alpha with zero variance")
    Y = (X / sigma[:, None])[:, :M]
    Lam = (Y - Y.mean(axis=0, keepdims=True))[:, : M - 1]
    E = R[:, :d].mean(axis=1)
    Et = E / sigma
    used_pinv = False
    keep = np.any(Lam != 0, axis=0)
    L = Lam[:, keep]
    if L.shape[1] == 0:
        eps = Et.copy()
    else:
        gram = L.T @ L
        if np.linalg.cond(gram) < 1e10:
            coef = np.linalg.solve(gram, L.T @ Et)
        else:
            used_pinv = True
            log.info("alpha combo: rank-deficient loadings, pseudo-inverse used")
            coef = np.linalg.pinv(L) @ Et
        eps = Et - L @ coef
        eps = eps - L @ np.linalg.lstsq(L, eps, rcond=None)[0]
    w = eps / sigma
    tot = np.abs(w).sum()
    if tot == 0:
        raise NoSignalError("residual expected returns vanish")
    return AlphaComboResult(w / tot, sigma, eps, Lam, used_pinv)


# ----------------------------------------------------------- vol targeting


def vol_target_scale(current_vol, target_vol, leverage_cap=np.inf):
    """min(sigma*/sigma_hat, L); 1 - w of an uncapped scale sits in cash."""
    if current_vol <= 0:
        raise DegenerateError("current volatility must be positive")
    if target_vol <= 0:
        raise ParameterError("target volatility must be positive")
    return float(min(target_vol / current_vol, leverage_cap))


def needs_rebalance(w_old, w_new, kappa):
    """Flag when the relative allocation change exceeds the threshold."""
    if w_old == 0:
        return w_new != 0
    return abs(w_new - w_old) / abs(w_old) > kappa


def two_strategy_minvar(sigma1, sigma2, rho):
    """Minimum-variance mix of two strategies with w1 + w2 = 1."""
    if sigma1 <= 0 or sigma2 <= 0:
        raise ParameterError("volatilities must be positive")
    if abs(rho) > 1:
        raise ParameterError("|rho| must be <= 1")
    c = sigma1 * sigma2 * rho
    den = sigma1**2 + sigma2**2 - 2 * c
    if den <= 1e-15 * (sigma1**2 + sigma2**2):
        raise DegenerateError("identical perfectly correlated strategies")
    w1 = (sigma2**2 - c) / den
    return float(w1), float(1.0 - w1)


def two_strategy_minvar_from_returns(r1, r2):
    r1 = np.asarray(r1, float)
    r2 = np.asarray(r2, float)
    s1, s2 = r1.std(ddof=1), r2.std(ddof=1)
    rho = float(np.corrcoef(r1, r2)[0, 1])
    return two_strategy_minvar(s1, s2, rho)

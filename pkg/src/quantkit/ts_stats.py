"""Time-series and cross-sectional statistics.

Series are ordered most recent first: ``x[0]`` is P(1), ``x[1]`` is P(2) and
so on. Window functions use the first ``T`` entries.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateError, InsufficientHistoryError, ParameterError

HP_LAMBDA_MONTHLY = 14400.0
SPECIFIC_VAR_FLOOR = 1e-8


def _window(series, T):
    x = np.asarray(series, dtype=float).ravel()
    if T < 1:
        raise ParameterError("window length must be >= 1")
    if T > x.size:
        raise InsufficientHistoryError(f"window {T} exceeds history {x.size}")
    return x[:T]


def sma(series, T):
    """Simple moving average of the ``T`` most recent values."""
    return float(np.mean(_window(series, T)))


def ema_weights(T, lam):
    if not 0.0 < lam < 1.0:
        raise ParameterError("decay must satisfy 0 < lambda < 1")
    w = lam ** np.arange(T)
    return w * (1.0 - lam) / (1.0 - lam**T)


def ema(series, T, lam):
    """Exponential moving average (1-l)/(1-l^T) * sum l^(t-1) P(t)."""
    x = _window(series, T)
    return float(np.dot(ema_weights(T, lam), x))


def moving_sd(series, T):
    """Sample (n-1) standard deviation of the ``T`` most recent values."""
    if T < 2:
        raise InsufficientHistoryError("a standard deviation needs T >= 2")
    return float(np.std(_window(series, T), ddof=1))


def emsd(series, T, lam):
    """Exponential moving standard deviation.

    EMSD^2 = (1-l)/(l-l^T) * sum_{k<T} l^k (x_k - EMA)^2.
    """
    if T < 2:
        raise InsufficientHistoryError("EMSD needs T >= 2")
    x = _window(series, T)
    if not 0.0 < lam < 1.0:
        raise ParameterError("decay must satisfy 0 < lambda < 1")
    m = ema(x, T, lam)
    w = lam ** np.arange(T) * (1.0 - lam) / (lam - lam**T)
    return float(np.sqrt(np.dot(w, (x - m) ** 2)))


def rsi(returns, tau):
    """Relative strength nu+/(nu+ + nu-) over the ``tau`` most recent returns."""
    x = _window(returns, tau)
    up = float(np.sum(np.maximum(x, 0.0)))
    down = float(np.sum(np.maximum(-x, 0.0)))
    if up + down == 0.0:
        raise DegenerateError("RSI undefined when every return is zero")
    return up / (up + down)


def ibs(high, low, close):
    """Internal bar strength (close - low)/(high - low)."""
    high, low, close = (np.asarray(v, dtype=float) for v in (high, low, close))
    if np.any(high < low) or np.any(close < low) or np.any(close > high):
        raise ParameterError("need low <= close <= high")
    rng_ = high - low
    if np.any(rng_ == 0):
        raise DegenerateError("degenerate bar: high == low")
    out = (close - low) / rng_
    return float(out) if out.ndim == 0 else out


def skewness(returns):
    """Population third moment over the cube of the sample (n-1) volatility."""
    x = np.asarray(returns, dtype=float).ravel()
    T = x.size
    if T < 3:
        raise InsufficientHistoryError("skewness needs at least 3 observations")
    d = x - x.mean()
    sigma = np.sqrt(np.sum(d * d) / (T - 1))
    if sigma == 0:
        raise DegenerateError("skewness undefined for zero volatility")
    return float(np.sum(d**3) / (sigma**3 * T))


@dataclass
class CovCorr:
    """Sample covariance and correlation; ``degenerate`` flags zero-variance assets."""

    cov: np.ndarray
    corr: np.ndarray
    degenerate: np.ndarray


def sample_cov_corr(returns):
    """Sample covariance/correlation of an assets x observations table.

    Rows and columns of zero-variance assets are NaN in ``corr`` and flagged.
    """
    R = np.atleast_2d(np.asarray(returns, dtype=float))
    if R.shape[1] < 2:
        raise InsufficientHistoryError("need at least 2 observations")
    D = R - R.mean(axis=1, keepdims=True)
    cov = D @ D.T / (R.shape[1] - 1)
    cov = 0.5 * (cov + cov.T)
    var = np.diag(cov).copy()
    bad = var <= 0
    sd = np.sqrt(np.where(bad, 1.0, var))
    corr = cov / np.outer(sd, sd)
    corr[bad, :] = np.nan
    corr[:, bad] = np.nan
    good = ~bad
    corr[good, good] = 1.0
    corr = np.clip(corr, -1.0, 1.0, out=corr, where=~np.isnan(corr))
    return CovCorr(cov, corr, bad)


# ---------------------------------------------------------------- HP filter


@dataclass
class HPDecomposition:
    regular: np.ndarray
    irregular: np.ndarray
    lam: float


def hp_filter(series, lam=HP_LAMBDA_MONTHLY):
    """Hodrick-Prescott split of ``series`` into S* and S - S*.

    S* solves (I + lam D'D) S* = S with D the second-difference operator; the
    pentadiagonal system is solved directly by the active kernel backend.
    """
    S = np.asarray(series, dtype=float).ravel()
    if S.size < 3:
        raise InsufficientHistoryError("HP filter needs at least 3 points")
    if lam < 0:
        raise ParameterError("lambda must be >= 0")
    if lam == 0:
        reg = S.copy()
    else:
        reg = np.asarray(kernels.hp_solve(S, float(lam)))
    return HPDecomposition(reg, S - reg, float(lam))


def hp_lambda(periods_per_year):
    """Rule-of-thumb smoothing 100 * n^2 (n = 12 gives 14400)."""
    return 100.0 * periods_per_year**2


def hp_normal_residual(series, regular, lam):
    """Max |(I + lam D'D) S* - S|, used to check the solve."""
    S = np.asarray(series, dtype=float)
    n = S.size
    D = np.diff(np.eye(n), n=2, axis=0)
    A = np.eye(n) + lam * D.T @ D
    return float(np.max(np.abs(A @ regular - S)))


# ------------------------------------------------------- statistical risk


def erank(eigenvalues):
    """Effective rank exp(H) of the positive part of a spectrum."""
    ev = np.asarray(eigenvalues, dtype=float)
    ev = ev[ev > 0]
    if ev.size == 0:
        raise DegenerateError("no positive eigenvalues")
    p = ev / ev.sum()
    return float(np.exp(-np.sum(p * np.log(p))))


@dataclass
class FactorCovModel:
    """Factor model Gamma = diag(sigma) psi diag(sigma), psi = diag(xi^2) + B B'."""

    loadings: np.ndarray  # N x K, columns sqrt(lambda_A) V_A
    specific_var: np.ndarray  # xi_i^2
    asset_vol: np.ndarray  # sigma_i
    factor_count: int

    def correlation(self):
        B = self.loadings
        return np.diag(self.specific_var) + B @ B.T

    def covariance(self):
        s = self.asset_vol
        return self.correlation() * np.outer(s, s)

    def inverse_covariance(self):
        """Woodbury inverse of the model covariance."""
        B = self.loadings
        xi_inv = 1.0 / self.specific_var
        BX = B * xi_inv[:, None]
        core = np.eye(B.shape[1]) + B.T @ BX
        psi_inv = np.diag(xi_inv) - BX @ np.linalg.solve(core, BX.T)
        s_inv = 1.0 / self.asset_vol
        return psi_inv * np.outer(s_inv, s_inv)

    def solve(self, b):
        """Gamma^{-1} b without forming an N x N matrix."""
        b = np.asarray(b, dtype=float)
        s_inv = 1.0 / self.asset_vol
        y = b * (s_inv if b.ndim == 1 else s_inv[:, None])
        B = self.loadings
        xi_inv = 1.0 / self.specific_var
        xy = y * (xi_inv if y.ndim == 1 else xi_inv[:, None])
        core = np.eye(B.shape[1]) + B.T @ (B * xi_inv[:, None])
        corr_ = (B * xi_inv[:, None]) @ np.linalg.solve(core, B.T @ xy)
        z = xy - corr_
        return z * (s_inv if z.ndim == 1 else s_inv[:, None])


def stat_risk_model(returns, K=None):
    """PCA statistical risk model on an assets x observations return table.

    Returns are demeaned per asset, the sample correlation is diagonalized and
    the top K principal components become factors. With ``K=None`` the count
    is the half-up rounded effective rank, limited to [1, N-1].
    """
    R = np.atleast_2d(np.asarray(returns, dtype=float))
    N, T = R.shape
    if T < 2:
        raise InsufficientHistoryError("risk model needs at least 2 observations")
    cc = sample_cov_corr(R)
    if np.any(cc.degenerate):
        bad = np.flatnonzero(cc.degenerate).tolist()
        raise DegenerateError(f"zero-variance assets at rows {bad}")
    sigma = np.sqrt(np.diag(cc.cov))
    evals, evecs = np.linalg.eigh(cc.corr)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    tol = max(N, T) * np.finfo(float).eps * max(evals[0], 1.0)
    rank = int(np.sum(evals > tol))
    if K is None:
        if N == 1:
            K = 0
        else:
            K = int(np.floor(erank(evals) + 0.5))
            K = min(max(K, 1), max(N - 1, 1), rank)
    else:
        K = int(K)
        if K < 0:
            raise ParameterError("factor count must be >= 0")
        if K >= rank and K > 0:
            raise ParameterError(f"factor count {K} must be below correlation rank {rank}")
    B = evecs[:, :K] * np.sqrt(np.maximum(evals[:K], 0.0))
    common = np.sum(B * B, axis=1)
    xi2 = 1.0 - common
    floored = xi2 < SPECIFIC_VAR_FLOOR
    if np.any(floored):
        # keep the unit diagonal exact by shrinking the loadings of floored rows
        scale = np.sqrt((1.0 - SPECIFIC_VAR_FLOOR) / common[floored])
        B[floored] *= scale[:, None]
        xi2[floored] = SPECIFIC_VAR_FLOOR
    return FactorCovModel(B, xi2, sigma, K)

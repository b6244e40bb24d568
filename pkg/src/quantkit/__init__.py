"""Quantitative strategy analytics: option payoffs, cross-sectional signals,
portfolio construction, fixed income, futures/FX, volatility and credit
instruments, ML signals and an intraday backtester.
"""
from . import (
    backtester,
    credit_macro,
    data_panel,
    errors,
    fixed_income,
    futures_fx,
    kernels,
    ml_signals,
    options,
    portfolio_opt,
    ts_stats,
    vol_derivatives,
    xsec_signals,
)
from .errors import (
    AlignmentError,
    ConvergenceError,
    DataError,
    DegenerateError,
    InsufficientHistoryError,
    NoSignalError,
    ParameterError,
    ParseError,
    QuantKitError,
)

__version__ = "0.1.0"

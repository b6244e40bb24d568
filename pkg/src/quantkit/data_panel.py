"""Price/volume panels in the tab-delimited backtest layout.

Every table is tickers x dates with column 0 holding the most recent trading
day. Five files make up a panel directory:

    nrm.ret.txt    overnight close-to-open log returns R(t)
    nrm.open.txt   raw open prices
    nrm.close.txt  raw close prices
    nrm.vol.txt    raw share volume
    nrm.prc.txt    fully adjusted close prices

Line 1 holds the T date labels; each further line holds a ticker followed by
T values.
"""
from __future__ import annotations

import datetime as _dt
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, DataError, InsufficientHistoryError, ParameterError, ParseError

FILES = {
    "ret": "nrm.ret.txt",
    "open": "nrm.open.txt",
    "close": "nrm.close.txt",
    "volume": "nrm.vol.txt",
    "adj_close": "nrm.prc.txt",
}

CONVENTIONS = ("overnight", "close_to_close", "intraday")


def _check_dates(dates):
    if len(set(dates)) != len(dates):
        raise DataError("duplicate date labels")
    try:
        parsed = [_dt.date.fromisoformat(d) for d in dates]
    except (TypeError, ValueError):
        return  # opaque labels: uniqueness is all we can check
    if any(a <= b for a, b in zip(parsed[:-1], parsed[1:])):
        raise DataError("dates must be strictly descending (most recent first)")


@dataclass(frozen=True)
class PricePanel:
    """Aligned open/close/adjusted-close/volume tables, most recent day first."""

    tickers: tuple
    dates: tuple
    open: np.ndarray
    close: np.ndarray
    adj_close: np.ndarray
    volume: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "dates", tuple(self.dates))
        shape = (len(self.tickers), len(self.dates))
        for name in ("open", "close", "adj_close", "volume"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise AlignmentError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if len(set(self.tickers)) != len(self.tickers):
            raise DataError("duplicate tickers")
        _check_dates(self.dates)
        for name in ("open", "close", "adj_close"):
            if np.any(getattr(self, name) <= 0):
                raise DataError(f"{name} prices must be positive")
        if np.any(self.volume < 0):
            raise DataError("volumes must be non-negative")

    @property
    def shape(self):
        return (len(self.tickers), len(self.dates))

    def subset(self, columns):
        """Panel restricted to a slice or index array of date columns."""
        idx = np.arange(len(self.dates))[columns]
        return PricePanel(
            self.tickers,
            [self.dates[j] for j in idx],
            self.open[:, idx],
            self.close[:, idx],
            self.adj_close[:, idx],
            self.volume[:, idx],
        )


@dataclass(frozen=True)
class ReturnPanel:
    """Returns on the panel axes with a convention tag."""

    tickers: tuple
    dates: tuple
    values: np.ndarray
    convention: str = field(default="overnight")

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "dates", tuple(self.dates))
        vals = np.array(self.values, dtype=float)
        if vals.shape != (len(self.tickers), len(self.dates)):
            raise AlignmentError("return table shape does not match its labels")
        if not np.all(np.isfinite(vals)):
            raise DataError("returns must be finite")
        if self.convention not in CONVENTIONS:
            raise ParameterError(f"unknown return convention {self.convention!r}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


# ---------------------------------------------------------------- file I/O


def format_number(x):
    """Shortest round-trip decimal text for a float, without a trailing '.'"""
    return np.format_float_positional(float(x), unique=True, trim="-")


def read_table(path):
    """Read one tab-delimited table. Returns (dates, tickers, values)."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\r\n") for ln in fh]
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise DataError(f"{path}: empty file")
    dates = lines[0].rstrip().split("\t")
    # R writes an empty leading cell when row names are present
    if dates and dates[0] == "":
        dates = dates[1:]
    tickers = []
    rows = []
    for lineno, ln in enumerate(lines[1:], start=2):
        cells = ln.rstrip().split("\t")
        if len(cells) != len(dates) + 1:
            raise DataError(
                f"{path}: line {lineno} has {len(cells) - 1} values, expected {len(dates)}"
            )
        tickers.append(cells[0])
        row = []
        for col, tok in enumerate(cells[1:], start=2):
            try:
                v = float(tok)
            except ValueError:
                raise ParseError(path, lineno, col, tok) from None
            if not np.isfinite(v):
                raise ParseError(path, lineno, col, tok)
            row.append(v)
        rows.append(row)
    values = np.array(rows, dtype=float).reshape(len(tickers), len(dates))
    return dates, tickers, values


def write_table(path, dates, tickers, values):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(dates) + "\n")
        for t, row in zip(tickers, np.asarray(values)):
            fh.write(t + "\t" + "\t".join(format_number(v) for v in row) + "\n")


def load_panel(directory):
    """Load the five panel files and verify their alignment.

    Returns
    -------
    (PricePanel, ReturnPanel)
        The ReturnPanel is nrm.ret.txt exactly as stored; its first column
        depends on day-0 prices that are not part of the other tables.
    """
    tables = {}
    for key, fname in FILES.items():
        path = os.path.join(directory, fname)
        if not os.path.exists(path):
            raise FileNotFoundError(f"missing panel file {path}")
        tables[key] = (fname,) + read_table(path)
    ref_name, ref_dates, ref_tickers, _ = tables["close"]
    for key, (fname, dates, tickers, _) in tables.items():
        if tickers != ref_tickers:
            raise AlignmentError(f"{fname}: tickers differ from {ref_name}")
        if dates != ref_dates:
            raise AlignmentError(f"{fname}: dates differ from {ref_name}")
    panel = PricePanel(
        ref_tickers,
        ref_dates,
        tables["open"][3],
        tables["close"][3],
        tables["adj_close"][3],
        tables["volume"][3],
    )
    ret = ReturnPanel(ref_tickers, ref_dates, tables["ret"][3], "overnight")
    return panel, ret


def write_panel(panel, ret, directory):
    """Write a panel directory in the canonical number format."""
    os.makedirs(directory, exist_ok=True)
    arrays = {
        "ret": ret.values,
        "open": panel.open,
        "close": panel.close,
        "volume": panel.volume,
        "adj_close": panel.adj_close,
    }
    for key, fname in FILES.items():
        write_table(os.path.join(directory, fname), panel.dates, panel.tickers, arrays[key])


# ------------------------------------------------------------ derived data


def adjusted_open(panel):
    """P^AO(t) = (P^AC(t) / P^C(t)) * P^O(t)."""
    return panel.adj_close / panel.close * panel.open


def overnight_returns(panel):
    """Close-to-adjusted-open log returns R(t) = ln(P^AO(t-1) / P^AC(t)).

    Column j of the output belongs to date ``panel.dates[j + 1]``; the most
    recent date is dropped because its return needs prices from outside the
    panel.
    """
    if panel.shape[1] < 2:
        raise InsufficientHistoryError("overnight returns need at least 2 date columns")
    ao = adjusted_open(panel)
    vals = np.log(ao[:, :-1] / panel.adj_close[:, 1:])
    return ReturnPanel(panel.tickers, panel.dates[1:], vals, "overnight")


def check_ret_consistency(panel, ret):
    """Largest |stored - recomputed| over return columns 2..T (advisory only)."""
    recomputed = overnight_returns(panel).values
    return float(np.max(np.abs(ret.values[:, 1:] - recomputed))) if recomputed.size else 0.0


def close_to_close_returns(panel):
    """ln(P^AC(t) / P^AC(t+1)) on columns 0..T-2."""
    if panel.shape[1] < 2:
        raise InsufficientHistoryError("need at least 2 date columns")
    vals = np.log(panel.adj_close[:, :-1] / panel.adj_close[:, 1:])
    return ReturnPanel(panel.tickers, panel.dates[:-1], vals, "close_to_close")


def rolling_mean(x, window, count=None):
    """Trailing means: column i is the mean of columns i..i+window-1."""
    x = np.asarray(x, dtype=float)
    n_cols = x.shape[1]
    if window < 1:
        raise ParameterError("window must be >= 1")
    avail = n_cols - window + 1
    if count is None:
        count = avail
    if avail < count or count < 1:
        raise InsufficientHistoryError(
            f"window {window} over {n_cols} columns cannot give {count} values"
        )
    win = np.lib.stride_tricks.sliding_window_view(x, window, axis=1)[:, :count, :]
    return win.mean(axis=2)


def rolling_sd(x, window, count=None):
    """Trailing sample (n-1) standard deviations, same layout as rolling_mean."""
    x = np.asarray(x, dtype=float)
    if window < 2:
        raise InsufficientHistoryError("a standard deviation needs window >= 2")
    n_cols = x.shape[1]
    avail = n_cols - window + 1
    if count is None:
        count = avail
    if avail < count or count < 1:
        raise InsufficientHistoryError(
            f"window {window} over {n_cols} columns cannot give {count} values"
        )
    win = np.lib.stride_tricks.sliding_window_view(x, window, axis=1)[:, :count, :]
    return win.std(axis=2, ddof=1)


def addv(panel, window, count=None):
    """Average daily dollar volume: trailing mean of volume * close."""
    if window < 1:
        raise ParameterError("window must be >= 1")
    if window > panel.shape[1]:
        raise InsufficientHistoryError("ADDV window exceeds available history")
    return rolling_mean(panel.volume * panel.close, window, count)


# ----------------------------------------------------------- synthesizer


@dataclass
class SynthSpec:
    """Parameters of the synthetic geometric walk.

    drift and vol are per-day log-return moments; overnight_vol is the share of
    variance realised between close and the next open. ``splits`` holds
    (ticker_index, date_index, ratio) tuples: from that date onward raw prices
    are divided by ratio.
    """

    drift: float = 0.0
    vol: float = 0.02
    overnight_frac: float = 0.3
    start_price: float = 50.0
    base_volume: float = 1.0e6
    volume_dispersion: float = 0.3
    splits: tuple = ()


def synthesize_panel(seed, tickers, days, spec=None):
    """Deterministic synthetic panel plus its overnight return table.

    The generator is numpy's PCG64 seeded with ``seed``; one extra day (day 0)
    is simulated so the first stored return column is well defined.
    """
    if tickers < 1 or days < 1:
        raise ParameterError("counts must be >= 1")
    spec = spec or SynthSpec()
    if spec.vol < 0:
        raise ParameterError("vol must be >= 0")
    rng = np.random.Generator(np.random.PCG64(seed))
    n, t = tickers, days + 1  # column 0 is day 0 (outside the panel)
    on_sd = spec.vol * np.sqrt(spec.overnight_frac)
    id_sd = spec.vol * np.sqrt(1.0 - spec.overnight_frac)
    level0 = spec.start_price * np.exp(rng.normal(0.0, 0.25, size=n))
    # simulate oldest to newest then flip so column 0 is newest
    close = np.empty((n, t))
    opn = np.empty((n, t))
    prev = level0
    on = rng.normal(0.5 * spec.drift, 1.0, size=(n, t)) * on_sd
    intra = rng.normal(0.5 * spec.drift, 1.0, size=(n, t)) * id_sd
    if spec.vol == 0:
        on = np.full((n, t), 0.5 * spec.drift)
        intra = np.full((n, t), 0.5 * spec.drift)
    for k in range(t - 1, -1, -1):
        opn[:, k] = prev * np.exp(on[:, k])
        close[:, k] = opn[:, k] * np.exp(intra[:, k])
        prev = close[:, k]
    volume = np.round(
        spec.base_volume * np.exp(rng.normal(0.0, spec.volume_dispersion, size=(n, t)))
        * np.exp(rng.normal(0.0, 0.5, size=(n, 1)))
    )
    # economic prices -> raw prices and adjustment factors
    raw_factor = np.ones((n, t))
    for ti, di, ratio in spec.splits:
        if ratio <= 0:
            raise ParameterError("split ratio must be positive")
        raw_factor[ti, : di + 2] /= ratio  # date index di is column di+1 here
    raw_open = opn * raw_factor
    raw_close = close * raw_factor
    adj_close = close * raw_factor[:, :1]  # adjusted to the newest basis
    raw_volume = volume / raw_factor
    ao = adj_close / raw_close * raw_open
    ret = np.log(ao[:, :-1] / adj_close[:, 1:])
    base = np.datetime64("2024-12-31")
    dates = [str(d) for d in np.busday_offset(base, -np.arange(1, days + 1), roll="backward")]
    names = [f"T{i:04d}" for i in range(n)]
    panel = PricePanel(
        names, dates, raw_open[:, 1:], raw_close[:, 1:], adj_close[:, 1:], np.round(raw_volume[:, 1:])
    )
    return panel, ReturnPanel(names, dates, ret, "overnight")

"""Expiry payoffs of option strategies built from signed legs.

Sign conventions:
    * quantity > 0 is long, < 0 is short;
    * net premium H > 0 is a debit (D = H), H < 0 a credit (C = -H);
    * payoff f(S_T) = sum_legs quantity * kernel(S_T) - H.

Every named structure in :data:`CATALOG` carries a constructor, the strike and
regime preconditions, its closed-form breakevens / max profit / max loss and a
sampler that draws valid random parameters for property tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .errors import ParameterError

KINDS = {"call": kernels.CALL, "put": kernels.PUT, "stock": kernels.STOCK, "cash": kernels.CASH}
UNBOUNDED = math.inf


@dataclass(frozen=True)
class Leg:
    """One position. ``strike`` is used by options, ``entry`` (S0) by stock."""

    kind: str
    quantity: float
    strike: float | None = None
    entry: float | None = None
    premium: float = 0.0
    expiry: str = "near"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown leg kind {self.kind!r}")
        if self.quantity == 0:
            raise ParameterError("leg quantity must be non-zero")
        if self.kind in ("call", "put"):
            if self.strike is None or not self.strike > 0:
                raise ParameterError("option strike must be > 0")
        if self.kind == "stock" and (self.entry is None or not self.entry > 0):
            raise ParameterError("stock leg needs an entry price > 0")
        if self.expiry not in ("near", "far"):
            raise ParameterError("expiry must be 'near' or 'far'")


@dataclass(frozen=True)
class StrategyPosition:
    """A set of legs plus the net premium paid (debit > 0)."""

    legs: tuple
    net_premium: float | None = None
    name: str = ""
    value_v: float | None = None  # unexpired far-leg value (calendar/diagonal)

    def __post_init__(self):
        object.__setattr__(self, "legs", tuple(self.legs))
        if not self.legs:
            raise ParameterError("a position needs at least one leg")

    @property
    def H(self):
        """Net premium: explicit value, else sum of quantity * premium over options."""
        if self.net_premium is not None:
            return float(self.net_premium)
        return float(sum(l.quantity * l.premium for l in self.legs if l.kind in ("call", "put")))

    @property
    def strikes(self):
        return sorted({float(l.strike) for l in self.legs if l.kind in ("call", "put")})

    @property
    def has_far_legs(self):
        return any(l.expiry == "far" for l in self.legs)

    def arrays(self):
        kinds = np.array([KINDS[l.kind] for l in self.legs], dtype=np.int64)
        qty = np.array([l.quantity for l in self.legs], dtype=float)
        k = np.array([l.strike if l.strike is not None else 0.0 for l in self.legs], dtype=float)
        s0 = np.array([l.entry if l.entry is not None else 0.0 for l in self.legs], dtype=float)
        return kinds, qty, k, s0


def payoff_at_expiry(pos, S_T):
    """Expiry P&L sum q * kernel(S_T) - H for a scalar or array of prices."""
    if pos.has_far_legs:
        raise ParameterError("payoff depends on the unexpired far-dated option value")
    s = np.asarray(S_T, dtype=float)
    if np.any(s < 0):
        raise ParameterError("S_T must be >= 0")
    kinds, qty, k, s0 = pos.arrays()
    out = np.asarray(kernels.payoff_grid(kinds, qty, k, s0, np.atleast_1d(s).ravel())) - pos.H
    out = out.reshape(s.shape)
    return float(out) if out.ndim == 0 else out


def payoff_slopes(pos):
    """(slope just above 0, slope beyond the largest strike)."""
    left = right = 0.0
    for l in pos.legs:
        if l.kind == "stock":
            left += l.quantity
            right += l.quantity
        elif l.kind == "call":
            right += l.quantity
        elif l.kind == "put":
            left -= l.quantity
    return left, right


@dataclass(frozen=True)
class PayoffProfile:
    """Breakevens, extremes and tail slopes of an expiry payoff.

    ``max_loss`` is reported as a positive magnitude (``-min f``);
    ``math.inf`` marks an unbounded side.
    """

    breakevens: tuple
    max_profit: float
    max_loss: float
    slope_left: float
    slope_right: float
    price_cap: float
    conditional: str | None = None

    def to_dict(self):
        def enc(x):
            return "unbounded" if math.isinf(x) else x

        return {
            "breakevens": list(self.breakevens),
            "max_profit": enc(self.max_profit),
            "max_loss": enc(self.max_loss),
            "slope_left": self.slope_left,
            "slope_right": self.slope_right,
            "price_cap": self.price_cap,
            "conditional": self.conditional,
        }


def default_price_cap(pos):
    ks = pos.strikes
    ref = ks if ks else [l.entry for l in pos.legs if l.entry is not None] or [1.0]
    return 4.0 * max(ref)


def profile(pos, price_cap=None):
    """Exact breakevens and extremes of a piecewise-linear expiry payoff.

    The payoff is evaluated at 0 and at every strike; roots are solved on
    each linear piece and on the tail beyond the last strike, whose slope also
    decides whether profit or loss is unbounded. Segments that are identically
    zero contribute their two endpoints.
    """
    if price_cap is None:
        price_cap = default_price_cap(pos)
    ks = pos.strikes
    if ks and price_cap <= ks[-1]:
        raise ParameterError("price cap must exceed every strike")
    if pos.has_far_legs:
        if pos.value_v is None:
            raise ParameterError("calendar/diagonal profile needs the far-leg value V")
        D = pos.H
        return PayoffProfile((), pos.value_v - D, D, 0.0, 0.0, float(price_cap), "conditional on V")
    nodes = np.array([0.0] + [k for k in ks if k > 0.0])
    vals = np.atleast_1d(payoff_at_expiry(pos, nodes))
    left, right = payoff_slopes(pos)
    roots = []

    def add(x):
        if not roots or roots[-1] != x:
            roots.append(float(x))

    for j in range(len(nodes) - 1):
        a, b = nodes[j], nodes[j + 1]
        fa, fb = vals[j], vals[j + 1]
        if fa == 0.0:
            add(a)
        if fa == 0.0 and fb == 0.0:
            add(b)
        elif fa * fb < 0.0:
            add(a - fa * (b - a) / (fb - fa))
    last, fl = nodes[-1], vals[-1]
    if fl == 0.0:
        add(last)
    elif right != 0.0 and fl * right < 0.0:
        add(last - fl / right)
    pmax = UNBOUNDED if right > 0 else float(np.max(vals))
    lmax = UNBOUNDED if right < 0 else float(-np.min(vals))
    return PayoffProfile(tuple(roots), pmax, lmax, left, right, float(price_cap))


def dispersion_units(shares_outstanding, prices, index_level):
    """Units n_i = S_i P_I / sum_j S_j P_j so that sum n_i P_i = P_I."""
    s = np.asarray(shares_outstanding, dtype=float)
    p = np.asarray(prices, dtype=float)
    if s.shape != p.shape:
        raise ParameterError("shares and prices must align")
    if np.any(s <= 0) or np.any(p <= 0) or index_level <= 0:
        raise ParameterError("inputs must be positive")
    return s * index_level / np.dot(s, p)


# ================================================================== catalog


@dataclass(frozen=True)
class ClosedForm:
    breakevens: tuple
    max_profit: float
    max_loss: float


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    nstrikes: int
    uses_entry: bool
    build: Callable
    rules: tuple  # (message, predicate) pairs enforced by the constructor
    closed_form: Callable | None
    sampler: Callable
    regime: Callable = field(default=lambda **_: True)
    uses_ratio: bool = False


def _c(q, k, prem=0.0, expiry="near"):
    return Leg("call", q, strike=k, premium=prem, expiry=expiry)


def _p(q, k, prem=0.0, expiry="near"):
    return Leg("put", q, strike=k, premium=prem, expiry=expiry)


def _s(q, s0):
    return Leg("stock", q, entry=s0)


def _asc(K):
    return all(a < b for a, b in zip(K[:-1], K[1:]))


def _desc(K):
    return all(a > b for a, b in zip(K[:-1], K[1:]))


def _equi(K):
    d = [b - a for a, b in zip(K[:-1], K[1:])]
    return all(abs(x - d[0]) <= 1e-12 * max(1.0, abs(d[0])) for x in d)


def _kappa(K):
    return abs(K[1] - K[0])


def _sorted_cf(bes, pmax, lmax):
    return ClosedForm(tuple(sorted(bes)), pmax, lmax)


def _signed_be(H, pos_be, neg_be, zero_interval):
    if H > 0:
        return [pos_be]
    if H < 0:
        return [neg_be]
    return list(zero_interval)


U = UNBOUNDED
CATALOG: dict = {}


def _register(name, nstrikes, legs, rules, cf, sampler, regime=lambda **_: True, entry=False, ratio=False):
    CATALOG[name] = CatalogEntry(name, nstrikes, entry, legs, tuple(rules), cf, sampler, regime, ratio)


# ---- samplers


def _rk(rng, n, order="asc", equi=False, lo=40, hi=160):
    if equi:
        kappa = int(rng.integers(2, 16))
        k0 = int(rng.integers(lo, hi - kappa * (n - 1)))
        K = [k0 + kappa * j for j in range(n)]
    else:
        K = sorted(int(x) for x in rng.choice(np.arange(lo, hi), size=n, replace=False))
    if order == "desc":
        K = K[::-1]
    return tuple(float(k) for k in K)


def _u(rng, a, b):
    return float(rng.uniform(a, b))


# ---- single stock + option

_register(
    "covered_call", 1,
    lambda K, S0, H, **_: [_s(1, S0), _c(-1, K[0])],
    [],
    lambda K, S0, H, **_: _sorted_cf([S0 + H], K[0] - S0 - H, S0 + H),
    lambda r: dict(K=_rk(r, 1), S0=float(r.integers(60, 140)), H=-_u(r, 0.5, 12)),
    regime=lambda K, S0, H, **_: H < 0 and S0 + H > 0 and K[0] > S0 + H,
    entry=True,
)
_register(
    "covered_put", 1,
    lambda K, S0, H, **_: [_s(-1, S0), _p(-1, K[0])],
    [],
    lambda K, S0, H, **_: _sorted_cf([S0 - H], S0 - K[0] - H, U),
    lambda r: dict(K=_rk(r, 1), S0=float(r.integers(60, 140)), H=-_u(r, 0.5, 12)),
    regime=lambda K, S0, H, **_: H < 0 and K[0] < S0 - H,
    entry=True,
)
_register(
    "protective_put", 1,
    lambda K, S0, H, **_: [_s(1, S0), _p(1, K[0])],
    [("protective put needs K <= S0", lambda K, S0, **_: K[0] <= S0)],
    lambda K, S0, H, **_: _sorted_cf([S0 + H], U, S0 - K[0] + H),
    lambda r: dict(K=_rk(r, 1), S0=float(r.integers(60, 140)), H=_u(r, 0.5, 12)),
    regime=lambda K, S0, H, **_: H > 0,
    entry=True,
)
_register(
    "protective_call", 1,
    lambda K, S0, H, **_: [_s(-1, S0), _c(1, K[0])],
    [("protective call needs K >= S0", lambda K, S0, **_: K[0] >= S0)],
    lambda K, S0, H, **_: _sorted_cf([S0 - H], S0 - H, K[0] - S0 + H),
    lambda r: dict(K=_rk(r, 1), S0=float(r.integers(60, 140)), H=_u(r, 0.5, 12)),
    regime=lambda K, S0, H, **_: 0 < H < S0,
    entry=True,
)

# ---- verticals

_register(
    "bull_call_spread", 2,
    lambda K, H, **_: [_c(1, K[0]), _c(-1, K[1])],
    [("bull call spread needs K1 < K2", lambda K, **_: K[0] < K[1])],
    lambda K, H, **_: _sorted_cf([K[0] + H], K[1] - K[0] - H, H),
    lambda r: dict(K=_rk(r, 2), H=_u(r, 0.1, 40)),
    regime=lambda K, H, **_: 0 < H < K[1] - K[0],
)
_register(
    "bull_put_spread", 2,
    lambda K, H, **_: [_p(1, K[0]), _p(-1, K[1])],
    [("bull put spread needs K1 < K2", lambda K, **_: K[0] < K[1])],
    lambda K, H, **_: _sorted_cf([K[1] + H], -H, K[1] - K[0] + H),
    lambda r: dict(K=_rk(r, 2), H=-_u(r, 0.1, 40)),
    regime=lambda K, H, **_: 0 < -H < K[1] - K[0],
)
_register(
    "bear_call_spread", 2,
    lambda K, H, **_: [_c(1, K[0]), _c(-1, K[1])],
    [("bear call spread needs K2 < K1", lambda K, **_: K[1] < K[0])],
    lambda K, H, **_: _sorted_cf([K[1] - H], -H, K[0] - K[1] + H),
    lambda r: dict(K=_rk(r, 2, "desc"), H=-_u(r, 0.1, 40)),
    regime=lambda K, H, **_: 0 < -H < K[0] - K[1],
)
_register(
    "bear_put_spread", 2,
    lambda K, H, **_: [_p(1, K[0]), _p(-1, K[1])],
    [("bear put spread needs K2 < K1", lambda K, **_: K[1] < K[0])],
    lambda K, H, **_: _sorted_cf([K[0] - H], K[0] - K[1] - H, H),
    lambda r: dict(K=_rk(r, 2, "desc"), H=_u(r, 0.1, 40)),
    regime=lambda K, H, **_: 0 < H < K[0] - K[1],
)

# ---- synthetics and combos

_register(
    "long_synthetic_forward", 1,
    lambda K, H, **_: [_c(1, K[0]), _p(-1, K[0])],
    [],
    lambda K, H, **_: _sorted_cf([K[0] + H], U, K[0] + H),
    lambda r: dict(K=_rk(r, 1), H=_u(r, -15, 15)),
    regime=lambda K, H, **_: K[0] + H > 0,
)
_register(
    "short_synthetic_forward", 1,
    lambda K, H, **_: [_p(1, K[0]), _c(-1, K[0])],
    [],
    lambda K, H, **_: _sorted_cf([K[0] - H], K[0] - H, U),
    lambda r: dict(K=_rk(r, 1), H=_u(r, -15, 15)),
    regime=lambda K, H, **_: K[0] - H > 0,
)
_register(
    "long_combo", 2,
    lambda K, H, **_: [_c(1, K[0]), _p(-1, K[1])],
    [("long combo needs K1 > K2", lambda K, **_: K[0] > K[1])],
    lambda K, H, **_: _sorted_cf(_signed_be(H, K[0] + H, K[1] + H, (K[1], K[0])), U, K[1] + H),
    lambda r: dict(K=_rk(r, 2, "desc"), H=_u(r, -15, 15)),
    regime=lambda K, H, **_: K[1] + H > 0,
)
_register(
    "short_combo", 2,
    lambda K, H, **_: [_p(1, K[0]), _c(-1, K[1])],
    [("short combo needs K2 > K1", lambda K, **_: K[1] > K[0])],
    lambda K, H, **_: _sorted_cf(_signed_be(H, K[0] - H, K[1] - H, (K[0], K[1])), K[0] - H, U),
    lambda r: dict(K=_rk(r, 2), H=_u(r, -15, 15)),
    regime=lambda K, H, **_: K[0] - H > 0,
)

# ---- ladders


def _bull_call_ladder_cf(K, H, **_):
    bes = [K[2] + K[1] - K[0] - H]
    if H > 0:
        bes.append(K[0] + H)
    return _sorted_cf(bes, K[1] - K[0] - H, U)


def _bull_put_ladder_cf(K, H, **_):
    bes = [K[2] + K[1] - K[0] - H]
    if H < 0:
        bes.append(K[0] + H)
    return _sorted_cf(bes, K[2] + K[1] - K[0] - H, K[0] - K[1] + H)


def _bear_call_ladder_cf(K, H, **_):
    bes = [K[2] + K[1] - K[0] + H]
    if H < 0:
        bes.append(K[0] - H)
    return _sorted_cf(bes, U, K[1] - K[0] + H)


def _bear_put_ladder_cf(K, H, **_):
    bes = [K[2] + K[1] - K[0] + H]
    if H > 0:
        bes.append(K[0] - H)
    return _sorted_cf(bes, K[0] - K[1] - H, K[2] + K[1] - K[0] + H)


_register(
    "bull_call_ladder", 3,
    lambda K, H, **_: [_c(1, K[0]), _c(-1, K[1]), _c(-1, K[2])],
    [("bull call ladder needs K1 < K2 < K3", lambda K, **_: _asc(K))],
    _bull_call_ladder_cf,
    lambda r: dict(K=_rk(r, 3), H=_u(r, -15, 30)),
    regime=lambda K, H, **_: H < K[1] - K[0] and H != 0,
)
_register(
    "bull_put_ladder", 3,
    lambda K, H, **_: [_p(-1, K[0]), _p(1, K[1]), _p(1, K[2])],
    [("bull put ladder needs K3 < K2 < K1", lambda K, **_: _desc(K))],
    _bull_put_ladder_cf,
    lambda r: dict(K=_rk(r, 3, "desc"), H=_u(r, -40, 60)),
    regime=lambda K, H, **_: K[1] - K[0] < H < K[2] + K[1] - K[0] and H != 0 and K[2] + K[1] >= K[0],
)
_register(
    "bear_call_ladder", 3,
    lambda K, H, **_: [_c(-1, K[0]), _c(1, K[1]), _c(1, K[2])],
    [("bear call ladder needs K1 < K2 < K3", lambda K, **_: _asc(K))],
    _bear_call_ladder_cf,
    lambda r: dict(K=_rk(r, 3), H=_u(r, -30, 15)),
    regime=lambda K, H, **_: H > K[0] - K[1] and H != 0,
)
_register(
    "bear_put_ladder", 3,
    lambda K, H, **_: [_p(1, K[0]), _p(-1, K[1]), _p(-1, K[2])],
    [("bear put ladder needs K3 < K2 < K1", lambda K, **_: _desc(K))],
    _bear_put_ladder_cf,
    lambda r: dict(K=_rk(r, 3, "desc"), H=_u(r, -60, 40)),
    regime=lambda K, H, **_: K[0] - K[1] - K[2] < H < K[0] - K[1] and H != 0 and K[2] + K[1] >= K[0],
)

# ---- calendar and diagonal spreads (profile conditional on the far-leg value V)

_register(
    "calendar_call_spread", 1,
    lambda K, H, **_: [_c(-1, K[0]), _c(1, K[0], expiry="far")],
    [],
    None,
    lambda r: dict(K=_rk(r, 1), H=_u(r, 0.5, 5), V=_u(r, 2, 10)),
)
_register(
    "calendar_put_spread", 1,
    lambda K, H, **_: [_p(-1, K[0]), _p(1, K[0], expiry="far")],
    [],
    None,
    lambda r: dict(K=_rk(r, 1), H=_u(r, 0.5, 5), V=_u(r, 2, 10)),
)
_register(
    "diagonal_call_spread", 2,
    lambda K, H, **_: [_c(1, K[0], expiry="far"), _c(-1, K[1])],
    [("diagonal call spread needs K1 < K2", lambda K, **_: K[0] < K[1])],
    None,
    lambda r: dict(K=_rk(r, 2), H=_u(r, 0.5, 5), V=_u(r, 2, 30)),
)
_register(
    "diagonal_put_spread", 2,
    lambda K, H, **_: [_p(1, K[0], expiry="far"), _p(-1, K[1])],
    [("diagonal put spread needs K1 > K2", lambda K, **_: K[0] > K[1])],
    None,
    lambda r: dict(K=_rk(r, 2, "desc"), H=_u(r, 0.5, 5), V=_u(r, 2, 30)),
)

# ---- straddles, strangles, guts

_register(
    "long_straddle", 1,
    lambda K, H, **_: [_c(1, K[0]), _p(1, K[0])],
    [],
    lambda K, H, **_: _sorted_cf([K[0] - H, K[0] + H], U, H),
    lambda r: dict(K=_rk(r, 1), H=_u(r, 0.5, 20)),
    regime=lambda K, H, **_: 0 < H < K[0],
)
_register(
    "long_strangle", 2,
    lambda K, H, **_: [_c(1, K[0]), _p(1, K[1])],
    [("long strangle needs K1 > K2", lambda K, **_: K[0] > K[1])],
    lambda K, H, **_: _sorted_cf([K[1] - H, K[0] + H], U, H),
    lambda r: dict(K=_rk(r, 2, "desc"), H=_u(r, 0.5, 20)),
    regime=lambda K, H, **_: 0 < H < K[1],
)
_register(
    "long_guts", 2,
    lambda K, H, **_: [_c(1, K[0]), _p(1, K[1])],
    [
        ("long guts needs K1 < K2", lambda K, **_: K[0] < K[1]),
        ("long guts needs D > K2 - K1", lambda K, H, **_: H > K[1] - K[0]),
    ],
    lambda K, H, **_: _sorted_cf([K[1] - H, K[0] + H], U, H - (K[1] - K[0])),
    lambda r: dict(K=_rk(r, 2), H=_u(r, 0.5, 60)),
    regime=lambda K, H, **_: H < K[1],
)
_register(
    "short_straddle", 1,
    lambda K, H, **_: [_c(-1, K[0]), _p(-1, K[0])],
    [],
    lambda K, H, **_: _sorted_cf([K[0] + H, K[0] - H], -H, U),
    lambda r: dict(K=_rk(r, 1), H=-_u(r, 0.5, 20)),
    regime=lambda K, H, **_: 0 < -H < K[0],
)
_register(
    "short_strangle", 2,
    lambda K, H, **_: [_c(-1, K[0]), _p(-1, K[1])],
    [("short strangle needs K1 > K2", lambda K, **_: K[0] > K[1])],
    lambda K, H, **_: _sorted_cf([K[0] - H, K[1] + H], -H, U),
    lambda r: dict(K=_rk(r, 2, "desc"), H=-_u(r, 0.5, 20)),
    regime=lambda K, H, **_: 0 < -H < K[1],
)
_register(
    "short_guts", 2,
    lambda K, H, **_: [_c(-1, K[0]), _p(-1, K[1])],
    [
        ("short guts needs K1 < K2", lambda K, **_: K[0] < K[1]),
        ("short guts needs C > K2 - K1", lambda K, H, **_: -H > K[1] - K[0]),
    ],
    lambda K, H, **_: _sorted_cf([K[0] - H, K[1] + H], -H - (K[1] - K[0]), U),
    lambda r: dict(K=_rk(r, 2), H=-_u(r, 0.5, 60)),
    regime=lambda K, H, **_: -H < K[1],
)

# ---- synthetic straddles and covered structures

_register(
    "long_call_synthetic_straddle", 1,
    lambda K, S0, H, **_: [_s(-1, S0), _c(2, K[0])],
    [
        ("long call synthetic straddle needs S0 >= K", lambda K, S0, **_: S0 >= K[0]),
        ("long call synthetic straddle needs D > S0 - K", lambda K, S0, H, **_: H > S0 - K[0]),
    ],
    lambda K, S0, H, **_: _sorted_cf([S0 - H, 2 * K[0] - S0 + H], U, H - (S0 - K[0])),
    lambda r: dict(K=_rk(r, 1, lo=60, hi=140), S0=float(r.integers(60, 160)), H=_u(r, 0.5, 40)),
    regime=lambda K, S0, H, **_: H < S0,
    entry=True,
)
_register(
    "long_put_synthetic_straddle", 1,
    lambda K, S0, H, **_: [_s(1, S0), _p(2, K[0])],
    [
        ("long put synthetic straddle needs S0 <= K", lambda K, S0, **_: S0 <= K[0]),
        ("long put synthetic straddle needs D > K - S0", lambda K, S0, H, **_: H > K[0] - S0),
    ],
    lambda K, S0, H, **_: _sorted_cf([S0 + H, 2 * K[0] - S0 - H], U, H - (K[0] - S0)),
    lambda r: dict(K=_rk(r, 1, lo=60, hi=140), S0=float(r.integers(40, 140)), H=_u(r, 0.5, 40)),
    regime=lambda K, S0, H, **_: 2 * K[0] - S0 - H > 0,
    entry=True,
)
_register(
    "short_call_synthetic_straddle", 1,
    lambda K, S0, H, **_: [_s(1, S0), _c(-2, K[0])],
    [("short call synthetic straddle needs S0 <= K", lambda K, S0, **_: S0 <= K[0])],
    lambda K, S0, H, **_: _sorted_cf([S0 + H, 2 * K[0] - S0 - H], K[0] - S0 - H, U),
    lambda r: dict(K=_rk(r, 1, lo=60, hi=140), S0=float(r.integers(40, 140)), H=-_u(r, 0.5, 30)),
    regime=lambda K, S0, H, **_: 0 < -H < S0,
    entry=True,
)
_register(
    "short_put_synthetic_straddle", 1,
    lambda K, S0, H, **_: [_s(-1, S0), _p(-2, K[0])],
    [("short put synthetic straddle needs S0 >= K", lambda K, S0, **_: S0 >= K[0])],
    lambda K, S0, H, **_: _sorted_cf([S0 - H, 2 * K[0] - S0 + H], S0 - K[0] - H, U),
    lambda r: dict(K=_rk(r, 1, lo=60, hi=140), S0=float(r.integers(60, 160)), H=-_u(r, 0.5, 30)),
    regime=lambda K, S0, H, **_: H < 0 and 2 * K[0] - S0 + H > 0,
    entry=True,
)
_register(
    "covered_short_straddle", 1,
    lambda K, S0, H, **_: [_s(1, S0), _c(-1, K[0]), _p(-1, K[0])],
    [],
    lambda K, S0, H, **_: _sorted_cf([(S0 + K[0] + H) / 2], K[0] - S0 - H, S0 + K[0] + H),
    lambda r: dict(K=_rk(r, 1), S0=float(r.integers(60, 140)), H=-_u(r, 0.5, 20)),
    regime=lambda K, S0, H, **_: H < 0 and S0 + H < K[0] and S0 + K[0] + H > 0,
    entry=True,
)


def _covered_short_strangle_cf(K, S0, H, **_):
    # K[0] is the short call strike, K[1] the lower short put strike
    be = S0 + H if S0 + H >= K[1] else (S0 + K[1] + H) / 2
    return _sorted_cf([be], K[0] - S0 - H, S0 + K[1] + H)


_register(
    "covered_short_strangle", 2,
    lambda K, S0, H, **_: [_s(1, S0), _c(-1, K[0]), _p(-1, K[1])],
    [("covered short strangle needs put strike below call strike", lambda K, **_: K[1] < K[0])],
    _covered_short_strangle_cf,
    lambda r: dict(K=_rk(r, 2, "desc"), S0=float(r.integers(60, 140)), H=-_u(r, 0.5, 20)),
    regime=lambda K, S0, H, **_: H < 0 and S0 + H < K[0] and S0 + K[1] + H > 0,
    entry=True,
)
_register(
    "strap", 1,
    lambda K, H, **_: [_c(2, K[0]), _p(1, K[0])],
    [],
    lambda K, H, **_: _sorted_cf([K[0] - H, K[0] + H / 2], U, H),
    lambda r: dict(K=_rk(r, 1), H=_u(r, 0.5, 20)),
    regime=lambda K, H, **_: 0 < H < K[0],
)
_register(
    "strip", 1,
    lambda K, H, **_: [_c(1, K[0]), _p(2, K[0])],
    [],
    lambda K, H, **_: _sorted_cf([K[0] - H / 2, K[0] + H], U, H),
    lambda r: dict(K=_rk(r, 1), H=_u(r, 0.5, 20)),
    regime=lambda K, H, **_: 0 < H < 2 * K[0],
)

# ---- ratio spreads (NC short contracts at K1, NL long contracts at K2)


def _ratio_sample(order, long_more):
    def gen(r):
        a = int(r.integers(1, 4))
        b = a + int(r.integers(1, 3))
        NC, NL = (a, b) if long_more else (b, a)
        return dict(K=_rk(r, 2, order), H=_u(r, -40, 40), NC=float(NC), NL=float(NL))

    return gen


def _call_backspread_cf(K, H, NC, NL, **_):
    bes = [(NL * K[1] - NC * K[0] + H) / (NL - NC)]
    if H < 0:
        bes.append(K[0] - H / NC)
    return _sorted_cf(bes, U, NC * (K[1] - K[0]) + H)


def _put_backspread_cf(K, H, NC, NL, **_):
    bes = [(NL * K[1] - NC * K[0] - H) / (NL - NC)]
    if H < 0:
        bes.append(K[0] + H / NC)
    return _sorted_cf(bes, NL * K[1] - NC * K[0] - H, NC * (K[0] - K[1]) + H)


def _ratio_call_cf(K, H, NC, NL, **_):
    bes = [(NC * K[0] - NL * K[1] - H) / (NC - NL)]
    if H > 0:
        bes.append(K[1] + H / NL)
    return _sorted_cf(bes, NL * (K[0] - K[1]) - H, U)


def _ratio_put_cf(K, H, NC, NL, **_):
    bes = [(NC * K[0] - NL * K[1] + H) / (NC - NL)]
    if H > 0:
        bes.append(K[1] - H / NL)
    return _sorted_cf(bes, NL * (K[1] - K[0]) - H, NC * K[0] - NL * K[1] + H)


_register(
    "call_ratio_backspread", 2,
    lambda K, H, NC, NL, **_: [_c(-NC, K[0]), _c(NL, K[1])],
    [
        ("call ratio backspread needs K1 < K2", lambda K, **_: K[0] < K[1]),
        ("call ratio backspread needs NL > NC", lambda NC, NL, **_: NL > NC),
    ],
    _call_backspread_cf,
    _ratio_sample("asc", True),
    regime=lambda K, H, NC, NL, **_: NC * (K[1] - K[0]) + H > 0 and H != 0,
    ratio=True,
)
_register(
    "put_ratio_backspread", 2,
    lambda K, H, NC, NL, **_: [_p(-NC, K[0]), _p(NL, K[1])],
    [
        ("put ratio backspread needs K2 < K1", lambda K, **_: K[1] < K[0]),
        ("put ratio backspread needs NL > NC", lambda NC, NL, **_: NL > NC),
    ],
    _put_backspread_cf,
    _ratio_sample("desc", True),
    regime=lambda K, H, NC, NL, **_: NC * (K[0] - K[1]) + H > 0 and NL * K[1] - NC * K[0] - H > 0 and H != 0
    and NL * K[1] >= NC * K[0],
    ratio=True,
)
_register(
    "ratio_call_spread", 2,
    lambda K, H, NC, NL, **_: [_c(-NC, K[0]), _c(NL, K[1])],
    [
        ("ratio call spread needs K2 < K1", lambda K, **_: K[1] < K[0]),
        ("ratio call spread needs NL < NC", lambda NC, NL, **_: NL < NC),
    ],
    _ratio_call_cf,
    _ratio_sample("desc", False),
    regime=lambda K, H, NC, NL, **_: NL * (K[0] - K[1]) - H > 0 and H != 0,
    ratio=True,
)
_register(
    "ratio_put_spread", 2,
    lambda K, H, NC, NL, **_: [_p(-NC, K[0]), _p(NL, K[1])],
    [
        ("ratio put spread needs K2 > K1", lambda K, **_: K[1] > K[0]),
        ("ratio put spread needs NL < NC", lambda NC, NL, **_: NL < NC),
    ],
    _ratio_put_cf,
    _ratio_sample("asc", False),
    regime=lambda K, H, NC, NL, **_: NL * (K[1] - K[0]) - H > 0 and NC * K[0] - NL * K[1] + H > 0 and H != 0
    and NC * K[0] >= NL * K[1],
    ratio=True,
)

# ---- butterflies


def _modified_put_cf(K, H, **_):
    bes = [2 * K[1] - K[2] + H]
    if H > 0:
        bes.append(K[2] - H)
    return _sorted_cf(bes, K[2] - K[1] - H, 2 * K[1] - K[0] - K[2] + H)


_EQUI = ("strikes must be equidistant", lambda K, **_: _equi(K))

_register(
    "long_call_butterfly", 3,
    lambda K, H, **_: [_c(1, K[0]), _c(-2, K[1]), _c(1, K[2])],
    [("long call butterfly needs K1 > K2 > K3", lambda K, **_: _desc(K)), _EQUI],
    lambda K, H, **_: _sorted_cf([K[2] + H, K[0] - H], _kappa(K) - H, H),
    lambda r: dict(K=_rk(r, 3, "desc", equi=True), H=_u(r, 0.1, 15)),
    regime=lambda K, H, **_: 0 < H < _kappa(K),
)
_register(
    "modified_call_butterfly", 3,
    lambda K, H, **_: [_c(1, K[0]), _c(-2, K[1]), _c(1, K[2])],
    [
        ("modified call butterfly needs K1 > K2 > K3", lambda K, **_: _desc(K)),
        ("modified call butterfly needs K1 - K2 < K2 - K3", lambda K, **_: K[0] - K[1] < K[1] - K[2]),
    ],
    lambda K, H, **_: _sorted_cf([K[2] + H], K[1] - K[2] - H, H),
    lambda r: dict(K=_rk(r, 3, "desc"), H=_u(r, 0.1, 30)),
    regime=lambda K, H, **_: 0 < H < 2 * K[1] - K[0] - K[2],
)
_register(
    "long_put_butterfly", 3,
    lambda K, H, **_: [_p(1, K[0]), _p(-2, K[1]), _p(1, K[2])],
    [("long put butterfly needs K1 < K2 < K3", lambda K, **_: _asc(K)), _EQUI],
    lambda K, H, **_: _sorted_cf([K[0] + H, K[2] - H], _kappa(K) - H, H),
    lambda r: dict(K=_rk(r, 3, equi=True), H=_u(r, 0.1, 15)),
    regime=lambda K, H, **_: 0 < H < _kappa(K),
)
_register(
    "modified_put_butterfly", 3,
    lambda K, H, **_: [_p(1, K[0]), _p(-2, K[1]), _p(1, K[2])],
    [
        ("modified put butterfly needs K1 < K2 < K3", lambda K, **_: _asc(K)),
        ("modified put butterfly needs K3 - K2 < K2 - K1", lambda K, **_: K[2] - K[1] < K[1] - K[0]),
    ],
    _modified_put_cf,
    lambda r: dict(K=_rk(r, 3), H=_u(r, -40, 30)),
    regime=lambda K, H, **_: K[0] + K[2] - 2 * K[1] < H < K[2] - K[1] and H != 0,
)
_register(
    "short_call_butterfly", 3,
    lambda K, H, **_: [_c(-1, K[0]), _c(2, K[1]), _c(-1, K[2])],
    [("short call butterfly needs K1 < K2 < K3", lambda K, **_: _asc(K)), _EQUI],
    lambda K, H, **_: _sorted_cf([K[0] - H, K[2] + H], -H, _kappa(K) + H),
    lambda r: dict(K=_rk(r, 3, equi=True), H=-_u(r, 0.1, 15)),
    regime=lambda K, H, **_: 0 < -H < _kappa(K),
)
_register(
    "short_put_butterfly", 3,
    lambda K, H, **_: [_p(-1, K[0]), _p(2, K[1]), _p(-1, K[2])],
    [("short put butterfly needs K1 > K2 > K3", lambda K, **_: _desc(K)), _EQUI],
    lambda K, H, **_: _sorted_cf([K[2] - H, K[0] + H], -H, _kappa(K) + H),
    lambda r: dict(K=_rk(r, 3, "desc", equi=True), H=-_u(r, 0.1, 15)),
    regime=lambda K, H, **_: 0 < -H < _kappa(K),
)
_register(
    "long_iron_butterfly", 3,
    lambda K, H, **_: [_p(1, K[0]), _p(-1, K[1]), _c(-1, K[1]), _c(1, K[2])],
    [("iron butterfly needs K1 < K2 < K3", lambda K, **_: _asc(K)), _EQUI],
    lambda K, H, **_: _sorted_cf([K[1] + H, K[1] - H], -H, _kappa(K) + H),
    lambda r: dict(K=_rk(r, 3, equi=True), H=-_u(r, 0.1, 15)),
    regime=lambda K, H, **_: 0 < -H < _kappa(K),
)
_register(
    "short_iron_butterfly", 3,
    lambda K, H, **_: [_p(-1, K[0]), _p(1, K[1]), _c(1, K[1]), _c(-1, K[2])],
    [("iron butterfly needs K1 < K2 < K3", lambda K, **_: _asc(K)), _EQUI],
    lambda K, H, **_: _sorted_cf([K[1] - H, K[1] + H], _kappa(K) - H, H),
    lambda r: dict(K=_rk(r, 3, equi=True), H=_u(r, 0.1, 15)),
    regime=lambda K, H, **_: 0 < H < _kappa(K),
)

# ---- condors

_CONDOR_ASC = ("condor needs K1 < K2 < K3 < K4", lambda K, **_: _asc(K))


def _condor(name, legs, debit, wings_inner):
    if debit:
        cf = (lambda K, H, **_: _sorted_cf([wings_inner(K)[0] + H, wings_inner(K)[1] - H], _kappa(K) - H, H))
        gen = lambda r: dict(K=_rk(r, 4, equi=True), H=_u(r, 0.1, 15))
        reg = lambda K, H, **_: 0 < H < _kappa(K)
    else:
        cf = (lambda K, H, **_: _sorted_cf([wings_inner(K)[0] - H, wings_inner(K)[1] + H], -H, _kappa(K) + H))
        gen = lambda r: dict(K=_rk(r, 4, equi=True), H=-_u(r, 0.1, 15))
        reg = lambda K, H, **_: 0 < -H < _kappa(K)
    _register(name, 4, legs, [_CONDOR_ASC, _EQUI], cf, gen, regime=reg)


_outer = lambda K: (K[0], K[3])
_condor("long_call_condor", lambda K, H, **_: [_c(1, K[0]), _c(-1, K[1]), _c(-1, K[2]), _c(1, K[3])], True, _outer)
_condor("long_put_condor", lambda K, H, **_: [_p(1, K[0]), _p(-1, K[1]), _p(-1, K[2]), _p(1, K[3])], True, _outer)
_condor("short_call_condor", lambda K, H, **_: [_c(-1, K[0]), _c(1, K[1]), _c(1, K[2]), _c(-1, K[3])], False, _outer)
_condor("short_put_condor", lambda K, H, **_: [_p(-1, K[0]), _p(1, K[1]), _p(1, K[2]), _p(-1, K[3])], False, _outer)
# iron condors: breakevens sit inside the body, K2 - C and K3 + C (credit) or K2 - D and K3 + D
_register(
    "long_iron_condor", 4,
    lambda K, H, **_: [_p(1, K[0]), _p(-1, K[1]), _c(-1, K[2]), _c(1, K[3])],
    [_CONDOR_ASC, _EQUI],
    lambda K, H, **_: _sorted_cf([K[1] + H, K[2] - H], -H, _kappa(K) + H),
    lambda r: dict(K=_rk(r, 4, equi=True), H=-_u(r, 0.1, 15)),
    regime=lambda K, H, **_: 0 < -H < _kappa(K),
)
_register(
    "short_iron_condor", 4,
    lambda K, H, **_: [_p(-1, K[0]), _p(1, K[1]), _c(1, K[2]), _c(-1, K[3])],
    [_CONDOR_ASC, _EQUI],
    lambda K, H, **_: _sorted_cf([K[1] - H, K[2] + H], _kappa(K) - H, H),
    lambda r: dict(K=_rk(r, 4, equi=True), H=_u(r, 0.1, 15)),
    regime=lambda K, H, **_: 0 < H < _kappa(K),
)

# ---- box, collar, seagulls

_register(
    "long_box", 2,
    lambda K, H, **_: [_p(1, K[0]), _p(-1, K[1]), _c(1, K[1]), _c(-1, K[0])],
    [
        ("long box needs K1 > K2", lambda K, **_: K[0] > K[1]),
        ("long box needs K1 >= K2 + D", lambda K, H, **_: K[0] >= K[1] + H),
    ],
    lambda K, H, **_: ClosedForm((), K[0] - K[1] - H, -(K[0] - K[1] - H)),
    lambda r: dict(K=_rk(r, 2, "desc"), H=_u(r, 0.1, 40)),
    regime=lambda K, H, **_: K[0] > K[1] + H,
)
_register(
    "collar", 2,
    lambda K, S0, H, **_: [_s(1, S0), _p(1, K[0]), _c(-1, K[1])],
    [("collar needs K1 < K2", lambda K, **_: K[0] < K[1])],
    lambda K, S0, H, **_: _sorted_cf([S0 + H], K[1] - S0 - H, S0 - K[0] + H),
    lambda r: dict(K=_rk(r, 2), S0=float(r.integers(60, 140)), H=_u(r, -15, 15)),
    regime=lambda K, S0, H, **_: K[0] < S0 + H < K[1],
    entry=True,
)
_SEAGULL = ("seagull needs K1 < K2 < K3", lambda K, **_: _asc(K))
_register(
    "bullish_short_seagull", 3,
    lambda K, H, **_: [_p(-1, K[0]), _c(1, K[1]), _c(-1, K[2])],
    [_SEAGULL],
    lambda K, H, **_: _sorted_cf(_signed_be(H, K[1] + H, K[0] + H, (K[0], K[1])), K[2] - K[1] - H, K[0] + H),
    lambda r: dict(K=_rk(r, 3), H=_u(r, -30, 30)),
    regime=lambda K, H, **_: K[0] + H > 0 and K[1] + H < K[2],
)
_register(
    "bearish_long_seagull", 3,
    lambda K, H, **_: [_p(1, K[0]), _c(-1, K[1]), _c(1, K[2])],
    [_SEAGULL],
    lambda K, H, **_: _sorted_cf(_signed_be(H, K[0] - H, K[1] - H, (K[0], K[1])), K[0] - H, K[2] - K[1] + H),
    lambda r: dict(K=_rk(r, 3), H=_u(r, -30, 30)),
    regime=lambda K, H, **_: K[0] - H > 0 and K[1] - H < K[2],
)
_register(
    "bearish_short_seagull", 3,
    lambda K, H, **_: [_p(-1, K[0]), _p(1, K[1]), _c(-1, K[2])],
    [_SEAGULL],
    lambda K, H, **_: _sorted_cf(_signed_be(H, K[1] - H, K[2] - H, (K[1], K[2])), K[1] - K[0] - H, U),
    lambda r: dict(K=_rk(r, 3), H=_u(r, -30, 30)),
    regime=lambda K, H, **_: K[1] - H > K[0],
)
_register(
    "bullish_long_seagull", 3,
    lambda K, H, **_: [_p(1, K[0]), _p(-1, K[1]), _c(1, K[2])],
    [_SEAGULL],
    lambda K, H, **_: _sorted_cf(_signed_be(H, K[2] + H, K[1] + H, (K[1], K[2])), U, K[1] - K[0] + H),
    lambda r: dict(K=_rk(r, 3), H=_u(r, -30, 30)),
    regime=lambda K, H, **_: K[1] + H > K[0],
)

CALENDAR_NAMES = ("calendar_call_spread", "calendar_put_spread", "diagonal_call_spread", "diagonal_put_spread")


def _normalize(entry, params):
    p = dict(params)
    if "K" not in p:
        raise ParameterError(f"{entry.name}: strikes K required")
    K = tuple(float(k) for k in np.atleast_1d(p["K"]))
    if len(K) != entry.nstrikes:
        raise ParameterError(f"{entry.name}: expects {entry.nstrikes} strike(s), got {len(K)}")
    if any(k <= 0 for k in K):
        raise ParameterError("strikes must be > 0")
    p["K"] = K
    if entry.uses_entry:
        if "S0" not in p or not p["S0"] > 0:
            raise ParameterError(f"{entry.name}: entry price S0 > 0 required")
        p["S0"] = float(p["S0"])
    if "H" not in p:
        raise ParameterError(f"{entry.name}: net premium H required (debit > 0)")
    p["H"] = float(p["H"])
    if entry.uses_ratio:
        for key in ("NC", "NL"):
            if key not in p or not p[key] > 0:
                raise ParameterError(f"{entry.name}: {key} > 0 required")
            p[key] = float(p[key])
    if entry.closed_form is None and "V" not in p:
        raise ParameterError(f"{entry.name}: far-leg value V required")
    return p


def catalog(name, **params):
    """Build a named strategy.

    Parameters use the strike labels of the strategy description: ``K`` is a
    tuple (K1, K2, ...), ``S0`` the stock entry price, ``H`` the net premium
    (debit > 0), ``NC``/``NL`` the short/long contract counts of ratio spreads
    and ``V`` the far-leg value for calendar and diagonal spreads.
    """
    if name not in CATALOG:
        raise ParameterError(f"unknown strategy {name!r}")
    entry = CATALOG[name]
    p = _normalize(entry, params)
    for msg, pred in entry.rules:
        if not pred(**p):
            raise ParameterError(f"{name}: {msg}")
    legs = entry.build(**p)
    return StrategyPosition(tuple(legs), p["H"], name, p.get("V"))


def closed_form(name, **params):
    entry = CATALOG[name]
    if entry.closed_form is None:
        p = _normalize(entry, params)
        return ClosedForm((), p["V"] - p["H"], p["H"])
    return entry.closed_form(**_normalize(entry, params))


def sample_params(name, rng, max_tries=10_000):
    """Random parameters satisfying the constructor rules and closed-form regime."""
    entry = CATALOG[name]
    for _ in range(max_tries):
        p = entry.sampler(rng)
        p = _normalize(entry, p)
        if all(pred(**p) for _, pred in entry.rules) and entry.regime(**p):
            return p
    raise RuntimeError(f"{name}: sampler could not satisfy the regime")


def payoff_table(pos, n=201, price_cap=None):
    """(S_T grid, payoff) on [0, cap] including every strike."""
    cap = default_price_cap(pos) if price_cap is None else price_cap
    grid = np.union1d(np.linspace(0.0, cap, n), np.array(pos.strikes))
    return grid, payoff_at_expiry(pos, grid)

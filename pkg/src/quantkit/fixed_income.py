"""Bond and swap pricing, duration/convexity, bond portfolio schemes and
rate-spread strategy helpers.

Times are year fractions measured from the valuation date t; day counts are
left to the caller.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateError, ParameterError
from .xsec_signals import long_short_weights, quantile_members

RATINGS = (
    "AAA", "AA+", "AA", "AA-", "A+", "A", "A-", "BBB+", "BBB", "BBB-",
    "BB+", "BB", "BB-", "B+", "B", "B-", "CCC+", "CCC", "CCC-", "CC", "C",
)
INVESTMENT_GRADE_LOW_RISK = RATINGS[: RATINGS.index("A-") + 1]
HIGH_YIELD_LOW_RISK = RATINGS[RATINGS.index("BB+") : RATINGS.index("B-") + 1]


# -------------------------------------------------------------- zero bonds


def zero_price(rate, tau, compounding="continuous", delta=None):
    """Discount factor for a zero rate over ``tau`` = T - t years."""
    if tau < 0:
        raise ParameterError("maturity must not precede valuation time")
    if compounding == "continuous":
        return float(np.exp(-rate * tau))
    if compounding == "periodic":
        if not delta or delta <= 0:
            raise ParameterError("periodic compounding needs delta > 0")
        base = 1.0 + rate * delta
        if base <= 0:
            raise ParameterError("rate below -1/delta")
        return float(base ** (-tau / delta))
    raise ParameterError(f"unknown compounding {compounding!r}")


def zero_yield(price, tau, compounding="continuous", delta=None):
    """Inverse of :func:`zero_price`."""
    if price <= 0:
        raise ParameterError("price must be positive")
    if tau <= 0:
        raise ParameterError("need T > t")
    if compounding == "continuous":
        return float(-np.log(price) / tau)
    if compounding == "periodic":
        if not delta or delta <= 0:
            raise ParameterError("periodic compounding needs delta > 0")
        n = tau / delta
        return float((price ** (-1.0 / n) - 1.0) / delta)
    raise ParameterError(f"unknown compounding {compounding!r}")


@dataclass(frozen=True)
class ZeroCurve:
    """Zero rates by time to maturity; linear in rate between nodes, flat outside."""

    maturities: tuple
    rates: tuple
    compounding: str = "continuous"
    delta: float | None = None

    def __post_init__(self):
        m = np.asarray(self.maturities, dtype=float)
        r = np.asarray(self.rates, dtype=float)
        if m.ndim != 1 or m.size == 0 or m.shape != r.shape:
            raise ParameterError("maturities and rates must be equal-length 1-d")
        if np.any(m <= 0) or np.any(np.diff(m) <= 0):
            raise ParameterError("maturities must be positive and strictly increasing")
        if not np.all(np.isfinite(r)):
            raise ParameterError("rates must be finite")
        if self.compounding == "periodic" and not (self.delta and self.delta > 0):
            raise ParameterError("periodic compounding needs delta > 0")
        object.__setattr__(self, "maturities", tuple(m.tolist()))
        object.__setattr__(self, "rates", tuple(r.tolist()))

    @classmethod
    def flat(cls, rate, compounding="continuous", delta=None):
        return cls((1.0,), (float(rate),), compounding, delta)

    def rate(self, tau):
        return np.interp(tau, self.maturities, self.rates)

    def discount(self, tau, shift=0.0):
        tau = np.asarray(tau, dtype=float)
        R = self.rate(tau) + shift
        if self.compounding == "continuous":
            return np.exp(-R * tau)
        return (1.0 + R * self.delta) ** (-tau / self.delta)

    def shifted(self, dr):
        return ZeroCurve(self.maturities, tuple(np.add(self.rates, dr)), self.compounding, self.delta)


# ------------------------------------------------------------ coupon bonds


@dataclass(frozen=True)
class CouponBond:
    """Fixed coupon k (simple, per year) paid every ``delta`` years plus $1 at maturity."""

    coupon: float
    delta: float
    payment_times: tuple
    maturity: float

    def __post_init__(self):
        t = tuple(float(x) for x in self.payment_times)
        if self.delta <= 0:
            raise ParameterError("coupon period must be positive")
        if not t:
            raise ParameterError("empty payment schedule")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ParameterError("payment times must be strictly increasing")
        if t[-1] > self.maturity + 1e-12:
            raise ParameterError("last coupon after maturity")
        object.__setattr__(self, "payment_times", t)

    @classmethod
    def regular(cls, coupon, delta, n, T0=0.0, maturity=None):
        times = tuple(T0 + delta * (i + 1) for i in range(n))
        return cls(coupon, delta, times, times[-1] if maturity is None else maturity)

    @classmethod
    def zero(cls, maturity):
        return cls(0.0, maturity, (float(maturity),), float(maturity))

    def cash_flows(self, t=0.0):
        """(times to payment, amounts) for payments strictly after ``t``."""
        times = [Ti - t for Ti in self.payment_times if Ti > t]
        amts = [self.coupon * self.delta] * len(times)
        if self.maturity > t:
            times.append(self.maturity - t)
            amts.append(1.0)
        return np.array(times), np.array(amts)


def coupon_bond_price(curve: ZeroCurve, bond: CouponBond, t=0.0, shift=0.0):
    """P(t,T) + k delta sum over remaining coupons of P(t,T_i)."""
    tau, cf = bond.cash_flows(t)
    if tau.size == 0:
        raise ParameterError("bond has matured")
    return float(np.dot(cf, curve.discount(tau, shift)))


def par_coupon(curve: ZeroCurve, payment_times, delta, maturity=None):
    """Coupon rate that prices the bond at par at T0 = 0."""
    times = np.asarray(payment_times, dtype=float)
    if times.size == 0:
        raise ParameterError("empty payment schedule")
    T = times[-1] if maturity is None else maturity
    return float((1.0 - curve.discount(T)) / (delta * np.sum(curve.discount(times))))


def floating_value(curve: ZeroCurve, payment_times, maturity=None):
    """Floating-rate bond value 1 - [P(T0,T_n) - P(T0,T)]."""
    times = np.asarray(payment_times, dtype=float)
    if times.size == 0:
        raise ParameterError("empty payment schedule")
    Tn = times[-1]
    if maturity is None or maturity == Tn:
        return 1.0
    if maturity < Tn:
        raise ParameterError("maturity precedes the last coupon")
    return float(1.0 - (curve.discount(Tn) - curve.discount(maturity)))


def swap_fixed_rate(curve: ZeroCurve, payment_times, delta):
    """Fixed rate giving a zero initial swap value."""
    return par_coupon(curve, payment_times, delta)


@dataclass
class Sensitivities:
    macaulay: float
    modified: float
    dollar: float
    convexity: float
    price: float


def durations_convexity(bond: CouponBond, curve: ZeroCurve, t=0.0):
    """Macaulay, modified and dollar duration plus convexity under parallel shifts."""
    tau, cf = bond.cash_flows(t)
    if tau.size == 0:
        raise ParameterError("bond has matured")
    pv = cf * curve.discount(tau)
    P = pv.sum()
    mac = float(np.dot(tau, pv) / P)
    if curve.compounding == "continuous":
        mod = mac
        conv = float(np.dot(tau**2, pv) / P)
    else:
        g = 1.0 + curve.rate(tau) * curve.delta
        mod = float(np.dot(tau / g, pv) / P)
        conv = float(np.dot(tau * (tau + curve.delta) / g**2, pv) / P)
    return Sensitivities(mac, mod, float(mod * P), conv, float(P))


def finite_difference_sensitivities(bond, curve, h=1e-5, t=0.0):
    """(ModD, C) from central differences of the price under parallel shifts."""
    p0 = coupon_bond_price(curve, bond, t)
    up = coupon_bond_price(curve, bond, t, h)
    dn = coupon_bond_price(curve, bond, t, -h)
    return -(up - dn) / (2 * h * p0), (up - 2 * p0 + dn) / (h * h * p0)


# ------------------------------------------------------ portfolio schemes


@dataclass
class BarbellComparison:
    duration: float
    bullet_maturity: float
    convexity: float
    convexity_pickup: float


def barbell_vs_bullet(w1, w2, T1, T2, Y):
    """Two zero-coupon bullets vs the duration-matched single bullet (continuous)."""
    if w1 <= 0 or w2 <= 0:
        raise ParameterError("weights must be positive")
    if not 0 < T1 <= T2:
        raise ParameterError("need 0 < T1 <= T2")
    a, b = w1 * np.exp(-T1 * Y), w2 * np.exp(-T2 * Y)
    s = a + b
    D = (a * T1 + b * T2) / s
    C = (a * T1**2 + b * T2**2) / s
    pickup = a * b / s**2 * (T2 - T1) ** 2
    return BarbellComparison(float(D), float(D), float(C), float(pickup))


def ladder(maturities, capital):
    """Equal allocations across rungs and the ladder's average maturity."""
    T = np.asarray(maturities, dtype=float)
    if T.size == 0:
        raise ParameterError("ladder needs at least one rung")
    return np.full(T.size, capital / T.size), float(T.mean())


@dataclass
class Immunization:
    present_value: float
    target_duration: float
    target_convexity: float
    allocations: np.ndarray


def immunize(durations, obligation, T_star, Y, delta, convexities=None):
    """Dollar allocations matching duration (2 bonds) or duration and convexity (3)."""
    D = np.asarray(durations, dtype=float)
    if D.size not in (2, 3):
        raise ParameterError("immunization uses 2 or 3 bonds")
    g = 1.0 + Y * delta
    P = obligation / g ** (T_star / delta)
    Dt = T_star / g
    Ct = T_star * (T_star + delta) / g**2
    rows = [np.ones(D.size), D]
    rhs = [P, P * Dt]
    if D.size == 3:
        if convexities is None:
            raise ParameterError("3-bond immunization needs convexities")
        rows.append(np.asarray(convexities, dtype=float))
        rhs.append(P * Ct)
    A = np.vstack(rows)
    if np.linalg.cond(A) > 1e12:
        raise DegenerateError("bond durations/convexities are collinear")
    alloc = np.linalg.solve(A, np.array(rhs))
    return Immunization(float(P), float(Dt), float(Ct), alloc)


def butterfly_weights(D1, D2, D3, P2, scheme="ddn", beta=None, maturities=None):
    """Wing dollar amounts (P1, P3) for a short body of P2 dollars."""
    if D1 == D3 or min(D1, D2, D3) <= 0:
        raise DegenerateError("wing durations must differ and be positive")
    if scheme == "ddn":
        P1 = P2 * (D3 - D2) / (D3 - D1)
        return float(P1), float(P2 - P1)
    if scheme == "fifty_fifty":
        return float(P2 * D2 / (2 * D1)), float(P2 * D2 / (2 * D3))
    if scheme == "maturity":
        T1, T2, T3 = maturities
        if not T1 < T2 < T3:
            raise ParameterError("need T1 < T2 < T3")
        beta = (T2 - T1) / (T3 - T2)
        scheme = "regression"
    if scheme == "regression":
        if beta is None or beta <= 0:
            raise ParameterError("regression butterfly needs beta > 0")
        wing3 = P2 * D2 / (1.0 + beta)
        return float(beta * wing3 / D1), float(wing3 / D3)
    raise ParameterError(f"unknown butterfly scheme {scheme!r}")


# --------------------------------------------------------------- carry


@dataclass
class Carry:
    total: float
    yield_part: float
    roll_part: float
    exact: float


def bond_carry(curve: ZeroCurve, dt, T, t=0.0):
    """Zero-coupon carry over [t, t+dt] with the curve frozen in time to maturity."""
    tau = T - t
    if dt <= 0 or tau - dt <= 0:
        raise ParameterError("need 0 < dt < T - t")
    R0 = float(curve.rate(tau))
    R1 = float(curve.rate(tau - dt))
    mod = tau if curve.compounding == "continuous" else tau / (1 + R0 * curve.delta)
    y = R0 * dt
    roll = -mod * (R1 - R0)
    exact = float(curve.discount(tau - dt) / curve.discount(tau) - 1.0)
    return Carry(y + roll, y, roll, exact)


def steepest_segment(curve: ZeroCurve):
    """Node interval (T_j, T_j+1) with the largest rate slope."""
    m = np.asarray(curve.maturities)
    if m.size < 2:
        raise ParameterError("need at least two curve nodes")
    slope = np.diff(curve.rates) / np.diff(m)
    j = int(np.argmax(slope))
    return float(m[j]), float(m[j + 1]), float(slope[j])


def carry_portfolio(carries, q=0.1):
    """Zero-cost long top / short bottom decile by carry."""
    c = np.asarray(carries, dtype=float)
    top, bottom = quantile_members(c, q)
    return long_short_weights(c.size, top, bottom)


# ----------------------------------------------------- value / low risk


@dataclass
class CreditValueFit:
    fitted: np.ndarray
    value_log: np.ndarray
    value_ratio: np.ndarray
    rating_coef: dict
    maturity_coef: float
    flags: list = field(default_factory=list)


def credit_value_regression(spreads, ratings, maturities):
    """S_i = sum_r beta_r I_ir + gamma T_i + eps_i; value ln(S/S*) or eps/S*."""
    S = np.asarray(spreads, dtype=float)
    T = np.asarray(maturities, dtype=float)
    r = list(ratings)
    if not (S.size == T.size == len(r)) or S.size == 0:
        raise ParameterError("inputs must cover the same bonds")
    present = sorted(set(r), key=lambda x: (RATINGS.index(x) if x in RATINGS else len(RATINGS), str(x)))
    I = np.array([[1.0 if ri == lab else 0.0 for lab in present] for ri in r])
    X = np.column_stack([I, T])
    flags = []
    for j, lab in enumerate(present):
        if I[:, j].sum() == 1:
            flags.append(f"single bond with rating {lab}")
    if np.linalg.matrix_rank(X) < X.shape[1]:
        flags.append("maturity collinear with rating dummies")
    coef, *_ = np.linalg.lstsq(X, S, rcond=None)
    fitted = X @ coef
    if np.any(fitted <= 0):
        flags.append("non-positive fitted spread")
    with np.errstate(divide="ignore", invalid="ignore"):
        vlog = np.log(S / fitted)
        vratio = S / fitted - 1.0
    return CreditValueFit(fitted, vlog, vratio, dict(zip(present, coef[:-1])), float(coef[-1]), flags)


def low_risk_selection(ratings, maturities, grade="IG", q=0.1):
    """Indices of the shortest-maturity decile within the low-risk rating band."""
    band = INVESTMENT_GRADE_LOW_RISK if grade == "IG" else HIGH_YIELD_LOW_RISK
    idx = np.array([i for i, x in enumerate(ratings) if x in band], dtype=int)
    if idx.size == 0:
        return idx
    _, bottom = quantile_members(np.asarray(maturities, float)[idx], q)
    return idx[bottom]


# ------------------------------------------------------ spread strategies


def curve_spread_stance(view):
    """Flattener when rates are expected up, steepener when down."""
    if view == "rates-up":
        return {"stance": "flattener", "front": "sell", "back": "buy"}
    if view == "rates-down":
        return {"stance": "steepener", "front": "buy", "back": "sell"}
    raise ParameterError("view must be 'rates-up' or 'rates-down'")


def cds_basis(cds_spread, bond_spread):
    """Basis = CDS spread - bond spread; negative basis: buy bond and CDS protection."""
    basis = cds_spread - bond_spread
    if basis < 0:
        action = "buy_bond_buy_cds"
    elif basis > 0:
        action = "sell_bond_sell_cds"
    else:
        action = "none"
    return float(basis), action


def swap_spread_carry(swap_rate, treasury_yield, libor, repo, direction="long"):
    """C = +/-[(r_swap - Y) - (L - r)], plus for a long swap."""
    sign = {"long": 1.0, "short": -1.0}.get(direction)
    if sign is None:
        raise ParameterError("direction must be 'long' or 'short'")
    return sign * ((swap_rate - treasury_yield) - (libor - repo))

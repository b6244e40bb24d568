"""Command-line entry point.

Exit codes: 0 success, 2 data error, 3 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict

import numpy as np

from . import backtester, credit_macro, data_panel, fixed_income, futures_fx, ml_signals, options
from . import vol_derivatives, xsec_signals
from .errors import DataError, DegenerateError, InsufficientHistoryError, ParameterError, QuantKitError

EXIT_OK, EXIT_DATA, EXIT_CONFIG = 0, 2, 3

log = logging.getLogger("quantkit")


class ConfigError(Exception):
    """Bad command-line usage."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


# ---------------------------------------------------------------- helpers


def _floats(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def _clean(x):
    """JSON-safe conversion of numpy values and infinities."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _emit_json(obj, path=None):
    text = json.dumps(_clean(obj), indent=2, sort_keys=False)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _emit_csv(header, rows, path=None):
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([data_panel.format_number(v) if isinstance(v, (float, np.floating)) else v for v in r])
    finally:
        if path:
            fh.close()


def _read_numeric_csv(path):
    """(header, matrix) of a CSV with a header row and numeric cells."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise DataError(f"{path}: need a header and at least one row")
    try:
        M = np.array([[float(x) for x in r] for r in rows[1:]], float)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric cell") from exc
    if M.ndim != 2 or M.shape[1] != len(rows[0]):
        raise DataError(f"{path}: ragged rows")
    return rows[0], M


def _read_labels(path):
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return [r[0] for r in rows[1:]]


# ----------------------------------------------------------------- payoff


def cmd_payoff(a):
    if a.list:
        for name in sorted(options.CATALOG):
            print(name)
        return EXIT_OK
    if not a.name:
        raise ConfigError("strategy name required (or --list)")
    params = {"H": a.H}
    if a.K:
        params["K"] = tuple(a.K)
    for key in ("S0", "NC", "NL", "V"):
        if getattr(a, key) is not None:
            params[key] = getattr(a, key)
    pos = options.catalog(a.name, **params)
    prof = options.profile(pos, a.cap)
    grid, pay = options.payoff_table(pos, a.points, prof.price_cap)
    out = {"strategy": a.name, "H": pos.H, "legs": [asdict(l) for l in pos.legs], "profile": prof.to_dict()}
    if a.csv:
        _emit_csv(["S_T", "payoff"], zip(grid, np.atleast_1d(pay)), a.csv)
    _emit_json(out, a.json)
    return EXIT_OK


# ----------------------------------------------------------------- signal


def cmd_signal(a):
    panel, ret = data_panel.load_panel(a.data)
    if a.kind == "momentum":
        monthly = xsec_signals.monthly_prices(panel.dates, panel.adj_close)
        score = xsec_signals.momentum_score(monthly, a.mode, a.window, a.skip)
    elif a.kind == "lowvol":
        # low volatility ranks high
        score = -xsec_signals.low_vol_score(data_panel.close_to_close_returns(panel).values, a.window)
    else:
        # short-horizon reversal: losers rank high
        score = -ret.values[:, : a.window].sum(axis=1)
    top, bottom = xsec_signals.quantile_members(score, a.q, panel.tickers)
    w = xsec_signals.long_short_weights(len(panel.tickers), top, bottom)
    _emit_csv(["ticker", "score", "weight"], zip(panel.tickers, score, w), a.out)
    return EXIT_OK


# ------------------------------------------------------------------- bond


def cmd_bond(a):
    if a.table == "price":
        bond = fixed_income.CouponBond.regular(a.coupon, a.delta, a.n)
        rows = []
        for y in a.yields:
            curve = fixed_income.ZeroCurve.flat(y, a.compounding, a.delta if a.compounding == "periodic" else None)
            s = fixed_income.durations_convexity(bond, curve)
            rows.append((y, s.price, s.macaulay, s.modified, s.dollar, s.convexity))
        _emit_csv(["yield", "price", "macaulay", "modified", "dollar", "convexity"], rows, a.out)
    else:
        if len(a.durations) != 3:
            raise ConfigError("--durations needs D1,D2,D3")
        rows = []
        for scheme in a.schemes:
            P1, P3 = fixed_income.butterfly_weights(*a.durations, a.P2, scheme, a.beta, a.maturities)
            rows.append((scheme, P1, a.P2, P3))
        _emit_csv(["scheme", "P1", "P2", "P3"], rows, a.out)
    return EXIT_OK


# ------------------------------------------------------------------ macro


def cmd_macro(a):
    if a.rule == "triangular":
        q = a.quotes
        if len(q) != 6:
            raise ConfigError("--quotes needs six numbers: ab bid/ask, bc bid/ask, ac bid/ask")
        res = futures_fx.triangular_arb(futures_fx.FXQuote(q[0], q[1]), futures_fx.FXQuote(q[2], q[3]),
                                        futures_fx.FXQuote(q[4], q[5]))
        out = asdict(res)
    elif a.rule == "hp-trend":
        out = {"signal": futures_fx.hp_trend_signal(np.array(a.series), a.T1, a.T2, a.lam)}
    elif a.rule == "fx-carry":
        wv = futures_fx.fx_carry_portfolio(np.array(a.discounts), a.mode, a.q)
        out = {"weights": wv.weights, "no_trade": wv.no_trade}
    elif a.rule == "spark":
        h = futures_fx.hedge_ratio("spark", H=a.H)
        out = asdict(h)
    else:
        cdd, hdd = futures_fx.degree_days(a.tmin, a.tmax, a.base)
        out = {"CDD": cdd, "HDD": hdd}
    _emit_json({"rule": a.rule, **out}, a.out)
    return EXIT_OK


# -------------------------------------------------------------------- vol


def cmd_vol(a):
    if a.rule == "vix-basis":
        D, action = vol_derivatives.vix_basis_signal(a.ux1, a.vix, a.days, a.position)
        _emit_json({"D": D, "action": action}, a.out)
    elif a.rule == "etf-pair":
        action = vol_derivatives.etf_pair_rule(a.bid1, a.ask1, a.bid2, a.ask2, a.kappa, a.position)
        _emit_json({"action": action}, a.out)
    elif a.rule == "varswap":
        terms = vol_derivatives.VarianceSwapTerms(a.notional, a.strike)
        r = np.array(a.returns)
        _emit_json({"realized_variance": vol_derivatives.realized_variance(r),
                    "payoff": vol_derivatives.variance_swap_payoff(terms, r)}, a.out)
    else:
        D, rows = None, []
        for b in np.linspace(a.basis_min, a.basis_max, a.points):
            D, action = vol_derivatives.vix_basis_signal(a.vix + b, a.vix, a.days, a.position)
            rows.append((b, D, action))
        _emit_csv(["basis", "D", "action"], rows, a.out)
    return EXIT_OK


# ----------------------------------------------------------------- credit


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc


def cmd_credit(a):
    if a.rule == "tranche":
        d = _load_json(a.spec)
        try:
            spec = credit_macro.TrancheSpec(d["attachment"], d["detachment"], d["pool_notional"], d["times"],
                                            d["discounts"], d["losses"], d["probs"], d.get("t0", 0.0))
        except KeyError as exc:
            raise DataError(f"tranche spec missing field {exc}") from exc
        v = credit_macro.tranche_mtm_and_spread(spec, a.spread)
        sched = [{"time": t, "discount": D, "expected_loss": credit_macro.cdo_expected_loss(spec, i)}
                 for i, (t, D) in enumerate(zip(spec.times, spec.discounts))]
        _emit_json({"valuation": asdict(v), "schedule": sched}, a.out)
    elif a.rule == "zc-inflation":
        f = credit_macro.zero_coupon_inflation_flows(a.K, a.T, a.I0, a.IT)
        _emit_json({"fixed": f.fixed, "floating": f.floating, "net": f.net}, a.out)
    elif a.rule == "yoy-inflation":
        f = credit_macro.yoy_inflation_flows(a.K, a.index)
        rows = [(i + 1, x, y, y - x) for i, (x, y) in enumerate(zip(f.fixed, f.floating))]
        _emit_csv(["year", "fixed", "floating", "net"], rows, a.out)
    elif a.rule == "tips":
        d = _load_json(a.spec)
        res = credit_macro.tips_arbitrage(d["P_treasury"], d["r_treasury"], d["P_tips"], d["r_tips"], d["K"],
                                          d["times"], d["strips_discounts"], d.get("cpi_ratio"))
        _emit_json(asdict(res), a.out)
    else:
        res = credit_macro.weather_indices(a.tmin, a.tmax, a.base)
        _emit_json({"CDD": res[0], "HDD": res[1]}, a.out)
    return EXIT_OK


# --------------------------------------------------------------------- ml


def _write_model(model, path):
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh)


def cmd_ml(a):
    if a.action == "train":
        header, X = _read_numeric_csv(a.features)
        if a.kind == "nb":
            labels = _read_labels(a.target)
            if len(labels) != X.shape[0]:
                raise DataError("label count does not match feature rows")
            model = ml_signals.nb_train(X.astype(int), labels, smoothing=a.smoothing, vocabulary=header)
        else:
            _, Y = _read_numeric_csv(a.target)
            if Y.shape[0] != X.shape[0]:
                raise DataError("target count does not match feature rows")
            if a.kind == "knn":
                model = ml_signals.knn_fit_table(X, Y[:, 0], k=a.k, metric=a.metric)
            else:
                y = Y[:, 0]
                K = a.classes
                if np.unique(y).size < K:
                    raise ParameterError("fewer distinct targets than classes")
                cut = np.quantile(y, np.arange(1, K) / K)
                S = np.eye(K)[ml_signals.quantile_classes(y, cut)]
                model = ml_signals.init_ann((X.shape[1],) + tuple(a.hidden) + (K,), a.seed)
                model.cutpoints = cut
                ml_signals.fit_ann(model, X, S, a.epochs, a.learning_rate, a.seed)
        _write_model(model, a.model)
        return EXIT_OK
    model = ml_signals.model_from_dict(_load_json(a.model))
    _, X = _read_numeric_csv(a.features)
    if isinstance(model, ml_signals.KnnModel):
        rows = [(i, ml_signals.knn_predict(model, x)) for i, x in enumerate(X)]
        _emit_csv(["row", "prediction"], rows, a.out)
    elif isinstance(model, ml_signals.AnnModel):
        P = model.predict_proba(X)
        rows = [(i, *p, ml_signals.ann_signal(p)) for i, p in enumerate(P)]
        _emit_csv(["row"] + [f"p{c}" for c in range(P.shape[1])] + ["signal"], rows, a.out)
    else:
        post = ml_signals.nb_posterior(model, X.astype(int))
        labels = ml_signals.nb_predict(model, X.astype(int))
        rows = [(i, *p, lab) for i, (p, lab) in enumerate(zip(post, labels))]
        _emit_csv(["row"] + [f"P({c})" for c in model.classes] + ["class"], rows, a.out)
    return EXIT_OK


# --------------------------------------------------------------- backtest


def cmd_backtest(a):
    cfg = backtester.BacktestConfig(a.days, a.dr, a.daddv, a.naddv, a.invlvl, a.bnds, a.cost, a.mode)
    panel, ret = data_panel.load_panel(a.data)
    report = backtester.run_backtest(panel, ret, cfg)
    _emit_json(report.to_dict(), a.out)
    if a.holdings_csv:
        rows = [(t, *h) for t, h in zip(report.tickers, report.holdings)]
        _emit_csv(["ticker"] + list(report.dates), rows, a.holdings_csv)
    log.info("total pnl %.2f, annual %.3f%%, sharpe %s", report.total_pnl, report.annual_return_pct, report.sharpe)
    return EXIT_OK


def cmd_synth(a):
    panel, ret = data_panel.synthesize_panel(a.seed, a.tickers, a.days)
    data_panel.write_panel(panel, ret, a.out)
    return EXIT_OK


# ----------------------------------------------------------------- parser


def build_parser():
    p = _Parser(prog="quantkit", description="Quantitative strategy analytics and intraday backtester.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("payoff", help="expiry payoff grid (CSV) and profile (JSON)")
    s.add_argument("name", nargs="?")
    s.add_argument("--list", action="store_true")
    s.add_argument("--K", type=_floats, default=None)
    s.add_argument("--H", type=float, default=0.0)
    for key in ("S0", "NC", "NL", "V"):
        s.add_argument(f"--{key}", type=float)
    s.add_argument("--cap", type=float)
    s.add_argument("--points", type=int, default=201)
    s.add_argument("--csv")
    s.add_argument("--json")
    s.set_defaults(func=cmd_payoff)

    s = sub.add_parser("signal", help="cross-sectional scores and weights from a panel directory")
    s.add_argument("--data", required=True)
    s.add_argument("--kind", choices=("momentum", "lowvol", "reversal"), default="momentum")
    s.add_argument("--mode", choices=("cumulative", "mean", "risk_adjusted"), default="cumulative")
    s.add_argument("--window", type=int, default=12)
    s.add_argument("--skip", type=int, default=1)
    s.add_argument("--q", type=float, default=0.1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_signal)

    s = sub.add_parser("bond", help="pricing/duration or butterfly tables")
    s.add_argument("--table", choices=("price", "butterfly"), default="price")
    s.add_argument("--coupon", type=float, default=0.05)
    s.add_argument("--delta", type=float, default=0.5)
    s.add_argument("--n", type=int, default=20)
    s.add_argument("--yields", type=_floats, default=[0.03, 0.04, 0.05])
    s.add_argument("--compounding", choices=("continuous", "periodic"), default="continuous")
    s.add_argument("--durations", type=_floats, default=[2.0, 5.0, 10.0])
    s.add_argument("--P2", type=float, default=100.0)
    s.add_argument("--schemes", type=lambda t: t.split(","), default=["ddn", "fifty_fifty"])
    s.add_argument("--beta", type=float)
    s.add_argument("--maturities", type=_floats)
    s.add_argument("--out")
    s.set_defaults(func=cmd_bond)

    s = sub.add_parser("macro", help="futures/FX rule evaluation")
    s.add_argument("rule", choices=("triangular", "hp-trend", "fx-carry", "spark", "degree-days"))
    s.add_argument("--quotes", type=_floats)
    s.add_argument("--series", type=_floats)
    s.add_argument("--T1", type=int, default=3)
    s.add_argument("--T2", type=int, default=12)
    s.add_argument("--lam", type=float, default=14400.0)
    s.add_argument("--discounts", type=_floats)
    s.add_argument("--mode", default="hml")
    s.add_argument("--q", type=float, default=1 / 3)
    s.add_argument("--H", type=float, default=7.5)
    s.add_argument("--tmin", type=_floats)
    s.add_argument("--tmax", type=_floats)
    s.add_argument("--base", type=float, default=65.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_macro)

    s = sub.add_parser("vol", help="volatility rules and tables")
    s.add_argument("rule", choices=("vix-basis", "vix-table", "etf-pair", "varswap"))
    s.add_argument("--ux1", type=float)
    s.add_argument("--vix", type=float, default=20.0)
    s.add_argument("--days", type=int, default=10)
    s.add_argument("--position", type=int, default=0)
    s.add_argument("--basis-min", type=float, default=-3.0)
    s.add_argument("--basis-max", type=float, default=3.0)
    s.add_argument("--points", type=int, default=13)
    for key in ("bid1", "ask1", "bid2", "ask2"):
        s.add_argument(f"--{key}", type=float)
    s.add_argument("--kappa", type=float, default=1.002)
    s.add_argument("--returns", type=_floats)
    s.add_argument("--notional", type=float, default=1.0)
    s.add_argument("--strike", type=float, default=0.04)
    s.add_argument("--out")
    s.set_defaults(func=cmd_vol)

    for name in ("credit", "macro-misc"):
        s = sub.add_parser(name, help="tranche, inflation, TIPS and weather schedules")
        s.add_argument("rule", choices=("tranche", "zc-inflation", "yoy-inflation", "tips", "weather"))
        s.add_argument("--spec", help="JSON input for tranche/tips")
        s.add_argument("--spread", type=float, default=0.0)
        s.add_argument("--K", type=float, default=0.02)
        s.add_argument("--T", type=float, default=1.0)
        s.add_argument("--I0", type=float, default=100.0)
        s.add_argument("--IT", type=float, default=100.0)
        s.add_argument("--index", type=_floats)
        s.add_argument("--tmin", type=_floats)
        s.add_argument("--tmax", type=_floats)
        s.add_argument("--base", type=float, default=65.0)
        s.add_argument("--out")
        s.set_defaults(func=cmd_credit)

    s = sub.add_parser("ml", help="train or apply KNN/ANN/naive Bayes models")
    s.add_argument("action", choices=("train", "predict"))
    s.add_argument("--kind", choices=("knn", "ann", "nb"), default="knn")
    s.add_argument("--features", required=True)
    s.add_argument("--target")
    s.add_argument("--model", required=True)
    s.add_argument("--k", type=int)
    s.add_argument("--metric", choices=("euclidean", "manhattan"), default="euclidean")
    s.add_argument("--classes", type=int, default=3)
    s.add_argument("--hidden", type=lambda t: [int(x) for x in t.split(",") if x], default=[8])
    s.add_argument("--epochs", type=int, default=200)
    s.add_argument("--learning-rate", type=float, default=0.05)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--smoothing", type=float, default=1.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_ml)

    s = sub.add_parser("backtest", help="out-of-sample intraday backtest")
    s.add_argument("--data", required=True)
    d = backtester.BacktestConfig()
    s.add_argument("--days", type=int, default=d.days)
    s.add_argument("--dr", type=int, default=d.d_r)
    s.add_argument("--daddv", type=int, default=d.d_addv)
    s.add_argument("--naddv", type=int, default=d.n_addv)
    s.add_argument("--invlvl", type=float, default=d.inv_lvl)
    s.add_argument("--bnds", type=float, default=d.bnds)
    s.add_argument("--cost", action="store_true")
    s.add_argument("--mode", choices=backtester.MODES, default=d.mode)
    s.add_argument("--out")
    s.add_argument("--holdings-csv")
    s.set_defaults(func=cmd_backtest)

    s = sub.add_parser("synth", help="write a deterministic synthetic panel")
    s.add_argument("--out", required=True)
    s.add_argument("--tickers", type=int, default=50)
    s.add_argument("--days", type=int, default=300)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        if not getattr(a, "func", None):
            parser.print_help(sys.stderr)
            return EXIT_CONFIG
        if getattr(a, "action", None) == "train" and a.kind is not None and not a.target:
            raise ConfigError("training needs --target")
        return a.func(a)
    except ConfigError as exc:
        print(f"quantkit: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, InsufficientHistoryError, DegenerateError, OSError) as exc:
        print(f"quantkit: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ParameterError, QuantKitError, ValueError, TypeError) as exc:
        print(f"quantkit: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

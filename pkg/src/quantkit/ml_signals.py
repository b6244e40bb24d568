"""Machine-learning signal pipelines: single-asset KNN return prediction, a
feed-forward quantile classifier and Bernoulli naive Bayes.

Series are ordered most recent first, so index t = 0 is "now" and larger t
lies further in the past. Every model round-trips through ``to_dict`` /
``from_dict`` for JSON storage.
"""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateError, InsufficientHistoryError, ParameterError
from .ts_stats import ema, emsd, rsi

log = logging.getLogger(__name__)

# ------------------------------------------------------------------- KNN


def _trailing_mean(x, t, T):
    return float(np.mean(x[t + 1 : t + 1 + T]))


def knn_feature_row(prices, volumes, t, price_windows, volume_windows):
    """Moving averages of volume and price over periods strictly before ``t``."""
    P = np.asarray(prices, float)
    V = np.asarray(volumes, float)
    need = t + 1 + max(tuple(price_windows) + tuple(volume_windows))
    if need > min(P.size, V.size):
        raise InsufficientHistoryError(f"features at t={t} need {need} observations")
    return np.array([_trailing_mean(V, t, T) for T in volume_windows] + [_trailing_mean(P, t, T) for T in price_windows])


@dataclass
class KnnModel:
    X: np.ndarray  # normalized training features, one row per sample time
    Y: np.ndarray  # realized forward returns
    times: np.ndarray
    k: int
    lo: np.ndarray
    hi: np.ndarray
    keep: np.ndarray  # feature columns retained after the degeneracy check
    horizon: int
    price_windows: tuple = ()
    volume_windows: tuple = ()
    metric: str = "euclidean"
    w: np.ndarray | None = None
    v: float | None = None

    def normalize(self, raw):
        raw = np.atleast_2d(np.asarray(raw, float))[:, self.keep]
        return (raw - self.lo) / (self.hi - self.lo)

    def to_dict(self):
        return {
            "kind": "knn", "X": self.X.tolist(), "Y": self.Y.tolist(), "times": self.times.tolist(),
            "k": self.k, "lo": self.lo.tolist(), "hi": self.hi.tolist(), "keep": self.keep.tolist(),
            "horizon": self.horizon, "price_windows": list(self.price_windows),
            "volume_windows": list(self.volume_windows), "metric": self.metric,
            "w": None if self.w is None else self.w.tolist(), "v": self.v,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.array(d["X"], float).reshape(len(d["Y"]), -1), np.array(d["Y"], float), np.array(d["times"], int),
            int(d["k"]), np.array(d["lo"], float), np.array(d["hi"], float), np.array(d["keep"], bool),
            int(d["horizon"]), tuple(d["price_windows"]), tuple(d["volume_windows"]), d["metric"],
            None if d["w"] is None else np.array(d["w"], float), d["v"],
        )


def auto_k(sample_size, rule="floor"):
    """k = floor(sqrt(T*)) or ceiling(sqrt(T*))."""
    r = math.isqrt(sample_size)
    if rule == "floor":
        return max(r, 1)
    if rule == "ceiling":
        return r if r * r == sample_size else r + 1
    raise ParameterError(f"unknown k rule {rule!r}")


def knn_fit_table(X_raw, Y, times=None, k=None, metric="euclidean", k_rule="floor", horizon=0,
                  price_windows=(), volume_windows=()):
    """Build a KNN model from an explicit feature table."""
    X_raw = np.atleast_2d(np.asarray(X_raw, float))
    Y = np.asarray(Y, float).ravel()
    if X_raw.shape[0] != Y.size:
        raise ParameterError("one target per feature row")
    if metric not in ("euclidean", "manhattan"):
        raise ParameterError(f"unknown metric {metric!r}")
    n = Y.size
    k = auto_k(n, k_rule) if k is None else int(k)
    if not 1 <= k <= n:
        raise ParameterError("k must lie in [1, sample size]")
    lo = X_raw.min(axis=0)
    hi = X_raw.max(axis=0)
    keep = hi > lo
    if not keep.all():
        log.warning("dropping %d constant feature column(s)", int((~keep).sum()))
    if not keep.any():
        raise DegenerateError("every feature is constant over the training sample")
    times = np.arange(n) if times is None else np.asarray(times, int)
    model = KnnModel(np.zeros((n, int(keep.sum()))), Y, times, k, lo[keep], hi[keep], keep, horizon,
                     tuple(price_windows), tuple(volume_windows), metric)
    model.X = model.normalize(X_raw)
    return model


def knn_train(prices, volumes, horizon, sample_size, price_windows=(5, 20), volume_windows=(5,), k=None,
              metric="euclidean", k_rule="floor"):
    """Train on t' = T, ..., T + T* - 1 so every target is already realized at t = 0.

    Y(t) = P(t - T)/P(t) - 1 is the forward T-day return from t.
    """
    P = np.asarray(prices, float)
    V = np.asarray(volumes, float)
    if horizon < 1 or sample_size < 1:
        raise ParameterError("horizon and sample size must be >= 1")
    need = horizon + sample_size + max(tuple(price_windows) + tuple(volume_windows))
    if need > min(P.size, V.size):
        raise InsufficientHistoryError(f"need {need} observations, have {min(P.size, V.size)}")
    times = np.arange(horizon, horizon + sample_size)
    X = np.array([knn_feature_row(P, V, t, price_windows, volume_windows) for t in times])
    Y = P[times - horizon] / P[times] - 1.0
    return knn_fit_table(X, Y, times, k, metric, k_rule, horizon, price_windows, volume_windows)


def _neighbors(model, q, exclude=None):
    diff = model.X - q
    d = np.sqrt(np.sum(diff * diff, axis=1)) if model.metric == "euclidean" else np.sum(np.abs(diff), axis=1)
    if exclude is not None:
        d = d.copy()
        d[exclude] = np.inf
    return np.lexsort((model.times, d))[: model.k]


def knn_fit_regression(model: KnnModel, M, intercept=True):
    """Fit w and v by regressing Y(t) on its k neighbor targets for M training rows.

    Neighbors exclude the row itself. M has no default.
    """
    if not 1 <= M <= model.Y.size:
        raise ParameterError("M must lie in [1, sample size]")
    if model.k > model.Y.size - 1:
        raise ParameterError("regression needs k <= sample size - 1")
    rows = np.argsort(model.times, kind="stable")[:M]
    Z = np.array([model.Y[_neighbors(model, model.X[j], exclude=j)] for j in rows])
    A = np.column_stack([Z, np.ones(M)]) if intercept else Z
    coef, *_ = np.linalg.lstsq(A, model.Y[rows], rcond=None)
    model.w = coef[: model.k]
    model.v = float(coef[-1]) if intercept else 0.0
    return model


def knn_predict(model: KnnModel, query, mode="mean"):
    """Predicted forward return from raw (unnormalized) query features."""
    q = model.normalize(query)[0]
    idx = _neighbors(model, q)
    y = model.Y[idx]
    if mode == "mean":
        return float(y.mean())
    if mode == "regression":
        if model.w is None:
            raise ParameterError("regression coefficients are not fitted")
        return float(y @ model.w + model.v)
    raise ParameterError(f"unknown mode {mode!r}")


def knn_query(model: KnnModel, prices, volumes, t=0):
    """Raw features at time ``t`` using the model's windows."""
    return knn_feature_row(prices, volumes, t, model.price_windows, model.volume_windows)


def knn_signal(Y, z1, z2, position=0):
    """Four-branch threshold rule. ``position`` is +1 long, -1 short, 0 flat."""
    if not z1 > z2 >= 0:
        raise ParameterError("need z1 > z2 >= 0")
    if position > 0:
        return "close_long" if Y <= z2 else "hold"
    if position < 0:
        return "close_short" if Y >= -z2 else "hold"
    if Y > z1:
        return "open_long"
    if Y < -z1:
        return "open_short"
    return "none"


# ------------------------------------------------------------------- ANN


def default_lambda(tau):
    """lambda = (tau - 1)/(tau + 1)."""
    return (tau - 1) / (tau + 1)


def normalized_returns(prices, T1):
    """R_hat(t) = (R(t) - mean)/sd over R(t+1..t+T1), most recent first."""
    P = np.asarray(prices, float)
    if T1 < 2:
        raise ParameterError("T1 must be >= 2")
    R = P[:-1] / P[1:] - 1.0
    n = R.size - T1
    if n <= 0:
        raise InsufficientHistoryError("history shorter than T1 + 2 prices")
    out = np.empty(n)
    for t in range(n):
        past = R[t + 1 : t + 1 + T1]
        sd = past.std(ddof=1)
        if sd == 0:
            raise DegenerateError(f"zero volatility window at t={t}")
        out[t] = (R[t] - past.mean()) / sd
    return out


@dataclass
class AnnFeatureSpec:
    T1: int = 20
    taus: tuple = (2, 4, 12, 24)
    rsi_taus: tuple = (12, 24, 48)
    lams: tuple | None = None

    def lambdas(self):
        return tuple(default_lambda(t) for t in self.taus) if self.lams is None else tuple(self.lams)

    @property
    def width(self):
        return 1 + 2 * len(self.taus) + len(self.rsi_taus)


def ann_features(R_hat, spec: AnnFeatureSpec):
    """Feature rows for every t with full windows; returns (X, times)."""
    r = np.asarray(R_hat, float)
    span = max(tuple(spec.taus) + tuple(spec.rsi_taus))
    n = r.size - span
    if n <= 0:
        raise InsufficientHistoryError("history too short for the largest window")
    if any(t < 2 for t in spec.taus):
        raise ParameterError("EMA/EMSD windows must be >= 2")
    lams = spec.lambdas()
    rows = []
    for t in range(n):
        past = r[t + 1 :]
        row = [r[t]]
        row += [ema(past, tau, lam) for tau, lam in zip(spec.taus, lams)]
        row += [emsd(past, tau, lam) for tau, lam in zip(spec.taus, lams)]
        for tau in spec.rsi_taus:
            try:
                row.append(rsi(past, tau))
            except DegenerateError:
                row.append(0.5)
        rows.append(row)
    return np.array(rows), np.arange(n)


def quantile_classes(x, cutpoints):
    """0-based class labels; the first cutpoint closes class 1 from above."""
    q = np.asarray(cutpoints, float)
    x = np.asarray(x, float)
    c = np.searchsorted(q, x, side="right")
    return np.where(x == q[0], 0, c)


def softmax(z):
    z = np.atleast_2d(z)
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class AnnModel:
    sizes: tuple
    A: list
    B: list
    cutpoints: np.ndarray
    spec: AnnFeatureSpec = field(default_factory=AnnFeatureSpec)
    loss_history: list = field(default_factory=list)

    @property
    def K(self):
        return self.sizes[-1]

    def forward(self, X):
        """Activations of every layer; the last entry holds class probabilities."""
        acts = [np.atleast_2d(np.asarray(X, float))]
        for l, (A, B) in enumerate(zip(self.A, self.B)):
            Y = acts[-1] @ A.T + B
            acts.append(softmax(Y) if l == len(self.A) - 1 else np.maximum(Y, 0.0))
        return acts

    def predict_proba(self, X):
        return self.forward(X)[-1]

    def to_dict(self):
        return {
            "kind": "ann", "sizes": list(self.sizes), "A": [a.tolist() for a in self.A],
            "B": [b.tolist() for b in self.B], "cutpoints": np.asarray(self.cutpoints).tolist(),
            "spec": {"T1": self.spec.T1, "taus": list(self.spec.taus), "rsi_taus": list(self.spec.rsi_taus),
                     "lams": None if self.spec.lams is None else list(self.spec.lams)},
            "loss_history": list(self.loss_history),
        }

    @classmethod
    def from_dict(cls, d):
        s = d["spec"]
        spec = AnnFeatureSpec(s["T1"], tuple(s["taus"]), tuple(s["rsi_taus"]), None if s["lams"] is None else tuple(s["lams"]))
        return cls(tuple(d["sizes"]), [np.array(a, float) for a in d["A"]], [np.array(b, float) for b in d["B"]],
                   np.array(d["cutpoints"], float), spec, list(d["loss_history"]))


def init_ann(sizes, seed=0):
    """He-scaled normal weights and zero biases."""
    if len(sizes) < 2 or sizes[-1] < 2:
        raise ParameterError("need an input layer and at least 2 output classes")
    rng = np.random.default_rng(seed)
    A = [rng.normal(0.0, np.sqrt(2.0 / n_in), (n_out, n_in)) for n_in, n_out in zip(sizes[:-1], sizes[1:])]
    B = [np.zeros(n) for n in sizes[1:]]
    return AnnModel(tuple(sizes), A, B, np.zeros(sizes[-1] - 1))


def cross_entropy(p, S):
    """E = -sum_t sum_a S_a(t) ln p_a(t)."""
    return float(-np.sum(S * np.log(np.clip(p, 1e-300, None))))


def ann_loss_and_grad(model: AnnModel, X, S):
    """Cross-entropy over the batch and its gradients (dA, dB) by backpropagation."""
    acts = model.forward(X)
    loss = cross_entropy(acts[-1], S)
    delta = acts[-1] - S
    dA, dB = [], []
    for l in range(len(model.A) - 1, -1, -1):
        dA.append(delta.T @ acts[l])
        dB.append(delta.sum(axis=0))
        if l > 0:
            delta = (delta @ model.A[l]) * (acts[l] > 0)
    return loss, dA[::-1], dB[::-1]


def ann_train(prices, spec: AnnFeatureSpec | None = None, K=3, hidden=(8,), epochs=200, learning_rate=0.05,
              seed=0, train_fraction=0.6, batch_size=None, warmup=0):
    """Train the quantile classifier on the older ``train_fraction`` of rows.

    Inputs at t predict the class of R_hat(t - 1). Cutpoints come from the
    training targets after dropping the ``warmup`` oldest rows. With
    ``batch_size`` None each epoch is one full-batch gradient step.
    Returns (model, (X_val, S_val)).
    """
    spec = spec or AnnFeatureSpec()
    if K < 2:
        raise ParameterError("K must be >= 2")
    R_hat = normalized_returns(prices, spec.T1)
    X, times = ann_features(R_hat, spec)
    X, target = X[1:], R_hat[times[1:] - 1]
    n = target.size
    n_train = int(round(train_fraction * n))
    if n_train < 2 or n_train > n:
        raise InsufficientHistoryError("not enough rows for the train/validation split")
    # rows are newest first; training uses the oldest block
    tr = slice(n - n_train, n - warmup if warmup else n)
    va = slice(0, n - n_train)
    t_train = target[tr]
    if np.unique(t_train).size < K:
        raise ParameterError("K exceeds the number of distinct training targets")
    cut = np.quantile(t_train, np.arange(1, K) / K)
    S = np.eye(K)[quantile_classes(target, cut)]
    model = init_ann((X.shape[1],) + tuple(hidden) + (K,), seed)
    model.cutpoints = cut
    model.spec = spec
    fit_ann(model, X[tr], S[tr], epochs, learning_rate, seed, batch_size)
    return model, (X[va], S[va])


def fit_ann(model: AnnModel, X, S, epochs=200, learning_rate=0.05, seed=0, batch_size=None):
    """Plain gradient descent on the mean cross-entropy; records the full-sample loss per epoch."""
    X = np.atleast_2d(np.asarray(X, float))
    S = np.atleast_2d(np.asarray(S, float))
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    bs = n if batch_size is None else int(batch_size)
    for _ in range(epochs):
        order = np.arange(n) if bs >= n else rng.permutation(n)
        for s in range(0, n, bs):
            idx = order[s : s + bs]
            _, dA, dB = ann_loss_and_grad(model, X[idx], S[idx])
            for l in range(len(model.A)):
                model.A[l] -= learning_rate * dA[l] / idx.size
                model.B[l] -= learning_rate * dB[l] / idx.size
        model.loss_history.append(cross_entropy(model.predict_proba(X), S) / n)
    return model


def ann_signal(p, band=1):
    """buy when the top ``band`` classes hold the unique maximum, sell for the bottom ``band``."""
    p = np.asarray(p, float).ravel()
    K = p.size
    if not 1 <= band <= K // 2:
        raise ParameterError("band must lie in [1, K//2]")
    winners = np.flatnonzero(p == p.max())
    if winners.size > 1:
        return "hold"
    a = int(winners[0])
    if a >= K - band:
        return "buy"
    if a < band:
        return "sell"
    return "hold"


# ----------------------------------------------------------- naive Bayes


def simple_tokenize(text):
    """Lowercase alphanumeric tokens."""
    return re.findall(r"[a-z0-9]+", str(text).lower())


def presence_matrix(documents, vocabulary, tokenizer=simple_tokenize):
    """X_ia = 1 when vocabulary word a occurs in document i."""
    vocab = list(vocabulary)
    X = np.zeros((len(documents), len(vocab)), dtype=int)
    pos = {w: a for a, w in enumerate(vocab)}
    for i, doc in enumerate(documents):
        for tok in set(tokenizer(doc)):
            if tok in pos:
                X[i, pos[tok]] = 1
    return X


@dataclass
class NbModel:
    classes: list
    priors: np.ndarray
    cond: np.ndarray  # K x M, P(w_a | C_alpha)
    vocabulary: list | None = None
    smoothing: float = 1.0

    def to_dict(self):
        return {"kind": "nb", "classes": list(self.classes), "priors": self.priors.tolist(),
                "cond": self.cond.tolist(), "vocabulary": self.vocabulary, "smoothing": self.smoothing}

    @classmethod
    def from_dict(cls, d):
        return cls(list(d["classes"]), np.array(d["priors"], float), np.array(d["cond"], float),
                   d["vocabulary"], d["smoothing"])


def nb_train(X, labels, classes=None, smoothing=1.0, vocabulary=None):
    """Bernoulli naive Bayes with additive smoothing on the word conditionals."""
    X = np.atleast_2d(np.asarray(X))
    if not np.isin(X, (0, 1)).all():
        raise ParameterError("features must be 0/1 presence flags")
    labels = list(labels)
    if len(labels) != X.shape[0]:
        raise ParameterError("one label per document")
    if smoothing < 0:
        raise ParameterError("smoothing must be >= 0")
    classes = sorted(set(labels), key=str) if classes is None else list(classes)
    lab = np.array([str(l) for l in labels])
    priors, cond = [], []
    for c in classes:
        m = lab == str(c)
        n_c = int(m.sum())
        if n_c == 0:
            raise ParameterError(f"class {c!r} has no training documents")
        priors.append(n_c / len(labels))
        cond.append((X[m].sum(axis=0) + smoothing) / (n_c + 2 * smoothing))
    return NbModel(classes, np.array(priors), np.array(cond, float), vocabulary, smoothing)


def nb_posterior(model: NbModel, X, classes=None):
    """Posterior P(C | X) per row, renormalized over the model's classes.

    ``classes`` selects output columns; asking for an unseen class raises.
    """
    X = np.atleast_2d(np.asarray(X, float))
    if X.shape[1] != model.cond.shape[1]:
        raise ParameterError("feature width does not match the vocabulary")
    with np.errstate(divide="ignore"):
        lp = np.log(model.cond)
        lq = np.log1p(-model.cond)
        logpost = np.log(model.priors)[None, :] + np.where(X[:, None, :] == 1, lp[None], lq[None]).sum(axis=2)
    top = logpost.max(axis=1, keepdims=True)
    if np.any(np.isneginf(top)):
        raise DegenerateError("document has zero likelihood under every class")
    post = np.exp(logpost - top)
    post /= post.sum(axis=1, keepdims=True)
    if classes is None:
        return post
    idx = []
    for c in classes:
        if c not in model.classes:
            raise ParameterError(f"class {c!r} was not seen in training")
        idx.append(model.classes.index(c))
    return post[:, idx]


def nb_predict(model: NbModel, X):
    """argmax_C P(C) prod_a P(w_a|C)^X (1 - P(w_a|C))^(1-X); ties go to the first class."""
    post = nb_posterior(model, X)
    return [model.classes[i] for i in np.argmax(post, axis=1)]


def model_from_dict(d):
    """Rebuild any serialized model by its ``kind`` tag."""
    kinds = {"knn": KnnModel, "ann": AnnModel, "nb": NbModel}
    if d.get("kind") not in kinds:
        raise ParameterError(f"unknown model kind {d.get('kind')!r}")
    return kinds[d["kind"]].from_dict(d)

import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quantkit import ml_signals as ml
from quantkit.errors import DegenerateError, InsufficientHistoryError, ParameterError


def price_path(rng, n=400):
    return 100 * np.exp(np.cumsum(rng.normal(0, 0.01, n)))[::-1]


class TestKnn:
    def test_auto_k(self):
        assert ml.auto_k(100) == 10 and ml.auto_k(100, "ceiling") == 10
        assert ml.auto_k(10) == 3 and ml.auto_k(10, "ceiling") == 4

    def test_train_auto_k(self, rng):
        P = price_path(rng)
        V = rng.uniform(1e5, 2e5, P.size)
        m = ml.knn_train(P, V, horizon=5, sample_size=100)
        assert m.k == 10 and m.X.shape == (100, 3)
        assert m.times[0] == 5
        assert m.Y[0] == pytest.approx(P[0] / P[5] - 1)

    def test_normalization(self, rng):
        X = rng.normal(size=(30, 3))
        m = ml.knn_fit_table(X, rng.normal(size=30), k=3)
        assert np.allclose(m.X.min(axis=0), 0) and np.allclose(m.X.max(axis=0), 1)

    def test_constant_feature_dropped(self, rng, caplog):
        X = np.column_stack([rng.normal(size=20), np.ones(20)])
        with caplog.at_level("WARNING"):
            m = ml.knn_fit_table(X, rng.normal(size=20), k=2)
        assert m.keep.tolist() == [True, False] and "constant" in caplog.text
        with pytest.raises(DegenerateError):
            ml.knn_fit_table(np.ones((5, 2)), np.zeros(5), k=1)

    def test_self_query(self, rng):
        X = rng.normal(size=(25, 3))
        Y = rng.normal(size=25)
        m = ml.knn_fit_table(X, Y, k=1)
        for i in (0, 7, 24):
            assert ml.knn_predict(m, X[i]) == Y[i]

    def test_two_neighbors(self):
        m = ml.knn_fit_table([[0.0], [1.0], [10.0]], [0.02, 0.04, 0.5], k=2)
        assert ml.knn_predict(m, [0.5]) == pytest.approx(0.03)

    def test_tie_earlier_time(self):
        m = ml.knn_fit_table([[0.0], [1.0], [10.0]], [0.02, 0.04, 0.5], times=[3, 1, 2], k=1)
        assert ml.knn_predict(m, [0.5]) == 0.04

    def test_constant_targets(self, rng):
        m = ml.knn_fit_table(rng.normal(size=(20, 2)), np.full(20, 0.01), k=4)
        assert ml.knn_predict(m, [0.1, 0.2]) == pytest.approx(0.01)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 10))
    def test_mean_within_neighbor_range(self, seed, k):
        g = np.random.default_rng(seed)
        X, Y = g.normal(size=(30, 2)), g.normal(size=30)
        m = ml.knn_fit_table(X, Y, k=k, metric="manhattan" if seed % 2 else "euclidean")
        q = g.normal(size=2)
        y = m.Y[ml._neighbors(m, m.normalize(q)[0])]
        assert y.min() - 1e-15 <= ml.knn_predict(m, q) <= y.max() + 1e-15

    def test_regression_mode(self, rng):
        m = ml.knn_fit_table(rng.normal(size=(40, 2)), rng.normal(size=40), k=3)
        with pytest.raises(ParameterError):
            ml.knn_predict(m, [0.0, 0.0], "regression")
        ml.knn_fit_regression(m, 30)
        q = np.array([0.1, -0.2])
        y = m.Y[ml._neighbors(m, m.normalize(q)[0])]
        assert ml.knn_predict(m, q, "regression") == pytest.approx(y @ m.w + m.v)

    def test_insufficient(self, rng):
        with pytest.raises(InsufficientHistoryError):
            ml.knn_train(np.ones(30), np.ones(30), 5, 20)

    def test_signal(self):
        assert ml.knn_signal(0.05, 0.02, 0.01) == "open_long"
        assert ml.knn_signal(-0.05, 0.02, 0.01) == "open_short"
        assert ml.knn_signal(0.005, 0.02, 0.01, position=1) == "close_long"
        assert ml.knn_signal(-0.005, 0.02, 0.01, position=-1) == "close_short"
        assert ml.knn_signal(-0.015, 0.02, 0.01) == "none"
        assert ml.knn_signal(-0.015, 0.02, 0.01, position=-1) == "hold"
        with pytest.raises(ParameterError):
            ml.knn_signal(0.0, 0.01, 0.02)

    def test_json_round_trip(self, rng):
        m = ml.knn_fit_table(rng.normal(size=(10, 2)), rng.normal(size=10), k=2)
        back = ml.model_from_dict(json.loads(json.dumps(m.to_dict())))
        assert ml.knn_predict(back, [0.3, 0.1]) == ml.knn_predict(m, [0.3, 0.1])


class TestAnnPieces:
    def test_lambda(self):
        assert ml.default_lambda(3) == 0.5

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000))
    def test_softmax(self, seed):
        z = np.random.default_rng(seed).normal(0, 20, (4, 5))
        p = ml.softmax(z)
        assert np.all(p >= 0) and np.allclose(p.sum(axis=1), 1.0, atol=1e-12)

    def test_uniform_output(self, rng):
        m = ml.init_ann((4, 3, 3))
        m.A[0][:] = 0
        p = m.predict_proba(rng.normal(size=(5, 4)))
        assert np.allclose(p, 1 / 3, atol=1e-15)

    def test_gradient_fd(self, rng):
        m = ml.init_ann((3, 2, 2), seed=1)
        m.B[0][:] = 0.5  # keep the hidden units active
        X = rng.normal(size=(6, 3))
        S = np.eye(2)[rng.integers(0, 2, 6)]
        _, dA, dB = ml.ann_loss_and_grad(m, X, S)
        h = 1e-6
        for params, grads in ((m.A, dA), (m.B, dB)):
            for P, G in zip(params, grads):
                for idx in np.ndindex(P.shape):
                    old = P[idx]
                    P[idx] = old + h
                    up = ml.ann_loss_and_grad(m, X, S)[0]
                    P[idx] = old - h
                    dn = ml.ann_loss_and_grad(m, X, S)[0]
                    P[idx] = old
                    fd = (up - dn) / (2 * h)
                    assert abs(G[idx] - fd) <= 1e-4 * max(abs(fd), 1e-6)

    def test_quantile_classes(self):
        assert ml.quantile_classes([-1.0, 0.0, 0.5, 1.0, 2.0], [0.0, 1.0]).tolist() == [0, 0, 1, 2, 2]

    def test_normalized_returns(self, rng):
        P = price_path(rng, 60)
        r = ml.normalized_returns(P, 20)
        R = P[:-1] / P[1:] - 1
        past = R[1:21]
        assert r[0] == pytest.approx((R[0] - past.mean()) / past.std(ddof=1))
        with pytest.raises(DegenerateError):
            ml.normalized_returns(np.full(40, 5.0), 10)

    def test_signal(self):
        assert ml.ann_signal([0.1, 0.2, 0.7]) == "buy"
        assert ml.ann_signal([0.6, 0.3, 0.1]) == "sell"
        assert ml.ann_signal([1 / 3] * 3) == "hold"
        assert ml.ann_signal([0.1, 0.6, 0.3]) == "hold"
        assert ml.ann_signal([0.1, 0.1, 0.3, 0.5], band=2) == "buy"


class TestAnnTrain:
    def test_deterministic_and_descending(self, rng):
        P = price_path(rng, 300)
        spec = ml.AnnFeatureSpec(T1=10, taus=(2, 4), rsi_taus=(6,))
        a, (Xv, Sv) = ml.ann_train(P, spec, K=3, hidden=(4,), epochs=60, learning_rate=0.05, seed=3)
        b, _ = ml.ann_train(P, spec, K=3, hidden=(4,), epochs=60, learning_rate=0.05, seed=3)
        assert all(np.array_equal(x, y) for x, y in zip(a.A, b.A))
        assert np.all(np.diff(a.loss_history) <= 1e-12)
        assert Xv.shape[1] == spec.width and np.allclose(Sv.sum(axis=1), 1)
        assert a.cutpoints.size == 2

    def test_errors(self, rng):
        with pytest.raises(ParameterError):
            ml.ann_train(price_path(rng, 200), K=1)

    def test_json_round_trip(self, rng):
        m = ml.init_ann((3, 4, 2), seed=2)
        back = ml.model_from_dict(json.loads(json.dumps(m.to_dict())))
        X = rng.normal(size=(3, 3))
        assert np.array_equal(back.predict_proba(X), m.predict_proba(X))


def brute_posterior(X, labels, doc):
    """Bayes rule on the raw frequency estimates, enumerated class by class."""
    X, labels = np.asarray(X), np.asarray(labels)
    joint = {}
    for c in sorted(set(labels.tolist())):
        rows = X[labels == c]
        p = len(rows) / len(X)
        for a, x in enumerate(doc):
            f = rows[:, a].mean()
            p *= f if x else 1 - f
        joint[c] = p
    tot = sum(joint.values())
    return np.array([joint[c] / tot for c in sorted(joint)])


class TestNaiveBayes:
    def test_hand(self):
        m = ml.NbModel(["pos", "neg"], np.array([0.5, 0.5]), np.array([[0.9], [0.1]]))
        assert np.allclose(ml.nb_posterior(m, [[1]]), [[0.9, 0.1]])
        assert ml.nb_predict(m, [[1], [0]]) == ["pos", "neg"]

    def test_symmetric_neutral(self):
        m = ml.NbModel(["a", "b"], np.array([0.5, 0.5]), np.array([[0.8, 0.3], [0.3, 0.8]]))
        assert np.allclose(ml.nb_posterior(m, [[1, 1], [0, 0]]), 0.5)

    def test_brute_force(self):
        X = [[1, 0, 1], [1, 1, 0], [0, 1, 1], [1, 0, 0]]
        labels = ["up", "up", "down", "down"]
        m = ml.nb_train(X, labels, smoothing=0.0)
        for doc in itertools.product((0, 1), repeat=3):
            want = brute_posterior(X, labels, doc)
            if not np.isfinite(want).all():
                continue
            got = ml.nb_posterior(m, [doc], classes=["down", "up"])[0]
            assert np.allclose(got, want, atol=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_duplicate_corpus(self, seed):
        g = np.random.default_rng(seed)
        X = g.integers(0, 2, (12, 4))
        labels = ["a"] * 6 + ["b"] * 6
        q = g.integers(0, 2, (5, 4))
        one = ml.nb_train(X, labels, smoothing=0.0)
        two = ml.nb_train(np.vstack([X, X]), labels * 2, smoothing=0.0)
        try:
            p1 = ml.nb_posterior(one, q)
        except DegenerateError:
            return
        assert np.allclose(ml.nb_posterior(two, q), p1, atol=1e-14)

    def test_laplace_default(self):
        m = ml.nb_train([[1], [1]], ["a", "b"])
        assert m.cond.tolist() == [[2 / 3], [2 / 3]]
        assert np.all((m.cond > 0) & (m.cond < 1)) and m.priors.sum() == 1.0

    def test_unseen_class(self):
        m = ml.nb_train([[1], [0]], ["a", "b"])
        with pytest.raises(ParameterError):
            ml.nb_posterior(m, [[1]], classes=["c"])

    def test_tokenize_and_presence(self):
        X = ml.presence_matrix(["Stock UP, up!", "down day"], ["up", "down", "flat"])
        assert X.tolist() == [[1, 0, 0], [0, 1, 0]]

    def test_json_round_trip(self):
        m = ml.nb_train([[1, 0], [0, 1], [1, 1]], ["a", "b", "a"], vocabulary=["x", "y"])
        back = ml.model_from_dict(json.loads(json.dumps(m.to_dict())))
        assert np.array_equal(back.cond, m.cond) and back.classes == m.classes
        with pytest.raises(ParameterError):
            ml.model_from_dict({"kind": "svm"})

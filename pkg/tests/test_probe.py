import numpy as np
import pytest

from eegbench import metrics as mx
from eegbench.errors import DegenerateInput, DimensionMismatch
from eegbench.probe import (
    EmbeddingSet,
    LinearProbe,
    ProbeModel,
    cross_entropy,
    gradient,
    predict_proba,
    softmax,
    train_probe,
)


def gaussian_blobs(n_train=200, n_test=100, d=8, margin=6.0, seed=0):
    rng = np.random.default_rng(seed)
    mu1 = np.zeros(d)
    mu2 = np.zeros(d)
    mu2[0] = margin
    half_tr, half_te = n_train // 2, n_test // 2
    X = np.vstack([rng.normal(mu1, 1, (half_tr, d)), rng.normal(mu2, 1, (half_tr, d))])
    y = np.array([0] * half_tr + [1] * half_tr)
    Xt = np.vstack([rng.normal(mu1, 1, (half_te, d)), rng.normal(mu2, 1, (half_te, d))])
    yt = np.array([0] * half_te + [1] * half_te)
    return X, y, Xt, yt


def embedding_set(X, y, tag="toy"):
    return EmbeddingSet(features=X, labels=y,
                        subject_ids=["s"] * len(y),
                        epoch_ids=np.arange(len(y)), model_tag=tag)


class TestSoftmaxHead:
    def test_zero_parameters_give_uniform(self):
        model = ProbeModel(W=np.zeros((4, 3)), b=np.zeros(4), n_classes=4)
        proba = predict_proba(model, np.random.default_rng(0).normal(0, 1, (5, 3)))
        assert np.allclose(proba, 0.25)

    def test_large_bias_dominates(self):
        model = ProbeModel(W=np.zeros((5, 3)), b=np.array([10.0, 0, 0, 0, 0]),
                           n_classes=5)
        proba = predict_proba(model, np.zeros((1, 3)))
        assert proba[0, 0] > 0.999

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(1)
        model = ProbeModel(W=rng.normal(0, 2, (3, 6)), b=rng.normal(0, 2, 3),
                           n_classes=3)
        proba = predict_proba(model, rng.normal(0, 3, (20, 6)))
        assert np.all(np.abs(proba.sum(axis=1) - 1.0) < 1e-9)
        assert np.all((proba > 0) & (proba < 1))

    def test_dimension_mismatch(self):
        model = ProbeModel(W=np.zeros((2, 4)), b=np.zeros(2), n_classes=2)
        with pytest.raises(DimensionMismatch):
            predict_proba(model, np.zeros((3, 5)))


class TestGradient:
    def test_finite_difference_agreement(self):
        rng = np.random.default_rng(2)
        h = 1e-5
        worst = 0.0
        for _ in range(20):
            W = rng.normal(0, 1, (4, 5))
            b = rng.normal(0, 1, 4)
            X = rng.normal(0, 1, (5, 5))
            y = rng.integers(0, 4, 5)
            model = ProbeModel(W=W, b=b, n_classes=4)
            gW, gb = gradient(model, X, y, weight_decay=0.1)
            for idx in [(0, 0), (1, 2), (3, 4)]:
                for sign, ref in ((1, None),):
                    Wp, Wm = W.copy(), W.copy()
                    Wp[idx] += h
                    Wm[idx] -= h
                    fd = (cross_entropy(ProbeModel(Wp, b, 4), X, y, 0.1)
                          - cross_entropy(ProbeModel(Wm, b, 4), X, y, 0.1)) / (2 * h)
                    worst = max(worst, abs(fd - gW[idx]) / max(abs(fd), 1e-8))
            for j in range(4):
                bp, bm = b.copy(), b.copy()
                bp[j] += h
                bm[j] -= h
                fd = (cross_entropy(ProbeModel(W, bp, 4), X, y, 0.1)
                      - cross_entropy(ProbeModel(W, bm, 4), X, y, 0.1)) / (2 * h)
                worst = max(worst, abs(fd - gb[j]) / max(abs(fd), 1e-8))
        assert worst < 1e-5

    def test_single_sample_binary_closed_form(self):
        W = np.array([[0.5, -0.2], [0.1, 0.3]])
        b = np.array([0.05, -0.05])
        x = np.array([[1.5, -2.0]])
        y = np.array([1])
        model = ProbeModel(W=W, b=b, n_classes=2)
        p = softmax(x @ W.T + b)[0]
        expected_W = np.outer(p - np.array([0.0, 1.0]), x[0])
        gW, gb = gradient(model, x, y)
        assert np.allclose(gW, expected_W, atol=1e-12)
        assert np.allclose(gb, p - np.array([0.0, 1.0]), atol=1e-12)

    def test_gradient_vanishes_on_confident_fit(self):
        X = np.array([[-5.0], [5.0]])
        y = np.array([0, 1])
        norms = []
        for scale in (1.0, 10.0, 100.0):
            model = ProbeModel(W=np.array([[-scale], [scale]]), b=np.zeros(2),
                               n_classes=2)
            gW, gb = gradient(model, X, y)
            norms.append(np.linalg.norm(gW) + np.linalg.norm(gb))
        assert norms[0] > norms[1] > norms[2]
        assert norms[2] < 1e-8


class TestTraining:
    def test_separable_blobs_reach_high_bac(self):
        X, y, Xt, yt = gaussian_blobs()
        probe = LinearProbe(lr=0.1, max_epochs=30, seed=0).fit(X, y)
        cm = mx.confusion_matrix(yt, probe.predict(Xt), 2)
        assert mx.balanced_accuracy(cm) >= 0.99

    def test_constant_labels_yield_constant_predictor(self):
        rng = np.random.default_rng(3)
        X = rng.normal(0, 1, (40, 6))
        y = np.ones(40, dtype=int)
        probe = LinearProbe(lr=0.05, max_epochs=10, seed=0).fit(X, y, n_classes=3)
        Xt = rng.normal(0, 1, (30, 6))
        assert np.all(probe.predict(Xt) == 1)
        # BAC on a balanced test set equals 1/K
        yt = np.array([0] * 10 + [1] * 10 + [2] * 10)
        cm = mx.confusion_matrix(yt, probe.predict(Xt), 3)
        assert mx.balanced_accuracy(cm) == pytest.approx(1 / 3)

    def test_dimension_mismatch_train_val(self):
        X, y, _, _ = gaussian_blobs()
        train = embedding_set(X, y)
        val = embedding_set(X[:, :4], y)
        with pytest.raises(DimensionMismatch):
            train_probe(train, val, {})

    def test_degenerate_input(self):
        with pytest.raises(DegenerateInput):
            LinearProbe().fit(np.zeros((2, 3)), np.array([0, 1]), n_classes=4)

    def test_determinism(self):
        X, y, _, _ = gaussian_blobs(seed=5)
        a = LinearProbe(lr=0.05, max_epochs=20, seed=7).fit(X, y).model_
        b = LinearProbe(lr=0.05, max_epochs=20, seed=7).fit(X, y).model_
        assert np.array_equal(a.W, b.W)
        assert np.array_equal(a.b, b.b)

    def test_full_batch_loss_monotone(self):
        X, y, _, _ = gaussian_blobs(seed=8)
        probe = LinearProbe(lr=0.01, max_epochs=60, batch_size=len(X), seed=0,
                            warmup_frac=0.0, patience=100)
        probe.fit(X, y)
        train_losses = [t for t, _ in probe.model_.train_log[:50]]
        assert all(b < a for a, b in zip(train_losses, train_losses[1:]))

    def test_bias_shift_leaves_argmax_unchanged(self):
        rng = np.random.default_rng(9)
        model = ProbeModel(W=rng.normal(0, 1, (3, 4)), b=rng.normal(0, 1, 3),
                           n_classes=3)
        X = rng.normal(0, 1, (25, 4))
        base = predict_proba(model, X).argmax(axis=1)
        shifted = ProbeModel(W=model.W, b=model.b + 3.7, n_classes=3)
        assert np.array_equal(predict_proba(shifted, X).argmax(axis=1), base)

    def test_best_validation_checkpoint_kept(self):
        X, y, Xv, yv = gaussian_blobs(seed=11)
        probe = LinearProbe(lr=0.1, max_epochs=30, seed=0)
        probe.fit(X, y, Xv, yv)
        val_losses = [v for _, v in probe.model_.train_log]
        model = probe.model_
        Xv_std = (Xv - model.feature_mean) / model.feature_scale
        final_val = cross_entropy(ProbeModel(model.W, model.b, 2), Xv_std, yv)
        assert final_val == pytest.approx(min(val_losses), abs=1e-9)

    def test_sklearn_param_interface(self):
        probe = LinearProbe(lr=0.3)
        assert probe.get_params()["lr"] == 0.3
        probe.set_params(max_epochs=5)
        assert probe.max_epochs == 5


class TestEmbeddingSet:
    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            EmbeddingSet(features=np.array([[np.nan, 1.0]]), labels=np.array([0]),
                         subject_ids=["s"], epoch_ids=np.array([0]))

    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError):
            EmbeddingSet(features=np.ones((2, 2)), labels=np.array([0, 5]),
                         subject_ids=["s", "s"], epoch_ids=np.arange(2), n_classes=2)

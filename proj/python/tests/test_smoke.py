import json
import math

import numpy as np
import pytest

import mfnet


def small_data(n=4, d=3, seed=1):
    X, y = mfnet.synthetic_dataset(n, d, seed)
    return np.asarray(X), np.asarray(y)


def test_dataset_is_bounded_and_reproducible():
    X, y = small_data()
    assert X.shape == (4, 3)
    assert y.shape == (4,)
    assert np.abs(X).max() <= 1.0
    X2, _ = small_data()
    assert np.array_equal(X, X2)


def test_activation_values():
    v, dv = mfnet.activation("tanh", np.array([0.0, 1.0]))
    assert np.allclose(v, np.tanh([0.0, 1.0]))
    assert np.allclose(dv, 1.0 - np.tanh([0.0, 1.0]) ** 2)


def test_dnn_forward_matches_numpy():
    X, y = small_data()
    W = mfnet.init_dnn(X, y, [8, 8], scheme="standard", seed=3)
    theta, out = mfnet.dnn_forward(W, X, y)
    t1 = X @ W[0] / X.shape[1]
    t2 = np.tanh(t1) @ W[1] / 8
    assert np.allclose(theta[1], t1)
    assert np.allclose(theta[2], t2)
    assert np.allclose(out, np.tanh(t2) @ W[2][:, 0] / 8)


def test_regression_init_preserves_features():
    X, y = small_data()
    standard = mfnet.init_dnn(X, y, [16, 16], scheme="standard", seed=5)
    regressed = mfnet.init_dnn(X, y, [16, 16], scheme="regression", seed=5)
    a, _ = mfnet.dnn_forward(standard, X, y)
    b, _ = mfnet.dnn_forward(regressed, X, y)
    assert np.abs(a[2] - b[2]).max() < 1e-8


def test_training_reduces_loss():
    X, y = small_data()
    W = mfnet.init_dnn(X, y, [16, 16], seed=2)
    _, records = mfnet.train_dnn(W, X, y, eta=0.05, steps=50)
    assert records[-1]["loss"] < records[0]["loss"]


def test_resnet_training_respects_skip_bound():
    X, y = small_data(8, 4)
    V = mfnet.init_resnet(X, y, width=32, L=3, seed=4)
    _, records = mfnet.train_resnet(V, X, y, eta=0.01, steps=20, loss="squared")
    assert all(r["skip"] <= 1.0 for r in records)
    _, _, skip = mfnet.resnet_forward(V, X, y)
    assert skip <= 1.0


def test_gram_chain_first_layer_is_data_gram():
    X, _ = small_data()
    K = mfnet.gram_chain(X, 1.0, 3)
    assert len(K) == 3
    assert np.allclose(K[0], X @ X.T / X.shape[1])


def test_eps1_audit_is_finite():
    X, y = small_data(4, 8)
    r = mfnet.eps1_dnn(X, y, [64, 64, 64], sigma1=2.0)
    assert math.isfinite(r["eps1"]) and r["eps1"] > 0.0


def test_audit_study_passes():
    report = mfnet.run_study("audit")
    assert report["passed"]
    assert report["verdicts"]


def test_custom_study_config():
    config = json.loads(mfnet.default_config("gram"))
    config["m_grid"] = [32, 64, 128]
    config["tolerances"]["replicates"] = 1
    report = mfnet.run_study("gram", json.dumps(config))
    assert len(report["rows"]) == 3
    assert report["slope"] is not None


def test_errors_map_to_python_exceptions():
    X, y = small_data()
    with pytest.raises(ValueError):
        mfnet.run_study("nonexistent")
    with pytest.raises(ValueError):
        mfnet.activation("relu", np.zeros(2))
    with pytest.raises(ArithmeticError):
        mfnet.init_dnn(*small_data(8, 3), [2, 2], scheme="regression")

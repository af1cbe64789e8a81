import json
import math

import numpy as np
import pytest

from hasqoe.errors import ModelFormatError
from hasqoe.svr import (
    SvrHyperparams,
    SvrModel,
    load_model,
    predict,
    predict_batch,
    save_model,
    train,
    train_with_diagnostics,
)


def smooth_dataset(n=200, d=8, seed=0):
    """Smooth monotone function of the features plus nothing else."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(n, d))
    y = (
        30.0
        + 10.0 * X[:, 0]
        + 6.0 * np.tanh(2.0 * X[:, 1])
        + 4.0 * X[:, 2] ** 3
        + 2.0 * X[:, 3]
    )
    return X, y


def test_constant_targets_give_constant_model(caplog):
    X = np.random.default_rng(0).uniform(-1, 1, (10, 4))
    with caplog.at_level("WARNING"):
        model = train(X, np.full(10, 55.0))
    assert model.support_vectors.shape[0] == 0
    assert predict(model, [9.0, -9.0, 0.0, 1.0]) == 55.0
    assert any("identical" in r.message for r in caplog.records)


def test_single_support_vector_kernel_peak():
    mean = np.zeros(3)
    std = np.ones(3)
    v = np.array([0.5, -1.0, 2.0])
    model = SvrModel(
        support_vectors=v[None, :], dual_coefs=np.array([1.0]), bias=0.0, gamma=0.7,
        c=2.0, epsilon=0.1, scaler_mean=mean, scaler_std=std, feature_order_tag="t",
    )
    assert predict(model, v) == pytest.approx(1.0, abs=0)


def test_bias_only_model():
    model = SvrModel(
        support_vectors=np.empty((0, 4)), dual_coefs=np.empty(0), bias=42.0, gamma=0.1,
        c=1.0, epsilon=0.1, scaler_mean=np.zeros(4), scaler_std=np.ones(4),
        feature_order_tag="t",
    )
    for x in ([0, 0, 0, 0], [5, -3, 2, 1]):
        assert predict(model, x) == 42.0


def test_two_support_vector_fixture():
    sv = np.array([[0.0, 0.0], [1.0, 1.0]])
    coefs = np.array([0.5, -0.25])
    gamma = 0.3
    model = SvrModel(
        support_vectors=sv, dual_coefs=coefs, bias=1.5, gamma=gamma, c=1.0, epsilon=0.1,
        scaler_mean=np.zeros(2), scaler_std=np.ones(2), feature_order_tag="t",
    )
    x = np.array([0.25, -0.5])
    expected = (
        0.5 * math.exp(-gamma * ((0.25) ** 2 + 0.5**2))
        - 0.25 * math.exp(-gamma * ((0.75) ** 2 + 1.5**2))
        + 1.5
    )
    assert predict(model, x) == pytest.approx(expected, abs=1e-12)


def test_smooth_function_held_out_srocc():
    from hasqoe.correlation import srocc

    X, y = smooth_dataset()
    model = train(X[:160], y[:160], SvrHyperparams(c=10.0))
    predictions = predict_batch(model, X[160:])
    assert srocc(predictions.tolist(), y[160:].tolist()) >= 0.9


def test_duplicated_dataset_matches_single_copy():
    # With every dual coefficient interior to the box, the optimum function
    # is determined by the tube conditions alone, so duplicating each row
    # must not move predictions. (At the box bound the duplicated problem
    # has twice the capacity per unique point and genuinely differs.)
    X, y = smooth_dataset(n=40, seed=3)
    tight = SvrHyperparams(c=100.0, tol=1e-8)
    single = train(X, y, tight)
    assert np.all(np.abs(single.dual_coefs) < 100.0 * (1 - 1e-6)), "need an interior solution"
    doubled = train(np.vstack([X, X]), np.concatenate([y, y]), tight)
    probe = np.random.default_rng(1).uniform(-1, 1, (25, X.shape[1]))
    assert np.max(np.abs(predict_batch(single, probe) - predict_batch(doubled, probe))) <= 1e-6


def test_smo_contracts_on_seeded_problems():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(10, 40))
        X = rng.uniform(-2, 2, size=(n, 5))
        y = 10.0 * np.sin(X[:, 0]) + X[:, 1] ** 2 + rng.normal(0, 0.3, n)
        hp = SvrHyperparams(c=float(rng.uniform(0.5, 20.0)))
        model, diag = train_with_diagnostics(X, y, hp)
        assert diag.converged

        # dual objective never increases across iterations
        trace = np.array(diag.objective_trace)
        assert np.all(np.diff(trace) <= 1e-9 * (1.0 + np.abs(trace[:-1])))

        # equality constraint of the dual
        assert abs(model.dual_coefs.sum()) <= 1e-6 * hp.c

        # box constraint
        assert np.all(np.abs(model.dual_coefs) <= hp.c * (1 + 1e-9))

        # non-bound support vectors sit within epsilon + tolerance of y
        scaled = (X - model.scaler_mean) / model.scaler_std
        predictions = predict_batch(model, X)
        for k, coef in enumerate(model.dual_coefs):
            if abs(coef) < hp.c * (1 - 1e-6):
                row = np.where((scaled == model.support_vectors[k]).all(axis=1))[0]
                for idx in row:
                    assert abs(predictions[idx] - y[idx]) <= model.epsilon + 1e-2


def test_prediction_continuity():
    X, y = smooth_dataset(n=60, seed=9)
    model = train(X, y, SvrHyperparams(c=5.0))
    x = X[7]
    base = predict(model, x)
    for _ in range(10):
        delta = np.random.default_rng(0).normal(0, 1, x.shape)
        delta = 1e-8 * delta / np.linalg.norm(delta)
        assert abs(predict(model, x + delta) - base) <= 1e-4


def test_prediction_invariant_to_support_vector_order(tmp_path):
    X, y = smooth_dataset(n=50, seed=4)
    model = train(X, y, SvrHyperparams(c=3.0))
    order = np.random.default_rng(5).permutation(model.support_vectors.shape[0])
    shuffled = SvrModel(
        support_vectors=model.support_vectors[order],
        dual_coefs=model.dual_coefs[order],
        bias=model.bias, gamma=model.gamma, c=model.c, epsilon=model.epsilon,
        scaler_mean=model.scaler_mean, scaler_std=model.scaler_std,
        feature_order_tag=model.feature_order_tag,
    )
    probe = np.random.default_rng(6).uniform(-1, 1, (20, X.shape[1]))
    assert np.max(np.abs(predict_batch(model, probe) - predict_batch(shuffled, probe))) <= 1e-9


def test_save_load_round_trip_bit_exact(tmp_path):
    X, y = smooth_dataset(n=50, seed=7)
    model = train(X, y, SvrHyperparams(c=2.0), feature_order_tag="layout-v1")
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    probe = np.random.default_rng(8).uniform(-1, 1, (30, X.shape[1]))
    assert np.array_equal(predict_batch(model, probe), predict_batch(loaded, probe))
    assert loaded.feature_order_tag == "layout-v1"


def test_load_rejects_tampered_field_count(tmp_path):
    X, y = smooth_dataset(n=30, seed=2)
    model = train(X, y)
    path = tmp_path / "model.json"
    save_model(model, path)
    doc = json.loads(path.read_text())
    doc["support_vectors"][0] = doc["support_vectors"][0][:-1]  # ragged row
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError):
        load_model(path)
    doc = json.loads(path.read_text())
    del doc["scaler_std"]
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError, match="missing"):
        load_model(path)


def test_load_rejects_version_mismatch(tmp_path):
    X, y = smooth_dataset(n=30, seed=2)
    path = tmp_path / "model.json"
    save_model(train(X, y), path)
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError, match="version"):
        load_model(path)


def test_predict_feature_tag_mismatch():
    model = SvrModel(
        support_vectors=np.empty((0, 2)), dual_coefs=np.empty(0), bias=0.0, gamma=0.5,
        c=1.0, epsilon=0.1, scaler_mean=np.zeros(2), scaler_std=np.ones(2),
        feature_order_tag="layout-a",
    )
    with pytest.raises(ModelFormatError, match="layout"):
        predict(model, [0.0, 0.0], expected_tag="layout-b")


def test_train_input_validation():
    with pytest.raises(ValueError, match="samples"):
        train(np.zeros((1, 3)), np.zeros(1))
    with pytest.raises(ValueError, match="targets"):
        train(np.zeros((4, 3)), np.zeros(5))
    with pytest.raises(ValueError, match="finite"):
        train(np.array([[np.inf, 0.0], [0.0, 1.0]]), np.zeros(2))

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from hhtshm.exceptions import RankDeficientError
from hhtshm.rbf import RBFNetwork, TrainConfig, predict, train


def distinct_inputs(n=40, d=3, seed=0):
    return np.random.default_rng(seed).uniform(-2, 2, size=(n, d))


def sin_data():
    x = np.linspace(0, 2 * np.pi, 50)[:, None]
    return x, np.sin(x[:, 0])


def test_exact_interpolation():
    X = distinct_inputs()
    y = np.random.default_rng(1).normal(size=(40, 2))
    net = train(X, y, TrainConfig("all", 0.0))
    assert np.max(np.abs(net.predict(X) - y)) <= 1e-8


def test_constant_target_reproduced_everywhere():
    X = distinct_inputs()
    net = train(X, np.full(40, 3.25), TrainConfig("all", 1e-8))
    probe = np.random.default_rng(5).uniform(-10, 10, size=(100, 3))
    assert np.max(np.abs(net.predict(probe) - 3.25)) <= 1e-8


def test_sine_held_out():
    x, y = sin_data()
    net = train(x, y, TrainConfig(25, 1e-8, seed=0))
    xt = np.linspace(0.05, 2 * np.pi - 0.05, 301)[:, None]
    rmse = np.sqrt(np.mean((net.predict(xt) - np.sin(xt[:, 0])) ** 2))
    assert rmse < 0.01


def test_predict_single_vector_at_training_point():
    X = distinct_inputs(20, 2)
    y = np.sin(X).sum(axis=1)
    net = train(X, y, TrainConfig("all", 0.0))
    assert predict(net, X[7]) == pytest.approx([y[7]], abs=1e-6)
    with pytest.raises(ValueError):
        predict(net, np.zeros(3))


def test_far_input_returns_bias():
    X = distinct_inputs(20, 2)
    net = train(X, X[:, 0] ** 2, TrainConfig("all", 1e-8))
    far = net.predict(np.array([[1e6, -1e6]]))
    bias_scaled = net.weights_[-1:]
    expected = net.output_scaler_.inverse_transform(bias_scaled)[0, 0]
    assert far[0] == pytest.approx(expected, abs=1e-9)


def test_fitted_values_match_normal_equations():
    X = distinct_inputs(60, 2, seed=3)
    y = np.cos(X[:, 0]) * X[:, 1]
    net = train(X, y, TrainConfig(12, 1e-4, seed=1))
    # independent re-solve in scaled space: penalised weights, free bias
    Xs = net.input_scaler_.transform(X)
    ys = net.output_scaler_.transform(y[:, None])
    d2 = ((Xs[:, None, :] - net.centers_[None, :, :]) ** 2).sum(-1)
    Phi = np.exp(-d2 / (2 * net.width_**2))
    A = np.hstack([Phi, np.ones((60, 1))])
    reg = np.diag(np.r_[np.full(12, 1e-4), 0.0])
    w = np.linalg.solve(A.T @ A + reg, A.T @ ys)
    fitted = net.output_scaler_.inverse_transform(A @ w)[:, 0]
    assert np.max(np.abs(net.predict(X) - fitted)) <= 1e-9


def test_training_loss_non_increasing_as_ridge_shrinks():
    X = distinct_inputs(50, 2, seed=4)
    y = np.tanh(X[:, 0] - X[:, 1])
    losses = [train(X, y, TrainConfig(20, r, seed=0)).training_loss_ for r in (1e-2, 1e-4, 1e-8)]
    assert losses[0] >= losses[1] >= losses[2]


@given(st.floats(0.01, 100), st.floats(-50, 50))
def test_affine_input_rescaling_invariance(scale, shift):
    X = distinct_inputs(30, 2, seed=6)
    y = np.sin(X[:, 0]) + X[:, 1]
    probe = distinct_inputs(10, 2, seed=7) * 0.9
    a = train(X, y, TrainConfig("all", 1e-8)).predict(probe)
    b = train(X * scale + shift, y, TrainConfig("all", 1e-8)).predict(probe * scale + shift)
    assert np.max(np.abs(a - b)) <= 1e-8 * max(1.0, np.max(np.abs(a)))


def test_predict_is_deterministic():
    X = distinct_inputs()
    net = train(X, X[:, 0], TrainConfig(10, 1e-6, seed=2))
    assert np.array_equal(net.predict(X), net.predict(X))
    net2 = train(X, X[:, 0], TrainConfig(10, 1e-6, seed=2))
    assert np.array_equal(net.weights_, net2.weights_)


def test_rank_deficient_zero_ridge():
    X = np.repeat(distinct_inputs(5, 2), 3, axis=0)
    with pytest.raises(RankDeficientError):
        train(X, X[:, 0] + 0.1 * np.arange(15), TrainConfig("all", 0.0))


def test_linear_tail_extrapolates_affinely():
    X = distinct_inputs(60, 2, seed=8)
    y = 2 * X[:, 0] - X[:, 1]
    net = train(X, y, TrainConfig(1, 1e-8, linear_tail=True))
    far = np.array([[6.0, -6.0]])
    assert net.predict(far)[0] == pytest.approx(18.0, rel=1e-6)


def test_save_load_roundtrip(tmp_path):
    X = distinct_inputs()
    net = train(X, np.sin(X), TrainConfig(8, 1e-6, seed=3, linear_tail=True))
    path = tmp_path / "net.json"
    net.save(path)
    again = RBFNetwork.load(path)
    assert np.array_equal(again.predict(X), net.predict(X))


def test_sklearn_protocol():
    X, y = sin_data()
    net = RBFNetwork(n_centers=10, ridge=1e-6)
    assert clone(net).get_params()["n_centers"] == 10
    assert net.fit(X, y).score(X, y) > 0.999
    assert net.predict(X).shape == (50,)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(n_centers=0)
    with pytest.raises(ValueError):
        TrainConfig(ridge=-1)
    with pytest.raises(ValueError):
        RBFNetwork().fit(np.zeros((3, 2)), np.zeros(4))

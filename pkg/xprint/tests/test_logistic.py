from contextlib import contextmanager

import numpy as np
import pytest
from sklearn.utils.validation import check_is_fitted

from ..logistic import LogisticGate, loss_and_gradient, train_logistic

rng = np.random.RandomState(0)
H = np.vstack([rng.normal(0.8, 0.1, size=(80, 3)),
               rng.normal(0.2, 0.1, size=(80, 3))])
y = np.array([1] * 80 + [0] * 80)


@contextmanager
def no_raise():
    yield


@pytest.mark.parametrize("learning_rate,raises",
                         [(0.1, no_raise()),
                          (2, no_raise()),
                          (0, pytest.raises(ValueError)),
                          (-1.0, pytest.raises(ValueError)),
                          ("fast", pytest.raises(TypeError))])
def test_learning_rate(learning_rate, raises):
    model = LogisticGate(learning_rate=learning_rate, epochs=10)
    with raises:
        model.fit(H, y)
        check_is_fitted(model)


@pytest.mark.parametrize("epochs,raises",
                         [(1, no_raise()),
                          (0, pytest.raises(ValueError)),
                          (1.5, pytest.raises(TypeError))])
def test_epochs(epochs, raises):
    model = LogisticGate(epochs=epochs)
    with raises:
        model.fit(H, y)
        check_is_fitted(model)


@pytest.mark.parametrize("class_weight,raises",
                         [(None, no_raise()),
                          ("balanced", no_raise()),
                          ("auto", pytest.raises(ValueError))])
def test_class_weight(class_weight, raises):
    model = LogisticGate(epochs=5, class_weight=class_weight)
    with raises:
        model.fit(H, y)


def test_rejects_non_binary_labels():
    with pytest.raises(ValueError):
        LogisticGate(epochs=5).fit(H, np.arange(160) % 3)


def test_gradient_matches_finite_differences():
    w = np.array([0.3, -0.2, 0.5])
    b = 0.1
    weights = rng.uniform(0.5, 2.0, size=y.size)
    _, grad_w, grad_b = loss_and_gradient(w, b, H, y, weights, l2=0.01)
    eps = 1e-6
    for k in range(3):
        step = np.zeros(3)
        step[k] = eps
        up = loss_and_gradient(w + step, b, H, y, weights, 0.01)[0]
        down = loss_and_gradient(w - step, b, H, y, weights, 0.01)[0]
        assert grad_w[k] == pytest.approx((up - down) / (2 * eps), abs=1e-6)
    up = loss_and_gradient(w, b + eps, H, y, weights, 0.01)[0]
    down = loss_and_gradient(w, b - eps, H, y, weights, 0.01)[0]
    assert grad_b == pytest.approx((up - down) / (2 * eps), abs=1e-6)


def test_loss_at_zero_weights_is_log_two():
    loss, _, _ = loss_and_gradient(np.zeros(3), 0.0, H, y)
    assert loss == pytest.approx(np.log(2.0))


def test_training_separates_classes():
    model = train_logistic(H, y, {"epochs": 500}, class_weight="balanced")
    assert model.loss_curve_[-1] < model.loss_curve_[0]
    assert model.score(H, y) > 0.95
    proba = model.predict_proba(H)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert proba[:80, 1].mean() > proba[80:, 1].mean()


def test_extreme_scores_stay_finite():
    model = LogisticGate(epochs=50).fit(H, y)
    proba = model.predict_proba(np.full((1, 3), 1e6))
    assert np.all(np.isfinite(proba))


def test_dict_round_trip():
    model = LogisticGate(epochs=50).fit(H, y)
    restored = LogisticGate.from_dict(model.to_dict())
    np.testing.assert_array_equal(restored.predict_proba(H),
                                  model.predict_proba(H))


def test_feature_count_checked():
    model = LogisticGate(epochs=5).fit(H, y)
    with pytest.raises(ValueError):
        model.decision_function(H[:, :2])

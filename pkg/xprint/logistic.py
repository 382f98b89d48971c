from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

FORMAT_VERSION = 1
_CLIP = 30.0


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -_CLIP, _CLIP)))


def loss_and_gradient(w, b, H, y, sample_weight=None, l2=0.0):
    """Weighted mean log-loss plus ``l2 / 2 * ||w||^2`` and its gradient.

    Returns ``(loss, grad_w, grad_b)``. The bias is not regularised.
    """
    H = np.asarray(H, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if sample_weight is None:
        sample_weight = np.ones_like(y)
    total = sample_weight.sum()
    z = H @ w + b
    # log(1 + e^z) - y z, stable for large |z|
    losses = np.logaddexp(0.0, z) - y * z
    loss = float(sample_weight @ losses) / total + 0.5 * l2 * float(w @ w)
    residual = sample_weight * (1.0 / (1.0 + np.exp(-z)) - y) / total
    return loss, H.T @ residual + l2 * w, float(residual.sum())


class LogisticGate(BaseEstimator, ClassifierMixin):
    """
    Binary logistic regression trained by full-batch gradient descent.

    Used as the per-flow acceptance gate over the tuple
    (p, neighbourhood mean of p, p - r). Weights start at zero, so training
    is deterministic without a seed.

    Parameters
    ----------
    learning_rate : float, default=0.5

    epochs : int, default=1000
        Number of full-batch descent steps.

    l2 : float, default=1e-4
        Ridge penalty on the weights (not the bias).

    class_weight : {None, "balanced"}, default=None
        "balanced" weights every row by n / (2 * n_class) so both classes
        contribute equally to the loss.

    verbose : int, default=0

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)

    intercept_ : float

    loss_curve_ : list of float
        Training loss before each descent step.
    """

    def __init__(self,
                 learning_rate: float = 0.5, *,
                 epochs: int = 1000,
                 l2: float = 1e-4,
                 class_weight: Optional[str] = None,
                 verbose: int = 0):
        super().__init__()

        self.learning_rate = learning_rate
        self.epochs = epochs
        self.l2 = l2
        self.class_weight = class_weight
        self.verbose = verbose

    def _check_learning_rate(self):
        if isinstance(self.learning_rate, bool) or \
                not isinstance(self.learning_rate, (int, float)):
            raise TypeError("`learning_rate` must be a number")
        if not self.learning_rate > 0:
            raise ValueError("`learning_rate` must be positive")
        return float(self.learning_rate)

    def _check_epochs(self):
        if isinstance(self.epochs, bool) or not isinstance(self.epochs, int):
            raise TypeError("`epochs` must be an integer")
        if self.epochs < 1:
            raise ValueError("`epochs` must be at least 1")
        return self.epochs

    def _check_l2(self):
        if isinstance(self.l2, bool) or not isinstance(self.l2, (int, float)):
            raise TypeError("`l2` must be a number")
        if self.l2 < 0:
            raise ValueError("`l2` must be non-negative")
        return float(self.l2)

    def _sample_weight(self, y):
        if self.class_weight is None:
            return np.ones(y.size)
        if self.class_weight != "balanced":
            raise ValueError("`class_weight` must be None or 'balanced', got "
                             f"{self.class_weight!r}")
        weights = np.ones(y.size)
        for label in (0, 1):
            members = y == label
            if members.any():
                weights[members] = y.size / (2.0 * members.sum())
        return weights

    def fit(self, X, y):
        """Fit the gate on rows X with binary labels y in {0, 1}."""
        X, y = check_X_y(X, y, dtype=np.float64)
        y = y.astype(np.float64)
        if not np.isin(y, (0.0, 1.0)).all():
            raise ValueError("LogisticGate labels must be 0 or 1")
        learning_rate = self._check_learning_rate()
        epochs = self._check_epochs()
        l2 = self._check_l2()
        weights = self._sample_weight(y)

        w = np.zeros(X.shape[1])
        b = 0.0
        curve = []
        for _ in range(epochs):
            loss, grad_w, grad_b = loss_and_gradient(w, b, X, y, weights, l2)
            curve.append(loss)
            w = w - learning_rate * grad_w
            b = b - learning_rate * grad_b

        self.coef_ = w
        self.intercept_ = float(b)
        self.loss_curve_ = curve
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        if self.verbose:
            print(f"LogisticGate: {epochs} epochs, loss {curve[0]:.4f} -> "
                  f"{curve[-1]:.4f}")
        return self

    def decision_function(self, X):
        check_is_fitted(self, attributes=["coef_"])
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, but the gate was "
                             f"trained on {self.n_features_in_}")
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        positive = _sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - positive, positive])

    def predict(self, X):
        return (self.decision_function(X) > 0).astype(int)

    def to_dict(self) -> dict:
        check_is_fitted(self, attributes=["coef_"])
        return {"kind": "logistic_gate",
                "format_version": FORMAT_VERSION,
                "params": self.get_params(),
                "coef": self.coef_.tolist(),
                "intercept": self.intercept_}

    @classmethod
    def from_dict(cls, data: dict) -> "LogisticGate":
        if data.get("kind") != "logistic_gate":
            raise ValueError(f"not a logistic gate: kind={data.get('kind')!r}")
        model = cls(**data["params"])
        model.coef_ = np.asarray(data["coef"], dtype=np.float64)
        model.intercept_ = float(data["intercept"])
        model.classes_ = np.array([0, 1])
        model.n_features_in_ = model.coef_.size
        model.loss_curve_ = []
        return model


def train_logistic(H, y, hyper: Optional[dict] = None, **kwargs) -> LogisticGate:
    """Fit a LogisticGate on 3-float gate tuples ``H`` and binary ``y``."""
    params = dict(hyper or {})
    params.update(kwargs)
    return LogisticGate(**params).fit(H, y)

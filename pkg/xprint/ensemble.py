from typing import Dict, Optional

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, \
    check_random_state, check_X_y

from ._tree import DecisionTree
from .exceptions import SchemaMismatchError
from .features import SCHEMA_VERSION, FeatureVector

FORMAT_VERSION = 1
_MAX_INT = np.iinfo(np.int32).max


def _bootstrap_indices(y_encoded, n_classes, bootstrap, balanced, rng):
    n = y_encoded.size
    if not bootstrap:
        return np.arange(n)
    if not balanced:
        return rng.randint(0, n, n)
    # same number of draws from every class present in the data
    per_class = max(1, n // n_classes)
    parts = []
    for c in range(n_classes):
        members = np.flatnonzero(y_encoded == c)
        if members.size:
            parts.append(members[rng.randint(0, members.size, per_class)])
    return np.sort(np.concatenate(parts))


def _fit_tree(X, y_encoded, n_classes, seed, params):
    rng = np.random.RandomState(seed)
    indices = _bootstrap_indices(y_encoded, n_classes, params["bootstrap"],
                                 params["balanced"], rng)
    tree = DecisionTree.grow(X, y_encoded, n_classes, indices,
                             max_depth=params["max_depth"],
                             min_leaf=params["min_leaf"],
                             max_features=params["feature_subsample"],
                             rng=rng)
    return tree, indices


class TreeEnsembleClassifier(BaseEstimator, ClassifierMixin):
    """
    Bagged ensemble of Gini decision trees emitting class probabilities.

    Every tree is grown on a bootstrap sample of the training rows, choosing
    among a fresh random subset of features at each node. Probabilities are
    the average of the leaf class distributions reached in each tree.

    Parameters
    ----------
    n_trees : int, default=100
        Number of trees in the ensemble.

    max_depth : int, default=12
        Maximum depth of every tree.

    min_leaf : int, default=2
        Minimum number of (bootstrap) samples in a leaf.

    feature_subsample : int, default=12
        Number of features considered at each split (ceil(sqrt(123))).

    bootstrap : bool, default=True
        Draw a bootstrap sample per tree. When False every tree sees the full
        training set and differs only by its feature subsets.

    balanced : bool, default=False
        Draw the same number of bootstrap rows from every class. Used for URI
        classifiers where a few endpoints dominate the bursts.

    oob : bool, default=False
        Store out-of-bag class probabilities of the training rows in
        `oob_proba_`.

    n_jobs : int, default=None
        Number of joblib workers used to grow trees.

    random_state : int, default=None
        Seed for bootstrap sampling and feature subsets.

    verbose : int, default=0
        Print a one-line training summary when set.

    Attributes
    ----------
    classes_ : ndarray
        Sorted class labels.

    n_features_in_ : int
        Number of features seen during fit.

    trees_ : list of DecisionTree
        The fitted trees.

    oob_proba_ : ndarray of shape (n_samples, n_classes)
        Out-of-bag probabilities (only when `oob=True`). Rows that were in
        every bootstrap sample fall back to the full-ensemble probability.

    schema_version_ : int or None
        Feature schema the ensemble was trained on, when trained through
        `train_ensemble`.
    """

    def __init__(self,
                 n_trees: int = 100, *,
                 max_depth: int = 12,
                 min_leaf: int = 2,
                 feature_subsample: int = 12,
                 bootstrap: bool = True,
                 balanced: bool = False,
                 oob: bool = False,
                 n_jobs: int = None,
                 random_state: int = None,
                 verbose: int = 0):
        super().__init__()

        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.feature_subsample = feature_subsample
        self.bootstrap = bootstrap
        self.balanced = balanced
        self.oob = oob
        self.n_jobs = n_jobs
        self.random_state = random_state
        self.verbose = verbose

    def _check_positive_int(self, name, upper):
        value = getattr(self, name)
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise TypeError(f"`{name}` must be an integer")
        if value < 1 or value > upper:
            raise ValueError(f"`{name}` must be between 1 and {upper}")
        return int(value)

    def _check_n_trees(self):
        return self._check_positive_int("n_trees", 10000)

    def _check_max_depth(self):
        return self._check_positive_int("max_depth", 64)

    def _check_min_leaf(self):
        return self._check_positive_int("min_leaf", 100000)

    def _check_feature_subsample(self):
        return self._check_positive_int("feature_subsample", 100000)

    def _check_flags(self):
        for name in ("bootstrap", "balanced", "oob"):
            value = getattr(self, name)
            if not isinstance(value, bool):
                raise ValueError(f"Wrong input for parameter `{name}`. "
                                 f"Expected True or False, got {value}")
        if self.oob and not self.bootstrap:
            raise ValueError("out-of-bag probabilities require bootstrap=True")

    def fit(self, X, y):
        """Grow the ensemble on training set (X, y).

        Parameters
        ----------
        X : array-like of shape (n_samples, n_features)

        y : array-like of shape (n_samples,)
            Class labels; a single class is allowed and yields a constant
            probability of 1 for that class.

        Returns
        -------
        self : object
        """
        X, y = check_X_y(X, y, dtype=np.float64, ensure_min_samples=1)
        params = {"max_depth": self._check_max_depth(),
                  "min_leaf": self._check_min_leaf(),
                  "feature_subsample": self._check_feature_subsample(),
                  "bootstrap": self.bootstrap,
                  "balanced": self.balanced}
        n_trees = self._check_n_trees()
        self._check_flags()
        rng = check_random_state(self.random_state)

        self.classes_, y_encoded = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        n_classes = self.classes_.size
        seeds = rng.randint(_MAX_INT, size=n_trees)

        fitted = Parallel(n_jobs=self.n_jobs)(
            delayed(_fit_tree)(X, y_encoded, n_classes, seed, params)
            for seed in seeds)
        self.trees_ = [tree for tree, _ in fitted]
        if not hasattr(self, "schema_version_"):
            self.schema_version_ = None

        if self.oob:
            self.oob_proba_ = self._oob_proba(X, fitted)

        if self.verbose:
            nodes = sum(t.node_count for t in self.trees_)
            print(f"TreeEnsembleClassifier: {n_trees} trees, {nodes} nodes, "
                  f"{n_classes} classes, {X.shape[0]} samples")
        return self

    def _oob_proba(self, X, fitted):
        n = X.shape[0]
        total = np.zeros((n, self.classes_.size))
        counts = np.zeros(n)
        for tree, indices in fitted:
            out = np.ones(n, dtype=bool)
            out[indices] = False
            if out.any():
                total[out] += tree.predict_proba(X[out])
                counts[out] += 1
        never_out = counts == 0
        if never_out.any():
            total[never_out] = self._average(X[never_out])
            counts[never_out] = 1
        return total / counts[:, None]

    def _average(self, X):
        proba = np.zeros((X.shape[0], self.classes_.size))
        for tree in self.trees_:
            proba += tree.predict_proba(X)
        return proba / len(self.trees_)

    def predict_proba(self, X):
        """Average of the leaf class distributions over all trees.

        Returns
        -------
        proba : ndarray of shape (n_samples, n_classes)
            Columns follow `classes_`; rows sum to 1.
        """
        check_is_fitted(self, attributes=["trees_", "classes_"])
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise SchemaMismatchError(
                f"X has {X.shape[1]} features, but the ensemble was trained "
                f"on {self.n_features_in_}")
        return self._average(X)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def to_dict(self) -> dict:
        check_is_fitted(self, attributes=["trees_", "classes_"])
        return {"kind": "tree_ensemble",
                "format_version": FORMAT_VERSION,
                "schema_version": self.schema_version_,
                "params": self.get_params(),
                "classes": self.classes_.tolist(),
                "n_features": int(self.n_features_in_),
                "trees": [t.to_dict() for t in self.trees_]}

    @classmethod
    def from_dict(cls, data: dict) -> "TreeEnsembleClassifier":
        if data.get("kind") != "tree_ensemble":
            raise ValueError(f"not a tree ensemble: kind={data.get('kind')!r}")
        if data.get("format_version") != FORMAT_VERSION:
            raise ValueError("unsupported tree ensemble format version "
                             f"{data.get('format_version')!r}")
        model = cls(**data["params"])
        model.classes_ = np.asarray(data["classes"])
        model.n_features_in_ = int(data["n_features"])
        model.trees_ = [DecisionTree.from_dict(t) for t in data["trees"]]
        model.schema_version_ = data["schema_version"]
        return model


def train_ensemble(X, y, hyper: Optional[dict] = None, seed=None,
                   **kwargs) -> TreeEnsembleClassifier:
    """Fit a TreeEnsembleClassifier on feature vectors.

    ``X`` may be a matrix or a sequence of FeatureVector; ``hyper`` holds
    constructor parameters and ``seed`` the random state. The fitted model
    remembers the feature schema version.
    """
    if len(X) == 0:
        raise ValueError("cannot train an ensemble on an empty dataset")
    if isinstance(X[0], FeatureVector):
        X = np.vstack([x.values for x in X])
    params = dict(hyper or {})
    params.update(kwargs)
    if isinstance(seed, np.integer):
        seed = int(seed)
    model = TreeEnsembleClassifier(random_state=seed, **params)
    model.schema_version_ = SCHEMA_VERSION
    return model.fit(X, y)


def check_schema(model: TreeEnsembleClassifier, name: str = "model"):
    version = getattr(model, "schema_version_", None)
    if version is not None and version != SCHEMA_VERSION:
        raise SchemaMismatchError(f"{name} was trained on feature schema "
                                  f"{version}, extractor is {SCHEMA_VERSION}")


def predict_proba(model: TreeEnsembleClassifier, x) -> Dict[object, float]:
    """Class probabilities of a single FeatureVector (or 1-D array)."""
    if isinstance(x, FeatureVector):
        if (model.schema_version_ is not None
                and x.schema_version != model.schema_version_):
            raise SchemaMismatchError(
                f"feature schema {x.schema_version} does not match the "
                f"model's schema {model.schema_version_}")
        x = x.values
    proba = model.predict_proba(np.asarray(x, dtype=np.float64).reshape(1, -1))[0]
    return {c: float(p) for c, p in zip(model.classes_.tolist(), proba)}


def positive_column(model: TreeEnsembleClassifier, proba: np.ndarray
                    ) -> np.ndarray:
    """The ``True`` column of probabilities produced by ``model``, such as its
    out-of-bag estimates; zeros when the model never saw a positive row."""
    hits = np.flatnonzero(model.classes_ == True)  # noqa: E712
    if hits.size == 0:
        return np.zeros(proba.shape[0])
    return proba[:, hits[0]]


def positive_proba(model: TreeEnsembleClassifier, X) -> np.ndarray:
    """Probability of the ``True`` class of a binary one-vs-rest ensemble.

    A model trained without positive rows scores 0 everywhere.
    """
    return positive_column(model, model.predict_proba(X))

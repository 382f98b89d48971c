from contextlib import contextmanager

import numpy as np
import pytest
from sklearn.utils.validation import check_is_fitted

from .._tree import LEAF, DecisionTree
from ..ensemble import (TreeEnsembleClassifier, check_schema, positive_column,
                        positive_proba, predict_proba, train_ensemble)
from ..exceptions import SchemaMismatchError
from ..features import FeatureVector, SCHEMA_VERSION

rng = np.random.RandomState(0)
X = np.vstack([rng.normal(0.0, 1.0, size=(60, 4)),
               rng.normal(3.0, 1.0, size=(60, 4))])
y = np.array(["a"] * 60 + ["b"] * 60)


@contextmanager
def no_raise():
    yield


@pytest.mark.parametrize("expected_output", [True])
def test_model_instance(expected_output):
    model = TreeEnsembleClassifier()
    assert isinstance(model, TreeEnsembleClassifier) == expected_output


@pytest.mark.parametrize("n_trees,raises",
                         [(1, no_raise()),
                          (20, no_raise()),
                          (0, pytest.raises(ValueError)),
                          (10001, pytest.raises(ValueError)),
                          ("asdf", pytest.raises(TypeError)),
                          (True, pytest.raises(TypeError))])
def test_n_trees(n_trees, raises):
    model = TreeEnsembleClassifier(n_trees=n_trees, random_state=0)
    with raises:
        model.fit(X, y)
        check_is_fitted(model)


@pytest.mark.parametrize("max_depth,raises",
                         [(1, no_raise()),
                          (64, no_raise()),
                          (0, pytest.raises(ValueError)),
                          (65, pytest.raises(ValueError)),
                          (2.5, pytest.raises(TypeError))])
def test_max_depth(max_depth, raises):
    model = TreeEnsembleClassifier(n_trees=3, max_depth=max_depth,
                                   random_state=0)
    with raises:
        model.fit(X, y)
        check_is_fitted(model)


@pytest.mark.parametrize("params,raises",
                         [({"bootstrap": False}, no_raise()),
                          ({"balanced": True}, no_raise()),
                          ({"oob": True}, no_raise()),
                          ({"bootstrap": "yes"}, pytest.raises(ValueError)),
                          ({"oob": True, "bootstrap": False},
                           pytest.raises(ValueError)),
                          ({"min_leaf": 0}, pytest.raises(ValueError)),
                          ({"feature_subsample": 0},
                           pytest.raises(ValueError))])
def test_flags(params, raises):
    model = TreeEnsembleClassifier(n_trees=3, random_state=0, **params)
    with raises:
        model.fit(X, y)
        check_is_fitted(model)


def test_separable_data():
    model = TreeEnsembleClassifier(n_trees=20, random_state=1).fit(X, y)
    assert model.score(X, y) > 0.95
    proba = model.predict_proba(X)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert model.classes_.tolist() == ["a", "b"]


def test_single_class():
    model = TreeEnsembleClassifier(n_trees=5, random_state=0)
    model.fit(X[:10], ["only"] * 10)
    assert model.predict_proba(X).tolist() == [[1.0]] * len(X)
    assert all(model.trees_[0].feature == LEAF)


def test_fit_is_deterministic():
    a = TreeEnsembleClassifier(n_trees=5, random_state=7).fit(X, y)
    b = TreeEnsembleClassifier(n_trees=5, random_state=7).fit(X, y)
    np.testing.assert_array_equal(a.predict_proba(X), b.predict_proba(X))


def test_parallel_fit_matches_serial():
    a = TreeEnsembleClassifier(n_trees=6, random_state=3).fit(X, y)
    b = TreeEnsembleClassifier(n_trees=6, random_state=3, n_jobs=2).fit(X, y)
    np.testing.assert_array_equal(a.predict_proba(X), b.predict_proba(X))


def test_oob_probabilities():
    model = TreeEnsembleClassifier(n_trees=30, oob=True, random_state=0)
    model.fit(X, y)
    assert model.oob_proba_.shape == (120, 2)
    np.testing.assert_allclose(model.oob_proba_.sum(axis=1), 1.0)
    oob_pred = model.classes_[np.argmax(model.oob_proba_, axis=1)]
    assert np.mean(oob_pred == y) > 0.9


def test_balanced_bootstrap_handles_rare_class():
    yr = np.array(["a"] * 115 + ["b"] * 5)
    model = TreeEnsembleClassifier(n_trees=20, balanced=True, random_state=0)
    model.fit(X, yr)
    assert model.classes_.tolist() == ["a", "b"]


def test_dimension_mismatch():
    model = TreeEnsembleClassifier(n_trees=3, random_state=0).fit(X, y)
    with pytest.raises(SchemaMismatchError):
        model.predict_proba(X[:, :3])


def test_dict_round_trip():
    model = train_ensemble(X, y, {"n_trees": 5}, seed=np.int64(4))
    restored = TreeEnsembleClassifier.from_dict(model.to_dict())
    np.testing.assert_array_equal(restored.predict_proba(X),
                                  model.predict_proba(X))
    assert restored.get_params() == model.get_params()
    assert restored.schema_version_ == SCHEMA_VERSION


def test_from_dict_rejects_other_kinds():
    with pytest.raises(ValueError):
        TreeEnsembleClassifier.from_dict({"kind": "logistic_gate"})


def test_train_ensemble_on_feature_vectors():
    vectors = [FeatureVector(np.full(123, float(k % 2))) for k in range(20)]
    labels = [k % 2 == 1 for k in range(20)]
    model = train_ensemble(vectors, labels, {"n_trees": 3}, seed=0)
    probs = predict_proba(model, vectors[1])
    assert probs[True] == pytest.approx(1.0)
    np.testing.assert_allclose(positive_proba(model, np.full((2, 123), 1.0)),
                               [1.0, 1.0])


def test_schema_checks():
    model = train_ensemble(X, y, {"n_trees": 2}, seed=0)
    check_schema(model)
    model.schema_version_ = SCHEMA_VERSION + 1
    with pytest.raises(SchemaMismatchError):
        check_schema(model)
    with pytest.raises(SchemaMismatchError):
        predict_proba(model, FeatureVector(np.zeros(123)))


def test_positive_proba_without_positive_class():
    model = train_ensemble(X, np.zeros(120, dtype=bool), {"n_trees": 2}, seed=0)
    assert positive_proba(model, X[:4]).tolist() == [0.0] * 4


def test_empty_training_set():
    with pytest.raises(ValueError):
        train_ensemble(np.empty((0, 4)), [])


def test_tree_routes_by_threshold():
    tree = DecisionTree(feature=[0, LEAF, LEAF], threshold=[0.5, 0.0, 0.0],
                        left=[1, LEAF, LEAF], right=[2, LEAF, LEAF],
                        value=[[0.5, 0.5], [1.0, 0.0], [0.0, 1.0]])
    Xt = np.array([[0.2], [0.5], [0.9]])
    assert tree.apply(Xt).tolist() == [1, 1, 2]
    assert tree.predict_proba(Xt)[:, 1].tolist() == [0.0, 0.0, 1.0]
    assert DecisionTree.from_dict(tree.to_dict()).apply(Xt).tolist() == [1, 1, 2]


def test_tree_growth_respects_min_leaf_and_depth():
    idx = np.arange(X.shape[0])
    y_encoded = (y == "b").astype(int)
    tree = DecisionTree.grow(X, y_encoded, 2, idx, max_depth=2, min_leaf=10,
                             max_features=4, rng=np.random.RandomState(0))
    leaves = tree.apply(X)
    counts = np.bincount(leaves, minlength=tree.node_count)
    assert all(counts[k] >= 10 for k in np.unique(leaves))
    assert tree.node_count <= 7


def test_positive_column_of_out_of_bag_estimates():
    labels = y == "b"
    model = train_ensemble(X, labels, {"n_trees": 5, "oob": True}, seed=0)
    column = positive_column(model, model.oob_proba_)
    true_index = model.classes_.tolist().index(True)
    np.testing.assert_array_equal(column, model.oob_proba_[:, true_index])
    empty = train_ensemble(X, np.zeros(120, dtype=bool), {"n_trees": 2}, seed=0)
    assert positive_column(empty, np.ones((3, 1))).tolist() == [0.0] * 3

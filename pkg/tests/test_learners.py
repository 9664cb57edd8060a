import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from pytest import approx
from scipy.optimize import minimize

from smokerisk.errors import ConfigError, FitError
from smokerisk.learners import (
    FitConfig,
    fit_forest,
    fit_gbdt,
    fit_linear_svm,
    fit_logreg,
    fit_tree,
    load_model,
    model_from_dict,
    model_to_dict,
    predict_proba,
    save_model,
)
from smokerisk.learners.trees import bin_features, quantile_edges
from smokerisk.resample import class_weights


def gini(w, y):
    W = w.sum()
    if W == 0:
        return 0.0
    p = (w * y).sum() / W
    return W * (1 - p * p - (1 - p) ** 2)


def brute_force_stump(X, y, w):
    """Best (gain, feature, threshold) over every feature and midpoint; ties go
    to the lowest feature, then the lowest threshold."""
    parent = gini(w, y)
    best = None
    for f in range(X.shape[1]):
        vals = np.unique(X[:, f])
        for a, b in zip(vals[:-1], vals[1:]):
            thr = (a + b) / 2
            left = X[:, f] <= thr
            gain = parent - gini(w[left], y[left]) - gini(w[~left], y[~left])
            if best is None or gain > best[0] + 1e-12:
                best = (gain, f, thr)
    return best


@given(seed=st.integers(0, 2**31), n=st.integers(4, 40), d=st.integers(1, 4), weighted=st.booleans())
def test_stump_matches_exhaustive_enumeration(seed, n, d, weighted):
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(n, d)), 1)
    y = (rng.random(n) < 0.4).astype(float)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    w = rng.uniform(0.5, 2.0, n) if weighted else np.ones(n)
    tree = fit_tree(X, y, w, FitConfig(max_depth=1))
    best = brute_force_stump(X, y, w)
    if best is None:
        assert tree.n_nodes == 1
        return
    gain, f, thr = best
    assert tree.n_nodes == 3
    assert tree.feature[0] == f
    assert tree.threshold[0] == approx(thr)
    left = X[:, f] <= thr
    assert tree.value[tree.left[0]] == approx((w[left] * y[left]).sum() / w[left].sum())
    assert tree.cover[0] == approx(w.sum())


def test_xor_needs_zero_gain_root_split():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], float)
    y = np.array([0, 1, 1, 0], float)
    tree = fit_tree(X, y, cfg=FitConfig(max_depth=2))
    assert np.array_equal(tree.predict(X), y)
    assert tree.feature[0] == 0 and tree.threshold[0] == 0.5


def test_pure_node_is_leaf_and_min_samples_leaf():
    X = np.arange(10, dtype=float)[:, None]
    assert fit_tree(X, np.zeros(10)).n_nodes == 1
    y = np.r_[np.zeros(9), 1.0]
    tree = fit_tree(X, y, cfg=FitConfig(min_samples_leaf=3))
    leaves = tree.apply(X)
    assert np.bincount(leaves)[np.unique(leaves)].min() >= 3


def test_tree_validation():
    with pytest.raises(FitError):
        fit_tree(np.ones((3, 1)), np.array([0, 1, 2.0]))
    with pytest.raises(FitError):
        fit_tree(np.ones((3, 1)), np.array([0, 1, 1.0]), np.array([1.0, 0.0, 1.0]))
    with pytest.raises(ConfigError):
        FitConfig(n_trees=0)
    with pytest.raises(ConfigError):
        FitConfig.from_dict({"trees": 3})


def test_gbdt_newton_leaf_values():
    X = np.arange(4, dtype=float)[:, None]
    y = np.array([0, 0, 1, 1], float)
    m = fit_gbdt(X, y, FitConfig(n_trees=1, max_depth=1, learning_rate=0.1, min_child_weight=0.0,
                                 l2_leaf_penalty=1.0))
    # base 0 -> p = 0.5, g = p - y, h = 1/4; left G = 1, H = 1/2
    assert m.base_score == approx(0.0)
    tree = m.trees[0]
    assert tree.threshold[0] == 1.5
    assert tree.value[tree.left[0]] == approx(-1.0 / 1.5)
    assert tree.value[tree.right[0]] == approx(1.0 / 1.5)
    assert m.predict_raw(X) == approx([-0.1 / 1.5] * 2 + [0.1 / 1.5] * 2)


def test_gbdt_min_child_weight_blocks_split():
    X = np.arange(4, dtype=float)[:, None]
    y = np.array([0, 0, 1, 1], float)
    m = fit_gbdt(X, y, FitConfig(n_trees=1, max_depth=1, min_child_weight=1.0))
    assert m.trees[0].n_nodes == 1


def test_gbdt_base_score_is_weighted_prior():
    y = np.array([0, 0, 0, 1], float)
    X = np.zeros((4, 1))
    assert fit_gbdt(X, y, FitConfig(n_trees=1)).base_score == approx(np.log(1 / 3))
    cw = class_weights(y.astype(int))
    assert fit_gbdt(X, y, FitConfig(n_trees=1, class_weights=cw)).base_score == approx(0.0)


@given(seed=st.integers(0, 2**31), search=st.sampled_from(["exact", "histogram"]))
def test_gbdt_training_loss_non_increasing(seed, search):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(80, 3))
    y = (X[:, 0] + rng.normal(size=80) > 0).astype(float)
    m = fit_gbdt(X, y, FitConfig(n_trees=15, max_depth=3, learning_rate=0.3, split_search=search, n_bins=16))
    loss = np.array(m.train_loss)
    assert np.all(np.diff(loss) <= 1e-12)


def test_histogram_edges_and_bins(rng):
    X = np.c_[rng.normal(size=200), np.repeat([1.0, 2.0], 100)]
    edges, n_edges = quantile_edges(X, 8)
    assert n_edges[0] <= 7 and n_edges[1] == 1
    assert np.all(np.diff(edges[0, : n_edges[0]]) > 0)
    Xb = bin_features(X, edges, n_edges)
    for j in range(2):
        order = np.argsort(X[:, j], kind="stable")
        assert np.all(np.diff(Xb[order, j]) >= 0)


def test_histogram_matches_exact_when_bins_cover_all_values():
    rng = np.random.default_rng(3)
    X = rng.integers(0, 6, size=(150, 3)).astype(float)
    y = ((X[:, 0] + X[:, 1]) > 5).astype(float)
    cfg = FitConfig(n_trees=5, max_depth=3, min_child_weight=0.0)
    a = fit_gbdt(X, y, cfg)
    b = fit_gbdt(X, y, cfg.replace(split_search="histogram", n_bins=64))
    assert np.allclose(a.predict_raw(X), b.predict_raw(X))


def test_forest_deterministic_across_threads(rng):
    X = rng.normal(size=(150, 5))
    y = (X[:, 0] > 0).astype(float)
    cfg = FitConfig(n_trees=12, seed=5)
    a = fit_forest(X, y, cfg, n_jobs=1)
    b = fit_forest(X, y, cfg, n_jobs=3)
    assert np.array_equal(a.predict_proba(X), b.predict_proba(X))
    assert a.feature_importances.sum() == approx(1.0)
    assert np.argmax(a.feature_importances) == 0
    c = fit_forest(X, y, cfg.replace(seed=6))
    assert not np.array_equal(a.predict_proba(X), c.predict_proba(X))


def test_forest_probabilities_in_unit_interval(rng):
    X = rng.normal(size=(100, 4))
    y = (rng.random(100) < 0.3).astype(float)
    p = fit_forest(X, y, FitConfig(n_trees=8, class_weights=class_weights(y.astype(int)))).predict_proba(X)
    assert np.all((p >= 0) & (p <= 1))


def logistic_objective(theta, X, y, s, l2):
    z = X @ theta[:-1] + theta[-1]
    return np.sum(s * (np.logaddexp(0, z) - y * z)) + 0.5 * l2 * np.sum(theta[:-1] ** 2)


def test_logreg_matches_quasi_newton_oracle(rng):
    X = rng.normal(size=(120, 3))
    y = (X @ [1.0, -2.0, 0.5] + rng.logistic(size=120) > 0).astype(float)
    cw = class_weights(y.astype(int))
    s = cw.sample_weights(y)
    s = s / s.sum()
    ref = minimize(logistic_objective, np.zeros(4), args=(X, y, s, 0.01), method="BFGS", options={"gtol": 1e-10})
    m = fit_logreg(X, y, FitConfig(l2=0.01, tol=1e-14, max_iter=20000, class_weights=cw))
    assert np.r_[m.weights, m.bias] == approx(ref.x, abs=1e-4)
    assert np.all(np.diff(m.loss_history) <= 1e-15)


def test_linear_svm_separates(rng):
    X = rng.normal(size=(200, 2))
    y = (X[:, 0] - X[:, 1] > 0).astype(float)
    m = fit_linear_svm(X, y, FitConfig(max_iter=2000))
    acc = np.mean((m.decision_function(X) > 0) == (y == 1))
    assert acc > 0.95
    assert m.loss_history[-1] <= m.loss_history[0]


@pytest.mark.parametrize("kind", ["tree", "forest", "gbdt", "logreg", "svm"])
def test_serialization_round_trip(tmp_path, rng, kind):
    X = rng.normal(size=(60, 3))
    y = (X[:, 1] > 0).astype(float)
    model = {
        "tree": lambda: fit_tree(X, y, cfg=FitConfig(max_depth=3)),
        "forest": lambda: fit_forest(X, y, FitConfig(n_trees=4)),
        "gbdt": lambda: fit_gbdt(X, y, FitConfig(n_trees=4)),
        "logreg": lambda: fit_logreg(X, y),
        "svm": lambda: fit_linear_svm(X, y, FitConfig(max_iter=200)),
    }[kind]()
    doc = json.loads(json.dumps(model_to_dict(model)))
    back = model_from_dict(doc)
    assert np.array_equal(predict_proba(back, X), predict_proba(model, X))
    save_model(model, tmp_path / "m.json")
    assert np.array_equal(predict_proba(load_model(tmp_path / "m.json"), X), predict_proba(model, X))

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from pytest import approx

from smokerisk.errors import ConfigError, ModelError
from smokerisk.explain import (
    bmi,
    dependence_grid,
    group_importance,
    load_system_map,
    rank_importances,
    shap_summary,
    tree_shap,
)
from smokerisk.fixtures import default_schema
from smokerisk.learners import FitConfig, fit_forest, fit_gbdt, fit_logreg, fit_tree
from smokerisk.learners.trees import Tree
from tree_oracles import brute_force_shap, conditional_expectation, random_tree


@given(seed=st.integers(0, 2**31), d=st.integers(1, 4), depth=st.integers(1, 5))
def test_tree_shap_matches_brute_force(seed, d, depth):
    rng = np.random.default_rng(seed)
    tree = random_tree(rng, d, depth)
    X = np.round(rng.normal(size=(4, d)), 2)
    sm = tree_shap(tree, X)
    for x, phi in zip(X, sm.values):
        assert np.max(np.abs(phi - brute_force_shap(tree, x))) < 1e-8
    assert sm.base_value == approx(conditional_expectation(tree, X[0], set()))
    assert sm.local_accuracy_error(X) < 1e-8


def test_repeated_feature_on_path():
    # feature 0 splits twice on the same path, which exercises the unwind step
    tree = Tree(
        feature=np.array([0, 0, -1, -1, 1, -1, -1]),
        threshold=np.array([0.5, -0.5, 0, 0, 0.0, 0, 0]),
        left=np.array([1, 2, -1, -1, 5, -1, -1]),
        right=np.array([4, 3, -1, -1, 6, -1, -1]),
        value=np.array([0, 0, 1.0, 2.0, 0, 3.0, 5.0]),
        cover=np.array([10, 6, 2, 4, 4, 1, 3.0]),
        n_features=2,
    )
    for x in ([-1.0, 1.0], [0.0, -1.0], [1.0, 1.0]):
        assert tree_shap(tree, np.array(x)).values[0] == approx(brute_force_shap(tree, np.array(x)), abs=1e-12)


def test_forest_shap_is_mean_of_tree_shap(rng):
    X = rng.normal(size=(80, 3))
    y = (X[:, 0] + X[:, 1] > 0).astype(float)
    m = fit_forest(X, y, FitConfig(n_trees=5, max_depth=4))
    sm = tree_shap(m, X[:10])
    per_tree = np.mean([tree_shap(t, X[:10]).values for t in m.trees], axis=0)
    assert np.allclose(sm.values, per_tree, atol=1e-14)
    assert sm.output == "probability"
    assert sm.local_accuracy_error(X[:10]) < 1e-10


def test_boosted_shap_in_log_odds(rng):
    X = rng.normal(size=(80, 3))
    y = (X[:, 2] > 0).astype(float)
    m = fit_gbdt(X, y, FitConfig(n_trees=10, max_depth=3))
    sm = tree_shap(m, X[:20])
    assert sm.output == "raw"
    assert sm.local_accuracy_error(X[:20]) < 1e-10
    assert np.argmax(np.abs(sm.values).mean(axis=0)) == 2


def test_shap_thread_count_does_not_change_values(rng):
    X = rng.normal(size=(60, 4))
    y = (X[:, 0] > 0).astype(float)
    m = fit_forest(X, y, FitConfig(n_trees=3))
    assert np.array_equal(tree_shap(m, X, n_jobs=1).values, tree_shap(m, X, n_jobs=3).values)


def test_missing_feature_gets_zero(rng):
    X = rng.normal(size=(50, 3))
    y = (X[:, 0] > 0).astype(float)
    tree = fit_tree(X, y, cfg=FitConfig(max_depth=1))
    sm = tree_shap(tree, X)
    assert np.all(sm.values[:, 1:] == 0)


def test_shap_errors():
    with pytest.raises(ModelError):
        tree_shap(fit_logreg(np.eye(4), np.array([0, 1, 0, 1.0])), np.eye(4))
    bad = Tree(np.array([0, -1, -1]), np.array([0.0, 0, 0]), np.array([1, -1, -1]), np.array([2, -1, -1]),
               np.array([0, 1.0, 0]), np.array([2.0, 0.0, 2.0]), 1)
    with pytest.raises(ModelError, match="cover"):
        tree_shap(bad, np.zeros((1, 1)))


def test_rank_importances():
    r = rank_importances(["a", "b", "c", "d"], [1.0, 3.0, 1.0, 5.0])
    assert r.features == ["d", "b", "a", "c"]
    assert [e.share for e in r.entries] == approx([0.5, 0.3, 0.1, 0.1])
    assert r.entries[-1].cumulative_share == 1.0
    assert r.share_of_top(2) == approx(0.8)
    zero = rank_importances(["a", "b"], [0.0, 0.0])
    assert zero.share_of_top(1) is None and zero.entries[0].share is None


def test_group_importance_is_member_mean():
    r = rank_importances(["a", "b", "c"], [1.0, 3.0, 8.0])
    out = group_importance(r, {"s1": ["a", "b"], "s2": ["c"], "s3": ["zz"]})
    assert [(s.system, s.importance) for s in out] == [("s2", 8.0), ("s1", 2.0), ("s3", None)]
    with pytest.raises(ConfigError, match="missing"):
        group_importance(r, {"s1": ["a", "b"]})
    with pytest.raises(ConfigError, match="both"):
        group_importance(r, {"s1": ["a", "b"], "s2": ["b", "c"]})
    with pytest.raises(ConfigError):
        group_importance(r, {"s1": ["a", "b", "c"], "empty": []})


def test_hepatic_system_value_from_member_means():
    # the liver-enzyme group is the mean of GGT, ALT and AST
    r = rank_importances(["Gtp", "ALT", "AST"], [0.0542, 0.0158, 0.0110])
    (hep,) = group_importance(r, {"hepatic": ["AST", "ALT", "Gtp"]})
    assert hep.importance == approx(0.0270, abs=5e-5)


def test_bundled_system_map_covers_schema(tmp_path):
    sm = load_system_map()
    members = [f for v in sm.values() for f in v]
    assert sorted(members) == sorted(default_schema().feature_names())
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"systems": {"x": ["a"]}}))
    assert load_system_map(p) == {"x": ["a"]}


def test_dependence_grid_on_stump():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0], [3.0, 1.0]])
    y = np.array([0, 0, 1, 1.0])
    tree = fit_tree(X, y, cfg=FitConfig(max_depth=1))
    g = dependence_grid(tree, X, (0, 1), (np.array([0.0, 3.0]), np.array([0.0, 1.0])))
    assert g.mean_prediction.tolist() == [[0.0, 0.0], [1.0, 1.0]]


def test_dependence_grid_transform_and_bmi():
    assert bmi(80.0, 200.0) == approx(20.0)
    X = np.array([[1.0, 10.0], [2.0, 20.0]])
    seen = []

    def transform(Z):
        seen.append(Z.copy())
        return Z

    tree = fit_tree(X, np.array([0, 1.0]), cfg=FitConfig(max_depth=1))
    g = dependence_grid(tree, X, (0, 1), 3, transform=transform, names=("a", "b"))
    assert g.features == ("a", "b")
    assert len(seen) == 9
    assert g.grid_a.tolist() == [1.0, 1.5, 2.0]


def test_shap_summary_ranks_informative_feature(rng):
    X = rng.normal(size=(200, 4))
    y = (X[:, 3] > 0).astype(float)
    m = fit_forest(X, y, FitConfig(n_trees=10, max_depth=4))
    ranking, sm = shap_summary(m, X[:50], ["a", "b", "c", "d"])
    assert ranking.features[0] == "d"
    assert ranking.value("d") == approx(np.abs(sm.values[:, 3]).mean())

"""Independent references for tree attribution tests."""

from itertools import combinations
from math import factorial

import numpy as np

from smokerisk.learners.trees import Tree


def random_tree(rng, n_features, max_depth, leaf_prob=0.3):
    """A random binary tree with parent ids below child ids and covers that
    add up (internal cover = sum of the children's)."""
    feature, threshold, left, right, value, cover = [], [], [], [], [], []

    def new_node():
        for arr in (feature, threshold, left, right, value, cover):
            arr.append(0)
        return len(feature) - 1

    def grow(node, depth):
        if depth == max_depth or (depth > 0 and rng.random() < leaf_prob):
            feature[node], threshold[node], left[node], right[node] = -1, 0.0, -1, -1
            value[node] = float(rng.normal())
            cover[node] = float(rng.integers(1, 20))
            return cover[node]
        feature[node] = int(rng.integers(n_features))
        threshold[node] = float(np.round(rng.normal(), 2))
        value[node] = 0.0
        left[node] = new_node()
        right[node] = new_node()
        cover[node] = grow(left[node], depth + 1) + grow(right[node], depth + 1)
        return cover[node]

    grow(new_node(), 0)
    return Tree(
        np.array(feature, np.int64), np.array(threshold, float), np.array(left, np.int64),
        np.array(right, np.int64), np.array(value, float), np.array(cover, float), n_features,
    )


def conditional_expectation(tree, x, subset):
    """E[f(X) | X_S = x_S] with unknown features averaged by training cover."""

    def walk(node):
        f = tree.feature[node]
        if f < 0:
            return tree.value[node]
        l, r = tree.left[node], tree.right[node]
        if f in subset:
            return walk(l if x[f] <= tree.threshold[node] else r)
        return (tree.cover[l] * walk(l) + tree.cover[r] * walk(r)) / tree.cover[node]

    return walk(0)


def brute_force_shap(tree, x):
    """Shapley values by enumerating all 2^d coalitions."""
    d = tree.n_features
    phi = np.zeros(d)
    for i in range(d):
        others = [j for j in range(d) if j != i]
        for size in range(d):
            w = factorial(size) * factorial(d - size - 1) / factorial(d)
            for S in combinations(others, size):
                S = set(S)
                phi[i] += w * (conditional_expectation(tree, x, S | {i}) - conditional_expectation(tree, x, S))
    return phi

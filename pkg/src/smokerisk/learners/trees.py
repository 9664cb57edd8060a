"""CART trees, class-weighted random forests and second-order gradient boosting."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import NamedTuple

import numpy as np

from ..errors import ConfigError, FitError, ModelError
from ..resample import WeightMap
from . import _kernels as K

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitConfig:
    """Hyperparameters shared by the tree learners and the linear baselines.

    ``max_depth=None`` grows forest trees until pure (boosting falls back to
    depth 6). ``feature_subsample=None`` means sqrt(d) features per split for
    forests and all features for single trees and boosting.
    """

    n_trees: int = 300
    max_depth: int | None = None
    min_samples_leaf: int = 1
    feature_subsample: float | None = None
    learning_rate: float = 0.1
    l2_leaf_penalty: float = 1.0
    min_child_weight: float = 1.0
    n_bins: int = 255
    split_search: str = "exact"  # or "histogram"
    bootstrap: bool = True
    class_weights: WeightMap | None = None
    seed: int = 0
    # linear baselines
    l2: float = 1e-4
    max_iter: int = 5000
    tol: float = 1e-8

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if self.min_samples_leaf < 1:
            raise ConfigError("min_samples_leaf must be >= 1")
        if self.feature_subsample is not None and not 0 < self.feature_subsample <= 1:
            raise ConfigError("feature_subsample must be in (0, 1]")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.l2_leaf_penalty < 0:
            raise ConfigError("l2_leaf_penalty must be >= 0")
        if self.n_bins < 2:
            raise ConfigError("n_bins must be >= 2")
        if self.split_search not in ("exact", "histogram"):
            raise ConfigError(f"unknown split_search {self.split_search!r}")

    def to_dict(self):
        d = asdict(self)
        d["class_weights"] = None if self.class_weights is None else self.class_weights.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = sorted(set(d) - set(cls.__dataclass_fields__))
        if unknown:
            raise ConfigError(f"unknown FitConfig keys: {', '.join(unknown)}")
        cw = d.get("class_weights")
        if cw is not None and not isinstance(cw, WeightMap):
            d["class_weights"] = WeightMap.from_dict(cw)
        return cls(**d)

    def replace(self, **kw):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return FitConfig(**d)


class TreeNode(NamedTuple):
    id: int
    feature: int  # -1 for leaves
    threshold: float
    left: int
    right: int
    value: float
    weighted_sample_count: float

    @property
    def is_leaf(self):
        return self.feature < 0


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    n_features: int

    def __post_init__(self):
        for a in (self.feature, self.threshold, self.left, self.right, self.value, self.cover):
            a.flags.writeable = False

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def n_leaves(self):
        return int(np.sum(self.feature < 0))

    @property
    def max_depth(self):
        return int(K.tree_depth(self.feature, self.left, self.right))

    def node(self, i) -> TreeNode:
        return TreeNode(
            i, int(self.feature[i]), float(self.threshold[i]), int(self.left[i]),
            int(self.right[i]), float(self.value[i]), float(self.cover[i]),
        )

    def nodes(self):
        return [self.node(i) for i in range(self.n_nodes)]

    def predict(self, X) -> np.ndarray:
        X = _check_X(X, self.n_features)
        return K.predict_tree(self.feature, self.threshold, self.left, self.right, self.value, X)

    def apply(self, X) -> np.ndarray:
        X = _check_X(X, self.n_features)
        return K.apply_tree(self.feature, self.threshold, self.left, self.right, X)

    def expected_value(self) -> float:
        return float(K.expected_value(self.feature, self.left, self.right, self.value, self.cover))

    def used_features(self) -> set:
        return set(int(f) for f in self.feature if f >= 0)

    def to_dict(self):
        return {
            "n_features": self.n_features,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "cover": self.cover.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["feature"], np.int64),
            np.asarray(d["threshold"], float),
            np.asarray(d["left"], np.int64),
            np.asarray(d["right"], np.int64),
            np.asarray(d["value"], float),
            np.asarray(d["cover"], float),
            int(d["n_features"]),
        )

    @classmethod
    def leaf(cls, value, cover, n_features):
        return cls(
            np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]),
            np.array([float(value)]), np.array([float(cover)]), n_features,
        )


def _check_X(X, n_features=None) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim != 2:
        raise ModelError(f"expected a 2-D feature matrix, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise ModelError(f"model expects {n_features} features, got {X.shape[1]}")
    return X


def _check_xy(X, y):
    X = _check_X(X)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] == 0:
        raise FitError("cannot fit on an empty feature matrix")
    if len(y) != X.shape[0]:
        raise FitError(f"X has {X.shape[0]} rows but y has {len(y)}")
    if not np.all(np.isfinite(X)):
        raise FitError("feature matrix contains missing or non-finite values; impute first")
    if not set(np.unique(y).tolist()) <= {0.0, 1.0}:
        raise FitError("labels must be binary 0/1")
    return X, y


def _presort(X) -> np.ndarray:
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))


def _restrict(S_full, mask) -> np.ndarray:
    keep = mask[S_full]
    m = int(mask.sum())
    return np.ascontiguousarray(S_full[keep].reshape(S_full.shape[0], m))


def _n_split_features(n_features, fraction, default_sqrt):
    if fraction is None:
        return max(1, int(round(math.sqrt(n_features)))) if default_sqrt else n_features
    return max(1, int(math.ceil(fraction * n_features)))


def _tree_from(out, n_features):
    f, t, l, r, v, c, imp = out
    return Tree(f, t, l, r, v, c, n_features), imp


def _grow_gini(X, y, w, counts, max_depth, min_samples_leaf, max_features, seed, S_full=None):
    mask = counts > 0
    S = _restrict(_presort(X) if S_full is None else S_full, mask)
    out = K.grow_presorted(
        X, S, w * y, w, counts.astype(float), w, K.GINI,
        -1 if max_depth is None else int(max_depth), int(min_samples_leaf), 0.0, 0.0,
        int(max_features), int(seed),
    )
    return _tree_from(out, X.shape[1])


def fit_tree(X, y, sample_weights=None, cfg: FitConfig | None = None) -> Tree:
    """Weighted-Gini CART classifier. Leaves hold the weighted positive fraction."""
    cfg = cfg or FitConfig()
    X, y = _check_xy(X, y)
    w = np.ones(len(y)) if sample_weights is None else np.asarray(sample_weights, float)
    if len(w) != len(y) or np.any(~(w > 0)):
        raise FitError("sample weights must be positive, one per row")
    n_split = _n_split_features(X.shape[1], cfg.feature_subsample, default_sqrt=False)
    tree, _ = _grow_gini(
        X, y, w, np.ones(len(y)), cfg.max_depth, cfg.min_samples_leaf, n_split, cfg.seed
    )
    return tree


@dataclass(eq=False)
class EnsembleModel:
    kind: str  # "forest" | "boosted"
    trees: list
    n_features: int
    feature_names: list | None = None
    learning_rate: float = 1.0
    base_score: float = 0.0
    feature_importances: np.ndarray | None = None
    tree_meta: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def predict_raw(self, X) -> np.ndarray:
        """Forest: mean leaf probability. Boosted: log-odds score."""
        X = _check_X(X, self.n_features)
        if self.kind == "forest":
            acc = np.zeros(len(X))
            for t in self.trees:
                acc += t.predict(X)
            return acc / len(self.trees)
        raw = np.full(len(X), self.base_score)
        for t in self.trees:
            raw += self.learning_rate * t.predict(X)
        return raw

    def predict_proba(self, X) -> np.ndarray:
        raw = self.predict_raw(X)
        return raw if self.kind == "forest" else _sigmoid(raw)


def _sigmoid(z):
    z = np.asarray(z, float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _derive_seeds(seed, n):
    children = np.random.SeedSequence(int(seed)).spawn(n)
    return [int(c.generate_state(1, np.uint64)[0] >> np.uint64(1)) for c in children]


def fit_forest(X, y, cfg: FitConfig | None = None, feature_names=None, n_jobs: int = 1) -> EnsembleModel:
    """Bootstrap-aggregated Gini trees with per-split feature subsampling.

    Class weights fold into the per-row sample weights; a bootstrap draw is
    represented as integer multiplicities, so each tree sees the same rows as
    a resampled copy would. Tree ``i`` uses seed ``i`` of a SeedSequence spawn,
    which makes the result independent of ``n_jobs``.
    """
    cfg = cfg or FitConfig()
    X, y = _check_xy(X, y)
    n, d = X.shape
    base_w = cfg.class_weights.sample_weights(y) if cfg.class_weights is not None else np.ones(n)
    n_split = _n_split_features(d, cfg.feature_subsample, default_sqrt=True)
    S_full = _presort(X)
    seeds = _derive_seeds(cfg.seed, cfg.n_trees)

    def build(i):
        rng = np.random.default_rng(seeds[i])
        if cfg.bootstrap:
            counts = np.bincount(rng.integers(0, n, n), minlength=n).astype(float)
        else:
            counts = np.ones(n)
        tree_seed = int(rng.integers(0, 2**62))
        tree, imp = _grow_gini(
            X, y, base_w * counts, counts, cfg.max_depth, cfg.min_samples_leaf, n_split,
            tree_seed, S_full,
        )
        meta = {"seed": seeds[i], "n_in_bag": int((counts > 0).sum())}
        return tree, imp, meta

    if n_jobs > 1 and cfg.n_trees > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(build, range(cfg.n_trees)))
    else:
        results = [build(i) for i in range(cfg.n_trees)]

    importances = np.zeros(d)
    for _, imp, _ in results:
        s = imp.sum()
        if s > 0:
            importances += imp / s
    importances /= cfg.n_trees
    return EnsembleModel(
        kind="forest",
        trees=[r[0] for r in results],
        n_features=d,
        feature_names=list(feature_names) if feature_names is not None else None,
        feature_importances=importances,
        tree_meta=[r[2] for r in results],
        config=cfg.to_dict(),
    )


def quantile_edges(X, n_bins):
    """Candidate thresholds per feature: midpoints between consecutive distinct
    values, thinned to at most ``n_bins - 1`` by quantile position."""
    n, d = X.shape
    per_feature = []
    for f in range(d):
        v = np.sort(X[:, f])
        uniq = np.unique(v)
        if len(uniq) <= n_bins:
            cuts = 0.5 * (uniq[:-1] + uniq[1:])
        else:
            pos = (np.arange(1, n_bins) * n) // n_bins
            lo, hi = v[pos - 1], v[pos]
            cuts = []
            for a, b in zip(lo, hi):
                if b > a:
                    cuts.append(0.5 * (a + b))
                else:
                    # cut inside a run of ties: split right after the tied value
                    k = np.searchsorted(uniq, a, side="right")
                    if k < len(uniq):
                        cuts.append(0.5 * (a + uniq[k]))
            cuts = np.unique(np.asarray(cuts, float))
        per_feature.append(np.asarray(cuts, float))
    width = max(1, max(len(c) for c in per_feature))
    edges = np.full((d, width), np.inf)
    n_edges = np.zeros(d, np.int64)
    for f, c in enumerate(per_feature):
        edges[f, : len(c)] = c
        n_edges[f] = len(c)
    return edges, n_edges


def bin_features(X, edges, n_edges) -> np.ndarray:
    Xb = np.empty(X.shape, dtype=np.int64)
    for f in range(X.shape[1]):
        Xb[:, f] = np.searchsorted(edges[f, : n_edges[f]], X[:, f], side="left")
    return Xb


def _log_loss(y, raw, w):
    # log(1 + e^z) - y z, computed stably
    loss = np.logaddexp(0.0, raw) - y * raw
    return float(np.sum(w * loss) / np.sum(w))


def fit_gbdt(X, y, cfg: FitConfig | None = None, feature_names=None) -> EnsembleModel:
    """Logistic-loss gradient boosting with Newton leaf values -G/(H+lambda).

    ``cfg.split_search`` picks exact sorted split search or quantile
    histograms with ``cfg.n_bins`` bins. ``cfg.class_weights`` scales the
    gradient and hessian of each row (``positive_scale`` for positives when
    the map is in ratio form).
    """
    cfg = cfg or FitConfig()
    X, y = _check_xy(X, y)
    if not 0 < cfg.learning_rate <= 1:
        raise FitError("boosting learning_rate must be in (0, 1]")
    n, d = X.shape
    max_depth = 6 if cfg.max_depth is None else cfg.max_depth
    w = cfg.class_weights.sample_weights(y) if cfg.class_weights is not None else np.ones(n)
    n_split = _n_split_features(d, cfg.feature_subsample, default_sqrt=False)

    pos = float(np.sum(w * y))
    neg = float(np.sum(w * (1 - y)))
    p0 = min(max(pos / (pos + neg), 1e-12), 1 - 1e-12)
    base = math.log(p0 / (1 - p0))
    model = EnsembleModel(
        kind="boosted", trees=[], n_features=d,
        feature_names=list(feature_names) if feature_names is not None else None,
        learning_rate=cfg.learning_rate, base_score=base, config=cfg.to_dict(),
    )
    raw = np.full(n, base)
    model.train_loss.append(_log_loss(y, raw, w))
    importances = np.zeros(d)
    if pos == 0 or neg == 0:
        model.feature_importances = importances
        return model

    counts = np.ones(n)
    if cfg.split_search == "exact":
        S_full = _presort(X)
    else:
        edges, n_edges = quantile_edges(X, cfg.n_bins)
        Xb = bin_features(X, edges, n_edges)
    seeds = _derive_seeds(cfg.seed, cfg.n_trees)
    for rnd in range(cfg.n_trees):
        p = _sigmoid(raw)
        g = w * (p - y)
        h = w * p * (1 - p)
        if cfg.split_search == "exact":
            out = K.grow_presorted(
                X, S_full.copy(), g, h, counts, w, K.SECOND_ORDER, int(max_depth),
                int(cfg.min_samples_leaf), float(cfg.min_child_weight),
                float(cfg.l2_leaf_penalty), int(n_split), seeds[rnd],
            )
        else:
            out = K.grow_histogram(
                Xb, edges, n_edges, np.arange(n, dtype=np.int64), g, h, counts, w,
                int(max_depth), int(cfg.min_samples_leaf), float(cfg.min_child_weight),
                float(cfg.l2_leaf_penalty), int(n_split), seeds[rnd],
            )
        tree, imp = _tree_from(out, d)
        importances += imp
        step = tree.predict(X)
        raw = raw + cfg.learning_rate * step
        loss = _log_loss(y, raw, w)
        if not math.isfinite(loss):
            raise FitError(f"non-finite training loss at boosting round {rnd}")
        model.trees.append(tree)
        model.train_loss.append(loss)
    s = importances.sum()
    model.feature_importances = importances / s if s > 0 else importances
    return model

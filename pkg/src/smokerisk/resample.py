"""Class-imbalance handling: class weights, random re-sampling, NRSBoundary-SMOTE."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .table import Table

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WeightMap:
    """Per-class weights plus the negative/positive ratio used by boosting."""

    weights: dict  # class label (0/1) -> weight
    positive_scale: float = 1.0
    mode: str = "inverse_frequency"

    def sample_weights(self, y) -> np.ndarray:
        y = np.asarray(y)
        w = np.ones(len(y))
        for c, wc in self.weights.items():
            w[y == c] = wc
        return w

    def to_dict(self):
        return {
            "mode": self.mode,
            "weights": {str(int(k)): v for k, v in self.weights.items()},
            "positive_scale": self.positive_scale,
        }

    @classmethod
    def from_dict(cls, d):
        return cls({int(k): float(v) for k, v in d["weights"].items()}, float(d["positive_scale"]), d["mode"])


def class_weights(labels, mode: str = "inverse_frequency") -> WeightMap:
    """``inverse_frequency``: w_c = n / (2 n_c).  ``ratio``: positives get
    n_neg / n_pos, negatives 1 (the boosting ``scale_pos_weight`` form)."""
    y = np.asarray(labels)
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise DataError("class_weights needs at least two classes")
    if classes.size > 2 or not set(classes.tolist()) <= {0, 1}:
        raise DataError(f"class_weights expects binary 0/1 labels, got {classes.tolist()}")
    n = y.size
    n_neg, n_pos = int(counts[0]), int(counts[1])
    scale = n_neg / n_pos
    if mode == "inverse_frequency":
        w = {int(c): n / (classes.size * int(k)) for c, k in zip(classes, counts)}
    elif mode == "ratio":
        w = {0: 1.0, 1: scale}
    else:
        raise ConfigError(f"unknown class weight mode {mode!r}")
    return WeightMap(w, scale, mode)


def _label_column(t: Table) -> np.ndarray:
    y = t.label
    if y.dtype == object:
        raise DataError("label column must be encoded before resampling")
    return y


def random_resample(t: Table, mode: str = "oversample", seed: int = 0) -> Table:
    """Balance a binary label by duplicating minority rows or dropping
    majority rows. Original row order is kept; added copies go at the end."""
    y = _label_column(t)
    classes, counts = np.unique(y[~np.isnan(y)], return_counts=True)
    if classes.size < 2 or counts.min() == 0:
        raise DataError("random_resample: empty minority class")
    minority = classes[np.argmin(counts)]
    majority = classes[np.argmax(counts)]
    n_min, n_maj = counts.min(), counts.max()
    rng = np.random.default_rng(seed)
    if n_min == n_maj:
        return t
    if mode == "oversample":
        pool = np.flatnonzero(y == minority)
        extra = rng.choice(pool, size=n_maj - n_min, replace=True)
        rows = np.concatenate([np.arange(t.n_rows), np.sort(extra)])
    elif mode == "undersample":
        pool = np.flatnonzero(y == majority)
        keep = np.sort(rng.choice(pool, size=n_min, replace=False))
        rows = np.sort(np.concatenate([np.flatnonzero(y != majority), keep]))
    else:
        raise ConfigError(f"unknown resample mode {mode!r}")
    return t.take(rows)


@dataclass(frozen=True)
class SmoteConfig:
    k: int = 5
    r: float = 1.0
    seed: int = 0
    boundary_rule: str = "nrs"

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("SmoteConfig.k must be >= 1")
        if not self.r > 0:
            raise ConfigError("SmoteConfig.r must be > 0")
        if self.boundary_rule not in ("nrs", "none"):
            raise ConfigError(f"unknown boundary_rule {self.boundary_rule!r}")


@dataclass
class SmoteResult:
    samples: np.ndarray  # S_min followed by S_syn
    n_original: int
    synthetic: np.ndarray
    origin: np.ndarray  # index of the seed minority point x_i per synthetic row
    partner: np.ndarray  # index of the neighbor x_j
    lam: np.ndarray
    boundary: np.ndarray  # bool per minority point
    radius: np.ndarray  # mean distance to the k minority neighbours (metadata)
    warnings: list = field(default_factory=list)

    @property
    def labels(self):
        return np.ones(len(self.samples), dtype=int)


def _knn(query: np.ndarray, ref: np.ndarray, k: int, exclude_self: bool) -> np.ndarray:
    """Indices of the k nearest rows of ``ref`` (Euclidean); ties by lower index.
    With ``exclude_self`` query i is ref i and is skipped by index."""
    out = np.empty((len(query), k), dtype=np.int64)
    for i, q in enumerate(query):
        d = np.sum((ref - q) ** 2, axis=1)
        if exclude_self:
            d[i] = np.inf
        out[i] = np.lexsort((np.arange(len(ref)), d))[:k]
    return out


def boundary_points(X_min, X_maj, k: int) -> np.ndarray:
    """A minority point is on the boundary when any of its k nearest
    neighbours in the pooled data belongs to the majority class."""
    pooled = np.vstack([X_min, X_maj])
    is_maj = np.r_[np.zeros(len(X_min), bool), np.ones(len(X_maj), bool)]
    kk = min(k, len(pooled) - 1)
    nn = _knn(X_min, pooled, kk, exclude_self=True)
    return is_maj[nn].any(axis=1)


def nrs_boundary_smote(X_min, X_maj, cfg: SmoteConfig, lam=None) -> SmoteResult:
    """Generate ``round(r * |S_min|)`` synthetic minority points by interpolating
    boundary minority points toward one of their k nearest minority neighbours.

    ``lam`` overrides the U(0,1) interpolation draw (scalar or callable
    ``lam(rng) -> float``), which is how the endpoint cases are exercised.
    """
    X_min = np.asarray(X_min, float)
    X_maj = np.asarray(X_maj, float)
    if X_min.ndim == 1:
        X_min = X_min[:, None]
    if X_maj.ndim == 1:
        X_maj = X_maj[:, None]
    n_min = len(X_min)
    if n_min <= cfg.k:
        raise DataError(f"NRSBoundary-SMOTE needs more than k={cfg.k} minority points, got {n_min}")
    rng = np.random.default_rng(cfg.seed)
    nn = _knn(X_min, X_min, cfg.k, exclude_self=True)
    radius = np.array([np.mean(np.linalg.norm(X_min[nn[i]] - X_min[i], axis=1)) for i in range(n_min)])
    warnings = []
    if cfg.boundary_rule == "nrs" and len(X_maj):
        boundary = boundary_points(X_min, X_maj, cfg.k)
    else:
        boundary = np.ones(n_min, bool)
    if not boundary.any():
        msg = "no minority point lies on the boundary; falling back to plain SMOTE"
        log.warning(msg)
        warnings.append(msg)
        seeds_pool = np.arange(n_min)
    else:
        seeds_pool = np.flatnonzero(boundary)

    n_syn = int(round(cfg.r * n_min))
    origin = np.empty(n_syn, np.int64)
    partner = np.empty(n_syn, np.int64)
    lams = np.empty(n_syn)
    # sweep the boundary points in order, repeating passes until the quota is met
    for s in range(n_syn):
        i = seeds_pool[s % len(seeds_pool)]
        j = nn[i, rng.integers(cfg.k)]
        if lam is None:
            l = rng.random()
        elif callable(lam):
            l = float(lam(rng))
        else:
            l = float(lam)
        origin[s], partner[s], lams[s] = i, j, l
    synthetic = X_min[origin] + lams[:, None] * (X_min[partner] - X_min[origin])
    return SmoteResult(
        samples=np.vstack([X_min, synthetic]),
        n_original=n_min,
        synthetic=synthetic,
        origin=origin,
        partner=partner,
        lam=lams,
        boundary=boundary,
        radius=radius,
        warnings=warnings,
    )


def smote_table(t: Table, features, cfg: SmoteConfig) -> Table:
    """Append NRSBoundary-SMOTE rows (minority label) to a numeric table.
    Columns outside ``features`` other than the label are left missing in
    synthetic rows."""
    y = _label_column(t)
    classes, counts = np.unique(y, return_counts=True)
    minority = classes[np.argmin(counts)]
    X = t.matrix(features)
    res = nrs_boundary_smote(X[y == minority], X[y != minority], cfg)
    n_new = len(res.synthetic)
    cols = {}
    for name in t.names:
        a = t[name]
        if name in features:
            extra = res.synthetic[:, list(features).index(name)]
        elif name == t.schema.label:
            extra = np.full(n_new, minority, dtype=float)
        else:
            extra = np.full(n_new, np.nan) if a.dtype != object else np.full(n_new, None, dtype=object)
        cols[name] = np.concatenate([a, extra])
    return Table(t.schema, cols, t.n_rows + n_new)

"""PCA and k-means patient profiling."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


@dataclass
class PCAModel:
    components: np.ndarray  # (n_components, n_features), orthonormal rows
    explained_variance: np.ndarray
    explained_ratio: np.ndarray
    mean: np.ndarray
    total_variance: float

    @property
    def n_components(self):
        return len(self.components)

    def to_dict(self):
        return {
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "explained_ratio": self.explained_ratio.tolist(),
            "mean": self.mean.tolist(),
            "total_variance": self.total_variance,
        }


def pca_fit(X, n_components: int | None = None) -> PCAModel:
    """Eigendecomposition of the sample covariance (n-1 denominator).

    Components are sorted by decreasing eigenvalue, and each is signed so
    that its largest-magnitude loading is positive.
    """
    X = np.asarray(X, float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("PCA needs at least 2 rows")
    n, d = X.shape
    k = d if n_components is None else int(n_components)
    if not 1 <= k <= d:
        raise DataError(f"n_components must be in [1, {d}], got {k}")
    mu = X.mean(axis=0)
    Xc = X - mu
    cov = Xc.T @ Xc / (n - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(-vals, kind="mergesort")
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order].T
    for i, v in enumerate(vecs):
        j = int(np.argmax(np.abs(v)))
        if v[j] < 0:
            vecs[i] = -v
    total = float(np.trace(cov))
    ratio = vals / total if total > 0 else np.zeros_like(vals)
    return PCAModel(vecs[:k].copy(), vals[:k].copy(), ratio[:k].copy(), mu, total)


def pca_transform(model: PCAModel, X) -> np.ndarray:
    X = np.asarray(X, float)
    if X.shape[1] != model.mean.shape[0]:
        raise DataError(f"expected {model.mean.shape[0]} features, got {X.shape[1]}")
    return (X - model.mean) @ model.components.T


def pca_inverse(model: PCAModel, scores) -> np.ndarray:
    return np.asarray(scores, float) @ model.components + model.mean


@dataclass
class ClusterResult:
    k: int
    centroids: np.ndarray
    assignment: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: list = field(default_factory=list)  # after each assignment step
    restart_inertias: list = field(default_factory=list)
    reseeded: int = 0

    def cluster_means(self, X) -> np.ndarray:
        X = np.asarray(X, float)
        return np.vstack([X[self.assignment == c].mean(axis=0) if np.any(self.assignment == c)
                          else np.full(X.shape[1], np.nan) for c in range(self.k)])

    def to_dict(self):
        return {
            "k": self.k,
            "centroids": self.centroids.tolist(),
            "inertia": self.inertia,
            "n_iter": self.n_iter,
            "inertia_history": self.inertia_history,
            "restart_inertias": self.restart_inertias,
            "reseeded_empty_clusters": self.reseeded,
            "sizes": np.bincount(self.assignment, minlength=self.k).tolist(),
        }


def _sq_dists(X, C):
    # ||x||^2 - 2 x.c + ||c||^2, clipped at 0 against round-off
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _assign(X, C):
    D = _sq_dists(X, C)
    a = np.argmin(D, axis=1)
    return a, D[np.arange(len(X)), a]


def _plus_plus(X, k, rng):
    n = len(X)
    centers = [int(rng.integers(n))]
    d2 = _sq_dists(X, X[centers])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a centre; take the first unused row
            used = set(centers)
            nxt = next(i for i in range(n) if i not in used)
        else:
            nxt = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            nxt = min(nxt, n - 1)
        centers.append(nxt)
        d2 = np.minimum(d2, _sq_dists(X, X[[nxt]])[:, 0])
    return X[centers].copy()


def _lloyd(X, k, rng, max_iter):
    C = _plus_plus(X, k, rng)
    a, d = _assign(X, C)
    history = [float(d.sum())]
    reseeded = 0
    it = 0
    for it in range(1, max_iter + 1):
        C_new = np.empty_like(C)
        for c in range(k):
            members = a == c
            if members.any():
                C_new[c] = X[members].mean(axis=0)
            else:
                # empty cluster: move it to the point farthest from its centre
                far = int(np.argmax(d))
                C_new[c] = X[far]
                d[far] = 0.0
                reseeded += 1
        a_new, d_new = _assign(X, C_new)
        C = C_new
        history.append(float(d_new.sum()))
        if np.array_equal(a_new, a):
            a, d = a_new, d_new
            break
        a, d = a_new, d_new
    return C, a, float(d.sum()), it, history, reseeded


def kmeans(X, k: int, seed: int = 0, n_restarts: int = 10, max_iter: int = 300, n_jobs: int = 1) -> ClusterResult:
    """k-means++ seeding then Lloyd iterations until the assignment stops
    changing (or ``max_iter``); the lowest-inertia restart is kept.

    Restart ``r`` draws from its own spawned seed, so the result does not
    depend on ``n_jobs``.
    """
    X = np.asarray(X, float)
    if X.ndim != 2 or len(X) == 0:
        raise DataError("kmeans needs a non-empty 2-D array")
    if not 1 <= k <= len(X):
        raise DataError(f"k must be in [1, {len(X)}], got {k}")
    if n_restarts < 1:
        raise DataError("n_restarts must be >= 1")
    seeds = np.random.SeedSequence(seed).spawn(n_restarts)

    def run(ss):
        return _lloyd(X, k, np.random.default_rng(ss), max_iter)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            runs = list(ex.map(run, seeds))
    else:
        runs = [run(s) for s in seeds]
    inertias = [r[2] for r in runs]
    best = int(np.argmin(inertias))
    C, a, inertia, it, history, reseeded = runs[best]
    return ClusterResult(k, C, a, inertia, it, history, inertias, reseeded)


def write_profile_csv(path, scores, assignment, row_ids=None):
    """(row_id, pc1, pc2, ..., cluster) for scatter plots."""
    scores = np.asarray(scores, float)
    ids = range(len(scores)) if row_ids is None else row_ids
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row_id"] + [f"pc{j + 1}" for j in range(scores.shape[1])] + ["cluster"])
        for rid, row, c in zip(ids, scores, assignment):
            w.writerow([rid] + [repr(float(v)) for v in row] + [int(c)])


def write_cluster_means_csv(path, result: ClusterResult, X, names):
    means = result.cluster_means(X)
    sizes = np.bincount(result.assignment, minlength=result.k)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster", "size"] + list(names))
        for c in range(result.k):
            w.writerow([c, int(sizes[c])] + [repr(float(v)) for v in means[c]])

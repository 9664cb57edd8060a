"""Independent references for oversampling tests."""

import numpy as np


def knn_within(X, i, k):
    """Indices whose distance to X[i] is at most the k-th smallest (ties kept)."""
    d = np.linalg.norm(X - X[i], axis=1)
    d[i] = np.inf
    kth = np.sort(d)[k - 1]
    return set(np.flatnonzero(d <= kth + 1e-12).tolist())


def oracle_boundary(X_min, X_maj, k):
    pooled = np.vstack([X_min, X_maj])
    out = []
    for i in range(len(X_min)):
        d = np.linalg.norm(pooled - X_min[i], axis=1)
        d[i] = np.inf
        order = np.argsort(d, kind="stable")[: min(k, len(pooled) - 1)]
        out.append(bool(np.any(order >= len(X_min))))
    return np.array(out)


def on_some_segment(s, X_min, origins, k, tol=1e-9):
    for i in origins:
        for j in knn_within(X_min, i, k):
            a, b = X_min[i], X_min[j]
            ab = b - a
            denom = ab @ ab
            if denom == 0:
                if np.linalg.norm(s - a) < tol:
                    return True
                continue
            lam = (s - a) @ ab / denom
            if -tol <= lam <= 1 + tol and np.linalg.norm(a + lam * ab - s) < tol * (1 + np.linalg.norm(ab)):
                return True
    return False

"""Pearson correlation, t-based confidence intervals, paired t-tests."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy import special, stats as _sps

from .errors import DataError
from .table import Table


@dataclass
class CorrMatrix:
    names: list
    r: np.ndarray  # NaN marks an undefined pair (zero variance or < 2 complete rows)
    method: str = "pearson, pairwise deletion"

    def get(self, a, b) -> float:
        return float(self.r[self.names.index(a), self.names.index(b)])

    def pairs(self):
        for i, a in enumerate(self.names):
            for j, b in enumerate(self.names):
                if j > i:
                    v = self.r[i, j]
                    yield a, b, (None if np.isnan(v) else float(v))

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", *self.names])
            for name, row in zip(self.names, self.r):
                w.writerow([name, *("" if np.isnan(v) else repr(float(v)) for v in row)])

    def to_heatmap_json(self):
        return {
            "method": self.method,
            "features": list(self.names),
            "pairs": [{"x": a, "y": b, "r": r} for a, b, r in self.pairs()],
        }

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_heatmap_json(), fh, indent=2)


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    ok = ~(np.isnan(x) | np.isnan(y))
    x, y = x[ok], y[ok]
    if x.size < 2:
        return math.nan
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return math.nan
    return float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def pearson_matrix(t: Table, columns=None) -> CorrMatrix:
    names = list(t.schema.feature_names() if columns is None else columns)
    cols = [np.asarray(t[n], dtype=float) for n in names]
    k = len(names)
    r = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            r[i, j] = r[j, i] = pearson(cols[i], cols[j])
    for i in range(k):
        c = cols[i][~np.isnan(cols[i])]
        if c.size < 2 or np.all(c == c[0]):
            r[i, :] = r[:, i] = np.nan
            r[i, i] = 1.0
    return CorrMatrix(names, r)


def t_sf(t: float, df: float) -> float:
    """P(T > t) for Student's t via the regularized incomplete beta function."""
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    x = df / (df + t * t)
    tail = 0.5 * float(special.betainc(df / 2.0, 0.5, x))
    return tail if t >= 0 else 1.0 - tail


def t_two_sided_p(t: float, df: float) -> float:
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0
    return min(1.0, 2.0 * t_sf(abs(t), df))


def t_quantile(q: float, df: float) -> float:
    return float(_sps.t.ppf(q, df))


@dataclass
class TTestResult:
    mean_difference: float
    t_statistic: float
    p_value: float
    df: int

    def to_dict(self):
        return asdict(self)


def paired_t_test(a, b) -> TTestResult:
    a, b = np.asarray(a, float), np.asarray(b, float)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError("paired_t_test needs two equal-length 1-D score lists")
    n = a.size
    if n < 2:
        raise DataError("paired_t_test needs n >= 2")
    d = a - b
    dbar = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if dbar == 0.0:
            return TTestResult(0.0, 0.0, 1.0, n - 1)
        return TTestResult(dbar, math.copysign(math.inf, dbar), 0.0, n - 1)
    t = dbar / (sd / math.sqrt(n))
    return TTestResult(dbar, t, t_two_sided_p(t, n - 1), n - 1)


@dataclass
class Interval:
    mean: float
    sd: float
    lower: float
    upper: float
    level: float
    n: int

    def to_dict(self):
        return asdict(self)


def mean_ci(scores, level: float = 0.95) -> Interval:
    x = np.asarray(scores, float)
    x = x[~np.isnan(x)]
    if x.size < 2:
        raise DataError("mean_ci needs at least 2 finite scores")
    if not 0 < level < 1:
        raise DataError("level must be in (0, 1)")
    n = x.size
    m = float(x.mean())
    sd = float(x.std(ddof=1))
    half = t_quantile((1 + level) / 2, n - 1) * sd / math.sqrt(n)
    return Interval(m, sd, m - half, m + half, level, n)

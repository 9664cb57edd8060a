"""Exact path-dependent TreeSHAP, mean-|SHAP| rankings and system grouping."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, ModelError
from .learners import EnsembleModel, Tree, predict_proba
from .learners import _kernels as K
from .learners.trees import _check_X


def _fmt(v):
    return "" if v is None else repr(float(v))


@dataclass
class ShapMatrix:
    """Per-row attributions. ``output`` says which space the values add up
    in: ``probability`` for trees and forests, ``raw`` (log-odds) for
    boosted models."""

    values: np.ndarray  # (n_rows, n_features)
    base_value: float
    feature_names: list
    output: str
    model: object = None

    def model_output(self, X) -> np.ndarray:
        if self.output == "raw":
            return self.model.predict_raw(X)
        return predict_proba(self.model, X)

    def local_accuracy_error(self, X) -> float:
        """max |base + sum(phi) - f(x)| over the rows of X."""
        f = self.model_output(X)
        return float(np.max(np.abs(self.base_value + self.values.sum(axis=1) - f)))

    def write_csv(self, path, row_ids=None):
        ids = range(len(self.values)) if row_ids is None else row_ids
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row_id", "base_value"] + list(self.feature_names))
            for rid, row in zip(ids, self.values):
                w.writerow([rid, _fmt(self.base_value)] + [_fmt(v) for v in row])

    def write_beeswarm_csv(self, path, X, row_ids=None):
        """Long format (feature, shap_value, feature_value, row_id)."""
        X = np.asarray(X, float)
        ids = list(range(len(self.values))) if row_ids is None else list(row_ids)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", "shap_value", "feature_value", "row_id"])
            for j, name in enumerate(self.feature_names):
                for i in range(len(self.values)):
                    w.writerow([name, _fmt(self.values[i, j]), _fmt(X[i, j]), ids[i]])


def _check_covers(tree: Tree):
    c = tree.cover
    if c is None or len(c) != tree.n_nodes or not np.all(np.isfinite(c)) or np.any(c <= 0):
        raise ModelError("tree lacks positive weighted_sample_count at every node; TreeSHAP needs node covers")


def _tree_phi(tree: Tree, X: np.ndarray, n_jobs: int = 1) -> np.ndarray:
    _check_covers(tree)
    depth = tree.max_depth

    def run(chunk):
        return K.tree_shap_rows(
            tree.feature, tree.threshold, tree.left, tree.right, tree.value, tree.cover,
            depth, chunk, tree.n_features,
        )

    if n_jobs <= 1 or len(X) < 2 * n_jobs:
        return run(X)
    chunks = np.array_split(X, n_jobs)
    with ThreadPoolExecutor(max_workers=n_jobs) as ex:
        return np.vstack(list(ex.map(run, chunks)))


def tree_shap(model, X, feature_names=None, n_jobs: int = 1) -> ShapMatrix:
    """Exact SHAP values under the tree-path-dependent conditional expectation.

    A forest's values are the per-tree values averaged (its probability is the
    mean of tree probabilities); a boosted model's are the per-tree values
    summed and scaled by the learning rate, in log-odds space. A 1-D ``x`` is
    treated as one row.
    """
    if isinstance(model, Tree):
        trees, weight, base, output = [model], 1.0, 0.0, "probability"
    elif isinstance(model, EnsembleModel):
        if model.kind == "forest":
            if not model.trees:
                raise ModelError("forest has no trees")
            trees, weight, base, output = model.trees, 1.0 / len(model.trees), 0.0, "probability"
        else:
            trees, weight, base, output = model.trees, model.learning_rate, model.base_score, "raw"
    else:
        raise ModelError(f"TreeSHAP needs a tree model, got {type(model).__name__}")
    d = model.n_features
    X = np.asarray(X, float)
    if X.ndim == 1:
        X = X[None, :]
    X = _check_X(X, d)
    phi = np.zeros((len(X), d))
    ev = base
    for t in trees:
        phi += weight * _tree_phi(t, X, n_jobs)
        ev += weight * t.expected_value()
    names = feature_names or getattr(model, "feature_names", None) or [f"f{j}" for j in range(d)]
    return ShapMatrix(phi, float(ev), list(names), output, model)


@dataclass
class RankedFeature:
    feature: str
    mean_abs_shap: float
    share: float | None
    cumulative_share: float | None


@dataclass
class ImportanceRanking:
    entries: list  # RankedFeature, descending mean_abs_shap
    total: float

    @property
    def features(self):
        return [e.feature for e in self.entries]

    def value(self, feature):
        for e in self.entries:
            if e.feature == feature:
                return e.mean_abs_shap
        raise KeyError(feature)

    def top(self, n):
        return self.entries[:n]

    def share_of_top(self, n):
        """Fraction of the all-feature total carried by the top n."""
        if not self.total > 0:
            return None
        return sum(e.mean_abs_shap for e in self.entries[:n]) / self.total

    def to_dict(self):
        return {"total": self.total, "entries": [vars(e).copy() for e in self.entries]}

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rank", "feature", "mean_abs_shap", "share", "cumulative_share"])
            for i, e in enumerate(self.entries, 1):
                w.writerow([i, e.feature, _fmt(e.mean_abs_shap), _fmt(e.share), _fmt(e.cumulative_share)])


def rank_importances(names, values) -> ImportanceRanking:
    """Sort descending (ties keep input order); shares are over the total of
    all features. With an all-zero total the shares are undefined (None)."""
    values = np.asarray(values, float)
    order = np.argsort(-values, kind="mergesort")
    total = float(values.sum())
    entries = []
    cum = 0.0
    for j in order:
        v = float(values[j])
        cum += v
        if total > 0:
            entries.append(RankedFeature(names[j], v, v / total, min(cum / total, 1.0)))
        else:
            entries.append(RankedFeature(names[j], v, None, None))
    if total > 0:
        entries[-1].cumulative_share = 1.0
    return ImportanceRanking(entries, total)


def shap_summary(model, X, feature_names=None, n_jobs: int = 1):
    """(ImportanceRanking by mean |SHAP| over X, ShapMatrix)."""
    X = np.asarray(X, float)
    if X.ndim != 2 or len(X) == 0:
        raise DataError("shap_summary needs a non-empty 2-D X")
    sm = tree_shap(model, X, feature_names, n_jobs)
    return rank_importances(sm.feature_names, np.mean(np.abs(sm.values), axis=0)), sm


# ---------------------------------------------------------------- systems


def load_system_map(path=None) -> dict:
    """System name -> member feature list. Defaults to the shipped map."""
    if path is None:
        text = resources.files("smokerisk.resources").joinpath("system_map.json").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    doc = json.loads(text)
    return {k: list(v) for k, v in doc["systems"].items()}


def _check_system_map(system_map: dict):
    seen = {}
    for system, members in system_map.items():
        if not members:
            raise ConfigError(f"system {system!r} has no member features")
        for f in members:
            if f in seen:
                raise ConfigError(f"feature {f!r} is in both {seen[f]!r} and {system!r}")
            seen[f] = system
    return seen


@dataclass
class SystemImportance:
    system: str
    importance: float | None
    members: list


def group_importance(ranking: ImportanceRanking, system_map: dict) -> list:
    """Per-system importance = mean of the members' mean |SHAP|.

    Every ranked feature must belong to exactly one system. Map members
    absent from the ranking (e.g. dropped by selection) are skipped; a
    system left with no ranked member gets ``None``.
    """
    owner = _check_system_map(system_map)
    unmapped = [f for f in ranking.features if f not in owner]
    if unmapped:
        raise ConfigError(f"features missing from the system map: {', '.join(unmapped)}")
    present = {e.feature: e.mean_abs_shap for e in ranking.entries}
    out = []
    for system, members in system_map.items():
        vals = [present[f] for f in members if f in present]
        out.append(SystemImportance(system, float(np.mean(vals)) if vals else None,
                                    [f for f in members if f in present]))
    out.sort(key=lambda s: np.inf if s.importance is None else -s.importance)
    return out


def write_systems_csv(systems, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["system", "importance", "members"])
        for s in systems:
            w.writerow([s.system, _fmt(s.importance), ";".join(s.members)])


# ---------------------------------------------------------------- dependence


@dataclass
class DependenceGrid:
    features: tuple  # axis labels
    grid_a: np.ndarray
    grid_b: np.ndarray
    mean_prediction: np.ndarray  # (len(grid_a), len(grid_b))

    def write_csv(self, path):
        a, b = self.features
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([a, b, "mean_prediction"])
            for i, va in enumerate(self.grid_a):
                for j, vb in enumerate(self.grid_b):
                    w.writerow([_fmt(va), _fmt(vb), _fmt(self.mean_prediction[i, j])])


def _axis(spec, column):
    if isinstance(spec, int):
        if spec < 1:
            raise DataError("grid needs at least one point per axis")
        return np.linspace(np.min(column), np.max(column), spec)
    g = np.asarray(spec, float)
    if g.size == 0:
        raise DataError("empty grid")
    return g


def dependence_grid(model, X, feature_pair, grid_spec=20, transform=None, names=None) -> DependenceGrid:
    """Partial dependence over two features: each cell is the mean prediction
    over X with both features overridden to the cell's values.

    ``feature_pair`` holds column indices of X. ``grid_spec`` is a point count
    per axis (spanning the data range) or a pair of explicit value arrays.
    ``transform(X) -> X`` maps the overridden matrix to model inputs, which is
    how a derived axis such as BMI or a standardized column is handled.
    """
    X = np.asarray(X, float)
    if len(X) == 0:
        raise DataError("dependence_grid needs data")
    a, b = feature_pair
    sa, sb = grid_spec if isinstance(grid_spec, (tuple, list)) else (grid_spec, grid_spec)
    ga, gb = _axis(sa, X[:, a]), _axis(sb, X[:, b])
    out = np.empty((len(ga), len(gb)))
    Z = X.copy()
    for i, va in enumerate(ga):
        Z[:, a] = va
        for j, vb in enumerate(gb):
            Z[:, b] = vb
            inputs = Z if transform is None else transform(Z)
            out[i, j] = float(np.mean(predict_proba(model, inputs)))
    labels = (names[0], names[1]) if names else (f"f{a}", f"f{b}")
    return DependenceGrid(labels, ga, gb, out)


def bmi(weight_kg, height_cm):
    """weight / (height in metres)^2."""
    h = np.asarray(height_cm, float) / 100.0
    return np.asarray(weight_kg, float) / (h * h)

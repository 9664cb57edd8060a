"""Classification metrics, ROC/PR curves and the stratified cross-validation harness."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, FitError, ModelError, ToolkitError
from .learners import EnsembleModel, FitConfig, fit_forest, fit_gbdt, fit_linear_svm, fit_logreg, predict_proba
from .preprocess import Preprocessor, encode
from .resample import SmoteConfig, class_weights, nrs_boundary_smote, random_resample
from .stats import Interval, TTestResult, mean_ci, paired_t_test
from .table import ColumnSpec, Schema, Table

METRICS = ("accuracy", "sensitivity", "specificity", "precision", "f1", "g_mean", "auc_roc", "auc_pr")
LEARNERS = ("forest", "gbdt_exact", "gbdt_hist", "logreg", "linear_svm", "constant")


class MetricError(DataError):
    pass


def _num(v):
    """Repr-exact text for floats so repeated runs give byte-identical files."""
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _check_pair(labels, scores):
    y = np.asarray(labels, dtype=float).ravel()
    s = np.asarray(scores, dtype=float).ravel()
    if y.size == 0:
        raise MetricError("empty input")
    if y.size != s.size:
        raise MetricError(f"labels ({y.size}) and scores ({s.size}) differ in length")
    if not np.isin(y, (0.0, 1.0)).all():
        raise MetricError("labels must be binary 0/1")
    if not np.isfinite(s).all():
        raise MetricError("scores must be finite")
    return y, s


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int
    threshold: float = 0.5

    @property
    def n(self):
        return self.tp + self.fp + self.tn + self.fn


def confusion(labels, scores, threshold: float = 0.5) -> ConfusionMatrix:
    """A score at or above ``threshold`` predicts the positive class."""
    y, s = _check_pair(labels, scores)
    pred = s >= threshold
    pos = y == 1
    return ConfusionMatrix(
        tp=int(np.sum(pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        tn=int(np.sum(~pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
        threshold=float(threshold),
    )


def _ratio(a, b):
    return a / b if b > 0 else None


@dataclass(frozen=True)
class MetricSet:
    """Threshold metrics plus both AUCs. ``None`` marks an undefined value
    (e.g. precision with no positive predictions)."""

    accuracy: float | None
    sensitivity: float | None
    specificity: float | None
    precision: float | None
    f1: float | None
    g_mean: float | None
    auc_roc: float | None
    auc_pr: float | None
    confusion: ConfusionMatrix | None = None

    def get(self, name):
        return getattr(self, name)

    def to_dict(self):
        d = {m: self.get(m) for m in METRICS}
        if self.confusion is not None:
            c = self.confusion
            d["confusion"] = {"tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn, "threshold": c.threshold}
        return d

    @classmethod
    def from_dict(cls, d):
        c = d.get("confusion")
        return cls(**{m: d[m] for m in METRICS}, confusion=ConfusionMatrix(**c) if c else None)


def metrics_from_confusion(cm: ConfusionMatrix, auc_roc=None, auc_pr=None) -> MetricSet:
    sens = _ratio(cm.tp, cm.tp + cm.fn)
    spec = _ratio(cm.tn, cm.tn + cm.fp)
    prec = _ratio(cm.tp, cm.tp + cm.fp)
    f1 = None
    if prec is not None and sens is not None:
        f1 = 2 * prec * sens / (prec + sens) if prec + sens > 0 else 0.0
    g = math.sqrt(sens * spec) if sens is not None and spec is not None else None
    return MetricSet(
        accuracy=_ratio(cm.tp + cm.tn, cm.n),
        sensitivity=sens,
        specificity=spec,
        precision=prec,
        f1=f1,
        g_mean=g,
        auc_roc=auc_roc,
        auc_pr=auc_pr,
        confusion=cm,
    )


def _ranked_counts(y, s):
    """Cumulative (tp, fp) after each distinct score, highest score first."""
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    y_sorted = y[order]
    last_of_group = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), len(s_sorted) - 1]
    tp = np.cumsum(y_sorted)[last_of_group]
    fp = (last_of_group + 1) - tp
    return tp, fp, s_sorted[last_of_group]


def _require_both(y):
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        raise MetricError("AUC needs both classes present")
    return n_pos, y.size - n_pos


def roc_curve(labels, scores):
    """(fpr, tpr, thresholds), starting at (0, 0); one point per distinct score."""
    y, s = _check_pair(labels, scores)
    n_pos, n_neg = _require_both(y)
    tp, fp, thr = _ranked_counts(y, s)
    fpr = np.r_[0.0, fp / n_neg]
    tpr = np.r_[0.0, tp / n_pos]
    return fpr, tpr, np.r_[np.inf, thr]


def auc_roc(labels, scores) -> float:
    """Trapezoid area under the ROC curve. Linear segments across tied scores
    give tied positive/negative pairs half credit."""
    fpr, tpr, _ = roc_curve(labels, scores)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def pr_curve(labels, scores):
    """(recall, precision, thresholds), one point per distinct score."""
    y, s = _check_pair(labels, scores)
    n_pos, _ = _require_both(y)
    tp, fp, thr = _ranked_counts(y, s)
    return tp / n_pos, tp / (tp + fp), thr


def auc_pr(labels, scores) -> float:
    """Step integration: sum over thresholds of (R_i - R_{i-1}) * P_i."""
    recall, precision, _ = pr_curve(labels, scores)
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def metric_set(labels, scores, threshold: float = 0.5) -> MetricSet:
    cm = confusion(labels, scores, threshold)
    return metrics_from_confusion(cm, auc_roc(labels, scores), auc_pr(labels, scores))


def write_curve_csv(path, x, y, header):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for a, b in zip(x, y):
            w.writerow([_num(float(a)), _num(float(b))])


# ---------------------------------------------------------------- folds


@dataclass(frozen=True)
class FoldAssignment:
    folds: np.ndarray  # fold index per row
    k: int

    def test_indices(self, i):
        return np.flatnonzero(self.folds == i)

    def train_indices(self, i):
        return np.flatnonzero(self.folds != i)

    def __iter__(self):
        for i in range(self.k):
            yield self.train_indices(i), self.test_indices(i)


def stratified_kfold(labels, k: int, seed: int = 0, strict: bool = True) -> FoldAssignment:
    """Shuffle each class with a seeded generator, then deal its rows to the
    folds round-robin. The dealing position carries over from one class to
    the next so fold sizes stay within one of each other as well.

    ``strict`` rejects a class with fewer than k members; turning it off
    allows leave-one-out style splits where some folds miss a class.
    """
    y = np.asarray(labels)
    if k < 2:
        raise ConfigError("k must be at least 2")
    if y.size < k:
        raise DataError(f"cannot split {y.size} rows into {k} folds")
    classes, counts = np.unique(y, return_counts=True)
    for c, n_c in zip(classes, counts):
        if strict and n_c < k:
            raise DataError(f"class {c!r} has {n_c} members, fewer than k={k}")
    rng = np.random.default_rng(seed)
    folds = np.empty(y.size, dtype=np.int64)
    start = 0
    for c in classes:
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(idx.size)]
        folds[idx] = (start + np.arange(idx.size)) % k
        start = (start + idx.size) % k
    return FoldAssignment(folds, k)


def holdout_split(labels, test_fraction: float = 0.2, seed: int = 0):
    """Stratified train/test split; returns (train_idx, test_idx)."""
    if not 0 < test_fraction < 1:
        raise ConfigError("test_fraction must be in (0, 1)")
    y = np.asarray(labels)
    rng = np.random.default_rng(seed)
    test = []
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(idx.size)]
        test.append(idx[: int(round(test_fraction * idx.size))])
    test = np.sort(np.concatenate(test))
    mask = np.ones(y.size, bool)
    mask[test] = False
    return np.flatnonzero(mask), test


# ---------------------------------------------------------------- models


@dataclass(frozen=True)
class ModelSpec:
    """A named learner plus how its training data is re-balanced.

    ``class_weighting`` is computed from each training fold's own labels.
    ``resampling`` (oversample, undersample or smote) is likewise applied to
    the training fold only, after standardization.
    """

    name: str
    learner: str
    config: FitConfig = field(default_factory=FitConfig)
    class_weighting: str | None = None  # inverse_frequency | ratio
    resampling: str | None = None  # oversample | undersample | smote
    smote: SmoteConfig | None = None

    def __post_init__(self):
        if self.learner not in LEARNERS:
            raise ConfigError(f"model {self.name!r}: unknown learner {self.learner!r}")
        if self.class_weighting not in (None, "inverse_frequency", "ratio"):
            raise ConfigError(f"model {self.name!r}: unknown class_weighting {self.class_weighting!r}")
        if self.resampling not in (None, "oversample", "undersample", "smote"):
            raise ConfigError(f"model {self.name!r}: unknown resampling {self.resampling!r}")

    def to_dict(self):
        return {
            "name": self.name,
            "learner": self.learner,
            "config": self.config.to_dict(),
            "class_weighting": self.class_weighting,
            "resampling": self.resampling,
            "smote": None if self.smote is None else vars(self.smote).copy(),
        }

    @classmethod
    def from_dict(cls, d):
        sm = d.get("smote")
        return cls(
            name=d["name"],
            learner=d["learner"],
            config=FitConfig.from_dict(d.get("config", {})),
            class_weighting=d.get("class_weighting"),
            resampling=d.get("resampling"),
            smote=SmoteConfig(**sm) if sm else None,
        )


def _rebalance(X, y, spec: ModelSpec, seed: int):
    if spec.resampling is None:
        return X, y
    if spec.resampling == "smote":
        cfg = spec.smote or SmoteConfig(seed=seed)
        minority = 1.0 if y.sum() * 2 < y.size else 0.0
        res = nrs_boundary_smote(X[y == minority], X[y != minority], cfg)
        return np.vstack([X, res.synthetic]), np.r_[y, np.full(len(res.synthetic), minority)]
    names = [f"x{i}" for i in range(X.shape[1])]
    schema = Schema([ColumnSpec(n, "continuous") for n in names] + [ColumnSpec("y", "binary")], label="y")
    t = Table.from_arrays(schema, {**{n: X[:, i] for i, n in enumerate(names)}, "y": y})
    out = random_resample(t, spec.resampling, seed)
    return out.matrix(names), out.label


def fit_model(spec: ModelSpec, X, y, feature_names=None, n_jobs: int = 1, seed: int | None = None):
    """Fit the learner named by ``spec`` on (X, y); class weights and
    resampling come from (X, y) alone."""
    cfg = spec.config
    if seed is not None:
        cfg = cfg.replace(seed=seed)
    X, y = _rebalance(np.asarray(X, float), np.asarray(y, float), spec, cfg.seed)
    if spec.class_weighting is not None:
        cfg = cfg.replace(class_weights=class_weights(y.astype(int), spec.class_weighting))
    if spec.learner == "forest":
        return fit_forest(X, y, cfg, feature_names, n_jobs=n_jobs)
    if spec.learner == "gbdt_exact":
        return fit_gbdt(X, y, cfg.replace(split_search="exact"), feature_names)
    if spec.learner == "gbdt_hist":
        return fit_gbdt(X, y, cfg.replace(split_search="histogram"), feature_names)
    if spec.learner == "logreg":
        return fit_logreg(X, y, cfg, feature_names)
    if spec.learner == "linear_svm":
        return fit_linear_svm(X, y, cfg, feature_names)
    # constant: the (weighted) prior, as a boosted model with no trees
    return EnsembleModel(
        kind="boosted", trees=[], n_features=X.shape[1],
        feature_names=list(feature_names) if feature_names is not None else None,
        learning_rate=1.0, base_score=_prior_log_odds(y, cfg), config=cfg.to_dict(),
    )


def _prior_log_odds(y, cfg):
    w = cfg.class_weights.sample_weights(y) if cfg.class_weights is not None else np.ones(len(y))
    p = min(max(float(np.sum(w * y) / np.sum(w)), 1e-12), 1 - 1e-12)
    return math.log(p / (1 - p))


def prepare(t: Table, features=None):
    """Encode categorical columns and settle the feature list."""
    t = encode(t)
    feats = t.schema.feature_names() if features is None else list(features)
    if not feats:
        raise DataError("no feature columns to model")
    return t, feats


def fold_matrices(t: Table, train_idx, test_idx, features, scale=True):
    """Preprocessing fitted on the training rows only, then applied to both."""
    train, test = t.take(train_idx), t.take(test_idx)
    pre = Preprocessor.fit(train.select(features + [t.schema.label]), scale=scale)
    Xtr = pre.apply(train.select(features + [t.schema.label])).matrix(features)
    Xte = pre.apply(test.select(features + [t.schema.label])).matrix(features)
    return Xtr, train.label.astype(float), Xte, test.label.astype(float), pre


# ---------------------------------------------------------------- CV report


@dataclass
class MetricSummary:
    mean: float | None
    sd: float | None
    interval: Interval | None
    n_defined: int
    n_undefined: int

    def to_dict(self):
        return {
            "mean": self.mean,
            "sd": self.sd,
            "ci_lower": None if self.interval is None else self.interval.lower,
            "ci_upper": None if self.interval is None else self.interval.upper,
            "n_defined": self.n_defined,
            "n_undefined": self.n_undefined,
        }


def summarize_metric(values, level=0.95) -> MetricSummary:
    """Mean, sd and t-interval over the defined fold values; undefined ones
    are counted and left out rather than treated as zero."""
    vals = [v for v in values if v is not None]
    n_undef = len(values) - len(vals)
    if not vals:
        return MetricSummary(None, None, None, 0, n_undef)
    if len(vals) == 1:
        return MetricSummary(float(vals[0]), None, None, 1, n_undef)
    iv = mean_ci(vals, level)
    return MetricSummary(iv.mean, iv.sd, iv, len(vals), n_undef)


@dataclass
class CVReport:
    models: list
    k: int
    seed: int
    threshold: float
    folds: dict  # model -> list[MetricSet]
    summary: dict  # model -> metric -> MetricSummary
    comparisons: list  # (model_a, model_b, TTestResult) on fold AUC-ROC
    oof_scores: dict  # model -> out-of-fold scores in row order
    labels: np.ndarray
    fold_assignment: np.ndarray

    def mean(self, model, metric):
        return self.summary[model][metric].mean

    def fold_values(self, model, metric):
        return [m.get(metric) for m in self.folds[model]]

    def comparison(self, a, b) -> TTestResult:
        for x, y, r in self.comparisons:
            if (x, y) == (a, b):
                return r
            if (x, y) == (b, a):
                return paired_t_test(self.fold_values(a, "auc_roc"), self.fold_values(b, "auc_roc"))
        raise KeyError((a, b))

    def to_dict(self):
        return {
            "k": self.k,
            "seed": self.seed,
            "threshold": self.threshold,
            "models": self.models,
            "folds": {m: [f.to_dict() for f in fs] for m, fs in self.folds.items()},
            "summary": {m: {k: v.to_dict() for k, v in s.items()} for m, s in self.summary.items()},
            "comparisons": [
                {"model_a": a, "model_b": b, "metric": "auc_roc", **r.to_dict()} for a, b, r in self.comparisons
            ],
        }

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8")

    def write_csv(self, path):
        """Flat (model, fold, metric, value) rows; undefined values are empty."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", "fold", "metric", "value"])
            for m in self.models:
                for i, ms in enumerate(self.folds[m]):
                    for metric in METRICS:
                        w.writerow([m, i, metric, _num(ms.get(metric))])

    def write_summary_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", "metric", "mean", "sd", "ci_lower", "ci_upper", "n_defined", "n_undefined"])
            for m in self.models:
                for metric in METRICS:
                    d = self.summary[m][metric].to_dict()
                    w.writerow([m, metric] + [_num(d[c]) for c in
                                              ("mean", "sd", "ci_lower", "ci_upper", "n_defined", "n_undefined")])

    def write_comparisons_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model_a", "model_b", "mean_difference", "t_statistic", "p_value", "df"])
            for a, b, r in self.comparisons:
                w.writerow([a, b, _num(r.mean_difference), _num(r.t_statistic), _num(r.p_value), r.df])


def _fold_job(t, feats, spec, i, train_idx, test_idx, seed, threshold, n_jobs):
    try:
        Xtr, ytr, Xte, yte, _ = fold_matrices(t, train_idx, test_idx, feats)
        model = fit_model(spec, Xtr, ytr, feats, n_jobs=n_jobs, seed=seed)
        scores = predict_proba(model, Xte)
        return metric_set(yte, scores, threshold), scores
    except ModelError as e:
        raise FitError(f"fold {i}, model {spec.name!r}: {e}") from e
    except ToolkitError as e:
        raise DataError(f"fold {i}, model {spec.name!r}: {e}") from e


def cross_validate(
    t: Table,
    model_specs,
    k: int = 10,
    seed: int = 0,
    threshold: float = 0.5,
    features=None,
    n_jobs: int = 1,
    folds: FoldAssignment | None = None,
) -> CVReport:
    """Stratified k-fold CV of every spec on the same folds.

    Imputation and scaling are re-fitted inside each training fold. Each
    model's fold ``i`` is fitted with the same derived seed, so two specs
    that are equal yield identical scores.
    """
    specs = list(model_specs)
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError("model names must be unique")
    t, feats = prepare(t, features)
    y = t.label.astype(float)
    fa = folds or stratified_kfold(y, k, seed)
    fold_seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(fa.k)]
    jobs = [(spec, i, tr, te) for spec in specs for i, (tr, te) in enumerate(fa)]

    def run(job):
        spec, i, tr, te = job
        return _fold_job(t, feats, spec, i, tr, te, fold_seeds[i], threshold, 1)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    fold_metrics = {n: [] for n in names}
    oof = {n: np.empty(len(y)) for n in names}
    for (spec, i, tr, te), (ms, scores) in zip(jobs, results):
        fold_metrics[spec.name].append(ms)
        oof[spec.name][te] = scores
    summary = {
        n: {m: summarize_metric([f.get(m) for f in fold_metrics[n]]) for m in METRICS} for n in names
    }
    comparisons = []
    for a in range(len(names)):
        for b in range(a + 1, len(names)):
            va = [f.auc_roc for f in fold_metrics[names[a]]]
            vb = [f.auc_roc for f in fold_metrics[names[b]]]
            comparisons.append((names[a], names[b], paired_t_test(va, vb)))
    return CVReport(names, fa.k, seed, threshold, fold_metrics, summary, comparisons, oof, y, fa.folds)


def holdout_evaluate(t: Table, spec: ModelSpec, test_fraction=0.2, seed=0, threshold=0.5, features=None):
    """Single stratified train/test evaluation; returns (MetricSet, model)."""
    t, feats = prepare(t, features)
    tr, te = holdout_split(t.label, test_fraction, seed)
    Xtr, ytr, Xte, yte, _ = fold_matrices(t, tr, te, feats)
    model = fit_model(spec, Xtr, ytr, feats, seed=seed)
    return metric_set(yte, predict_proba(model, Xte), threshold), model


# ---------------------------------------------------------------- weighting study


@dataclass
class ImpactReport:
    unweighted: dict  # metric -> mean
    weighted: dict
    delta: dict  # weighted - unweighted
    cv: CVReport

    def to_dict(self):
        return {"unweighted": self.unweighted, "weighted": self.weighted, "delta": self.delta}

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "unweighted", "weighted", "delta"])
            for m in METRICS:
                w.writerow([m, _num(self.unweighted[m]), _num(self.weighted[m]), _num(self.delta[m])])


def weighting_impact_study(
    t: Table, spec: ModelSpec | None = None, k: int = 10, seed: int = 0, threshold: float = 0.5,
    features=None, mode: str = "inverse_frequency", n_jobs: int = 1,
) -> ImpactReport:
    """Random forest with and without class weights on identical folds."""
    base = spec or ModelSpec("forest", "forest")
    plain = ModelSpec("unweighted", base.learner, base.config, None, base.resampling, base.smote)
    weighted = ModelSpec("weighted", base.learner, base.config, mode, base.resampling, base.smote)
    cv = cross_validate(t, [plain, weighted], k, seed, threshold, features, n_jobs)
    u = {m: cv.mean("unweighted", m) for m in METRICS}
    wt = {m: cv.mean("weighted", m) for m in METRICS}
    delta = {m: None if u[m] is None or wt[m] is None else wt[m] - u[m] for m in METRICS}
    return ImpactReport(u, wt, delta, cv)


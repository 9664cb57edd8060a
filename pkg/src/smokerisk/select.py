"""Boruta all-relevant feature selection around the random forest."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import binom

from .errors import ConfigError, DataError
from .learners import FitConfig, fit_forest
from .table import Table


def _default_forest():
    return FitConfig(n_trees=100, max_depth=7)


@dataclass(frozen=True)
class BorutaConfig:
    max_iterations: int = 100
    alpha: float = 0.05
    forest: FitConfig = field(default_factory=_default_forest)
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must be in (0, 1)")

    def to_dict(self):
        return {"max_iterations": self.max_iterations, "alpha": self.alpha, "forest": self.forest.to_dict(),
                "seed": self.seed}


@dataclass
class BorutaResult:
    feature_names: list
    confirmed: list
    rejected: list
    tentative: list
    hits: dict  # feature -> hit count
    n_iterations: int
    history: list  # per-iteration audit records
    decided_at: dict  # feature -> iteration at which it was confirmed/rejected

    def status(self, f):
        if f in self.confirmed:
            return "confirmed"
        if f in self.rejected:
            return "rejected"
        return "tentative"

    def to_dict(self):
        return {
            "feature_names": self.feature_names,
            "confirmed": self.confirmed,
            "rejected": self.rejected,
            "tentative": self.tentative,
            "hits": self.hits,
            "n_iterations": self.n_iterations,
            "decided_at": self.decided_at,
            "history": self.history,
        }

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def from_dict(cls, d):
        return cls(d["feature_names"], d["confirmed"], d["rejected"], d["tentative"], d["hits"],
                   d["n_iterations"], d.get("history", []), d.get("decided_at", {}))


def _two_sided_p(hits, n):
    """Two-sided binomial p-value against p = 0.5, with the tail the hit
    count points to: (p_value, direction)."""
    upper = float(binom.sf(hits - 1, n, 0.5))  # P(X >= hits)
    lower = float(binom.cdf(hits, n, 0.5))  # P(X <= hits)
    if upper <= lower:
        return min(1.0, 2 * upper), "up"
    return min(1.0, 2 * lower), "down"


def boruta(X, y, cfg: BorutaConfig | None = None, feature_names=None) -> BorutaResult:
    """Each round permutes every still-undecided-or-confirmed feature into a
    shadow column, fits a forest on real plus shadow columns, and scores a
    hit for each real feature whose Gini importance beats the best shadow.

    After each round a feature is confirmed (or rejected) when a two-sided
    binomial test of its hits against p = 0.5 is significant at ``alpha``
    divided by the number of candidates, with more (or fewer) hits than half
    the rounds. Rejected features leave the model; the loop ends when nothing
    is tentative or after ``max_iterations`` rounds.
    """
    cfg = cfg or BorutaConfig()
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    if X.ndim != 2 or X.shape[1] == 0:
        raise DataError("Boruta needs at least one candidate feature")
    n, d = X.shape
    if n < max(2, 2 * cfg.forest.min_samples_leaf):
        raise DataError(f"Boruta needs at least {max(2, 2 * cfg.forest.min_samples_leaf)} rows, got {n}")
    names = list(feature_names) if feature_names is not None else [f"f{j}" for j in range(d)]
    if len(names) != d:
        raise DataError("feature_names length does not match X")

    status = ["tentative"] * d
    hits = np.zeros(d, dtype=int)
    history = []
    decided_at = {}
    level = cfg.alpha / d
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.max_iterations)
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        active = [j for j in range(d) if status[j] != "rejected"]
        rng = np.random.default_rng(children[it - 1])
        shadows = np.column_stack([X[rng.permutation(n), j] for j in active])
        forest_seed = int(rng.integers(0, 2**62))
        model = fit_forest(np.hstack([X[:, active], shadows]), y, cfg.forest.replace(seed=forest_seed),
                           n_jobs=cfg.n_jobs)
        imp = model.feature_importances
        real, shadow = imp[: len(active)], imp[len(active):]
        shadow_max = float(shadow.max())
        record = {"iteration": it, "shadow_max": shadow_max, "importance": {}, "hit": {}, "decisions": {}}
        for pos, j in enumerate(active):
            hit = bool(real[pos] > shadow_max)
            hits[j] += hit
            record["importance"][names[j]] = float(real[pos])
            record["hit"][names[j]] = hit
        for j in range(d):
            if status[j] != "tentative":
                continue
            p, direction = _two_sided_p(int(hits[j]), it)
            if p < level:
                status[j] = "confirmed" if direction == "up" else "rejected"
                decided_at[names[j]] = it
                record["decisions"][names[j]] = status[j]
        history.append(record)
        if "tentative" not in status:
            break
    return BorutaResult(
        feature_names=names,
        confirmed=[names[j] for j in range(d) if status[j] == "confirmed"],
        rejected=[names[j] for j in range(d) if status[j] == "rejected"],
        tentative=[names[j] for j in range(d) if status[j] == "tentative"],
        hits={names[j]: int(hits[j]) for j in range(d)},
        n_iterations=it,
        history=history,
        decided_at=decided_at,
    )


def select_apply(t: Table, result: BorutaResult, keep_tentative: bool = False) -> Table:
    """Keep the confirmed features (plus tentative ones when asked) together
    with the label and identifier columns, in the table's column order."""
    keep = set(result.confirmed) | (set(result.tentative) if keep_tentative else set())
    if not keep:
        raise DataError("feature selection left no features")
    absent = sorted(f for f in keep if f not in t.schema)
    if absent:
        raise DataError(f"selected features absent from table: {', '.join(absent)}")
    cols = [c.name for c in t.schema.columns
            if c.name in keep or c.name == t.schema.label or c.kind == "identifier"]
    return t.select(cols)

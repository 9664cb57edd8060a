"""Framingham point scoring and rule-based disease labels."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, SchemaError
from .preprocess import _key, encode
from .table import ColumnSpec, Schema, Table

CATEGORIES = ("low", "moderate", "high")
SEXES = ("male", "female")


def _read_resource(name):
    return resources.files("smokerisk.resources").joinpath(name).read_text("utf-8")


# ---------------------------------------------------------------- Framingham


@dataclass(frozen=True)
class FraminghamInput:
    age: float
    total_cholesterol: float
    hdl: float
    systolic_bp: float
    smoker: bool
    diabetic: bool
    sex: str
    diastolic_bp: float | None = None

    def __post_init__(self):
        if self.sex not in SEXES:
            raise DataError(f"sex must be 'male' or 'female', got {self.sex!r}")
        if not 20 <= self.age <= 85:
            raise DataError(f"age {self.age} is outside the point table range [20, 85]")
        for name in ("total_cholesterol", "hdl", "systolic_bp"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DataError(f"{name} must be positive, got {v}")
        if self.diastolic_bp is not None and not self.diastolic_bp > 0:
            raise DataError(f"diastolic_bp must be positive, got {self.diastolic_bp}")


@dataclass(frozen=True)
class RiskCategory:
    points: int
    category: str
    risk_percent: float
    components: dict = field(default_factory=dict, compare=False)


class PointTable:
    """Sex-specific Framingham point bands plus the points -> risk lookup."""

    def __init__(self, doc: dict):
        try:
            self.version = doc["version"]
            self.age_range = tuple(doc["age_range"])
            self.cutoffs = {k: tuple(v) for k, v in doc["categories"].items()}
            self.sexes = doc["sexes"]
            for s in SEXES:
                self.sexes[s]["risk_percent"]["table"]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed Framingham table: {exc}") from exc
        self.doc = doc

    @classmethod
    def from_json(cls, path=None):
        text = _read_resource("framingham_wilson1998.json") if path is None else Path(path).read_text("utf-8")
        return cls(json.loads(text))

    @staticmethod
    def _band_points(bands, value, what):
        for b in bands:
            lo, hi = b["lo"], b["hi"]
            if (lo is None or value >= lo) and (hi is None or value < hi):
                return int(b["points"])
        raise DataError(f"{what} value {value} falls outside every band")

    def risk_percent(self, sex, points):
        rp = self.sexes[sex]["risk_percent"]
        p = min(max(points, rp["min_points"]), rp["max_points"])
        return float(rp["table"][str(p)])

    def category(self, risk):
        for name in CATEGORIES:
            lo, hi = self.cutoffs[name]
            if (lo is None or risk >= lo) and (hi is None or risk < hi):
                return name
        raise ConfigError(f"risk {risk}% matches no category")


@lru_cache(maxsize=1)
def default_point_table() -> PointTable:
    return PointTable.from_json()


def framingham_points(inp: FraminghamInput, table: PointTable | None = None) -> RiskCategory:
    """Sum of the age, cholesterol, HDL, blood pressure, diabetes and smoking
    points; the category comes from the tabulated 10-year risk."""
    tab = table or default_point_table()
    s = tab.sexes[inp.sex]
    lo, hi = tab.age_range
    if not lo <= inp.age <= hi:
        raise DataError(f"age {inp.age} is outside the point table range [{lo}, {hi}]")
    comp = {
        "age": tab._band_points(s["age"], inp.age, "age"),
        "total_cholesterol": tab._band_points(s["total_cholesterol"], inp.total_cholesterol, "total cholesterol"),
        "hdl": tab._band_points(s["hdl"], inp.hdl, "HDL"),
        "blood_pressure": tab._band_points(s["systolic_bp"], inp.systolic_bp, "systolic BP"),
        "diabetes": int(s["diabetes"]) if inp.diabetic else 0,
        "smoker": int(s["smoker"]) if inp.smoker else 0,
    }
    if inp.diastolic_bp is not None:
        comp["blood_pressure"] = max(
            comp["blood_pressure"], tab._band_points(s["diastolic_bp"], inp.diastolic_bp, "diastolic BP")
        )
    points = sum(comp.values())
    risk = tab.risk_percent(inp.sex, points)
    return RiskCategory(points, tab.category(risk), risk, comp)


@dataclass(frozen=True)
class FraminghamColumns:
    age: str = "age"
    total_cholesterol: str = "Cholesterol"
    hdl: str = "HDL"
    systolic_bp: str = "systolic"
    smoker: str = "smoking"
    fasting_glucose: str = "fasting blood sugar"
    sex: str = "gender"
    diabetic: str | None = None  # explicit flag column, if the data has one
    male_code: str = "1"
    female_code: str = "2"
    diabetes_glucose: float = 126.0


@dataclass
class FraminghamDistribution:
    counts: dict  # smoker status (0/1) -> category -> count
    points: np.ndarray  # per row; NaN where a row was skipped
    categories: np.ndarray  # per row; None where skipped
    skipped: int

    def proportions(self, status):
        row = self.counts[status]
        n = sum(row.values())
        return {c: (row[c] / n if n else None) for c in CATEGORIES}

    def elevated_share(self, status):
        """Share of the group in the moderate or high category."""
        p = self.proportions(status)
        return None if p["low"] is None else p["moderate"] + p["high"]

    def to_dict(self):
        return {
            "counts": {str(k): v for k, v in self.counts.items()},
            "proportions": {str(k): self.proportions(k) for k in self.counts},
            "skipped_rows": self.skipped,
        }

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["smoking_status", "category", "count", "proportion"])
            for status in sorted(self.counts):
                props = self.proportions(status)
                for c in CATEGORIES:
                    p = props[c]
                    w.writerow([status, c, self.counts[status][c], "" if p is None else repr(p)])


def framingham_distribution(t: Table, columns: FraminghamColumns | None = None,
                            table: PointTable | None = None) -> FraminghamDistribution:
    """Cross-tabulate Framingham categories by smoking status.

    The smoker flag is the smoking column; diabetes comes from an explicit
    flag column if configured, otherwise fasting glucose >= 126 mg/dL. Rows
    with a missing input are skipped and counted.
    """
    cols = columns or FraminghamColumns()
    needed = [cols.age, cols.total_cholesterol, cols.hdl, cols.systolic_bp, cols.smoker, cols.sex,
              cols.diabetic or cols.fasting_glucose]
    absent = [c for c in needed if c not in t.schema]
    if absent:
        raise SchemaError(f"Framingham needs columns that are absent: {', '.join(absent)}")
    sex_raw = t[cols.sex]
    t = encode(t.select([c for c in dict.fromkeys(needed) if c != cols.sex]))
    points = np.full(t.n_rows, np.nan)
    cats = np.full(t.n_rows, None, dtype=object)
    counts = {0: dict.fromkeys(CATEGORIES, 0), 1: dict.fromkeys(CATEGORIES, 0)}
    skipped = 0
    dia_col = t[cols.diabetic] if cols.diabetic else t[cols.fasting_glucose]
    for i in range(t.n_rows):
        vals = [t[c][i] for c in (cols.age, cols.total_cholesterol, cols.hdl, cols.systolic_bp, cols.smoker)]
        sk = None if sex_raw[i] is None or (isinstance(sex_raw[i], float) and np.isnan(sex_raw[i])) else _key(sex_raw[i])
        sex = {cols.male_code: "male", cols.female_code: "female", "M": "male", "F": "female"}.get(sk)
        if any(np.isnan(v) for v in vals) or np.isnan(dia_col[i]) or sex is None:
            skipped += 1
            continue
        age, tc, hdl, sbp, smoker = vals
        diabetic = bool(dia_col[i]) if cols.diabetic else dia_col[i] >= cols.diabetes_glucose
        rc = framingham_points(FraminghamInput(age, tc, hdl, sbp, bool(smoker), diabetic, sex), table)
        points[i] = rc.points
        cats[i] = rc.category
        counts[int(smoker)][rc.category] += 1
    return FraminghamDistribution(counts, points, cats, skipped)


# ---------------------------------------------------------------- disease rules

_OPS = {
    ">=": np.greater_equal,
    ">": np.greater,
    "<=": np.less_equal,
    "<": np.less,
}


@dataclass(frozen=True)
class DiseaseRule:
    """A named label rule. ``criteria`` is a predicate tree: a leaf
    ``{"feature", "op", "threshold"[, "by"]}`` or a group ``{"any": [...]}``,
    ``{"all": [...]}`` or ``{"at_least": n, "of": [...]}``. A threshold may be
    a mapping from the codes of a ``by`` column (e.g. sex) to values.
    ``predictors`` is the feature panel used by the disease sub-model."""

    name: str
    criteria: dict
    predictors: tuple = ()
    description: str = ""

    def features(self):
        out = []

        def walk(node):
            if "feature" in node:
                out.append(node["feature"])
                if node.get("by"):
                    out.append(node["by"])
            else:
                for child in node.get("any", node.get("all", node.get("of", []))):
                    walk(child)

        walk(self.criteria)
        return list(dict.fromkeys(out))

    def to_dict(self):
        return {"name": self.name, "description": self.description, "predictors": list(self.predictors),
                "criteria": self.criteria}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(d["name"], d["criteria"], tuple(d.get("predictors", ())), d.get("description", ""))
        except KeyError as exc:
            raise ConfigError(f"disease rule is missing {exc}") from exc


def load_disease_rules(path=None) -> dict:
    text = _read_resource("disease_rules.json") if path is None else Path(path).read_text("utf-8")
    return {r["name"]: DiseaseRule.from_dict(r) for r in json.loads(text)["rules"]}


def validate_rule(rule: DiseaseRule, schema: Schema):
    absent = [f for f in rule.features() + list(rule.predictors) if f not in schema]
    if absent:
        raise SchemaError(f"rule {rule.name!r} references absent columns: {', '.join(dict.fromkeys(absent))}")

    def walk(node):
        if "feature" in node:
            if node["op"] not in _OPS:
                raise ConfigError(f"rule {rule.name!r}: unknown operator {node['op']!r}")
            spec = schema[node["feature"]]
            th = node["threshold"]
            values = th.values() if isinstance(th, dict) else [th]
            if spec.valid_range is not None:
                lo, hi = spec.valid_range
                for v in values:
                    if not lo <= v <= hi:
                        raise ConfigError(
                            f"rule {rule.name!r}: threshold {v} for {node['feature']!r} is outside its "
                            f"valid range [{lo}, {hi}]"
                        )
            return
        if "at_least" in node:
            kids = node.get("of", [])
            if not 1 <= node["at_least"] <= len(kids):
                raise ConfigError(f"rule {rule.name!r}: at_least must be between 1 and {len(kids)}")
        elif not ("any" in node or "all" in node):
            raise ConfigError(f"rule {rule.name!r}: unrecognised criteria node {sorted(node)}")
        for child in node.get("any", node.get("all", node.get("of", []))):
            walk(child)

    walk(rule.criteria)


def _evaluate(node, t: Table, by_keys: dict) -> np.ndarray:
    if "feature" in node:
        x = t[node["feature"]].astype(float)
        th = node["threshold"]
        if isinstance(th, dict):
            keys = by_keys[node["by"]]
            thr = np.array([th.get(k, np.nan) for k in keys], dtype=float)
        else:
            thr = np.full(len(x), float(th))
        with np.errstate(invalid="ignore"):
            # NaN (missing value or unmatched code) compares False
            return _OPS[node["op"]](x, thr)
    if "any" in node:
        return np.any([_evaluate(c, t, by_keys) for c in node["any"]], axis=0)
    if "all" in node:
        return np.all([_evaluate(c, t, by_keys) for c in node["all"]], axis=0)
    hits = np.sum([_evaluate(c, t, by_keys) for c in node["of"]], axis=0)
    return hits >= node["at_least"]


@dataclass
class DiseaseLabels:
    labels: np.ndarray  # 0/1 per row
    rule: dict
    n_missing_inputs: int

    @property
    def prevalence(self):
        return float(self.labels.mean()) if len(self.labels) else None

    def metadata(self):
        return {"rule": self.rule, "prevalence": self.prevalence, "rows_with_missing_inputs": self.n_missing_inputs}


def _by_key(spec, v):
    # thresholds are keyed by the encoded code, so raw labels ("M") map through the schema
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return None
    k = _key(v)
    if spec.mapping and k in spec.mapping:
        return _key(spec.mapping[k])
    return k


def derive_disease_labels(t: Table, rule: DiseaseRule) -> DiseaseLabels:
    """Binary labels from a rule. A predicate on a missing value is false;
    the number of rows with any missing rule input is reported."""
    validate_rule(rule, t.schema)
    feats = rule.features()
    by_cols = {n["by"] for n in _leaves(rule.criteria) if n.get("by")}
    raw_by = {c: [_by_key(t.schema[c], v) for v in t[c]] for c in by_cols}
    tt = encode(t.select(feats))
    labels = _evaluate(rule.criteria, tt, raw_by).astype(float)
    miss = np.zeros(t.n_rows, bool)
    for f in feats:
        miss |= t.missing(f)
    return DiseaseLabels(labels, rule.to_dict(), int(miss.sum()))


def _leaves(node):
    if "feature" in node:
        yield node
    else:
        for child in node.get("any", node.get("all", node.get("of", []))):
            yield from _leaves(child)


def with_disease_label(t: Table, rule: DiseaseRule, column: str | None = None, as_label: bool = True) -> Table:
    """Add (or overwrite) a binary column holding the rule's labels.

    Re-applying the same rule gives the same table, so the step is idempotent.
    """
    column = column or f"{rule.name}_label"
    labels = derive_disease_labels(t, rule).labels
    spec = ColumnSpec(column, "binary", encoded=True)
    if column in t.schema:
        schema = t.schema.replace(spec)
    else:
        schema = Schema(tuple(t.schema.columns) + (spec,), t.schema.label)
    if as_label:
        schema = Schema(schema.columns, column)
    cols = {n: t[n] for n in t.names}
    cols[column] = labels
    return Table(schema, {n: np.array(cols[n], copy=True) for n in schema.names}, t.n_rows)


def disease_submodel_cv(t: Table, rule: DiseaseRule, spec, k=10, seed=0, target="smoking", n_jobs=1):
    """Cross-validate a model restricted to the rule's predictor panel.

    ``target="smoking"`` keeps the table's own label; ``target="rule"``
    swaps in the rule-derived disease label.
    """
    from .evaluate import cross_validate

    if not rule.predictors:
        raise ConfigError(f"rule {rule.name!r} has no predictor panel")
    if target == "rule":
        t = with_disease_label(t, rule)
    elif target != "smoking":
        raise ConfigError(f"unknown sub-model target {target!r}")
    return cross_validate(t, [spec], k=k, seed=seed, features=list(rule.predictors), n_jobs=n_jobs)

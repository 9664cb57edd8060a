"""Imputation, categorical encoding and z-score standardization.

Every transform is split into a ``fit_*`` step that reads statistics from one
table and an ``apply_*`` step that only uses the fitted parameters, so a plan
fitted on a training fold never sees the test fold.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, FitError, SchemaError
from .table import ColumnSpec, Schema, Table

log = logging.getLogger(__name__)

STRATEGIES = ("median", "mean", "mode", "none")


class EncodeError(DataError):
    pass


@dataclass
class ImputePlan:
    strategies: dict = field(default_factory=dict)  # column -> strategy
    fill_values: dict = field(default_factory=dict)  # column -> fill value

    def to_dict(self):
        return {"strategies": self.strategies, "fill_values": self.fill_values}

    @classmethod
    def from_dict(cls, d):
        return cls(dict(d["strategies"]), dict(d["fill_values"]))


@dataclass
class ScalerParams:
    params: dict = field(default_factory=dict)  # column -> (mu, sigma)
    excluded: list = field(default_factory=list)  # zero-variance columns, left unscaled

    def to_dict(self):
        return {
            "params": {k: {"mu": mu, "sigma": s} for k, (mu, s) in self.params.items()},
            "excluded": list(self.excluded),
        }

    @classmethod
    def from_dict(cls, d):
        return cls({k: (v["mu"], v["sigma"]) for k, v in d["params"].items()}, list(d["excluded"]))


def save_json(obj, path):
    Path(path).write_text(json.dumps(obj.to_dict(), indent=2), encoding="utf-8")


def default_strategies(schema: Schema) -> dict:
    """Median for continuous features, mode for binary/ordinal ones."""
    out = {}
    for c in schema.columns:
        if c.kind == "identifier" or c.name == schema.label:
            continue
        out[c.name] = "median" if c.kind == "continuous" else "mode"
    return out


def _mode(values):
    vals, counts = np.unique(values, return_counts=True)
    # np.unique sorts, so argmax picks the smallest value among ties
    return vals[int(np.argmax(counts))]


def fit_impute(t: Table, strategies: dict) -> ImputePlan:
    plan = ImputePlan()
    for name, strategy in strategies.items():
        if strategy not in STRATEGIES:
            raise ConfigError(f"{name}: unknown strategy {strategy!r}")
        spec = t.schema[name]
        if strategy == "none":
            continue
        if strategy == "mode" and spec.kind not in ("binary", "ordinal"):
            raise FitError(f"{name}: mode imputation needs a binary or ordinal column")
        col = t[name]
        present = col[~t.missing(name)]
        if present.size == 0:
            raise FitError(f"{name}: cannot fit {strategy} imputation on an all-missing column")
        if strategy == "mode":
            fill = _mode(present if col.dtype != object else np.array(present.tolist()))
            fill = fill.item() if hasattr(fill, "item") else fill
        else:
            if col.dtype == object:
                raise FitError(f"{name}: {strategy} imputation needs numeric values")
            fill = float(np.median(present) if strategy == "median" else np.mean(present))
            if not np.isfinite(fill):
                raise FitError(f"{name}: non-finite fill value")
        plan.strategies[name] = strategy
        plan.fill_values[name] = fill
    return plan


def apply_impute(t: Table, plan: ImputePlan) -> Table:
    updates = {}
    for name, fill in plan.fill_values.items():
        col = t[name]
        miss = t.missing(name)
        if not miss.any():
            continue
        out = col.copy()
        out[miss] = fill
        updates[name] = out
    return t.with_columns(updates) if updates else t


def _key(v):
    if isinstance(v, (float, np.floating)) and float(v).is_integer():
        return str(int(v))
    return str(v)


def _encoded_spec(spec: ColumnSpec, mapping=None, levels=None) -> ColumnSpec:
    return ColumnSpec(
        spec.name,
        spec.kind,
        spec.unit,
        spec.valid_range,
        mapping if mapping is not None else spec.mapping,
        levels if levels is not None else spec.levels,
        encoded=True,
    )


def _map_values(spec, col, miss, mapping):
    out = np.full(len(col), np.nan)
    for i, (v, m) in enumerate(zip(col, miss)):
        if m:
            continue
        k = _key(v)
        if k not in mapping:
            raise EncodeError(f"{spec.name}: value {v!r} not in declared categories {sorted(mapping)}")
        out[i] = mapping[k]
    return out


def _encode_binary(spec: ColumnSpec, col: np.ndarray, miss: np.ndarray):
    present = [v for v, m in zip(col, miss) if not m]
    distinct = sorted({_key(v) for v in present})
    if len(distinct) > 2:
        raise EncodeError(f"{spec.name}: binary column has {len(distinct)} categories {distinct[:5]}")
    if spec.mapping is not None:
        mapping = {str(k): float(v) for k, v in spec.mapping.items()}
        return _map_values(spec, col, miss, mapping), _encoded_spec(spec, mapping)
    if col.dtype != object and set(distinct) <= {"0", "1"}:
        return col, _encoded_spec(spec)
    mapping = {k: float(i) for i, k in enumerate(distinct)}
    return _map_values(spec, col, miss, mapping), _encoded_spec(spec, mapping)


def _encode_ordinal(spec: ColumnSpec, col: np.ndarray, miss: np.ndarray):
    if spec.levels is None:
        if col.dtype == object:
            raise EncodeError(f"{spec.name}: text ordinal column needs declared levels")
        return col, _encoded_spec(spec)
    ranks = {_key(lv): float(i + 1) for i, lv in enumerate(spec.levels)}
    return _map_values(spec, col, miss, ranks), _encoded_spec(spec, ranks)


def encode(t: Table) -> Table:
    """Binary columns to two numeric codes (declared mapping, else sorted
    categories to 0/1); ordinal columns to ranks 1..L in declared level order.

    Columns already marked encoded in the schema are left alone, so encoding
    twice is the same as encoding once.
    """
    schema = t.schema
    updates = {}
    for spec in t.schema.columns:
        if spec.kind not in ("binary", "ordinal") or spec.encoded:
            continue
        col, miss = t[spec.name], t.missing(spec.name)
        if spec.kind == "binary":
            out, new_spec = _encode_binary(spec, col, miss)
        else:
            out, new_spec = _encode_ordinal(spec, col, miss)
        updates[spec.name] = out
        schema = schema.replace(new_spec)
    return t.with_columns(updates, schema)


def fit_scaler(t: Table, names=None) -> ScalerParams:
    if names is None:
        names = [c.name for c in t.schema.columns if c.kind == "continuous" and c.name != t.schema.label]
    p = ScalerParams()
    for n in names:
        if t.schema[n].kind != "continuous":
            raise SchemaError(f"{n}: only continuous columns are standardized")
        x = t[n][~t.missing(n)]
        if x.size < 2:
            p.excluded.append(n)
            log.warning("%s: fewer than 2 values, excluded from scaling", n)
            continue
        mu = float(np.mean(x))
        sigma = float(np.std(x, ddof=1))
        if not sigma > 0:
            p.excluded.append(n)
            log.warning("%s: zero variance, excluded from scaling", n)
            continue
        p.params[n] = (mu, sigma)
    return p


def apply_scaler(t: Table, p: ScalerParams) -> Table:
    updates = {n: (t[n] - mu) / sigma for n, (mu, sigma) in p.params.items()}
    return t.with_columns(updates)


@dataclass
class Preprocessor:
    """Fitted impute + scale pipeline; encoding is stateless and done first."""

    impute: ImputePlan
    scaler: ScalerParams | None

    @classmethod
    def fit(cls, t: Table, strategies=None, scale=True):
        strategies = default_strategies(t.schema) if strategies is None else strategies
        impute = fit_impute(t, strategies)
        scaler = fit_scaler(apply_impute(t, impute)) if scale else None
        return cls(impute, scaler)

    def apply(self, t: Table) -> Table:
        out = apply_impute(t, self.impute)
        if self.scaler is not None:
            out = apply_scaler(out, self.scaler)
        return out

    def to_dict(self):
        return {
            "impute": self.impute.to_dict(),
            "scaler": None if self.scaler is None else self.scaler.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        sc = d.get("scaler")
        return cls(ImputePlan.from_dict(d["impute"]), None if sc is None else ScalerParams.from_dict(sc))

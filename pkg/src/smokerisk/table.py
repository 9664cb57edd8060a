"""Typed columnar tables, CSV ingestion with plausibility screening, summaries.

Numeric columns are stored as float64 arrays with NaN in missing cells.
Categorical columns that arrive as text (e.g. gender ``M``/``F``) are kept as
object arrays until :func:`smokerisk.preprocess.encode` maps them to codes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError, ParseError, PlausibilityError, SchemaError

KINDS = ("continuous", "binary", "ordinal", "identifier")
PLAUSIBILITY_MODES = ("flag", "drop_cell", "reject")


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    unit: str | None = None
    valid_range: tuple[float, float] | None = None
    # binary: raw value -> code; ordinal: ordered levels (codes are 1..L unless codes given)
    mapping: dict | None = None
    levels: tuple | None = None
    encoded: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.valid_range is not None:
            lo, hi = self.valid_range
            if not lo <= hi:
                raise SchemaError(f"column {self.name!r}: valid_range min {lo} > max {hi}")

    @property
    def is_numeric_kind(self):
        return self.kind in ("continuous", "identifier")

    def to_dict(self):
        d = {"name": self.name, "kind": self.kind}
        if self.unit is not None:
            d["unit"] = self.unit
        if self.valid_range is not None:
            d["valid_range"] = list(self.valid_range)
        if self.mapping is not None:
            d["mapping"] = dict(self.mapping)
        if self.levels is not None:
            d["levels"] = list(self.levels)
        if self.encoded:
            d["encoded"] = True
        return d


@dataclass(frozen=True)
class Schema:
    columns: tuple[ColumnSpec, ...]
    label: str | None = None

    def __post_init__(self):
        names = [c.name for c in self.columns]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise SchemaError(f"duplicate column names: {dupes}")
        if self.label is not None and self.label not in names:
            raise SchemaError(f"label column {self.label!r} not in schema")

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def __getitem__(self, name) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise SchemaError(f"unknown column {name!r}")

    def __contains__(self, name):
        return any(c.name == name for c in self.columns)

    def feature_names(self) -> list[str]:
        """Modeling columns: everything except the label and identifier kinds."""
        return [c.name for c in self.columns if c.kind != "identifier" and c.name != self.label]

    def replace(self, spec: ColumnSpec) -> "Schema":
        cols = tuple(spec if c.name == spec.name else c for c in self.columns)
        return Schema(cols, self.label)

    def select(self, names: Sequence[str]) -> "Schema":
        cols = tuple(self[n] for n in names)
        label = self.label if self.label in names else None
        return Schema(cols, label)

    @classmethod
    def from_dict(cls, doc: dict) -> "Schema":
        try:
            cols = []
            for c in doc["columns"]:
                vr = c.get("valid_range")
                levels = c.get("levels")
                cols.append(
                    ColumnSpec(
                        name=c["name"],
                        kind=c["kind"],
                        unit=c.get("unit"),
                        valid_range=None if vr is None else (float(vr[0]), float(vr[1])),
                        mapping=c.get("mapping"),
                        levels=None if levels is None else tuple(levels),
                        encoded=bool(c.get("encoded", False)),
                    )
                )
        except (KeyError, TypeError, IndexError) as exc:
            raise SchemaError(f"malformed schema document: {exc}") from exc
        return cls(tuple(cols), doc.get("label"))

    @classmethod
    def from_json(cls, path) -> "Schema":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {"label": self.label, "columns": [c.to_dict() for c in self.columns]}


@dataclass(frozen=True, eq=False)
class Table:
    """Immutable column store. ``columns`` maps name -> array of length ``n_rows``."""

    schema: Schema
    columns: dict
    n_rows: int

    def __post_init__(self):
        if list(self.columns) != self.schema.names:
            raise SchemaError("table columns do not match schema order")
        for name, arr in self.columns.items():
            if len(arr) != self.n_rows:
                raise SchemaError(f"column {name!r} has {len(arr)} rows, expected {self.n_rows}")
            arr.flags.writeable = False

    def __getitem__(self, name) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise SchemaError(f"unknown column {name!r}") from None

    @property
    def names(self):
        return self.schema.names

    def missing(self, name) -> np.ndarray:
        return _missing_of(self[name])

    @property
    def missing_mask(self) -> dict:
        return {n: _missing_of(a) for n, a in self.columns.items()}

    @property
    def label(self) -> np.ndarray:
        if self.schema.label is None:
            raise SchemaError("table has no designated label column")
        return self[self.schema.label]

    def matrix(self, names: Sequence[str] | None = None) -> np.ndarray:
        names = self.schema.feature_names() if names is None else list(names)
        cols = []
        for n in names:
            a = self[n]
            if a.dtype == object:
                raise SchemaError(f"column {n!r} is not numeric; run encode() first")
            cols.append(a)
        if not cols:
            return np.empty((self.n_rows, 0))
        return np.column_stack(cols).astype(float, copy=False)

    def take(self, rows) -> "Table":
        rows = np.asarray(rows)
        return Table(self.schema, {n: a[rows].copy() for n, a in self.columns.items()}, len(rows))

    def with_columns(self, updates: dict, schema: Schema | None = None) -> "Table":
        schema = schema or self.schema
        cols = {}
        for n in schema.names:
            a = updates[n] if n in updates else self.columns[n]
            cols[n] = np.array(a, copy=True)
        return Table(schema, cols, self.n_rows)

    def select(self, names: Sequence[str]) -> "Table":
        names = list(names)
        return Table(self.schema.select(names), {n: self[n].copy() for n in names}, self.n_rows)

    def equals(self, other: "Table") -> bool:
        if self.schema.names != other.schema.names or self.n_rows != other.n_rows:
            return False
        for n in self.names:
            a, b = self[n], other[n]
            ma, mb = _missing_of(a), _missing_of(b)
            if not np.array_equal(ma, mb):
                return False
            if a.dtype == object or b.dtype == object:
                if list(a[~ma]) != list(b[~mb]):
                    return False
            elif not np.array_equal(a[~ma], b[~mb]):
                return False
        return True

    @classmethod
    def from_arrays(cls, schema: Schema, data: dict) -> "Table":
        cols = {}
        n = None
        for spec in schema.columns:
            raw = data[spec.name]
            arr = np.asarray(raw)
            if arr.dtype.kind in "biuf":
                arr = arr.astype(float)
            else:
                arr = np.array([_coerce(v) for v in raw], dtype=object)
                if all(v is None or isinstance(v, float) for v in arr):
                    arr = np.array([np.nan if v is None else v for v in arr], dtype=float)
            cols[spec.name] = arr
            n = len(arr) if n is None else n
        return cls(schema, cols, n or 0)


def _coerce(v):
    if v is None:
        return None
    if isinstance(v, float) and math.isnan(v):
        return None
    if isinstance(v, (int, float, np.integer, np.floating)):
        return float(v)
    return v


def _missing_of(a: np.ndarray) -> np.ndarray:
    if a.dtype == object:
        return np.array([v is None for v in a], dtype=bool)
    return np.isnan(a)


@dataclass
class LoadReport:
    path: str
    n_rows: int
    mode: str
    flags: list = field(default_factory=list)  # (row, column, value, action)

    def to_dict(self):
        return {
            "path": self.path,
            "n_rows": self.n_rows,
            "plausibility_mode": self.mode,
            "n_flagged": len(self.flags),
            "flags": [
                {"row": r, "column": c, "value": v, "action": a} for r, c, v, a in self.flags
            ],
        }

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")


def _parse_cell(text: str, spec: ColumnSpec, row: int):
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        if spec.kind in ("continuous", "identifier"):
            raise ParseError(f"column {spec.name!r}: cannot parse {text!r} as a number", row)
        return text


def load_csv(path, schema: Schema, plausibility: str = "flag") -> tuple[Table, LoadReport]:
    """Read a header-first UTF-8 CSV into a :class:`Table`.

    Empty fields become missing. Row numbers in errors and flags are 1-based
    data rows (the header is row 0).
    """
    if plausibility not in PLAUSIBILITY_MODES:
        raise ConfigError(f"plausibility must be one of {PLAUSIBILITY_MODES}")
    path = Path(path)
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file (no header row)") from None
        header = [h.strip() for h in header]
        unknown = [h for h in header if h not in schema]
        if unknown:
            raise SchemaError(f"unknown columns in {path.name}: {unknown}")
        absent = [n for n in schema.names if n not in header]
        if absent:
            raise SchemaError(f"schema columns missing from {path.name}: {absent}")
        if len(set(header)) != len(header):
            raise SchemaError(f"duplicate header names in {path.name}")
        specs = [schema[h] for h in header]
        raw = {h: [] for h in header}
        for i, rec in enumerate(reader, start=1):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(rec)}", i)
            for h, spec, text in zip(header, specs, rec):
                raw[h].append(_parse_cell(text.strip(), spec, i))

    n = len(raw[header[0]]) if header else 0
    cols = {}
    for spec in schema.columns:
        vals = raw[spec.name]
        if all(v is None or isinstance(v, float) for v in vals):
            cols[spec.name] = np.array([np.nan if v is None else v for v in vals], dtype=float)
        else:
            cols[spec.name] = np.array(vals, dtype=object)

    report = LoadReport(str(path), n, plausibility)
    offenders = []
    for spec in schema.columns:
        if spec.valid_range is None or cols[spec.name].dtype == object:
            continue
        lo, hi = spec.valid_range
        a = cols[spec.name]
        bad = np.flatnonzero(~np.isnan(a) & ((a < lo) | (a > hi)))
        for r in bad:
            offenders.append((int(r) + 1, spec.name, float(a[r])))
        if plausibility == "drop_cell" and len(bad):
            a[bad] = np.nan
    if plausibility == "reject" and offenders:
        raise PlausibilityError(offenders)
    action = {"flag": "retained", "drop_cell": "set_missing", "reject": "rejected"}[plausibility]
    report.flags = [(r, c, v, action) for r, c, v in offenders]
    return Table(schema, cols, n), report


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return ""
        return repr(float(v))
    return str(v)


def write_csv(table: Table, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.names)
        cols = [table[n] for n in table.names]
        for i in range(table.n_rows):
            w.writerow([_fmt(c[i]) for c in cols])


@dataclass
class ColumnStats:
    n_unique: int
    mean: float | None
    std: float | None
    min: float | None
    p25: float | None
    p50: float | None
    p75: float | None
    max: float | None
    missing_count: int
    missing_rate: float


@dataclass
class SummaryStats:
    columns: dict  # name -> ColumnStats
    n_rows: int

    def __getitem__(self, name) -> ColumnStats:
        return self.columns[name]

    def to_dict(self):
        return {"n_rows": self.n_rows, "columns": {k: asdict(v) for k, v in self.columns.items()}}

    def write_csv(self, path):
        keys = list(ColumnStats.__dataclass_fields__)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["column", *keys])
            for name, st in self.columns.items():
                w.writerow([name, *(_fmt(getattr(st, k)) for k in keys)])


def summarize_values(values: np.ndarray, n_rows: int | None = None) -> ColumnStats:
    """Stats over non-missing entries; percentiles use linear interpolation
    between order statistics, std uses the n-1 denominator."""
    miss = _missing_of(values)
    n_rows = len(values) if n_rows is None else n_rows
    present = values[~miss]
    n_missing = int(miss.sum())
    rate = n_missing / n_rows if n_rows else 0.0
    if values.dtype == object:
        n_unique = len(set(present.tolist()))
        return ColumnStats(n_unique, None, None, None, None, None, None, None, n_missing, rate)
    if present.size == 0:
        return ColumnStats(0, None, None, None, None, None, None, None, n_missing, rate)
    q = np.percentile(present, [0, 25, 50, 75, 100])
    std = float(np.std(present, ddof=1)) if present.size > 1 else None
    return ColumnStats(
        n_unique=int(np.unique(present).size),
        mean=float(np.mean(present)),
        std=std,
        min=float(q[0]),
        p25=float(q[1]),
        p50=float(q[2]),
        p75=float(q[3]),
        max=float(q[4]),
        missing_count=n_missing,
        missing_rate=rate,
    )


def summarize(t: Table, names: Iterable[str] | None = None) -> SummaryStats:
    names = t.names if names is None else list(names)
    return SummaryStats({n: summarize_values(t[n], t.n_rows) for n in names}, t.n_rows)

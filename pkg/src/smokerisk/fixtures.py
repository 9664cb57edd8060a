"""Synthetic screening records with the public smoking dataset's columns.

The generator reproduces the column set, value coding and rough marginals
(sex-dependent anthropometrics, smokers skewed male with higher GGT,
hemoglobin and triglycerides, lower HDL) so the full pipeline can run without
the real data. It is not a statistical stand-in for the real cohort.
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .table import Schema, Table, write_csv


def default_schema() -> Schema:
    text = resources.files("smokerisk.resources").joinpath("smoking_schema.json").read_text("utf-8")
    return Schema.from_dict(json.loads(text))


def _clip(x, spec):
    lo, hi = spec.valid_range
    return np.clip(x, lo, hi)


def make_screening_table(n: int = 500, seed: int = 0, missing_rate: float = 0.0) -> Table:
    rng = np.random.default_rng(seed)
    schema = default_schema()
    male = rng.random(n) < 0.64
    smoker = rng.random(n) < np.where(male, 0.55, 0.05)
    s = smoker.astype(float)
    m = male.astype(float)

    age = rng.choice(np.arange(20, 86, 5), size=n, p=_age_weights())
    height = np.round((np.where(male, 170, 157) + rng.normal(0, 6, n) - 0.05 * (age - 45)) / 5) * 5
    bmi = rng.normal(23.5 + 0.8 * m, 3.2, n)
    weight = np.round(bmi * (height / 100) ** 2 / 5) * 5
    waist = np.round(0.55 * weight + 46 + rng.normal(0, 4, n), 1)
    eyes = np.array([0.1, 0.3, 0.5, 0.7, 0.8, 0.9, 1.0, 1.2, 1.5, 2.0])
    eyesight_l = rng.choice(eyes, n)
    eyesight_r = np.where(rng.random(n) < 0.7, eyesight_l, rng.choice(eyes, n))
    blind = rng.random(n) < 0.005
    eyesight_l[blind] = 9.9
    hearing_l = np.where(rng.random(n) < 0.03 + 0.002 * (age - 20), 2.0, 1.0)
    hearing_r = np.where(rng.random(n) < 0.7, hearing_l, np.where(rng.random(n) < 0.03, 2.0, 1.0))
    systolic = np.round(108 + 0.3 * age + 4 * m + 0.4 * (bmi - 23) + rng.normal(0, 11, n))
    relaxation = np.round(0.55 * systolic + 9 + rng.normal(0, 6, n))
    fbs = np.round(np.exp(rng.normal(4.57, 0.15, n)) + 0.15 * (age - 45))
    log_tg = rng.normal(4.65 + 0.2 * m + 0.22 * s + 0.03 * (bmi - 23), 0.45, n)
    tg = np.round(np.exp(log_tg))
    hdl = np.round(68 - 7 * m - 3 * s - 9 * (log_tg - 4.7) + rng.normal(0, 10, n))
    chol = np.round(185 + 0.4 * (age - 45) + 0.1 * tg + rng.normal(0, 32, n))
    ldl = np.round(chol - hdl - tg / 5 + rng.normal(0, 5, n))
    hemoglobin = np.round(13.1 + 2.3 * m + 0.5 * s + rng.normal(0, 0.9, n), 1)
    urine = rng.choice(np.arange(1, 7), size=n, p=[0.944, 0.03, 0.015, 0.007, 0.003, 0.001]).astype(float)
    creat = np.round(0.68 + 0.3 * m + 0.002 * (age - 45) + rng.normal(0, 0.12, n), 1)
    ast = np.round(np.exp(rng.normal(3.15 + 0.08 * m, 0.28, n)))
    alt = np.round(np.exp(rng.normal(2.95 + 0.3 * m + 0.04 * (bmi - 23), 0.45, n)))
    gtp = np.round(np.exp(rng.normal(2.95 + 0.45 * m + 0.45 * s, 0.6, n)))
    caries = (rng.random(n) < 0.18 + 0.08 * s).astype(float)
    tartar = np.where(rng.random(n) < 0.5 + 0.15 * s, "Y", "N").astype(object)

    raw = {
        "ID": np.arange(n, dtype=float),
        "gender": np.where(male, "M", "F").astype(object),
        "age": age.astype(float),
        "height(cm)": height,
        "weight(kg)": weight,
        "waist(cm)": waist,
        "eyesight(left)": eyesight_l,
        "eyesight(right)": eyesight_r,
        "hearing(left)": hearing_l,
        "hearing(right)": hearing_r,
        "systolic": systolic,
        "relaxation": relaxation,
        "fasting blood sugar": fbs,
        "Cholesterol": chol,
        "triglyceride": tg,
        "HDL": hdl,
        "LDL": ldl,
        "hemoglobin": hemoglobin,
        "Urine protein": urine,
        "serum creatinine": creat,
        "AST": ast,
        "ALT": alt,
        "Gtp": gtp,
        "oral": np.full(n, "Y", dtype=object),
        "dental caries": caries,
        "tartar": tartar,
        "smoking": s,
    }
    for spec in schema.columns:
        if spec.valid_range is not None:
            raw[spec.name] = _clip(raw[spec.name], spec)
    if missing_rate > 0:
        for spec in schema.columns:
            if spec.name in ("ID", schema.label):
                continue
            hole = rng.random(n) < missing_rate
            col = raw[spec.name].copy()
            if col.dtype == object:
                col[hole] = None
            else:
                col[hole] = np.nan
            raw[spec.name] = col
    return Table(schema, {c.name: raw[c.name] for c in schema.columns}, n)


def _age_weights():
    w = np.array([3, 6, 8, 22, 20, 14, 12, 7, 4, 2, 1, 0.6, 0.4, 0.2])
    return w / w.sum()


def write_fixture(path, n: int = 500, seed: int = 0, missing_rate: float = 0.0) -> Table:
    t = make_screening_table(n, seed, missing_rate)
    write_csv(t, path)
    return t

"""Declarative end-to-end pipeline with an atomically written report bundle."""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import os
import platform
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .clinical import FraminghamColumns, disease_submodel_cv, framingham_distribution, load_disease_rules
from .errors import ConfigError, DataError, ToolkitError
from .evaluate import ModelSpec, fit_model, cross_validate, prepare, weighting_impact_study, write_curve_csv
from .evaluate import pr_curve, roc_curve
from .explain import bmi, dependence_grid, group_importance, load_system_map, shap_summary, write_systems_csv
from .fixtures import default_schema
from .learners import FitConfig
from .preprocess import Preprocessor
from .profile import kmeans, pca_fit, pca_transform, write_cluster_means_csv, write_profile_csv
from .select import BorutaConfig, boruta, select_apply
from .stats import pearson_matrix
from .table import Schema, load_csv, summarize

log = logging.getLogger(__name__)

SEED_ENV = "RISK_SEED"
STAGES = ("ingest", "summarize", "select", "evaluate", "explain", "clinical", "profile")

DEFAULTS = {
    "dataset": None,
    "schema": None,
    "plausibility": "flag",
    "seed": None,
    "threads": 1,
    "output_dir": "report",
    "preprocess": {"scale": True},
    "resampling": {"method": None, "smote_k": 5, "smote_rate": 1.0},
    "models": [],
    "cv": {"k": 10, "threshold": 0.5},
    "weighting_study": {"enabled": False, "model": None},
    "select": {"enabled": False, "apply": True, "max_iterations": 100, "alpha": 0.05, "keep_tentative": False,
               "forest": {"n_trees": 100, "max_depth": 7}},
    "explain": {"enabled": True, "model": None, "max_rows": 2000, "system_map": None, "dependence_points": 15},
    "clinical": {"enabled": True, "rules": None, "submodels": ["kidney"], "target": "smoking",
                 "submodel_learner": "forest", "submodel_config": {"n_trees": 100}},
    "profile": {"enabled": True, "n_components": 2, "k": 4, "n_restarts": 10, "space": "pca",
                "smokers_only": True},
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class PipelineConfig:
    """Resolved pipeline settings. ``raw`` keeps the merged JSON document,
    which is what the manifest records and hashes.

    Seed precedence: explicit overrides, then the RISK_SEED environment
    variable, then the document.
    """

    raw: dict
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_dict(cls, doc: dict, base_dir=None, overrides: dict | None = None):
        merged = _merge(DEFAULTS, doc)
        env = os.environ.get(SEED_ENV)
        if env is not None and env != "":
            try:
                merged["seed"] = int(env)
            except ValueError:
                raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from None
        if overrides:
            merged = _merge(merged, overrides)
        return cls(merged, Path(base_dir) if base_dir else Path.cwd())

    @classmethod
    def from_json(cls, path, overrides=None):
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc, path.parent, overrides)

    @classmethod
    def from_manifest(cls, path):
        """The exact configuration recorded by an earlier run."""
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
            return cls(doc["config"], Path(doc["base_dir"]))
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise ConfigError(f"cannot read manifest {path}: {exc}") from None

    def path(self, key):
        v = self.raw.get(key)
        return None if v is None else self.path_from(v)

    def path_from(self, value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def threads(self) -> int:
        return max(1, int(self.raw.get("threads") or 1))

    def canonical(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    def schema(self) -> Schema:
        p = self.path("schema")
        return default_schema() if p is None else Schema.from_json(p)

    def model_specs(self) -> list:
        rs = self.raw["resampling"]
        specs = []
        for m in self.raw["models"]:
            d = dict(m)
            d.setdefault("resampling", rs.get("method"))
            if d.get("resampling") == "smote" and not d.get("smote"):
                d["smote"] = {"k": rs.get("smote_k", 5), "r": rs.get("smote_rate", 1.0), "seed": self.seed}
            specs.append(ModelSpec.from_dict(d))
        return specs


def validate_config(cfg) -> list:
    """Every problem found, as a list of messages (empty when valid).

    ``cfg`` is a path, a dict or a :class:`PipelineConfig`. An unreadable or
    unparseable file raises :class:`ConfigError` instead.
    """
    if not isinstance(cfg, PipelineConfig):
        cfg = PipelineConfig.from_json(cfg) if isinstance(cfg, (str, Path)) else PipelineConfig.from_dict(cfg)
    raw = cfg.raw
    errors = []
    seed = raw.get("seed")
    if seed is None:
        errors.append("seed: missing (every stochastic stage needs one)")
    elif not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        errors.append(f"seed: must be a non-negative integer, got {seed!r}")
    data = cfg.path("dataset")
    if data is None:
        errors.append("dataset: missing")
    elif not data.exists():
        errors.append(f"dataset: file not found: {data}")
    schema = None
    sp = cfg.path("schema")
    if sp is not None and not sp.exists():
        errors.append(f"schema: file not found: {sp}")
    else:
        try:
            schema = cfg.schema()
        except ToolkitError as exc:
            errors.append(f"schema: {exc}")
    if raw.get("plausibility") not in ("flag", "drop_cell", "reject"):
        errors.append(f"plausibility: unknown mode {raw.get('plausibility')!r}")
    if not isinstance(raw.get("threads"), int) or raw["threads"] < 1:
        errors.append(f"threads: must be an integer >= 1, got {raw.get('threads')!r}")
    if not raw.get("output_dir"):
        errors.append("output_dir: missing")

    rs = raw["resampling"]
    if rs.get("method") not in (None, "oversample", "undersample", "smote"):
        errors.append(f"resampling.method: unknown {rs.get('method')!r}")
    if not isinstance(rs.get("smote_k"), int) or rs["smote_k"] < 1:
        errors.append(f"resampling.smote_k: must be an integer >= 1, got {rs.get('smote_k')!r}")
    if not isinstance(rs.get("smote_rate"), (int, float)) or not rs["smote_rate"] > 0:
        errors.append(f"resampling.smote_rate: must be > 0, got {rs.get('smote_rate')!r}")

    names = []
    if not raw["models"]:
        errors.append("models: at least one model is required")
    for i, m in enumerate(raw["models"]):
        try:
            d = dict(m)
            if "name" not in d or "learner" not in d:
                raise ConfigError("needs 'name' and 'learner'")
            ModelSpec.from_dict(d)
            names.append(d["name"])
        except (ToolkitError, TypeError, ValueError) as exc:
            errors.append(f"models[{i}]: {exc}")
    if len(set(names)) != len(names):
        errors.append("models: names must be unique")

    k = raw["cv"].get("k")
    if not isinstance(k, int) or k < 2:
        errors.append(f"cv.k: must be an integer >= 2, got {k!r}")
    thr = raw["cv"].get("threshold")
    if not isinstance(thr, (int, float)) or not 0 <= thr <= 1:
        errors.append(f"cv.threshold: must be in [0, 1], got {thr!r}")
    elif isinstance(k, int) and k >= 2 and data is not None and data.exists() and schema is not None:
        try:
            counts = _label_counts(data, schema)
            for c, n_c in sorted(counts.items()):
                if n_c < k:
                    errors.append(f"cv.k: k={k} exceeds the size of class {c} ({n_c} rows; counts {counts})")
        except ToolkitError as exc:
            errors.append(f"dataset: {exc}")

    sel = raw["select"]
    if sel.get("enabled"):
        if not isinstance(sel.get("max_iterations"), int) or sel["max_iterations"] < 1:
            errors.append("select.max_iterations: must be an integer >= 1")
        a = sel.get("alpha")
        if not isinstance(a, (int, float)) or not 0 < a < 1:
            errors.append(f"select.alpha: must be in (0, 1), got {a!r}")
    ex = raw["explain"]
    if ex.get("enabled"):
        target = ex.get("model") or (names[0] if names else None)
        spec = next((m for m in raw["models"] if m.get("name") == target), None)
        if spec is None:
            errors.append(f"explain.model: {target!r} is not one of the configured models")
        elif spec.get("learner") not in ("forest", "gbdt_exact", "gbdt_hist"):
            errors.append(f"explain.model: {target!r} is not a tree model")
        smp = ex.get("system_map")
        if smp is not None and not cfg.path_from(smp).exists():
            errors.append(f"explain.system_map: file not found: {smp}")
    ws = raw["weighting_study"]
    if ws.get("enabled") and ws.get("model") is not None and ws["model"] not in names:
        errors.append(f"weighting_study.model: {ws['model']!r} is not one of the configured models")
    cl = raw["clinical"]
    if cl.get("enabled"):
        if cl.get("target") not in ("smoking", "rule"):
            errors.append(f"clinical.target: must be 'smoking' or 'rule', got {cl.get('target')!r}")
        try:
            rules = load_disease_rules(cfg.path_from(cl["rules"]) if cl.get("rules") else None)
            for r in cl.get("submodels") or []:
                if r not in rules:
                    errors.append(f"clinical.submodels: unknown rule {r!r}")
        except (ToolkitError, OSError, ValueError) as exc:
            errors.append(f"clinical.rules: {exc}")
    pr = raw["profile"]
    if pr.get("enabled"):
        if not isinstance(pr.get("k"), int) or pr["k"] < 1:
            errors.append(f"profile.k: must be an integer >= 1, got {pr.get('k')!r}")
        if not isinstance(pr.get("n_components"), int) or pr["n_components"] < 1:
            errors.append("profile.n_components: must be an integer >= 1")
        if pr.get("space") not in ("pca", "full"):
            errors.append(f"profile.space: must be 'pca' or 'full', got {pr.get('space')!r}")
    return errors


def _label_counts(path, schema: Schema) -> dict:
    t, _ = load_csv(path, schema)
    y = prepare(t)[0].label.astype(float)
    vals, counts = np.unique(y[~np.isnan(y)], return_counts=True)
    return {int(v): int(c) for v, c in zip(vals, counts)}


# ---------------------------------------------------------------- running


@dataclass
class ReportBundle:
    directory: Path
    manifest: dict
    cv: object = None
    ranking: object = None
    boruta: object = None
    framingham: object = None
    clusters: object = None

    def file(self, name) -> Path:
        return self.directory / name


class _Writer:
    """Collects output files under a staging directory and indexes them."""

    def __init__(self, root: Path):
        self.root = root
        self.files = []

    def path(self, stage, name, ext="csv"):
        fname = f"{stage}.{name}.{ext}"
        self.files.append(fname)
        return self.root / fname

    def json(self, stage, name, obj):
        p = self.path(stage, name, "json")
        p.write_text(json.dumps(obj, indent=2, sort_keys=True), encoding="utf-8")
        return p


def _versions():
    import numba
    import scipy

    return {
        "smokerisk": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class _Stage:
    def __init__(self, name, timings):
        self.name = name
        self.timings = timings

    def __enter__(self):
        self.t0 = time.perf_counter()
        log.info("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        self.timings[self.name] = round(time.perf_counter() - self.t0, 3)
        if exc is None:
            return False
        if isinstance(exc, ToolkitError):
            exc.args = (f"stage {self.name}: {exc}",) + exc.args[1:]
            return False
        raise ToolkitError(f"stage {self.name}: unexpected {type(exc).__name__}: {exc}") from exc


def run_pipeline(config: PipelineConfig) -> ReportBundle:
    """ingest -> summarize -> (select) -> evaluate -> explain -> clinical -> profile.

    Everything is written to a staging directory next to ``output_dir`` and
    renamed into place at the end; on any error the staging directory is
    removed and ``output_dir`` is left as it was.
    """
    errors = validate_config(config)
    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
    raw = config.raw
    out_dir = config.path_from(raw["output_dir"])
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.tmp-", dir=out_dir.parent))
    try:
        bundle = _run_stages(config, staging)
        _publish(staging, out_dir)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    bundle.directory = out_dir
    return bundle


def _publish(staging: Path, out_dir: Path):
    if out_dir.exists():
        old = out_dir.with_name(f".{out_dir.name}.old-{os.getpid()}")
        os.replace(out_dir, old)
        os.replace(staging, out_dir)
        shutil.rmtree(old, ignore_errors=True)
    else:
        os.replace(staging, out_dir)


def _run_stages(config: PipelineConfig, root: Path) -> ReportBundle:
    raw = config.raw
    seed = config.seed
    threads = config.threads
    w = _Writer(root)
    timings = {}
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    bundle = ReportBundle(root, {})

    with _Stage("ingest", timings):
        schema = config.schema()
        table, report = load_csv(config.path("dataset"), schema, raw["plausibility"])
        report.write_json(w.path("ingest", "load_report", "json"))

    with _Stage("summarize", timings):
        summarize(table).write_csv(w.path("summarize", "statistics"))
        t_enc, feats = prepare(table)
        cont = [c.name for c in t_enc.schema.columns if c.kind == "continuous" and c.name in feats]
        corr = pearson_matrix(t_enc, cont)
        corr.write_csv(w.path("summarize", "correlation"))
        corr.write_json(w.path("summarize", "correlation_heatmap", "json"))

    if raw["select"]["enabled"]:
        with _Stage("select", timings):
            sel = raw["select"]
            pre = Preprocessor.fit(t_enc.select(feats + [schema.label]), scale=False)
            X = pre.apply(t_enc.select(feats + [schema.label])).matrix(feats)
            bcfg = BorutaConfig(sel["max_iterations"], sel["alpha"], FitConfig.from_dict(sel["forest"]), seed, threads)
            res = boruta(X, t_enc.label.astype(float), bcfg, feats)
            res.write_json(w.path("select", "boruta", "json"))
            if sel["apply"]:
                t_enc = select_apply(t_enc, res, sel["keep_tentative"])
                feats = [f for f in feats if f in t_enc.schema]
            bundle.boruta = res

    specs = config.model_specs()
    with _Stage("evaluate", timings):
        cv = cross_validate(t_enc, specs, raw["cv"]["k"], seed, raw["cv"]["threshold"], feats, threads)
        cv.write_csv(w.path("evaluate", "cv_folds"))
        cv.write_summary_csv(w.path("evaluate", "cv_summary"))
        cv.write_comparisons_csv(w.path("evaluate", "comparisons"))
        cv.write_json(w.path("evaluate", "cv_report", "json"))
        for name in cv.models:
            fpr, tpr, _ = roc_curve(cv.labels, cv.oof_scores[name])
            write_curve_csv(w.path("evaluate", f"roc_{name}"), fpr, tpr, ["fpr", "tpr"])
            rec, prec, _ = pr_curve(cv.labels, cv.oof_scores[name])
            write_curve_csv(w.path("evaluate", f"pr_{name}"), rec, prec, ["recall", "precision"])
        bundle.cv = cv
        ws = raw["weighting_study"]
        if ws["enabled"]:
            base = next((s for s in specs if s.name == ws["model"]), None) or next(
                (s for s in specs if s.learner == "forest"), ModelSpec("forest", "forest"))
            study = weighting_impact_study(t_enc, base, raw["cv"]["k"], seed, raw["cv"]["threshold"], feats,
                                           n_jobs=threads)
            study.write_csv(w.path("evaluate", "weighting_impact"))

    ex = raw["explain"]
    if ex["enabled"]:
        with _Stage("explain", timings):
            _explain(config, t_enc, feats, specs, w, bundle)

    cl = raw["clinical"]
    if cl["enabled"]:
        with _Stage("clinical", timings):
            dist = framingham_distribution(table, FraminghamColumns(smoker=schema.label))
            dist.write_csv(w.path("clinical", "framingham_distribution"))
            w.json("clinical", "framingham_summary", dist.to_dict())
            bundle.framingham = dist
            rules = load_disease_rules(config.path_from(cl["rules"]) if cl.get("rules") else None)
            sub_spec = ModelSpec("submodel", cl["submodel_learner"], FitConfig.from_dict(cl["submodel_config"]),
                                 "inverse_frequency")
            rows = []
            for name in cl["submodels"] or []:
                rep = disease_submodel_cv(table, rules[name], sub_spec, raw["cv"]["k"], seed, cl["target"], threads)
                s = rep.summary["submodel"]
                rows.append({"disease": name, "target": cl["target"], "n_features": len(rules[name].predictors),
                             **{f"{m}_mean": s[m].mean for m in ("auc_roc", "auc_pr")},
                             **{f"{m}_sd": s[m].sd for m in ("auc_roc", "auc_pr")}})
            _write_rows(w.path("clinical", "submodels"), rows,
                        ["disease", "target", "n_features", "auc_roc_mean", "auc_roc_sd", "auc_pr_mean", "auc_pr_sd"])

    pr = raw["profile"]
    if pr["enabled"]:
        with _Stage("profile", timings):
            _profile(config, t_enc, feats, w, bundle)

    manifest = {
        "format": "smokerisk-report",
        "version": 1,
        "versions": _versions(),
        "seed": seed,
        "config": raw,
        "base_dir": str(config.base_dir.resolve()),
        "config_sha256": config.digest(),
        "started": started,
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "stage_seconds": timings,
        "files": {f: _sha256(root / f) for f in w.files},
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    bundle.manifest = manifest
    return bundle


def _write_rows(path, rows, header):
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow(["" if r[h] is None else (repr(r[h]) if isinstance(r[h], float) else r[h]) for h in header])


def _explain(config, t_enc, feats, specs, w, bundle):
    ex = config.raw["explain"]
    seed = config.seed
    name = ex.get("model") or specs[0].name
    spec = next(s for s in specs if s.name == name)
    label = t_enc.schema.label
    data = t_enc.select(feats + [label])
    pre = Preprocessor.fit(data)
    X = pre.apply(data).matrix(feats)
    y = data.label.astype(float)
    model = fit_model(spec, X, y, feats, n_jobs=config.threads, seed=seed)
    rng = np.random.default_rng(seed)
    n_rows = min(len(X), int(ex["max_rows"]))
    rows = np.sort(rng.choice(len(X), n_rows, replace=False))
    ranking, sm = shap_summary(model, X[rows], feats, n_jobs=config.threads)
    ranking.write_csv(w.path("explain", "importance"))
    sm.write_csv(w.path("explain", "shap_values"), row_ids=rows.tolist())
    X_raw = Preprocessor.fit(data, scale=False).apply(data).matrix(feats)
    sm.write_beeswarm_csv(w.path("explain", "beeswarm"), X_raw[rows], row_ids=rows.tolist())
    w.json("explain", "summary", {"model": name, "rows": n_rows, "base_value": sm.base_value,
                                  "output_space": sm.output, "ranking": ranking.to_dict()})
    smp = ex.get("system_map")
    system_map = load_system_map(config.path_from(smp) if smp else None)
    write_systems_csv(group_importance(ranking, system_map), w.path("explain", "systems"))
    bundle.ranking = ranking
    if all(c in feats for c in ("age", "height(cm)", "weight(kg)")):
        _age_bmi_grid(model, pre, feats, X_raw[rows], int(ex["dependence_points"]), w)
    else:
        log.info("age x BMI dependence skipped: age, height or weight is not a model feature")


def _age_bmi_grid(model, pre, feats, X_raw, points, w):
    """Age x BMI partial dependence. BMI is not a model input, so the grid
    runs over raw columns plus an appended BMI column; the transform rebuilds
    weight from BMI and height, then applies the fitted scaling."""
    ia, ih, iw = feats.index("age"), feats.index("height(cm)"), feats.index("weight(kg)")
    Xg = np.column_stack([X_raw, bmi(X_raw[:, iw], X_raw[:, ih])])
    scale = [(j, pre.scaler.params[f]) for j, f in enumerate(feats) if pre.scaler and f in pre.scaler.params]

    def to_model(Zfull):
        Z = Zfull[:, :-1].copy()
        h = Z[:, ih] / 100.0
        Z[:, iw] = Zfull[:, -1] * h * h
        for j, (mu, sd) in scale:
            Z[:, j] = (Z[:, j] - mu) / sd
        return Z

    ages = np.linspace(X_raw[:, ia].min(), X_raw[:, ia].max(), points)
    bmis = np.linspace(np.percentile(Xg[:, -1], 1), np.percentile(Xg[:, -1], 99), points)
    grid = dependence_grid(model, Xg, (ia, Xg.shape[1] - 1), (ages, bmis), to_model, names=("age", "bmi"))
    grid.write_csv(w.path("explain", "dependence_age_bmi"))


def _profile(config, t_enc, feats, w, bundle):
    pr = config.raw["profile"]
    label = t_enc.schema.label
    data = t_enc
    if pr["smokers_only"]:
        rows = np.flatnonzero(t_enc.label == 1)
        if len(rows) == 0:
            raise DataError("profile: no smokers in the data")
        data = t_enc.take(rows)
    else:
        rows = np.arange(t_enc.n_rows)
    cont = [c.name for c in data.schema.columns if c.kind == "continuous" and c.name in feats]
    sub = data.select(cont + [label])
    pre = Preprocessor.fit(sub)
    keep = [c for c in cont if c not in pre.scaler.excluded]
    Z = pre.apply(sub).matrix(keep)
    ncomp = min(int(pr["n_components"]), len(keep))
    pca = pca_fit(Z, ncomp)
    scores = pca_transform(pca, Z)
    w.json("profile", "pca", {"features": keep, **pca.to_dict()})
    space = scores if pr["space"] == "pca" else Z
    k = min(int(pr["k"]), len(space))
    clusters = kmeans(space, k, config.seed, int(pr["n_restarts"]), n_jobs=config.threads)
    ids = data["ID"].astype(int).tolist() if "ID" in data.schema else rows.tolist()
    write_profile_csv(w.path("profile", "scores"), scores, clusters.assignment, ids)
    raw_vals = Preprocessor.fit(sub, scale=False).apply(sub).matrix(keep)
    write_cluster_means_csv(w.path("profile", "cluster_means"), clusters, raw_vals, keep)
    w.json("profile", "clusters", clusters.to_dict())
    bundle.clusters = clusters


def minimal_config(dataset, output_dir, seed=0, k=2, **over) -> dict:
    """A small runnable config: one forest, k-fold CV and the default stages."""
    doc = {
        "dataset": str(dataset),
        "seed": seed,
        "output_dir": str(output_dir),
        "models": [{"name": "random_forest", "learner": "forest", "config": {"n_trees": 25},
                    "class_weighting": "inverse_frequency"}],
        "cv": {"k": k},
        "clinical": {"submodel_config": {"n_trees": 25}},
    }
    return _merge(doc, over)


def replication_config(dataset, output_dir, seed=0, threads=1) -> dict:
    """The full comparison on the public screening data: five learners under
    10-fold CV, the class-weighting study, Boruta (reported, not applied, so
    that SHAP ranks every feature) and all downstream stages."""
    forest = {"n_trees": 300}
    return {
        "dataset": str(dataset),
        "seed": seed,
        "threads": threads,
        "output_dir": str(output_dir),
        "models": [
            {"name": "random_forest", "learner": "forest", "config": forest, "class_weighting": "inverse_frequency"},
            {"name": "gbdt_exact", "learner": "gbdt_exact", "config": {"n_trees": 300, "max_depth": 6},
             "class_weighting": "inverse_frequency"},
            {"name": "gbdt_hist", "learner": "gbdt_hist", "config": {"n_trees": 300, "max_depth": 6},
             "class_weighting": "inverse_frequency"},
            {"name": "logistic_regression", "learner": "logreg", "class_weighting": "inverse_frequency"},
            {"name": "linear_svm", "learner": "linear_svm", "class_weighting": "inverse_frequency"},
        ],
        "cv": {"k": 10},
        "weighting_study": {"enabled": True, "model": "random_forest"},
        "select": {"enabled": True, "apply": False},
        "explain": {"model": "random_forest"},
        "clinical": {"submodel_config": forest},
    }

"""Command-line front end. Exit codes: 0 ok, 2 config, 3 data, 4 model/runtime."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .clinical import FraminghamColumns, FraminghamInput, framingham_distribution, framingham_points
from .errors import ConfigError, DataError, ToolkitError
from .evaluate import LEARNERS, ModelSpec, cross_validate, fit_model, metric_set, prepare
from .explain import group_importance, load_system_map, shap_summary, write_systems_csv
from .fixtures import default_schema
from .learners import FitConfig, model_from_dict, model_to_dict, predict_proba
from .pipeline import PipelineConfig, run_pipeline, validate_config
from .preprocess import Preprocessor
from .profile import kmeans, pca_fit, pca_transform, write_cluster_means_csv, write_profile_csv
from .resample import SmoteConfig
from .select import BorutaConfig, boruta
from .stats import pearson_matrix
from .table import Schema, load_csv, summarize, write_csv

log = logging.getLogger("smokerisk")

BUNDLE_FORMAT = "smokerisk-trained"


def _common():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common")
    g.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads (default 1)")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
    g.add_argument("--smote-k", type=int, default=argparse.SUPPRESS, help="SMOTE neighbour count")
    g.add_argument("--smote-rate", type=float, default=argparse.SUPPRESS, help="SMOTE synthesis rate r")
    g.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    return p


def _data_args(p, required=True):
    p.add_argument("--data", required=required, help="input CSV")
    p.add_argument("--schema", help="schema JSON (default: the bundled smoking-dataset schema)")
    p.add_argument("--plausibility", default="flag", choices=["flag", "drop_cell", "reject"])


def _model_args(p):
    p.add_argument("--learner", default="forest", choices=LEARNERS)
    p.add_argument("--model-config", help="FitConfig as a JSON object or a path to one")
    p.add_argument("--class-weighting", choices=["inverse_frequency", "ratio"])
    p.add_argument("--resampling", choices=["oversample", "undersample", "smote"])


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="smokerisk", parents=[common],
                                 description="Smoking-status risk modelling toolkit.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("ingest", parents=[common], help="load and validate a CSV")
    _data_args(p)
    p.add_argument("--report", help="write the load report JSON here")
    p.add_argument("--out", help="write the parsed table back out as CSV")

    p = sub.add_parser("summarize", parents=[common], help="descriptive statistics and correlations")
    _data_args(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("select", parents=[common], help="Boruta feature selection")
    _data_args(p)
    p.add_argument("--max-iterations", type=int, default=100)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=7)
    p.add_argument("--out", required=True, help="output JSON")

    p = sub.add_parser("train", parents=[common], help="fit one model on all rows and save it")
    _data_args(p)
    _model_args(p)
    p.add_argument("--features", nargs="+", help="feature subset (default: all)")
    p.add_argument("--out", required=True, help="trained bundle JSON")

    p = sub.add_parser("evaluate", parents=[common], help="stratified k-fold CV, or score a trained bundle")
    _data_args(p)
    _model_args(p)
    p.add_argument("--config", help="take the model list from a pipeline config")
    p.add_argument("--learners", nargs="+", choices=LEARNERS, help="compare several learners")
    p.add_argument("--bundle", help="score this trained bundle on --data instead of running CV")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("explain", parents=[common], help="TreeSHAP importances for a trained bundle")
    _data_args(p)
    p.add_argument("--bundle", required=True)
    p.add_argument("--max-rows", type=int, default=2000)
    p.add_argument("--system-map", help="feature -> physiological system JSON")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("framingham", parents=[common], help="Framingham points for a table or one person")
    _data_args(p, required=False)
    p.add_argument("--out", help="distribution CSV (with --data)")
    for name in ("age", "total-cholesterol", "hdl", "systolic-bp"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--sex", choices=["male", "female"])
    p.add_argument("--smoker", action="store_true")
    p.add_argument("--diabetic", action="store_true")

    p = sub.add_parser("cluster", parents=[common], help="PCA and k-means profiling")
    _data_args(p)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--n-components", type=int, default=2)
    p.add_argument("--n-restarts", type=int, default=10)
    p.add_argument("--all-rows", action="store_true", help="profile everyone, not only smokers")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("run", parents=[common], help="run the full pipeline from a config")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config")
    src.add_argument("--manifest", help="re-run the configuration recorded in a manifest.json")
    p.add_argument("--output-dir", help="override output_dir")

    p = sub.add_parser("validate", parents=[common], help="check a pipeline config and list every problem")
    p.add_argument("--config", required=True)
    return ap


# ---------------------------------------------------------------- helpers


def _opt(args, name, default=None):
    return getattr(args, name, default)


def _load(args):
    schema = Schema.from_json(args.schema) if args.schema else default_schema()
    return load_csv(args.data, schema, args.plausibility)


def _fit_config(args) -> FitConfig:
    raw = args.model_config
    doc = {}
    if raw:
        text = Path(raw).read_text(encoding="utf-8") if Path(raw).exists() else raw
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--model-config is neither a file nor valid JSON: {exc}") from None
    cfg = FitConfig.from_dict(doc)
    return cfg.replace(seed=_opt(args, "seed", cfg.seed))


def _spec(args, name=None, learner=None) -> ModelSpec:
    smote = None
    if args.resampling == "smote":
        smote = SmoteConfig(k=_opt(args, "smote_k", 5), r=_opt(args, "smote_rate", 1.0), seed=_opt(args, "seed", 0))
    return ModelSpec(name or learner or args.learner, learner or args.learner, _fit_config(args),
                     args.class_weighting, args.resampling, smote)


def _outdir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _emit(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def _read_bundle(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read bundle {path}: {exc}") from None
    if doc.get("format") != BUNDLE_FORMAT:
        raise ConfigError(f"{path} is not a trained bundle")
    return doc, model_from_dict(doc["model"]), Preprocessor.from_dict(doc["preprocessor"]), doc["features"]


def _bundle_matrix(t, pre, feats, scale=True):
    t, _ = prepare(t, feats)
    absent = [f for f in feats if f not in t.schema]
    if absent:
        raise DataError(f"data lacks bundle features: {', '.join(absent)}")
    data = t.select(feats + [t.schema.label])
    if not scale:
        pre = Preprocessor(pre.impute, None)
    return pre.apply(data).matrix(feats), data.label.astype(float)


# ---------------------------------------------------------------- commands


def cmd_ingest(args):
    t, report = _load(args)
    if args.report:
        report.write_json(args.report)
    if args.out:
        write_csv(t, args.out)
    _emit(report.to_dict())


def cmd_summarize(args):
    t, _ = _load(args)
    out = _outdir(args.out)
    summarize(t).write_csv(out / "summarize.statistics.csv")
    te, feats = prepare(t)
    cont = [c.name for c in te.schema.columns if c.kind == "continuous" and c.name in feats]
    corr = pearson_matrix(te, cont)
    corr.write_csv(out / "summarize.correlation.csv")
    corr.write_json(out / "summarize.correlation_heatmap.json")
    strongest = sorted((p for p in corr.pairs() if p[2] is not None), key=lambda p: -abs(p[2]))[:5]
    _emit({"rows": t.n_rows, "strongest_correlations": [{"a": a, "b": b, "r": r} for a, b, r in strongest]})


def cmd_select(args):
    t, _ = _load(args)
    te, feats = prepare(t)
    data = te.select(feats + [te.schema.label])
    X = Preprocessor.fit(data, scale=False).apply(data).matrix(feats)
    cfg = BorutaConfig(args.max_iterations, args.alpha, FitConfig(n_trees=args.n_trees, max_depth=args.max_depth),
                       _opt(args, "seed", 0), _opt(args, "threads", 1))
    res = boruta(X, data.label.astype(float), cfg, feats)
    res.write_json(args.out)
    _emit({"confirmed": res.confirmed, "tentative": res.tentative, "rejected": res.rejected,
           "iterations": res.n_iterations})


def cmd_train(args):
    t, _ = _load(args)
    te, feats = prepare(t, args.features)
    data = te.select(feats + [te.schema.label])
    pre = Preprocessor.fit(data)
    X = pre.apply(data).matrix(feats)
    spec = _spec(args)
    model = fit_model(spec, X, data.label.astype(float), feats, n_jobs=_opt(args, "threads", 1))
    doc = {"format": BUNDLE_FORMAT, "version": 1, "spec": spec.to_dict(), "features": feats,
           "preprocessor": pre.to_dict(), "model": model_to_dict(model)}
    Path(args.out).write_text(json.dumps(doc), encoding="utf-8")
    _emit({"model": spec.name, "learner": spec.learner, "features": len(feats), "rows": t.n_rows})


def cmd_evaluate(args):
    t, _ = _load(args)
    out = _outdir(args.out)
    if args.bundle:
        _, model, pre, feats = _read_bundle(args.bundle)
        X, y = _bundle_matrix(t, pre, feats)
        ms = metric_set(y, predict_proba(model, X), args.threshold)
        (out / "evaluate.holdout.json").write_text(json.dumps(ms.to_dict(), indent=2), encoding="utf-8")
        _emit(ms.to_dict())
        return
    if args.config:
        specs = PipelineConfig.from_json(args.config).model_specs()
    elif args.learners:
        specs = [_spec(args, learner=lr) for lr in args.learners]
    else:
        specs = [_spec(args)]
    cv = cross_validate(t, specs, args.k, _opt(args, "seed", 0), args.threshold, None, _opt(args, "threads", 1))
    cv.write_csv(out / "evaluate.cv_folds.csv")
    cv.write_summary_csv(out / "evaluate.cv_summary.csv")
    cv.write_comparisons_csv(out / "evaluate.comparisons.csv")
    cv.write_json(out / "evaluate.cv_report.json")
    _emit({m: {k: cv.mean(m, k) for k in ("auc_roc", "auc_pr", "sensitivity", "specificity")} for m in cv.models})


def cmd_explain(args):
    t, _ = _load(args)
    out = _outdir(args.out)
    _, model, pre, feats = _read_bundle(args.bundle)
    X, _ = _bundle_matrix(t, pre, feats)
    rng = np.random.default_rng(_opt(args, "seed", 0))
    rows = np.sort(rng.choice(len(X), min(len(X), args.max_rows), replace=False))
    ranking, sm = shap_summary(model, X[rows], feats, n_jobs=_opt(args, "threads", 1))
    ranking.write_csv(out / "explain.importance.csv")
    sm.write_csv(out / "explain.shap_values.csv", row_ids=rows.tolist())
    Xr, _ = _bundle_matrix(t, pre, feats, scale=False)
    sm.write_beeswarm_csv(out / "explain.beeswarm.csv", Xr[rows], row_ids=rows.tolist())
    write_systems_csv(group_importance(ranking, load_system_map(args.system_map)), out / "explain.systems.csv")
    _emit({"top": [{"feature": e.feature, "share": e.share} for e in ranking.top(10)],
           "top15_share": ranking.share_of_top(15)})


def cmd_framingham(args):
    if args.data:
        t, _ = _load(args)
        dist = framingham_distribution(t, FraminghamColumns(smoker=t.schema.label or "smoking"))
        if args.out:
            dist.write_csv(args.out)
        _emit(dist.to_dict())
        return
    need = {"age": args.age, "total_cholesterol": args.total_cholesterol, "hdl": args.hdl,
            "systolic_bp": args.systolic_bp, "sex": args.sex}
    absent = [k for k, v in need.items() if v is None]
    if absent:
        raise ConfigError("give --data, or all of: " + ", ".join("--" + k.replace("_", "-") for k in absent))
    rc = framingham_points(FraminghamInput(args.age, args.total_cholesterol, args.hdl, args.systolic_bp,
                                           args.smoker, args.diabetic, args.sex))
    _emit({"points": rc.points, "category": rc.category, "risk_percent": rc.risk_percent,
           "components": rc.components})


def cmd_cluster(args):
    t, _ = _load(args)
    out = _outdir(args.out)
    te, feats = prepare(t)
    if not args.all_rows:
        rows = np.flatnonzero(te.label == 1)
        if len(rows) == 0:
            raise DataError("no smokers to profile")
        te = te.take(rows)
    cont = [c.name for c in te.schema.columns if c.kind == "continuous" and c.name in feats]
    sub = te.select(cont + [te.schema.label])
    pre = Preprocessor.fit(sub)
    keep = [c for c in cont if c not in pre.scaler.excluded]
    Z = pre.apply(sub).matrix(keep)
    pca = pca_fit(Z, min(args.n_components, len(keep)))
    scores = pca_transform(pca, Z)
    res = kmeans(scores, args.k, _opt(args, "seed", 0), args.n_restarts, n_jobs=_opt(args, "threads", 1))
    ids = te["ID"].astype(int).tolist() if "ID" in te.schema else None
    write_profile_csv(out / "profile.scores.csv", scores, res.assignment, ids)
    raw = Preprocessor.fit(sub, scale=False).apply(sub).matrix(keep)
    write_cluster_means_csv(out / "profile.cluster_means.csv", res, raw, keep)
    _emit({"explained_ratio": pca.explained_ratio.tolist(), "inertia": res.inertia,
           "sizes": np.bincount(res.assignment, minlength=res.k).tolist()})


def _overrides(args) -> dict:
    over = {}
    if hasattr(args, "seed"):
        over["seed"] = args.seed
    if hasattr(args, "threads"):
        over["threads"] = args.threads
    rs = {}
    if hasattr(args, "smote_k"):
        rs["smote_k"] = args.smote_k
    if hasattr(args, "smote_rate"):
        rs["smote_rate"] = args.smote_rate
    if rs:
        over["resampling"] = rs
    if getattr(args, "output_dir", None):
        over["output_dir"] = args.output_dir
    return over


def cmd_run(args):
    if args.manifest:
        cfg = PipelineConfig.from_manifest(args.manifest)
        over = _overrides(args)
        if over:
            cfg = PipelineConfig.from_dict(cfg.raw, cfg.base_dir, over)
    else:
        cfg = PipelineConfig.from_json(args.config, _overrides(args))
    bundle = run_pipeline(cfg)
    summary = {"output_dir": str(bundle.directory), "config_sha256": bundle.manifest["config_sha256"],
               "files": len(bundle.manifest["files"])}
    if bundle.cv is not None:
        summary["auc_roc"] = {m: bundle.cv.mean(m, "auc_roc") for m in bundle.cv.models}
    _emit(summary)


def cmd_validate(args):
    errors = validate_config(PipelineConfig.from_json(args.config, _overrides(args)))
    _emit({"valid": not errors, "errors": errors})
    if errors:
        raise SystemExit(ConfigError.exit_code)


COMMANDS = {
    "ingest": cmd_ingest,
    "summarize": cmd_summarize,
    "select": cmd_select,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "explain": cmd_explain,
    "framingham": cmd_framingham,
    "cluster": cmd_cluster,
    "run": cmd_run,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(_opt(args, "verbose", 0), logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if _opt(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return ConfigError.exit_code
    try:
        COMMANDS[args.command](args)
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except SystemExit as exc:
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the runtime exit code
        log.debug("unhandled error", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return ToolkitError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())

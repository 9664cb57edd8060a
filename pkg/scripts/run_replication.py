"""Run the full five-learner comparison on the public screening CSV and
print the headline numbers next to the acceptance bands."""

import argparse
import csv
import json
import sys
from pathlib import Path

from smokerisk.errors import ToolkitError
from smokerisk.pipeline import PipelineConfig, replication_config, run_pipeline


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("dataset", help="screening CSV (55,691 rows)")
    ap.add_argument("--out", default="replication")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--write-config", help="only write the config JSON here and exit")
    args = ap.parse_args()

    doc = replication_config(Path(args.dataset).resolve(), Path(args.out).resolve(), args.seed, args.threads)
    if args.write_config:
        Path(args.write_config).write_text(json.dumps(doc, indent=2), encoding="utf-8")
        return 0
    try:
        bundle = run_pipeline(PipelineConfig.from_dict(doc))
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code

    d = bundle.directory
    summary = {(r["model"], r["metric"]): r["mean"] for r in _rows(d / "evaluate.cv_summary.csv")}
    print("mean AUC-ROC / AUC-PR by model")
    for m in bundle.cv.models:
        print(f"  {m:22s} {summary[m, 'auc_roc']:>10.8s} {summary[m, 'auc_pr']:>10.8s}")
    p = bundle.cv.comparison("random_forest", "logistic_regression").p_value
    print(f"forest vs logistic regression paired t-test p = {p:.3g}  (band: < 0.01)")
    for r in _rows(d / "evaluate.weighting_impact.csv"):
        if r["metric"] in ("sensitivity", "specificity", "g_mean"):
            print(f"weighting delta {r['metric']:12s} {r['delta']}")
    top = bundle.ranking.features[:2]
    print(f"SHAP top two: {top}; top-15 share {bundle.ranking.share_of_top(15):.3f}  (band: >= 0.85)")
    boruta = json.loads((d / "select.boruta.json").read_text())
    print(f"Boruta confirmed {len(boruta['confirmed'])} features in {boruta['n_iterations']} rounds")
    pca = json.loads((d / "profile.pca.json").read_text())
    print(f"PCA first-two ratio {sum(pca['explained_ratio'][:2]):.3f}  (band: 0.30-0.40)")
    f = bundle.framingham
    print(f"Framingham moderate+high: smokers {f.elevated_share(1):.3f}, non-smokers {f.elevated_share(0):.3f}")
    for r in _rows(d / "clinical.submodels.csv"):
        print(f"{r['disease']} sub-model AUC-ROC {r['auc_roc_mean']}")
    print(f"report written to {d}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

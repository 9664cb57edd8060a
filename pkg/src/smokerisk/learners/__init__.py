"""From-scratch classifiers and their JSON persistence."""

import json
from pathlib import Path

import numpy as np

from ..errors import ModelError
from .linear import LinearModel, fit_linear_svm, fit_logreg
from .trees import (
    EnsembleModel,
    FitConfig,
    Tree,
    TreeNode,
    bin_features,
    fit_forest,
    fit_gbdt,
    fit_tree,
    quantile_edges,
)

FORMAT = "smokerisk-model"
FORMAT_VERSION = 1

__all__ = [
    "EnsembleModel",
    "FitConfig",
    "LinearModel",
    "Tree",
    "TreeNode",
    "bin_features",
    "fit_forest",
    "fit_gbdt",
    "fit_linear_svm",
    "fit_logreg",
    "fit_tree",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "predict_proba",
    "quantile_edges",
    "save_model",
]


def predict_proba(model, X) -> np.ndarray:
    """Positive-class probability for any fitted model (a bare Tree included)."""
    if isinstance(model, Tree):
        return model.predict(X)
    if isinstance(model, (EnsembleModel, LinearModel)):
        return model.predict_proba(X)
    raise ModelError(f"unsupported model type {type(model).__name__}")


def model_to_dict(model) -> dict:
    doc = {"format": FORMAT, "version": FORMAT_VERSION}
    if isinstance(model, Tree):
        doc.update(type="tree", tree=model.to_dict())
    elif isinstance(model, EnsembleModel):
        doc.update(
            type="ensemble",
            kind=model.kind,
            n_features=model.n_features,
            feature_names=model.feature_names,
            learning_rate=model.learning_rate,
            base_score=model.base_score,
            feature_importances=None
            if model.feature_importances is None
            else model.feature_importances.tolist(),
            tree_meta=model.tree_meta,
            train_loss=model.train_loss,
            config=model.config,
            trees=[t.to_dict() for t in model.trees],
        )
    elif isinstance(model, LinearModel):
        doc.update(
            type="linear",
            kind=model.kind,
            weights=model.weights.tolist(),
            bias=model.bias,
            converged=model.converged,
            n_iter=model.n_iter,
            feature_names=model.feature_names,
        )
    else:
        raise ModelError(f"cannot serialize {type(model).__name__}")
    return doc


def model_from_dict(doc: dict):
    if doc.get("format") != FORMAT:
        raise ModelError("not a smokerisk model document")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelError(f"unsupported model format version {doc.get('version')}")
    kind = doc["type"]
    if kind == "tree":
        return Tree.from_dict(doc["tree"])
    if kind == "ensemble":
        fi = doc.get("feature_importances")
        return EnsembleModel(
            kind=doc["kind"],
            trees=[Tree.from_dict(t) for t in doc["trees"]],
            n_features=doc["n_features"],
            feature_names=doc.get("feature_names"),
            learning_rate=doc["learning_rate"],
            base_score=doc["base_score"],
            feature_importances=None if fi is None else np.asarray(fi),
            tree_meta=doc.get("tree_meta", []),
            train_loss=doc.get("train_loss", []),
            config=doc.get("config", {}),
        )
    if kind == "linear":
        return LinearModel(
            np.asarray(doc["weights"], float), doc["bias"], doc["kind"], doc["converged"],
            doc["n_iter"], [], doc.get("feature_names"),
        )
    raise ModelError(f"unknown model type {kind!r}")


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)), encoding="utf-8")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

"""Feature matrices, boosted trees, linear baselines, metrics and selection."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .gbm import GbmModel, GbmParams, Tree, train_gbm
from .linear import LinearModel, train_linear
from .matrix import FeatureMatrix, assemble, fill_missing, impute, infer_task, split
from .metrics import (
    EvalReport,
    auc_rank,
    auc_trapezoid,
    evaluate_classification,
    evaluate_regression,
    roc_curve,
)
from .selection import Importance, RfeResult, grid_search, permutation_importance, rfe, train_family

MODEL_FORMAT = "lmsfeat-model"
MODEL_VERSION = 1

__all__ = [
    "EvalReport",
    "FeatureMatrix",
    "GbmModel",
    "GbmParams",
    "Importance",
    "LinearModel",
    "RfeResult",
    "Tree",
    "assemble",
    "auc_rank",
    "auc_trapezoid",
    "evaluate",
    "evaluate_classification",
    "evaluate_regression",
    "fill_missing",
    "grid_search",
    "impute",
    "infer_task",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "permutation_importance",
    "predict",
    "rfe",
    "roc_curve",
    "save_model",
    "split",
    "train_family",
    "train_gbm",
    "train_linear",
]


def predict(model, rows) -> np.ndarray:
    """Predictions for a FeatureMatrix, a DataFrame or a plain matrix.

    DataFrame rows must carry every model column; missing cells are filled
    with the medians stored at training time.
    """
    if isinstance(rows, FeatureMatrix):
        if list(rows.columns) != list(model.columns):
            raise ValueError(f"feature columns {rows.columns} do not match model columns {model.columns}")
        X = rows.X
    elif isinstance(rows, pd.DataFrame):
        X = fill_missing(rows, model.columns, model.medians)
    else:
        X = np.asarray(rows, dtype=float)
    return model.predict(X)


def evaluate(model, test: FeatureMatrix, tolerances=(0.5, 1.0)) -> EvalReport:
    preds = predict(model, test)
    if model.task == "classification":
        return evaluate_classification(preds, test.y)
    return evaluate_regression(preds, test.y, tolerances)


def model_to_dict(model) -> dict:
    return {"format": MODEL_FORMAT, "version": MODEL_VERSION, **model.to_dict()}


def model_from_dict(d: dict):
    if d.get("format") != MODEL_FORMAT:
        raise ValueError("not a model document")
    if d.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {d.get('version')}")
    family = d.get("family")
    if family == "gbm":
        return GbmModel.from_dict(d)
    if family == "linear":
        return LinearModel.from_dict(d)
    raise ValueError(f"unknown model family {family!r}")


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1, sort_keys=True) + "\n")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))

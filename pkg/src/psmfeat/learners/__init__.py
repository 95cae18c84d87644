"""From-scratch learners: logistic regression, linear SVM, random forest."""

from __future__ import annotations

import json
from pathlib import Path

from .forest import Forest, ForestParams, Tree, forest_proba, train_forest
from .linear import (
    LOGISTIC,
    SVM,
    LinearModel,
    TrainConfig,
    TrainingError,
    decision_function,
    hinge_objective,
    logistic_objective,
    predict_proba,
    train_linear_svm,
    train_logreg,
)

FOREST = "forest"
CLASSIFIERS = (LOGISTIC, SVM, FOREST)

__all__ = [
    "CLASSIFIERS",
    "FOREST",
    "Forest",
    "ForestParams",
    "LOGISTIC",
    "LinearModel",
    "SVM",
    "TrainConfig",
    "TrainingError",
    "Tree",
    "decision_function",
    "dump_model",
    "forest_proba",
    "hinge_objective",
    "load_model",
    "logistic_objective",
    "model_from_dict",
    "model_to_dict",
    "predict_proba",
    "score",
    "train_forest",
    "train_linear_svm",
    "train_logreg",
]


def model_to_dict(model) -> dict:
    if isinstance(model, LinearModel):
        return {
            "kind": model.kind,
            "weights": [float(w) for w in model.weights],
            "bias": model.bias,
        }
    if isinstance(model, Forest):
        return {
            "kind": FOREST,
            "n_features": model.n_features,
            "seed": model.seed,
            "params": model.params.to_dict(),
            "trees": [t.to_record() for t in model.trees],
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(record: dict):
    kind = record.get("kind")
    if kind in (LOGISTIC, SVM):
        return LinearModel(record["weights"], record["bias"], kind)
    if kind == FOREST:
        return Forest(
            tuple(Tree.from_record(t) for t in record["trees"]),
            ForestParams(**record["params"]),
            int(record["seed"]),
            int(record["n_features"]),
        )
    raise ValueError(f"unknown model kind {kind!r}")


def dump_model(model, path: str | Path) -> None:
    # float repr is the shortest string that round-trips exactly
    text = json.dumps(model_to_dict(model), indent=1, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_model(path: str | Path):
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def score(model, X):
    """Ranking score per row: probability for logistic/forest, margin for svm."""
    if isinstance(model, Forest):
        return forest_proba(model, X)
    if model.kind == SVM:
        return decision_function(model, X)
    return predict_proba(model, X)

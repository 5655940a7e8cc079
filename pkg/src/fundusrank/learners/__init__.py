"""Classifier family: boosted decision trees, decision forest and kNN."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import DataError
from ..splits import stratified_folds
from ..table import FeatureTable
from . import boosting, forest, knn

KINDS = ("BDT", "DF", "KNN")
DEFAULTS = {"BDT": boosting.BDT_DEFAULTS, "DF": forest.DF_DEFAULTS, "KNN": knn.KNN_DEFAULTS}
FORMAT_VERSION = 1


@dataclass
class TrainedModel:
    kind: str
    hyperparams: dict
    class_ids: list[int]
    n_features: int
    train_seed: int
    state: dict = field(repr=False)

    @property
    def loss_trace(self) -> list[list[float]]:
        """Per-ensemble training log-loss after each boosting round (BDT only)."""
        return [e["loss_trace"] for e in self.state.get("ensembles", [])]


def _prepare(table: FeatureTable):
    class_ids = np.unique(table.labels)
    if len(class_ids) < 2:
        raise ValueError(f"need at least 2 classes to train, got {class_ids.tolist()}")
    return class_ids, np.searchsorted(class_ids, table.labels)


def _params(kind, params):
    merged = dict(DEFAULTS[kind])
    unknown = set(params or {}) - set(merged)
    if unknown:
        raise ValueError(f"unknown {kind} parameter(s): {sorted(unknown)}")
    merged.update(params or {})
    return merged


def train_bdt(table: FeatureTable, params: dict | None = None, seed: int = 0) -> TrainedModel:
    params = _params("BDT", params)
    class_ids, y = _prepare(table)
    state = boosting.fit_bdt(table.values, y, len(class_ids), params)
    return TrainedModel("BDT", params, class_ids.tolist(), table.L, seed, state)


def train_df(table: FeatureTable, params: dict | None = None, seed: int = 0) -> TrainedModel:
    params = _params("DF", params)
    class_ids, y = _prepare(table)
    order = np.argsort(table.sample_ids, kind="stable")
    state = forest.fit_df(table.values[order], y[order], len(class_ids), params, seed)
    return TrainedModel("DF", params, class_ids.tolist(), table.L, seed, state)


def train_knn(table: FeatureTable, params: dict | None = None, seed: int = 0) -> TrainedModel:
    params = _params("KNN", params)
    class_ids, y = _prepare(table)
    state = knn.fit_knn(table.values, y, params)
    return TrainedModel("KNN", params, class_ids.tolist(), table.L, seed, state)


TRAINERS = {"BDT": train_bdt, "DF": train_df, "KNN": train_knn}


def train(kind: str, table: FeatureTable, params: dict | None = None, seed: int = 0) -> TrainedModel:
    try:
        trainer = TRAINERS[kind.upper()]
    except KeyError:
        raise ValueError(f"unknown classifier {kind!r}; expected one of {KINDS}") from None
    return trainer(table, params, seed)


def predict(model: TrainedModel, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(labels, scores)``; score columns follow ``model.class_ids``."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != model.n_features:
        got = rows.shape[1] if rows.ndim == 2 else rows.shape
        raise ValueError(f"expected {model.n_features} features, got {got}")
    c = len(model.class_ids)
    ids = np.asarray(model.class_ids)
    if model.kind == "KNN":
        idx, scores = knn.predict_knn(model.state, rows, c)
        return ids[idx], scores
    if model.kind == "BDT":
        scores = boosting.predict_scores(model.state, rows, c)
    else:
        scores = forest.predict_scores(model.state, rows, c)
    return ids[scores.argmax(axis=1)], scores


def save_model(model: TrainedModel, path) -> None:
    if model.kind == "BDT":
        state = boosting.state_to_dict(model.state)
    elif model.kind == "DF":
        state = forest.state_to_dict(model.state)
    else:
        state = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in model.state.items()}
    doc = {
        "format": "fundusrank-model",
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "hyperparams": model.hyperparams,
        "class_ids": model.class_ids,
        "n_features": model.n_features,
        "train_seed": model.train_seed,
        "state": state,
    }
    Path(path).write_text(json.dumps(doc))


def load_model(path) -> TrainedModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "fundusrank-model" or doc.get("version") != FORMAT_VERSION:
        raise DataError(f"{path}: not a version-{FORMAT_VERSION} model file")
    kind = doc["kind"]
    if kind == "BDT":
        state = boosting.state_from_dict(doc["state"])
    elif kind == "DF":
        state = forest.state_from_dict(doc["state"])
    else:
        s = doc["state"]
        state = {"X": np.asarray(s["X"], dtype=float).reshape(-1, doc["n_features"]),
                 "y": np.asarray(s["y"], dtype=np.int64), "mean": np.asarray(s["mean"], dtype=float),
                 "std": np.asarray(s["std"], dtype=float), "k": int(s["k"])}
    return TrainedModel(kind, doc["hyperparams"], doc["class_ids"], doc["n_features"], doc["train_seed"], state)


def cross_val_errors(kind: str, params: dict | None, table: FeatureTable,
                     folds: int | Sequence[tuple[np.ndarray, np.ndarray]] = 5, seed: int = 0) -> list[float]:
    """Validation error rate of ``kind`` on each (fit, validation) fold."""
    if isinstance(folds, int):
        folds = stratified_folds(table.labels, folds, seed)
    errors = []
    for fit_idx, val_idx in folds:
        model = train(kind, table.take(fit_idx), params, seed)
        val = table.take(val_idx)
        labels, _ = predict(model, val.values)
        errors.append(float(np.mean(labels != val.labels)))
    return errors


def select_classifier(candidates: Sequence[tuple[str, dict | None]], train_table: FeatureTable,
                      folds: int | Sequence[tuple[np.ndarray, np.ndarray]] = 5, seed: int = 0,
                      return_errors: bool = False):
    """Kind with the lowest mean validation error; ties keep candidate order."""
    if not candidates:
        raise ValueError("no candidate classifiers")
    if isinstance(folds, int):
        folds = stratified_folds(train_table.labels, folds, seed)
    means = [float(np.mean(cross_val_errors(kind, params, train_table, folds, seed)))
             for kind, params in candidates]
    best = candidates[int(np.argmin(means))][0].upper()
    return (best, means) if return_errors else best


__all__ = [
    "KINDS", "TrainedModel", "train", "train_bdt", "train_df", "train_knn", "predict",
    "save_model", "load_model", "cross_val_errors", "select_classifier",
]

"""Decision forest: bootstrap-bagged Gini trees with random feature subsets per split."""

from __future__ import annotations

import math

import numpy as np

from ._tree import Binning, Tree, grow_tree
from .boosting import class_weights

DF_DEFAULTS = {
    "n_trees": 100,
    "max_depth": None,
    "min_leaf": 5,
    "max_features": "sqrt",
    "bootstrap": True,
    "class_weight": None,  # or "balanced"
}


def _mtry(spec, L):
    if spec in (None, "all"):
        return L
    if spec == "sqrt":
        return max(1, int(math.floor(math.sqrt(L))))
    return max(1, min(int(spec), L))


def fit_df(X: np.ndarray, y_idx: np.ndarray, n_classes: int, params: dict, seed: int) -> dict:
    """Rows must already be in canonical (sample-id) order; bootstrap draws index into it."""
    X = np.asarray(X, dtype=float)
    n, L = X.shape
    binning = Binning.fit(X)
    codes = binning.transform(X)
    base_w = np.ones(n)
    if params.get("class_weight") == "balanced":
        base_w = class_weights(y_idx, base_w, n_classes)
    rng = np.random.default_rng(seed)
    mtry = _mtry(params["max_features"], L)
    trees = []
    for _ in range(params["n_trees"]):
        if params["bootstrap"]:
            counts = np.bincount(rng.integers(0, n, n), minlength=n).astype(float)
        else:
            counts = np.ones(n)
        rows = np.flatnonzero(counts)
        trees.append(grow_tree(
            codes, binning, rows, mode="gini", weight=counts * base_w, size=counts, target=y_idx,
            n_classes=n_classes, max_depth=params["max_depth"], min_leaf=params["min_leaf"],
            max_features=mtry, rng=rng,
        ))
    return {"trees": trees}


def predict_scores(state: dict, X: np.ndarray, n_classes: int) -> np.ndarray:
    """Fraction of trees voting for each class (a leaf votes for its majority class)."""
    X = np.asarray(X, dtype=float)
    votes = np.zeros((len(X), n_classes))
    rows = np.arange(len(X))
    for tree in state["trees"]:
        leaf_class = tree.value.argmax(axis=1)
        votes[rows, leaf_class[tree.apply(X)]] += 1.0
    return votes / len(state["trees"])


def state_to_dict(state: dict) -> dict:
    return {"trees": [t.to_dict() for t in state["trees"]]}


def state_from_dict(d: dict) -> dict:
    return {"trees": [Tree.from_dict(t) for t in d["trees"]]}

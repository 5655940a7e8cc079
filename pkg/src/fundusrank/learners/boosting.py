"""Gradient-boosted trees with logistic loss, one-vs-rest for more than two classes."""

from __future__ import annotations

import numpy as np

from ._tree import Binning, Tree, grow_tree

BDT_DEFAULTS = {
    "n_trees": 100,
    "max_depth": 4,
    "learning_rate": 0.2,
    "min_leaf": 10,
    "class_weight": None,  # or "balanced"
}


def _sigmoid(f):
    return 0.5 * (1.0 + np.tanh(0.5 * f))


def _log_loss(t, f, w):
    # log(1 + e^{-f}) for t=1, log(1 + e^{f}) for t=0
    z = np.where(t > 0, -f, f)
    return float(np.sum(w * np.logaddexp(0.0, z)) / np.sum(w))


def collapse_duplicates(X: np.ndarray, y: np.ndarray):
    """Merge identical (row, label) pairs into weighted unique rows in lexicographic order."""
    stacked = np.column_stack([X, y.astype(float)])
    uniq, counts = np.unique(stacked, axis=0, return_counts=True)
    return uniq[:, :-1], uniq[:, -1].astype(np.int64), counts.astype(float)


def class_weights(y_idx: np.ndarray, weights: np.ndarray, n_classes: int) -> np.ndarray:
    """Per-row multipliers giving every class the same total weight."""
    totals = np.bincount(y_idx, weights=weights, minlength=n_classes)
    scale = totals.sum() / (n_classes * np.where(totals > 0, totals, 1.0))
    return scale[y_idx]


def fit_bdt(X: np.ndarray, y_idx: np.ndarray, n_classes: int, params: dict) -> dict:
    """Train the boosted ensembles; returns the serialisable model state.

    Rows are first collapsed into distinct (features, label) pairs carrying
    their multiplicity as weight, and ``min_leaf`` counts distinct rows, so
    repeating the whole training set leaves the model unchanged.
    """
    Xu, yu, w = collapse_duplicates(X, y_idx)
    if params.get("class_weight") == "balanced":
        w = w * class_weights(yu, w, n_classes)
    binning = Binning.fit(Xu, w)
    codes = binning.transform(Xu)
    rows = np.arange(len(Xu))
    size = np.ones(len(Xu))

    targets = [1] if n_classes == 2 else list(range(n_classes))
    ensembles = []
    for cls in targets:
        t = (yu == cls).astype(float)
        p0 = float(np.sum(w * t) / np.sum(w))
        p0 = min(max(p0, 1e-12), 1 - 1e-12)
        init = float(np.log(p0 / (1 - p0)))
        f = np.full(len(Xu), init)
        trees, trace = [], [_log_loss(t, f, w)]
        for _ in range(params["n_trees"]):
            p = _sigmoid(f)
            tree = grow_tree(
                codes, binning, rows, mode="newton", weight=w, size=size, target=t - p,
                hessian=w * p * (1 - p), max_depth=params["max_depth"], min_leaf=params["min_leaf"],
            )
            tree.value *= params["learning_rate"]
            f = f + tree.value[tree.apply_binned(codes), 0]
            trees.append(tree)
            trace.append(_log_loss(t, f, w))
        ensembles.append({"target": cls, "init": init, "trees": trees, "loss_trace": trace})
    return {"ensembles": ensembles}


def decision_function(state: dict, X: np.ndarray) -> np.ndarray:
    """Raw additive scores, one column per ensemble."""
    X = np.asarray(X, dtype=float)
    out = np.empty((len(X), len(state["ensembles"])))
    for k, ens in enumerate(state["ensembles"]):
        f = np.full(len(X), ens["init"])
        for tree in ens["trees"]:
            f += tree.value[tree.apply(X), 0]
        out[:, k] = f
    return out


def predict_scores(state: dict, X: np.ndarray, n_classes: int) -> np.ndarray:
    prob = _sigmoid(decision_function(state, X))
    if n_classes == 2:
        return np.column_stack([1.0 - prob[:, 0], prob[:, 0]])
    return prob


def state_to_dict(state: dict) -> dict:
    return {"ensembles": [
        {"target": e["target"], "init": e["init"], "loss_trace": e["loss_trace"],
         "trees": [t.to_dict() for t in e["trees"]]}
        for e in state["ensembles"]
    ]}


def state_from_dict(d: dict) -> dict:
    return {"ensembles": [
        {"target": e["target"], "init": e["init"], "loss_trace": e["loss_trace"],
         "trees": [Tree.from_dict(t) for t in e["trees"]]}
        for e in d["ensembles"]
    ]}

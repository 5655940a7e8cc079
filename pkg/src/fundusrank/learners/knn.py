"""k-nearest-neighbour baseline on z-scored features."""

from __future__ import annotations

import numpy as np

KNN_DEFAULTS = {"k": 5}
_CHUNK_CELLS = 1 << 22


def fit_knn(X: np.ndarray, y_idx: np.ndarray, params: dict) -> dict:
    X = np.asarray(X, dtype=float)
    k = int(params["k"])
    if not 1 <= k <= len(X):
        raise ValueError(f"k must be in [1, {len(X)}], got {k}")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return {"X": (X - mean) / std, "y": np.asarray(y_idx, dtype=np.int64), "mean": mean, "std": std, "k": k}


def _sq_distances(Q, X):
    d = (Q**2).sum(axis=1)[:, None] - 2.0 * Q @ X.T + (X**2).sum(axis=1)[None, :]
    return np.maximum(d, 0.0)


def neighbours(state: dict, X: np.ndarray):
    """Indices and distances of the k nearest training rows (distance ties: lower index)."""
    Q = (np.asarray(X, dtype=float) - state["mean"]) / state["std"]
    T, k = state["X"], state["k"]
    idx = np.empty((len(Q), k), dtype=np.int64)
    dist = np.empty((len(Q), k))
    step = max(1, _CHUNK_CELLS // max(len(T), 1))
    for s in range(0, len(Q), step):
        d = _sq_distances(Q[s:s + step], T)
        part = np.argpartition(d, k - 1, axis=1)[:, :k] if k < d.shape[1] else np.tile(np.arange(k), (len(d), 1))
        kth = np.take_along_axis(d, part, axis=1).max(axis=1)
        ambiguous = (d <= kth[:, None]).sum(axis=1) > k
        for i in np.flatnonzero(ambiguous):
            part[i] = np.argsort(d[i], kind="stable")[:k]
        # sort the k chosen by (distance, index)
        pd = np.take_along_axis(d, part, axis=1)
        order = np.lexsort((part, pd), axis=1)
        part = np.take_along_axis(part, order, axis=1)
        idx[s:s + step] = part
        dist[s:s + step] = np.sqrt(np.take_along_axis(d, part, axis=1))
    return idx, dist


def predict_knn(state: dict, X: np.ndarray, n_classes: int):
    """Majority vote; vote ties go to the class whose voters are closest on average."""
    idx, dist = neighbours(state, X)
    lab = state["y"][idx]
    m, k = lab.shape
    votes = np.zeros((m, n_classes))
    dsum = np.zeros((m, n_classes))
    rows = np.repeat(np.arange(m), k)
    np.add.at(votes, (rows, lab.ravel()), 1.0)
    np.add.at(dsum, (rows, lab.ravel()), dist.ravel())
    tied = votes == votes.max(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_d = np.where(tied, dsum / votes, np.inf)
    labels = mean_d.argmin(axis=1)
    return labels, votes / k

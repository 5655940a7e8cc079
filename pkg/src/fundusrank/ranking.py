"""Filter-style feature rankers: F-score, correlation and mRMR, plus fold averaging."""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .table import FeatureTable

logger = logging.getLogger(__name__)

METHODS = ("FSCORE", "CORR", "MRMR")
#: Score given to features whose within-class scatter is zero but whose class means differ.
FSCORE_SENTINEL = 1e300
#: Greedy mRMR treats criteria closer than this as tied (lowest index wins).
TIE_TOL = 1e-12


@dataclass
class RankingResult:
    """Features ordered best first.

    ``scores`` is aligned to feature index. For a fold-averaged (consensus)
    result it holds each feature's mean 1-based rank position instead, so
    smaller is better there.
    """

    method: str
    order: np.ndarray
    scores: np.ndarray
    fold_id: int | None = None
    consensus: bool = False

    def __post_init__(self):
        self.order = np.asarray(self.order, dtype=int)
        self.scores = np.asarray(self.scores, dtype=float)
        if sorted(self.order.tolist()) != list(range(len(self.scores))):
            raise ValueError("order is not a permutation of the feature indices")

    @property
    def L(self) -> int:
        return len(self.order)

    def top(self, k: int) -> np.ndarray:
        return self.order[:k].copy()


def _order_desc(scores: np.ndarray) -> np.ndarray:
    return np.argsort(-scores, kind="stable")


def fscore_scores(values: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Between-class scatter of class means over the summed per-class sample variances."""
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    if len(classes) < 2 or counts.min() < 2:
        raise ValueError("F-score needs at least 2 classes with at least 2 samples each")
    overall = values.mean(axis=0)
    num = np.zeros(values.shape[1])
    den = np.zeros(values.shape[1])
    for c, n_c in zip(classes, counts):
        v = values[labels == c]
        m = v.mean(axis=0)
        num += (m - overall) ** 2
        den += ((v - m) ** 2).sum(axis=0) / (n_c - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = num / den
    degenerate = den == 0
    if degenerate.any():
        warnings.warn(f"{degenerate.sum()} feature(s) with zero within-class scatter", stacklevel=2)
        f[degenerate] = np.where(num[degenerate] > 0, FSCORE_SENTINEL, 0.0)
    return f


def fscore_rank(table: FeatureTable) -> RankingResult:
    scores = fscore_scores(table.values, table.labels)
    return RankingResult("FSCORE", _order_desc(scores), scores)


def pearson_matrix(values: np.ndarray) -> np.ndarray:
    """Pairwise Pearson coefficients; rows/columns of constant features are 0."""
    values = np.asarray(values, dtype=float)
    centered = values - values.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    const = norms == 0
    if const.any():
        warnings.warn(f"{const.sum()} constant feature(s) get correlation 0", stacklevel=2)
    safe = np.where(const, 1.0, norms)
    rho = (centered.T @ centered) / np.outer(safe, safe)
    rho[const, :] = 0.0
    rho[:, const] = 0.0
    rho = 0.5 * (rho + rho.T)
    return np.clip(rho, -1.0, 1.0)


def correlation_rank(table: FeatureTable, aggregate: str = "mean") -> RankingResult:
    """Rank by how strongly each feature correlates with the remaining ones.

    ``aggregate`` is ``"mean"`` (mean absolute coefficient) or ``"max"``.
    """
    L = table.L
    if L == 1:
        return RankingResult("CORR", [0], [0.0])
    rho = np.abs(pearson_matrix(table.values))
    np.fill_diagonal(rho, np.nan)
    if aggregate == "mean":
        scores = np.nanmean(rho, axis=1)
    elif aggregate == "max":
        scores = np.nanmax(rho, axis=1)
    else:
        raise ValueError(f"unknown aggregate {aggregate!r}")
    return RankingResult("CORR", _order_desc(scores), scores)


def equal_frequency_codes(x: np.ndarray, bins: int) -> np.ndarray:
    """Discretize into at most ``bins`` equal-frequency bins; ties share a bin."""
    x = np.asarray(x, dtype=float)
    q = np.arange(1, bins) / bins
    edges = np.unique(np.quantile(x, q, method="inverted_cdf"))
    return np.searchsorted(edges, x, side="left")


def mutual_information(a: np.ndarray, b: np.ndarray) -> float:
    """Plug-in mutual information (nats) of two non-negative integer code vectors."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    na, nb = int(a.max()) + 1, int(b.max()) + 1
    joint = np.bincount(a * nb + b, minlength=na * nb).reshape(na, nb).astype(float)
    p = joint / joint.sum()
    pa = p.sum(axis=1, keepdims=True)
    pb = p.sum(axis=0, keepdims=True)
    nz = p > 0
    mi = float(np.sum(p[nz] * np.log(p[nz] / (pa @ pb)[nz])))
    return max(mi, 0.0)


def mrmr_rank(table: FeatureTable, bins: int = 10, n_select: int | None = None) -> RankingResult:
    """Greedy max-relevance min-redundancy ordering, difference (MID) form.

    The first pick maximizes I(f; class); each later pick maximizes
    I(f; class) minus the mean of I(f; s) over already selected s. Every
    feature's score is its criterion value at the step it was picked.
    ``n_select`` stops early; remaining features follow by relevance.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    n, L = table.values.shape
    if n < bins:
        raise ValueError(f"need at least {bins} samples for {bins} bins, got {n}")
    codes = [equal_frequency_codes(table.values[:, j], bins) for j in range(L)]
    _, y = np.unique(table.labels, return_inverse=True)
    relevance = np.array([mutual_information(c, y) for c in codes])

    limit = L if n_select is None else min(n_select, L)
    selected: list[int] = []
    remaining = np.ones(L, dtype=bool)
    redundancy = np.zeros(L)
    scores = np.zeros(L)
    criterion = relevance.copy()
    while len(selected) < limit:
        if selected:
            criterion = relevance - redundancy / len(selected)
        cand = np.where(remaining, criterion, -np.inf)
        best = int(np.flatnonzero(cand >= cand.max() - TIE_TOL)[0])
        selected.append(best)
        scores[best] = criterion[best]
        remaining[best] = False
        for j in np.flatnonzero(remaining):
            redundancy[j] += mutual_information(codes[j], codes[best])
    rest = np.flatnonzero(remaining)
    rest = rest[_order_desc(relevance[rest])]
    scores[rest] = relevance[rest]
    return RankingResult("MRMR", np.concatenate([selected, rest]).astype(int), scores)


def rank(table: FeatureTable, method: str, bins: int = 10) -> RankingResult:
    method = method.upper()
    if method == "FSCORE":
        return fscore_rank(table)
    if method == "CORR":
        return correlation_rank(table)
    if method == "MRMR":
        return mrmr_rank(table, bins=bins)
    raise ValueError(f"unknown ranking method {method!r}; expected one of {METHODS}")


def average_ranks(per_fold: Sequence[RankingResult]) -> RankingResult:
    """Consensus order by mean rank position across folds (ties: lower index)."""
    if not per_fold:
        raise ValueError("no rankings to average")
    L = per_fold[0].L
    methods = {r.method for r in per_fold}
    if any(r.L != L for r in per_fold):
        raise ValueError(f"rankings disagree on feature count: {[r.L for r in per_fold]}")
    if len(methods) != 1:
        raise ValueError(f"rankings mix methods {sorted(methods)}")
    positions = np.zeros((len(per_fold), L))
    for i, r in enumerate(per_fold):
        positions[i, r.order] = np.arange(1, L + 1)
    mean_pos = positions.mean(axis=0)
    return RankingResult(methods.pop(), np.argsort(mean_pos, kind="stable"), mean_pos, consensus=True)


def write_ranking(result: RankingResult, feature_names: Sequence[str], path) -> None:
    """Rows ``rank,feature_index,feature_name,score,method``, best first."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "feature_index", "feature_name", "score", "method"])
        for pos, idx in enumerate(result.order, start=1):
            w.writerow([pos, int(idx), feature_names[idx], format(result.scores[idx], ".17g"), result.method])


def read_ranking(path) -> tuple[RankingResult, list[str]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"ranking file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{path}: empty ranking")
    try:
        rows.sort(key=lambda r: int(r["rank"]))
        order = [int(r["feature_index"]) for r in rows]
        scores = np.zeros(len(rows))
        names = [""] * len(rows)
        for r in rows:
            scores[int(r["feature_index"])] = float(r["score"])
            names[int(r["feature_index"])] = r["feature_name"]
        return RankingResult(rows[0]["method"], order, scores, consensus=True), names
    except (KeyError, ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed ranking ({exc})") from None

"""Evaluation protocol: 30/70 split, 5-fold ranking with validation, top-k sweeps, metrics."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import learners
from .errors import DataError
from .ranking import RankingResult, average_ranks, rank
from .splits import stratified_folds, stratified_split

logger = logging.getLogger(__name__)

TRAIN_FRACTION = 0.30
N_FOLDS = 5


@dataclass
class SplitPlan:
    train_idx: np.ndarray
    test_idx: np.ndarray
    folds: list[tuple[np.ndarray, np.ndarray]]  # (rank_idx, validation_idx), indices into the table
    seed: int

    def ids(self, table, which: str) -> set[str]:
        idx = self.train_idx if which == "train" else self.test_idx
        return set(table.sample_ids[idx].tolist())


@dataclass
class EvalReport:
    confusion: np.ndarray
    class_ids: list[int]
    accuracy: float
    per_class_accuracy: np.ndarray
    sensitivity: float | None
    specificity: float | None
    roc_points: np.ndarray
    auc: float | None
    n: int
    wall_time_s: float = 0.0
    k: int | None = None
    method: str = ""
    classifier: str = ""
    extra: dict = field(default_factory=dict)


@dataclass
class ProtocolResult:
    consensus: RankingResult
    fold_rankings: list[RankingResult]
    fold_errors: list[float]
    plan: SplitPlan

    @property
    def mean_error(self) -> float:
        return float(np.mean(self.fold_errors))


def make_split(table, seed: int, train_fraction: float = TRAIN_FRACTION, n_folds: int = N_FOLDS) -> SplitPlan:
    """Stratified train/test cut followed by a stratified fold partition of the train side.

    Only labels are read here.
    """
    labels = np.asarray(table.labels)
    train_idx, test_idx = stratified_split(labels, train_fraction, seed)
    classes, counts = np.unique(labels[train_idx], return_counts=True)
    all_classes = np.unique(labels)
    small = [int(c) for c in all_classes if c not in classes or counts[classes == c][0] < n_folds]
    if small:
        raise DataError(f"classes with fewer than {n_folds} training samples: {small}")
    folds = [(train_idx[a], train_idx[b]) for a, b in stratified_folds(labels[train_idx], n_folds, seed + 1)]
    return SplitPlan(train_idx, test_idx, folds, seed)


def roc_curve(is_positive: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """(FPR, TPR) points from (0, 0) to (1, 1), one per distinct score threshold."""
    is_positive = np.asarray(is_positive, dtype=bool)
    scores = np.asarray(scores, dtype=float)
    order = np.argsort(-scores, kind="stable")
    s, pos = scores[order], is_positive[order]
    ends = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tps = np.cumsum(pos)[ends]
    fps = (ends + 1) - tps
    P, N = pos.sum(), len(pos) - pos.sum()
    tpr = np.r_[0.0, tps / P] if P else np.r_[0.0, np.zeros(len(tps))]
    fpr = np.r_[0.0, fps / N] if N else np.r_[0.0, np.zeros(len(fps))]
    return np.column_stack([fpr, tpr])


def auc_trapezoid(points: np.ndarray) -> float:
    fpr, tpr = points[:, 0], points[:, 1]
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) * 0.5))


def _binary_rates(cm, pos):
    tp = cm[pos, pos]
    fn = cm[pos].sum() - tp
    fp = cm[:, pos].sum() - tp
    tn = cm.sum() - tp - fn - fp
    sen = float(tp / (tp + fn)) if tp + fn else None
    spec = float(tn / (tn + fp)) if tn + fp else None
    return sen, spec


def compute_metrics(labels_true, labels_pred, scores=None, class_ids: Sequence[int] | None = None,
                    positive: int | None = None) -> EvalReport:
    """Confusion-based metrics plus ROC/AUC.

    Binary tasks use ``class_ids[1]`` as the positive class unless
    ``positive`` is given. With more classes and no ``positive``,
    sensitivity/specificity are one-vs-rest macro averages and the ROC is the
    pooled (micro-averaged) one-vs-rest curve. Undefined rates are None.
    """
    y = np.asarray(labels_true)
    p = np.asarray(labels_pred)
    if class_ids is None:
        class_ids = np.unique(np.r_[y, p])
    class_ids = [int(c) for c in class_ids]
    c = len(class_ids)
    yi = np.searchsorted(class_ids, y)
    pi = np.searchsorted(class_ids, p)
    cm = np.bincount(yi * c + pi, minlength=c * c).reshape(c, c)
    total = cm.sum()
    accuracy = float(np.trace(cm) / total) if total else float("nan")
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.diag(cm) / cm.sum(axis=1)

    roc = np.empty((0, 2))
    auc = None
    if positive is not None or c == 2:
        col = class_ids.index(positive) if positive is not None else 1
        sen, spec = _binary_rates(cm, col)
        truth = yi == col
        if scores is not None and 0 < truth.sum() < len(truth):
            roc = roc_curve(truth, np.asarray(scores)[:, col])
            auc = auc_trapezoid(roc)
    else:
        rates = [_binary_rates(cm, k) for k in range(c)]
        sens = [r[0] for r in rates if r[0] is not None]
        specs = [r[1] for r in rates if r[1] is not None]
        sen = float(np.mean(sens)) if sens else None
        spec = float(np.mean(specs)) if specs else None
        if scores is not None and len(np.unique(yi)) > 1:
            onehot = np.zeros((len(yi), c), dtype=bool)
            onehot[np.arange(len(yi)), yi] = True
            roc = roc_curve(onehot.ravel(), np.asarray(scores, dtype=float).ravel())
            auc = auc_trapezoid(roc)
    return EvalReport(cm, class_ids, accuracy, per_class, sen, spec, roc, auc, int(total))


def run_protocol(table, method: str, classifier: str, seed: int, bins: int = 10,
                 params: dict | None = None, k: int | None = None,
                 plan: SplitPlan | None = None) -> ProtocolResult:
    """Rank on each fold's 80% side, validate the classifier on its 20%, average the ranks.

    The classifier is validated on the fold's top-``k`` features (all when
    ``k`` is None). Test-side rows are never touched.
    """
    plan = plan or make_split(table, seed)
    rankings, errors = [], []
    for fold_id, (rank_idx, val_idx) in enumerate(plan.folds):
        rank_set = table.take(rank_idx)
        result = rank(rank_set, method, bins=bins)
        result.fold_id = fold_id
        cols = np.sort(result.order if k is None else result.order[:k])
        model = learners.train(classifier, rank_set.select_columns(cols), params, seed)
        val = table.take(val_idx).select_columns(cols)
        labels, _ = learners.predict(model, val.values)
        errors.append(float(np.mean(labels != val.labels)))
        rankings.append(result)
        logger.info("fold %d: %s validation error %.4f", fold_id, classifier, errors[-1])
    return ProtocolResult(average_ranks(rankings), rankings, errors, plan)


def evaluate_subset(table, cols, classifier: str, seed: int, params: dict | None = None,
                    plan: SplitPlan | None = None, positive: int | None = None) -> EvalReport:
    """Train on the train side restricted to ``cols``; evaluate on the test side.

    ``wall_time_s`` covers training plus prediction only.
    """
    plan = plan or make_split(table, seed)
    cols = np.sort(np.asarray(cols, dtype=int))
    train = table.take(plan.train_idx).select_columns(cols)
    test = table.take(plan.test_idx).select_columns(cols)
    t0 = time.perf_counter()
    model = learners.train(classifier, train, params, seed)
    labels, scores = learners.predict(model, test.values)
    elapsed = time.perf_counter() - t0
    report = compute_metrics(test.labels, labels, scores, model.class_ids, positive)
    report.wall_time_s = elapsed
    report.k = len(cols)
    report.classifier = classifier.upper()
    return report


def sweep_topk(table, order, classifier: str, ks: Sequence[int], seed: int,
               params: dict | None = None, method: str = "", plan: SplitPlan | None = None,
               positive: int | None = None) -> list[EvalReport]:
    """One test-side evaluation per subset size ``k`` of the ranked ``order``."""
    order = np.asarray(order, dtype=int)
    bad = [k for k in ks if not 1 <= k <= len(order)]
    if bad:
        raise ValueError(f"subset sizes outside [1, {len(order)}]: {bad}")
    plan = plan or make_split(table, seed)
    reports = []
    for k in ks:
        rep = evaluate_subset(table, order[:k], classifier, seed, params, plan, positive)
        rep.method = method
        reports.append(rep)
        logger.info("k=%d accuracy=%.4f time=%.3fs", k, rep.accuracy, rep.wall_time_s)
    return reports


SUMMARY_HEADER = ["k", "method", "classifier", "accuracy", "sen", "spec", "auc", "wall_time_s"]


def _fmt(v):
    return "" if v is None else format(v, ".17g")


def write_summary(reports: Sequence[EvalReport], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in reports:
            w.writerow([r.k, r.method, r.classifier, _fmt(r.accuracy), _fmt(r.sensitivity),
                        _fmt(r.specificity), _fmt(r.auc), _fmt(r.wall_time_s)])


def read_summary(path) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"summary not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))

    def num(v):
        return float(v) if v not in ("", None) else None

    return [{"k": int(r["k"]), "method": r["method"], "classifier": r["classifier"],
             **{key: num(r[key]) for key in SUMMARY_HEADER[3:]}} for r in rows]


def write_roc(report: EvalReport, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["fpr,tpr"] + [f"{format(f, '.17g')},{format(t, '.17g')}" for f, t in report.roc_points]
    path.write_text("\n".join(lines) + "\n")

"""Feature table container and its comma-separated interchange format."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError


@dataclass
class FeatureTable:
    """``n`` samples by ``L`` features, with per-row labels and identifiers."""

    values: np.ndarray
    feature_names: list[str]
    labels: np.ndarray
    sample_ids: np.ndarray
    image_ids: np.ndarray | None = None
    dataset_tag: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {self.values.shape}")
        n, L = self.values.shape
        self.feature_names = list(self.feature_names)
        self.labels = np.asarray(self.labels, dtype=int)
        self.sample_ids = np.asarray(self.sample_ids, dtype=str)
        if self.image_ids is None:
            self.image_ids = np.array([""] * n, dtype=str)
        self.image_ids = np.asarray(self.image_ids, dtype=str)
        if len(self.feature_names) != L:
            raise ValueError(f"{len(self.feature_names)} feature names for {L} columns")
        for name, arr in (("labels", self.labels), ("sample_ids", self.sample_ids),
                          ("image_ids", self.image_ids)):
            if arr.shape != (n,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature table contains NaN or infinite values")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def L(self) -> int:
        return self.values.shape[1]

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def take(self, rows) -> "FeatureTable":
        rows = np.asarray(rows, dtype=int)
        return FeatureTable(self.values[rows], self.feature_names, self.labels[rows],
                            self.sample_ids[rows], self.image_ids[rows], self.dataset_tag,
                            dict(self.meta))

    def select_columns(self, cols: Sequence[int]) -> "FeatureTable":
        cols = [int(c) for c in cols]
        return FeatureTable(self.values[:, cols], [self.feature_names[c] for c in cols],
                            self.labels, self.sample_ids, self.image_ids, self.dataset_tag,
                            dict(self.meta))

    def restrict_classes(self, classes: Sequence[int]) -> "FeatureTable":
        return self.take(np.flatnonzero(np.isin(self.labels, list(classes))))


def class_histogram(labels) -> dict[int, int]:
    counts = Counter(int(v) for v in np.asarray(labels).ravel())
    return dict(sorted(counts.items()))


def format_histogram(labels, names: Sequence[str] | None = None, width: int = 40) -> str:
    hist = class_histogram(labels)
    if not hist:
        return "(no samples)"
    top = max(hist.values())
    lines = []
    for cid, count in hist.items():
        name = names[cid] if names is not None and 0 <= cid < len(names) else str(cid)
        bar = "#" * max(1, round(width * count / top))
        lines.append(f"{cid:>3} {name:<18} {count:>8}  {bar}")
    return "\n".join(lines)


def write_table(table: FeatureTable, path) -> None:
    """Write ``sample_id,image_id,<features...>,label`` with 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "image_id", *table.feature_names, "label"])
        for sid, iid, row, lab in zip(table.sample_ids, table.image_ids, table.values, table.labels):
            w.writerow([sid, iid, *(format(v, ".17g") for v in row.tolist()), int(lab)])


def read_table(path, dataset_tag: str | None = None) -> FeatureTable:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"feature table not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if header[:2] != ["sample_id", "image_id"] or header[-1] != "label":
            raise DataError(f"{path}: unexpected header {header[:2]}...{header[-1:]}")
        rows = [r for r in reader if r]
    if not rows:
        raise DataError(f"{path}: no samples")
    width = len(header)
    bad = [i + 2 for i, r in enumerate(rows) if len(r) != width]
    if bad:
        raise DataError(f"{path}: wrong column count on line(s) {bad[:5]}")
    try:
        values = np.array([r[2:-1] for r in rows], dtype=float)
        labels = np.array([int(r[-1]) for r in rows])
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    try:
        return FeatureTable(values, header[2:-1], labels,
                            [r[0] for r in rows], [r[1] for r in rows],
                            dataset_tag if dataset_tag is not None else path.stem)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None

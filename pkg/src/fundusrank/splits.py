"""Stratified train/test cuts and k-fold partitions keyed to a seed."""

from __future__ import annotations

import numpy as np


def _class_permutations(labels, rng):
    labels = np.asarray(labels)
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        yield cls, members[rng.permutation(len(members))]


def stratified_split(labels, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per class, a rounded ``train_fraction`` of rows goes to the train side."""
    rng = np.random.default_rng(seed)
    train, test = [], []
    for _, members in _class_permutations(labels, rng):
        cut = int(round(train_fraction * len(members)))
        train.append(members[:cut])
        test.append(members[cut:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_folds(labels, n_folds: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """``n_folds`` (fit, validation) index pairs into ``labels``.

    Each class is shuffled and dealt round-robin, continuing the deal across
    classes so fold sizes differ by at most one.
    """
    rng = np.random.default_rng(seed)
    assign = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for _, members in _class_permutations(labels, rng):
        assign[members] = (np.arange(len(members)) + offset) % n_folds
        offset += len(members)
    everything = np.arange(len(labels))
    return [(everything[assign != f], everything[assign == f]) for f in range(n_folds)]

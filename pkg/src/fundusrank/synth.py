"""Labeled Gaussian-blob feature tables with a known informative subset."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .table import FeatureTable, write_table


def generate_table(n: int, n_informative: int, n_noise: int, n_classes: int = 2,
                   effect: float = 1.0, seed: int = 0,
                   class_probs=None) -> tuple[FeatureTable, np.ndarray]:
    """Unit-variance features; only the informative ones shift with the class.

    Binary tasks shift every informative feature by ``effect`` standard
    deviations for class 1. With more classes each (class, feature) mean is
    ``effect`` times a standard normal draw. Columns are shuffled; the
    returned array holds the informative column indices (sorted).
    """
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    rng = np.random.default_rng(seed)
    L = n_informative + n_noise
    labels = rng.choice(n_classes, size=n, p=class_probs)
    if n_classes == 2:
        means = np.zeros((2, n_informative))
        means[1] = effect
    else:
        means = effect * rng.standard_normal((n_classes, n_informative))
    values = rng.standard_normal((n, L))
    values[:, :n_informative] += means[labels]
    names = [f"informative_{i:02d}" for i in range(n_informative)] + [f"noise_{i:02d}" for i in range(n_noise)]
    perm = rng.permutation(L)
    values = values[:, perm]
    names = [names[p] for p in perm]
    informative = np.sort(np.flatnonzero(perm < n_informative))
    table = FeatureTable(values, names, labels, [f"syn{i:06d}" for i in range(n)],
                         ["synthetic"] * n, "SYNTHETIC",
                         {"informative": informative.tolist()})
    return table, informative


def write_synthetic(path, n: int, n_informative: int, n_noise: int, n_classes: int = 2,
                    effect: float = 1.0, seed: int = 0) -> tuple[FeatureTable, np.ndarray]:
    """Write the table plus a ``.json`` sidecar naming the informative columns."""
    table, informative = generate_table(n, n_informative, n_noise, n_classes, effect, seed)
    path = Path(path)
    write_table(table, path)
    sidecar = {
        "n": n, "n_informative": n_informative, "n_noise": n_noise, "n_classes": n_classes,
        "effect": effect, "seed": seed, "informative": informative.tolist(),
        "informative_names": [table.feature_names[i] for i in informative],
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return table, informative

"""Partition agreement scores used to evaluate recovered clusterings."""

from __future__ import annotations

import numpy as np


def _comb2(x):
    return x * (x - 1) / 2.0


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected agreement between two partitions of the same items.

    1 for identical partitions (up to label names), about 0 for independent
    ones. Degenerate pairs where both partitions are trivial score 1.
    """
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if a.shape != b.shape or a.size == 0:
        raise ValueError("label vectors must be non-empty and equal length")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    ka = ai.max() + 1
    kb = bi.max() + 1
    contingency = np.zeros((ka, kb), dtype=np.int64)
    np.add.at(contingency, (ai, bi), 1)
    sum_comb = _comb2(contingency).sum()
    sum_a = _comb2(contingency.sum(axis=1)).sum()
    sum_b = _comb2(contingency.sum(axis=0)).sum()
    total = _comb2(a.size)
    expected = sum_a * sum_b / total if total > 0 else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_comb - expected) / (max_index - expected))

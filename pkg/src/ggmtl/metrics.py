"""Fuzzy veracity measures between weighted graphs, and regression RMSE.

Agreement between a ground-truth adjacency ``A1`` and a predicted one ``A2``
(entries in [0, 1]) is measured with Lukasiewicz connectives:

    recall    = sum T(a1, a2) / sum a1
    precision = sum T(a1, a2) / sum a2
    accuracy  = 1 - sum XOR(a1, a2) / n^2

summing over all ordered pairs. On crisp matrices these reduce to the usual
edge-counting measures.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class VeracityReport:
    accuracy: float
    recall: float
    precision: float
    f1: float

    def to_dict(self):
        return asdict(self)


def _unit(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any((a < 0) | (a > 1)) or np.any((b < 0) | (b > 1)):
        raise ValueError("truth values must lie in [0, 1]")
    return a, b


def tnorm(a, b):
    a, b = _unit(a, b)
    return np.maximum(a + b - 1.0, 0.0)


def tconorm(a, b, strict=False):
    """Lukasiewicz T-conorm ``min(a + b, 1)``; ``strict`` gives ``min(a, b)``."""
    a, b = _unit(a, b)
    if strict:
        return np.minimum(a, b)
    return np.minimum(a + b, 1.0)


def fuzzy_xor(a, b, strict=False):
    t = tnorm(a, b)
    return tnorm(tconorm(a, b, strict=strict), 1.0 - t)


def normalize_adjacency(raw) -> np.ndarray:
    """Zero the diagonal and negatives, scale by the largest entry, symmetrize."""
    a = np.array(raw, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("adjacency must be square")
    np.fill_diagonal(a, 0.0)
    a[a < 0] = 0.0
    top = a.max() if a.size else 0.0
    if top > 0:
        a /= top
    a = np.maximum(a, a.T)
    return np.clip(a, 0.0, 1.0)


def _ratio(num, den):
    if den == 0:
        return 1.0 if num == 0 else 0.0
    return float(num / den)


def veracity(truth, predicted, strict=False) -> VeracityReport:
    a1 = np.asarray(truth, dtype=float)
    a2 = np.asarray(predicted, dtype=float)
    if a1.shape != a2.shape or a1.ndim != 2 or a1.shape[0] != a1.shape[1]:
        raise ValueError(f"shape mismatch: {a1.shape} vs {a2.shape}")
    n = a1.shape[0]
    overlap = float(np.sum(tnorm(a1, a2)))
    recall = _ratio(overlap, float(np.sum(a1)))
    precision = _ratio(overlap, float(np.sum(a2)))
    accuracy = 1.0 - float(np.sum(fuzzy_xor(a1, a2, strict=strict))) / n**2
    f1 = 0.0 if recall + precision == 0 else 2 * precision * recall / (precision + recall)
    return VeracityReport(accuracy, recall, precision, f1)


def rmse(models, test_data) -> float:
    """Per-task root mean squared error, averaged over tasks."""
    per_task = []
    for w, t in zip(models, test_data):
        if t.n_samples == 0:
            raise ValueError("empty test task")
        per_task.append(np.sqrt(np.mean((t.X @ w - t.y) ** 2)))
    return float(np.mean(per_task))

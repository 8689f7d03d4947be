"""Partition agreement and estimation-error metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DivisionByZero, LengthMismatch, ShapeMismatch, TooFewSubjects


@dataclass(frozen=True)
class PartitionPair:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a, b = np.asarray(self.a), np.asarray(self.b)
        if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
            raise LengthMismatch(f"label vectors have shapes {a.shape} and {b.shape}")
        if a.shape[0] < 1:
            raise LengthMismatch("label vectors are empty")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


def _pair(a, b=None) -> PartitionPair:
    if b is None:
        if not isinstance(a, PartitionPair):
            raise TypeError("expected a PartitionPair or two label vectors")
        return a
    return PartitionPair(a, b)


def contingency(a, b) -> np.ndarray:
    pair = _pair(a, b)
    _, ia = np.unique(pair.a, return_inverse=True)
    _, ib = np.unique(pair.b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def _best_match(estimated, truth):
    table = contingency(estimated, truth)
    rows, cols = linear_sum_assignment(-table)
    return table, rows, cols


def accuracy(estimated, truth) -> float:
    """Fraction of subjects whose label agrees with the truth under the best relabelling."""
    table, rows, cols = _best_match(estimated, truth)
    return float(table[rows, cols].sum() / table.sum())


def correctly_identified(estimated, truth) -> np.ndarray:
    """Boolean per subject: estimated label maps to its true label."""
    pair = PartitionPair(estimated, truth)
    ua, ia = np.unique(pair.a, return_inverse=True)
    ub, ib = np.unique(pair.b, return_inverse=True)
    table, rows, cols = _best_match(pair.a, pair.b)
    mapping = np.full(len(ua), -1)
    mapping[rows] = cols
    return mapping[ia] == ib


def total_accuracy(estimated: Sequence, truth: Sequence) -> float:
    """Fraction of subjects identified correctly on every covariate."""
    if len(estimated) != len(truth) or not estimated:
        raise LengthMismatch("need one estimated and one true label vector per covariate")
    ok = np.ones(len(np.asarray(truth[0])), dtype=bool)
    for est, tru in zip(estimated, truth):
        ok &= correctly_identified(est, tru)
    return float(ok.mean())


def joint_labels(labels: Sequence) -> np.ndarray:
    """Cross-covariate partition: subjects together iff together on every covariate."""
    stacked = np.column_stack([np.asarray(l) for l in labels])
    _, inv = np.unique(stacked, axis=0, return_inverse=True)
    return inv.reshape(-1)


def rand_index(a, b=None) -> float:
    """Share of subject pairs on which the two partitions agree (together/apart)."""
    pair = _pair(a, b)
    n = pair.a.shape[0]
    if n < 2:
        raise TooFewSubjects("the Rand index needs at least two subjects")
    table = contingency(pair.a, pair.b).astype(float)
    total = n * (n - 1) / 2.0
    both = (table * (table - 1) / 2.0).sum()
    same_a = (table.sum(axis=1) * (table.sum(axis=1) - 1) / 2.0).sum()
    same_b = (table.sum(axis=0) * (table.sum(axis=0) - 1) / 2.0).sum()
    apart_both = total - same_a - same_b + both
    return float((both + apart_both) / total)


def entropy(labels) -> float:
    _, counts = np.unique(np.asarray(labels), return_counts=True)
    frac = counts / counts.sum()
    return float(-(frac * np.log(frac)).sum())


def mutual_information(a, b=None) -> float:
    pair = _pair(a, b)
    table = contingency(pair.a, pair.b).astype(float)
    n = table.sum()
    rows = table.sum(axis=1, keepdims=True)
    cols = table.sum(axis=0, keepdims=True)
    nz = table > 0
    return float((table[nz] / n * np.log(n * table[nz] / (rows @ cols)[nz])).sum())


def nmi(a, b=None) -> float:
    """2 I(A,B) / (H(A) + H(B)), natural log.

    Both partitions trivial (one cluster each) gives 1; exactly one trivial
    gives 0.
    """
    pair = _pair(a, b)
    ha, hb = entropy(pair.a), entropy(pair.b)
    if ha == 0.0 and hb == 0.0:
        return 1.0
    if ha == 0.0 or hb == 0.0:
        return 0.0
    value = 2.0 * mutual_information(pair) / (ha + hb)
    return float(min(max(value, 0.0), 1.0))


def mse(fitted: Sequence, observed: Sequence) -> float:
    """Squared error averaged within subject, then across subjects."""
    if len(fitted) != len(observed) or not observed:
        raise ShapeMismatch("fitted and observed need the same (non-zero) number of subjects")
    per_subject = []
    for f, y in zip(fitted, observed):
        f, y = np.asarray(f, dtype=float), np.asarray(y, dtype=float)
        if f.shape != y.shape or y.size == 0:
            raise ShapeMismatch(f"subject arrays differ: {f.shape} vs {y.shape}")
        per_subject.append(float(np.mean((f - y) ** 2)))
    return float(np.mean(per_subject))


def mse_ratio(oracle_mse: float, method_mse: float) -> float:
    if method_mse == 0 or not math.isfinite(method_mse):
        raise DivisionByZero("method MSE must be positive and finite")
    return float(oracle_mse / method_mse)

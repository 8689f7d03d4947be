"""k-means on coefficient vectors: k-means++ seeding, Lloyd iterations, restarts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidK


@dataclass
class KMeansResult:
    """Best clustering found.

    ``labels`` index rows of ``centers`` (0-based). ``history`` holds the
    objective after every Lloyd step of the winning restart.
    """

    labels: np.ndarray
    centers: np.ndarray
    objective: float
    restarts_used: int
    history: list = field(default_factory=list)


def within_ss(points: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> float:
    diff = points - centers[labels]
    return float(np.einsum("ij,ij->", diff, diff))


def _sq_dists(points, centers):
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _plus_plus(points, k, rng):
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(points, points[chosen]).min(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # All remaining points coincide with a chosen center.
            free = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(free))
        chosen.append(idx)
        d2 = np.minimum(d2, _sq_dists(points, points[[idx]])[:, 0])
    return points[chosen].copy()


def _means(points, labels, k):
    centers = np.zeros((k, points.shape[1]))
    counts = np.bincount(labels, minlength=k)
    np.add.at(centers, labels, points)
    nz = counts > 0
    centers[nz] /= counts[nz, None]
    return centers, counts


def _repair_empty(points, labels, centers, counts):
    """Give each empty cluster the point farthest from its current center."""
    for c in np.flatnonzero(counts == 0):
        d2 = np.einsum("ij,ij->i", points - centers[labels], points - centers[labels])
        # Only steal from clusters that keep at least one point.
        d2[counts[labels] <= 1] = -1.0
        far = int(np.argmax(d2))
        counts[labels[far]] -= 1
        labels[far] = c
        counts[c] = 1
        centers, counts = _means(points, labels, centers.shape[0])
    return labels, centers, counts


def _lloyd(points, centers, max_iter):
    k = centers.shape[0]
    labels = np.argmin(_sq_dists(points, centers), axis=1)
    history = []
    for _ in range(max_iter):
        centers, counts = _means(points, labels, k)
        if np.any(counts == 0):
            labels, centers, counts = _repair_empty(points, labels, centers, counts)
        history.append(within_ss(points, labels, centers))
        # argmin breaks ties toward the lowest center index.
        new = np.argmin(_sq_dists(points, centers), axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
    centers, counts = _means(points, labels, k)
    if np.any(counts == 0):
        labels, centers, counts = _repair_empty(points, labels, centers, counts)
    return labels, centers, history


def _hartigan(points, labels, k, history, max_iter):
    """Single-point transfers that lower the objective, including the centre shift.

    Moving x from cluster a to b changes the objective by
    n_b/(n_b+1) |x - mu_b|^2 - n_a/(n_a-1) |x - mu_a|^2.
    """
    labels = labels.copy()
    centers, counts = _means(points, labels, k)
    counts = counts.astype(float)
    for _ in range(max_iter):
        moved = False
        for i in range(points.shape[0]):
            a = labels[i]
            if counts[a] <= 1:
                continue
            d2 = _sq_dists(points[i:i + 1], centers)[0]
            gain = counts[a] / (counts[a] - 1.0) * d2[a]
            cost = counts / (counts + 1.0) * d2
            cost[a] = np.inf
            b = int(np.argmin(cost))
            if cost[b] < gain * (1.0 - 1e-12) - 1e-15:
                x = points[i]
                centers[a] = (centers[a] * counts[a] - x) / (counts[a] - 1.0)
                centers[b] = (centers[b] * counts[b] + x) / (counts[b] + 1.0)
                counts[a] -= 1.0
                counts[b] += 1.0
                labels[i] = b
                moved = True
        if not moved:
            break
        centers, _ = _means(points, labels, k)
        history.append(within_ss(points, labels, centers))
    centers, _ = _means(points, labels, k)
    return labels, centers


# Below this many candidate partitions the optimum is found by enumeration.
EXACT_LIMIT = 2000


def _stirling2(n, k):
    row = [1] + [0] * k
    for i in range(1, n + 1):
        new = [0] * (k + 1)
        for j in range(1, min(i, k) + 1):
            new[j] = j * row[j] + row[j - 1]
        row = new
    return row[k]


def _partitions(n, k):
    """Restricted-growth strings of length n using exactly k labels."""
    labels = [0] * n

    def rec(i, used):
        if n - i < k - used:
            return
        if i == n:
            yield np.array(labels)
            return
        for lab in range(min(used + 1, k)):
            labels[i] = lab
            yield from rec(i + 1, max(used, lab + 1))

    yield from rec(1, 1)


def _exact(points, k):
    best, best_obj = None, np.inf
    for labels in _partitions(points.shape[0], k):
        centers, _ = _means(points, labels, k)
        obj = within_ss(points, labels, centers)
        if obj < best_obj:
            best, best_obj = labels, obj
    centers, _ = _means(points, best, k)
    return best, centers, best_obj


def kmeans(points, k: int, seed: int = 0, restarts: int = 10, max_iter: int = 100) -> KMeansResult:
    """Minimise the within-cluster sum of squares.

    Tiny problems (at most ``EXACT_LIMIT`` candidate partitions) are solved by
    enumeration. Otherwise each of ``restarts`` seeded k-means++ starts runs
    Lloyd iterations followed by single-point transfers, and the lowest
    objective wins.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if not 1 <= k <= n:
        raise InvalidK(f"k={k} must satisfy 1 <= k <= n={n}")
    if restarts < 1 or max_iter < 1:
        raise ValueError("restarts and max_iter must be positive")
    if k == 1:
        centers = points.mean(axis=0, keepdims=True)
        labels = np.zeros(n, dtype=int)
        obj = within_ss(points, labels, centers)
        return KMeansResult(labels, centers, obj, 1, [obj])

    if _stirling2(n, k) <= EXACT_LIMIT:
        labels, centers, obj = _exact(points, k)
        return KMeansResult(labels, centers, obj, 0, [obj])

    best = None
    streams = np.random.SeedSequence(seed).spawn(restarts)
    for ss in streams:
        rng = np.random.default_rng(ss)
        labels, centers, history = _lloyd(points, _plus_plus(points, k, rng), max_iter)
        labels, centers = _hartigan(points, labels, k, history, max_iter)
        obj = within_ss(points, labels, centers)
        if best is None or obj < best.objective:
            best = KMeansResult(labels, centers, obj, restarts, history)
    return best

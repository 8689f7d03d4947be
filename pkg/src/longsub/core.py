"""Longitudinal data containers and the subgroup-partition model."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyDataset, EmptyGroup, InsufficientVisits, ShapeMismatch


def _frozen(a, ndim, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    if ndim == 2 and arr.ndim == 1:
        arr = arr.reshape(-1, 1) if arr.size else arr.reshape(0, 0)
    if arr.ndim != ndim:
        raise ShapeMismatch(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SubjectRecord:
    """Observations of one subject.

    ``y`` has length n_i, ``x`` is n_i x p, ``z`` is n_i x q and ``s`` holds
    the r baseline covariates, constant over visits.
    """

    id: str
    y: np.ndarray
    x: np.ndarray
    z: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        y = _frozen(self.y, 1)
        n_i = y.shape[0]
        x = np.array(self.x, dtype=float)
        z = np.array(self.z, dtype=float)
        # A 1-d x or z is a single column.
        if x.ndim == 1:
            x = x[:, None]
        if z.ndim == 1:
            z = z[:, None] if z.size else np.zeros((n_i, 0))
        for name, arr in (("x", x), ("z", z)):
            if arr.shape[0] != n_i:
                raise ShapeMismatch(
                    f"subject {self.id!r}: {name} has {arr.shape[0]} rows, y has {n_i}"
                )
        s = _frozen(self.s, 1)
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x)) and np.all(np.isfinite(z))
                and np.all(np.isfinite(s))):
            raise ValueError(f"subject {self.id!r}: missing or non-finite values")
        x.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "s", s)

    @property
    def n_obs(self) -> int:
        return self.y.shape[0]


@dataclass(frozen=True)
class LongitudinalDataset:
    subjects: tuple
    p: int
    q: int
    r: int

    def __post_init__(self):
        subjects = tuple(self.subjects)
        object.__setattr__(self, "subjects", subjects)
        seen = set()
        for sub in subjects:
            if sub.x.shape[1] != self.p or sub.z.shape[1] != self.q or sub.s.shape[0] != self.r:
                raise ShapeMismatch(
                    f"subject {sub.id!r} has (p, q, r) = "
                    f"({sub.x.shape[1]}, {sub.z.shape[1]}, {sub.s.shape[0]}), "
                    f"dataset declares ({self.p}, {self.q}, {self.r})"
                )
            if sub.n_obs < 1:
                raise ShapeMismatch(f"subject {sub.id!r} has no observations")
            if sub.id in seen:
                raise ValueError(f"duplicate subject id {sub.id!r}")
            seen.add(sub.id)

    @classmethod
    def from_arrays(cls, ids, y, x, z=None, s=None) -> "LongitudinalDataset":
        """Build a dataset from per-subject lists of arrays."""
        n = len(ids)
        if n == 0:
            raise EmptyDataset("no subjects")
        if z is None:
            z = [np.zeros((len(yi), 0)) for yi in y]
        if s is None:
            s = [np.zeros(0) for _ in y]
        subjects = [SubjectRecord(ids[i], y[i], np.asarray(x[i]).reshape(len(y[i]), -1),
                                  np.asarray(z[i]).reshape(len(y[i]), -1), s[i])
                    for i in range(n)]
        first = subjects[0]
        return cls(tuple(subjects), first.x.shape[1], first.z.shape[1], first.s.shape[0])

    @property
    def n(self) -> int:
        return len(self.subjects)

    @property
    def n_obs(self) -> int:
        return int(sum(s.n_obs for s in self.subjects))

    @property
    def visits(self) -> np.ndarray:
        return np.array([s.n_obs for s in self.subjects], dtype=int)

    @property
    def ids(self) -> list:
        return [s.id for s in self.subjects]

    def domains(self) -> list:
        """Observed range [a_j, b_j] of every smooth covariate."""
        stacked = np.vstack([s.x for s in self.subjects])
        return [(float(stacked[:, j].min()), float(stacked[:, j].max())) for j in range(self.p)]

    def covariate(self, j: int) -> np.ndarray:
        return np.concatenate([s.x[:, j] for s in self.subjects])

    def subset(self, indices: Sequence[int]) -> "LongitudinalDataset":
        return LongitudinalDataset(tuple(self.subjects[i] for i in indices), self.p, self.q, self.r)


@dataclass(frozen=True)
class ValidationReport:
    visits: tuple
    usable: tuple
    k_basis: int
    min_visits: int

    @property
    def usable_indices(self) -> list:
        return [i for i, ok in enumerate(self.usable) if ok]

    @property
    def excluded_indices(self) -> list:
        return [i for i, ok in enumerate(self.usable) if not ok]

    @property
    def all_usable(self) -> bool:
        return all(self.usable)


def validate(dataset: LongitudinalDataset, k_basis: int, min_visits: Optional[int] = None,
             policy: str = "exclude") -> ValidationReport:
    """Check every subject has enough visits for a per-subject spline solve.

    A subject is usable when ``n_i >= max(k_basis, min_visits)``. With
    ``policy="error"`` any unusable subject raises :class:`InsufficientVisits`;
    with ``policy="exclude"`` they are only flagged in the report.
    """
    if dataset.n == 0:
        raise EmptyDataset("dataset has no subjects")
    need = max(int(k_basis), int(min_visits or 0))
    visits = tuple(int(v) for v in dataset.visits)
    usable = tuple(v >= need for v in visits)
    if policy not in ("exclude", "error"):
        raise ValueError(f"unknown exclusion policy {policy!r}")
    if policy == "error" and not all(usable):
        bad = [dataset.subjects[i].id for i, ok in enumerate(usable) if not ok]
        raise InsufficientVisits(f"subjects with fewer than {need} visits: {bad}")
    if not any(usable):
        raise InsufficientVisits(f"no subject has at least {need} visits")
    return ValidationReport(visits, usable, int(k_basis), need)


def canonical_labels(labels) -> np.ndarray:
    """Relabel by order of first appearance, starting at 1."""
    labels = np.asarray(labels)
    out = np.empty(labels.shape[0], dtype=int)
    mapping = {}
    for i, lab in enumerate(labels.tolist()):
        if lab not in mapping:
            mapping[lab] = len(mapping) + 1
        out[i] = mapping[lab]
    return out


def label_order(labels) -> list:
    """Original labels listed in canonical order (first appearance)."""
    seen = []
    for lab in np.asarray(labels).tolist():
        if lab not in seen:
            seen.append(lab)
    return seen


@dataclass(frozen=True)
class SubgroupPartition:
    """Per-covariate membership vectors with labels in ``1..m[j]``."""

    labels: tuple
    m: tuple = field(default=None)

    def __post_init__(self):
        labels = tuple(np.array(l, dtype=int, copy=True) for l in self.labels)
        for lab in labels:
            lab.setflags(write=False)
        if labels and len({lab.shape[0] for lab in labels}) != 1:
            raise ShapeMismatch("label vectors differ in length")
        m = self.m
        if m is None:
            m = tuple(int(np.unique(lab).size) for lab in labels)
        m = tuple(int(v) for v in m)
        if len(m) != len(labels):
            raise ShapeMismatch("m must have one entry per covariate")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "m", m)

    @property
    def p(self) -> int:
        return len(self.labels)

    @property
    def n(self) -> int:
        return self.labels[0].shape[0] if self.labels else 0

    def is_canonical(self) -> bool:
        return all(np.array_equal(lab, canonical_labels(lab)) and lab.max() == mj
                   for lab, mj in zip(self.labels, self.m))

    def same_sets(self, other: "SubgroupPartition") -> bool:
        """True when both partitions induce identical set systems."""
        if self.p != other.p:
            return False
        return all(np.array_equal(canonical_labels(a), canonical_labels(b))
                   for a, b in zip(self.labels, other.labels))


def canonicalize(partition: SubgroupPartition) -> SubgroupPartition:
    new = []
    for j, (lab, mj) in enumerate(zip(partition.labels, partition.m)):
        can = canonical_labels(lab)
        used = int(can.max()) if can.size else 0
        if used != mj:
            raise EmptyGroup(f"covariate {j + 1}: {mj} groups declared, {used} non-empty")
        new.append(can)
    return SubgroupPartition(tuple(new), partition.m)


@dataclass(frozen=True)
class BicRecord:
    covariate: int
    candidate_m: int
    loglik: float
    k_params: int
    n_obs: int
    bic: float
    feasible: bool = True


@dataclass
class FittedModel:
    """Result of a subgroup fit.

    ``beta[0]`` is the global intercept and ``beta[1:]`` the baseline
    coefficients. ``gamma[j]`` is an (m_j, K_j) array of spline coefficients
    whose row k-1 belongs to group k of covariate j. ``bic_trace`` maps a
    covariate index to its list of :class:`BicRecord`.
    """

    beta: np.ndarray
    gamma: list
    partition: SubgroupPartition
    subject_ids: list
    bic_trace: dict = field(default_factory=dict)
    iterations: int = 0
    converged: bool = True
    excluded: list = field(default_factory=list)
    centers: Optional[list] = None
    fitted: Optional[list] = None

    @property
    def intercept(self) -> float:
        return float(self.beta[0])

    @property
    def m(self) -> tuple:
        return self.partition.m

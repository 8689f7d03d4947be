import numpy as np
import pytest
from hypothesis import given, strategies as st

from longsub.core import (LongitudinalDataset, SubgroupPartition, SubjectRecord, canonical_labels,
                          canonicalize, validate)
from longsub.errors import EmptyDataset, EmptyGroup, InsufficientVisits, ShapeMismatch


def _dataset(visits):
    subs = [SubjectRecord(str(i), np.arange(v, dtype=float), np.linspace(0, 1, v), np.zeros((v, 0)),
                          np.zeros(0)) for i, v in enumerate(visits)]
    return LongitudinalDataset(tuple(subs), 1, 0, 0)


def test_all_subjects_usable():
    report = validate(_dataset([15, 15, 15]), k_basis=9)
    assert report.all_usable and report.usable_indices == [0, 1, 2]


def test_short_subject_flagged():
    report = validate(_dataset([15, 5, 15]), k_basis=9)
    assert report.excluded_indices == [1]
    with pytest.raises(InsufficientVisits):
        validate(_dataset([15, 5, 15]), k_basis=9, policy="error")


def test_min_visits_rule_excludes_eight_visit_subject():
    report = validate(_dataset([9, 8, 12]), k_basis=6, min_visits=9)
    assert report.excluded_indices == [1]


def test_validate_does_not_mutate():
    ds = _dataset([10, 3])
    before = [s.y.copy() for s in ds.subjects]
    validate(ds, k_basis=6)
    assert all(np.array_equal(a, s.y) for a, s in zip(before, ds.subjects))
    assert not ds.subjects[0].y.flags.writeable


def test_empty_dataset():
    with pytest.raises(EmptyDataset):
        validate(LongitudinalDataset((), 1, 0, 0), k_basis=6)


def test_rejects_non_finite_and_mismatched_rows():
    with pytest.raises(ValueError):
        SubjectRecord("a", [1.0, np.nan], [0.1, 0.2], np.zeros((2, 0)), np.zeros(0))
    with pytest.raises(ShapeMismatch):
        SubjectRecord("a", [1.0, 2.0], [0.1, 0.2, 0.3], np.zeros((2, 0)), np.zeros(0))


def test_inconsistent_dimensions_rejected():
    a = SubjectRecord("a", [1.0], [[0.1]], np.zeros((1, 0)), np.zeros(0))
    b = SubjectRecord("b", [1.0], [[0.1, 0.2]], np.zeros((1, 0)), np.zeros(0))
    with pytest.raises(ShapeMismatch):
        LongitudinalDataset((a, b), 1, 0, 0)


@pytest.mark.parametrize("raw, expected", [((2, 2, 1), (1, 1, 2)), ((1, 1, 1), (1, 1, 1)),
                                           ((3, 1, 3, 2), (1, 2, 1, 3))])
def test_canonicalize_examples(raw, expected):
    part = canonicalize(SubgroupPartition((np.array(raw),)))
    assert tuple(part.labels[0]) == expected
    assert part.is_canonical()


def test_canonicalize_rejects_empty_group():
    with pytest.raises(EmptyGroup):
        canonicalize(SubgroupPartition((np.array([1, 1, 3]),), (3,)))


labels = st.lists(st.integers(0, 5), min_size=1, max_size=30)


@given(labels)
def test_canonicalize_idempotent_and_preserves_sets(raw):
    raw = np.array(raw)
    once = canonical_labels(raw)
    assert np.array_equal(canonical_labels(once), once)
    same_before = raw[:, None] == raw[None, :]
    same_after = once[:, None] == once[None, :]
    assert np.array_equal(same_before, same_after)
    part = canonicalize(SubgroupPartition((raw,)))
    assert canonicalize(part).labels[0].tolist() == part.labels[0].tolist()

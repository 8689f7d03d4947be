import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from longsub.errors import DivisionByZero, LengthMismatch, ShapeMismatch, TooFewSubjects
from longsub.metrics import (PartitionPair, accuracy, joint_labels, mse, mse_ratio, nmi,
                             rand_index, total_accuracy)


def brute_accuracy(est, tru):
    est, tru = np.asarray(est), np.asarray(tru)
    le, lt = sorted(set(est.tolist())), sorted(set(tru.tolist()))
    pad = lt + [None] * max(0, len(le) - len(lt))
    best = 0
    for perm in itertools.permutations(pad, len(le)):
        mapping = dict(zip(le, perm))
        best = max(best, sum(mapping[e] == t for e, t in zip(est, tru)))
    return best / len(tru)


def brute_rand(a, b):
    pairs = list(itertools.combinations(range(len(a)), 2))
    agree = sum((a[i] == a[j]) == (b[i] == b[j]) for i, j in pairs)
    return agree / len(pairs)


def brute_nmi(a, b):
    n = len(a)

    def h(x):
        return -sum(c / n * math.log(c / n) for c in np.unique(x, return_counts=True)[1])

    ha, hb = h(a), h(b)
    if ha == 0 and hb == 0:
        return 1.0
    if ha == 0 or hb == 0:
        return 0.0
    mi = 0.0
    for u in set(a):
        for v in set(b):
            nuv = sum(1 for x, y in zip(a, b) if x == u and y == v)
            if nuv:
                nu, nv = list(a).count(u), list(b).count(v)
                mi += nuv / n * math.log(n * nuv / (nu * nv))
    return 2 * mi / (ha + hb)


def test_accuracy_examples():
    assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0
    assert accuracy([2, 2, 1, 1], [1, 1, 2, 2]) == 1.0
    assert accuracy([1, 2, 2, 2], [1, 1, 2, 2]) == 0.75
    with pytest.raises(LengthMismatch):
        accuracy([1, 2], [1, 2, 3])


def test_rand_examples():
    assert rand_index([1, 2, 2], [1, 2, 2]) == 1.0
    assert rand_index([1, 1, 2], [1, 2, 2]) == pytest.approx(1 / 3)
    assert rand_index([1, 2, 3, 4], [1, 1, 1, 1]) == 0.0
    with pytest.raises(TooFewSubjects):
        rand_index([1], [1])


def test_rand_accepts_pair():
    assert rand_index(PartitionPair(np.array([1, 1, 2]), np.array([1, 2, 2]))) == pytest.approx(1 / 3)


def test_nmi_examples():
    assert nmi([1, 1, 2, 2], [5, 5, 7, 7]) == pytest.approx(1.0)
    assert nmi([1, 1, 1], [2, 2, 2]) == 1.0
    assert nmi([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(0.0, abs=1e-15)
    assert nmi([1, 1, 1, 1], [1, 2, 1, 2]) == 0.0
    with pytest.raises(LengthMismatch):
        nmi([1, 2], [1])


def test_mse_examples():
    assert mse([np.ones(3)], [np.ones(3)]) == 0.0
    assert mse([np.array([1.0, -1.0])], [np.zeros(2)]) == 1.0
    assert mse([np.array([2.0]), np.zeros(3)], [np.zeros(1), np.zeros(3)]) == 2.0
    with pytest.raises(ShapeMismatch):
        mse([np.zeros(2)], [np.zeros(3)])


def test_mse_ratio():
    assert mse_ratio(1.3, 1.3) == 1.0
    assert mse_ratio(0.9, 1.0) == pytest.approx(0.9)
    with pytest.raises(DivisionByZero):
        mse_ratio(1.0, 0.0)


def test_total_accuracy_and_joint():
    truth = [np.array([1, 1, 2, 2]), np.array([1, 2, 1, 2])]
    est = [np.array([2, 2, 1, 1]), np.array([1, 2, 2, 2])]
    assert total_accuracy(est, truth) == 0.75
    assert joint_labels(truth).tolist() == [0, 1, 2, 3]


def test_single_cluster_lower_bound():
    truth = np.array([1, 1, 1, 2, 3, 3])
    assert accuracy(np.ones(6), truth) >= 0.5


labels = st.integers(1, 30).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 4), min_size=n, max_size=n),
                        st.lists(st.integers(0, 4), min_size=n, max_size=n)))


@settings(max_examples=1000, deadline=None)
@given(labels, st.permutations(range(5)))
def test_bounds_symmetry_relabel(pair, perm):
    a, b = np.array(pair[0]), np.array(pair[1])
    relabel = np.array(perm)[a]
    acc = accuracy(a, b)
    assert 0.0 <= acc <= 1.0 and acc == pytest.approx(brute_accuracy(a, b))
    assert accuracy(relabel, b) == acc == accuracy(b, a)
    v = nmi(a, b)
    assert 0.0 <= v <= 1.0 and v == pytest.approx(brute_nmi(a, b), abs=1e-12)
    assert nmi(b, a) == pytest.approx(v, abs=1e-12)
    assert nmi(relabel, b) == pytest.approx(v, abs=1e-12)
    if len(a) >= 2:
        r = rand_index(a, b)
        assert 0.0 <= r <= 1.0 and r == pytest.approx(brute_rand(a, b))
        assert rand_index(b, a) == r == rand_index(relabel, b)
        assert rand_index(a, a) == 1.0
    if len(set(a.tolist())) > 1:
        assert nmi(a, a) == pytest.approx(1.0)

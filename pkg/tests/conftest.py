import numpy as np
import pytest

from longsub.config import RunConfig
from longsub.core import LongitudinalDataset, SubjectRecord


def cox_de_boor(knots, degree, k, x):
    """Textbook recursion for one basis function, right-continuous except at the end."""
    knots = np.asarray(knots, dtype=float)
    if degree == 0:
        if knots[k] <= x < knots[k + 1]:
            return 1.0
        last = knots[-1]
        if x == last and knots[k] < knots[k + 1] == last:
            return 1.0
        return 0.0
    out = 0.0
    den = knots[k + degree] - knots[k]
    if den > 0:
        out += (x - knots[k]) / den * cox_de_boor(knots, degree - 1, k, x)
    den = knots[k + degree + 1] - knots[k + 1]
    if den > 0:
        out += (knots[k + degree + 1] - x) / den * cox_de_boor(knots, degree - 1, k + 1, x)
    return out


def naive_design(knots, degree, xs):
    kb = len(knots) - degree - 1
    return np.array([[cox_de_boor(knots, degree, k, x) for k in range(kb)] for x in xs])


def make_dataset(rng, n=6, p=1, r=0, n_obs=10, f=None, beta=None, noise=0.0):
    subjects = []
    for i in range(n):
        x = rng.uniform(0, 1, (n_obs, p))
        s = rng.integers(0, 2, r).astype(float) if r else np.zeros(0)
        y = noise * rng.standard_normal(n_obs)
        if beta is not None:
            y = y + beta[0] + (s @ np.asarray(beta[1:]) if r else 0.0)
        if f is not None:
            for j in range(p):
                y = y + f[j](i, x[:, j])
        subjects.append(SubjectRecord(str(i + 1), y, x, np.zeros((n_obs, 0)), s))
    return LongitudinalDataset(tuple(subjects), p, 0, r)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def config():
    return RunConfig()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

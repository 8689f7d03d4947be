import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from longsub.bspline import SplineSpec, design_matrix, grid, make_basis
from longsub.covariance import WorkingCovariance, covariance_matrix, inverse_covariance
from longsub.errors import SingularSystem
from longsub.gls import gls_fit_subject, gls_solve, normal_equations


def test_identity_system():
    assert np.allclose(gls_solve([(np.eye(2), np.eye(2), np.array([1.0, 2.0]))]), [1, 2])


def test_identity_weights_equal_ols(rng):
    blocks = [(rng.standard_normal((7, 3)), None, rng.standard_normal(7)) for _ in range(4)]
    d = np.vstack([b[0] for b in blocks])
    r = np.concatenate([b[2] for b in blocks])
    ols, *_ = np.linalg.lstsq(d, r, rcond=None)
    assert np.allclose(gls_solve(blocks), ols, atol=1e-10)


def test_matches_stacked_weighted_solve(rng):
    wc = WorkingCovariance("ar1", 0.4)
    blocks = []
    for n_i in (5, 8):
        blocks.append((rng.standard_normal((n_i, 1)), inverse_covariance(wc, n_i),
                       rng.standard_normal(n_i)))
    d = np.vstack([b[0] for b in blocks])
    r = np.concatenate([b[2] for b in blocks])
    v = np.zeros((13, 13))
    v[:5, :5] = covariance_matrix(wc, 5)
    v[5:, 5:] = covariance_matrix(wc, 8)
    l = np.linalg.cholesky(np.linalg.inv(v))
    ref, *_ = np.linalg.lstsq(l.T @ d, l.T @ r, rcond=None)
    assert np.allclose(gls_solve(blocks), ref, atol=1e-10)


def test_exact_coefficients_recovered(rng):
    b = make_basis(SplineSpec())
    x = rng.uniform(0, 1, 15)
    gamma = rng.standard_normal(b.k_basis)
    got = gls_fit_subject(b, WorkingCovariance(), x, design_matrix(b, x) @ gamma)
    assert np.allclose(got, gamma, atol=1e-9)


def test_line_reproduced_under_any_weights(rng):
    b = make_basis(SplineSpec())
    x = rng.uniform(0, 1, 15)
    g = grid(b)
    fits = []
    for wc in (WorkingCovariance(), WorkingCovariance("ar1", 0.5)):
        coef = gls_fit_subject(b, wc, x, 3 * x - 1.5)
        fits.append(design_matrix(b, g) @ coef)
        assert np.max(np.abs(fits[-1] - (3 * g - 1.5))) < 1e-8
    assert np.max(np.abs(fits[0] - fits[1])) < 1e-8


def test_singular_retry_and_failure():
    d = np.ones((4, 2))
    c = gls_solve([(d, None, np.ones(4))])
    assert np.allclose(d @ c, 1.0, atol=1e-6)
    with pytest.raises(SingularSystem):
        gls_solve([(d, None, np.ones(4))], retry_ridge=None)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0, 0.9), st.floats(0, 1))
def test_normal_equation_residual_orthogonality_permutation(seed, rho, ridge):
    rng = np.random.default_rng(seed)
    wc = WorkingCovariance("exchangeable", rho)
    blocks = [(rng.standard_normal((n, 3)), inverse_covariance(wc, n), rng.standard_normal(n))
              for n in rng.integers(3, 9, 5)]
    c = gls_solve(blocks, ridge=ridge)
    lhs, rhs = normal_equations(blocks)
    scale = max(1.0, np.abs(lhs).max(), np.abs(rhs).max())
    assert np.max(np.abs((lhs + ridge * np.eye(3)) @ c - rhs)) < 1e-9 * scale
    c0 = gls_solve(blocks)
    grad = sum(d.T @ w @ (r - d @ c0) for d, w, r in blocks)
    assert np.max(np.abs(grad)) < 1e-9 * scale
    perm = rng.permutation(len(blocks))
    assert np.allclose(gls_solve([blocks[k] for k in perm]), c0, atol=1e-12, rtol=0)

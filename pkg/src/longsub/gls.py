"""Generalised least squares over independent blocks.

Every fitting step in the package reduces to

    argmin_c  sum_i (r_i - D_i c)' W_i (r_i - D_i c) + ridge * ||c||^2

with W_i = V_i^{-1}. The normal equations are accumulated block by block in
the order given and solved with a Cholesky factorisation.
"""

from __future__ import annotations

import logging
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .bspline import SplineBasis, design_matrix
from .covariance import WorkingCovariance, inverse_covariance
from .errors import SingularSystem

logger = logging.getLogger(__name__)

Block = Tuple[np.ndarray, Optional[np.ndarray], np.ndarray]

# Reciprocal condition number below which the system is treated as singular.
RCOND_FLOOR = 1e-13
RETRY_RIDGE = 1e-8


def normal_equations(blocks: Iterable[Block]) -> tuple:
    """Return (sum D'WD, sum D'Wr). ``W=None`` means identity weights."""
    lhs = rhs = None
    for d, w, r in blocks:
        d = np.asarray(d, dtype=float)
        if d.ndim == 1:
            d = d[:, None]
        wd = d if w is None else w @ d
        a = d.T @ wd
        b = wd.T @ np.asarray(r, dtype=float)
        if lhs is None:
            lhs, rhs = a.copy(), b.copy()
        else:
            lhs += a
            rhs += b
    if lhs is None:
        raise SingularSystem("no blocks to solve")
    return lhs, rhs


def solve_normal(lhs: np.ndarray, rhs: np.ndarray, ridge: float = 0.0,
                 retry_ridge: Optional[float] = RETRY_RIDGE, context=None) -> np.ndarray:
    """Solve (lhs + ridge I) c = rhs by Cholesky, retrying once with a small ridge."""
    try:
        return _cholesky_solve(lhs, rhs, ridge)
    except SingularSystem:
        if ridge > 0 or not retry_ridge:
            raise SingularSystem(f"normal equations are singular ({context or 'no context'})",
                                 context) from None
    logger.warning("singular normal equations (%s); retrying with ridge=%g", context, retry_ridge)
    try:
        return _cholesky_solve(lhs, rhs, retry_ridge)
    except SingularSystem:
        raise SingularSystem(
            f"normal equations are singular even with ridge={retry_ridge} ({context})", context
        ) from None


def _cholesky_solve(lhs, rhs, ridge):
    a = lhs + ridge * np.eye(lhs.shape[0]) if ridge else lhs
    try:
        factor = cho_factor(a, lower=True, check_finite=True)
    except (LinAlgError, ValueError):
        raise SingularSystem("Cholesky factorisation failed") from None
    diag = np.abs(np.diag(factor[0]))
    if diag.min() == 0 or (diag.min() / diag.max()) ** 2 < RCOND_FLOOR:
        raise SingularSystem("normal equations are numerically rank deficient")
    return cho_solve(factor, rhs)


def gls_solve(blocks: Sequence[Block], ridge: float = 0.0,
              retry_ridge: Optional[float] = RETRY_RIDGE, context=None) -> np.ndarray:
    lhs, rhs = normal_equations(blocks)
    return solve_normal(lhs, rhs, ridge, retry_ridge, context)


def gls_fit_subject(basis: SplineBasis, wc: WorkingCovariance, x, w, ridge: float = 0.0,
                    retry_ridge: Optional[float] = RETRY_RIDGE, context=None) -> np.ndarray:
    """Per-subject spline coefficients (B'V^{-1}B + ridge I)^{-1} B'V^{-1} w."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != w.shape:
        raise ValueError("x and w must have the same length")
    b = design_matrix(basis, x)
    return gls_solve([(b, inverse_covariance(wc, x.shape[0]), w)], ridge, retry_ridge, context)

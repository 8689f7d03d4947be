"""Pooled one-group fit that seeds backfitting.

All subjects are treated as a single group and the intercept, baseline
coefficients and one spline per covariate are estimated jointly by GLS. Each
spline block is constrained to have zero pooled empirical mean: B-spline rows
sum to one, so without the constraint every block would be collinear with the
intercept. The constraint is imposed by fitting in the null space of the
block's column-sum vector.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import null_space

from .bspline import SplineBasis
from .core import LongitudinalDataset
from .covariance import WorkingCovariance
from .errors import SingularSystem
from .gls import normal_equations, solve_normal
from .workspace import Workspace, build_workspace

logger = logging.getLogger(__name__)


@dataclass
class InitialEstimates:
    beta: np.ndarray      # intercept first, then the r baseline coefficients
    gamma0: list          # one length-K_j coefficient vector per covariate


def centering_bases(ws: Workspace) -> list:
    """Orthonormal K_j x (K_j - 1) bases of {gamma : mean of B_j gamma = 0}."""
    return [null_space(ws.column_sums(j)[None, :]) for j in range(ws.p)]


def joint_design(ws: Workspace, constraint_bases=None) -> list:
    """Per-subject joint design U_i = [1, S_i, B_i1 N_1, ..., B_ip N_p]."""
    if constraint_bases is None:
        constraint_bases = centering_bases(ws)
    return [np.hstack([ws.baseline[i]] + [ws.designs[j][i] @ constraint_bases[j]
                                          for j in range(ws.p)])
            for i in range(ws.n)]


def component_mean(ws: Workspace, j: int, gamma: np.ndarray) -> float:
    return float(ws.column_sums(j) @ gamma / ws.n_obs)


def pooled_fit(dataset: LongitudinalDataset, bases: Sequence[SplineBasis],
               wc: WorkingCovariance, ridge: float = 0.0) -> InitialEstimates:
    return pooled_fit_workspace(build_workspace(dataset, bases, wc), ridge)


def pooled_fit_workspace(ws: Workspace, ridge: float = 0.0) -> InitialEstimates:
    nulls = centering_bases(ws)
    designs = joint_design(ws, nulls)
    lhs, rhs = normal_equations(zip(designs, ws.winv, ws.y))
    try:
        coef = solve_normal(lhs, rhs, ridge, retry_ridge=None, context="pooled fit")
    except SingularSystem:
        block = _collinear_block(ws, lhs, nulls)
        raise SingularSystem(f"pooled design is singular; first collinear block: {block}",
                             block) from None

    n_base = ws.baseline[0].shape[1]
    beta = coef[:n_base].copy()
    gamma0 = []
    pos = n_base
    for j in range(ws.p):
        width = nulls[j].shape[1]
        g = nulls[j] @ coef[pos:pos + width]
        pos += width
        # Already centred up to rounding; move the residual constant into the intercept.
        shift = component_mean(ws, j, g)
        gamma0.append(g - shift)
        beta[0] += shift
    return InitialEstimates(beta, gamma0)


def _collinear_block(ws, lhs, nulls):
    names = ["intercept"] + [f"s_{k + 1}" for k in range(ws.baseline[0].shape[1] - 1)]
    widths = [1] * len(names)
    for j in range(ws.p):
        names.append(f"spline x_{j + 1}")
        widths.append(nulls[j].shape[1])
    end = 0
    for name, width in zip(names, widths):
        end += width
        sub = lhs[:end, :end]
        if np.linalg.matrix_rank(sub, tol=1e-10 * max(1.0, np.abs(sub).max())) < end:
            return name
    return "unknown"

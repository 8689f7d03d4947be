"""Clamped B-spline bases: knot construction and Cox-de Boor evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateDomain, DimensionMismatch, DuplicateKnots

logger = logging.getLogger(__name__)

UNIFORM = "uniform"
QUANTILE = "quantile"


@dataclass(frozen=True)
class SplineSpec:
    degree: int = 3
    interior_knots: int = 2
    domain: tuple = (0.0, 1.0)
    knot_rule: str = UNIFORM

    def __post_init__(self):
        if self.degree < 0 or self.interior_knots < 0:
            raise ValueError("degree and interior_knots must be non-negative")
        if self.knot_rule not in (UNIFORM, QUANTILE):
            raise ValueError(f"unknown knot rule {self.knot_rule!r}")
        a, b = (float(v) for v in self.domain)
        object.__setattr__(self, "domain", (a, b))

    @property
    def k_basis(self) -> int:
        return self.interior_knots + self.degree + 1


@dataclass(frozen=True)
class SplineBasis:
    spec: SplineSpec
    knots: np.ndarray

    @property
    def degree(self) -> int:
        return self.spec.degree

    @property
    def k_basis(self) -> int:
        return self.spec.k_basis

    @property
    def domain(self) -> tuple:
        return self.spec.domain

    @property
    def interior(self) -> np.ndarray:
        d = self.spec.degree
        return self.knots[d + 1:len(self.knots) - d - 1]


def _quantile_knots(data, a, b, n_knots):
    data = np.asarray(data, dtype=float)
    if data.size == 0:
        raise ValueError("quantile knot rule needs data")
    if np.any(data < a) or np.any(data > b):
        raise ValueError("quantile data must lie inside the domain")
    inside = np.unique(data[(data > a) & (data < b)])
    if inside.size < n_knots:
        raise DuplicateKnots(
            f"{n_knots} interior knots requested but only {inside.size} distinct interior values"
        )
    probs = np.arange(1, n_knots + 1) / (n_knots + 1)
    q = np.quantile(data, probs)
    uniform = a + probs * (b - a)

    def ok(t):
        return np.all(np.diff(np.concatenate([[a], t, [b]])) > 0)

    if ok(q):
        return q
    # Ties: slide the quantiles toward the uniform positions until strictly increasing.
    for lam in np.linspace(0.05, 1.0, 20):
        t = q + lam * (uniform - q)
        if ok(t):
            logger.warning("quantile knots tied; moved %.0f%% toward uniform spacing", 100 * lam)
            return t
    raise DuplicateKnots("could not separate interior knots")  # pragma: no cover


def make_basis(spec: SplineSpec, data: Optional[np.ndarray] = None) -> SplineBasis:
    """Clamped knot vector for ``spec``; boundary knots repeated degree+1 times."""
    a, b = spec.domain
    if not a < b:
        raise DegenerateDomain(f"domain [{a}, {b}] is empty")
    n_int = spec.interior_knots
    if spec.knot_rule == UNIFORM or n_int == 0:
        interior = a + (b - a) * np.arange(1, n_int + 1) / (n_int + 1)
    else:
        interior = _quantile_knots(data, a, b, n_int)
    d = spec.degree
    knots = np.concatenate([np.full(d + 1, a), interior, np.full(d + 1, b)])
    knots.setflags(write=False)
    return SplineBasis(spec, knots)


def _span(knots, degree, x):
    """Index mu with knots[mu] <= x < knots[mu+1], right end folded into the last span."""
    n_basis = len(knots) - degree - 1
    mu = np.searchsorted(knots, x, side="right") - 1
    return np.clip(mu, degree, n_basis - 1)


def _clamp(basis, x):
    x = np.asarray(x, dtype=float)
    a, b = basis.domain
    outside = (x < a) | (x > b)
    if np.any(outside):
        logger.warning("%d evaluation point(s) outside [%g, %g] clamped to the boundary",
                       int(outside.sum()), a, b)
        x = np.clip(x, a, b)
    return x


def _nonzero_basis(knots, degree, x, mu):
    """Values of the degree+1 basis functions that can be nonzero on span mu.

    Triangular Cox-de Boor scheme, vectorised over points. Returns an array of
    shape (len(x), degree+1) whose column r is B_{mu-degree+r}(x).
    """
    m = x.shape[0]
    vals = np.zeros((m, degree + 1))
    vals[:, 0] = 1.0
    left = np.zeros((m, degree + 1))
    right = np.zeros((m, degree + 1))
    for k in range(1, degree + 1):
        left[:, k] = x - knots[mu + 1 - k]
        right[:, k] = knots[mu + k] - x
        saved = np.zeros(m)
        for r in range(k):
            denom = right[:, r + 1] + left[:, k - r]
            temp = np.divide(vals[:, r], denom, out=np.zeros(m), where=denom != 0)
            vals[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, k - r] * temp
        vals[:, k] = saved
    return vals


def design_matrix(basis: SplineBasis, xs) -> np.ndarray:
    """Rows are basis evaluations at each point of ``xs``."""
    xs = _clamp(basis, np.atleast_1d(np.asarray(xs, dtype=float)))
    k = basis.k_basis
    out = np.zeros((xs.shape[0], k))
    if xs.shape[0] == 0:
        return out
    d = basis.degree
    mu = _span(basis.knots, d, xs)
    vals = _nonzero_basis(basis.knots, d, xs, mu)
    cols = mu[:, None] - d + np.arange(d + 1)[None, :]
    np.put_along_axis(out, cols, vals, axis=1)
    return out


def eval_basis(basis: SplineBasis, x: float) -> np.ndarray:
    return design_matrix(basis, np.array([x], dtype=float))[0]


def eval_component(basis: SplineBasis, gamma, grid) -> np.ndarray:
    """Evaluate the spline with coefficients ``gamma`` on ``grid``."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (basis.k_basis,):
        raise DimensionMismatch(f"gamma has shape {gamma.shape}, basis has {basis.k_basis} functions")
    return design_matrix(basis, grid) @ gamma


def grid(basis: SplineBasis, size: int = 101) -> np.ndarray:
    a, b = basis.domain
    return np.linspace(a, b, size)

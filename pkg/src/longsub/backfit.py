"""Backfitting with k-means subgroup pursuit.

One sweep visits every covariate j in turn:

1. partial residuals W_ij = Y_i - [1, S_i] beta - sum_{k != j} f_k on subject i,
2. a spline fit of W_ij on x_ij for every subject (GLS with weight V_i^{-1}),
3. k-means on the per-subject coefficient rows with m_j clusters,
4. one GLS spline fit per cluster, recentred to zero pooled mean.

After each sweep the intercept and baseline coefficients are refreshed
unless ``freeze_beta`` is set. Sweeps stop once no covariate's partition
changed. The fit is then polished with memberships held fixed until the
fitted values stop moving, so the final coefficients are the group GLS
solution for the final partition.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bspline import design_matrix, make_basis
from .config import RunConfig
from .core import (
    FittedModel, LongitudinalDataset, SubgroupPartition, canonical_labels, label_order, validate,
)
from .errors import NonConvergedWarning, SingularSystem
from .gls import normal_equations, solve_normal
from .initial_fit import pooled_fit_workspace
from .kmeans import kmeans
from .workspace import Workspace, build_workspace

logger = logging.getLogger(__name__)


@dataclass
class BackfitState:
    """Current estimates. ``labels[j]`` are 0-based and canonical (first appearance)."""

    beta: np.ndarray
    gamma: list
    labels: list
    sweep: int = 0
    centers: list = field(default_factory=list)
    fits: list = field(default_factory=list)   # fits[j][i]: current f_j values on subject i

    @property
    def m(self) -> tuple:
        return tuple(g.shape[0] for g in self.gamma)

    @property
    def partition(self) -> SubgroupPartition:
        return SubgroupPartition(tuple(lab + 1 for lab in self.labels), self.m)


@dataclass
class BackfitResult:
    state: BackfitState
    converged: bool
    sweeps: int
    polish_sweeps: int


def _derived_seed(seed, *keys):
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1)[0])


def _component_fits(ws: Workspace, j, gamma_j, labels_j):
    return [ws.designs[j][i] @ gamma_j[labels_j[i]] for i in range(ws.n)]


def initial_state(ws: Workspace, ridge: float = 0.0) -> BackfitState:
    init = pooled_fit_workspace(ws, ridge)
    gamma = [g[None, :].copy() for g in init.gamma0]
    labels = [np.zeros(ws.n, dtype=int) for _ in range(ws.p)]
    state = BackfitState(init.beta.copy(), gamma, labels)
    state.fits = [_component_fits(ws, j, gamma[j], labels[j]) for j in range(ws.p)]
    return state


def baseline_fit(ws: Workspace, beta, i):
    return ws.baseline[i] @ beta


def partial_residuals(ws: Workspace, state: BackfitState, j: int) -> list:
    """W_ij = Y_i - [1, S_i] beta - sum of the other current components."""
    out = []
    for i in range(ws.n):
        w = ws.y[i] - baseline_fit(ws, state.beta, i)
        for k in range(ws.p):
            if k != j:
                w = w - state.fits[k][i]
        out.append(w)
    return out


def per_subject_coefficients(ws: Workspace, j: int, residuals: Sequence[np.ndarray],
                             ridge: float = 0.0) -> np.ndarray:
    """Row i holds subject i's spline coefficients for covariate j."""
    rows = []
    for i in range(ws.n):
        b = ws.designs[j][i]
        wb = ws.winv[i] @ b
        ctx = f"subject {ws.dataset.subjects[i].id}, covariate {j + 1}"
        rows.append(solve_normal(b.T @ wb, wb.T @ residuals[i], ridge, context=ctx))
    return np.vstack(rows)


def group_refit(ws: Workspace, j: int, residuals: Sequence[np.ndarray], labels: np.ndarray,
                m: int, ridge: float = 0.0) -> np.ndarray:
    """(m, K_j) coefficients: one GLS spline per group over its members' blocks."""
    labels = np.asarray(labels)
    out = np.zeros((m, ws.bases[j].k_basis))
    for k in range(m):
        members = np.flatnonzero(labels == k)
        lhs, rhs = normal_equations((ws.designs[j][i], ws.winv[i], residuals[i]) for i in members)
        out[k] = solve_normal(lhs, rhs, ridge, context=f"covariate {j + 1}, group {k + 1}")
    return out


def component_mean(ws: Workspace, j: int, gamma_j: np.ndarray, labels_j: np.ndarray) -> float:
    """Pooled empirical mean of the (group-specific) component j over all observations."""
    total = 0.0
    for k in range(gamma_j.shape[0]):
        members = np.flatnonzero(labels_j == k)
        total += ws.column_sums(j, members) @ gamma_j[k]
    return float(total / ws.n_obs)


def _recenter(ws, state, j):
    # Partition of unity: subtracting c from every coefficient shifts the curve by -c.
    shift = component_mean(ws, j, state.gamma[j], state.labels[j])
    state.gamma[j] = state.gamma[j] - shift
    state.beta = state.beta.copy()
    state.beta[0] += shift


def _refresh_beta(ws, state, ridge):
    blocks = []
    for i in range(ws.n):
        r = ws.y[i] - sum(state.fits[j][i] for j in range(ws.p))
        blocks.append((ws.baseline[i], ws.winv[i], r))
    lhs, rhs = normal_equations(blocks)
    state.beta = solve_normal(lhs, rhs, ridge, context="baseline block")


def _update_component(ws, state, j, residuals, labels, m, ridge):
    state.labels[j] = labels
    state.gamma[j] = group_refit(ws, j, residuals, labels, m, ridge)
    _recenter(ws, state, j)
    state.fits[j] = _component_fits(ws, j, state.gamma[j], labels)


def fitted_values(ws: Workspace, state: BackfitState) -> list:
    return [baseline_fit(ws, state.beta, i) + sum(state.fits[j][i] for j in range(ws.p))
            for i in range(ws.n)]


def pursue(ws: Workspace, counts: Sequence[int], config: RunConfig,
           fixed_labels: Optional[Sequence[np.ndarray]] = None,
           state: Optional[BackfitState] = None) -> BackfitResult:
    """Run subgroup pursuit on a prepared workspace.

    With ``fixed_labels`` (0-based) no clustering happens: only the polish
    phase runs, which is the oracle estimator when the labels are the truth.
    """
    bf, km = config.backfit, config.kmeans
    counts = [int(c) for c in counts]
    if len(counts) != ws.p:
        raise ValueError(f"need {ws.p} group counts, got {len(counts)}")
    if state is None:
        state = initial_state(ws, bf.ridge)

    converged = True
    sweeps = 0
    if fixed_labels is None:
        converged = False
        for sweep in range(1, bf.max_sweeps + 1):
            sweeps = sweep
            state.sweep = sweep
            previous = [lab.copy() for lab in state.labels]
            centers = []
            for j in range(ws.p):
                resid = partial_residuals(ws, state, j)
                if counts[j] == 1:
                    labels = np.zeros(ws.n, dtype=int)
                    centers.append(None)
                else:
                    coefs = per_subject_coefficients(ws, j, resid, bf.subject_ridge)
                    res = kmeans(coefs, counts[j], seed=_derived_seed(km.seed, sweep, j),
                                 restarts=km.restarts, max_iter=km.max_iter)
                    labels = canonical_labels(res.labels) - 1
                    centers.append(res.centers[label_order(res.labels)])
                _update_component(ws, state, j, resid, labels, counts[j], bf.ridge)
            state.centers = centers
            if not bf.freeze_beta:
                _refresh_beta(ws, state, bf.ridge)
            if all(np.array_equal(a, b) for a, b in zip(previous, state.labels)):
                converged = True
                break
        if not converged:
            warnings.warn(f"memberships still changing after {bf.max_sweeps} sweeps",
                          NonConvergedWarning, stacklevel=2)
        labels = state.labels
    else:
        labels = [np.asarray(lab, dtype=int) for lab in fixed_labels]
        if [int(lab.max()) + 1 for lab in labels] != counts:
            raise ValueError("fixed labels disagree with counts")

    polish = polish_fit(ws, state, labels, counts, config)
    return BackfitResult(state, converged, sweeps, polish)


def polish_fit(ws: Workspace, state: BackfitState, labels, counts, config: RunConfig) -> int:
    """Backfit group splines with memberships held fixed until fitted values settle."""
    bf = config.backfit
    before = np.concatenate(fitted_values(ws, state))
    for sweep in range(1, bf.polish_max_sweeps + 1):
        for j in range(ws.p):
            resid = partial_residuals(ws, state, j)
            _update_component(ws, state, j, resid, np.asarray(labels[j]), counts[j], bf.ridge)
        if not bf.freeze_beta:
            _refresh_beta(ws, state, bf.ridge)
        after = np.concatenate(fitted_values(ws, state))
        if np.max(np.abs(after - before)) < bf.polish_tol:
            return sweep
        before = after
    logger.info("polish stopped at %d sweeps", bf.polish_max_sweeps)
    return bf.polish_max_sweeps


def make_bases(dataset: LongitudinalDataset, config: RunConfig) -> list:
    """One basis per covariate over its observed range."""
    out = []
    for j, dom in enumerate(dataset.domains()):
        spec = config.spline.spec(dom)
        out.append(make_basis(spec, dataset.covariate(j) if spec.knot_rule == "quantile" else None))
    return out


def prepare(dataset: LongitudinalDataset, config: RunConfig, bases=None):
    """Validate, drop unusable subjects and build the workspace."""
    if bases is None:
        bases = make_bases(dataset, config)
    k_max = max(b.k_basis for b in bases)
    report = validate(dataset, k_max, config.data.min_visits, config.data.exclusion)
    if report.excluded_indices:
        logger.warning("excluding %d subject(s) with fewer than %d visits: %s",
                       len(report.excluded_indices), report.min_visits,
                       [dataset.subjects[i].id for i in report.excluded_indices])
    usable = dataset.subset(report.usable_indices)
    return build_workspace(usable, bases, config.covariance.working()), report


def to_model(ws: Workspace, result: BackfitResult, dataset: LongitudinalDataset,
             report, config: RunConfig, bic_trace=None) -> FittedModel:
    """Package a finished fit, assigning excluded subjects to their nearest centers."""
    state = result.state
    n = dataset.n
    labels = [np.full(n, -1, dtype=int) for _ in range(ws.p)]
    for pos, i in enumerate(report.usable_indices):
        for j in range(ws.p):
            labels[j][i] = state.labels[j][pos]
    if report.excluded_indices:
        _assign_excluded(ws, state, dataset, report.excluded_indices, labels)

    gamma, centers, final = [], [], []
    for j in range(ws.p):
        order = label_order(labels[j])
        remap = {old: new for new, old in enumerate(order)}
        final.append(np.array([remap[v] for v in labels[j]], dtype=int) + 1)
        gamma.append(state.gamma[j][order])
        c = state.centers[j] if state.centers and j < len(state.centers) else None
        centers.append(None if c is None else c[order])
    partition = SubgroupPartition(tuple(final), tuple(g.shape[0] for g in gamma))
    fitted = fitted_values(ws, state)
    return FittedModel(
        beta=state.beta.copy(), gamma=gamma, partition=partition, subject_ids=dataset.ids,
        bic_trace=dict(bic_trace or {}), iterations=result.sweeps, converged=result.converged,
        excluded=[dataset.subjects[i].id for i in report.excluded_indices], centers=centers,
        fitted=fitted,
    )


EXCLUDED_RIDGE = 1e-6


def _assign_excluded(ws, state, dataset, excluded, labels):
    """Nearest-center membership for subjects too short to enter the fit.

    Covariates not yet assigned contribute their size-weighted average group
    curve to the partial residual; two passes let later assignments inform
    earlier ones.
    """
    bases = ws.bases
    wc = ws.wc
    from .covariance import inverse_covariance

    for i in excluded:
        sub = dataset.subjects[i]
        winv = inverse_covariance(wc, sub.n_obs)
        base = np.concatenate([[1.0], sub.s]) @ state.beta
        designs = [design_matrix(bases[j], sub.x[:, j]) for j in range(ws.p)]
        assigned = [None] * ws.p
        for _ in range(2):
            for j in range(ws.p):
                w = sub.y - base
                for k in range(ws.p):
                    if k == j:
                        continue
                    if assigned[k] is None:
                        sizes = np.bincount(state.labels[k], minlength=state.gamma[k].shape[0])
                        g = sizes @ state.gamma[k] / sizes.sum()
                    else:
                        g = state.gamma[k][assigned[k]]
                    w = w - designs[k] @ g
                if state.gamma[j].shape[0] == 1:
                    assigned[j] = 0
                    continue
                b = designs[j]
                coef = solve_normal(b.T @ winv @ b, b.T @ winv @ w, EXCLUDED_RIDGE,
                                    context=f"excluded subject {sub.id}")
                ref = state.centers[j] if state.centers and state.centers[j] is not None \
                    else state.gamma[j]
                assigned[j] = int(np.argmin(((ref - coef) ** 2).sum(axis=1)))
        for j in range(ws.p):
            labels[j][i] = assigned[j]


def run(dataset: LongitudinalDataset, config: RunConfig, counts: Optional[Sequence[int]] = None,
        bases=None) -> FittedModel:
    """Fit the subgroup model.

    Group counts come from ``counts``, else ``config.selection.m``, else BIC
    selection over ``1..config.selection.m_max`` for every covariate.
    """
    ws, report = prepare(dataset, config, bases)
    if counts is None and config.selection.m:
        counts = config.selection.m
    if counts is None:
        from .model_selection import select_counts

        selection = select_counts(ws, config)
        if not selection.result.converged:
            warnings.warn(f"memberships for the selected counts {selection.counts} still "
                          f"changing after {config.backfit.max_sweeps} sweeps",
                          NonConvergedWarning, stacklevel=2)
        return to_model(ws, selection.result, dataset, report, config, selection.trace)
    result = pursue(ws, counts, config)
    return to_model(ws, result, dataset, report, config)


def oracle_run(dataset: LongitudinalDataset, config: RunConfig, truth: SubgroupPartition,
               bases=None) -> FittedModel:
    """Group GLS fit with the true memberships known (no clustering)."""
    ws, report = prepare(dataset, config, bases)
    idx = report.usable_indices
    fixed = [canonical_labels(np.asarray(lab)[idx]) - 1 for lab in truth.labels]
    counts = [int(f.max()) + 1 for f in fixed]
    result = pursue(ws, counts, config, fixed_labels=fixed)
    return to_model(ws, result, dataset, report, config)

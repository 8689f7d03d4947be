"""Choose the number of subgroups per covariate by minimising BIC."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .backfit import BackfitResult, fitted_values, prepare, pursue
from .config import RunConfig
from .core import BicRecord, LongitudinalDataset
from .errors import AllCandidatesFailed, InvalidK, LongsubError, NonConvergedWarning
from .workspace import Workspace

logger = logging.getLogger(__name__)


def bic_value(loglik: float, k_params: int, n_obs: int) -> float:
    """-2 log L + log(n) k with the natural logarithm."""
    if n_obs < 1:
        raise ValueError("n_obs must be at least 1")
    return -2.0 * loglik + math.log(n_obs) * k_params


def working_loglik(ws: Workspace, fitted: Sequence[np.ndarray]) -> float:
    """Gaussian log-likelihood of the residuals under sigma^2 V_i.

    sigma^2 is profiled out as the V-weighted residual sum of squares over N.
    """
    wrss = 0.0
    for i in range(ws.n):
        e = ws.y[i] - fitted[i]
        wrss += float(e @ ws.winv[i] @ e)
    n_obs = ws.n_obs
    sigma2 = max(wrss / n_obs, np.finfo(float).tiny)
    return -0.5 * (n_obs * math.log(2.0 * math.pi * sigma2) + ws.log_det_v + n_obs)


def parameter_count(ws: Workspace, counts: Sequence[int]) -> int:
    """Spline coefficients of every group, intercept, baseline slopes and sigma^2."""
    r = ws.baseline[0].shape[1] - 1
    return int(sum(m * b.k_basis for m, b in zip(counts, ws.bases)) + r + 1 + 1)


@dataclass
class _Candidate:
    result: Optional[BackfitResult]
    loglik: float
    k_params: int
    bic: float
    feasible: bool


@dataclass
class Selection:
    counts: tuple
    trace: dict
    result: BackfitResult
    cache: dict = field(default_factory=dict, repr=False)


class _Evaluator:
    """Fits each distinct count vector once; reruns are deterministic anyway."""

    def __init__(self, ws: Workspace, config: RunConfig):
        self.ws = ws
        self.config = config
        self.cache = {}

    def __call__(self, counts) -> _Candidate:
        key = tuple(int(c) for c in counts)
        if key not in self.cache:
            self.cache[key] = self._fit(key)
        return self.cache[key]

    def _fit(self, counts):
        ws = self.ws
        k = parameter_count(ws, counts)
        if any(c < 1 or c > ws.n for c in counts):
            return _Candidate(None, float("nan"), k, float("nan"), False)
        try:
            # Over-specified candidates often cycle; that is reported, not warned about.
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NonConvergedWarning)
                result = pursue(ws, counts, self.config)
        except (LongsubError, np.linalg.LinAlgError) as exc:
            logger.warning("candidate counts %s failed: %s", counts, exc)
            return _Candidate(None, float("nan"), k, float("nan"), False)
        if not result.converged:
            logger.info("candidate counts %s: memberships did not settle", counts)
        ll = working_loglik(ws, fitted_values(ws, result.state))
        return _Candidate(result, ll, k, bic_value(ll, k, ws.n_obs), True)


def _as_workspace(data, config):
    if isinstance(data, Workspace):
        return data
    ws, _ = prepare(data, config)
    return ws


def select_m(data, config: RunConfig, j: int, m_max: Optional[int] = None,
             counts: Optional[Sequence[int]] = None, _evaluate=None):
    """BIC over m_j = 1..m_max with the other covariates held at ``counts``.

    Returns ``(chosen m, records)``; ties go to the smaller m.
    """
    ws = _as_workspace(data, config)
    m_max = config.selection.m_max if m_max is None else int(m_max)
    if m_max < 1:
        raise InvalidK("m_max must be at least 1")
    if m_max > ws.n:
        raise InvalidK(f"m_max={m_max} exceeds the number of subjects ({ws.n})")
    evaluate = _evaluate or _Evaluator(ws, config)
    base = list(counts) if counts is not None else [1] * ws.p
    records = []
    best_m, best_bic = None, math.inf
    for m in range(1, m_max + 1):
        cand_counts = list(base)
        cand_counts[j] = m
        cand = evaluate(cand_counts)
        records.append(BicRecord(j, m, cand.loglik, cand.k_params, ws.n_obs, cand.bic,
                                 cand.feasible))
        if cand.feasible and cand.bic < best_bic:
            best_m, best_bic = m, cand.bic
    if best_m is None:
        raise AllCandidatesFailed(f"no feasible group count for covariate {j + 1}")
    return best_m, records


def select_counts(data, config: RunConfig) -> Selection:
    """Sequential selection over covariates, then one confirmation pass."""
    ws = _as_workspace(data, config)
    evaluate = _Evaluator(ws, config)
    m_max = min(config.selection.m_max, ws.n)
    counts = [1] * ws.p
    trace = {}
    passes = 2 if config.selection.confirm else 1
    for _ in range(passes):
        for j in range(ws.p):
            chosen, records = select_m(ws, config, j, m_max, counts, _evaluate=evaluate)
            counts[j] = chosen
            trace[j] = records
    final = evaluate(counts)
    return Selection(tuple(counts), trace, final.result, evaluate.cache)


def select(dataset: LongitudinalDataset, config: RunConfig) -> Selection:
    return select_counts(dataset, config)

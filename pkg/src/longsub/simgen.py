"""Seeded generators for the three benchmark designs and custom variants.

Every random draw comes from its own stream keyed by (seed, subject,
variable), so enlarging ``n`` leaves earlier subjects untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import LongitudinalDataset, SubgroupPartition, SubjectRecord, canonical_labels

# Component curves, referenced by id.
FUNCTIONS: dict = {
    "lin_up": lambda x: 3.0 * x - 1.5,
    "lin_down": lambda x: -5.0 * x + 2.5,
    "lin_flat": lambda x: 1.25 * x - 0.625,
    "lin_steep": lambda x: -6.0 * x + 3.0,
    "atan": lambda x: -1.75 * np.arctan(5.0 * (x - 0.6)) - 0.415,
    "bump": lambda x: 2.5 * (1.0 - ((x - 0.75) / 0.8) ** 2) ** 4 - 1.363,
    "sin": lambda x: 2.0 * np.sin(np.pi * x) - np.pi / 4.0,
    "cos": lambda x: 2.0 * np.cos(np.pi * x),
    "zero": lambda x: np.zeros_like(np.asarray(x, dtype=float)),
}

# Grouping rules: subject index (1-based) -> group (1-based).
GROUPINGS: dict = {
    "halves": lambda i, n: 1 if i <= n / 2 else 2,
    "parity": lambda i, n: 1 if i % 2 == 1 else 2,
    "single": lambda i, n: 1,
}

CASES = {
    1: (("halves", ("lin_up", "lin_down")), ("halves", ("lin_flat", "lin_steep"))),
    2: (("parity", ("atan", "bump")), ("halves", ("sin", "cos"))),
    3: (("single", ("cos",)), ("parity", ("lin_up", "lin_down")), ("halves", ("atan", "bump"))),
}

_NI, _X, _Z, _B, _EPS, _U = range(6)


@dataclass(frozen=True)
class ScenarioSpec:
    """Simulation design.

    ``case`` is 1, 2, 3 or ``"custom"``. ``ni_rule`` is ``("fixed", n_i)`` or
    ``("uniform", lo, hi)`` with inclusive bounds; ``None`` picks the case
    default. A custom design lists ``(grouping, function ids)`` per covariate
    in ``components``. ``random_effect`` is ``"slope"`` (Z_it ~ N(0,1) times
    b_i) or ``"intercept"`` (b_i added to every visit).
    """

    case: object = 1
    n: int = 50
    ni_rule: Optional[tuple] = None
    sigma_b2: float = 0.2
    sigma_e2: float = 0.1
    seed: int = 0
    beta: float = 1.0
    components: Optional[tuple] = None
    random_effect: Optional[str] = None
    baseline: Optional[bool] = None

    def resolved(self) -> "ScenarioSpec":
        case = self.case
        if case in ("custom", None):
            if not self.components:
                raise ValueError("custom scenario needs components")
            comps = tuple((g, tuple(f)) for g, f in self.components)
            ni = self.ni_rule or ("uniform", 10, 20)
            re = self.random_effect or "slope"
            base = bool(self.baseline)
        else:
            case = int(case)
            if case not in CASES:
                raise ValueError(f"unknown case {case!r}")
            comps = CASES[case]
            ni = self.ni_rule or (("fixed", 15) if case == 1 else ("uniform", 10, 20))
            re = self.random_effect or ("intercept" if case == 3 else "slope")
            base = case == 3 if self.baseline is None else bool(self.baseline)
        for grouping, funcs in comps:
            if grouping not in GROUPINGS:
                raise ValueError(f"unknown grouping {grouping!r}")
            for f in funcs:
                if f not in FUNCTIONS:
                    raise ValueError(f"unknown component function {f!r}")
        return ScenarioSpec(case, self.n, tuple(ni), self.sigma_b2, self.sigma_e2, self.seed,
                            self.beta, comps, re, base)


@dataclass
class GeneratedPanel:
    dataset: LongitudinalDataset
    truth: SubgroupPartition
    true_components: tuple      # per covariate, function id of each true group
    spec: ScenarioSpec

    def true_function(self, j: int, group: int) -> Callable:
        """Curve of (1-based) ``group`` on covariate ``j``."""
        return FUNCTIONS[self.true_components[j][group - 1]]

    def true_mean(self) -> list:
        """Noise-free mean response per subject (no random effect, no error)."""
        out = []
        for i, sub in enumerate(self.dataset.subjects):
            mu = np.full(sub.n_obs, self.spec.beta * float(sub.s.sum()))
            for j in range(self.dataset.p):
                g = self.truth.labels[j][i]
                mu = mu + self.true_function(j, g)(sub.x[:, j])
            out.append(mu)
        return out


def _rng(seed, i, var, j=0):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(i), var, int(j)]))


def _n_obs(rule, seed, i):
    if rule[0] == "fixed":
        return int(rule[1])
    if rule[0] == "uniform":
        return int(_rng(seed, i, _NI).integers(int(rule[1]), int(rule[2]) + 1))
    raise ValueError(f"unknown n_i rule {rule!r}")


def generate(spec: ScenarioSpec) -> GeneratedPanel:
    spec = spec.resolved()
    n = int(spec.n)
    if n < 1:
        raise ValueError("n must be positive")
    comps = spec.components
    p = len(comps)
    sd_b = math.sqrt(spec.sigma_b2)
    sd_e = math.sqrt(spec.sigma_e2)
    truth = [np.array([GROUPINGS[g](i, n) for i in range(1, n + 1)]) for g, _ in comps]
    # Canonical labels; function ids reordered to match.
    true_components = []
    for j, (g, funcs) in enumerate(comps):
        order = []
        for lab in truth[j].tolist():
            if lab not in order:
                order.append(lab)
        true_components.append(tuple(funcs[lab - 1] for lab in order))
        truth[j] = canonical_labels(truth[j])

    subjects = []
    for idx in range(n):
        i = idx + 1
        n_i = _n_obs(spec.ni_rule, spec.seed, i)
        x = np.column_stack([_rng(spec.seed, i, _X, j).uniform(0.0, 1.0, n_i) for j in range(p)])
        b = sd_b * _rng(spec.seed, i, _B).standard_normal()
        eps = sd_e * _rng(spec.seed, i, _EPS).standard_normal(n_i)
        if spec.random_effect == "intercept":
            z = np.ones((n_i, 1))
        else:
            z = _rng(spec.seed, i, _Z).standard_normal((n_i, 1))
        if spec.baseline:
            s = np.array([float(_rng(spec.seed, i, _U).integers(0, 2))])
        else:
            s = np.zeros(0)
        y = z[:, 0] * b + eps
        if s.size:
            y = y + s[0] * spec.beta
        for j in range(p):
            y = y + FUNCTIONS[true_components[j][truth[j][idx] - 1]](x[:, j])
        subjects.append(SubjectRecord(str(i), y, x, z, s))

    dataset = LongitudinalDataset(tuple(subjects), p, 1, 1 if spec.baseline else 0)
    partition = SubgroupPartition(tuple(truth), tuple(int(t.max()) for t in truth))
    return GeneratedPanel(dataset, partition, tuple(true_components), spec)


def oracle_fit(panel: GeneratedPanel, config):
    """Fit with the true memberships held fixed (the oracle estimator)."""
    from .backfit import oracle_run

    return oracle_run(panel.dataset, config, panel.truth)

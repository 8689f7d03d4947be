"""Per-dataset precomputation shared by the initial fit, backfitting and BIC."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bspline import SplineBasis, design_matrix
from .core import LongitudinalDataset
from .covariance import WorkingCovariance, inverse_covariance, log_det_covariance


@dataclass
class Workspace:
    """Spline designs, weights and baseline blocks for every subject.

    ``designs[j][i]`` is B_ij, ``baseline[i]`` is the n_i x (1 + r) block
    [1, S_i], ``winv[i]`` is V_i^{-1}.
    """

    dataset: LongitudinalDataset
    bases: list
    wc: WorkingCovariance
    designs: list
    baseline: list
    winv: list
    y: list
    log_det_v: float

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def p(self) -> int:
        return self.dataset.p

    @property
    def n_obs(self) -> int:
        return self.dataset.n_obs

    def column_sums(self, j: int, members=None) -> np.ndarray:
        """Sum over observations of the covariate-j basis rows, optionally over a subset."""
        idx = range(self.n) if members is None else members
        total = np.zeros(self.bases[j].k_basis)
        for i in idx:
            total += self.designs[j][i].sum(axis=0)
        return total


def build_workspace(dataset: LongitudinalDataset, bases: Sequence[SplineBasis],
                    wc: WorkingCovariance) -> Workspace:
    if len(bases) != dataset.p:
        raise ValueError(f"need one basis per covariate ({dataset.p}), got {len(bases)}")
    designs = [[design_matrix(bases[j], sub.x[:, j]) for sub in dataset.subjects]
               for j in range(dataset.p)]
    baseline = [np.hstack([np.ones((sub.n_obs, 1)), np.tile(sub.s, (sub.n_obs, 1))])
                for sub in dataset.subjects]
    winv = [inverse_covariance(wc, sub.n_obs) for sub in dataset.subjects]
    logdet = float(sum(log_det_covariance(wc, sub.n_obs) for sub in dataset.subjects))
    return Workspace(dataset, list(bases), wc, designs, baseline, winv,
                     [np.asarray(sub.y) for sub in dataset.subjects], logdet)

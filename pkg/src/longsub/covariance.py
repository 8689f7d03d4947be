"""Working covariance V_i = A_i^{1/2} R_i A_i^{1/2} with constant marginal variance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidRho

AR1 = "ar1"
EXCHANGEABLE = "exchangeable"
INDEPENDENCE = "independence"

_ALIASES = {
    "ar1": AR1, "ar": AR1, "ar(1)": AR1,
    "exchangeable": EXCHANGEABLE, "ex": EXCHANGEABLE, "exch": EXCHANGEABLE,
    "independence": INDEPENDENCE, "ind": INDEPENDENCE, "identity": INDEPENDENCE,
}


@dataclass(frozen=True)
class WorkingCovariance:
    structure: str = INDEPENDENCE
    rho: float = 0.0
    marginal_variance: float = 1.0

    def __post_init__(self):
        try:
            structure = _ALIASES[str(self.structure).lower()]
        except KeyError:
            raise ValueError(f"unknown correlation structure {self.structure!r}") from None
        object.__setattr__(self, "structure", structure)
        rho = float(self.rho)
        if structure == AR1 and not -1.0 < rho < 1.0:
            raise InvalidRho(f"AR(1) needs rho in (-1, 1), got {rho}")
        if structure == EXCHANGEABLE and not 0.0 <= rho < 1.0:
            raise InvalidRho(f"exchangeable needs rho in [0, 1), got {rho}")
        if structure == INDEPENDENCE:
            rho = 0.0
        object.__setattr__(self, "rho", rho)
        if not self.marginal_variance > 0:
            raise ValueError("marginal_variance must be positive")
        object.__setattr__(self, "marginal_variance", float(self.marginal_variance))

    def label(self) -> str:
        if self.structure == INDEPENDENCE:
            return "IND"
        tag = "AR" if self.structure == AR1 else "EX"
        return f"{tag}({self.rho:g})"


def _check_n(wc, n_i):
    if n_i < 1:
        raise ValueError("n_i must be at least 1")
    if wc.structure == EXCHANGEABLE and n_i > 1 and wc.rho <= -1.0 / (n_i - 1):
        raise InvalidRho(f"exchangeable rho={wc.rho} is not positive definite for n_i={n_i}")


def _readonly(a):
    a.setflags(write=False)
    return a


@lru_cache(maxsize=4096)
def _corr(structure, rho, n_i):
    if structure == AR1:
        idx = np.arange(n_i)
        return _readonly(rho ** np.abs(idx[:, None] - idx[None, :]).astype(float))
    if structure == EXCHANGEABLE:
        r = np.full((n_i, n_i), rho)
        np.fill_diagonal(r, 1.0)
        return _readonly(r)
    return _readonly(np.eye(n_i))


@lru_cache(maxsize=4096)
def _corr_inverse(structure, rho, n_i):
    if structure == AR1 and n_i > 1:
        # Tridiagonal precision of a stationary AR(1) correlation.
        inv = np.zeros((n_i, n_i))
        diag = np.full(n_i, 1.0 + rho * rho)
        diag[0] = diag[-1] = 1.0
        inv[np.diag_indices(n_i)] = diag
        off = np.arange(n_i - 1)
        inv[off, off + 1] = -rho
        inv[off + 1, off] = -rho
        return _readonly(inv / (1.0 - rho * rho))
    if structure == EXCHANGEABLE:
        # (1-rho) I + rho 11' inverted by Sherman-Morrison.
        c = rho / (1.0 + (n_i - 1) * rho)
        inv = (np.eye(n_i) - c * np.ones((n_i, n_i))) / (1.0 - rho)
        return _readonly(inv)
    return _readonly(np.eye(n_i))


def correlation_matrix(wc: WorkingCovariance, n_i: int) -> np.ndarray:
    _check_n(wc, n_i)
    return _corr(wc.structure, wc.rho, int(n_i))


def covariance_matrix(wc: WorkingCovariance, n_i: int) -> np.ndarray:
    return wc.marginal_variance * correlation_matrix(wc, n_i)


def inverse_covariance(wc: WorkingCovariance, n_i: int) -> np.ndarray:
    """Closed-form inverse of ``marginal_variance * R_i``."""
    _check_n(wc, n_i)
    inv = _corr_inverse(wc.structure, wc.rho, int(n_i))
    if wc.marginal_variance == 1.0:
        return inv
    return _readonly(inv / wc.marginal_variance)


def log_det_covariance(wc: WorkingCovariance, n_i: int) -> float:
    """log det(V_i), used by the Gaussian working likelihood."""
    _check_n(wc, n_i)
    rho = wc.rho
    if wc.structure == AR1:
        logdet = (n_i - 1) * math.log1p(-rho * rho)
    elif wc.structure == EXCHANGEABLE:
        logdet = (n_i - 1) * math.log1p(-rho) + math.log1p((n_i - 1) * rho)
    else:
        logdet = 0.0
    return logdet + n_i * math.log(wc.marginal_variance)

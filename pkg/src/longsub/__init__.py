"""Per-covariate subgroup detection for longitudinal panels with spline components and random effects."""

from .backfit import oracle_run, pursue, run
from .bspline import SplineBasis, SplineSpec, design_matrix, eval_basis, eval_component, make_basis
from .config import RunConfig
from .core import (BicRecord, FittedModel, LongitudinalDataset, SubgroupPartition, SubjectRecord,
                   canonicalize, validate)
from .covariance import WorkingCovariance
from .errors import LongsubError, NonConvergedWarning
from .initial_fit import pooled_fit
from .io import read_long_csv, write_results
from .kmeans import kmeans
from .metrics import accuracy, mse, mse_ratio, nmi, rand_index
from .model_selection import select_counts, select_m
from .simgen import ScenarioSpec, generate, oracle_fit

__all__ = [
    "BicRecord", "FittedModel", "LongitudinalDataset", "LongsubError", "NonConvergedWarning",
    "RunConfig", "ScenarioSpec", "SplineBasis", "SplineSpec", "SubgroupPartition",
    "SubjectRecord", "WorkingCovariance", "accuracy", "canonicalize", "design_matrix",
    "eval_basis", "eval_component", "generate", "kmeans", "make_basis", "mse", "mse_ratio",
    "nmi", "oracle_fit", "oracle_run", "pooled_fit", "pursue", "rand_index", "read_long_csv",
    "run", "select_counts", "select_m", "validate", "write_results",
]

"""Augmented self-expressive subspace clustering.

Unsupervised solvers over an augmented dictionary (l1, Frobenius and
nuclear-norm regularizers, full or kNN-restricted), a semi-supervised
variant with label propagation, spectral clustering, evaluation metrics,
geometric diagnostics and a synthetic data generator.
"""

__version__ = "0.1.0"

from .core import (
    AugmentedDictionary,
    CoefficientMatrix,
    DataMatrix,
    LabelState,
    Regularizer,
    SolverConfig,
    effective_lambda,
    normalize_columns,
)
from .errors import AugscError, ConvergenceWarning, DataError, NumericalError, UsageError
from .metrics import error_rate, nmi
from .semi import run_as_sc
from .solvers import solve_ak_sc, solve_self_expressive_full
from .spectral import spectral_cluster

__all__ = [
    "AugmentedDictionary",
    "AugscError",
    "CoefficientMatrix",
    "ConvergenceWarning",
    "DataError",
    "DataMatrix",
    "LabelState",
    "NumericalError",
    "Regularizer",
    "SolverConfig",
    "UsageError",
    "effective_lambda",
    "error_rate",
    "nmi",
    "normalize_columns",
    "run_as_sc",
    "solve_ak_sc",
    "solve_self_expressive_full",
    "spectral_cluster",
]

"""Shared domain types.

Everything is stored columns-as-samples: a data matrix is ``d x n`` and the
coefficient matrices index dictionary columns by row and original samples by
column.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, DegenerateGram, NearZeroColumn

NORM_FLOOR = 1e-12


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DataMatrix:
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise DataError(f"data matrix must be 2-D, got shape {v.shape}")
        if v.shape[0] < 1 or v.shape[1] < 2:
            raise DataError(f"need d >= 1 and n >= 2, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DataError("data matrix contains non-finite entries")
        if self.normalized:
            norms = np.linalg.norm(v, axis=0)
            if np.any(np.abs(norms - 1.0) > 1e-10):
                raise DataError("normalized flag set but columns are not unit norm")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


def normalize_columns(x: DataMatrix) -> DataMatrix:
    """Scale every column to unit l2 norm.

    Raises NearZeroColumn for columns whose norm is below 1e-12.
    """
    v = x.values
    norms = np.linalg.norm(v, axis=0)
    bad = np.flatnonzero(norms < NORM_FLOOR)
    if bad.size:
        raise NearZeroColumn(int(bad[0]), float(norms[bad[0]]))
    out = v / norms
    # a second pass removes the last-ulp drift so normalization is idempotent
    out = out / np.linalg.norm(out, axis=0)
    return DataMatrix(out, normalized=True)


def max_abs_coherence(values: np.ndarray) -> float:
    g = np.abs(values.T @ values)
    np.fill_diagonal(g, -np.inf)
    return float(g.max())


def effective_lambda(x: DataMatrix, mu_base: float) -> float:
    """Return ``mu_base / max_{i != j} |x_i^T x_j|``."""
    if mu_base <= 0:
        raise DataError("mu_base must be positive")
    m = max_abs_coherence(x.values)
    if m < 1e-12:
        raise DegenerateGram(f"maximum off-diagonal inner product is {m:.3e}")
    return mu_base / m


@dataclass(frozen=True)
class AugmentedDictionary:
    """Original columns followed by augmented ones, with provenance.

    ``parents`` is the binary ``n_tilde x n`` map S; ``omega[j]`` holds j and
    every column derived from j that must not represent j.
    """

    columns: np.ndarray
    n: int
    omega: tuple
    parents: np.ndarray
    strategy_tags: tuple = ()
    params: np.ndarray | None = None

    def __post_init__(self):
        cols = _frozen(self.columns)
        n_tilde = cols.shape[1]
        if self.n < 2 or self.n > n_tilde:
            raise DataError("invalid original sample count")
        s = _frozen(self.parents, dtype=bool)
        if s.shape != (n_tilde, self.n):
            raise DataError(f"parent map has shape {s.shape}, expected {(n_tilde, self.n)}")
        if s[: self.n].any():
            raise DataError("original columns cannot have parents")
        if n_tilde > self.n and not s[self.n :].any(axis=1).all():
            raise DataError("every augmented column needs at least one parent")
        if len(self.omega) != self.n:
            raise DataError("omega must have one entry per original sample")
        omega = tuple(_frozen(np.sort(np.asarray(o, dtype=np.intp)), dtype=np.intp) for o in self.omega)
        if len(self.strategy_tags) not in (0, n_tilde - self.n):
            raise DataError("one strategy tag per augmented column expected")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "parents", s)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "strategy_tags", tuple(self.strategy_tags))
        if self.params is not None:
            object.__setattr__(self, "params", _frozen(self.params))

    @property
    def n_tilde(self) -> int:
        return self.columns.shape[1]

    @property
    def originals(self) -> np.ndarray:
        return self.columns[:, : self.n]

    @classmethod
    def plain(cls, x: DataMatrix) -> "AugmentedDictionary":
        """Dictionary without augmentation (Omega(j) = {j})."""
        n = x.n
        return cls(
            columns=x.values,
            n=n,
            omega=tuple(np.array([j]) for j in range(n)),
            parents=np.zeros((n, n), dtype=bool),
        )


@dataclass(frozen=True)
class CoefficientMatrix:
    ctilde: np.ndarray
    cf: np.ndarray
    af: np.ndarray
    converged: bool = True
    residual: float = 0.0
    iterations: int = 0

    def __post_init__(self):
        for name in ("ctilde", "cf", "af"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


def labels_to_indicator(labels: Sequence[int], p: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    if labels.size and (labels.max() >= p or labels.min() < -1):
        raise DataError(f"labels must lie in {{-1, 0, .., {p - 1}}}")
    y = np.zeros((labels.size, p))
    idx = np.flatnonzero(labels >= 0)
    y[idx, labels[idx]] = 1.0
    return y


@dataclass(frozen=True)
class LabelState:
    """Given labels and soft label estimates.

    ``u`` is kept as the diagonal vector of the selector matrix; ``u_matrix``
    expands it when a dense matrix is wanted.
    """

    y: np.ndarray
    ytilde: np.ndarray
    u: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        y = _frozen(self.y)
        yt = _frozen(self.ytilde)
        n, p = y.shape
        if np.any(y.sum(axis=1) > 1) or np.any((y != 0) & (y != 1)):
            raise DataError("each row of y must hold at most one 1")
        if yt.shape[1] != p or not np.array_equal(yt[:n], y) or yt[n:].any():
            raise DataError("ytilde must be y zero-padded")
        u = _frozen(self.u, dtype=bool)
        if not np.array_equal(u, yt.any(axis=1)):
            raise DataError("u must select exactly the labeled rows")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "ytilde", yt)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "f", _frozen(self.f))

    @classmethod
    def from_labels(cls, labels, p: int, n_tilde: int | None = None) -> "LabelState":
        """Build from a label vector where -1 marks unlabeled samples."""
        y = labels_to_indicator(labels, p)
        n = y.shape[0]
        n_tilde = n if n_tilde is None else n_tilde
        yt = np.zeros((n_tilde, p))
        yt[:n] = y
        return cls(y=y, ytilde=yt, u=yt.any(axis=1), f=yt.copy())

    def with_f(self, f: np.ndarray) -> "LabelState":
        return LabelState(self.y, self.ytilde, self.u, f)

    def extend(self, n_tilde: int) -> "LabelState":
        return LabelState.from_labels(self.labels, self.p, n_tilde)

    @property
    def p(self) -> int:
        return self.y.shape[1]

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def labels(self) -> np.ndarray:
        """Label vector of the originals, -1 where unlabeled."""
        out = np.full(self.n, -1, dtype=int)
        rows, cols = np.nonzero(self.y)
        out[rows] = cols
        return out

    @property
    def u_matrix(self) -> np.ndarray:
        return np.diag(self.u.astype(float))


class Regularizer(str, enum.Enum):
    L1 = "L1"
    FRO = "FRO"
    NUC = "NUC"


@dataclass(frozen=True)
class SolverConfig:
    regularizer: Regularizer = Regularizer.L1
    mu_base: float = 50.0
    lambda2: float = 1.0
    gamma1: float = 1000.0
    gamma2: float = 1000.0
    k: int | str = "full"
    admm_eps: float = 2e-4
    admm_max_iter: int = 200
    admm_dual_tol: float | None = None
    outer_max_iter: int = 10
    outer_f_tol: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "regularizer", Regularizer(self.regularizer))
        if self.mu_base <= 0:
            raise DataError("mu_base must be positive")
        for name in ("lambda2", "gamma1", "gamma2"):
            if getattr(self, name) < 0:
                raise DataError(f"{name} must be nonnegative")
        if not (self.k == "full" or (isinstance(self.k, (int, np.integer)) and self.k >= 1)):
            raise DataError("k must be a positive integer or 'full'")
        if self.admm_eps <= 0 or self.outer_f_tol <= 0 or (self.admm_dual_tol is not None and self.admm_dual_tol <= 0):
            raise DataError("tolerances must be positive")
        if self.admm_max_iter < 1 or self.outer_max_iter < 1:
            raise DataError("iteration caps must be positive")

    @property
    def is_full(self) -> bool:
        return self.k == "full"

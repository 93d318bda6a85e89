"""Collapse of rectangular coefficients and normalized spectral clustering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from sklearn.cluster import KMeans

from .core import CoefficientMatrix
from .errors import DataError, EigenFailure

N_RESTARTS = 20


def collapse(ctilde: np.ndarray, omega) -> np.ndarray:
    """Fold ``ctilde`` (n_tilde x n) into ``C_f(i, j) = sum_{k in omega[i]} |ctilde[k, j]|``.

    Rows that belong to no Omega set (e.g. interpolated columns) do not
    contribute.
    """
    ctilde = np.asarray(ctilde, dtype=float)
    n = ctilde.shape[1]
    if len(omega) != n:
        raise DataError("omega must have one entry per column of ctilde")
    owner = np.full(ctilde.shape[0], -1, dtype=np.intp)
    for i, rows in enumerate(omega):
        owner[np.asarray(rows, dtype=np.intp)] = i
    keep = owner >= 0
    cf = np.zeros((n, n))
    np.add.at(cf, owner[keep], np.abs(ctilde[keep]))
    return cf


def affinity(cf: np.ndarray) -> np.ndarray:
    a = np.abs(cf)
    return a + a.T


def coefficient_matrix(ctilde, omega, converged=True, residual=0.0, iterations=0):
    cf = collapse(ctilde, omega)
    return CoefficientMatrix(
        ctilde=ctilde,
        cf=cf,
        af=affinity(cf),
        converged=converged,
        residual=residual,
        iterations=iterations,
    )


@dataclass(frozen=True)
class ClusteringResult:
    labels: np.ndarray
    embedding: np.ndarray
    seed: int
    isolated: np.ndarray  # indices of zero-degree nodes


def spectral_embedding(af: np.ndarray, p: int):
    af = np.asarray(af, dtype=float)
    if af.ndim != 2 or af.shape[0] != af.shape[1]:
        raise DataError("affinity must be square")
    if not np.allclose(af, af.T, rtol=0, atol=1e-12 * max(1.0, np.abs(af).max())):
        raise DataError("affinity must be symmetric")
    if np.any(af < 0):
        raise DataError("affinity must be nonnegative")
    if p < 2 or p > af.shape[0]:
        raise DataError("need 2 <= p <= n")
    deg = af.sum(axis=1)
    isolated = np.flatnonzero(deg <= 0)
    inv_sqrt = np.zeros_like(deg)
    pos = deg > 0
    inv_sqrt[pos] = 1.0 / np.sqrt(deg[pos])
    # smallest eigenvalues of I - D^-1/2 A D^-1/2 = largest of D^-1/2 A D^-1/2
    m = inv_sqrt[:, None] * af * inv_sqrt[None, :]
    m = 0.5 * (m + m.T)
    n = af.shape[0]
    try:
        _, vecs = linalg.eigh(m, subset_by_index=[n - p, n - 1])
    except (linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(str(exc)) from exc
    emb = vecs[:, ::-1]
    norms = np.linalg.norm(emb, axis=1)
    ok = norms > 1e-12
    emb[ok] /= norms[ok, None]
    emb[~ok] = 0.0
    return emb, isolated


def spectral_cluster(af: np.ndarray, p: int, seed: int = 0) -> ClusteringResult:
    """Ng-Jordan-Weiss spectral clustering of a symmetric nonnegative affinity.

    Zero-degree nodes get a zero embedding row and are reported in
    ``isolated``; k-means places them wherever the nearest center is.
    """
    emb, isolated = spectral_embedding(af, p)
    km = KMeans(n_clusters=p, init="k-means++", n_init=N_RESTARTS, random_state=seed)
    labels = km.fit_predict(emb)
    return ClusteringResult(labels=labels.astype(int), embedding=emb, seed=seed, isolated=isolated)

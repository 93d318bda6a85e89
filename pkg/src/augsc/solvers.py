"""Self-expressive solvers for the unsupervised programs.

Three regularizers are supported (``L1`` sparse, ``FRO`` least squares,
``NUC`` low rank), each either over the whole augmented dictionary or over the
k nearest neighbours of every sample.

The ADMM loops in this module are shared with :mod:`augsc.semi`. Coefficients
are kept in a *compact* layout of shape ``(rows, n)``: with the full dictionary
``rows == n_tilde`` and row ``i`` is dictionary column ``i``; with kNN
``rows == k`` and row ``r`` of column ``j`` is dictionary column ``psi[r, j]``.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy import linalg

from .core import AugmentedDictionary, CoefficientMatrix, DataMatrix, Regularizer, SolverConfig, effective_lambda
from .errors import ConvergenceWarning, DataError, KTooLarge, NoConvergence, SingularSystem, SvdFailure
from .spectral import coefficient_matrix

_CHUNK = 256


def soft_threshold(v, t):
    """Entrywise ``max(0, |v| - t) * sign(v)``; ``t`` may be an array."""
    v = np.asarray(v, dtype=float)
    out = np.sign(v) * np.maximum(np.abs(v) - t, 0.0)
    return float(out) if out.ndim == 0 else out


def svt(m, t: float) -> np.ndarray:
    """Singular value thresholding, the prox of ``t * ||.||_*``."""
    if t < 0:
        raise DataError("threshold must be nonnegative")
    try:
        u, s, vt = np.linalg.svd(np.asarray(m, dtype=float), full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdFailure(str(exc)) from exc
    s = s - t
    r = int(np.count_nonzero(s > 0))
    return (u[:, :r] * s[:r]) @ vt[:r]


def _sq_distances(cols: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, shape ``(targets, cols)``."""
    d = (
        np.einsum("ij,ij->j", targets, targets)[:, None]
        + np.einsum("ij,ij->j", cols, cols)[None, :]
        - 2.0 * (targets.T @ cols)
    )
    return np.maximum(d, 0.0)


def _check_k(dic: AugmentedDictionary, k: int):
    worst = max(len(o) for o in dic.omega)
    if k > dic.n_tilde - worst:
        raise KTooLarge(f"k={k} exceeds the {dic.n_tilde - worst} admissible neighbours")


def knn_select(dic: AugmentedDictionary, j: int, k: int) -> np.ndarray:
    """Indices of the k dictionary columns closest to sample j, Omega(j) excluded.

    Ties go to the smaller index.
    """
    if k < 1 or k > dic.n_tilde - len(dic.omega[j]):
        raise KTooLarge(f"k={k} is not admissible for sample {j}")
    dist = _sq_distances(dic.columns, dic.columns[:, [j]])[0]
    dist[dic.omega[j]] = np.inf
    return np.argsort(dist, kind="stable")[:k]


def knn_table(dic: AugmentedDictionary, k: int) -> np.ndarray:
    """kNN indices for every original sample, shape ``(k, n)``."""
    _check_k(dic, k)
    psi = np.empty((k, dic.n), dtype=np.intp)
    for start in range(0, dic.n, _CHUNK):
        stop = min(start + _CHUNK, dic.n)
        dist = _sq_distances(dic.columns, dic.columns[:, start:stop])
        for r, j in enumerate(range(start, stop)):
            dist[r, dic.omega[j]] = np.inf
        psi[:, start:stop] = np.argsort(dist, axis=1, kind="stable")[:, :k].T
    return psi


class Ridge:
    """Column-wise solver for ``(lam D_j^T D_j + shift I) z_j = r_j``.

    ``D_j`` is the whole dictionary when ``psi`` is None, otherwise the
    columns ``psi[:, j]``. The factorization is computed once and reused.
    """

    def __init__(self, cols: np.ndarray, x: np.ndarray, psi, lam: float, shift: float):
        self.psi = psi
        self.shift = shift
        self.cols = cols
        if shift <= 0:
            raise SingularSystem("ridge shift must be positive")
        if psi is None:
            d, nt = cols.shape
            try:
                if d < nt:
                    # push-through form: only a d x d system is factored
                    self._woodbury = True
                    self._factor = linalg.cho_factor((shift / lam) * np.eye(d) + cols @ cols.T)
                else:
                    self._woodbury = False
                    self._factor = linalg.cho_factor(lam * (cols.T @ cols) + shift * np.eye(nt))
            except linalg.LinAlgError as exc:
                raise SingularSystem(str(exc)) from exc
            self.rhs0 = lam * (cols.T @ x)
        else:
            k, n = psi.shape
            self.minv = np.empty((n, k, k))
            self.rhs0 = np.empty((k, n))
            eye = np.eye(k)
            for start in range(0, n, _CHUNK):
                sl = slice(start, min(start + _CHUNK, n))
                dj = cols[:, psi[:, sl]]  # (d, k, m)
                g = np.einsum("dkj,dlj->jkl", dj, dj)
                self.rhs0[:, sl] = lam * np.einsum("dkj,dj->kj", dj, x[:, sl])
                try:
                    chol = np.linalg.cholesky(lam * g + shift * eye)
                except np.linalg.LinAlgError as exc:
                    raise SingularSystem(str(exc)) from exc
                linv = np.linalg.inv(chol)
                self.minv[sl] = np.einsum("jki,jkl->jil", linv, linv)

    def apply(self, r: np.ndarray) -> np.ndarray:
        if self.psi is None:
            if self._woodbury:
                return (r - self.cols.T @ linalg.cho_solve(self._factor, self.cols @ r)) / self.shift
            return linalg.cho_solve(self._factor, r)
        return np.einsum("jkl,lj->kj", self.minv, r)


class Layout:
    """Maps between the compact ``(rows, n)`` layout and dense ``(n_tilde, n)``."""

    def __init__(self, n_tilde: int, n: int, psi=None):
        self.n_tilde = n_tilde
        self.n = n
        self.psi = psi
        self.rows = n_tilde if psi is None else psi.shape[0]
        self._cols = np.broadcast_to(np.arange(n), (self.rows, n))

    def gather(self, dense: np.ndarray) -> np.ndarray:
        if self.psi is None:
            return dense
        return dense[self.psi, self._cols]

    def scatter(self, compact: np.ndarray) -> np.ndarray:
        if self.psi is None:
            return compact.copy()
        out = np.zeros((self.n_tilde, self.n))
        out[self.psi, self._cols] = compact
        return out

    def mask(self, sets) -> np.ndarray:
        """Compact boolean mask of the per-column index sets."""
        m = np.zeros((self.n_tilde, self.n), dtype=bool)
        for j, rows in enumerate(sets):
            m[np.asarray(rows, dtype=np.intp), j] = True
        return self.gather(m)


class AdmmResult:
    def __init__(self, coef, converged, residual, iterations):
        self.coef = coef
        self.converged = converged
        self.residual = residual
        self.iterations = iterations


def _flag(converged, residual, iterations, strict):
    if converged:
        return
    if strict:
        raise NoConvergence(residual, iterations)
    warnings.warn(str(NoConvergence(residual, iterations)), ConvergenceWarning, stacklevel=3)


def threshold_admm(ridge: Ridge, weights, mask, rho, eps, max_iter, strict=False, dual_tol=None):
    """ADMM with a least-squares step and a weighted soft-threshold step.

    Returns the thresholded variable, which is exactly zero on ``mask``.
    Iteration stops once ``||A - C||_F^2 <= eps`` over the whole matrix,
    also when the columns are independent kNN problems. A small primal
    residual alone can occur transiently far from the optimum, so
    ``dual_tol`` optionally also requires the squared change of the
    thresholded variable between iterations to fall below it.
    """
    rows, n = ridge.rhs0.shape
    weights = np.broadcast_to(np.asarray(weights, dtype=float), (rows, n))
    thr = weights / rho
    z0 = ridge.apply(ridge.rhs0)
    a = np.zeros((rows, n))
    delta = np.zeros((rows, n))
    best, best_res, res, it = a, np.inf, np.inf, 0
    for it in range(1, max_iter + 1):
        z = z0 + ridge.apply(rho * a - delta)
        a_prev = a
        a = soft_threshold(z + delta / rho, thr)
        a[mask] = 0.0
        diff = z - a
        delta += rho * diff
        res = float(np.sum(diff * diff))
        step = float(np.sum((a - a_prev) ** 2))
        if res < best_res:
            best, best_res = a, res
        if res <= eps and (dual_tol is None or step <= dual_tol):
            return AdmmResult(a, True, res, it)
    _flag(False, best_res, it, strict)
    return AdmmResult(best, False, best_res, it)


def svt_admm(ridge: Ridge, layout: Layout, rho, eps, max_iter, strict=False, dual_tol=None):
    """Low-rank ADMM with a support-restricted least-squares step.

    The least-squares variable lives on each column's support; the other
    variable is its singular-value-thresholded copy. The support-restricted
    variable is returned so rows outside the support are exactly zero.
    """
    rows, n = ridge.rhs0.shape
    z0 = ridge.apply(ridge.rhs0)
    ct = np.zeros((layout.n_tilde, n))
    delta = np.zeros((layout.n_tilde, n))
    best, best_res, res, it = np.zeros((layout.n_tilde, n)), np.inf, np.inf, 0
    for it in range(1, max_iter + 1):
        z = z0 + ridge.apply(rho * layout.gather(ct) - layout.gather(delta))
        zd = layout.scatter(z)
        ct_prev = ct
        ct = svt(zd + delta / rho, 1.0 / rho)
        diff = zd - ct
        delta += rho * diff
        res = float(np.sum(diff * diff))
        step = float(np.sum((ct - ct_prev) ** 2))
        if res < best_res:
            best, best_res = zd, res
        if res <= eps and (dual_tol is None or step <= dual_tol):
            return AdmmResult(zd, True, res, it)
    _flag(False, best_res, it, strict)
    return AdmmResult(best, False, best_res, it)


def split_svt_admm(ridge: Ridge, layout: Layout, weights, mask, rho, eps, max_iter, strict=False, dual_tol=None):
    """Low-rank ADMM with two auxiliary copies.

    Variables: ``c`` (low rank, dense), ``z`` (least squares on the support)
    and ``a`` (weighted soft-threshold of ``z`` with ``mask`` zeroed). ``ridge``
    must carry shift ``2 * rho``. Returns ``a`` in dense layout.
    """
    rows, n = ridge.rhs0.shape
    weights = np.broadcast_to(np.asarray(weights, dtype=float), (rows, n))
    thr = weights / rho
    z0 = ridge.apply(ridge.rhs0)
    zd = np.zeros((layout.n_tilde, n))
    a = np.zeros((rows, n))
    d1 = np.zeros((layout.n_tilde, n))
    d2 = np.zeros((rows, n))
    best, best_res, res, it = np.zeros((layout.n_tilde, n)), np.inf, np.inf, 0
    for it in range(1, max_iter + 1):
        c = svt(zd - d1 / rho, 1.0 / rho)
        z = z0 + ridge.apply(rho * layout.gather(c) + rho * a + layout.gather(d1) + d2)
        zd = layout.scatter(z)
        a_prev = a
        a = soft_threshold(z - d2 / rho, thr)
        a[mask] = 0.0
        r1 = c - zd
        r2 = a - z
        d1 += rho * r1
        d2 += rho * r2
        res = max(float(np.sum(r1 * r1)), float(np.sum(r2 * r2)))
        step = float(np.sum((a - a_prev) ** 2))
        if res < best_res:
            best, best_res = layout.scatter(a), res
        if res <= eps and (dual_tol is None or step <= dual_tol):
            return AdmmResult(layout.scatter(a), True, res, it)
    _flag(False, best_res, it, strict)
    return AdmmResult(best, False, best_res, it)


def ridge_columns(cols: np.ndarray, x: np.ndarray, supports, lam: float, shift: float) -> np.ndarray:
    """Closed-form ``(lam D^T D + shift I)^-1 lam D^T x`` for each column.

    ``supports[j]`` lists the dictionary rows allowed for column j; the
    result is dense ``(n_tilde, n)`` and zero elsewhere.
    """
    nt = cols.shape[1]
    out = np.zeros((nt, x.shape[1]))
    for j, rows in enumerate(supports):
        d = cols[:, rows]
        try:
            if d.shape[0] < d.shape[1]:
                fac = linalg.cho_factor((shift / lam) * np.eye(d.shape[0]) + d @ d.T)
                out[rows, j] = d.T @ linalg.cho_solve(fac, x[:, j])
            else:
                fac = linalg.cho_factor(lam * (d.T @ d) + shift * np.eye(d.shape[1]))
                out[rows, j] = linalg.cho_solve(fac, lam * (d.T @ x[:, j]))
        except linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from exc
    return out


def _check_inputs(x: DataMatrix, dic: AugmentedDictionary):
    if x.n != dic.n or x.d != dic.columns.shape[0]:
        raise DataError("data matrix and dictionary disagree in shape")
    if not np.allclose(dic.originals, x.values, rtol=0, atol=1e-12):
        raise DataError("dictionary must start with the data columns")


def solve_self_expressive_full(
    x: DataMatrix,
    dic: AugmentedDictionary,
    cfg: SolverConfig,
    exclusions=None,
    strict: bool = False,
) -> CoefficientMatrix:
    """Minimize ``R(C) + lam/2 ||X - X~ C||_F^2`` with ``C(excl_j, j) = 0``.

    ``exclusions`` defaults to the Omega sets of ``dic``. ADMM stops at
    ``||A - C||_F^2 <= cfg.admm_eps`` or the iteration cap; hitting the cap
    emits a ConvergenceWarning (or raises NoConvergence when ``strict``).
    """
    _check_inputs(x, dic)
    excl = dic.omega if exclusions is None else exclusions
    lam = effective_lambda(x, cfg.mu_base)
    rho = lam
    cols, xv = dic.columns, x.values
    layout = Layout(dic.n_tilde, dic.n)
    if cfg.regularizer is Regularizer.FRO:
        allowed = []
        for j in range(dic.n):
            keep = np.ones(dic.n_tilde, dtype=bool)
            keep[np.asarray(excl[j], dtype=np.intp)] = False
            allowed.append(np.flatnonzero(keep))
        ct = ridge_columns(cols, xv, allowed, lam, 2.0)
        return coefficient_matrix(ct, dic.omega)
    mask = layout.mask(excl)
    if cfg.regularizer is Regularizer.L1:
        ridge = Ridge(cols, xv, None, lam, rho)
        res = threshold_admm(
            ridge, 1.0, mask, rho, cfg.admm_eps, cfg.admm_max_iter, strict=strict, dual_tol=cfg.admm_dual_tol
        )
    else:
        ridge = Ridge(cols, xv, None, lam, 2.0 * rho)
        res = split_svt_admm(
            ridge, layout, 0.0, mask, rho, cfg.admm_eps, cfg.admm_max_iter, strict=strict, dual_tol=cfg.admm_dual_tol
        )
    return coefficient_matrix(res.coef, dic.omega, res.converged, res.residual, res.iterations)


def solve_ak_sc(
    x: DataMatrix,
    dic: AugmentedDictionary,
    cfg: SolverConfig,
    strict: bool = False,
) -> CoefficientMatrix:
    """kNN-restricted solvers (Ak-SSC, Ak-LSR, Ak-LRR).

    Each sample is coded over its ``cfg.k`` nearest dictionary columns outside
    Omega(j). ``cfg.k == "full"`` uses every admissible column.
    """
    _check_inputs(x, dic)
    if cfg.is_full:
        k = dic.n_tilde - max(len(o) for o in dic.omega)
    else:
        k = int(cfg.k)
    psi = knn_table(dic, k)
    lam = effective_lambda(x, cfg.mu_base)
    rho = lam
    cols, xv = dic.columns, x.values
    layout = Layout(dic.n_tilde, dic.n, psi)
    if cfg.regularizer is Regularizer.FRO:
        ridge = Ridge(cols, xv, psi, lam, 1.0)
        ct = layout.scatter(ridge.apply(ridge.rhs0))
        return coefficient_matrix(ct, dic.omega)
    if cfg.regularizer is Regularizer.L1:
        ridge = Ridge(cols, xv, psi, lam, rho)
        mask = np.zeros((k, dic.n), dtype=bool)
        res = threshold_admm(
            ridge, 1.0, mask, rho, cfg.admm_eps, cfg.admm_max_iter, strict=strict, dual_tol=cfg.admm_dual_tol
        )
        ct = layout.scatter(res.coef)
    else:
        ridge = Ridge(cols, xv, psi, lam, rho)
        res = svt_admm(ridge, layout, rho, cfg.admm_eps, cfg.admm_max_iter, strict=strict, dual_tol=cfg.admm_dual_tol)
        ct = res.coef
    return coefficient_matrix(ct, dic.omega, res.converged, res.residual, res.iterations)

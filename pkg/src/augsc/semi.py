"""Semi-supervised subspace clustering with label propagation.

The outer loop alternates two blocks. With the soft labels ``F`` fixed, the
coefficients are re-solved with a label-consistency penalty that raises the
shrinkage on links between samples whose labels disagree. With the
coefficients fixed, ``F`` solves the propagation system

    (L_A + gamma1 U + gamma2 L_S) F = gamma1 U Y~

whose matrix is a Stieltjes matrix, so every row of ``F`` is a probability
vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.sparse.csgraph import connected_components

from .augment import cannot_link_sets
from .core import AugmentedDictionary, CoefficientMatrix, DataMatrix, LabelState, Regularizer, SolverConfig, effective_lambda
from .errors import DataError, SingularPropagation
from .metrics import error_rate
from .solvers import Layout, Ridge, _check_inputs, knn_table, split_svt_admm, threshold_admm
from .spectral import coefficient_matrix


@dataclass(frozen=True)
class PropagationMatrices:
    a_tilde: np.ndarray
    s_tilde: np.ndarray
    l_a: np.ndarray
    l_s: np.ndarray


def _square_extension(block: np.ndarray, top_left: np.ndarray) -> np.ndarray:
    """``[[top_left, B^T/2], [B/2, 0]]`` for the augmented rows ``B``."""
    n = top_left.shape[0]
    m = block.shape[0]
    out = np.zeros((n + m, n + m))
    out[:n, :n] = top_left
    out[n:, :n] = 0.5 * block
    out[:n, n:] = 0.5 * block.T
    return out


def laplacian(w: np.ndarray) -> np.ndarray:
    lap = -w.copy()
    np.fill_diagonal(lap, 0.0)
    np.fill_diagonal(lap, -lap.sum(axis=1))
    return lap


def propagation_matrices(ctilde: np.ndarray, parents: np.ndarray) -> PropagationMatrices:
    """Square graphs over all ``n_tilde`` columns from C~ and the parent map S.

    The original-by-original block of C~ is replaced by its symmetric part
    so that the graph is undirected; this leaves the label-smoothness
    penalty unchanged.
    """
    c = np.abs(np.asarray(ctilde, dtype=float))
    s = np.asarray(parents, dtype=float)
    n = c.shape[1]
    if s.shape != c.shape:
        raise DataError("coefficient matrix and parent map disagree in shape")
    top = 0.5 * (c[:n] + c[:n].T)
    np.fill_diagonal(top, 0.0)
    a_t = _square_extension(c[n:], top)
    s_t = _square_extension(s[n:], 0.5 * (s[:n] + s[:n].T))
    return PropagationMatrices(a_t, s_t, laplacian(a_t), laplacian(s_t))


@dataclass(frozen=True)
class FUpdate:
    f: np.ndarray
    degenerate_rows: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))


def update_f(prop: PropagationMatrices, u, ytilde, gamma1: float, gamma2: float) -> FUpdate:
    """Solve the propagation system for the soft labels ``F``.

    Rows belonging to graph components with no labeled sample cannot be
    determined; they are set to the uniform distribution and reported in
    ``degenerate_rows``.
    """
    u = np.asarray(u)
    if u.ndim == 2:
        u = np.diag(u)
    u = u.astype(bool)
    yt = np.asarray(ytilde, dtype=float)
    nt, p = yt.shape
    if gamma1 <= 0:
        raise SingularPropagation("gamma1 must be positive")
    if not u.any():
        raise SingularPropagation("at least one labeled sample is required")

    g = prop.l_a + gamma1 * np.diag(u.astype(float)) + gamma2 * prop.l_s
    off = g - np.diag(np.diag(g))
    scale = max(1.0, np.abs(g).max())
    if not np.allclose(g, g.T, rtol=0, atol=1e-12 * scale):
        raise SingularPropagation("propagation matrix is not symmetric")
    if np.any(off > 1e-12 * scale):
        raise SingularPropagation("propagation matrix has positive off-diagonal entries")
    if np.any(np.diag(g)[u] <= 0):
        raise SingularPropagation("labeled rows need a positive diagonal")

    adj = (prop.a_tilde != 0) | ((prop.s_tilde != 0) & (gamma2 > 0))
    _, comp = connected_components(adj, directed=False)
    labeled_comps = np.unique(comp[u])
    solvable = np.isin(comp, labeled_comps)
    f = np.full((nt, p), 1.0 / p)
    idx = np.flatnonzero(solvable)
    rhs = gamma1 * (u[idx, None] * yt[idx])
    try:
        fac = linalg.cho_factor(g[np.ix_(idx, idx)])
    except linalg.LinAlgError as exc:
        raise SingularPropagation(str(exc)) from exc
    f[idx] = linalg.cho_solve(fac, rhs)
    return FUpdate(f, np.flatnonzero(~solvable))


def label_weights(f: np.ndarray, n: int, lambda2: float, base: float) -> np.ndarray:
    """``base + lambda2 * ||F(i,:) - F(j,:)||^2`` for i < n_tilde, j < n."""
    f = np.asarray(f, dtype=float)
    sq = np.einsum("ij,ij->i", f, f)
    d2 = sq[:, None] + sq[None, :n] - 2.0 * (f @ f[:n].T)
    return base + lambda2 * np.maximum(d2, 0.0)


def update_c_semisupervised(
    x: DataMatrix,
    dic: AugmentedDictionary,
    f: np.ndarray,
    cfg: SolverConfig,
    phi,
    strict: bool = False,
) -> CoefficientMatrix:
    """Coefficient block of the alternating scheme with ``F`` held fixed.

    Links in ``phi[j]`` are forced to zero. The L1 variant shrinks entry
    (i, j) by ``1 + lambda2 ||F_i - F_j||^2``; FRO and NUC use the
    label term ``lambda2 ||F_i - F_j||^2`` alone.
    """
    _check_inputs(x, dic)
    f = np.asarray(f, dtype=float)
    if f.shape[0] != dic.n_tilde:
        raise DataError("F must have one row per dictionary column")
    if len(phi) != dic.n:
        raise DataError("one cannot-link set per sample expected")
    lam = effective_lambda(x, cfg.mu_base)
    rho = lam
    psi = None if cfg.is_full else knn_table(dic, int(cfg.k))
    layout = Layout(dic.n_tilde, dic.n, psi)
    mask = layout.mask(phi)
    cols, xv = dic.columns, x.values
    reg = cfg.regularizer
    base = 1.0 if reg is Regularizer.L1 else 0.0
    w = layout.gather(label_weights(f, dic.n, cfg.lambda2, base))
    if reg is Regularizer.NUC:
        ridge = Ridge(cols, xv, psi, lam, 2.0 * rho)
        res = split_svt_admm(
            ridge, layout, w, mask, rho, cfg.admm_eps, cfg.admm_max_iter, strict=strict, dual_tol=cfg.admm_dual_tol
        )
        ct = res.coef
    else:
        shift = rho if reg is Regularizer.L1 else 2.0 + rho
        ridge = Ridge(cols, xv, psi, lam, shift)
        res = threshold_admm(
            ridge, w, mask, rho, cfg.admm_eps, cfg.admm_max_iter, strict=strict, dual_tol=cfg.admm_dual_tol
        )
        ct = layout.scatter(res.coef)
    return coefficient_matrix(ct, dic.omega, res.converged, res.residual, res.iterations)


def assign_labels(f: np.ndarray, n: int) -> np.ndarray:
    """Row-wise argmax of the first n rows; ties go to the smallest index."""
    return np.argmax(np.asarray(f)[:n], axis=1)


@dataclass
class IterationRecord:
    iteration: int
    f_change: float
    c_change: float
    err: float | None
    admm_converged: bool
    admm_residual: float
    admm_iterations: int


@dataclass
class SemiResult:
    coef: CoefficientMatrix
    f: np.ndarray
    labels: np.ndarray
    trace: list
    first_coef: CoefficientMatrix
    degenerate_rows: np.ndarray
    converged: bool


def _rel_change(new, old) -> float:
    den = np.linalg.norm(old)
    if den == 0:
        return float("nan")
    return float(np.linalg.norm(new - old) / den)


def run_as_sc(
    x: DataMatrix,
    dic: AugmentedDictionary,
    labels: LabelState,
    cfg: SolverConfig,
    truth=None,
    strict: bool = False,
) -> SemiResult:
    """Alternate coefficient and label updates until F settles.

    The first coefficient solve uses a zero ``F`` (no label-consistency
    weighting); the given labels enter through the cannot-link sets and the
    propagation step. The loop stops when the relative change of ``F`` drops
    below ``cfg.outer_f_tol`` or after ``cfg.outer_max_iter`` rounds. If no
    sample is labeled, a single label-free solve is returned with a uniform
    ``F`` and every row reported as degenerate.

    ``truth`` (optional) adds the per-iteration error rate to the trace.
    """
    if labels.n != dic.n:
        raise DataError("label state and dictionary disagree in size")
    ls = labels.extend(dic.n_tilde)
    phi = cannot_link_sets(dic, labels)
    p = ls.p
    f_for_c = np.zeros((dic.n_tilde, p))
    f_prev = ls.ytilde.copy()
    c_prev = np.zeros((dic.n_tilde, dic.n))
    trace = []
    first = None
    converged = False
    degenerate = np.empty(0, dtype=np.intp)
    coef = None
    f = None

    for it in range(1, cfg.outer_max_iter + 1):
        coef = update_c_semisupervised(x, dic, f_for_c, cfg, phi, strict=strict)
        if first is None:
            first = coef
        if not ls.u.any():
            f = np.full((dic.n_tilde, p), 1.0 / p)
            degenerate = np.arange(dic.n_tilde)
            trace.append(
                IterationRecord(it, float("nan"), float("nan"), None, coef.converged, coef.residual, coef.iterations)
            )
            break
        prop = propagation_matrices(coef.ctilde, dic.parents)
        upd = update_f(prop, ls.u, ls.ytilde, cfg.gamma1, cfg.gamma2)
        f, degenerate = upd.f, upd.degenerate_rows
        pred = assign_labels(f, dic.n)
        err = None if truth is None else error_rate(truth, pred)
        df = _rel_change(f, f_prev)
        dc = _rel_change(coef.ctilde, c_prev)
        trace.append(IterationRecord(it, df, dc, err, coef.converged, coef.residual, coef.iterations))
        f_prev, c_prev, f_for_c = f, coef.ctilde, f
        if df < cfg.outer_f_tol:
            converged = True
            break

    return SemiResult(
        coef=coef,
        f=f,
        labels=assign_labels(f, dic.n),
        trace=trace,
        first_coef=first,
        degenerate_rows=degenerate,
        converged=converged,
    )

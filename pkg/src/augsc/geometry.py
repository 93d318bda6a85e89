"""Desk-scale geometry of the subspace-preserving condition.

A sample ``x`` of subspace ``l`` gets a subspace-preserving l1 representation
when its incoherence with the other subspaces is below the inradius of the
symmetrized hull of the remaining samples of its own subspace. Both
quantities are computed here by brute force in the subspace coordinates,
so the module refuses inputs beyond ``MAX_DIM`` dimensions or ``MAX_POINTS``
points.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product

import numpy as np
from scipy.optimize import linprog

from .core import DataMatrix
from .errors import DataError, DegenerateHull, UnboundedDual

MAX_DIM = 4
MAX_POINTS = 15
_FEAS_TOL = 1e-9
_RANK_TOL = 1e-10


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis ``U`` (d x d_l) of a linear subspace."""

    basis: np.ndarray

    def __post_init__(self):
        u = np.array(self.basis, dtype=float)
        if u.ndim != 2 or u.shape[1] < 1 or u.shape[1] > u.shape[0]:
            raise DataError("basis must be d x d_l with 1 <= d_l <= d")
        if not np.allclose(u.T @ u, np.eye(u.shape[1]), rtol=0, atol=1e-10):
            raise DataError("basis columns are not orthonormal")
        u.setflags(write=False)
        object.__setattr__(self, "basis", u)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def from_samples(cls, points: np.ndarray, tol: float = 1e-8) -> "SubspaceBasis":
        """Orthonormal basis of the span of ``points`` (columns)."""
        u, s, _ = np.linalg.svd(np.asarray(points, dtype=float), full_matrices=False)
        if s.size == 0 or s[0] == 0:
            raise DegenerateHull("points span only the origin")
        return cls(u[:, s > tol * s[0]])


def _check_size(dim: int, m: int):
    if dim > MAX_DIM:
        raise DataError(f"brute-force geometry is limited to {MAX_DIM} dimensions, got {dim}")
    if m > MAX_POINTS:
        raise DataError(f"brute-force geometry is limited to {MAX_POINTS} points, got {m}")


def polar_vertices(points: np.ndarray, symmetric: bool = True) -> np.ndarray:
    """Vertices of ``{w : P^T w <= 1}`` (or ``|P^T w| <= 1`` when symmetric).

    Every choice of ``dim`` constraints (with signs in the symmetric case)
    is solved as an equality system; the nonsingular, feasible solutions are
    returned as rows, duplicates removed.
    """
    p = np.asarray(points, dtype=float)
    dim, m = p.shape
    _check_size(dim, m)
    if np.linalg.matrix_rank(p, tol=_RANK_TOL) < dim:
        raise DegenerateHull("points do not span the space")
    subsets = np.array(list(combinations(range(m), dim)), dtype=np.intp)
    signs = np.array(list(product((1.0, -1.0), repeat=dim))) if symmetric else np.ones((1, dim))
    mats = p.T[subsets]  # (S, dim, dim)
    ok = np.abs(np.linalg.det(mats)) > _RANK_TOL
    mats = mats[ok]
    sols = np.linalg.solve(mats[:, None], np.broadcast_to(signs, (mats.shape[0],) + signs.shape)[..., None])
    cand = sols[..., 0].reshape(-1, dim)
    vals = cand @ p
    bound = np.abs(vals) if symmetric else vals
    feas = cand[np.all(bound <= 1.0 + _FEAS_TOL, axis=1)]
    if feas.size == 0:
        return feas
    return np.unique(np.round(feas, 12), axis=0)


def _polar_bounded(p: np.ndarray) -> bool:
    """True when ``{w : P^T w <= 1}`` is bounded (origin interior to the hull)."""
    dim = p.shape[0]
    for k in range(dim):
        for sgn in (1.0, -1.0):
            c = np.zeros(dim)
            c[k] = -sgn
            res = linprog(c, A_ub=p.T, b_ub=np.ones(p.shape[1]), bounds=[(None, None)] * dim, method="highs")
            if res.status != 0:
                return False
    return True


def inradius(points: np.ndarray, symmetric: bool = True) -> float:
    """Radius of the largest origin-centred ball inside the hull of ``points``.

    ``symmetric=True`` uses ``conv(+-points)``. The radius equals one over
    the largest norm among the polar vertices. For a one-sided hull that
    does not contain the origin in its interior the polar is unbounded and
    0 is returned.
    """
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] < p.shape[0]:
        raise DegenerateHull("need at least as many points as dimensions")
    if not symmetric and not _polar_bounded(p):
        return 0.0
    verts = polar_vertices(p, symmetric)
    if verts.size == 0:
        raise DegenerateHull("polar polytope has no vertices")
    return float(1.0 / np.linalg.norm(verts, axis=1).max())


def _dual_lp(a_mat: np.ndarray, target: np.ndarray) -> float:
    dim, m = a_mat.shape
    res = linprog(
        -target,
        A_ub=np.vstack([a_mat.T, -a_mat.T]),
        b_ub=np.ones(2 * m),
        bounds=[(None, None)] * dim,
        method="highs",
    )
    if res.status == 3:
        raise UnboundedDual("dual objective is unbounded; samples do not span the target")
    if res.status != 0:
        raise UnboundedDual(f"dual LP failed: {res.message}")
    return float(-res.fun)


def dual_point(projected_dict: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Minimum-norm maximizer of ``w^T a`` subject to ``||A^T w||_inf <= 1``.

    The optimal value comes from a linear program. The minimum-norm point of
    the optimal face lies in the relative interior of one of its faces, so
    it is the least-squares solution of some set of active constraints; all
    such sets of at most ``dim - 1`` signed constraints (plus the pinned
    objective) are tried and the smallest feasible solution kept.
    """
    a_mat = np.asarray(projected_dict, dtype=float)
    a = np.asarray(target, dtype=float).ravel()
    if a_mat.ndim != 2 or a_mat.shape[0] != a.size:
        raise DataError("target length must match the dictionary rows")
    dim, m = a_mat.shape
    _check_size(dim, m)
    if np.linalg.norm(a) == 0:
        raise DataError("target must be nonzero")
    val = _dual_lp(a_mat, a)
    scale = max(1.0, abs(val))

    best, best_norm = None, np.inf
    for k in range(0, dim):
        for idx in combinations(range(m), k):
            cols = a_mat[:, list(idx)]
            for sg in product((1.0, -1.0), repeat=k):
                eq = np.column_stack([a, cols]).T
                rhs = np.r_[val, sg]
                w = np.linalg.lstsq(eq, rhs, rcond=None)[0]
                if np.abs(eq @ w - rhs).max() > 1e-8 * scale:
                    continue
                if np.abs(a_mat.T @ w).max() > 1.0 + 1e-9:
                    continue
                nrm = np.linalg.norm(w)
                if nrm < best_norm - 1e-12:
                    best, best_norm = w, nrm
    if best is None:
        raise UnboundedDual("no feasible point on the optimal face")
    return best


def max_hull_scaling(projected_dict: np.ndarray, target: np.ndarray) -> float:
    """Largest ``beta`` with ``beta * a`` inside ``conv(+-A)``.

    Its reciprocal is the smallest l1 norm of an exact representation
    ``a = A c``.
    """
    a_mat = np.asarray(projected_dict, dtype=float)
    a = np.asarray(target, dtype=float).ravel()
    dim, m = a_mat.shape
    # variables: p (m), q (m), beta; beta*a - A(p - q) = 0, sum(p+q) = 1
    c = np.r_[np.zeros(2 * m), -1.0]
    a_eq = np.vstack(
        [
            np.hstack([-a_mat, a_mat, a[:, None]]),
            np.r_[np.ones(2 * m), 0.0][None, :],
        ]
    )
    b_eq = np.r_[np.zeros(dim), 1.0]
    res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * (2 * m) + [(0, None)], method="highs")
    if res.status != 0:
        raise UnboundedDual(f"hull scaling LP failed: {res.message}")
    return float(-res.fun)


def _own_and_others(x: DataMatrix, truth, j: int):
    t = np.asarray(truth)
    if t.size != x.n:
        raise DataError("truth and data disagree in size")
    if not 0 <= j < x.n:
        raise DataError("sample index out of range")
    own = np.flatnonzero(t == t[j])
    rest = own[own != j]
    return t, rest


def _local_coords(x: DataMatrix, truth, j: int, basis: SubspaceBasis | None):
    t, rest = _own_and_others(x, truth, j)
    if rest.size == 0:
        raise DegenerateHull("sample is alone in its subspace")
    own = np.flatnonzero(t == t[j])
    u = basis.basis if basis is not None else SubspaceBasis.from_samples(x.values[:, own]).basis
    return t, u, u.T @ x.values[:, rest], u.T @ x.values[:, j]


def dual_direction(x: DataMatrix, truth, j: int, basis: SubspaceBasis | None = None) -> np.ndarray:
    """Unit vector ``U w / ||w||`` lifted from the dual point of sample j."""
    _, u, a_mat, a = _local_coords(x, truth, j, basis)
    w = dual_point(a_mat, a)
    nrm = np.linalg.norm(w)
    if nrm == 0:
        raise UnboundedDual("dual point is zero")
    return u @ w / nrm


def subspace_incoherence(x: DataMatrix, truth, j: int, basis: SubspaceBasis | None = None) -> float:
    """Largest ``|x_i^T v|`` over samples i of other subspaces.

    ``v`` is the dual direction of sample j inside its own subspace, whose
    basis is estimated from the samples when not given. Orthogonal
    subspaces give 0.
    """
    t = np.asarray(truth)
    v = dual_direction(x, t, j, basis)
    other = x.values[:, t != t[j]]
    if other.shape[1] == 0:
        return 0.0
    return float(min(1.0, np.abs(other.T @ v).max()))


@dataclass(frozen=True)
class PreservingCheck:
    mu: float
    r: float
    satisfied: bool


def check_preserving_condition(x: DataMatrix, truth, j: int, basis: SubspaceBasis | None = None) -> PreservingCheck:
    """Compare the incoherence of sample j with the inradius of its peers."""
    _, _, a_mat, _ = _local_coords(x, truth, j, basis)
    mu = subspace_incoherence(x, truth, j, basis)
    r = inradius(a_mat, symmetric=True)
    return PreservingCheck(mu=mu, r=r, satisfied=bool(mu < r))

"""Clustering scores and structural diagnostics."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import LengthMismatch


def _pair(truth, pred):
    t = np.asarray(truth).ravel()
    q = np.asarray(pred).ravel()
    if t.shape != q.shape:
        raise LengthMismatch(f"{t.size} vs {q.size} labels")
    return t, q


def contingency(truth, pred) -> np.ndarray:
    t, q = _pair(truth, pred)
    _, ti = np.unique(t, return_inverse=True)
    _, qi = np.unique(q, return_inverse=True)
    table = np.zeros((ti.max(initial=-1) + 1, qi.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (ti, qi), 1)
    return table


def error_rate(truth, pred) -> float:
    """Percentage of misassigned samples under the best label matching.

    The matching maximizes agreements on the contingency table (Hungarian
    algorithm), which equals the minimum over all label permutations.
    """
    t, _ = _pair(truth, pred)
    if t.size == 0:
        return 0.0
    table = contingency(truth, pred)
    rows, cols = linear_sum_assignment(table, maximize=True)
    hits = table[rows, cols].sum()
    return 100.0 * (1.0 - hits / t.size)


def _entropy(counts: np.ndarray, total: int) -> float:
    pr = counts[counts > 0] / total
    return float(-(pr * np.log(pr)).sum())


def nmi(truth, pred) -> float:
    """``100 * I / sqrt(H(truth) H(pred))`` with natural logs.

    Both single-cluster gives 100, exactly one single-cluster gives 0.
    """
    t, _ = _pair(truth, pred)
    if t.size == 0:
        return 100.0
    table = contingency(truth, pred)
    total = int(table.sum())
    ht = _entropy(table.sum(axis=1), total)
    hp = _entropy(table.sum(axis=0), total)
    if ht == 0.0 and hp == 0.0:
        return 100.0
    if ht == 0.0 or hp == 0.0:
        return 0.0
    joint = table / total
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / total**2
    nz = joint > 0
    mi = float((joint[nz] * np.log(joint[nz] / outer[nz])).sum())
    return 100.0 * max(mi, 0.0) / np.sqrt(ht * hp)


def subspace_preserving_rate(cf, truth, return_flags: bool = False):
    """Average fraction of each column's mass that stays inside its cluster.

    Columns without mass count as 0; with ``return_flags`` their indices are
    returned as well.
    """
    cf = np.abs(np.asarray(cf, dtype=float))
    t = np.asarray(truth)
    if cf.shape != (t.size, t.size):
        raise LengthMismatch("cf must be n x n with n = len(truth)")
    same = t[:, None] == t[None, :]
    total = cf.sum(axis=0)
    inside = (cf * same).sum(axis=0)
    empty = total <= 0
    frac = np.where(empty, 0.0, inside / np.where(empty, 1.0, total))
    rate = float(frac.mean())
    if return_flags:
        return rate, np.flatnonzero(empty)
    return rate


def off_subspace_fraction(cf, truth) -> np.ndarray:
    """Per-column share of coefficient mass placed on other clusters."""
    cf = np.abs(np.asarray(cf, dtype=float))
    t = np.asarray(truth)
    total = cf.sum(axis=0)
    outside = (cf * (t[:, None] != t[None, :])).sum(axis=0)
    return np.where(total > 0, outside / np.where(total > 0, total, 1.0), 0.0)


def cannot_link_mask(labels) -> np.ndarray:
    """Binary mask of pairs of labeled samples with different labels."""
    lab = np.asarray(labels)
    known = lab >= 0
    return (known[:, None] & known[None, :] & (lab[:, None] != lab[None, :])).astype(float)


def path_strength(af, labels, hops: int = 5) -> float:
    """``sum_{h=1..hops} ||W * A^h||_F`` for the cannot-link mask W.

    ``labels`` is a label vector (-1 for unlabeled) or a LabelState.
    """
    if hops < 1:
        raise ValueError("hops must be at least 1")
    lab = labels.labels if hasattr(labels, "labels") else labels
    a = np.asarray(af, dtype=float)
    w = cannot_link_mask(lab)
    if w.shape != a.shape:
        raise LengthMismatch("labels and affinity disagree in size")
    total = 0.0
    power = np.eye(a.shape[0])
    for _ in range(hops):
        power = power @ a
        total += float(np.linalg.norm(w * power))
    return total

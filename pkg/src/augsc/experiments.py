"""Synthetic experiment drivers shared by the CLI and the acceptance suite."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from itertools import product

import numpy as np

from .augment import InterpolationSpec, WeightMode, linear_interpolation_augment
from .core import AugmentedDictionary, LabelState, SolverConfig
from .metrics import error_rate
from .semi import run_as_sc
from .spectral import spectral_cluster
from .synth import make_bases, sample_union

N_PER = 20
P = 3


def pick_labeled(truth: np.ndarray, per_cluster: int, seed: int) -> np.ndarray:
    """Label vector with ``per_cluster`` randomly revealed labels per cluster."""
    rng = np.random.default_rng([seed, 1])
    lab = np.full(truth.size, -1)
    for c in np.unique(truth):
        idx = rng.choice(np.flatnonzero(truth == c), per_cluster, replace=False)
        lab[idx] = c
    return lab


def labels_per_cluster(label_pct: float, n: int = P * N_PER, p: int = P) -> int:
    return int(round(label_pct / 100.0 * n / p))


@dataclass
class TrialResult:
    theta: float
    label_pct: float
    n_aug: int
    seed: int
    first_err: float
    final_err: float
    outer_iterations: int
    final_f_change: float
    admm_all_converged: bool
    admm_max_residual: float


def synthetic_trial(
    theta: float,
    label_pct: float,
    n_aug: int,
    seed: int,
    cfg: SolverConfig | None = None,
    weight_mode: WeightMode = WeightMode.GAUSSIAN,
) -> TrialResult:
    """One semi-supervised run on a fresh semi-random instance.

    The instance, the revealed labels and the interpolation weights all
    derive from ``seed``. With no labels the label-free coefficients are
    clustered spectrally.
    """
    cfg = cfg or SolverConfig(mu_base=50.0, lambda2=1.0)
    x, truth = sample_union(make_bases(theta), N_PER, seed)
    per = labels_per_cluster(label_pct)
    lab = pick_labeled(truth, per, seed) if per > 0 else np.full(truth.size, -1)
    ls = LabelState.from_labels(lab, P)
    if n_aug > 0 and per > 0:
        dic = linear_interpolation_augment(x, ls, InterpolationSpec(n_a=n_aug, weight_mode=weight_mode, seed=seed))
    else:
        dic = AugmentedDictionary.plain(x)
    res = run_as_sc(x, dic, ls, cfg, truth=truth)
    if per == 0:
        pred = spectral_cluster(res.first_coef.af, P, seed=seed).labels
        err = error_rate(truth, pred)
        first_err = final_err = err
        f_change = 0.0
    else:
        first_err = res.trace[0].err
        final_err = res.trace[-1].err
        f_change = res.trace[-1].f_change
    return TrialResult(
        theta=theta,
        label_pct=label_pct,
        n_aug=n_aug,
        seed=seed,
        first_err=float(first_err),
        final_err=float(final_err),
        outer_iterations=len(res.trace),
        final_f_change=float(f_change),
        admm_all_converged=all(t.admm_converged for t in res.trace),
        admm_max_residual=max(t.admm_residual for t in res.trace),
    )


def _trial_star(args):
    return asdict(synthetic_trial(*args))


def sweep(thetas, label_pcts, n_augs, seeds, cfg: SolverConfig | None = None, jobs: int = 1):
    """Run every grid cell for every seed; results come back in grid order."""
    tasks = [(t, l, a, s, cfg) for t, l, a, s in product(thetas, label_pcts, n_augs, seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_trial_star, tasks, chunksize=4))
    return [_trial_star(t) for t in tasks]


def summarize(rows):
    """Per-cell mean/std of first and final error and of the final F change."""
    cells = {}
    for r in rows:
        cells.setdefault((r["theta"], r["label_pct"], r["n_aug"]), []).append(r)
    out = []
    for (theta, pct, aug), rs in cells.items():
        first = np.array([r["first_err"] for r in rs])
        final = np.array([r["final_err"] for r in rs])
        dfs = np.array([r["final_f_change"] for r in rs])
        out.append(
            dict(
                theta=theta,
                label_pct=pct,
                n_aug=aug,
                n_seeds=len(rs),
                first_err_mean=float(first.mean()),
                first_err_std=float(first.std()),
                final_err_mean=float(final.mean()),
                final_err_std=float(final.std()),
                final_f_change_mean=float(dfs.mean()),
                max_outer_iterations=int(max(r["outer_iterations"] for r in rs)),
                admm_all_converged=bool(all(r["admm_all_converged"] for r in rs)),
            )
        )
    return out


def with_overrides(cfg: SolverConfig, **kw) -> SolverConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})

"""Augmented dictionaries.

Two families are supported. Instance-based image transforms (flip, rotate,
scale) produce one block of ``n`` columns per transform, laid out so that
column ``j + b*n`` is derived from sample ``j``. Interpolation builds new
columns as random linear combinations of labeled samples of one cluster.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import NORM_FLOOR, AugmentedDictionary, DataMatrix, LabelState
from .errors import DataError, GeometryMismatch, InsufficientLabels, NearZeroColumn


@dataclass(frozen=True)
class ImageGeometry:
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise GeometryMismatch("image sides must be positive")

    @property
    def d(self) -> int:
        return self.height * self.width

    def check(self, x: DataMatrix):
        if x.d != self.d:
            raise GeometryMismatch(f"{self.height}x{self.width} images need d={self.d}, got {x.d}")


def _images(x: DataMatrix, geom: ImageGeometry) -> np.ndarray:
    geom.check(x)
    return x.values.T.reshape(x.n, geom.height, geom.width)


def _columns(imgs: np.ndarray) -> np.ndarray:
    return imgs.reshape(imgs.shape[0], -1).T


def _bilinear(imgs: np.ndarray, rs: np.ndarray, cs: np.ndarray) -> np.ndarray:
    """Sample each image at fractional (row, col) positions; outside is 0.

    ``rs`` and ``cs`` have shape ``(n, h, w)`` (one map per image).
    """
    n, h, w = imgs.shape
    r0 = np.floor(rs).astype(np.intp)
    c0 = np.floor(cs).astype(np.intp)
    fr = rs - r0
    fc = cs - c0
    flat = imgs.reshape(n, -1)
    idx_n = np.arange(n)[:, None, None]
    out = np.zeros(rs.shape)
    for dr, wr in ((0, 1.0 - fr), (1, fr)):
        for dc, wc in ((0, 1.0 - fc), (1, fc)):
            rr = r0 + dr
            cc = c0 + dc
            ok = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
            lin = np.where(ok, rr * w + cc, 0)
            vals = flat[np.broadcast_to(idx_n, lin.shape), lin]
            out += np.where(ok, wr * wc * vals, 0.0)
    return out


def _grid(h: int, w: int):
    yy, xx = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
    return yy - (h - 1) / 2.0, xx - (w - 1) / 2.0


def _rotate_images(imgs: np.ndarray, angles_deg: np.ndarray) -> np.ndarray:
    n, h, w = imgs.shape
    y, x = _grid(h, w)
    t = np.deg2rad(np.asarray(angles_deg, dtype=float))[:, None, None]
    cos, sin = np.cos(t), np.sin(t)
    # inverse map of a counterclockwise rotation (rows grow downwards)
    rs = cos * y + sin * x + (h - 1) / 2.0
    cs = -sin * y + cos * x + (w - 1) / 2.0
    return _bilinear(imgs, rs, cs)


def _scale_images(imgs: np.ndarray, factors: np.ndarray) -> np.ndarray:
    n, h, w = imgs.shape
    y, x = _grid(h, w)
    s = np.asarray(factors, dtype=float)[:, None, None]
    rs = y / s + (h - 1) / 2.0
    cs = x / s + (w - 1) / 2.0
    return _bilinear(imgs, np.broadcast_to(rs, (n, h, w)), np.broadcast_to(cs, (n, h, w)))


def flip_lr(x: DataMatrix, geom: ImageGeometry) -> DataMatrix:
    """Mirror every image about its vertical axis."""
    return DataMatrix(_columns(_images(x, geom)[:, :, ::-1]))


def rotate(x: DataMatrix, geom: ImageGeometry, angle_deg) -> DataMatrix:
    """Rotate every image counterclockwise about its center.

    ``angle_deg`` is a scalar or one angle per column. Bilinear interpolation,
    zero fill outside the source image.
    """
    angles = np.broadcast_to(np.asarray(angle_deg, dtype=float), (x.n,))
    if np.any(np.abs(angles) > 180):
        raise DataError("rotation angles must lie in [-180, 180]")
    return DataMatrix(_columns(_rotate_images(_images(x, geom), angles)))


def scale(x: DataMatrix, geom: ImageGeometry, factor) -> DataMatrix:
    """Zoom every image about its center by ``factor``, keeping the shape."""
    factors = np.broadcast_to(np.asarray(factor, dtype=float), (x.n,))
    if np.any(factors < 0.5) or np.any(factors > 2.0):
        raise DataError("scale factors must lie in [0.5, 2]")
    return DataMatrix(_columns(_scale_images(_images(x, geom), factors)))


@dataclass(frozen=True)
class Flip:
    tag = "flip"


@dataclass(frozen=True)
class Rotate:
    low: float = -10.0
    high: float = 10.0
    tag = "rotate"


@dataclass(frozen=True)
class Scale:
    low: float = 0.9
    high: float = 1.1
    tag = "scale"


def _unit_columns(v: np.ndarray, first_index: int) -> np.ndarray:
    norms = np.linalg.norm(v, axis=0)
    bad = np.flatnonzero(norms < NORM_FLOOR)
    if bad.size:
        raise NearZeroColumn(first_index + int(bad[0]), float(norms[bad[0]]))
    return v / norms


def random_instance_augment(
    x: DataMatrix,
    geom: ImageGeometry,
    strategies,
    reps: int = 1,
    seed: int = 0,
    normalize: bool = True,
) -> AugmentedDictionary:
    """Build ``[X | X_1 | ... | X_m]`` from instance transforms.

    Flip adds one block; Rotate and Scale add ``reps`` blocks each, with a
    fresh uniform parameter per column. All parameters are drawn up front
    from ``seed``, block by block in the order given.
    """
    geom.check(x)
    if reps < 1:
        raise DataError("reps must be at least 1")
    rng = np.random.default_rng(seed)
    n = x.n
    plan = []
    for strat in strategies:
        if isinstance(strat, Flip):
            plan.append((strat, np.full(n, np.nan)))
        elif isinstance(strat, (Rotate, Scale)):
            for _ in range(reps):
                plan.append((strat, rng.uniform(strat.low, strat.high, size=n)))
        else:
            raise DataError(f"unknown strategy {strat!r}")

    imgs = _images(x, geom)
    blocks, tags, params = [x.values], [], []
    for b, (strat, prm) in enumerate(plan):
        if isinstance(strat, Flip):
            out = _columns(imgs[:, :, ::-1])
        elif isinstance(strat, Rotate):
            out = _columns(_rotate_images(imgs, prm))
        else:
            out = _columns(_scale_images(imgs, prm))
        if normalize:
            out = _unit_columns(out, (b + 1) * n)
        blocks.append(out)
        tags.extend([strat.tag] * n)
        params.append(prm)

    m = len(plan)
    n_tilde = n * (m + 1)
    parents = np.zeros((n_tilde, n), dtype=bool)
    j = np.arange(n)
    for b in range(1, m + 1):
        parents[b * n + j, j] = True
    omega = tuple(j0 + n * np.arange(m + 1) for j0 in range(n))
    return AugmentedDictionary(
        columns=np.hstack(blocks),
        n=n,
        omega=omega,
        parents=parents,
        strategy_tags=tuple(tags),
        params=np.concatenate(params) if params else np.empty(0),
    )


class WeightMode(str, enum.Enum):
    UNIFORM_L1 = "UNIFORM_L1"
    GAUSSIAN = "GAUSSIAN"


@dataclass(frozen=True)
class InterpolationSpec:
    n_a: int
    q: int | None = None  # None: every labeled sample of the cluster
    weight_mode: WeightMode = WeightMode.GAUSSIAN
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "weight_mode", WeightMode(self.weight_mode))
        if self.n_a < 0:
            raise DataError("n_a must be nonnegative")
        if self.q is not None and self.q < 2:
            raise DataError("q must be at least 2")


def interpolation_weights(mode: WeightMode, q: int, rng: np.random.Generator) -> np.ndarray:
    if mode is WeightMode.UNIFORM_L1:
        a = rng.uniform(0.0, 1.0, size=q)
        return a / np.abs(a).sum()
    return rng.standard_normal(q)


def linear_interpolation_augment(
    x: DataMatrix,
    labels: LabelState,
    spec: InterpolationSpec,
    normalize: bool = True,
) -> AugmentedDictionary:
    """Append ``spec.n_a`` label-preserving combinations per cluster.

    Each new column is ``X a`` with ``a`` supported on ``q`` labeled samples
    of a single cluster. Every contributing sample is recorded as a parent;
    Omega(j) stays ``{j}``.
    """
    lab = labels.labels
    if lab.size != x.n:
        raise DataError("label state and data disagree in size")
    rng = np.random.default_rng(spec.seed)
    p = labels.p
    per_cluster = [np.flatnonzero(lab == c) for c in range(p)]
    for c, idx in enumerate(per_cluster):
        need = 2 if spec.q is None else spec.q
        if idx.size < need and spec.n_a > 0:
            raise InsufficientLabels(c, idx.size, need)

    n = x.n
    new_cols, parent_rows = [], []
    for c, idx in enumerate(per_cluster):
        q = idx.size if spec.q is None else spec.q
        for _ in range(spec.n_a):
            chosen = np.sort(rng.choice(idx, size=q, replace=False))
            a = interpolation_weights(spec.weight_mode, q, rng)
            new_cols.append(x.values[:, chosen] @ a)
            parent_rows.append(chosen)

    n_aug = len(new_cols)
    aug = np.column_stack(new_cols) if n_aug else np.empty((x.d, 0))
    if normalize and n_aug:
        aug = _unit_columns(aug, n)
    parents = np.zeros((n + n_aug, n), dtype=bool)
    for i, rows in enumerate(parent_rows):
        parents[n + i, rows] = True
    return AugmentedDictionary(
        columns=np.hstack([x.values, aug]),
        n=n,
        omega=tuple(np.array([j]) for j in range(n)),
        parents=parents,
        strategy_tags=("interp",) * n_aug,
    )


def cannot_link_sets(dic: AugmentedDictionary, labels: LabelState) -> list:
    """Per-sample sets of dictionary rows that may not represent the sample.

    ``phi[j]`` holds j, every column generated from j, and (when j is
    labeled) every labeled sample carrying a different label.
    """
    lab = labels.labels
    if lab.size != dic.n:
        raise DataError("label state and dictionary disagree in size")
    labeled = np.flatnonzero(lab >= 0)
    phi = []
    for j in range(dic.n):
        parts = [np.array([j]), np.flatnonzero(dic.parents[:, j])]
        if lab[j] >= 0:
            parts.append(labeled[lab[labeled] != lab[j]])
        phi.append(np.unique(np.concatenate(parts)))
    return phi

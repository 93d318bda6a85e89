import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from augsc.augment import (
    Flip,
    ImageGeometry,
    InterpolationSpec,
    Rotate,
    Scale,
    WeightMode,
    cannot_link_sets,
    flip_lr,
    linear_interpolation_augment,
    random_instance_augment,
    rotate,
    scale,
)
from augsc.core import DataMatrix, LabelState
from augsc.errors import DataError, GeometryMismatch, InsufficientLabels
from augsc.experiments import pick_labeled
from augsc.synth import make_bases, sample_union


def as_data(*imgs):
    return DataMatrix(np.column_stack([np.asarray(i, dtype=float).ravel() for i in imgs]))


def blob(h=21, w=21, sigma=3.0):
    y, x = np.mgrid[:h, :w]
    return np.exp(-((y - 9.0) ** 2 + (x - 11.5) ** 2) / (2 * sigma**2))


def image(x, geom, j=0):
    return x.values[:, j].reshape(geom.height, geom.width)


def test_flip_examples():
    g = ImageGeometry(2, 2)
    a, b, c, d = 1.0, 2.0, 3.0, 4.0
    x = as_data([[a, b], [c, d]], np.eye(2))
    np.testing.assert_array_equal(image(flip_lr(x, g), g), [[b, a], [d, c]])
    np.testing.assert_array_equal(flip_lr(flip_lr(x, g), g).values, x.values)
    const = as_data(np.tile([[1.0], [5.0]], (1, 2)), np.ones((2, 2)))
    np.testing.assert_array_equal(flip_lr(const, g).values, const.values)


def test_geometry_mismatch():
    with pytest.raises(GeometryMismatch):
        flip_lr(DataMatrix(np.ones((5, 2))), ImageGeometry(2, 2))
    with pytest.raises(GeometryMismatch):
        ImageGeometry(0, 3)


def test_rotate_identity_and_quarter_turn():
    g = ImageGeometry(6, 6)
    rng = np.random.default_rng(1)
    imgs = rng.random((2, 6, 6))
    x = as_data(*imgs)
    assert np.abs(rotate(x, g, 0.0).values - x.values).max() <= 1e-12
    turned = rotate(x, g, 90.0)
    for j in range(2):
        np.testing.assert_allclose(image(turned, g, j), np.rot90(imgs[j]), atol=1e-6)


def test_rotate_round_trip_on_blob():
    g = ImageGeometry(21, 21)
    img = blob()
    x = as_data(img, img.T)
    back = rotate(rotate(x, g, 10.0), g, -10.0)
    err = np.abs(back.values - x.values).max()
    assert err < 0.05 * np.abs(img).max()


def test_rotate_per_column_angles():
    g = ImageGeometry(5, 5)
    x = as_data(blob(5, 5, 1.0), blob(5, 5, 1.5))
    both = rotate(x, g, [0.0, 90.0])
    np.testing.assert_allclose(both.values[:, 0], x.values[:, 0], atol=1e-12)
    with pytest.raises(DataError):
        rotate(x, g, 190.0)


def test_scale_examples():
    g = ImageGeometry(8, 8)
    rng = np.random.default_rng(2)
    x = as_data(rng.random((8, 8)), blob(8, 8, 2.0))
    assert np.abs(scale(x, g, 1.0).values - x.values).max() <= 1e-12

    blocks = np.kron(rng.random((4, 4)), np.ones((2, 2)))
    zoomed = image(scale(as_data(blocks, blocks), g, 2.0), g)
    # output pixel r samples source position (r - c)/2 + c with c the centre;
    # where both bracketing source pixels share a block the value is exact
    src = (np.arange(8) - 3.5) / 2 + 3.5
    lo = np.floor(src).astype(int)
    inside = lo // 2 == (lo + 1) // 2
    checked = 0
    for r in np.flatnonzero(inside):
        for c in np.flatnonzero(inside):
            assert zoomed[r, c] == pytest.approx(blocks[lo[r], lo[c]], abs=1e-6)
            checked += 1
    assert checked == 16

    b = as_data(blob(21, 21), blob(21, 21, 4.0))
    small = scale(b, ImageGeometry(21, 21), 0.9).values
    assert np.isfinite(small).all()
    ratio = (small**2).sum(axis=0) / (b.values**2).sum(axis=0)
    assert ((ratio > 0.5) & (ratio < 1.5)).all()
    with pytest.raises(DataError):
        scale(x, g, 3.0)


def instance_data(n=10, h=6, w=5, seed=0):
    rng = np.random.default_rng(seed)
    v = rng.random((h * w, n)) + 0.1
    return DataMatrix(v / np.linalg.norm(v, axis=0), normalized=True), ImageGeometry(h, w)


def test_flip_layout():
    x, g = instance_data(n=10)
    dic = random_instance_augment(x, g, [Flip()])
    assert dic.n_tilde == 20
    assert dic.omega[3].tolist() == [3, 13]
    assert dic.parents[13, 3] and dic.parents.sum() == 10
    assert dic.strategy_tags == ("flip",) * 10


def test_rotate_scale_count():
    x, g = instance_data(n=72, h=4, w=4)
    dic = random_instance_augment(x, g, [Rotate(-10, 10), Scale(0.9, 1.1)], reps=5, seed=3)
    assert dic.n_tilde == 72 * 11 == 792
    omegas = np.concatenate(dic.omega)
    assert np.unique(omegas).size == omegas.size == 792


def test_instance_layout_recomputed():
    x, g = instance_data(n=6)
    dic = random_instance_augment(x, g, [Flip(), Rotate(-10, 10), Scale(0.9, 1.1)], reps=2, seed=9)
    n = x.n
    assert dic.n_tilde == n * 6
    np.testing.assert_allclose(
        dic.columns[:, n : 2 * n], flip_lr(x, g).values / np.linalg.norm(flip_lr(x, g).values, axis=0), atol=1e-15
    )
    for b in range(1, 5):
        prm = dic.params[b * n : (b + 1) * n]
        fn = rotate if b < 3 else scale
        ref = fn(x, g, prm).values
        ref = ref / np.linalg.norm(ref, axis=0)
        np.testing.assert_allclose(dic.columns[:, (b + 1) * n : (b + 2) * n], ref, atol=1e-14)
        lo, hi = (-10, 10) if b < 3 else (0.9, 1.1)
        assert ((prm >= lo) & (prm <= hi)).all()


@given(st.integers(0, 2**32 - 1))
def test_instance_deterministic(seed):
    x, g = instance_data(n=4, h=4, w=4)
    strat = [Rotate(), Scale()]
    a = random_instance_augment(x, g, strat, reps=2, seed=seed)
    b = random_instance_augment(x, g, strat, reps=2, seed=seed)
    assert a.columns.tobytes() == b.columns.tobytes()
    assert a.params.tobytes() == b.params.tobytes()


def test_instance_without_normalization():
    x, g = instance_data(n=3)
    dic = random_instance_augment(x, g, [Flip()], normalize=False)
    np.testing.assert_array_equal(dic.columns[:, 3:], flip_lr(x, g).values)
    with pytest.raises(DataError):
        random_instance_augment(x, g, [Rotate()], reps=0)


def synthetic_labels(per=4, seed=0, theta=30):
    x, truth = sample_union(make_bases(theta), 20, seed)
    return x, truth, LabelState.from_labels(pick_labeled(truth, per, seed), 3)


def test_uniform_weights_example():
    x, _, _ = synthetic_labels()
    lab = np.full(60, -1)
    lab[[0, 1]] = 0
    lab[[20, 21]] = 1
    lab[[40, 41]] = 2
    ls = LabelState.from_labels(lab, 3)
    spec = InterpolationSpec(n_a=1, q=2, weight_mode=WeightMode.UNIFORM_L1, seed=5)
    dic = linear_interpolation_augment(x, ls, spec, normalize=False)
    # recover the weights of the first cluster's column from its two parents
    coef = np.linalg.lstsq(x.values[:, [0, 1]], dic.columns[:, 60], rcond=None)[0]
    np.testing.assert_allclose(x.values[:, [0, 1]] @ coef, dic.columns[:, 60], atol=1e-14)
    assert (coef > 0).all() and coef.sum() == pytest.approx(1.0, abs=1e-14)
    # and the weights follow the documented recipe: uniform draw, unit l1 norm
    rng = np.random.default_rng(5)
    rng.choice(np.array([0, 1]), size=2, replace=False)
    a = rng.uniform(0, 1, 2)
    np.testing.assert_allclose(coef, a / a.sum(), atol=1e-12)


def test_uniform_weight_combination_is_exact():
    x = DataMatrix(np.array([[1.0, 0.0, 0.3], [0.0, 1.0, 0.7]]))
    ls = LabelState.from_labels([0, 0, -1], 1)
    dic = linear_interpolation_augment(x, ls, InterpolationSpec(n_a=1, q=2, weight_mode="UNIFORM_L1"), normalize=False)
    col = dic.columns[:, 3]
    assert col.sum() == pytest.approx(1.0, abs=1e-15)  # 0.25 e1 + 0.75 e2 style convex weights
    assert dic.parents[3].tolist() == [True, True, False]


def test_gaussian_columns_stay_in_subspace():
    x, truth, ls = synthetic_labels(per=4, theta=10)
    dic = linear_interpolation_augment(x, ls, InterpolationSpec(n_a=50, seed=2))
    assert dic.n_tilde == 60 + 150 == 210
    bases = make_bases(10)
    for i in range(60, 210):
        parents = np.flatnonzero(dic.parents[i])
        assert parents.size == 4
        labs = np.unique(truth[parents])
        assert labs.size == 1
        u = bases[labs[0]]
        v = dic.columns[:, i]
        assert np.linalg.norm(v - u @ (u.T @ v)) < 1e-10
        span = x.values[:, parents]
        resid = v - span @ np.linalg.lstsq(span, v, rcond=None)[0]
        assert np.linalg.norm(resid) < 1e-10
    assert all(o.tolist() == [j] for j, o in enumerate(dic.omega))


def test_interpolation_needs_labels():
    x, _, ls = synthetic_labels(per=1)
    with pytest.raises(InsufficientLabels):
        linear_interpolation_augment(x, ls, InterpolationSpec(n_a=5))
    x, _, ls = synthetic_labels(per=3)
    with pytest.raises(InsufficientLabels):
        linear_interpolation_augment(x, ls, InterpolationSpec(n_a=5, q=4))
    with pytest.raises(DataError):
        InterpolationSpec(n_a=2, q=1)


def test_interpolation_deterministic():
    x, _, ls = synthetic_labels()
    spec = InterpolationSpec(n_a=7, q=3, seed=11)
    a = linear_interpolation_augment(x, ls, spec)
    b = linear_interpolation_augment(x, ls, spec)
    assert a.columns.tobytes() == b.columns.tobytes()
    np.testing.assert_array_equal(a.parents, b.parents)


def test_cannot_link_examples():
    x, g = instance_data(n=4)
    dic = random_instance_augment(x, g, [Flip(), Rotate()], seed=1)
    unlabeled = LabelState.from_labels([-1] * 4, 2)
    phi = cannot_link_sets(dic, unlabeled)
    assert phi[1].tolist() == [1, 5, 9]
    assert all(np.array_equal(p, o) for p, o in zip(phi, dic.omega))

    ls = LabelState.from_labels([0, 1, -1, 0], 2)
    phi = cannot_link_sets(dic, ls)
    assert 1 in phi[0] and 1 in phi[3] and 0 in phi[1]
    assert 3 not in phi[0]
    assert phi[2].tolist() == [2, 6, 10]


def test_cannot_link_with_interpolation():
    x, truth, ls = synthetic_labels(per=4)
    dic = linear_interpolation_augment(x, ls, InterpolationSpec(n_a=3, seed=0))
    phi = cannot_link_sets(dic, ls)
    lab = ls.labels
    for j in np.flatnonzero(lab >= 0):
        others = np.flatnonzero((lab >= 0) & (lab != lab[j]))
        derived = np.flatnonzero(dic.parents[:, j])
        assert derived.size > 0
        assert set(phi[j]) == {j, *others, *derived}

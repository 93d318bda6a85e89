import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from augsc.augment import InterpolationSpec, cannot_link_sets, linear_interpolation_augment
from augsc.core import AugmentedDictionary, LabelState, SolverConfig
from augsc.errors import DataError, SingularPropagation
from augsc.experiments import pick_labeled
from augsc.semi import (
    assign_labels,
    label_weights,
    propagation_matrices,
    run_as_sc,
    update_c_semisupervised,
    update_f,
)
from augsc.solvers import solve_ak_sc, solve_self_expressive_full
from augsc.synth import make_bases, sample_union

from oracles import propagation_dense, random_propagation_instance


def no_labels(n, p=3):
    return LabelState.from_labels(np.full(n, -1), p)


def cross_mass(c, truth):
    n = c.shape[1]
    return np.abs(c[:n])[truth[:, None] != truth[None, :]].sum()


def test_label_weights_example():
    f = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    w = label_weights(f, 2, lambda2=1.0, base=1.0)
    assert w[0, 1] == w[1, 0] == 3.0
    assert w[0, 0] == 1.0
    assert w[2, 0] == pytest.approx(1.5)
    np.testing.assert_array_equal(label_weights(f, 2, 0.0, 1.0), np.ones((3, 2)))


@pytest.mark.parametrize("k", ["full", 6])
def test_uniform_f_reduces_to_unsupervised(k):
    x, _ = sample_union(make_bases(30), 6, seed=4)
    dic = AugmentedDictionary.plain(x)
    cfg = SolverConfig(k=k)
    f = np.full((x.n, 3), 1 / 3)
    semi = update_c_semisupervised(x, dic, f, cfg, dic.omega).ctilde
    solver = solve_self_expressive_full if k == "full" else solve_ak_sc
    np.testing.assert_allclose(semi, solver(x, dic, cfg).ctilde, atol=1e-8)


def test_hard_labels_shrink_boundary_mass():
    x, truth = sample_union(make_bases(20), 6, seed=1)
    dic = AugmentedDictionary.plain(x)
    cfg = SolverConfig(lambda2=1.0)
    uniform = update_c_semisupervised(x, dic, np.full((x.n, 3), 1 / 3), cfg, dic.omega).ctilde
    hard = update_c_semisupervised(x, dic, np.eye(3)[truth], cfg, dic.omega).ctilde
    assert cross_mass(uniform, truth) > 0
    assert cross_mass(hard, truth) < cross_mass(uniform, truth)


def test_lambda2_pressure_monotone():
    x, truth = sample_union(make_bases(15), 6, seed=2)
    dic = AugmentedDictionary.plain(x)
    f = np.eye(3)[truth] * 0.8 + 0.2 / 3
    masses = []
    for lam2 in (0.0, 0.1, 1.0, 3.0, 10.0):
        c = update_c_semisupervised(
            x, dic, f, SolverConfig(lambda2=lam2, admm_eps=1e-16, admm_dual_tol=1e-16, admm_max_iter=20000), dic.omega
        ).ctilde
        masses.append(cross_mass(c, truth))
    assert all(b <= a + 1e-9 for a, b in zip(masses, masses[1:]))


@pytest.mark.parametrize("reg", ["L1", "FRO", "NUC"])
def test_cannot_link_respected(reg):
    x, truth = sample_union(make_bases(20), 8, seed=0)
    ls = LabelState.from_labels(pick_labeled(truth, 3, 0), 3)
    dic = linear_interpolation_augment(x, ls, InterpolationSpec(n_a=5, seed=0))
    phi = cannot_link_sets(dic, ls)
    f = np.full((dic.n_tilde, 3), 1 / 3)
    c = update_c_semisupervised(x, dic, f, SolverConfig(regularizer=reg), phi).ctilde
    for j in range(x.n):
        assert not c[phi[j], j].any()
    with pytest.raises(DataError):
        update_c_semisupervised(x, dic, f[:5], SolverConfig(), phi)


def test_propagation_matrices_invariants(rng):
    ct, parents, *_ = random_propagation_instance(7)
    prop = propagation_matrices(ct, parents)
    n = ct.shape[1]
    for w, lap in ((prop.a_tilde, prop.l_a), (prop.s_tilde, prop.l_s)):
        assert np.array_equal(w, w.T) and (w >= 0).all()
        assert not w[n:, n:].any()
        np.testing.assert_allclose(lap.sum(axis=1), 0.0, atol=1e-12)
    np.testing.assert_array_equal(prop.a_tilde[n:, :n], 0.5 * np.abs(ct[n:]))
    np.testing.assert_array_equal(prop.a_tilde[:n, :n], 0.5 * (np.abs(ct[:n]) + np.abs(ct[:n]).T))


def test_update_f_single_cluster():
    ct, parents, *_ = random_propagation_instance(3)
    nt = ct.shape[0]
    u = np.ones(nt, dtype=bool)
    yt = np.zeros((nt, 2))
    yt[:, 0] = 1
    f = update_f(propagation_matrices(ct, parents), u, yt, 1000.0, 1000.0).f
    np.testing.assert_allclose(f, yt, atol=1e-8)


@given(st.integers(0, 2**31))
def test_update_f_row_stochastic(seed):
    ct, parents, u, yt, g1, g2 = random_propagation_instance(seed)
    upd = update_f(propagation_matrices(ct, parents), u, yt, g1, g2)
    assert np.abs(upd.f.sum(axis=1) - 1).max() <= 1e-8
    assert upd.f.min() >= -1e-10


def test_update_f_matches_dense_solve():
    ct, parents, u, yt, g1, g2 = random_propagation_instance(11)
    prop = propagation_matrices(ct, parents)
    upd = update_f(prop, u, yt, g1, g2)
    if upd.degenerate_rows.size == 0:
        ref = propagation_dense(prop.a_tilde, prop.s_tilde, u, yt, g1, g2)
        np.testing.assert_allclose(upd.f, ref, atol=1e-10)
    # the dense matrix form of U is accepted too
    np.testing.assert_allclose(update_f(prop, np.diag(u.astype(float)), yt, g1, g2).f, upd.f)


def test_update_f_disconnected():
    n, p = 4, 2
    prop = propagation_matrices(np.zeros((n, n)), np.zeros((n, n), dtype=bool))
    u = np.array([True, True, False, False])
    yt = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
    upd = update_f(prop, u, yt, 5.0, 5.0)
    np.testing.assert_allclose(upd.f[:2], yt[:2], atol=1e-14)
    np.testing.assert_array_equal(upd.f[2:], 0.5)
    assert upd.degenerate_rows.tolist() == [2, 3]


def test_update_f_errors():
    prop = propagation_matrices(np.ones((3, 3)), np.zeros((3, 3), dtype=bool))
    yt = np.eye(3)[:, :2]
    with pytest.raises(SingularPropagation):
        update_f(prop, np.zeros(3, dtype=bool), np.zeros((3, 2)), 1.0, 1.0)
    with pytest.raises(SingularPropagation):
        update_f(prop, np.array([True, True, False]), yt, 0.0, 1.0)


def test_assign_labels_ties():
    f = np.array([[0.5, 0.5, 0.0], [0.2, 0.4, 0.4], [0.1, 0.2, 0.7], [1.0, 0.0, 0.0]])
    assert assign_labels(f, 3).tolist() == [0, 1, 2]


def test_zero_labels_equals_unsupervised_bitwise():
    x, _ = sample_union(make_bases(20), 6, seed=3)
    dic = AugmentedDictionary.plain(x)
    cfg = SolverConfig(gamma2=0.0)
    res = run_as_sc(x, dic, no_labels(x.n), cfg)
    ref = solve_self_expressive_full(x, dic, cfg)
    assert res.first_coef.ctilde.tobytes() == ref.ctilde.tobytes()
    assert len(res.trace) == 1 and res.degenerate_rows.size == x.n
    np.testing.assert_array_equal(res.f, 1 / 3)


def test_all_labeled_returns_given_labels():
    x, truth = sample_union(make_bases(15), 5, seed=6)
    given_labels = np.roll(truth, 1)
    res = run_as_sc(x, AugmentedDictionary.plain(x), LabelState.from_labels(given_labels, 3), SolverConfig(gamma1=1e6))
    np.testing.assert_array_equal(res.labels, given_labels)


def test_reference_seed_reaches_zero():
    x, truth = sample_union(make_bases(10), 20, seed=1)
    ls = LabelState.from_labels(pick_labeled(truth, 4, 1), 3)
    dic = linear_interpolation_augment(x, ls, InterpolationSpec(n_a=50, seed=1))
    res = run_as_sc(x, dic, ls, SolverConfig(mu_base=50.0, lambda2=1.0), truth=truth)
    errs = [t.err for t in res.trace]
    assert errs[0] > 0 and min(errs[:5]) == 0.0
    assert np.isnan(res.trace[0].c_change)
    assert all(t.admm_converged for t in res.trace)


def test_run_checks_sizes():
    x, _ = sample_union(make_bases(20), 4, seed=0)
    with pytest.raises(DataError):
        run_as_sc(x, AugmentedDictionary.plain(x), no_labels(5), SolverConfig())

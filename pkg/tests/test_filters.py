import numpy as np
import pytest
from hypothesis import given, strategies as st

from ftdecouple.filters import (
    DegenerateGridError,
    FilterBank,
    FilterKind,
    apply_filter,
    build_filter_bank,
    build_operator,
    forward_two_point_operator,
    lagrange_weights_central,
    lagrange_weights_left,
    lagrange_weights_right,
    sort_permutation,
)

KINDS = list(FilterKind)
seeds = st.integers(min_value=0, max_value=2**31 - 1)


def random_grid(seed, n, spread=100.0):
    """Strictly ascending grid with gap ratios up to ``spread``."""
    rng = np.random.default_rng(seed)
    gaps = np.exp(rng.uniform(0, np.log(spread), n - 1))
    z = np.concatenate([[0.0], np.cumsum(gaps)])
    return (z - z.mean()) / np.ptp(z) * rng.uniform(0.1, 10.0)


def test_lagrange_weights_equidistant():
    z = np.array([0.0, 0.5, 1.0])
    np.testing.assert_allclose(lagrange_weights_central(z), [-1.0, 0.0, 1.0])
    np.testing.assert_allclose(lagrange_weights_left(z), [1.0, -4.0, 3.0])
    np.testing.assert_allclose(lagrange_weights_right(z), [-3.0, 4.0, -1.0])


def test_lagrange_weights_reject_unsorted_window():
    with pytest.raises(ValueError):
        lagrange_weights_central([0.0, 0.0, 1.0])


def test_left_interior_rows_are_backward_rule():
    delta = 0.25
    z = delta * np.arange(8)
    op = build_operator(z, "L")
    for p in range(2, 8):
        np.testing.assert_array_equal(op.cols[p], [p - 2, p - 1, p])
        np.testing.assert_allclose(op.weights[p], np.array([1.0, -4.0, 3.0]) / (2 * delta))


def test_boundary_rows():
    z = np.array([0.0, 0.3, 0.5, 1.1, 1.6])
    left = build_operator(z, "L")
    # first row backward scheme evaluated at z0, second row central
    np.testing.assert_array_equal(left.cols[0], [0, 1, 2])
    np.testing.assert_allclose(left.weights[0], lagrange_weights_right(z[:3]))
    np.testing.assert_allclose(left.weights[1], lagrange_weights_central(z[:3]))
    central = build_operator(z, "C")
    np.testing.assert_allclose(central.weights[0], lagrange_weights_right(z[:3]))
    np.testing.assert_allclose(central.weights[-1], lagrange_weights_left(z[-3:]))
    right = build_operator(z, "R")
    np.testing.assert_allclose(right.weights[-1], lagrange_weights_left(z[-3:]))
    np.testing.assert_allclose(right.weights[-2], lagrange_weights_central(z[-3:]))


def test_two_point_forward_toeplitz():
    d = forward_two_point_operator(4, 0.5)
    np.testing.assert_array_equal(d, [[-2, 2, 0, 0], [0, -2, 2, 0], [0, 0, -2, 2]])


@given(seeds, st.integers(3, 60), st.sampled_from(KINDS),
       st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_quadratic_exactness(seed, n, kind, a, b, c):
    zs = random_grid(seed, n)
    op = build_operator(zs, kind)
    got = op.matvec(a * zs ** 2 + b * zs + c)
    want = 2 * a * zs + b
    scale = np.abs(a) * np.abs(zs).max() + np.abs(b) + 1.0
    assert np.abs(got - want).max() <= 1e-9 * scale


@given(seeds, st.integers(3, 60), st.sampled_from(KINDS))
def test_row_sums_vanish(seed, n, kind):
    op = build_operator(random_grid(seed, n, spread=1e3), kind)
    sums = np.abs(op.weights.sum(axis=1))
    assert np.all(sums <= 1e-10 * np.abs(op.weights).max(axis=1))
    assert np.all(np.diff(op.cols, axis=1) == 1)


@given(seeds, st.integers(3, 40), st.sampled_from(KINDS), st.floats(-3, 3), st.floats(-3, 3))
def test_apply_filter_linear(seed, n, kind, alpha, beta):
    rng = np.random.default_rng(seed)
    z = rng.permutation(random_grid(seed, n))
    perm = sort_permutation(z)
    op = build_operator(z[perm], kind)
    g1, g2 = rng.standard_normal((2, n))
    lhs = apply_filter(perm, op, alpha * g1 + beta * g2)
    rhs = alpha * apply_filter(perm, op, g1) + beta * apply_filter(perm, op, g2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + np.abs(rhs).max()))


@pytest.mark.parametrize("kind", KINDS)
def test_apply_filter_examples(kind, rng):
    z = rng.uniform(-1, 1, 40)
    perm = sort_permutation(z)
    op = build_operator(z[perm], kind)
    np.testing.assert_allclose(apply_filter(perm, op, np.full(40, 3.0)), 0.0, atol=1e-10)
    np.testing.assert_allclose(apply_filter(perm, op, z), 1.0, atol=1e-10)
    np.testing.assert_allclose(apply_filter(perm, op, z ** 2), 2 * z, atol=1e-10)
    with pytest.raises(ValueError):
        apply_filter(perm, op, np.ones(39))


def test_central_second_order_convergence():
    errs = []
    for n in (50, 100, 200, 400):
        z = np.sort(np.random.default_rng(n).uniform(-1, 1, n))
        z = np.linspace(-1, 1, n) + 0.3 * (z - np.linspace(-1, 1, n)) / n
        err = np.abs(build_operator(z, "C").matvec(z ** 3) - 3 * z ** 2)[1:-1].max()
        errs.append(err)
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(ratios > 3.0) and np.all(ratios < 5.0)


def test_left_and_central_diverge_at_jump():
    z = np.linspace(-1, 1, 201)
    g = np.sin(z) + (z > 0.005)
    left = build_operator(z, "L").matvec(g)
    right = build_operator(z, "R").matvec(g)
    central = build_operator(z, "C").matvec(g)
    smooth = np.abs(left - central)
    jump = int(np.searchsorted(z, 0.005))
    assert smooth[jump - 2:jump + 3].max() > 10 * np.median(smooth)
    assert np.abs(left - right)[jump - 2:jump + 3].max() > 10 * np.median(np.abs(left - right))


def test_degenerate_grid_rejected():
    with pytest.raises(DegenerateGridError):
        sort_permutation(np.array([0.0, 1.0, 1.0, 2.0]))
    with pytest.raises(ValueError):
        build_operator(np.array([0.0, 1.0]), "C")
    with pytest.raises(DegenerateGridError) as info:
        FilterBank(np.column_stack([np.arange(5.0), [0.0, 1.0, 1.0, 2.0, 3.0]]), "LR")
    assert info.value.branch == 1


def test_sort_permutation_is_bijection(rng):
    z = rng.standard_normal(30)
    perm = sort_permutation(z)
    assert sorted(perm.tolist()) == list(range(30))
    assert np.all(np.diff(z[perm]) > 0)


def test_bank_trivial_cases(rng):
    pts = np.sort(rng.uniform(-1, 1, 12))[:, None]
    bank = build_filter_bank(np.array([1.0]), pts, "C")
    np.testing.assert_array_equal(bank.permutation(0), np.arange(12))
    pts2 = rng.uniform(-1, 1, (12, 2))
    bank2 = build_filter_bank(np.eye(2), pts2, "LR")
    np.testing.assert_array_equal(bank2.z, pts2)


@given(seeds, st.integers(1, 4), st.integers(5, 40))
def test_bank_matches_single_operators(seed, r, n):
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((3, r))
    pts = rng.uniform(-1.5, 1.5, (n, 3))
    try:
        bank = build_filter_bank(V, pts, KINDS)
    except DegenerateGridError:
        return
    G = rng.standard_normal((n, r))
    z = pts @ V
    for kind in KINDS:
        out = bank.apply(kind, G)
        cols, wts = bank.stencils(kind)
        for i in range(r):
            perm = bank.permutation(i)
            ref = apply_filter(perm, build_operator(z[perm, i], kind), G[:, i])
            np.testing.assert_allclose(out[:, i], ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max())
            np.testing.assert_allclose(bank.sparse_filter(kind, i) @ G[:, i], ref,
                                       rtol=1e-12, atol=1e-12 * np.abs(ref).max())
            np.testing.assert_allclose((wts[i] * G[cols[i], i]).sum(axis=1), ref,
                                       rtol=1e-12, atol=1e-12 * np.abs(ref).max())
        # quadratic exactness per branch
        np.testing.assert_allclose(bank.apply(kind, z ** 2), 2 * z, atol=1e-9 * (1 + np.abs(z).max()))


def test_operator_triples_and_sparse():
    op = build_operator(np.array([0.0, 1.0, 3.0, 4.0]), "C")
    triples = list(op.triples())
    assert len(triples) == 12
    dense = op.to_sparse().toarray()
    for i, j, w in triples:
        assert dense[i, j] == w

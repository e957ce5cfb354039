import numpy as np
import pytest
from hypothesis import given, strategies as st

from ftdecouple.tensor import (
    fold,
    frobenius,
    khatri_rao,
    lstsq_min_norm,
    pinv,
    psd_solve,
    reconstruct,
    unfold,
)

dims = st.integers(min_value=1, max_value=6)
seeds = st.integers(min_value=0, max_value=2**31 - 1)


def _factors(seed, n, m, N, r):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, r)), rng.standard_normal((m, r)), rng.standard_normal((N, r))


def test_khatri_rao_by_hand():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_array_equal(khatri_rao(a, b), [[0, 2], [1, 0], [0, 4], [3, 0]])


def test_khatri_rao_ones_row_is_identity():
    a = np.arange(6.0).reshape(3, 2)
    np.testing.assert_array_equal(khatri_rao(a, np.ones((1, 2))), a)


def test_khatri_rao_column_mismatch():
    with pytest.raises(ValueError):
        khatri_rao(np.ones((2, 2)), np.ones((2, 3)))


@given(seeds)
def test_gram_hadamard_identity(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((6, 3)), rng.standard_normal((6, 3))
    kr = khatri_rao(a, b)
    lhs = kr.T @ kr
    rhs = (a.T @ a) * (b.T @ b)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(rhs)


@given(seeds, dims, dims, dims)
def test_unfold_fold_roundtrip(seed, n, m, N):
    t = np.random.default_rng(seed).standard_normal((n, m, N))
    for mode in (1, 2, 3):
        np.testing.assert_array_equal(fold(unfold(t, mode), mode, t.shape), t)
        assert frobenius(unfold(t, mode)) == frobenius(t)


@given(seeds, dims, dims, dims, st.integers(1, 4))
def test_unfoldings_match_factor_products(seed, n, m, N, r):
    W, V, H = _factors(seed, n, m, N, r)
    t = reconstruct(W, V, H)
    for mode, lhs in ((1, W @ khatri_rao(H, V).T), (2, V @ khatri_rao(H, W).T),
                      (3, H @ khatri_rao(V, W).T)):
        ref = unfold(t, mode)
        assert np.linalg.norm(ref - lhs) <= 1e-12 * max(np.linalg.norm(ref), 1e-300)


def test_reconstruct_elementwise_oracle(rng):
    W, V, H = (rng.standard_normal(s) for s in ((2, 3), (4, 3), (5, 3)))
    t = reconstruct(W, V, H)
    for o, l, k in np.ndindex(t.shape):
        assert t[o, l, k] == pytest.approx(sum(W[o, i] * V[l, i] * H[k, i] for i in range(3)), abs=1e-13)


def test_reconstruct_trivial_cases():
    np.testing.assert_array_equal(reconstruct(np.ones((2, 1)), np.ones((2, 1)), np.ones((2, 1))),
                                  np.ones((2, 2, 2)))
    assert not reconstruct(np.ones((2, 2)), np.ones((3, 2)), np.zeros((4, 2))).any()
    with pytest.raises(ValueError):
        reconstruct(np.ones((2, 2)), np.ones((3, 1)), np.ones((4, 2)))


def test_pinv_examples(rng):
    np.testing.assert_allclose(pinv(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(pinv(np.array([[1.0, 0.0], [0.0, 0.0]])), [[1, 0], [0, 0]])
    a = rng.standard_normal((8, 3))
    np.testing.assert_allclose(a @ pinv(a) @ a, a, atol=1e-10)


@given(seeds, st.integers(1, 50), st.integers(1, 50), st.integers(1, 50))
def test_pinv_penrose_conditions(seed, rows, cols, rank):
    rng = np.random.default_rng(seed)
    k = min(rank, rows, cols)
    a = rng.standard_normal((rows, k)) @ rng.standard_normal((k, cols))
    x = pinv(a)
    s = max(np.linalg.norm(a), 1.0)
    assert np.linalg.norm(a @ x @ a - a) <= 1e-9 * s
    assert np.linalg.norm(x @ a @ x - x) <= 1e-9 * max(np.linalg.norm(x), 1.0)
    assert np.linalg.norm((a @ x).T - a @ x) <= 1e-9 * s
    assert np.linalg.norm((x @ a).T - x @ a) <= 1e-9 * s


def test_lstsq_min_norm_matches_pinv(rng):
    a = rng.standard_normal((10, 4)) @ rng.standard_normal((4, 6))
    b = rng.standard_normal((10, 2))
    np.testing.assert_allclose(lstsq_min_norm(a, b), np.linalg.pinv(a) @ b, atol=1e-10)


@given(seeds, st.integers(2, 30), st.integers(0, 5))
def test_psd_solve_is_min_norm(seed, size, defect):
    rng = np.random.default_rng(seed)
    k = max(1, size - defect)
    a = rng.standard_normal((size, k))
    m = a @ a.T
    b = m @ rng.standard_normal(size)  # consistent right-hand side
    ref = np.linalg.pinv(m, rcond=1e-10) @ b
    np.testing.assert_allclose(psd_solve(m, b), ref, atol=1e-6 * max(1.0, np.abs(ref).max()))


def test_frobenius_examples():
    assert frobenius(np.zeros((2, 2, 2))) == 0
    assert frobenius(np.array([[3.0]])) == 3
    assert frobenius(np.ones((2, 2))) == 2

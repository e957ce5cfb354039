import numpy as np
import pytest
from hypothesis import given, strategies as st

from ftdecouple.casestudies import toy_coupled, toy_decoupled
from ftdecouple.jacobian import build_tensor, check_points, sample_uniform
from ftdecouple.models import MonomialPolynomial, random_decoupled
from ftdecouple.tensor import frobenius, reconstruct

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def test_sample_uniform_reproducible_and_bounded():
    a = sample_uniform(4, 50, 3, -2.0, 1.0)
    np.testing.assert_array_equal(a, sample_uniform(4, 50, 3, -2.0, 1.0))
    assert a.min() >= -2.0 and a.max() < 1.0
    big = sample_uniform(0, 10_000, 1, -1.5, 1.5)
    assert abs(big.mean()) <= 0.05 * 3.0
    with pytest.raises(ValueError):
        sample_uniform(0, 5, 1, 1.0, 1.0)


def test_linear_model_slices():
    A = np.array([[1.0, 2.0, 0.0], [0.0, -1.0, 3.0]])
    lin = MonomialPolynomial(np.eye(3, dtype=int), A.T)
    t = build_tensor(lin, sample_uniform(0, 7, 3))
    assert t.shape == (2, 3, 7)
    for k in range(7):
        np.testing.assert_array_equal(t[:, :, k], A)


def test_toy_tensor_shape_and_equivalence():
    pts = sample_uniform(0, 100, 2)
    tc = build_tensor(toy_coupled(), pts)
    td = build_tensor(toy_decoupled(), pts)
    assert tc.shape == (2, 2, 100)
    assert frobenius(tc - td) <= 1e-9 * frobenius(tc)


@given(seeds, st.integers(1, 4), st.integers(1, 3), st.integers(1, 5), st.integers(3, 40))
def test_chain_rule_tensor_identity(seed, m, n, r, N):
    model = random_decoupled(seed, m, n, r, 4)
    pts = sample_uniform(seed, N, m)
    gp = model.branch_derivatives(pts @ model.V)
    t = build_tensor(model, pts)
    ref = reconstruct(model.W, model.V, gp)
    assert frobenius(t - ref) <= 1e-12 * max(frobenius(ref), 1e-300)


def test_check_points_rejects_bad_input():
    with pytest.raises(ValueError):
        check_points(np.ones((2, 2)))
    with pytest.raises(ValueError):
        check_points(np.array([[0.0], [np.nan], [1.0]]))

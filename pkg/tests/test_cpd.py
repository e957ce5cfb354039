import numpy as np
import pytest

from ftdecouple.casestudies import toy_coupled
from ftdecouple.cpd import CpdOptions, cpd_als, estimate_rank
from ftdecouple.jacobian import build_tensor, sample_uniform
from ftdecouple.tensor import frobenius, khatri_rao, reconstruct, unfold


@pytest.fixture(scope="module")
def toy_tensor():
    pts = sample_uniform(0, 100, 2)
    return build_tensor(toy_coupled(), pts), pts


def test_rank_one_recovered(rng):
    t = reconstruct(rng.standard_normal((2, 1)), rng.standard_normal((3, 1)), rng.standard_normal((20, 1)))
    assert cpd_als(t, 1, CpdOptions(restarts=1)).relative_residual(t) < 1e-10


def test_toy_rank_three_is_exact(toy_tensor):
    t, _ = toy_tensor
    assert cpd_als(t, 3).relative_residual(t) < 1e-8


def test_rank_zero_rejected(toy_tensor):
    with pytest.raises(ValueError):
        cpd_als(toy_tensor[0], 0)
    with pytest.raises(ValueError):
        cpd_als(np.full((2, 2, 3), np.nan), 1)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_trace_non_increasing(rng, seed):
    t = rng.standard_normal((3, 4, 30))
    res = cpd_als(t, 2, CpdOptions(max_sweeps=100, restarts=1, seed=seed))
    diffs = np.diff(res.trace)
    assert np.all(diffs <= 1e-12)


def test_residual_same_in_every_unfolding(toy_tensor):
    t, _ = toy_tensor
    res = cpd_als(t, 2, CpdOptions(restarts=1, max_sweeps=50))
    W, V, H = res.W, res.V, res.Gp
    r1 = frobenius(unfold(t, 1) - W @ khatri_rao(H, V).T)
    r2 = frobenius(unfold(t, 2) - V @ khatri_rao(H, W).T)
    r3 = frobenius(unfold(t, 3) - H @ khatri_rao(V, W).T)
    assert abs(r1 - r2) <= 1e-12 * frobenius(t)
    assert abs(r1 - r3) <= 1e-12 * frobenius(t)


def test_normalised_factors(toy_tensor):
    res = cpd_als(toy_tensor[0], 3, CpdOptions(restarts=1, max_sweeps=20))
    np.testing.assert_allclose(np.linalg.norm(res.W, axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(res.V, axis=0), 1.0, atol=1e-12)


def test_restart_seeds_reproducible(toy_tensor):
    t, _ = toy_tensor
    a = cpd_als(t, 2, CpdOptions(restarts=3, seed=5, max_sweeps=30))
    b = cpd_als(t, 2, CpdOptions(restarts=3, seed=5, max_sweeps=30))
    np.testing.assert_array_equal(a.Gp, b.Gp)
    assert a.seed in {5 ^ k for k in range(3)}


def test_estimate_rank_toy(toy_tensor):
    assert estimate_rank(toy_tensor[0], 4) == 3

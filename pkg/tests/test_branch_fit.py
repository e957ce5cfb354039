import numpy as np
import pytest
from hypothesis import given, strategies as st

from ftdecouple.branch_fit import (
    estimate_constants,
    fit_branch,
    fit_branches_with_residuals,
    post_optimize,
    relative_error,
)
from ftdecouple.casestudies import MLP_DIMS, toy_coupled, toy_decoupled
from ftdecouple.ftd import FtdResult
from ftdecouple.jacobian import sample_uniform
from ftdecouple.models import DecoupledModel, random_decoupled, random_mlp

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def test_exact_polynomial_recovered(rng):
    z = rng.uniform(-1.5, 1.5, 80)
    coef, resid = fit_branch(z, z ** 3 + 0.5 * z ** 2, 3)
    np.testing.assert_allclose(coef, [0.0, 0.0, 0.5, 1.0], atol=1e-8)
    assert resid < 1e-10


def test_underfit_reports_residual(rng):
    z = rng.uniform(-1, 1, 50)
    _, resid = fit_branch(z, z ** 4, 2)
    assert resid > 1e-3
    with pytest.raises(ValueError):
        fit_branch(z, z, 0)


def test_fit_branches_from_result(rng):
    pts = rng.uniform(-1, 1, (60, 2))
    truth = toy_decoupled()
    z = pts @ truth.V
    G = truth.branch_values(z)
    res = FtdResult("implicit", truth.W, truth.V, G, z, (), 0.0, [0.0], [], 0, 1)
    model, resid = fit_branches_with_residuals(res, pts, 3)
    np.testing.assert_allclose(model.coeffs, truth.coeffs, atol=1e-8)
    assert max(resid) < 1e-10


def test_constants_of_shifted_model():
    pts = sample_uniform(0, 50, 2)
    base = toy_decoupled()
    shifted = base.with_constant([1.5, -2.0])
    est = estimate_constants(base, shifted, pts)
    np.testing.assert_allclose(est.c, [1.5, -2.0], atol=1e-12)
    assert np.all(relative_error(shifted, est, pts) < 1e-10)
    np.testing.assert_allclose(estimate_constants(base, base, pts).c, 0.0, atol=1e-12)


@given(seeds)
def test_constants_give_zero_mean_residual(seed):
    pts = sample_uniform(seed, 60, 2)
    net = random_mlp(seed, MLP_DIMS)
    model = random_decoupled(seed, 2, 2, 3, 3)
    est = estimate_constants(model, net, pts)
    f = net.evaluate(pts)
    resid = f - est.evaluate(pts)
    rms = np.sqrt(np.mean(f ** 2, axis=0))
    assert np.all(np.abs(resid.mean(axis=0)) <= 1e-12 * rms)


def test_relative_error_examples():
    pts = sample_uniform(1, 40, 2)
    coupled = toy_coupled()
    assert np.all(relative_error(coupled, toy_decoupled(), pts) < 1e-9)
    mean_only = DecoupledModel(np.zeros((2, 1)), np.zeros((2, 1)), np.zeros((1, 1)),
                               coupled.evaluate(pts).mean(axis=0))
    np.testing.assert_allclose(relative_error(coupled, mean_only, pts), 100.0, rtol=1e-12)
    flat = DecoupledModel(np.zeros((1, 1)), np.zeros((2, 1)), np.zeros((1, 1)), [3.0])
    assert np.isnan(relative_error(flat, flat, pts)[0])


@given(seeds, st.floats(-10, 10))
def test_relative_error_invariant_to_common_offset(seed, shift):
    pts = sample_uniform(seed, 40, 2)
    coupled = random_decoupled(seed, 2, 2, 2, 3)
    model = random_decoupled(seed + 1, 2, 2, 2, 3)
    a = relative_error(coupled, model, pts)
    b = relative_error(coupled.with_constant(coupled.c + shift), model.with_constant(model.c + shift), pts)
    np.testing.assert_allclose(a, b, rtol=1e-9)


def test_post_optimize_exact_model_unchanged():
    pts = sample_uniform(0, 60, 2)
    truth = toy_decoupled()
    out = post_optimize(truth, truth, pts)
    np.testing.assert_array_equal(out.W, truth.W)


def test_post_optimize_recovers_perturbed_truth():
    pts = sample_uniform(0, 100, 2)
    truth = toy_decoupled()
    rng = np.random.default_rng(3)
    noisy = DecoupledModel(truth.W * (1 + 0.01 * rng.standard_normal(truth.W.shape)),
                           truth.V * (1 + 0.01 * rng.standard_normal(truth.V.shape)),
                           truth.coeffs + 0.01 * rng.standard_normal(truth.coeffs.shape))
    before = relative_error(toy_coupled(), noisy, pts)
    after = relative_error(toy_coupled(), post_optimize(noisy, toy_coupled(), pts), pts)
    assert np.all(after < 0.1)
    assert np.all(after <= before)


@given(seeds)
def test_post_optimize_never_worse(seed):
    pts = sample_uniform(seed, 40, 2)
    target = random_mlp(seed, (2, 4, 2))
    start = estimate_constants(random_decoupled(seed, 2, 2, 2, 3), target, pts)
    out = post_optimize(start, target, pts)
    sse = lambda m: np.sum((target.evaluate(pts) - m.evaluate(pts)) ** 2)
    assert sse(out) <= sse(start)

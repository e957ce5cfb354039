"""Benchmark functions used by the case studies and the acceptance suite."""

from __future__ import annotations

import logging

import numpy as np

from .jacobian import sample_uniform
from .models import DecoupledModel, MonomialPolynomial, expand_to_monomials, random_decoupled, random_mlp
from .pipeline import RunConfig, decouple

log = logging.getLogger(__name__)

TOY_W = np.array([[3.0, 0.5, -1.0], [1.0, 2.0, 3.0]])
TOY_V = np.array([[1.0, 3.0, 0.5], [2.0, 1.0, 3.0]])
# ascending coefficients of z^3 + 0.5 z^2, 2 z^3 + z^2, z^3 + 3 z^2
TOY_BRANCHES = np.array([
    [0.0, 0.0, 0.5, 1.0],
    [0.0, 0.0, 1.0, 2.0],
    [0.0, 0.0, 3.0, 1.0],
])
TOY_EXPONENTS = np.array([
    [2, 0], [1, 1], [0, 2], [3, 0], [2, 1], [1, 2], [0, 3],
])
TOY_COEFS = np.array([
    [5.25, 0.0, -20.5, 29.875, 42.75, 31.5, -2.0],
    [20.75, 41.0, 85.0, 109.375, 120.75, 88.5, 93.0],
]).T

TOY_POINTS = 100
POLY_SHAPE = dict(m=5, n=1, r=3, d=5)
POLY_POINTS = 200
MLP_DIMS = (2, 15, 10, 10, 5, 2)
MLP_POINTS = 100
MLP_DEGREE = 7
# monomial count quoted for the n=1, m=5, d=5 coupled polynomial
POLY_QUOTED_COUPLED_COUNT = 456


def toy_decoupled() -> DecoupledModel:
    return DecoupledModel(TOY_W, TOY_V, TOY_BRANCHES)


def toy_coupled() -> MonomialPolynomial:
    return MonomialPolynomial(TOY_EXPONENTS, TOY_COEFS)


def poly_truth(seed: int) -> DecoupledModel:
    sh = POLY_SHAPE
    return random_decoupled(seed, sh["m"], sh["n"], sh["r"], sh["d"])


def _row(r: int, out, **extra) -> dict:
    row = {"r": r, "errors": out.report.errors, "mean_error": out.report.mean_error,
           "post_errors": out.report.post_errors, "parameters": out.model.param_count(),
           "kinds": [k.value for k in out.result.kinds]}
    row.update(extra)
    log.info("r=%d errors %s", r, np.round(out.report.errors, 3))
    return row


def toy_study(seed: int = 0, ranks=(1, 2, 3, 4), restarts: int = 5, post: bool = False) -> list[dict]:
    """Implicit method with left and right filters on the toy polynomial, degree-3 fits."""
    coupled = toy_coupled()
    pts = sample_uniform(seed, TOY_POINTS, coupled.m)
    rows = []
    for r in ranks:
        cfg = RunConfig("implicit", r, 3, kinds=("L", "R"), seed=seed, restarts=restarts,
                        post_optimize=post)
        rows.append(_row(r, decouple(coupled, pts, cfg)))
    return rows


def polyreduction_study(seed: int = 0, ranks=(1, 2, 3, 4), restarts: int = 5,
                        post: bool = False) -> list[dict]:
    """Implicit method on the monomial expansion of a random decoupled polynomial."""
    coupled = expand_to_monomials(poly_truth(seed))
    pts = sample_uniform(seed, POLY_POINTS, coupled.m)
    rows = []
    for r in ranks:
        cfg = RunConfig("implicit", r, POLY_SHAPE["d"], seed=seed, restarts=restarts, post_optimize=post)
        out = decouple(coupled, pts, cfg)
        bare = out.model.param_count(include_constant=False)
        rows.append(_row(r, out, ratio_standard=coupled.param_count() / bare,
                         ratio_quoted=POLY_QUOTED_COUPLED_COUNT / bare))
    return rows


def mlp_study(seed: int = 0, ranks=tuple(range(1, 11)), restarts: int = 5,
              post: bool = False) -> list[dict]:
    """Implicit method with filter escalation and constants on a random sigmoid network."""
    net = random_mlp(seed, MLP_DIMS)
    pts = sample_uniform(seed, MLP_POINTS, net.m)
    rows = []
    for r in ranks:
        cfg = RunConfig("implicit", r, MLP_DEGREE, seed=seed, restarts=restarts, post_optimize=post)
        out = decouple(net, pts, cfg)
        rows.append(_row(r, out, ratio=net.param_count() / out.model.param_count()))
    return rows

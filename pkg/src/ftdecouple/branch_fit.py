"""From nonparametric branch samples to a parametric decoupled model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as P

from .lm import LMOptions, lm_solve
from .models import DecoupledModel
from .tensor import pinv

__all__ = [
    "FitReport",
    "fit_branch",
    "fit_branches",
    "fit_branches_with_residuals",
    "estimate_constants",
    "relative_error",
    "post_optimize",
]


@dataclass
class FitReport:
    errors: list  # percent, one per output
    mean_error: float
    branch_residuals: list
    seed: int | None = None
    settings: dict = field(default_factory=dict)
    post_errors: list | None = None
    post_mean_error: float | None = None


def fit_branch(z: np.ndarray, g: np.ndarray, degree: int) -> tuple[np.ndarray, float]:
    """Least-squares polynomial of ``g`` against ``z``; returns raw-basis coefficients and rms residual.

    The fit runs on ``z`` mapped affinely onto ``[-1, 1]`` and the
    coefficients are converted back afterwards.
    """
    if degree < 1:
        raise ValueError(f"degree must be at least 1, got {degree}")
    z = np.asarray(z, dtype=float)
    g = np.asarray(g, dtype=float)
    lo, hi = float(z.min()), float(z.max())
    if hi <= lo:
        raise ValueError("cannot fit a branch on a constant grid")
    zs = (2.0 * z - (lo + hi)) / (hi - lo)
    A = P.polyvander(zs, degree)
    coef_scaled = pinv(A) @ g
    poly = Polynomial(coef_scaled, domain=[lo, hi], window=[-1, 1])
    coef = poly.convert().coef
    coef = np.pad(coef, (0, degree + 1 - coef.size))
    resid = g - A @ coef_scaled
    return coef, float(np.sqrt(np.mean(resid ** 2)))


def fit_branches(res, points: np.ndarray | None = None, degree: int = 3):
    """Fit a degree-``degree`` polynomial to every column of ``res.G`` against its grid.

    Grids are recomputed as ``points @ res.V`` when ``points`` is given.
    Returns a :class:`DecoupledModel` with ``c = 0``.
    """
    return fit_branches_with_residuals(res, points, degree)[0]


def fit_branches_with_residuals(res, points=None, degree: int = 3):
    """Like :func:`fit_branches` but also returns the per-branch rms fit residuals."""
    z = res.z if points is None else np.asarray(points) @ res.V
    coeffs, resid = [], []
    for i in range(res.W.shape[1]):
        c, e = fit_branch(z[:, i], res.G[:, i], degree)
        coeffs.append(c)
        resid.append(e)
    return DecoupledModel(res.W, res.V, np.array(coeffs)), resid


def estimate_constants(model: DecoupledModel, coupled, points: np.ndarray) -> DecoupledModel:
    """Least-squares output offsets: the column means of ``f(p) - f_D(p)``."""
    points = np.asarray(points, dtype=float)
    delta = coupled.evaluate(points) - model.with_constant(np.zeros(model.n)).evaluate(points)
    ones = np.ones((points.shape[0], 1))
    c = np.linalg.solve(ones.T @ ones, ones.T @ delta).ravel()
    return model.with_constant(c)


def relative_error(coupled, model, points: np.ndarray) -> np.ndarray:
    """Per-output relative rms error in percent.

    ``100 * rms(f_i - f_Di) / rms(f_i - mean f_i)``; an output that is
    constant over the points yields ``nan``.
    """
    points = np.asarray(points, dtype=float)
    if points.shape[0] < 2:
        raise ValueError("need at least two points")
    f = np.atleast_2d(coupled.evaluate(points))
    fd = np.atleast_2d(model.evaluate(points))
    num = np.sqrt(np.mean((f - fd) ** 2, axis=0))
    den = np.sqrt(np.mean((f - f.mean(axis=0)) ** 2, axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, 100.0 * num / np.where(den > 0, den, 1.0), np.nan)
    return out


def _pack(model: DecoupledModel) -> np.ndarray:
    return np.concatenate([model.W.ravel(), model.V.ravel(), model.coeffs.ravel(), model.c])


def _unpack(x: np.ndarray, like: DecoupledModel) -> DecoupledModel:
    n, m, r, d1 = like.n, like.m, like.r, like.degree + 1
    i = 0
    W = x[i:i + n * r].reshape(n, r); i += n * r
    V = x[i:i + m * r].reshape(m, r); i += m * r
    coeffs = x[i:i + r * d1].reshape(r, d1); i += r * d1
    return DecoupledModel(W, V, coeffs, x[i:i + n])


def post_optimize(model: DecoupledModel, coupled, points: np.ndarray,
                  lm_opts: LMOptions | None = None) -> DecoupledModel:
    """Tune W, V, branch coefficients and c on the sample residuals ``f(p) - f_D(p)``.

    The returned model never has a larger sum of squared residuals than
    the input model.
    """
    points = np.asarray(points, dtype=float)
    target = np.atleast_2d(coupled.evaluate(points))
    lm_opts = lm_opts or LMOptions(max_iters=100)

    def fun(x):
        try:
            return (target - _unpack(x, model).evaluate(points)).ravel()
        except ValueError:
            return np.full(target.size, np.inf)

    x0 = _pack(model)
    res = lm_solve(fun, x0, lm_opts)
    f0 = fun(x0)
    if res.cost <= float(f0 @ f0):
        return _unpack(res.x, model)
    return model

"""A small Levenberg-Marquardt solver with finite-difference Jacobians."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LMOptions", "LMResult", "lm_solve", "fd_jacobian"]


@dataclass(frozen=True)
class LMOptions:
    max_iters: int = 5
    damping_init: float = 1e-3
    damping_up: float = 10.0
    damping_down: float = 0.1
    xtol: float = 1e-12
    ftol: float = 1e-8


@dataclass
class LMResult:
    x: np.ndarray
    cost: float  # sum of squared residuals at x
    iterations: int
    converged: bool
    exhausted: bool


def fd_jacobian(fun, x: np.ndarray, f0: np.ndarray) -> np.ndarray:
    """Forward differences with step ``1e-7 * (1 + |x_j|)``."""
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        h = 1e-7 * (1.0 + abs(x[j]))
        xh = x.copy()
        xh[j] += h
        jac[:, j] = (fun(xh) - f0) / (xh[j] - x[j])
    return jac


def _cost(f: np.ndarray) -> float:
    if not np.all(np.isfinite(f)):
        return np.inf
    return float(f @ f)


def lm_solve(fun, x0, opts: LMOptions | None = None, jac=None) -> LMResult:
    """Minimise ``||fun(x)||^2`` starting from ``x0``.

    A step is accepted only if it lowers the cost; the damping is multiplied
    by ``damping_down`` on acceptance and by ``damping_up`` on rejection.
    Non-finite residuals count as rejected steps. The best iterate is
    returned; ``exhausted`` flags that ``max_iters`` ran out first.
    """
    opts = opts or LMOptions()
    x = np.array(x0, dtype=float).ravel()
    f = np.asarray(fun(x), dtype=float).ravel()
    cost = _cost(f)
    if not np.isfinite(cost):
        raise ValueError("residual is not finite at the starting point")
    if cost == 0.0:
        return LMResult(x, cost, 0, True, False)
    jac_fn = jac if jac is not None else (lambda xx, ff: fd_jacobian(fun, xx, ff))
    mu = opts.damping_init
    J = jac_fn(x, f)
    converged = False
    it = 0
    while it < opts.max_iters:
        it += 1
        JtJ = J.T @ J
        grad = J.T @ f
        if not np.any(grad):
            converged = True
            break
        scale = np.maximum(np.diag(JtJ), 1e-12 * max(np.max(np.diag(JtJ)), 1e-300))
        accepted = False
        while mu < 1e16:
            try:
                step = -np.linalg.solve(JtJ + mu * np.diag(scale), grad)
            except np.linalg.LinAlgError:
                mu *= opts.damping_up
                continue
            x_new = x + step
            f_new = np.asarray(fun(x_new), dtype=float).ravel()
            cost_new = _cost(f_new)
            if cost_new < cost:
                accepted = True
                break
            mu *= opts.damping_up
        if not accepted:
            converged = True
            break
        small_step = np.linalg.norm(step) <= opts.xtol * (1.0 + np.linalg.norm(x))
        small_gain = (cost - cost_new) <= opts.ftol * cost
        x, f, cost = x_new, f_new, cost_new
        mu = max(mu * opts.damping_down, 1e-15)
        if cost == 0.0 or small_step or small_gain:
            converged = True
            break
        J = jac_fn(x, f)
    return LMResult(x, cost, it, converged, not converged)

"""Filtered tensor decompositions of a Jacobian tensor.

Both methods factor ``J ~ [[W, V, F(V) o G]]`` where ``G`` holds samples of
the branch functions themselves and ``F(V) o G`` filters every column of
``G`` with a finite-difference filter built on its grid ``z_i = P v_i``.

* implicit: the same factorisation must hold for several filters at once
  (left and right by default), which only smooth ``G`` can satisfy.
* explicit: central filter in the data term plus ``lam`` times the
  squared difference of rms-normalised left and right filtered columns.

Both are solved by alternating least squares. ``W`` and ``G`` have closed
form updates; ``V`` enters the filters nonlinearly and is updated with
Levenberg-Marquardt, warm-started from the linear relaxation that ignores
the dependence of the filters on ``V``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .cpd import estimate_rank, normalize_columns, stalled
from .filters import DegenerateGridError, FilterBank, FilterKind
from .lm import LMOptions, fd_jacobian, lm_solve
from .tensor import frobenius, khatri_rao, lstsq_min_norm, pinv, psd_solve, reconstruct, unfold

__all__ = [
    "FtdOptions",
    "FtdResult",
    "ftd_implicit",
    "ftd_explicit",
    "lambda_search",
    "smoothness",
    "DEFAULT_SQRT_LAMBDA_GRID",
    "default_lambda_grid",
]

log = logging.getLogger(__name__)

L, C, R = FilterKind.LEFT, FilterKind.CENTRAL, FilterKind.RIGHT
DEFAULT_SQRT_LAMBDA_GRID = (1e-1, 1e0, 1e1, 1e2, 1e3, 1e4)


def default_lambda_grid() -> list[float]:
    """Squares of ``DEFAULT_SQRT_LAMBDA_GRID``, computed exactly as powers of ten."""
    return [10.0 ** (2 * e) for e in range(-1, 5)]


@dataclass(frozen=True)
class FtdOptions:
    r: int
    kinds: tuple | None = None  # implicit filters; None picks (L, R) or (L, R, C)
    lam: float = 0.0  # explicit only
    max_sweeps: int = 200
    tol: float = 1e-8
    seed: int = 0
    restarts: int = 5
    lm: LMOptions = field(default_factory=LMOptions)

    def __post_init__(self):
        if self.r < 1:
            raise ValueError(f"r must be at least 1, got {self.r}")
        if not self.lam >= 0 or not math.isfinite(self.lam):
            raise ValueError(f"lambda must be a finite non-negative number, got {self.lam}")
        if self.kinds is not None:
            kinds = tuple(FilterKind.parse(k) for k in self.kinds)
            if len(set(kinds)) != len(kinds):
                raise ValueError("filter kinds must be distinct")
            object.__setattr__(self, "kinds", kinds)


@dataclass
class FtdResult:
    method: str
    W: np.ndarray
    V: np.ndarray
    G: np.ndarray
    z: np.ndarray
    kinds: tuple
    lam: float
    trace: list  # objective after every sweep
    smooth_trace: list  # normalised left/right disagreement after every sweep
    seed: int
    iterations: int
    warnings: list = field(default_factory=list)

    @property
    def r(self) -> int:
        return self.W.shape[1]

    @property
    def objective(self) -> float:
        return self.trace[-1]

    def bank(self, points: np.ndarray, kinds=(L, C, R)) -> FilterBank:
        return FilterBank(points @ self.V, kinds)

    def derivative(self, points: np.ndarray, kind=C) -> np.ndarray:
        """``F(V) o G`` for one filter kind."""
        return self.bank(points, (kind,)).apply(kind, self.G)

    def relative_residual(self, t: np.ndarray, points: np.ndarray, kind=C) -> float:
        model = reconstruct(self.W, self.V, self.derivative(points, kind))
        return frobenius(t - model) / frobenius(t)


def _rms(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.mean(np.square(a), axis=0))


def _safe(rho: np.ndarray) -> np.ndarray:
    return np.where(rho > 0, rho, 1.0)


def smoothness(bank: FilterBank, G: np.ndarray) -> float:
    """Rms of the difference between rms-normalised left and right filtered columns.

    Zero for samples of a quadratic; of order one for scattered samples.
    """
    gl = bank.apply(L, G)
    gr = bank.apply(R, G)
    return float(np.sqrt(np.mean(np.square(gl / _safe(_rms(gl)) - gr / _safe(_rms(gr))))))


def integrate_derivative(z: np.ndarray, gp: np.ndarray) -> np.ndarray:
    """Trapezoidal antiderivative of ``gp`` along each grid column of ``z``."""
    order = np.argsort(z, axis=0, kind="stable")
    zs = np.take_along_axis(z, order, axis=0)
    gs = np.take_along_axis(gp, order, axis=0)
    inc = 0.5 * (gs[1:] + gs[:-1]) * np.diff(zs, axis=0)
    cum = np.vstack([np.zeros((1, z.shape[1])), np.cumsum(inc, axis=0)])
    out = np.empty_like(cum)
    np.put_along_axis(out, order, cum, axis=0)
    return out


class _Problem:
    """Shared state of one decomposition: tensor, unfoldings, points."""

    def __init__(self, t: np.ndarray, points: np.ndarray):
        t = np.asarray(t, dtype=float)
        points = np.asarray(points, dtype=float)
        if t.ndim != 3:
            raise ValueError("tensor must be third order")
        if points.ndim != 2 or points.shape != (t.shape[2], t.shape[1]):
            raise ValueError(
                f"points shape {points.shape} does not match tensor (N={t.shape[2]}, m={t.shape[1]})"
            )
        if not np.all(np.isfinite(t)):
            raise ValueError("tensor has non-finite entries")
        self.t = t
        self.P = points
        self.n, self.m, self.N = t.shape
        self.J1, self.J2, self.J3 = unfold(t, 1), unfold(t, 2), unfold(t, 3)
        self.tnorm2 = frobenius(t) ** 2


def _penalty_scales(bank: FilterBank, G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return _safe(_rms(bank.apply(L, G))), _safe(_rms(bank.apply(R, G)))


def _objective(prob: _Problem, method: str, kinds, lam, W, V, G, bank=None) -> float:
    bank = bank or FilterBank(prob.P @ V, kinds if method == "implicit" else (L, C, R))
    if method == "implicit":
        return float(sum(frobenius(prob.t - reconstruct(W, V, bank.apply(k, G))) ** 2 for k in kinds))
    fit = frobenius(prob.t - reconstruct(W, V, bank.apply(C, G))) ** 2
    if lam == 0:
        return float(fit)
    gl, gr = bank.apply(L, G), bank.apply(R, G)
    pen = frobenius(gl / _safe(_rms(gl)) - gr / _safe(_rms(gr))) ** 2
    return float(fit + lam * pen)


def _v_residual(prob: _Problem, method: str, kinds, lam, W, G):
    """Residual of the V subproblem and its forward-difference Jacobian.

    Perturbing ``v_i`` changes only the i-th rank-one term (and the i-th
    penalty column), so all ``m r`` perturbed grids are filtered in one
    batch and only that term is differenced.
    """
    m, r = prob.m, W.shape[1]
    data_kinds = tuple(kinds) if method == "implicit" else (C,)
    bank_kinds = data_kinds if lam == 0 else (L, C, R)
    size = prob.t.size * len(data_kinds)
    if lam > 0:
        size += G.size

    def penalty(bank, g):
        gl, gr = bank.apply(L, g), bank.apply(R, g)
        return math.sqrt(lam) * (gl / _safe(_rms(gl)) - gr / _safe(_rms(gr)))

    def fun(x):
        V = x.reshape(m, r)
        try:
            bank = FilterBank(prob.P @ V, bank_kinds)
        except DegenerateGridError:
            return np.full(size, np.inf)
        parts = [(prob.t - reconstruct(W, V, bank.apply(k, G))).ravel() for k in data_kinds]
        if lam > 0:
            parts.append(penalty(bank, G).ravel())
        return np.concatenate(parts)

    def jac(x, f0):
        V = x.reshape(m, r)
        h = 1e-7 * (1.0 + np.abs(V))
        Vp = np.tile(V, (1, m))  # column l*r + i perturbs entry (l, i)
        cols = np.arange(m * r)
        Vp[cols // r, cols] += h.ravel()
        steps = Vp[cols // r, cols] - V.ravel()
        try:
            bank = FilterBank(prob.P @ V, bank_kinds)
            bank_p = FilterBank(prob.P @ Vp, bank_kinds)
        except DegenerateGridError:
            return fd_jacobian(fun, x, f0)
        Wp, Vo, Gp = np.tile(W, (1, m)), np.tile(V, (1, m)), np.tile(G, (1, m))
        blocks = []
        for k in data_kinds:
            new = np.einsum("oj,lj,kj->olkj", Wp, Vp, bank_p.apply(k, Gp))
            old = np.einsum("oj,lj,kj->olkj", Wp, Vo, np.tile(bank.apply(k, G), (1, m)))
            blocks.append((old - new).reshape(-1, m * r))
        if lam > 0:
            pj = np.zeros((prob.N, r, m * r))
            diff = penalty(bank_p, Gp) - np.tile(penalty(bank, G), (1, m))
            pj[:, cols % r, cols] = diff
            blocks.append(pj.reshape(-1, m * r))
        return np.vstack(blocks) / steps

    return fun, jac


def _update_w(prob: _Problem, V, gps) -> np.ndarray:
    """Stacked least squares over all filtered copies of G'."""
    K = np.vstack([khatri_rao(gp, V) for gp in gps])
    rhs = np.vstack([prob.J1.T] * len(gps))
    return lstsq_min_norm(K, rhs).T


def _relaxed_v(prob: _Problem, W, gp) -> np.ndarray:
    return prob.J2 @ khatri_rao(gp, W) @ pinv((gp.T @ gp) * (W.T @ W))


def _lm_v(prob, method, kinds, lam, W, V_start, G, lm_opts, warnings) -> np.ndarray | None:
    fun, jac = _v_residual(prob, method, kinds, lam, W, G)
    try:
        res = lm_solve(fun, V_start.ravel(), lm_opts, jac=jac)
    except ValueError:
        return None
    if not np.isfinite(res.cost):
        warnings.append("V-update: Levenberg-Marquardt produced no finite iterate")
        return None
    return normalize_columns(res.x.reshape(V_start.shape))[0]


def _v_candidates(prob, method, kinds, lam, W, V, G, lm_opts, warnings):
    """Yield candidate V updates.

    LM started from the relaxation built on the first data filter, then the
    current V itself (G is still re-solved for it, so the sweep cannot get worse).
    """
    first = kinds[0] if method == "implicit" else C
    bank = FilterBank(prob.P @ V, (first,))
    V0 = _relaxed_v(prob, W, bank.apply(first, G))
    if np.all(np.isfinite(V0)) and np.all(np.linalg.norm(V0, axis=0) > 0):
        cand = _lm_v(prob, method, kinds, lam, W, normalize_columns(V0)[0], G, lm_opts, warnings)
        if cand is not None:
            yield cand
    yield V


def _fixed_rows(z: np.ndarray) -> np.ndarray:
    """Flat index into vec(G) of the entry pinned to zero in every column."""
    N, r = z.shape
    return np.argmin(z, axis=0) + N * np.arange(r)


def _normal_blocks(cols, wts, gram, size: int) -> np.ndarray:
    """Dense ``sum_k gram_ij (F_i[k])^T F_j[k]`` from row stencils, as a ``size x size`` matrix.

    ``cols`` and ``wts`` are ``r x N x K`` with ``cols`` already offset into
    the stacked unknown vector.
    """
    r, N, K = cols.shape
    rows = np.broadcast_to(cols[:, None, :, :, None], (r, r, N, K, K))
    cc = np.broadcast_to(cols[None, :, :, None, :], (r, r, N, K, K))
    vals = gram[:, :, None, None, None] * wts[:, None, :, :, None] * wts[None, :, :, None, :]
    flat = (rows * size + cc).ravel()
    return np.bincount(flat, weights=vals.ravel(), minlength=size * size).reshape(size, size)


def _solve_g(prob: _Problem, V, W, bank: FilterBank, data_kinds, penalty=None) -> np.ndarray:
    """Closed-form G update.

    Minimises ``sum_s ||J_(3) - (F_s o G)(V kr W)^T||^2`` plus the optional
    penalty ``sum_i ||P_i g_i||^2`` over vec(G), with one entry of every
    column pinned to zero. ``penalty`` is a list of ``(kind, scales)``
    pairs, ``P_i = sum scales[i] F_kind,i``. Solved through the normal
    equations, which are singular for some ranks; see ``psd_solve``.
    """
    N, r = prob.N, W.shape[1]
    size = N * r
    B = khatri_rao(V, W)
    gram = B.T @ B
    JB = prob.J3 @ B
    offset = (N * np.arange(r))[:, None, None]

    cols, wts = (np.concatenate(a, axis=1) for a in zip(*(bank.stencils(k) for k in data_kinds)))
    cols = cols + offset
    M = _normal_blocks(cols, wts, gram, size)
    rhs = np.bincount(cols.ravel(), weights=(wts * np.tile(JB.T, len(data_kinds))[:, :, None]).ravel(),
                      minlength=size)
    if penalty:
        parts = [bank.stencils(k) for k, _ in penalty]
        cols = np.concatenate([c for c, _ in parts], axis=2) + offset
        wts = np.concatenate([w * np.asarray(sc)[:, None, None] for (_, w), (_, sc) in zip(parts, penalty)],
                             axis=2)
        M += _normal_blocks(cols, wts, np.eye(r), size)
    # pinned entries become decoupled unit rows, so the solve stays minimum norm on the rest
    fixed = _fixed_rows(bank.z)
    M[fixed, :] = 0.0
    M[:, fixed] = 0.0
    top = float(np.max(np.diag(M)))
    M[fixed, fixed] = top if top > 0 else 1.0
    rhs[fixed] = 0.0
    g = psd_solve(M, rhs)
    g[fixed] = 0.0
    return g.reshape(r, N).T


def _update_g(prob, method, lam, W, V, G, bank, kinds) -> np.ndarray:
    if method == "implicit":
        return _solve_g(prob, V, W, bank, kinds)
    penalty = None
    if lam > 0:
        rl, rr = _penalty_scales(bank, G)
        s = math.sqrt(lam)
        penalty = [(L, s / rl), (R, -s / rr)]
    return _solve_g(prob, V, W, bank, (C,), penalty)


def _run(prob: _Problem, method: str, kinds: tuple, opts: FtdOptions, seed: int) -> FtdResult:
    n, m, N, r = prob.n, prob.m, prob.N, opts.r
    lam = opts.lam if method == "explicit" else 0.0
    bank_kinds = kinds if method == "implicit" else (L, C, R)
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((n, r))
    V = normalize_columns(rng.standard_normal((m, r)))[0]
    G = rng.standard_normal((N, r))
    warnings: list[str] = []
    trace, smooth_trace = [], []
    best = None
    prev = np.inf
    for sweep in range(opts.max_sweeps):
        bank = FilterBank(prob.P @ V, (L, C, R))
        W = _update_w(prob, V, [bank.apply(k, G) for k in (kinds if method == "implicit" else (C,))])
        obj_w = _objective(prob, method, kinds, lam, W, V, G, bank)

        # a V step counts only together with the G update it enables; the
        # relaxation-started candidate is kept if the sweep objective does
        # not increase, otherwise V stays and only G moves
        chosen = None
        for V_new in _v_candidates(prob, method, kinds, lam, W, V, G, opts.lm, warnings):
            try:
                bank_new = FilterBank(prob.P @ V_new, (L, C, R))
            except DegenerateGridError:
                continue
            G_new = _update_g(prob, method, lam, W, V_new, G, bank_new, kinds)
            obj = _objective(prob, method, kinds, lam, W, V_new, G_new, bank_new)
            if chosen is None or obj < chosen[0]:
                chosen = (obj, V_new, G_new, bank_new)
            if obj <= min(obj_w, prev):
                break
        if chosen is None:
            raise DegenerateGridError("no V update gives a valid grid")
        obj, V, G, bank = chosen
        prev = obj
        trace.append(obj)
        smooth_trace.append(smoothness(bank, G))
        if best is None or obj <= best[0]:
            best = (obj, W.copy(), V.copy(), G.copy())
        if obj <= 1e-28 * prob.tnorm2 or stalled(trace, opts.tol):
            break
    _, W, V, G = best
    return FtdResult(method, W, V, G, prob.P @ V, tuple(bank_kinds), lam,
                     trace, smooth_trace, seed, len(trace), warnings)


def _best_of_restarts(prob, method, kinds, opts) -> FtdResult:
    best = None
    for k in range(max(1, opts.restarts)):
        res = _run(prob, method, kinds, opts, opts.seed ^ k)
        log.debug("%s r=%d restart %d: objective %.3e after %d sweeps",
                  method, opts.r, k, min(res.trace), res.iterations)
        if best is None or min(res.trace) < min(best.trace):
            best = res
    return best


def resolve_kinds(t: np.ndarray, opts: FtdOptions) -> tuple:
    """Filters for the implicit method; adds the central filter when r exceeds the tensor rank."""
    if opts.kinds is not None:
        if len(opts.kinds) < 2:
            raise ValueError("the implicit method needs at least two filter kinds")
        return opts.kinds
    if opts.r > 1 and estimate_rank(t, opts.r - 1) < opts.r:
        return (L, R, C)
    return (L, R)


def ftd_implicit(t: np.ndarray, points: np.ndarray, opts: FtdOptions) -> FtdResult:
    """Implicit-smoothness decomposition (best of ``opts.restarts`` starts)."""
    prob = _Problem(t, points)
    kinds = resolve_kinds(prob.t, opts)
    return _best_of_restarts(prob, "implicit", kinds, opts)


def ftd_explicit(t: np.ndarray, points: np.ndarray, opts: FtdOptions) -> FtdResult:
    """Explicit-smoothness decomposition with weight ``opts.lam`` on the left/right penalty."""
    prob = _Problem(t, points)
    return _best_of_restarts(prob, "explicit", (L, C, R), opts)


@dataclass
class LambdaRun:
    lam: float
    seed: int
    mean_error: float | None
    errors: list | None
    objective: float | None
    failure: str | None = None


def lambda_search(t, points, opts: FtdOptions, grid, coupled, degree: int):
    """Run the explicit method for every ``lam`` in ``grid``.

    Run ``j`` uses seed ``opts.seed ^ (1000 + j)``. The winner minimises the
    mean relative function error of the fitted decoupled model on the
    operating points. Returns ``(result, model, runs)``.
    """
    from .branch_fit import estimate_constants, fit_branches, relative_error

    grid = [float(x) for x in grid]
    if not grid:
        raise ValueError("lambda grid is empty")
    if any(not (x >= 0) for x in grid):
        raise ValueError(f"lambda values must be non-negative: {grid}")
    runs, best = [], None
    for j, lam in enumerate(grid):
        seed = opts.seed ^ (1000 + j)
        try:
            res = ftd_explicit(t, points, replace(opts, lam=lam, seed=seed))
            model = estimate_constants(fit_branches(res, points, degree), coupled, points)
            errs = relative_error(coupled, model, points)
        except (DegenerateGridError, np.linalg.LinAlgError, FloatingPointError) as exc:
            runs.append(LambdaRun(lam, seed, None, None, None, str(exc)))
            continue
        mean = float(np.mean(errs))
        runs.append(LambdaRun(lam, seed, mean, [float(e) for e in errs], min(res.trace)))
        if best is None or mean < best[0]:
            best = (mean, res, model)
    if best is None:
        raise RuntimeError("every lambda run failed")
    return best[1], best[2], runs

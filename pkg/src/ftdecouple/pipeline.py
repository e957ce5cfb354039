"""End-to-end decoupling: Jacobian tensor, decomposition, branch fits, constants, report."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .branch_fit import (
    FitReport,
    estimate_constants,
    fit_branches_with_residuals,
    post_optimize,
    relative_error,
)
from .cpd import CpdOptions, cpd_als
from .filters import DegenerateGridError, FilterBank, FilterKind
from .ftd import (
    FtdOptions,
    FtdResult,
    default_lambda_grid,
    ftd_implicit,
    integrate_derivative,
    lambda_search,
    smoothness,
)
from .jacobian import build_tensor, check_points
from .lm import LMOptions

__all__ = ["RunConfig", "Outcome", "NumericalFailure", "decouple", "METHODS"]

METHODS = ("cpd", "implicit", "explicit")


class NumericalFailure(RuntimeError):
    """No usable decomposition (degenerate grids, failed solves)."""


@dataclass(frozen=True)
class RunConfig:
    method: str = "implicit"
    r: int = 1
    degree: int = 3
    kinds: tuple | None = None  # implicit only; None lets the rank estimate decide
    lambda_grid: tuple | None = None  # explicit only; None is the default grid
    seed: int = 0
    restarts: int = 5
    max_sweeps: int | None = None  # None: 200 for FTD, 1000 for CPD
    tol: float | None = None  # None: 1e-8 for FTD, 1e-10 for CPD
    lm: LMOptions = field(default_factory=LMOptions)
    post_optimize: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.r < 1:
            raise ValueError(f"r must be at least 1, got {self.r}")
        if self.degree < 1:
            raise ValueError(f"degree must be at least 1, got {self.degree}")
        if self.restarts < 1:
            raise ValueError(f"restarts must be at least 1, got {self.restarts}")
        if self.max_sweeps is not None and self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be at least 1, got {self.max_sweeps}")
        if self.tol is not None and not self.tol >= 0:
            raise ValueError(f"tol must be non-negative, got {self.tol}")
        if self.kinds is not None:
            if self.method != "implicit":
                raise ValueError("filter kinds can only be chosen for the implicit method")
            kinds = tuple(FilterKind.parse(k) for k in self.kinds)
            if len(kinds) < 2 or len(set(kinds)) != len(kinds):
                raise ValueError("the implicit method needs at least two distinct filter kinds")
            object.__setattr__(self, "kinds", kinds)
        if self.lambda_grid is not None:
            if self.method != "explicit":
                raise ValueError("a lambda grid only applies to the explicit method")
            grid = tuple(float(x) for x in self.lambda_grid)
            if not grid or any(not (x >= 0) or not np.isfinite(x) for x in grid):
                raise ValueError(f"lambda grid must be non-empty, finite and non-negative: {grid}")
            object.__setattr__(self, "lambda_grid", grid)

    @property
    def sweeps(self) -> int:
        if self.max_sweeps is not None:
            return self.max_sweeps
        return 1000 if self.method == "cpd" else 200

    @property
    def tolerance(self) -> float:
        if self.tol is not None:
            return self.tol
        return 1e-10 if self.method == "cpd" else 1e-8

    def resolved(self) -> dict:
        """Every setting, defaults filled in."""
        grid = self.lambda_grid
        if self.method == "explicit" and grid is None:
            grid = tuple(default_lambda_grid())
        return {
            "method": self.method,
            "r": self.r,
            "degree": self.degree,
            "kinds": None if self.kinds is None else [k.value for k in self.kinds],
            "lambda_grid": None if grid is None else list(grid),
            "seed": self.seed,
            "restarts": self.restarts,
            "max_sweeps": self.sweeps,
            "tol": self.tolerance,
            "lm": asdict(self.lm),
            "post_optimize": self.post_optimize,
            "seed_derivation": "restart k uses seed xor k; lambda run j uses seed xor (1000 + j)",
        }

    def ftd_options(self) -> FtdOptions:
        return FtdOptions(r=self.r, kinds=self.kinds, max_sweeps=self.sweeps, tol=self.tolerance,
                          seed=self.seed, restarts=self.restarts, lm=self.lm)


@dataclass
class Outcome:
    config: RunConfig
    result: FtdResult
    model: object  # DecoupledModel with constants
    post_model: object | None
    report: FitReport
    tensor: np.ndarray
    points: np.ndarray
    lambda_runs: list = field(default_factory=list)

    def branch_table(self, i: int) -> np.ndarray:
        """Columns: sorted z_i, raw g_i estimate, fitted g_i."""
        z = self.points @ self.result.V[:, i]
        order = np.argsort(z, kind="stable")
        fit = np.polynomial.polynomial.polyval(z, self.model.coeffs[i])
        return np.column_stack([z[order], self.result.G[order, i], fit[order]])

    def summary(self) -> dict:
        res = self.result
        rep = self.report
        out = {
            "config": self.config.resolved(),
            "method": res.method,
            "r": res.r,
            "kinds": [k.value for k in res.kinds],
            "lambda": res.lam if res.method == "explicit" else None,
            "objective": min(res.trace) if res.trace else None,
            "sweeps": res.iterations,
            "restart_seed": res.seed,
            "tensor_relative_residual": self._tensor_residual(),
            "smoothness": self._smoothness(),
            "errors": rep.errors,
            "mean_error": rep.mean_error,
            "post_errors": rep.post_errors,
            "post_mean_error": rep.post_mean_error,
            "branch_fit_residuals": rep.branch_residuals,
            "constants": self.model.c,
            "parameters": self.model.param_count(),
            "warnings": list(res.warnings),
        }
        if self.lambda_runs:
            out["lambda_runs"] = [asdict(run) for run in self.lambda_runs]
        return out

    def _tensor_residual(self) -> float | None:
        if self.result.method == "cpd":
            return None
        kind = FilterKind.CENTRAL if self.result.method == "explicit" else self.result.kinds[0]
        try:
            return self.result.relative_residual(self.tensor, self.points, kind)
        except DegenerateGridError:
            return None

    def _smoothness(self) -> float | None:
        try:
            bank = FilterBank(self.points @ self.result.V, (FilterKind.LEFT, FilterKind.RIGHT))
        except DegenerateGridError:
            return None
        return smoothness(bank, self.result.G)


def _cpd_as_result(t, points, cfg: RunConfig) -> FtdResult:
    cres = cpd_als(t, cfg.r, CpdOptions(max_sweeps=cfg.sweeps, tol=cfg.tolerance,
                                        seed=cfg.seed, restarts=cfg.restarts))
    z = points @ cres.V
    # CPD estimates derivatives; integrate along each grid to get branch samples
    G = integrate_derivative(z, cres.Gp)
    return FtdResult("cpd", cres.W, cres.V, G, z, (), 0.0, list(cres.trace), [], cres.seed,
                     cres.iterations, [])


def decouple(coupled, points: np.ndarray, cfg: RunConfig) -> Outcome:
    """Decouple ``coupled`` on ``points`` with the method and budgets in ``cfg``.

    Raises :class:`NumericalFailure` when no usable result is produced.
    """
    points = check_points(points)
    if points.shape[1] != coupled.m:
        raise ValueError(f"points have {points.shape[1]} columns, model has {coupled.m} inputs")
    runs: list = []
    try:
        t = build_tensor(coupled, points)
        if cfg.method == "cpd":
            res = _cpd_as_result(t, points, cfg)
        elif cfg.method == "implicit":
            res = ftd_implicit(t, points, cfg.ftd_options())
        else:
            grid = cfg.lambda_grid if cfg.lambda_grid is not None else default_lambda_grid()
            res, _, runs = lambda_search(t, points, cfg.ftd_options(), grid, coupled, cfg.degree)
        model, resid = fit_branches_with_residuals(res, points, cfg.degree)
        model = estimate_constants(model, coupled, points)
    except (DegenerateGridError, np.linalg.LinAlgError, FloatingPointError, RuntimeError) as exc:
        raise NumericalFailure(str(exc)) from exc
    errs = relative_error(coupled, model, points)
    report = FitReport([float(e) for e in errs], float(np.mean(errs)), [float(e) for e in resid],
                       seed=cfg.seed, settings=cfg.resolved())
    post = None
    if cfg.post_optimize:
        post = post_optimize(model, coupled, points)
        perrs = relative_error(coupled, post, points)
        report.post_errors = [float(e) for e in perrs]
        report.post_mean_error = float(np.mean(perrs))
    return Outcome(cfg, res, model, post, report, t, points, runs)

"""Plain CP decomposition by alternating least squares."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import frobenius, khatri_rao, pinv, reconstruct, unfold

__all__ = ["CpdOptions", "CpdResult", "cpd_als", "estimate_rank", "normalize_columns"]


@dataclass(frozen=True)
class CpdOptions:
    max_sweeps: int = 1000
    tol: float = 1e-10
    seed: int = 0
    restarts: int = 5


@dataclass
class CpdResult:
    W: np.ndarray
    V: np.ndarray
    Gp: np.ndarray
    trace: list = field(default_factory=list)  # squared residual after each sweep
    iterations: int = 0
    seed: int = 0

    @property
    def residual(self) -> float:
        return float(np.sqrt(self.trace[-1])) if self.trace else np.inf

    def relative_residual(self, t: np.ndarray) -> float:
        return frobenius(t - reconstruct(self.W, self.V, self.Gp)) / frobenius(t)


def normalize_columns(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(a, axis=0)
    norms = np.where(norms > 0, norms, 1.0)
    return a / norms, norms


def stalled(trace, tol: float, window: int = 5) -> bool:
    """Relative objective change over the last ``window`` sweeps below ``tol``."""
    if len(trace) <= window:
        return False
    old = trace[-1 - window]
    return old <= 0 or abs(old - trace[-1]) <= tol * old


def _cpd_single(t, r, opts: CpdOptions, seed: int) -> CpdResult:
    n, m, N = t.shape
    rng = np.random.default_rng(seed)
    W = normalize_columns(rng.standard_normal((n, r)))[0]
    V = normalize_columns(rng.standard_normal((m, r)))[0]
    Gp = rng.standard_normal((N, r))
    J1, J2, J3 = unfold(t, 1), unfold(t, 2), unfold(t, 3)
    tnorm2 = frobenius(t) ** 2
    trace = []
    for sweep in range(opts.max_sweeps):
        W = J1 @ khatri_rao(Gp, V) @ pinv((Gp.T @ Gp) * (V.T @ V))
        W, s = normalize_columns(W)
        Gp = Gp * s
        V = J2 @ khatri_rao(Gp, W) @ pinv((Gp.T @ Gp) * (W.T @ W))
        V, s = normalize_columns(V)
        Gp = Gp * s
        Gp = J3 @ khatri_rao(V, W) @ pinv((V.T @ V) * (W.T @ W))
        trace.append(frobenius(J3 - Gp @ khatri_rao(V, W).T) ** 2)
        if trace[-1] <= 1e-30 * tnorm2 or stalled(trace, opts.tol):
            break
    return CpdResult(W, V, Gp, trace, len(trace), seed)


def cpd_als(t: np.ndarray, r: int, opts: CpdOptions | None = None) -> CpdResult:
    """Best of ``opts.restarts`` random-start CPD-ALS runs (lowest final residual).

    Restart ``k`` uses seed ``opts.seed ^ k``. Each sweep updates W, V and
    G' with the Gram-Hadamard normal equations; W and V columns are
    normalised with the scale pushed into G'.
    """
    opts = opts or CpdOptions()
    if r < 1:
        raise ValueError(f"rank must be at least 1, got {r}")
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("tensor has non-finite entries")
    best = None
    for k in range(max(1, opts.restarts)):
        res = _cpd_single(t, r, opts, opts.seed ^ k)
        if best is None or res.trace[-1] < best.trace[-1]:
            best = res
    return best


def estimate_rank(t: np.ndarray, max_rank: int, rtol: float = 1e-6,
                  opts: CpdOptions | None = None) -> int:
    """Smallest r whose CPD reaches relative residual ``rtol``.

    Returns ``max_rank + 1`` when no rank up to ``max_rank`` is exact.
    """
    opts = opts or CpdOptions(max_sweeps=500, restarts=3)
    for r in range(1, max_rank + 1):
        if cpd_als(t, r, opts).relative_residual(t) < rtol:
            return r
    return max_rank + 1

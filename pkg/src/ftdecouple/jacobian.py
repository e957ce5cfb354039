"""Operating points and the stacked Jacobian tensor."""

from __future__ import annotations

import numpy as np

__all__ = ["sample_uniform", "build_tensor", "check_points"]


def sample_uniform(seed: int, n_points: int, m: int, lo: float = -1.5, hi: float = 1.5) -> np.ndarray:
    """``n_points x m`` i.i.d. samples from U(lo, hi)."""
    if not lo < hi:
        raise ValueError(f"need lo < hi, got {lo}, {hi}")
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, size=(n_points, m))


def check_points(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] < 3:
        raise ValueError(f"operating points must be an N x m matrix with N >= 3, got {points.shape}")
    if not np.all(np.isfinite(points)):
        raise ValueError("operating points contain non-finite values")
    return points


def build_tensor(model, points: np.ndarray) -> np.ndarray:
    """Jacobian tensor of shape ``(n, m, N)``; slice ``[:, :, k]`` is the Jacobian at point k."""
    points = check_points(points)
    jac = np.asarray(model.jacobian(points), dtype=float)
    if not np.all(np.isfinite(jac)):
        bad = int(np.flatnonzero(~np.isfinite(jac).all(axis=(1, 2)))[0])
        raise FloatingPointError(f"non-finite Jacobian at operating point {bad}")
    return np.ascontiguousarray(np.moveaxis(jac, 0, 2))

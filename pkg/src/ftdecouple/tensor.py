"""Dense third-order tensor helpers.

Tensors are plain ``numpy`` arrays of shape ``(n, m, N)``: output index,
input index, operating-point index. Unfoldings follow the Kolda & Bader
convention, so the columns of the mode-k unfolding are the mode-k fibers
with the earlier remaining index varying fastest.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "unfold",
    "fold",
    "khatri_rao",
    "reconstruct",
    "pinv",
    "lstsq_min_norm",
    "psd_solve",
    "frobenius",
]


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding (``mode`` in 1, 2, 3).

    Returns an ``n x (m N)``, ``m x (n N)`` or ``N x (n m)`` matrix so that
    ``unfold(reconstruct(W, V, H), 1) == W @ khatri_rao(H, V).T`` and the
    analogous identities with ``(H, W)`` and ``(V, W)`` for modes 2 and 3.
    """
    t = np.asarray(t)
    if t.ndim != 3:
        raise ValueError(f"expected a third-order tensor, got ndim={t.ndim}")
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode!r}")
    ax = mode - 1
    return np.reshape(np.moveaxis(t, ax, 0), (t.shape[ax], -1), order="F")


def fold(mat: np.ndarray, mode: int, shape: tuple[int, int, int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode!r}")
    ax = mode - 1
    rest = [s for i, s in enumerate(shape) if i != ax]
    t = np.reshape(np.asarray(mat), (shape[ax], *rest), order="F")
    return np.moveaxis(t, 0, ax)


def khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product; row ``i * b.rows + j`` holds ``a[i] * b[j]``."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"khatri_rao needs equal column counts, got {a.shape[1]} and {b.shape[1]}"
        )
    return np.einsum("ir,jr->ijr", a, b).reshape(a.shape[0] * b.shape[0], a.shape[1])


def reconstruct(w: np.ndarray, v: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Sum of rank-one terms ``t[o, l, k] = sum_i w[o, i] v[l, i] h[k, i]``."""
    w, v, h = (np.atleast_2d(x) for x in (w, v, h))
    if not w.shape[1] == v.shape[1] == h.shape[1]:
        raise ValueError(
            f"factor column counts differ: {w.shape[1]}, {v.shape[1]}, {h.shape[1]}"
        )
    return np.einsum("oi,li,ki->olk", w, v, h)


def _svd_tol(s: np.ndarray, shape: tuple[int, int]) -> float:
    if s.size == 0:
        return 0.0
    return float(s[0]) * max(shape) * np.finfo(float).eps


def pinv(a: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudoinverse.

    Singular values below ``sigma_max * max(a.shape) * eps`` count as zero.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if not np.all(np.isfinite(a)):
        raise ValueError("pinv: matrix has non-finite entries")
    if a.size == 0:
        return np.zeros(a.shape[::-1])
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    keep = s > _svd_tol(s, a.shape)
    return (vt[keep].T / s[keep]) @ u[:, keep].T


def lstsq_min_norm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Return ``pinv(a) @ b`` without forming the pseudoinverse.

    Tall matrices are first reduced by an economic QR so the SVD runs on a
    square factor with the same singular values.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float)
    rows, cols = a.shape
    if rows > 2 * cols:
        q, rfac = np.linalg.qr(a)
        u, s, vt = np.linalg.svd(rfac)
        rhs = u.T @ (q.T @ b)
    else:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
        rhs = u.T @ b
    keep = s > _svd_tol(s, a.shape)
    coef = rhs[keep] / (s[keep] if rhs.ndim == 1 else s[keep, None])
    return vt[keep].T @ coef


def psd_solve(m: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimum-norm solution of ``m x = b`` for symmetric positive semidefinite ``m``.

    Only the lower triangle of ``m`` is read. A pivoted Cholesky factor with
    the rank cut at ``n * eps * max(diag(m))`` gives a basic solution, which
    is then projected off the null space of the factor.
    """
    import scipy.linalg as sla
    from scipy.linalg import lapack

    m = np.asarray(m, dtype=float)
    b = np.asarray(b, dtype=float)
    n = m.shape[0]
    if n == 0:
        return np.zeros_like(b)
    scale = float(np.max(np.diag(m)))
    if not scale > 0:
        return np.zeros_like(b)
    c, piv, k, info = lapack.dpstrf(m, tol=n * np.finfo(float).eps * scale, lower=1)
    if info < 0:
        raise np.linalg.LinAlgError(f"dpstrf failed with info={info}")
    piv = piv - 1
    l11 = c[:k, :k]
    bp = b[piv]
    y = np.zeros_like(bp)
    tmp = sla.solve_triangular(l11, bp[:k], lower=True, check_finite=False)
    y[:k] = sla.solve_triangular(l11, tmp, lower=True, trans="T", check_finite=False)
    if k < n:
        # null space of the factor: columns of [-L11^-T L21^T; I]
        x12 = sla.solve_triangular(l11, c[k:, :k].T, lower=True, trans="T", check_finite=False)
        gram = np.eye(n - k) + x12.T @ x12
        coef = sla.cho_solve(sla.cho_factor(gram, lower=True, check_finite=False),
                             y[k:] - x12.T @ y[:k], check_finite=False)
        y[:k] += x12 @ coef
        y[k:] -= coef
    x = np.empty_like(y)
    x[piv] = y
    return x


def frobenius(a: np.ndarray) -> float:
    """Square root of the sum of squared entries (any shape).

    The sum is correctly rounded, so it does not depend on the memory
    order of ``a`` (a tensor and its unfoldings give the same bits).
    """
    return math.sqrt(math.fsum(np.square(np.asarray(a, dtype=float)).ravel().tolist()))

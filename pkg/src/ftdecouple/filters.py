"""Finite-difference filters on non-equidistant grids.

A filter ``F = S^-1 D S`` sorts a vector of samples by its grid ``z``,
applies a banded three-point derivative operator ``D`` built from Lagrange
interpolation weights and scatters the result back to the original order.

Every row of ``D`` estimates the derivative at one sorted grid point using a
window of three consecutive points containing it. The filter kind only
decides where that point sits in the window:

* ``LEFT``    window ``(i-2, i-1, i)``, point is the last one
* ``CENTRAL`` window ``(i-1, i, i+1)``, point is the middle one
* ``RIGHT``   window ``(i, i+1, i+2)``, point is the first one

Near the boundaries the window is clipped into ``[0, N-1]`` while the
evaluation point stays at ``i``, which gives exactly the boundary rows of
the three classic schemes (e.g. the left filter uses a backward scheme on
row 0 and a central scheme on row 1).
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "FilterKind",
    "DegenerateGridError",
    "FdOperator",
    "FilterBank",
    "sort_permutation",
    "lagrange_weights",
    "lagrange_weights_central",
    "lagrange_weights_left",
    "lagrange_weights_right",
    "build_operator",
    "apply_filter",
    "build_filter_bank",
    "forward_two_point_operator",
]

GRID_RTOL = 1e-12


class FilterKind(enum.Enum):
    LEFT = "L"
    CENTRAL = "C"
    RIGHT = "R"

    @property
    def offset(self) -> int:
        """Position of the evaluation point inside an interior window."""
        return {"L": 2, "C": 1, "R": 0}[self.value]

    @classmethod
    def parse(cls, spec: str | FilterKind) -> FilterKind:
        if isinstance(spec, FilterKind):
            return spec
        key = spec.strip().upper()
        names = {"L": cls.LEFT, "LEFT": cls.LEFT, "LEFT3": cls.LEFT,
                 "C": cls.CENTRAL, "CENTRAL": cls.CENTRAL, "CENTRAL3": cls.CENTRAL,
                 "R": cls.RIGHT, "RIGHT": cls.RIGHT, "RIGHT3": cls.RIGHT}
        if key not in names:
            raise ValueError(f"unknown filter kind {spec!r}")
        return names[key]


class DegenerateGridError(ValueError):
    """Two grid values are (numerically) identical."""

    def __init__(self, message: str, branch: int | None = None):
        super().__init__(message)
        self.branch = branch


def _check_grid(zs: np.ndarray, branch: int | None = None) -> None:
    """``zs`` sorted ascending along axis 0 (vector or N x r)."""
    if zs.shape[0] < 3:
        raise ValueError(f"a three-point filter needs at least 3 points, got {zs.shape[0]}")
    if not np.isfinite(zs).all():
        raise DegenerateGridError("grid has non-finite entries", branch)
    span = zs[-1] - zs[0]
    gaps = (zs[1:] - zs[:-1]).min(axis=0)
    bad = (gaps <= GRID_RTOL * span) | (span <= 0)
    if np.any(bad):
        bad = np.atleast_1d(bad)
        col = int(np.flatnonzero(bad)[0])
        where = branch if zs.ndim == 1 else col
        raise DegenerateGridError(
            f"degenerate grid on branch {where}: adjacent points closer than "
            f"{GRID_RTOL:g} * range",
            where,
        )


def sort_permutation(z: np.ndarray) -> np.ndarray:
    """Stable ascending order of ``z``; ``z[perm]`` is sorted.

    Raises :class:`DegenerateGridError` if two values are closer than
    ``1e-12 * (max z - min z)``.
    """
    z = np.asarray(z, dtype=float)
    perm = np.argsort(z, kind="stable")
    _check_grid(z[perm])
    return perm


def lagrange_weights(zw: np.ndarray, x: np.ndarray | float) -> np.ndarray:
    """Derivative weights of the quadratic Lagrange interpolant at ``x``.

    ``zw`` has shape ``(3,)`` or ``(3, ...)``; the result has the same shape.
    """
    z0, z1, z2 = (np.asarray(zw, dtype=float)[j] for j in range(3))
    d0, d1, d2 = x - z0, x - z1, x - z2
    w0 = (d1 + d2) / ((z0 - z1) * (z0 - z2))
    w1 = (d0 + d2) / ((z1 - z0) * (z1 - z2))
    w2 = (d0 + d1) / ((z2 - z0) * (z2 - z1))
    return np.stack([w0, w1, w2])


def _window(zw) -> np.ndarray:
    zw = np.asarray(zw, dtype=float)
    if zw.shape[0] != 3 or not (zw[0] < zw[1] < zw[2]):
        raise ValueError(f"window must hold 3 strictly ascending values, got {zw}")
    return zw


def lagrange_weights_central(zw) -> np.ndarray:
    zw = _window(zw)
    return lagrange_weights(zw, zw[1])


def lagrange_weights_left(zw) -> np.ndarray:
    """Weights for the derivative at the last (most forward) window point."""
    zw = _window(zw)
    return lagrange_weights(zw, zw[2])


def lagrange_weights_right(zw) -> np.ndarray:
    """Weights for the derivative at the first (backward) window point."""
    zw = _window(zw)
    return lagrange_weights(zw, zw[0])


@functools.lru_cache(maxsize=64)
def _window_starts(n: int, kind: FilterKind) -> np.ndarray:
    st = np.clip(np.arange(n) - kind.offset, 0, n - 3)
    st.flags.writeable = False
    return st


def _band_weights(zs: np.ndarray, kind: FilterKind) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The three weight rows (each shaped like ``zs``) for sorted grids ``zs``."""
    st = _window_starts(zs.shape[0], kind)
    z0, z1, z2 = zs[st], zs[st + 1], zs[st + 2]
    d0, d1, d2 = zs - z0, zs - z1, zs - z2
    e01, e02, e12 = z0 - z1, z0 - z2, z1 - z2
    return (d1 + d2) / (e01 * e02), (d0 + d2) / (-e01 * e12), (d0 + d1) / (e02 * e12)


@dataclass(frozen=True)
class FdOperator:
    """Banded derivative operator on a sorted grid: 3 weights per row."""

    kind: FilterKind
    cols: np.ndarray  # (N, 3) sorted-grid column indices
    weights: np.ndarray  # (N, 3)

    @property
    def n(self) -> int:
        return self.cols.shape[0]

    def matvec(self, gs: np.ndarray) -> np.ndarray:
        return np.einsum("pk,pk...->p...", self.weights, np.asarray(gs)[self.cols])

    def to_sparse(self) -> sp.csr_matrix:
        rows = np.repeat(np.arange(self.n), 3)
        return sp.csr_matrix(
            (self.weights.ravel(), (rows, self.cols.ravel())), shape=(self.n, self.n)
        )

    def triples(self):
        """Yield ``(row, col, weight)`` for every stored entry."""
        for p in range(self.n):
            for k in range(3):
                yield p, int(self.cols[p, k]), float(self.weights[p, k])


def build_operator(z_sorted: np.ndarray, kind: FilterKind | str) -> FdOperator:
    kind = FilterKind.parse(kind)
    zs = np.asarray(z_sorted, dtype=float)
    if zs.ndim != 1:
        raise ValueError("build_operator expects a 1-D grid")
    if np.any(np.diff(zs) < 0):
        raise ValueError("grid must be sorted ascending")
    _check_grid(zs)
    start = _window_starts(zs.size, kind)
    cols = start[:, None] + np.arange(3)
    return FdOperator(kind, cols, np.stack(_band_weights(zs, kind), axis=1))


def forward_two_point_operator(n: int, delta: float) -> np.ndarray:
    """Dense ``(n-1) x n`` two-point forward difference on a uniform grid."""
    d = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    d[idx, idx] = -1.0
    d[idx, idx + 1] = 1.0
    return d / delta


def apply_filter(perm: np.ndarray, op: FdOperator, g: np.ndarray) -> np.ndarray:
    """``S^-1 D S g``: sort ``g`` with ``perm``, differentiate, unsort."""
    g = np.asarray(g, dtype=float)
    if g.shape[0] != op.n or len(perm) != op.n:
        raise ValueError(f"length mismatch: g has {g.shape[0]}, operator {op.n}")
    out = np.empty_like(g)
    out[perm] = op.matvec(g[perm])
    return out


class FilterBank:
    """Filters of several kinds for every column of a grid matrix ``Z``.

    ``Z`` is ``N x r`` (one grid per branch). All kinds share the sorting
    permutations; each kind stores three ``N x r`` weight arrays.
    """

    def __init__(self, z: np.ndarray, kinds):
        z = np.asarray(z, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        self.z = z
        self.kinds = tuple(FilterKind.parse(k) for k in kinds)
        n, r = z.shape
        self.order = np.argsort(z, axis=0, kind="stable")
        self._cols = np.arange(r)
        self.z_sorted = z[self.order, self._cols]
        _check_grid(self.z_sorted)
        self._starts = {k: _window_starts(n, k) for k in self.kinds}
        self._weights = {k: _band_weights(self.z_sorted, k) for k in self.kinds}

    @property
    def n_points(self) -> int:
        return self.z.shape[0]

    @property
    def r(self) -> int:
        return self.z.shape[1]

    def apply(self, kind: FilterKind | str, g: np.ndarray) -> np.ndarray:
        """Filter every column of ``g`` (``N x r``) with its own branch filter."""
        kind = FilterKind.parse(kind)
        gs = g[self.order, self._cols]
        st = self._starts[kind]
        w0, w1, w2 = self._weights[kind]
        out = np.empty_like(gs)
        out[self.order, self._cols] = w0 * gs[st] + w1 * gs[st + 1] + w2 * gs[st + 2]
        return out

    def stencils(self, kind: FilterKind | str) -> tuple[np.ndarray, np.ndarray]:
        """Row stencils of every branch filter in original point order.

        Returns ``cols`` and ``weights``, both ``r x N x 3``: row ``k`` of
        the filter of branch ``i`` has weights ``weights[i, k]`` at columns
        ``cols[i, k]``.
        """
        kind = FilterKind.parse(kind)
        n, r = self.z.shape
        win = self._starts[kind][:, None] + np.arange(3)  # (N, 3) sorted positions
        cols = np.empty((n, r, 3), dtype=np.intp)
        wts = np.empty((n, r, 3))
        cols[self.order, self._cols] = self.order[win].transpose(0, 2, 1)
        wts[self.order, self._cols] = np.stack(self._weights[kind], axis=-1)
        return cols.transpose(1, 0, 2), wts.transpose(1, 0, 2)

    def operator(self, kind: FilterKind | str, branch: int) -> FdOperator:
        kind = FilterKind.parse(kind)
        cols = self._starts[kind][:, None] + np.arange(3)
        w = np.stack([w[:, branch] for w in self._weights[kind]], axis=1)
        return FdOperator(kind, cols, w)

    def permutation(self, branch: int) -> np.ndarray:
        return self.order[:, branch]

    def sparse_filter(self, kind: FilterKind | str, branch: int) -> sp.csr_matrix:
        """The ``N x N`` matrix ``F = S^-1 D S`` in original point order."""
        op = self.operator(kind, branch)
        perm = self.order[:, branch]
        rows = np.repeat(perm, 3)
        cols = perm[op.cols].ravel()
        n = self.n_points
        return sp.csr_matrix((op.weights.ravel(), (rows, cols)), shape=(n, n))


def build_filter_bank(v: np.ndarray, points: np.ndarray, kinds) -> FilterBank:
    """Filters for the grids ``z = points @ v`` (one branch per column of ``v``)."""
    v = np.asarray(v, dtype=float)
    points = np.asarray(points, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if points.shape[1] != v.shape[0]:
        raise ValueError(f"points have {points.shape[1]} columns but v has {v.shape[0]} rows")
    return FilterBank(points @ v, kinds)

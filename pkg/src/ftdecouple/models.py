"""Coupled and decoupled function representations with analytic Jacobians.

Three model families are supported:

* :class:`MonomialPolynomial`, ``f(p) = sum_t coef_t * prod_l p_l**exp_t[l]``
* :class:`MlpNetwork`, a feed-forward net with sigmoid hidden layers and a
  linear output layer
* :class:`DecoupledModel`, ``f(p) = W g(V^T p) + c`` with polynomial branches

Every model exposes ``evaluate(points)`` and ``jacobian(points)`` accepting
either one point (shape ``(m,)``) or a batch (shape ``(N, m)``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

__all__ = [
    "MonomialPolynomial",
    "MlpNetwork",
    "DecoupledModel",
    "evaluate",
    "jacobian",
    "param_count",
    "expand_to_monomials",
    "random_polynomial",
    "random_mlp",
    "random_decoupled",
    "monomial_exponents",
    "sigmoid",
]


def _as_batch(p: np.ndarray, m: int) -> tuple[np.ndarray, bool]:
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    p2 = p[None, :] if single else p
    if p2.ndim != 2 or p2.shape[1] != m:
        raise ValueError(f"expected points with {m} coordinates, got shape {p.shape}")
    return p2, single


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def monomial_exponents(m: int, degrees) -> list[tuple[int, ...]]:
    """All exponent vectors of total degree in ``degrees`` (graded, then lex descending)."""
    out = []
    for d in degrees:
        combos = itertools.combinations_with_replacement(range(m), d)
        exps = []
        for c in combos:
            e = [0] * m
            for idx in c:
                e[idx] += 1
            exps.append(tuple(e))
        out.extend(sorted(exps, reverse=True))
    return out


@dataclass(frozen=True)
class MonomialPolynomial:
    exponents: np.ndarray  # (T, m) non-negative ints
    coefs: np.ndarray  # (T, n)

    def __post_init__(self):
        exps = np.asarray(self.exponents, dtype=np.int64)
        coefs = np.asarray(self.coefs, dtype=float)
        if exps.ndim != 2 or coefs.ndim != 2 or exps.shape[0] != coefs.shape[0]:
            raise ValueError("exponents (T, m) and coefs (T, n) must have matching T")
        if np.any(exps < 0):
            raise ValueError("exponents must be non-negative")
        if len({tuple(e) for e in exps}) != exps.shape[0]:
            raise ValueError("exponent vectors must be unique")
        if not np.all(np.isfinite(coefs)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "coefs", coefs)

    @property
    def m(self) -> int:
        return self.exponents.shape[1]

    @property
    def n(self) -> int:
        return self.coefs.shape[1]

    @property
    def degree(self) -> int:
        return int(self.exponents.sum(axis=1).max()) if len(self.exponents) else 0

    def _monomials(self, p: np.ndarray) -> np.ndarray:
        return np.prod(p[:, None, :] ** self.exponents[None], axis=2)

    def evaluate(self, p):
        p2, single = _as_batch(p, self.m)
        q = self._monomials(p2) @ self.coefs
        return q[0] if single else q

    def jacobian(self, p):
        p2, single = _as_batch(p, self.m)
        jac = np.empty((p2.shape[0], self.n, self.m))
        for l in range(self.m):
            e = self.exponents.copy()
            factor = e[:, l].astype(float)
            e[:, l] = np.maximum(e[:, l] - 1, 0)
            mono = np.prod(p2[:, None, :] ** e[None], axis=2) * factor
            jac[:, :, l] = mono @ self.coefs
        return jac[0] if single else jac

    def param_count(self) -> int:
        return int(self.coefs.size)

    def coefficient(self, exponent, output: int) -> float:
        """Coefficient of one monomial in one output (0 if absent)."""
        key = tuple(int(x) for x in exponent)
        for e, c in zip(self.exponents, self.coefs):
            if tuple(e) == key:
                return float(c[output])
        return 0.0


@dataclass(frozen=True)
class MlpNetwork:
    """Sigmoid hidden layers, linear output layer. ``weights[l]`` is ``n_l x n_{l-1}``."""

    weights: tuple
    biases: tuple

    def __post_init__(self):
        ws = tuple(np.atleast_2d(np.asarray(w, dtype=float)) for w in self.weights)
        bs = tuple(np.asarray(b, dtype=float).ravel() for b in self.biases)
        if len(ws) != len(bs) or not ws:
            raise ValueError("need one bias per weight matrix and at least one layer")
        for l, (w, b) in enumerate(zip(ws, bs)):
            if w.shape[0] != b.size:
                raise ValueError(f"layer {l}: weight rows {w.shape[0]} != bias size {b.size}")
            if l and w.shape[1] != ws[l - 1].shape[0]:
                raise ValueError(f"layer {l}: input size does not chain with previous layer")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def m(self) -> int:
        return self.dims[0]

    @property
    def n(self) -> int:
        return self.dims[-1]

    def evaluate(self, p):
        x, single = _as_batch(p, self.m)
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = x @ w.T + b
            if l < last:
                x = sigmoid(x)
        return x[0] if single else x

    def jacobian(self, p):
        x, single = _as_batch(p, self.m)
        jac = np.broadcast_to(np.eye(self.m), (x.shape[0], self.m, self.m))
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = x @ w.T + b
            jac = np.einsum("ij,kjl->kil", w, jac)
            if l < last:
                x = sigmoid(a)
                jac = (x * (1.0 - x))[:, :, None] * jac
        return jac[0] if single else jac

    def param_count(self) -> int:
        return int(sum(w.size + b.size for w, b in zip(self.weights, self.biases)))


@dataclass(frozen=True)
class DecoupledModel:
    """``f(p) = W g(V^T p) + c``.

    ``coeffs[i]`` holds the ascending polynomial coefficients ``c_0 .. c_d``
    of branch ``i``.
    """

    W: np.ndarray  # (n, r)
    V: np.ndarray  # (m, r)
    coeffs: np.ndarray  # (r, d + 1)
    c: np.ndarray = field(default=None)  # (n,)

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        V = np.asarray(self.V, dtype=float)
        coeffs = np.asarray(self.coeffs, dtype=float)
        if W.ndim != 2 or V.ndim != 2:
            raise ValueError("W and V must be matrices")
        r = W.shape[1]
        if coeffs.ndim == 1 and r == 1:
            coeffs = coeffs[None]
        if coeffs.size == 0:
            coeffs = np.zeros((r, 1))
        if V.shape[1] != r or coeffs.shape[0] != r:
            raise ValueError(f"inconsistent branch count: W {W.shape}, V {V.shape}, coeffs {coeffs.shape}")
        c = np.zeros(W.shape[0]) if self.c is None else np.asarray(self.c, dtype=float).ravel()
        if c.size != W.shape[0]:
            raise ValueError(f"constant vector has {c.size} entries, expected {W.shape[0]}")
        for name, arr in (("W", W), ("V", V), ("coeffs", coeffs), ("c", c)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "c", c)

    @property
    def m(self) -> int:
        return self.V.shape[0]

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def r(self) -> int:
        return self.W.shape[1]

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    def branch_values(self, z: np.ndarray) -> np.ndarray:
        """``g_i(z[:, i])`` for an ``N x r`` grid matrix."""
        out = np.empty_like(z)
        for i in range(self.r):
            out[:, i] = P.polyval(z[:, i], self.coeffs[i])
        return out

    def branch_derivatives(self, z: np.ndarray) -> np.ndarray:
        out = np.empty_like(z)
        for i in range(self.r):
            out[:, i] = P.polyval(z[:, i], P.polyder(self.coeffs[i]))
        return out

    def evaluate(self, p):
        p2, single = _as_batch(p, self.m)
        q = self.branch_values(p2 @ self.V) @ self.W.T + self.c
        return q[0] if single else q

    def jacobian(self, p):
        p2, single = _as_batch(p, self.m)
        gp = self.branch_derivatives(p2 @ self.V)
        jac = np.einsum("oi,ki,li->kol", self.W, gp, self.V)
        return jac[0] if single else jac

    def param_count(self, include_constant: bool = True) -> int:
        count = self.r * (self.m + self.n + self.degree + 1)
        return count + (self.n if include_constant else 0)

    def with_constant(self, c) -> DecoupledModel:
        return DecoupledModel(self.W, self.V, self.coeffs, c)


def evaluate(model, p):
    return model.evaluate(p)


def jacobian(model, p):
    return model.jacobian(p)


def param_count(model) -> int:
    return model.param_count()


def expand_to_monomials(model: DecoupledModel, tol: float = 0.0) -> MonomialPolynomial:
    """Rewrite a polynomial decoupled model in the standard monomial basis.

    Uses the multinomial expansion of ``(v_i^T p)**k``. Terms whose
    coefficients are all below ``tol`` in magnitude are dropped.
    """
    m, n = model.m, model.n
    terms: dict[tuple[int, ...], np.ndarray] = {}

    def add(exp, vec):
        if exp in terms:
            terms[exp] = terms[exp] + vec
        else:
            terms[exp] = vec.copy()

    add((0,) * m, model.c + model.W @ model.coeffs[:, 0])
    for k in range(1, model.degree + 1):
        for exp in monomial_exponents(m, [k]):
            multinom = math.factorial(k) / math.prod(math.factorial(a) for a in exp)
            vpow = np.prod(model.V ** np.asarray(exp)[:, None], axis=0)  # (r,)
            add(exp, model.W @ (model.coeffs[:, k] * vpow * multinom))
    keys = [e for e in terms if np.max(np.abs(terms[e]), initial=0.0) > tol]
    if not keys:
        keys = [(0,) * m]
    keys.sort(key=lambda e: (sum(e), tuple(-x for x in e)))
    return MonomialPolynomial(np.array(keys, dtype=np.int64).reshape(len(keys), m),
                              np.array([terms[e] for e in keys]).reshape(len(keys), n))


def random_polynomial(seed: int, m: int, n: int, d: int) -> MonomialPolynomial:
    """All monomials of degree 1..d with N(0, 1) coefficients."""
    rng = np.random.default_rng(seed)
    exps = monomial_exponents(m, range(1, d + 1))
    return MonomialPolynomial(np.array(exps), rng.standard_normal((len(exps), n)))


def random_mlp(seed: int, dims) -> MlpNetwork:
    """Weights and biases drawn from N(0, 1), layer by layer."""
    dims = tuple(int(x) for x in dims)
    if len(dims) < 2:
        raise ValueError("an MLP needs at least input and output sizes")
    rng = np.random.default_rng(seed)
    ws, bs = [], []
    for a, b in zip(dims[:-1], dims[1:]):
        ws.append(rng.standard_normal((b, a)))
        bs.append(rng.standard_normal(b))
    return MlpNetwork(tuple(ws), tuple(bs))


def random_decoupled(seed: int, m: int, n: int, r: int, d: int) -> DecoupledModel:
    """W, V and all branch coefficients (constants included) drawn from N(0, 1); c = 0."""
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((n, r))
    V = rng.standard_normal((m, r))
    coeffs = rng.standard_normal((r, d + 1))
    return DecoupledModel(W, V, coeffs)

"""Text formats: model JSON, point and tensor CSVs, filter triples, run reports.

Floats are written with 17 significant digits so files round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .filters import FdOperator
from .models import DecoupledModel, MlpNetwork, MonomialPolynomial

__all__ = [
    "fmt",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
    "read_points",
    "write_matrix_csv",
    "matrix_to_text",
    "tensor_to_text",
    "operator_to_text",
    "dumps_report",
    "write_text",
]


def fmt(x: float) -> str:
    """Decimal text with 17 significant digits; NaN and infinities use the JSON extensions."""
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    if x == 0:
        return "0"
    return format(x, ".17g")


def _encode(obj, indent: int = 0) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + _encode(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [inner + json.dumps(str(k)) + ": " + _encode(v, indent + 1) for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_report(obj) -> str:
    """Structured text (JSON syntax) with 17-digit floats and stable key order."""
    return _encode(obj) + "\n"


def model_to_dict(model) -> dict:
    if isinstance(model, MonomialPolynomial):
        return {
            "type": "polynomial",
            "m": model.m,
            "n": model.n,
            "terms": [{"exp": [int(e) for e in exp], "coef": coef}
                      for exp, coef in zip(model.exponents, model.coefs)],
        }
    if isinstance(model, MlpNetwork):
        return {"type": "mlp",
                "layers": [{"W": w, "b": b} for w, b in zip(model.weights, model.biases)]}
    if isinstance(model, DecoupledModel):
        return {
            "type": "decoupled",
            "W": model.W,
            "V": model.V,
            "branches": [{"coeffs": row} for row in model.coeffs],
            "c": model.c,
        }
    raise TypeError(f"unsupported model type {type(model).__name__}")


def _matrix(x, name: str) -> np.ndarray:
    a = np.array(x, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be a matrix")
    return a


def model_from_dict(d: dict):
    """Inverse of :func:`model_to_dict`; raises ``ValueError`` on malformed input."""
    if not isinstance(d, dict) or "type" not in d:
        raise ValueError("model description needs a 'type' field")
    kind = d["type"]
    try:
        if kind == "polynomial":
            m, n = int(d["m"]), int(d["n"])
            terms = d["terms"]
            exps = np.array([t["exp"] for t in terms], dtype=int).reshape(len(terms), m)
            coefs = np.array([t["coef"] for t in terms], dtype=float).reshape(len(terms), n)
            return MonomialPolynomial(exps, coefs)
        if kind == "mlp":
            layers = d["layers"]
            return MlpNetwork(tuple(_matrix(l["W"], "W") for l in layers),
                              tuple(np.array(l["b"], dtype=float) for l in layers))
        if kind == "decoupled":
            W, V = _matrix(d["W"], "W"), _matrix(d["V"], "V")
            coeffs = np.array([b["coeffs"] for b in d["branches"]], dtype=float)
            c = d.get("c")
            return DecoupledModel(W, V, coeffs, None if c is None else np.array(c, dtype=float))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed {kind} model: {exc}") from exc
    raise ValueError(f"unknown model type {kind!r}")


def save_model(model, path) -> None:
    write_text(path, dumps_report(model_to_dict(model)))


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not a valid model file ({exc})") from exc
    return model_from_dict(d)


def read_points(path) -> np.ndarray:
    """Points CSV: one point per row, optional single header row."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: no points")

    def numeric(row):
        try:
            return [float(c) for c in row]
        except ValueError:
            return None

    if numeric(rows[0]) is None:
        rows = rows[1:]
    data = []
    for i, row in enumerate(rows):
        vals = numeric(row)
        if vals is None:
            raise ValueError(f"{path}: non-numeric entry in data row {i + 1}")
        data.append(vals)
    if not data:
        raise ValueError(f"{path}: no points")
    if len({len(r) for r in data}) != 1:
        raise ValueError(f"{path}: rows have different lengths")
    return np.array(data, dtype=float)


def write_matrix_csv(path, mat, header=None) -> None:
    write_text(path, matrix_to_text(mat, header))


def matrix_to_text(mat, header=None) -> str:
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    buf = io.StringIO()
    if header:
        buf.write(",".join(header) + "\n")
    for row in mat:
        buf.write(",".join(fmt(x) for x in row) + "\n")
    return buf.getvalue()


def tensor_to_text(t: np.ndarray) -> str:
    """First line ``n,m,N``, then the mode-1 unfolding (``n`` rows)."""
    from .tensor import unfold

    n, m, N = t.shape
    return f"{n},{m},{N}\n" + matrix_to_text(unfold(t, 1))


def operator_to_text(op: FdOperator, perm: np.ndarray | None = None) -> str:
    """CSV triples ``row,col,weight``; indices refer to original point order when ``perm`` is given."""
    lines = ["row,col,weight"]
    for i, j, w in op.triples():
        if perm is not None:
            i, j = int(perm[i]), int(perm[j])
        lines.append(f"{i},{j},{fmt(w)}")
    return "\n".join(lines) + "\n"


def write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)

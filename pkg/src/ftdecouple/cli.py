"""Command-line interface.

Exit codes: 0 success, 1 invalid configuration or input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import casestudies
from .filters import DegenerateGridError, FilterKind, build_operator
from .io import (
    dumps_report,
    load_model,
    matrix_to_text,
    operator_to_text,
    read_points,
    save_model,
    tensor_to_text,
    write_text,
)
from .jacobian import build_tensor, sample_uniform
from .lm import LMOptions
from .pipeline import METHODS, NumericalFailure, RunConfig, decouple

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _kinds(text: str) -> tuple:
    try:
        return tuple(FilterKind.parse(x.strip()) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _sample_spec(text: str) -> tuple[int, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("--sample expects N,lo,hi")
    try:
        n, lo, hi = int(parts[0]), float(parts[1]), float(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"--sample expects N,lo,hi, got {text!r}")
    if n < 3 or not lo < hi:
        raise argparse.ArgumentTypeError("--sample needs N >= 3 and lo < hi")
    return n, lo, hi


def _add_points(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--points", type=Path, help="CSV of operating points, one per row")
    g.add_argument("--sample", type=_sample_spec, metavar="N,LO,HI",
                   help="draw N points uniformly from [LO, HI]^m using --seed")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ftdecouple", description="Decouple multivariate functions.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("decouple", help="decouple a model file")
    d.add_argument("--model", type=Path, required=True, help="coupled model (JSON)")
    d.add_argument("--method", choices=METHODS, default="implicit")
    d.add_argument("--r", type=int, required=True, help="number of branches")
    d.add_argument("--degree", type=int, default=3, help="branch polynomial degree")
    d.add_argument("--filters", type=_kinds, default=None,
                   help="implicit filters, e.g. L,R or L,R,C (default: chosen from a rank estimate)")
    d.add_argument("--lambda-grid", type=_float_list, default=None,
                   help="explicit penalty weights (default: squares of 1e-1..1e4)")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--restarts", type=int, default=5)
    d.add_argument("--max-sweeps", type=int, default=None)
    d.add_argument("--tol", type=float, default=None)
    d.add_argument("--lm-iters", type=int, default=LMOptions().max_iters,
                   help="Levenberg-Marquardt iterations per V update")
    d.add_argument("--no-post-optimize", action="store_true",
                   help="skip the final joint tuning of all parameters")
    _add_points(d)
    d.add_argument("--out", type=Path, required=True, help="output directory")

    c = sub.add_parser("casestudy", help="rerun a benchmark study and print its table")
    c.add_argument("name", choices=("toy", "polyreduction", "mlp"))
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--restarts", type=int, default=5)
    c.add_argument("--out", type=Path, default=None, help="also write the table as JSON")

    j = sub.add_parser("jacobian", help="dump the Jacobian tensor")
    j.add_argument("--model", type=Path, required=True)
    j.add_argument("--seed", type=int, default=0)
    _add_points(j)
    j.add_argument("--out", type=Path, default=None, help="file (default: stdout)")

    e = sub.add_parser("evaluate", help="evaluate a model on points")
    e.add_argument("--model", type=Path, required=True)
    e.add_argument("--seed", type=int, default=0)
    _add_points(e)
    e.add_argument("--out", type=Path, default=None, help="file (default: stdout)")

    f = sub.add_parser("filters", help="dump a finite-difference operator as row,col,weight triples")
    f.add_argument("--kind", type=_kinds, required=True, help="L, C or R")
    f.add_argument("--column", type=int, default=0, help="points column holding the grid")
    f.add_argument("--seed", type=int, default=0)
    _add_points(f)
    f.add_argument("--out", type=Path, default=None, help="file (default: stdout)")
    return parser


def _points(args, m: int) -> tuple[np.ndarray, dict]:
    if args.points is not None:
        pts = read_points(args.points)
        if pts.shape[1] != m:
            raise UsageError(f"{args.points}: expected {m} columns, found {pts.shape[1]}")
        return pts, {"file": str(args.points)}
    n, lo, hi = args.sample
    return sample_uniform(args.seed, n, m, lo, hi), {"uniform": [n, lo, hi], "seed": args.seed}


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        write_text(out, text)


def cmd_decouple(args) -> int:
    coupled = load_model(args.model)
    pts, origin = _points(args, coupled.m)
    cfg = RunConfig(
        method=args.method, r=args.r, degree=args.degree, kinds=args.filters,
        lambda_grid=args.lambda_grid, seed=args.seed, restarts=args.restarts,
        max_sweeps=args.max_sweeps, tol=args.tol, lm=LMOptions(max_iters=args.lm_iters),
        post_optimize=not args.no_post_optimize,
    )
    out = decouple(coupled, pts, cfg)
    summary = out.summary()
    summary["inputs"] = {"model": str(args.model), "points": origin}
    d = args.out
    save_model(out.model, d / "model.json")
    if out.post_model is not None:
        save_model(out.post_model, d / "model_post.json")
    write_text(d / "report.json", dumps_report(summary))
    for i in range(out.model.r):
        write_text(d / f"branch_{i + 1}.csv",
                   matrix_to_text(out.branch_table(i), ["z", "g_raw", "g_fit"]))
    res = out.result
    smooth = res.smooth_trace or [float("nan")] * len(res.trace)
    trace = np.column_stack([np.arange(1, len(res.trace) + 1), res.trace, smooth])
    write_text(d / "trace.csv", matrix_to_text(trace, ["sweep", "objective", "smoothness"]))
    errs = ", ".join(f"e{i + 1}={e:.3f}%" for i, e in enumerate(out.report.errors))
    print(f"{res.method} r={res.r}: {errs}; mean {out.report.mean_error:.3f}%")
    return EXIT_OK


def _format_table(name: str, rows: list[dict]) -> str:
    n_out = len(rows[0]["errors"]) if rows else 0
    head = ["r"] + [f"e{i + 1} %" for i in range(n_out)] + ["mean e %", "params"]
    extra = [k for k in ("ratio", "ratio_standard", "ratio_quoted") if rows and k in rows[0]]
    head += extra + ["filters"]
    lines = [name, "  ".join(f"{h:>12}" for h in head)]
    for row in rows:
        cells = [str(row["r"])] + [f"{e:.3f}" for e in row["errors"]]
        cells += [f"{row['mean_error']:.3f}", str(row["parameters"])]
        cells += [f"{row[k]:.2f}" for k in extra] + [",".join(row["kinds"])]
        lines.append("  ".join(f"{c:>12}" for c in cells))
    return "\n".join(lines) + "\n"


def cmd_casestudy(args) -> int:
    fn = {"toy": casestudies.toy_study, "polyreduction": casestudies.polyreduction_study,
          "mlp": casestudies.mlp_study}[args.name]
    rows = fn(seed=args.seed, restarts=args.restarts)
    sys.stdout.write(_format_table(args.name, rows))
    if args.out is not None:
        write_text(args.out, dumps_report({"study": args.name, "seed": args.seed,
                                           "restarts": args.restarts, "rows": rows}))
    return EXIT_OK


def cmd_jacobian(args) -> int:
    model = load_model(args.model)
    pts, _ = _points(args, model.m)
    _emit(tensor_to_text(build_tensor(model, pts)), args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    pts, _ = _points(args, model.m)
    _emit(matrix_to_text(np.atleast_2d(model.evaluate(pts))), args.out)
    return EXIT_OK


def cmd_filters(args) -> int:
    if len(args.kind) != 1:
        raise UsageError("--kind takes a single filter kind")
    if args.points is not None:
        pts = read_points(args.points)
    else:
        pts, _ = _points(args, 1)
    if not 0 <= args.column < pts.shape[1]:
        raise UsageError(f"--column {args.column} out of range for {pts.shape[1]} columns")
    z = pts[:, args.column]
    order = np.argsort(z, kind="stable")
    op = build_operator(z[order], args.kind[0])
    _emit(operator_to_text(op, order), args.out)
    return EXIT_OK


COMMANDS = {
    "decouple": cmd_decouple,
    "casestudy": cmd_casestudy,
    "jacobian": cmd_jacobian,
    "evaluate": cmd_evaluate,
    "filters": cmd_filters,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors (code 1) and --help (code 0)
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DegenerateGridError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

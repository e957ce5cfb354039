"""Explicit method on the toy problem: error and left/right disagreement per penalty weight.

usage: python scripts/lambda_sweep.py [r] [seed] [restarts]
"""

import sys

import numpy as np

from ftdecouple.branch_fit import estimate_constants, fit_branches, relative_error
from ftdecouple.casestudies import TOY_POINTS, toy_coupled
from ftdecouple.filters import FilterKind
from ftdecouple.ftd import FtdOptions, default_lambda_grid, ftd_explicit, smoothness
from ftdecouple.jacobian import build_tensor, sample_uniform


def main():
    r = int(sys.argv[1]) if len(sys.argv) > 1 else 4
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 1
    restarts = int(sys.argv[3]) if len(sys.argv) > 3 else 5
    coupled = toy_coupled()
    pts = sample_uniform(seed, TOY_POINTS, 2)
    t = build_tensor(coupled, pts)
    for lam in default_lambda_grid() + [1e10]:
        res = ftd_explicit(t, pts, FtdOptions(r=r, lam=lam, seed=seed, restarts=restarts))
        model = estimate_constants(fit_branches(res, pts, 3), coupled, pts)
        errs = relative_error(coupled, model, pts)
        dis = smoothness(res.bank(pts, (FilterKind.LEFT, FilterKind.RIGHT)), res.G)
        print(f"lambda={lam:8.0e}  e={np.round(errs, 3)}  disagreement={dis:.3g}")


if __name__ == "__main__":
    main()

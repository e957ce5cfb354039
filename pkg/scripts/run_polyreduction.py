"""Polynomial reduction: random decoupled polynomial (m=5, n=1, r=3, d=5) in the monomial basis.

usage: python scripts/run_polyreduction.py [seed] [restarts]
"""

import sys
import time

from ftdecouple.casestudies import polyreduction_study


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    restarts = int(sys.argv[2]) if len(sys.argv) > 2 else 5
    for r in (1, 2, 3, 4):
        t0 = time.perf_counter()
        row = polyreduction_study(seed=seed, ranks=(r,), restarts=restarts)[0]
        print(f"r={r}  e={row['errors'][0]:.3f}%  ratio(251)={row['ratio_standard']:.2f}  "
              f"ratio(456)={row['ratio_quoted']:.2f}  filters={','.join(row['kinds'])}  "
              f"{time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()

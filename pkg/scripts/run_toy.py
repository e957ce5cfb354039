"""Toy study: implicit method with left/right filters, r = 1..4.

usage: python scripts/run_toy.py [seed] [restarts]
"""

import sys
import time

import numpy as np

from ftdecouple.casestudies import toy_study


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
    restarts = int(sys.argv[2]) if len(sys.argv) > 2 else 5
    print(f"seed {seed}, {restarts} restarts")
    for r in (1, 2, 3, 4):
        t0 = time.perf_counter()
        row = toy_study(seed=seed, ranks=(r,), restarts=restarts)[0]
        print(f"r={r}  e={np.round(row['errors'], 3)}  params={row['parameters']}  "
              f"{time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()

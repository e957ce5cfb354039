"""Random sigmoid network (2, 15, 10, 10, 5, 2): mean error for r = 1..10.

usage: python scripts/run_mlp.py [seed] [restarts]
"""

import sys
import time

from ftdecouple.casestudies import MLP_DIMS, mlp_study
from ftdecouple.models import random_mlp


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    restarts = int(sys.argv[2]) if len(sys.argv) > 2 else 5
    print(f"network parameters: {random_mlp(seed, MLP_DIMS).param_count()}")
    start = time.perf_counter()
    for r in range(1, 11):
        t0 = time.perf_counter()
        row = mlp_study(seed=seed, ranks=(r,), restarts=restarts)[0]
        print(f"r={r:2d}  mean e={row['mean_error']:.3f}%  ratio={row['ratio']:.2f}  "
              f"filters={','.join(row['kinds'])}  {time.perf_counter() - t0:.1f}s")
    print(f"total {time.perf_counter() - start:.0f}s")


if __name__ == "__main__":
    main()

"""Cyclic, uniform and random-permutation index orders for the same SAGA update.

Each method gets its own grid-best stepsize per seed on one fixed sparse
logistic problem. Random permutations usually finish ahead of uniform sampling,
but how cyclic order ranks depends on the problem, so read the medians as an
observation rather than a law.
"""

import argparse
import tempfile
from pathlib import Path

import numpy as np

from csaga import bench as B


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--out", help="directory for trace and summary CSVs (default: a temp dir)")
    args = ap.parse_args()

    out = Path(args.out or tempfile.mkdtemp(prefix="csaga_orders_"))
    configs = [B.RunConfig(synthetic="sparse", n=500, d=2000, nnz=10, method=m, seed=s, jit=True, epochs=20,
                           timing=False, gamma_grid=B.default_gamma_grid())
               for m in ("rp_saga", "saga", "csaga") for s in range(args.seeds)]
    entries = B.run_suite(configs, out)

    print(f"traces and summary.csv written to {out}\n")
    print("method     scheduler            median final   spread over seeds")
    for m in ("rp_saga", "saga", "csaga"):
        finals = np.array([e.trace.final.suboptimality for e in entries if e.method == m])
        sched = next(e.scheduler for e in entries if e.method == m)
        print(f"{m:9s}  {sched:19s}  {np.median(finals):12.3e}   {finals.min():.1e} .. {finals.max():.1e}")


if __name__ == "__main__":
    main()

"""Picard contraction factor against slab length for small 1D data.

    python scripts/contraction_sweep.py [--N 64] [--levels-per-unit 400] [--csv out/contraction.csv]
"""
import argparse
import csv

import numpy as np

from awrascle import picard
from awrascle.grid import Torus
from awrascle.offset import PowerLaw


def sweep(slabs, N=64, levels_per_unit=400, amp=0.05, gamma=2.0, max_iter=60):
    t = Torus((N,))
    x = t.nodes[0]
    rho0, u0 = 1 + amp * np.sin(x), amp * np.cos(x)[None]
    rows = []
    for T in slabs:
        M = max(4, int(round(T * levels_per_unit)))
        try:
            _, reps = picard.solve_slab(rho0, u0, PowerLaw(gamma), t, T, M, tol_fix=1e-10, max_iter=max_iter)
            rows.append((T, M, len(reps), picard.contraction_factor(reps), True))
        except picard.NonConvergence as exc:
            rows.append((T, M, exc.iteration, max(exc.kappas, default=float("nan")), False))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=64)
    ap.add_argument("--levels-per-unit", type=int, default=400)
    ap.add_argument("--amp", type=float, default=0.05)
    ap.add_argument("--csv", default=None)
    args = ap.parse_args()
    slabs = [0.0125, 0.025, 0.05, 0.1, 0.2, 0.4]
    rows = sweep(slabs, args.N, args.levels_per_unit, args.amp)
    print(f"{'T':>8} {'M':>5} {'iters':>6} {'kappa':>10}  converged")
    for T, M, it, k, conv in rows:
        print(f"{T:8.4f} {M:5d} {it:6d} {k:10.4g}  {conv}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["slab_T", "M_levels", "iterations", "kappa", "converged"])
            wr.writerows(rows)


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Small data with p < 2: the H^1 norm reaches zero in finite time.

Prints h1_norm_sq at a few times and the first time it falls below a
threshold, for comparison with the exponential decay seen at p = 2.
"""
import argparse

import numpy as np

from potwell.grid import Grid, Params
from potwell.solver import SolverConfig, run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, default=1.5)
    ap.add_argument("--amplitude", type=float, default=0.1)
    ap.add_argument("--t-end", type=float, default=1.3)
    ap.add_argument("--n", type=int, default=256)
    args = ap.parse_args()

    grid, params = Grid.interval(args.n), Params(args.p, 3.0)
    u0 = args.amplitude * np.cos(np.pi * grid.coords[0])
    tr = run(grid, u0, SolverConfig(t_end=args.t_end, dt0=1e-3), params)
    t, h1 = tr.column("t"), tr.column("h1_norm_sq")
    print(f"termination {tr.termination} after {tr.steps} steps")
    for tt in np.linspace(0, args.t_end, 7):
        k = min(np.searchsorted(t, tt), len(t) - 1)
        print(f"t = {t[k]:7.4f}   h1 = {h1[k]:.4e}")
    tiny = np.nonzero(h1 <= 1e-30 * h1[0])[0]
    if tiny.size:
        print(f"h1 <= 1e-30 h1_0 first at t = {t[tiny[0]]:.4f}")


if __name__ == "__main__":
    main()

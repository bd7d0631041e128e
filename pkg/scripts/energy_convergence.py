#!/usr/bin/env python3
"""Energy-identity residual |D + J - J0| at t_end versus dt0 (adaptivity off).

Euler should show first order, Heun second order.

    python scripts/energy_convergence.py --p 2 --t-end 1
"""
import argparse

import numpy as np

from potwell.grid import Grid, Params
from potwell.solver import SolverConfig, run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--q", type=float, default=3.0)
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--amplitude", type=float, default=0.1)
    ap.add_argument("--t-end", type=float, default=1.0)
    ap.add_argument("--dts", default="4e-4,2e-4,1e-4,5e-5")
    args = ap.parse_args()

    grid, params = Grid.interval(args.n), Params(args.p, args.q)
    u0 = args.amplitude * np.cos(np.pi * grid.coords[0])
    dts = [float(x) for x in args.dts.split(",")]
    print(f"{'scheme':<6} {'dt0':>9} {'residual':>12} {'ratio':>7}")
    for scheme in ("euler", "heun"):
        prev = None
        for dt in dts:
            tr = run(grid, u0, SolverConfig(t_end=args.t_end, dt0=dt, adapt=False, scheme=scheme), params)
            res = abs(tr.energy_residual()[-1])
            ratio = f"{prev / res:7.3f}" if prev else ""
            print(f"{scheme:<6} {dt:9.1e} {res:12.4e} {ratio}")
            prev = res


if __name__ == "__main__":
    main()

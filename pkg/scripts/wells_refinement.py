#!/usr/bin/env python3
"""C*, the depth d by both routes, and b under grid refinement."""
import argparse

from potwell.grid import Grid, Params
from potwell.wells import OptimizerSettings, compute_wells


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--q", type=float, default=3.0)
    ap.add_argument("--sizes", default="64,128,256,512")
    ap.add_argument("--starts", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    params = Params(args.p, args.q)
    opt = OptimizerSettings(starts=args.starts, seed=args.seed)
    print(f"{'n':>5} {'C*':>12} {'d (formula)':>12} {'d (direct)':>12} {'gap':>9} {'b':>6}")
    for n in (int(s) for s in args.sizes.split(",")):
        w = compute_wells(Grid.interval(n), params, opt)
        dd = w.provenance["depth_direct"]
        print(f"{n:5d} {w.cstar:12.8f} {w.d:12.6f} {dd['d_direct']:12.6f} {dd['relative_gap']:9.1e} {w.b:6.3f}")


if __name__ == "__main__":
    main()

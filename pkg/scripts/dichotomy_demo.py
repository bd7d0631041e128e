#!/usr/bin/env python3
"""Walk along the fiber lambda * cos(k pi x) and confront predictions with runs.

For each lambda: the predicted regime (from J0, I0 against d), the run's
termination, and the verdict. The sign of I0 should flip exactly once, at
lambda*; blowup should occur exactly beyond the right root of J(lambda u) = d.
"""
import argparse

import numpy as np

from potwell import analysis as an
from potwell import functionals as fn
from potwell.grid import Grid, Params
from potwell.solver import BLOWUP, SolverConfig, run
from potwell.wells import compute_wells


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--q", type=float, default=3.0)
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--mode", type=int, default=1)
    ap.add_argument("--t-end", type=float, default=6.0)
    ap.add_argument("--points", type=int, default=9)
    args = ap.parse_args()

    grid, params = Grid.interval(args.n), Params(args.p, args.q)
    wells = compute_wells(grid, params, cross_check=False)
    profile = np.cos(args.mode * np.pi * grid.coords[0])
    rep = fn.evaluate(grid, profile, params)
    left, right, ls, jmax, _ = an.fiber_roots(rep.grad_p_norm_p, rep.lq1_norm_q1, params, wells.d)
    print(f"d = {wells.d:.6g}, lambda* = {ls:.6g}, max_lambda J = {jmax:.6g}, roots of J = d: {left}, {right}")
    print(f"{'lambda':>8} {'J0':>10} {'I0':>10} {'predicted':>16} {'termination':>16} {'t_final':>9} verdict")
    for lam in ls * np.linspace(0.2, 1.6, args.points):
        u0 = lam * profile
        report = an.classify(grid, u0, params, wells)
        tr = run(grid, u0, SolverConfig(t_end=args.t_end, dt0=1e-3), params)
        diag = an.blowup_diagnostics(tr, params) if tr.termination == BLOWUP and tr.steps >= 10 else None
        an.verify(report, tr, diag)
        print(f"{lam:8.4f} {report.J0:10.4g} {report.I0:10.4g} {report.predicted:>16} "
              f"{tr.termination:>16} {tr.t_final:9.4f} {report.verdict}")


if __name__ == "__main__":
    main()

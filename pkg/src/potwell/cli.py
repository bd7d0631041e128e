"""Command-line front end: `potwell {wells,classify,run,sweep}`.

Configuration is a single JSON file (see configs/). Flags override it.
Exit codes: 0 success / consistent, 2 usage error, 3 optimizer warning,
4 verdict inconsistent, 5 verdict indeterminate (e.g. step floor hit).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import analysis as an
from . import functionals as fn
from .grid import Grid, ParameterError, Params, write_field
from .solver import BLOWUP, HORIZON, SolverConfig, run
from .wells import InfeasibleError, OptimizerSettings, compute_wells

log = logging.getLogger("potwell")

EXIT_OK, EXIT_USAGE, EXIT_OPTIMIZER, EXIT_INCONSISTENT, EXIT_INDETERMINATE = 0, 2, 3, 4, 5

TARGETS = {"T1": an.T1, "T2": an.T2, "T3": an.T3, "T4": an.T4, "T5": an.T5}


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    params: dict = field(default_factory=lambda: {"p": 2.0, "q": 3.0, "dim": 1})
    grid: dict = field(default_factory=lambda: {"extents": [1.0], "counts": [256]})
    profile: dict = field(default_factory=lambda: {"kind": "cos", "mode": 1})
    scaling: dict = field(default_factory=lambda: {"lambda": 0.1})
    solver: dict = field(default_factory=dict)
    optimizer: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=lambda: {"tol_d": 1e-3, "window": 0.5})
    sweep: dict = field(default_factory=lambda: {"lambdas": []})
    out: str = "results"

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        raw = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls()
        for k, v in raw.items():
            if isinstance(v, dict):
                merged = dict(getattr(cfg, k))
                merged.update(v)
                setattr(cfg, k, merged)
            else:
                setattr(cfg, k, v)
        return cfg

    def build_params(self) -> Params:
        try:
            return Params(float(self.params["p"]), float(self.params["q"]), int(self.params.get("dim", 1)))
        except ParameterError as exc:
            raise UsageError(f"invalid exponents: {exc}") from exc

    def build_grid(self) -> Grid:
        try:
            return Grid(tuple(self.grid["extents"]), tuple(self.grid["counts"]))
        except ValueError as exc:
            raise UsageError(f"invalid grid: {exc}") from exc

    def build_solver(self) -> SolverConfig:
        try:
            return SolverConfig(**self.solver)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid solver config: {exc}") from exc

    def build_optimizer(self) -> OptimizerSettings:
        try:
            return OptimizerSettings(**self.optimizer)
        except TypeError as exc:
            raise UsageError(f"invalid optimizer config: {exc}") from exc


def build_profile(grid: Grid, spec: dict) -> np.ndarray:
    kind = spec.get("kind", "cos")
    if kind == "cos":
        modes = spec.get("mode", 1)
        modes = [modes] if np.isscalar(modes) else list(modes)
        if len(modes) == 1 and grid.dim == 2:
            modes = modes + [0]
        u = np.ones(grid.shape)
        for k, (x, length) in enumerate(zip(grid.coords, grid.extents)):
            u = u * np.cos(modes[k] * np.pi * x / length)
    elif kind == "gaussian":
        center = spec.get("center", [0.5 * e for e in grid.extents])
        width = float(spec.get("width", 0.1))
        r2 = sum((x - c) ** 2 for x, c in zip(grid.coords, center))
        u = float(spec.get("amplitude", 1.0)) * np.exp(-r2 / (2 * width**2))
    elif kind == "random":
        from .wells import random_start

        rng = np.random.default_rng(int(spec.get("seed", 0)))
        u = random_start(grid, rng, int(spec.get("modes", 6)))
    elif kind == "zero":
        u = np.zeros(grid.shape)
    else:
        raise UsageError(f"unknown profile kind {kind!r}")
    return grid.project_zero_mean(u)


def initial_field(cfg: ExperimentConfig, grid, params, wells, opt, lam=None):
    profile = build_profile(grid, cfg.profile)
    if lam is not None:
        return lam * profile, lam
    scaling = cfg.scaling
    if "target" in scaling:
        if not np.any(profile):
            raise UsageError("cannot scale the zero profile to a regime")
        target = TARGETS.get(scaling["target"], scaling["target"])
        return an.make_initial_data(grid, profile, target, params, wells, opt)
    lam = float(scaling.get("lambda", 1.0))
    return lam * profile, lam


# -- commands ---------------------------------------------------------------


def cmd_wells(cfg: ExperimentConfig, out: Path) -> int:
    grid, params, opt = cfg.build_grid(), cfg.build_params(), cfg.build_optimizer()
    wells = compute_wells(grid, params, opt)
    out.mkdir(parents=True, exist_ok=True)
    (out / "wells.json").write_text(wells.to_json())
    print(f"C* = {wells.cstar:.10g}  d = {wells.d:.10g}  b = {wells.b:.10g}")
    if "depth_direct" in wells.provenance:
        print(f"two-route depth gap = {wells.provenance['depth_direct']['relative_gap']:.3e}")
    return EXIT_OK if wells.converged else EXIT_OPTIMIZER


def _prepare(cfg: ExperimentConfig):
    grid, params, opt = cfg.build_grid(), cfg.build_params(), cfg.build_optimizer()
    wells = compute_wells(grid, params, opt, cross_check=False)
    return grid, params, opt, wells


def cmd_classify(cfg: ExperimentConfig, out: Path) -> int:
    grid, params, opt, wells = _prepare(cfg)
    u0, lam = initial_field(cfg, grid, params, wells, opt)
    report = an.classify(grid, u0, params, wells, cfg.analysis.get("tol_d", 1e-3), opt=opt)
    report.observed = {"lambda": lam}
    out.mkdir(parents=True, exist_ok=True)
    (out / "classify.json").write_text(report.to_json())
    print(report.summary())
    return EXIT_OK if wells.converged else EXIT_OPTIMIZER


def simulate(cfg: ExperimentConfig, grid, params, opt, wells, lam=None, out: Path | None = None):
    """Classify, integrate and verify one initial datum. Returns (report, trajectory)."""
    u0, lam = initial_field(cfg, grid, params, wells, opt, lam)
    report = an.classify(grid, u0, params, wells, cfg.analysis.get("tol_d", 1e-3), opt=opt)
    traj = run(grid, u0, cfg.build_solver(), params)
    diag = None
    if traj.termination == BLOWUP and traj.steps >= 10:
        diag = an.blowup_diagnostics(traj, params)
    an.verify(report, traj, diag, cfg.analysis.get("window", 0.5))
    report.observed["lambda"] = lam
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        traj.write_csv(out / "trajectory.csv")
        manifest = traj.manifest()
        manifest["experiment"] = asdict(cfg)
        manifest["wells"] = {"cstar": wells.cstar, "d": wells.d}
        manifest["lambda"] = lam
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=float))
        (out / "report.json").write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True, default=float))
        (out / "report.txt").write_text(report.summary() + "\n")
        if diag is not None:
            (out / "blowup.json").write_text(json.dumps(diag.as_dict(), indent=2, default=float))
        if traj.snapshots:
            traj.write_snapshots(out / "snapshots")
        write_field(out / "u0.field", grid, u0)
    return report, traj


def _verdict_code(verdict: str) -> int:
    return {an.CONSISTENT: EXIT_OK, an.INCONSISTENT: EXIT_INCONSISTENT}.get(verdict, EXIT_INDETERMINATE)


def cmd_run(cfg: ExperimentConfig, out: Path) -> int:
    grid, params, opt, wells = _prepare(cfg)
    report, _ = simulate(cfg, grid, params, opt, wells, out=out)
    print(report.summary())
    if not wells.converged:
        return EXIT_OPTIMIZER
    return _verdict_code(report.verdict)


SWEEP_COLUMNS = ("lambda", "J0", "I0", "predicted", "termination", "t_final",
                 "decay_rate", "r_squared", "blowup_time", "verdict")


def _sweep_row(args):
    cfg, grid, params, opt, wells, lam = args
    report, traj = simulate(cfg, grid, params, opt, wells, lam=lam)
    obs = report.observed
    return {
        "lambda": lam,
        "J0": report.J0,
        "I0": report.I0,
        "predicted": report.predicted,
        "termination": traj.termination,
        "t_final": traj.t_final,
        "decay_rate": obs.get("decay_rate", ""),
        "r_squared": obs.get("r_squared", ""),
        "blowup_time": traj.t_final if traj.termination == BLOWUP else "",
        "verdict": report.verdict,
    }


def cmd_sweep(cfg: ExperimentConfig, out: Path, lambdas, workers: int = 1) -> int:
    lambdas = [float(x) for x in lambdas]
    if not lambdas:
        raise UsageError("sweep needs a non-empty lambda grid")
    grid, params, opt, wells = _prepare(cfg)
    jobs = [(cfg, grid, params, opt, wells, lam) for lam in lambdas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    for r in rows:
        print(f"lambda={r['lambda']:<10.6g} I0={r['I0']:<12.5g} {r['predicted']:<16} {r['termination']:<16} {r['verdict']}")
    if not wells.converged:
        return EXIT_OPTIMIZER
    if any(r["verdict"] == an.INCONSISTENT for r in rows):
        return EXIT_INCONSISTENT
    return EXIT_OK


# -- argument handling ------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="potwell", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("wells", "classify", "run", "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="JSON experiment config")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--seed", type=int, help="optimizer / random-profile seed")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--p", type=float)
        sp.add_argument("--q", type=float)
        sp.add_argument("--n", type=int, help="nodes per axis")
        if name in ("classify", "run", "sweep"):
            sp.add_argument("--lambda", dest="lam", type=float, help="explicit profile scaling")
            sp.add_argument("--target", choices=sorted(TARGETS), help="scale profile into a regime")
            sp.add_argument("--mode", type=int, help="cosine profile mode")
        if name in ("run", "sweep"):
            sp.add_argument("--t-end", type=float)
            sp.add_argument("--dt0", type=float)
            sp.add_argument("--scheme", choices=("euler", "heun"))
        if name == "sweep":
            sp.add_argument("--lambdas", help="comma-separated lambda grid")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def _apply_overrides(cfg: ExperimentConfig, ns) -> None:
    if ns.p is not None:
        cfg.params["p"] = ns.p
    if ns.q is not None:
        cfg.params["q"] = ns.q
    if ns.n is not None:
        cfg.grid["counts"] = [ns.n] * len(cfg.grid["extents"])
    if ns.seed is not None:
        cfg.optimizer["seed"] = ns.seed
        if cfg.profile.get("kind") == "random":
            cfg.profile["seed"] = ns.seed
    if ns.workers and ns.workers > 1:
        cfg.optimizer["workers"] = ns.workers
    if getattr(ns, "lam", None) is not None:
        cfg.scaling = {"lambda": ns.lam}
    if getattr(ns, "target", None) is not None:
        cfg.scaling = {"target": ns.target}
    if getattr(ns, "mode", None) is not None:
        cfg.profile = {"kind": "cos", "mode": ns.mode}
    for key in ("t_end", "dt0", "scheme"):
        val = getattr(ns, key, None)
        if val is not None:
            cfg.solver[key] = val
    if ns.out is not None:
        cfg.out = str(ns.out)


def main(argv=None) -> int:
    ap = _parser()
    ns = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = ExperimentConfig.load(ns.config) if ns.config else ExperimentConfig()
        _apply_overrides(cfg, ns)
        out = Path(cfg.out)
        if ns.command == "wells":
            return cmd_wells(cfg, out)
        if ns.command == "classify":
            return cmd_classify(cfg, out)
        if ns.command == "run":
            return cmd_run(cfg, out)
        lambdas = ns.lambdas.split(",") if ns.lambdas else cfg.sweep.get("lambdas", [])
        lambdas = [x for x in lambdas if str(x).strip()]
        return cmd_sweep(cfg, out, lambdas, ns.workers)
    except UsageError as exc:
        print(f"potwell: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"potwell: infeasible: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"potwell: error reading config: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

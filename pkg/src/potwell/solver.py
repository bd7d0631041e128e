"""Method-of-lines time integration of the mass-conserving pseudo-parabolic p-Laplacian flow.

    (I - Delta) u_t = Delta_p u + |u|^(q-1) u - mean(|u|^(q-1) u)

The Helmholtz operator is inverted exactly with a pre-factorized sparse
solve; the p-Laplacian and the source are explicit.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import functionals as fn
from .grid import Grid, Params, write_field

HORIZON = "horizon_reached"
BLOWUP = "blowup_detected"
FLOOR = "step_floor_hit"

CSV_COLUMNS = ("t", "dt", "J", "I", "h1_norm_sq", "grad_p_norm_p", "mass", "D")


@dataclass
class SolverConfig:
    dt0: float = 1e-3
    t_end: float = 1.0
    scheme: str = "euler"
    eps_reg: float | None = None  # None -> 1e-8 * max|grad u0|
    adapt: bool = True
    dt_min: float = 1e-14
    dt_max: float = 0.05
    step_tol: float = 1e-3
    blowup_threshold: float = 1e6
    snapshot_stride: int = 0  # 0 disables snapshots
    max_steps: int = 2_000_000

    def __post_init__(self):
        if self.scheme not in ("euler", "heun"):
            raise ValueError(f"scheme must be 'euler' or 'heun', got {self.scheme!r}")
        if self.adapt and not self.dt_min <= self.dt0 <= self.dt_max:
            raise ValueError("need dt_min <= dt0 <= dt_max")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not self.blowup_threshold > 0:
            raise ValueError("blowup_threshold must be positive")
        if self.eps_reg is not None and self.eps_reg < 0:
            raise ValueError("eps_reg must be non-negative")


@dataclass
class Trajectory:
    params: Params
    grid: Grid
    config: SolverConfig
    times: list = field(default_factory=list)
    dt: list = field(default_factory=list)
    J: list = field(default_factory=list)
    I: list = field(default_factory=list)
    h1_norm_sq: list = field(default_factory=list)
    grad_p_norm_p: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    max_norm: list = field(default_factory=list)
    D: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)  # (step index, field)
    termination: str = HORIZON
    eps_reg: float = 0.0
    rejected_steps: int = 0
    final: np.ndarray | None = None

    def _record(self, t, dt, u, rep, mass, dissipation):
        self.times.append(t)
        self.dt.append(dt)
        self.J.append(rep.J)
        self.I.append(rep.I)
        self.h1_norm_sq.append(rep.h1_norm_sq)
        self.grad_p_norm_p.append(rep.grad_p_norm_p)
        self.mass.append(mass)
        self.max_norm.append(float(np.max(np.abs(u))))
        self.D.append(dissipation)

    def column(self, name: str) -> np.ndarray:
        key = "times" if name == "t" else name
        return np.asarray(getattr(self, key), dtype=float)

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def t_final(self) -> float:
        return self.times[-1]

    def energy_residual(self) -> np.ndarray:
        """D(t) + J(u(t)) - J(u0) along the run."""
        return self.column("D") + self.column("J") - self.J[0]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for row in zip(*(self.column(c) for c in CSV_COLUMNS)):
                w.writerow([repr(float(x)) for x in row])

    def write_snapshots(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for k, u in self.snapshots:
            path = directory / f"snap_{k}.field"
            write_field(path, self.grid, u)
            paths.append(path)
        return paths

    def manifest(self) -> dict:
        return {
            "params": asdict(self.params),
            "grid": {"extents": list(self.grid.extents), "counts": list(self.grid.counts)},
            "config": asdict(self.config),
            "eps_reg_used": self.eps_reg,
            "termination": self.termination,
            "steps": self.steps,
            "rejected_steps": self.rejected_steps,
            "t_final": self.t_final,
            "final": {c: float(self.column(c)[-1]) for c in CSV_COLUMNS},
            "max_abs_mass": float(np.max(np.abs(self.column("mass")))),
            "max_energy_residual": float(np.max(np.abs(self.energy_residual()))),
        }

    def write_manifest(self, path) -> None:
        Path(path).write_text(json.dumps(self.manifest(), indent=2, sort_keys=True))


def source(grid: Grid, u: np.ndarray, params: Params) -> np.ndarray:
    """|u|^(q-1) u minus its weighted mean."""
    f = fn.signed_power(u, params.q)
    return f - grid.mean(f)


def velocity(grid: Grid, u: np.ndarray, params: Params, eps: float = 0.0) -> np.ndarray:
    """u_t = (I - Delta_h)^-1 (Delta_p u + f(u)), assembled in weighted form."""
    rhs = -grid.grad_p_energy(u, params.p, eps) + grid.weights * source(grid, u, params)
    return grid.helmholtz.solve_weighted(rhs)


def step(grid: Grid, u: np.ndarray, dt: float, params: Params, scheme: str = "euler",
         eps: float = 0.0) -> np.ndarray:
    """One explicit step; the result is re-projected to mean zero."""
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = velocity(grid, u, params, eps)
        if scheme == "euler":
            out = u + dt * k1
        elif scheme == "heun":
            k2 = velocity(grid, u + dt * k1, params, eps)
            out = u + 0.5 * dt * (k1 + k2)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
    if not np.all(np.isfinite(out)):
        return out
    return grid.project_zero_mean(out)


def default_eps(grid: Grid, u0: np.ndarray) -> float:
    gmax = max((float(np.max(np.abs(g))) for g in grid.gradient(u0)), default=0.0)
    return 1e-8 * gmax


def run(grid: Grid, u0: np.ndarray, cfg: SolverConfig, params: Params) -> Trajectory:
    """Integrate from u0 until t_end, blowup, or the step floor.

    Adaptivity halves dt (and retries) while the relative H^1 change of a
    step exceeds step_tol, and grows it by 1.25 when the change is below
    step_tol / 4. At the floor (dt == dt_min, or adaptivity off) a failing
    step is classified: an energy-consistent growing step in the I < 0
    regime is a blowup signal (two consecutive ones end the run as blowup,
    as does overflow there); anything else ends the run as step_floor_hit.
    """
    u = grid.project_zero_mean(np.asarray(u0, dtype=float))
    eps = default_eps(grid, u) if cfg.eps_reg is None else cfg.eps_reg
    traj = Trajectory(params=params, grid=grid, config=cfg, eps_reg=eps)
    rep = fn.evaluate(grid, u, params)
    dissipation = 0.0
    traj._record(0.0, 0.0, u, rep, grid.mean(u), dissipation)
    if cfg.snapshot_stride:
        traj.snapshots.append((0, u.copy()))

    t = 0.0
    dt = cfg.dt0
    dt_min = cfg.dt_min if cfg.adapt else cfg.dt0
    signals = 0
    k = 0
    while t < cfg.t_end * (1 - 1e-14) and k < cfg.max_steps:
        h = min(dt, cfg.t_end - t)
        new = step(grid, u, h, params, cfg.scheme, eps)
        finite = bool(np.all(np.isfinite(new)))
        h1 = rep.h1_norm_sq
        if finite:
            du = new - u
            change = math.sqrt(grid.h1_norm_sq(du) / h1) if h1 > 0 else 0.0
            new_rep = fn.evaluate(grid, new, params)
            energy_up = new_rep.J > rep.J + 1e-12 * max(1.0, abs(rep.J))
        else:
            change = math.inf
            new_rep = None
            energy_up = False
        too_big = cfg.adapt and change > cfg.step_tol
        bad = (not finite) or energy_up or too_big
        at_floor = h <= dt_min * (1 + 1e-12) or not cfg.adapt

        if bad and not at_floor:
            dt = max(0.5 * h, dt_min)
            traj.rejected_steps += 1
            continue

        if bad:
            growing = (not finite) or (new_rep.h1_norm_sq > h1)
            blowup_like = rep.I < 0 and growing and not energy_up
            if not blowup_like:
                traj.termination = FLOOR
                break
            if not finite:
                traj.termination = BLOWUP
                break
            signals += 1
        else:
            signals = 0

        dissipation += grid.h1_norm_sq(new - u) / h
        u, rep = new, new_rep
        t += h
        k += 1
        traj._record(t, h, u, rep, grid.mean(u), dissipation)
        if cfg.snapshot_stride and k % cfg.snapshot_stride == 0:
            traj.snapshots.append((k, u.copy()))
        if traj.max_norm[-1] > cfg.blowup_threshold or signals >= 2:
            traj.termination = BLOWUP
            break
        if cfg.adapt and change < 0.25 * cfg.step_tol:
            dt = min(1.25 * h, cfg.dt_max)
        else:
            dt = h if cfg.adapt else cfg.dt0
    else:
        traj.termination = HORIZON if t >= cfg.t_end * (1 - 1e-14) else FLOOR
    traj.final = u
    return traj

"""Global constants of the discrete problem: C*, the depth d, the curve d(delta), lambda_alpha.

The embedding constant is obtained by minimizing the degree-0 homogeneous
quotient ||grad u||_p / ||u||_{q+1} over mean-zero grid functions. The
minimization is a projected gradient descent in the discrete H^1 metric
(gradient preconditioned by (W + K)^-1, mean removed, iterate renormalized)
with Armijo backtracking, restarted from several seeded random fields.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from . import functionals as fn
from .grid import Grid, Params

log = logging.getLogger(__name__)


class InfeasibleError(RuntimeError):
    """No admissible point exists (or none was found) for the requested problem."""


@dataclass
class OptimizerSettings:
    starts: int = 8
    max_iter: int = 3000
    grad_tol: float = 1e-9
    seed: int = 0
    workers: int = 1
    modes: int = 6  # random starts are combinations of the lowest cosine modes

    def rngs(self, offset: int = 0) -> list[np.random.Generator]:
        ss = np.random.SeedSequence([self.seed, offset])
        return [np.random.default_rng(s) for s in ss.spawn(self.starts)]


@dataclass
class RunInfo:
    value: float
    iterations: int
    grad_norm: float
    converged: bool


@dataclass
class WellConstants:
    cstar: float
    d: float
    b: float
    d0: float
    d_delta_curve: dict
    provenance: dict = field(default_factory=dict)
    ground_state: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def converged(self) -> bool:
        return bool(self.provenance.get("cstar", {}).get("converged", True))

    def as_dict(self) -> dict:
        out = asdict(self)
        out.pop("ground_state")
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


# -- starting fields --------------------------------------------------------


def random_start(grid: Grid, rng: np.random.Generator, modes: int = 6) -> np.ndarray:
    """Smooth random mean-zero field: random cosine series with 1/k decay."""
    u = np.zeros(grid.shape)
    if grid.dim == 1:
        (x,) = grid.coords
        for k in range(1, modes + 1):
            u += rng.standard_normal() / k * np.cos(k * np.pi * x / grid.extents[0])
    else:
        x, y = grid.coords
        lx, ly = grid.extents
        for kx in range(modes + 1):
            for ky in range(modes + 1):
                if kx == ky == 0:
                    continue
                amp = rng.standard_normal() / math.hypot(kx, ky)
                u += amp * np.cos(kx * np.pi * x / lx) * np.cos(ky * np.pi * y / ly)
    return grid.project_zero_mean(u)


def _normalize(grid: Grid, u: np.ndarray) -> np.ndarray:
    return u / math.sqrt(grid.h1_norm_sq(u))


def _sobolev_direction(grid: Grid, g: np.ndarray) -> np.ndarray:
    """H^1 Riesz representative of the Euclidean gradient g, mean removed."""
    s = grid.helmholtz.solve_weighted(g)
    return grid.project_zero_mean(s)


# -- objectives (log form, Euclidean gradients) -----------------------------


def _norm_terms(grid: Grid, u: np.ndarray, params: Params):
    p, q = params.p, params.q
    a = fn.grad_p_norm_p(grid, u, p)
    b = fn.lq_norm_q(grid, u, q + 1.0)
    da = p * grid.grad_p_energy(u, p)
    db = (q + 1.0) * grid.weights * fn.signed_power(u, q)
    return a, b, da, db


def log_quotient(grid: Grid, u: np.ndarray, params: Params):
    """log(||grad u||_p / ||u||_{q+1}) and its gradient."""
    p, q = params.p, params.q
    a, b, da, db = _norm_terms(grid, u, params)
    f = math.log(a) / p - math.log(b) / (q + 1.0)
    return f, da / (p * a) - db / ((q + 1.0) * b)


def quotient(grid: Grid, u: np.ndarray, params: Params) -> float:
    a = fn.grad_p_norm_p(grid, u, params.p)
    b = fn.lq_norm_q(grid, u, params.q + 1.0)
    return a ** (1.0 / params.p) / b ** (1.0 / (params.q + 1.0))


def fiber_reduced_depth(grid: Grid, v: np.ndarray, params: Params) -> float:
    """(1/p - 1/(q+1)) (||grad v||_p^(q+1) / ||v||_{q+1}^(q+1))^(p/(q+1-p)).

    Equals J(lambda* v), the energy of the Nehari point on the ray through v.
    """
    p, q = params.p, params.q
    a = fn.grad_p_norm_p(grid, v, p)
    b = fn.lq_norm_q(grid, v, q + 1.0)
    return params.nehari_factor * (a ** ((q + 1.0) / p) / b) ** (p / params.gap)


def _fiber_depth_with_grad(grid: Grid, v: np.ndarray, params: Params):
    p, q = params.p, params.q
    a, b, da, db = _norm_terms(grid, v, params)
    val = params.nehari_factor * (a ** ((q + 1.0) / p) / b) ** (p / params.gap)
    dlog = ((q + 1.0) / params.gap) * da / a - (p / params.gap) * db / b
    return val, val * dlog


# -- descent engine ---------------------------------------------------------


def _descend(grid, u, value_and_grad, max_iter, grad_tol, *, in_log=True):
    """Projected H^1-gradient descent with backtracking on the H^1 unit sphere.

    `value_and_grad` must be degree-0 homogeneous, so renormalizing the
    iterate does not change the objective.
    """
    u = _normalize(grid, grid.project_zero_mean(u))
    f, g = value_and_grad(u)
    step = 0.5
    gnorm = float("inf")
    it = 0
    for it in range(1, max_iter + 1):
        s = _sobolev_direction(grid, g)
        gnorm2 = grid.h1_norm_sq(s)
        gnorm = math.sqrt(gnorm2)
        scale = 1.0 if in_log else max(abs(f), 1e-300)
        if gnorm <= grad_tol * scale:
            return u, f, RunInfo(f, it, gnorm / scale, True)
        accepted = False
        for _ in range(60):
            trial = _normalize(grid, u - step * s)
            ft, gt = value_and_grad(trial)
            if np.isfinite(ft) and ft <= f - 1e-4 * step * gnorm2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # no decrease possible at roundoff level
            return u, f, RunInfo(f, it, gnorm / scale, gnorm <= 1e3 * grad_tol * scale)
        u, f, g = trial, ft, gt
        step = min(step * 2.0, 1e3)
    return u, f, RunInfo(f, it, gnorm / (1.0 if in_log else max(abs(f), 1e-300)), False)


def _multistart(grid, starts, runner, workers):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(runner, starts))
    else:
        results = [runner(s) for s in starts]
    best = min(range(len(results)), key=lambda i: results[i][1])
    return best, results


# -- public operations ------------------------------------------------------


def estimate_cstar(grid: Grid, params: Params, opt: OptimizerSettings | None = None):
    """Best embedding constant C* = 1 / min R(u) and the minimizing field.

    Returns (cstar, minimizer, provenance). The minimizer is H^1-normalized.
    """
    opt = opt or OptimizerSettings()
    starts = [random_start(grid, rng, opt.modes) for rng in opt.rngs(offset=1)]

    def runner(u0):
        return _descend(grid, u0, lambda u: log_quotient(grid, u, params), opt.max_iter, opt.grad_tol)

    best, results = _multistart(grid, starts, runner, opt.workers)
    u, f, info = results[best]
    cstar = math.exp(-f)
    prov = {
        "method": "projected H1-gradient descent, Armijo backtracking, H1 renormalization",
        "seed": opt.seed,
        "starts": opt.starts,
        "max_iter": opt.max_iter,
        "grad_tol": opt.grad_tol,
        "best_start": best,
        "start_values": [math.exp(-r[1]) for r in results],
        "iterations": info.iterations,
        "grad_norm": info.grad_norm,
        "converged": info.converged,
    }
    if not info.converged:
        log.warning("C* optimizer did not converge (grad norm %.3e)", info.grad_norm)
    return cstar, u, prov


def depth_from_formula(cstar: float, params: Params) -> float:
    """d = (q+1-p)/(p(q+1)) * C*^(-p(q+1)/(q+1-p))."""
    if cstar <= 0:
        raise ValueError("cstar must be positive")
    p, q = params.p, params.q
    return params.gap / (p * (q + 1.0)) * cstar ** (-p * (q + 1.0) / params.gap)


def depth_direct(grid: Grid, params: Params, opt: OptimizerSettings | None = None):
    """Minimize the fiber-reduced energy J(lambda*(v) v) over mean-zero v.

    Returns (d estimate, minimizer on the Nehari manifold, provenance).
    Independent of estimate_cstar: its own objective and its own seeds.
    """
    opt = opt or OptimizerSettings()
    starts = [random_start(grid, rng, opt.modes) for rng in opt.rngs(offset=2)]

    def runner(v0):
        return _descend(
            grid, v0, lambda v: _fiber_depth_with_grad(grid, v, params),
            opt.max_iter, opt.grad_tol, in_log=False,
        )

    best, results = _multistart(grid, starts, runner, opt.workers)
    v, d, info = results[best]
    u = fn.lambda_star(grid, v, params) * v
    prov = {
        "seed": opt.seed,
        "starts": opt.starts,
        "start_values": [r[1] for r in results],
        "iterations": info.iterations,
        "grad_norm": info.grad_norm,
        "converged": info.converged,
    }
    return d, u, prov


def d_delta(cstar: float, params: Params, delta):
    """Depth of the delta-well, closed form along the lambda(delta) fiber.

    (1/p - delta/(q+1)) * delta^(p/(q+1-p)) * C*^(-p(q+1)/(q+1-p)),
    defined for 0 < delta <= (q+1)/p and exactly 0 at the right end.
    """
    p, q = params.p, params.q
    top = (q + 1.0) / p
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0) or np.any(delta > top * (1 + 1e-15)):
        raise ValueError(f"delta must lie in (0, {top}]")
    scale = cstar ** (-p * (q + 1.0) / params.gap)
    out = (q + 1.0 - p * delta) / (p * (q + 1.0)) * delta ** (p / params.gap) * scale
    out = np.where(delta >= top, 0.0, out)
    return float(out) if out.ndim == 0 else out


def d_delta_lower_bound(cstar: float, params: Params, delta):
    """(1/p)(1-delta) r^p + (q+1-p)/(p(q+1)) delta r^p with r = r(delta)."""
    p, q = params.p, params.q
    delta = np.asarray(delta, dtype=float)
    rp = (delta / cstar ** (q + 1.0)) ** (p / params.gap)
    return (1.0 - delta) * rp / p + params.gap / (p * (q + 1.0)) * delta * rp


def find_b(cstar: float, params: Params, xtol: float = 1e-14) -> float:
    """Positive root of d(delta) in (1, (q+1)/p] by bisection."""
    lo, hi = 1.0, (params.q + 1.0) / params.p
    while hi - lo > xtol * hi:
        mid = 0.5 * (lo + hi)
        if d_delta(cstar, params, mid) > 0:
            lo = mid
        else:
            hi = mid
    return hi


def delta_roots(cstar: float, params: Params, level: float) -> tuple[float, float]:
    """delta_1 < 1 < delta_2 with d(delta_i) = level, for 0 < level < d."""
    d = d_delta(cstar, params, 1.0)
    if not 0 < level < d:
        raise ValueError(f"level must lie in (d0, d) = (0, {d}), got {level}")
    g = lambda t: d_delta(cstar, params, t) - level
    top = (params.q + 1.0) / params.p
    lo = optimize.bisect(g, 1e-300, 1.0, xtol=1e-15, rtol=1e-14)
    hi = optimize.bisect(g, 1.0, top, xtol=1e-15, rtol=1e-14)
    return lo, hi


def compute_wells(grid: Grid, params: Params, opt: OptimizerSettings | None = None,
                  samples: int = 100, cross_check: bool = True) -> WellConstants:
    opt = opt or OptimizerSettings()
    cstar, ground, prov = estimate_cstar(grid, params, opt)
    d = depth_from_formula(cstar, params)
    b = find_b(cstar, params)
    deltas = np.linspace(b / samples, b, samples)
    values = d_delta(cstar, params, deltas)
    provenance = {
        "grid": {"extents": list(grid.extents), "counts": list(grid.counts)},
        "params": {"p": params.p, "q": params.q, "dim": params.dim},
        "cstar": prov,
        "b_note": "closed form gives b = (q+1)/p exactly; the general statement only bounds b <= (q+1)/p",
        "d0_note": "closed form gives d(delta) -> 0 as delta -> 0+",
    }
    if cross_check:
        dd, _, dprov = depth_direct(grid, params, opt)
        dprov["relative_gap"] = abs(dd - d) / d
        dprov["d_direct"] = dd
        provenance["depth_direct"] = dprov
    return WellConstants(
        cstar=cstar,
        d=d,
        b=b,
        d0=0.0,
        d_delta_curve={"delta": deltas.tolist(), "d": values.tolist()},
        provenance=provenance,
        ground_state=fn.lambda_star(grid, ground, params) * ground,
    )


# -- lambda_alpha -----------------------------------------------------------


def nehari_h1(grid: Grid, v: np.ndarray, params: Params) -> float:
    """||lambda*(v) v||_{H^1}^2: H^1 size of the Nehari point on the ray through v."""
    return fn.lambda_star(grid, v, params) ** 2 * grid.h1_norm_sq(v)


def _log_nehari_h1(grid, v, params):
    p, q = params.p, params.q
    a, b, da, db = _norm_terms(grid, v, params)
    h = grid.h1_norm_sq(v)
    f = 2.0 / params.gap * (math.log(a) - math.log(b)) + math.log(h)
    mv = (grid.h1_matrix @ v.ravel()).reshape(grid.shape)
    return f, 2.0 / params.gap * (da / a - db / b) + 2.0 * mv / h


def _log_nehari_energy(grid, v, params):
    """log J(lambda*(v) v) and gradient."""
    p, q = params.p, params.q
    a, b, da, db = _norm_terms(grid, v, params)
    f = math.log(params.nehari_factor) + ((q + 1.0) / params.gap) * math.log(a) - (p / params.gap) * math.log(b)
    return f, ((q + 1.0) / params.gap) * da / a - (p / params.gap) * db / b


def _constrained_descent(grid, v, params, log_alpha, max_iter, grad_tol):
    """Minimize log ||lambda* v||_H1^2 subject to log J(lambda* v) <= log alpha.

    Phase 1 descends the energy until feasible; phase 2 takes feasible
    steps, projecting the direction onto the constraint tangent when the
    constraint is active and pulling back with one Newton correction.
    """
    margin = 1e-10
    v = _normalize(grid, grid.project_zero_mean(v))
    c, gc = _log_nehari_energy(grid, v, params)
    if c > log_alpha - margin:
        target = log_alpha - 1e-6
        it = 0
        step = 0.5
        while c > target and it < max_iter:
            it += 1
            s = _sobolev_direction(grid, gc)
            n2 = grid.h1_norm_sq(s)
            for _ in range(60):
                trial = _normalize(grid, v - step * s)
                ct, gct = _log_nehari_energy(grid, trial, params)
                if ct <= c - 1e-4 * step * n2:
                    break
                step *= 0.5
            else:
                break
            v, c, gc = trial, ct, gct
            step = min(2 * step, 1e3)
        if c > log_alpha - margin:
            return None
    f, gf = _log_nehari_h1(grid, v, params)
    step = 0.1
    info = RunInfo(f, 0, float("inf"), False)
    for it in range(1, max_iter + 1):
        sf = _sobolev_direction(grid, gf)
        direction = -sf
        active = c > log_alpha - 1e-4
        if active:
            sc = _sobolev_direction(grid, gc)
            gcd = grid.h1_inner(sc, direction)
            if gcd > 0:
                direction = direction - gcd / grid.h1_norm_sq(sc) * sc
        dn2 = grid.h1_norm_sq(direction)
        slope = grid.h1_inner(sf, direction)
        info = RunInfo(f, it, math.sqrt(dn2), False)
        if math.sqrt(dn2) <= grad_tol:
            info.converged = True
            break
        accepted = False
        for _ in range(50):
            trial = _normalize(grid, v + step * direction)
            ct, gct = _log_nehari_energy(grid, trial, params)
            if ct > log_alpha - margin:
                # Newton pull-back along the constraint gradient
                sct = _sobolev_direction(grid, gct)
                denom = grid.h1_inner(sct, sct)
                trial = _normalize(grid, trial - (ct - (log_alpha - 2 * margin)) / denom * sct)
                ct, gct = _log_nehari_energy(grid, trial, params)
            if ct <= log_alpha - margin:
                ft, gft = _log_nehari_h1(grid, trial, params)
                if ft <= f + 1e-4 * step * slope:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            info.converged = True  # stationary up to line-search resolution
            break
        v, f, gf, c, gc = trial, ft, gft, ct, gct
        step = min(2 * step, 10.0)
    info.value = f
    return v, f, info


def estimate_lambda_alpha(grid: Grid, params: Params, alpha: float, d: float,
                          opt: OptimizerSettings | None = None, extra_starts=()):
    """Upper bound on inf { ||u||_H1^2 : I(u) = 0, J(u) <= alpha }.

    Every returned value is attained by an explicit Nehari point with
    J <= alpha, so it bounds the infimum from above. `extra_starts` are
    tried in addition to the seeded random fields (e.g. the ground state,
    or optimizers for a smaller alpha).
    Returns (value, Nehari point, provenance).
    """
    if not alpha > d:
        raise ValueError(f"alpha must exceed d = {d}, got {alpha}")
    opt = opt or OptimizerSettings()
    starts = list(extra_starts) + [random_start(grid, rng, opt.modes) for rng in opt.rngs(offset=3)]
    log_alpha = math.log(alpha)

    def runner(v0):
        out = _constrained_descent(grid, v0, params, log_alpha, opt.max_iter, 1e-7)
        if out is None:
            return None, float("inf"), None
        return out

    best, results = _multistart(grid, starts, runner, opt.workers)
    v, f, info = results[best]
    if v is None:
        raise InfeasibleError(f"no Nehari point found below energy alpha={alpha}")
    u = fn.lambda_star(grid, v, params) * v
    prov = {
        "alpha": alpha,
        "starts": len(starts),
        "feasible_starts": sum(1 for r in results if r[0] is not None),
        "iterations": info.iterations,
        "converged": info.converged,
        "J_at_point": fn.energy(grid, u, params),
        "note": "upper bound on the infimum (value attained by a feasible Nehari point)",
    }
    return grid.h1_norm_sq(u), u, prov


def lambda_alpha_curve(grid: Grid, params: Params, alphas, d: float,
                       opt: OptimizerSettings | None = None, extra_starts=()):
    """lambda_alpha for increasing alphas, warm-starting each from the previous optimizers.

    A point feasible for a smaller alpha stays feasible for a larger one,
    so the returned sequence is non-increasing by construction.
    """
    order = np.argsort(alphas)
    values = [None] * len(alphas)
    carried = list(extra_starts)
    for i in order:
        val, u, _ = estimate_lambda_alpha(grid, params, alphas[i], d, opt, carried)
        values[i] = val
        carried = [u] + carried
    return values

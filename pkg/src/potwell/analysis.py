"""Regime classification of initial data and post-run checks of the decay/blowup dichotomy."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize, stats
from scipy.integrate import cumulative_trapezoid

from . import functionals as fn
from .grid import Grid, Params
from .solver import BLOWUP, FLOOR, HORIZON, Trajectory
from .wells import InfeasibleError, OptimizerSettings, WellConstants, estimate_lambda_alpha

T1, T2, T3, T4, T5 = "T1_global_decay", "T2_blowup", "T3_global", "T4_blowup", "T5_global_decay"
INDETERMINATE = "indeterminate"
GLOBAL_REGIMES = (T1, T3, T5)
BLOWUP_REGIMES = (T2, T4)

CONSISTENT, INCONSISTENT = "consistent", "inconsistent"


@dataclass
class RegimeReport:
    J0: float
    I0: float
    d: float
    h1_0: float
    predicted: str
    lambda_alpha_estimate: float | None = None
    observed: dict = field(default_factory=dict)
    verdict: str = INDETERMINATE
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def summary(self) -> str:
        lines = [
            f"predicted regime : {self.predicted}",
            f"J(u0) = {self.J0:.6g}   I(u0) = {self.I0:.6g}   d = {self.d:.6g}   ||u0||_H1^2 = {self.h1_0:.6g}",
        ]
        if self.lambda_alpha_estimate is not None:
            lines.append(f"lambda_J(u0) estimate (upper bound) = {self.lambda_alpha_estimate:.6g}")
        for k, v in sorted(self.observed.items()):
            lines.append(f"{k:>17} : {v}")
        lines.append(f"verdict          : {self.verdict}")
        lines += [f"note: {n}" for n in self.notes]
        return "\n".join(lines)


@dataclass
class BlowupDiagnostics:
    T0: float
    t: np.ndarray
    G: np.ndarray
    theta: float
    xi: np.ndarray
    xi_floor: float
    concavity_ok: bool
    extrapolated_T: float | None

    def as_dict(self) -> dict:
        return {
            "T0": self.T0,
            "theta": self.theta,
            "xi_floor": self.xi_floor,
            "rho": self.xi_floor if self.xi_floor > 0 else None,
            "concavity_ok": self.concavity_ok,
            "extrapolated_T": self.extrapolated_T,
            "G_final": float(self.G[-1]),
        }


# -- classification ---------------------------------------------------------


def _depth(wells) -> float:
    return wells.d if isinstance(wells, WellConstants) else float(wells)


def classify(grid: Grid, u0: np.ndarray, params: Params, wells, tol_d: float = 1e-3,
             lambda_alpha: float | None = None, opt: OptimizerSettings | None = None) -> RegimeReport:
    """Prediction part of the regime report.

    `wells` is a WellConstants or just the depth d. For J0 > d, I0 > 0 the
    supercritical condition needs an estimate of lambda_{J0}; pass it, or
    pass `opt` to have it computed here.
    """
    d = _depth(wells)
    rep = fn.evaluate(grid, u0, params)
    out = RegimeReport(J0=rep.J, I0=rep.I, d=d, h1_0=rep.h1_norm_sq, predicted=INDETERMINATE)
    if not np.any(u0):
        out.notes.append("trivial stationary datum u0 = 0")
        return out
    if abs(rep.J - d) <= tol_d * max(1.0, d):
        out.predicted = T3 if rep.I >= 0 else T4
    elif rep.J < d:
        if rep.I > 0:
            out.predicted = T1
        elif rep.I < 0:
            out.predicted = T2
    elif rep.I > 0:
        if lambda_alpha is None and opt is not None:
            starts = [wells.ground_state] if isinstance(wells, WellConstants) and wells.ground_state is not None else []
            try:
                lambda_alpha, _, _ = estimate_lambda_alpha(grid, params, rep.J, d, opt, starts)
            except InfeasibleError as exc:
                out.notes.append(str(exc))
        out.lambda_alpha_estimate = lambda_alpha
        if lambda_alpha is not None and rep.h1_norm_sq <= lambda_alpha:
            out.predicted = T5
            out.notes.append("supercritical condition plausibly satisfied (lambda estimate is an upper bound)")
    return out


# -- initial data along a fiber ---------------------------------------------


def fiber_roots(a: float, b: float, params: Params, level: float):
    """Roots of J(lam u) = level left and right of lambda*, or None where absent."""
    ls = fn.lambda_star_from(a, b, params)
    jmax = float(fn.fiber_energy(a, b, params, ls))
    zero = ls * ((params.q + 1.0) / params.p) ** (1.0 / params.gap)
    g = lambda lam: float(fn.fiber_energy(a, b, params, lam)) - level
    left = right = None
    if jmax > level:
        if level > 0:
            left = optimize.brentq(g, 0.0, ls, xtol=1e-15, rtol=1e-15)
        hi = zero if level >= 0 else zero * 2.0
        while g(hi) > 0:
            hi *= 2.0
        right = optimize.brentq(g, ls, hi, xtol=1e-15, rtol=1e-15)
    return left, right, ls, jmax, zero


def make_initial_data(grid: Grid, profile: np.ndarray, target: str, params: Params, wells,
                      opt: OptimizerSettings | None = None, margin: float = 0.05):
    """Scale `profile` along its fiber so it lands in the `target` regime.

    Returns (field, lam). Raises InfeasibleError when the fiber cannot reach
    the regime (e.g. sup_lam J(lam u) < d for the critical targets).
    """
    d = _depth(wells)
    profile = grid.project_zero_mean(np.asarray(profile, dtype=float))
    rep = fn.evaluate(grid, profile, params)
    if rep.lq1_norm_q1 <= 0:
        raise ValueError("profile must be nonzero")
    a, b = rep.grad_p_norm_p, rep.lq1_norm_q1
    left, right, ls, jmax, zero = fiber_roots(a, b, params, d)
    if target == T1:
        lam = 0.5 * (left if left is not None else ls)
    elif target == T2:
        lo = right if right is not None else ls
        lam = 0.5 * (lo + zero) if lo < zero else 1.5 * lo
    elif target in (T3, T4):
        if jmax < d:
            raise InfeasibleError(
                f"fiber maximum J(lambda* u) = {jmax:.6g} is below d = {d:.6g}; no critical scaling exists"
            )
        lam = left if target == T3 else right
        if lam is None:  # jmax == d to roundoff
            lam = ls
    elif target == T5:
        level = min(d * (1.0 + margin), 0.5 * (d + jmax))
        if jmax <= d * (1.0 + 1e-9):
            raise InfeasibleError(
                f"fiber maximum J(lambda* u) = {jmax:.6g} does not exceed d = {d:.6g}; no supercritical point with I > 0"
            )
        lam = fiber_roots(a, b, params, level)[0]
        u = lam * profile
        J = fn.energy(grid, u, params)
        starts = [wells.ground_state] if isinstance(wells, WellConstants) and wells.ground_state is not None else []
        est, _, _ = estimate_lambda_alpha(grid, params, J, d, opt, starts)
        if grid.h1_norm_sq(u) > est:
            raise InfeasibleError(
                f"||u0||_H1^2 = {grid.h1_norm_sq(u):.6g} exceeds the lambda_J estimate {est:.6g} on this fiber"
            )
    else:
        raise ValueError(f"unknown target regime {target!r}")
    return lam * profile, lam


# -- post-run analysis ------------------------------------------------------


def decay_fit(traj: Trajectory, window: float = 0.5):
    """Least-squares slope of log ||u||_H1^2 against t over the last `window` of steps.

    Returns (rate, r_squared) with rate = -slope / 2.
    """
    t = traj.column("t")
    h1 = traj.column("h1_norm_sq")
    start = int(len(t) * (1.0 - window))
    t, h1 = t[start:], h1[start:]
    if len(t) < 3:
        raise ValueError("window holds fewer than 3 samples")
    if np.any(h1 <= 0):
        raise ValueError("non-positive H1 norm in the fit window (blowup or extinct run?)")
    y = np.log(h1)
    if np.ptp(y) == 0:
        return 0.0, 1.0
    res = stats.linregress(t, y)
    return -0.5 * res.slope, res.rvalue**2


def g_functional(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """G(t) = int_0^t ||u||_H1^2 + (T0 - t) ||u0||_H1^2 with T0 the last recorded time."""
    t = traj.column("t")
    h1 = traj.column("h1_norm_sq")
    T0 = t[-1]
    return t, cumulative_trapezoid(h1, t, initial=0.0) + (T0 - t) * h1[0]


def second_differences(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Second divided differences on a non-uniform grid."""
    s = np.diff(y) / np.diff(t)
    return 2.0 * np.diff(s) / (t[2:] - t[:-2])


def blowup_diagnostics(traj: Trajectory, params: Params, tail: float = 0.25,
                       concavity_window: float = 1.0 / 3.0) -> BlowupDiagnostics:
    if traj.steps < 10:
        raise ValueError("trajectory too short for blowup diagnostics (< 10 steps)")
    t, G = g_functional(traj)
    theta = (params.q - 1.0) / 4.0
    y = G ** (-theta)
    xi = -2.0 * traj.column("I") - (params.q + 3.0) * traj.column("D")
    T0 = float(t[-1])
    sel = np.nonzero(t >= (1.0 - concavity_window) * T0)[0]
    lo = max(sel[0] - 1, 0)
    dd = second_differences(t[lo:], y[lo:])
    # allow roundoff in the differenced values
    tol = 64 * np.finfo(float).eps * np.max(np.abs(y[lo:])) / np.min(np.diff(t[lo:])) ** 2
    concavity_ok = bool(np.all(dd <= tol))
    k = max(int(len(t) * tail), 2)
    fit = stats.linregress(t[-k:], y[-k:])
    extrapolated = -fit.intercept / fit.slope if fit.slope < 0 else None
    return BlowupDiagnostics(
        T0=T0, t=t, G=G, theta=theta, xi=xi, xi_floor=float(np.min(xi)),
        concavity_ok=concavity_ok, extrapolated_T=extrapolated,
    )


def verify(report: RegimeReport, traj: Trajectory, diagnostics: BlowupDiagnostics | None = None,
           window: float = 0.5) -> RegimeReport:
    """Confront the predicted regime with the run and fill in observed/verdict."""
    I = traj.column("I")
    obs = {"termination": traj.termination, "t_final": traj.t_final, "steps": traj.steps}
    verdict = INDETERMINATE
    pred = report.predicted
    if pred in GLOBAL_REGIMES:
        body = I[1:] if report.I0 == 0 else I
        sign_kept = bool(np.all(body > 0))
        obs["I_positive_throughout"] = sign_kept
        if traj.termination == BLOWUP:
            verdict = INCONSISTENT
        elif traj.termination == HORIZON:
            try:
                rate, r2 = decay_fit(traj, window)
                obs.update(decay_rate=rate, r_squared=r2)
            except ValueError as exc:
                rate, r2 = float("nan"), float("nan")
                report.notes.append(str(exc))
            h1 = traj.column("h1_norm_sq")
            obs["h1_ratio_final"] = float(h1[-1] / h1[0])
            if not sign_kept:
                verdict = INCONSISTENT
            elif r2 > 0.99 and rate > 0:
                verdict = CONSISTENT
    elif pred in BLOWUP_REGIMES:
        obs["I_negative_throughout"] = bool(np.all(I < 0))
        if traj.termination == BLOWUP:
            if diagnostics is None and traj.steps >= 10:
                diagnostics = blowup_diagnostics(traj, traj.params)
            if diagnostics is not None:
                obs.update(diagnostics.as_dict())
                verdict = CONSISTENT if diagnostics.concavity_ok else INDETERMINATE
        elif traj.termination == HORIZON:
            report.notes.append("no blowup observed before t_end")
    if traj.termination == FLOOR:
        report.notes.append("step floor hit: stiffness failure, not a blowup")
        verdict = INDETERMINATE
    report.observed = obs
    report.verdict = verdict
    return report


def gradient_floor_margin(traj: Trajectory, params: Params, d: float) -> np.ndarray:
    """||grad u||_p^p - p(q+1)/(q+1-p) d along the run (positive in the I < 0 regime)."""
    return traj.column("grad_p_norm_p") - params.p * (params.q + 1.0) / params.gap * d


def xi_lower_bound(params: Params, d: float, J0: float) -> float:
    """2(q+1)(d - J0), the guaranteed floor of xi(t) when 0 < J0 < d."""
    return 2.0 * (params.q + 1.0) * (d - J0)


__all__ = [
    "T1", "T2", "T3", "T4", "T5", "INDETERMINATE", "RegimeReport", "BlowupDiagnostics",
    "classify", "make_initial_data", "decay_fit", "blowup_diagnostics", "verify",
    "g_functional", "second_differences", "fiber_roots", "gradient_floor_margin", "xi_lower_bound",
]

"""Scalar variational quantities: norms, energy J, Nehari functional I and friends."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .grid import Grid, Params


@dataclass(frozen=True)
class FunctionalReport:
    grad_p_norm_p: float
    lq1_norm_q1: float
    h1_norm_sq: float
    J: float
    I: float

    def as_dict(self) -> dict:
        return asdict(self)


def signed_power(u: np.ndarray, q: float) -> np.ndarray:
    """|u|^(q-1) u, with the value at 0 taken as 0."""
    return np.sign(u) * np.abs(u) ** q


def grad_p_norm_p(grid: Grid, u: np.ndarray, p: float) -> float:
    return grid.p_energy_and_fluxes(u, p)[0]


def lq_norm_q(grid: Grid, u: np.ndarray, r: float) -> float:
    """||u||_r^r under trapezoid quadrature."""
    return float(np.sum(grid.weights * np.abs(u) ** r))


def evaluate(grid: Grid, u: np.ndarray, params: Params) -> FunctionalReport:
    p, q = params.p, params.q
    a = grad_p_norm_p(grid, u, p)
    b = lq_norm_q(grid, u, q + 1.0)
    return FunctionalReport(
        grad_p_norm_p=a,
        lq1_norm_q1=b,
        h1_norm_sq=grid.h1_norm_sq(u),
        J=a / p - b / (q + 1.0),
        I=a - b,
    )


def energy(grid: Grid, u: np.ndarray, params: Params) -> float:
    return evaluate(grid, u, params).J


def i_delta(grid: Grid, u: np.ndarray, params: Params, delta: float) -> float:
    """delta * ||grad u||_p^p - ||u||_{q+1}^{q+1}."""
    return delta * grad_p_norm_p(grid, u, params.p) - lq_norm_q(grid, u, params.q + 1.0)


def r_of_delta(cstar: float, params: Params, delta: float) -> float:
    """Radius below which I_delta is positive: (delta / C*^(q+1))^(1/(q+1-p))."""
    if cstar <= 0:
        raise ValueError("cstar must be positive")
    return (delta / cstar ** (params.q + 1.0)) ** (1.0 / params.gap)


def fiber_energy(a: float, b: float, params: Params, lam):
    """J(lam * u) from a = ||grad u||_p^p and b = ||u||_{q+1}^{q+1}."""
    p, q = params.p, params.q
    lam = np.asarray(lam, dtype=float)
    return lam**p * a / p - lam ** (q + 1.0) * b / (q + 1.0)


def lambda_star_from(a: float, b: float, params: Params) -> float:
    if b <= 0 or a <= 0:
        raise ValueError("lambda* is undefined for a field with zero norm")
    return (a / b) ** (1.0 / params.gap)


def lambda_star(grid: Grid, u: np.ndarray, params: Params) -> float:
    """Maximizer of lam -> J(lam u); I(lam* u) = 0."""
    rep = evaluate(grid, u, params)
    return lambda_star_from(rep.grad_p_norm_p, rep.lq1_norm_q1, params)


def nonlinear_term_bound_holds(u1, u2, params: Params) -> bool:
    """Pointwise check of |u1|^(q-1)u1 - |u2|^(q-1)u2 <= q (|u1|+|u2|)^(q-1) |u1-u2|.

    Nodes where u1 == u2 or u1 = u2 = 0 are skipped.
    """
    q = params.q
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    keep = (u1 != u2) & ((np.abs(u1) + np.abs(u2)) > 0)
    a, b = u1[keep], u2[keep]
    lhs = signed_power(a, q) - signed_power(b, q)
    rhs = q * (np.abs(a) + np.abs(b)) ** (q - 1.0) * np.abs(a - b)
    # roundoff slack: both sides carry O(eps) relative error
    return bool(np.all(lhs <= rhs * (1.0 + 1e-12) + 1e-300))

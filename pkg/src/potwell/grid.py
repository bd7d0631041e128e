"""Box grids, exponent parameters and the discrete operators built on them.

Nodes sit on a cell-vertex lattice including the boundary. Integrals use the
trapezoid rule. Differences live on the edges between neighbouring nodes, and
no edge crosses the boundary, which is how the zero-flux Neumann condition
enters. The p-energy is assembled per cell (or per edge in 1D) so that the
discrete p-Laplacian is exactly minus the weighted gradient of that energy;
summation by parts then gives exact mass conservation and the exact
semi-discrete energy identity.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class ParameterError(ValueError):
    """Raised when (p, q, dim) violate the admissibility constraints."""


@dataclass(frozen=True)
class Params:
    p: float
    q: float
    dim: int = 1

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ParameterError("; ".join(problems))

    def violations(self) -> list[str]:
        p, q, n = self.p, self.q, self.dim
        out = []
        if n not in (1, 2):
            out.append(f"dim must be 1 or 2, got {n}")
        if not p > 1:
            out.append(f"need p > 1, got p={p}")
        if not q > max(p - 1.0, 1.0):
            out.append(f"need q > max(p-1, 1) = {max(p - 1.0, 1.0)}, got q={q}")
        if n in (1, 2) and p < n and not q < n * p / (n - p) - 1.0:
            out.append(f"need q < n*p/(n-p) - 1 = {n * p / (n - p) - 1.0}, got q={q}")
        if not q + 1.0 - p > 0:
            out.append(f"need q + 1 - p > 0, got {q + 1.0 - p}")
        return out

    @property
    def gap(self) -> float:
        """q + 1 - p, the denominator of every exponent formula."""
        return self.q + 1.0 - self.p

    @property
    def nehari_factor(self) -> float:
        """1/p - 1/(q+1): J = factor * ||grad u||_p^p on the Nehari manifold."""
        return 1.0 / self.p - 1.0 / (self.q + 1.0)


def _trapezoid_weights(count: int, h: float) -> np.ndarray:
    w = np.full(count, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _diff_matrix(count: int, h: float) -> sp.csr_matrix:
    # (count-1) x count forward difference
    e = np.ones(count - 1) / h
    return sp.diags([-e, e], [0, 1], shape=(count - 1, count), format="csr")


@dataclass(frozen=True, eq=False)
class Grid:
    """Tensor-product node lattice on [0, L_1] x ... with `counts` nodes per axis."""

    extents: tuple[float, ...]
    counts: tuple[int, ...]
    h: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        extents = tuple(float(e) for e in self.extents)
        counts = tuple(int(c) for c in self.counts)
        if len(extents) != len(counts) or len(counts) not in (1, 2):
            raise ValueError("extents and counts must both have length 1 or 2")
        if any(c < 2 for c in counts):
            raise ValueError(f"need at least 2 nodes per axis, got {counts}")
        if any(e <= 0 for e in extents):
            raise ValueError(f"extents must be positive, got {extents}")
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "h", tuple(e / (c - 1) for e, c in zip(extents, counts)))

    @classmethod
    def interval(cls, n: int, length: float = 1.0) -> Grid:
        return cls((length,), (n,))

    @classmethod
    def rectangle(cls, nx: int, ny: int, lx: float = 1.0, ly: float = 1.0) -> Grid:
        return cls((lx, ly), (nx, ny))

    def __eq__(self, other):
        return isinstance(other, Grid) and (self.extents, self.counts) == (other.extents, other.counts)

    def __hash__(self):
        return hash((self.extents, self.counts))

    def __repr__(self):
        return f"Grid(extents={self.extents}, counts={self.counts})"

    def __reduce__(self):
        # cached operators (notably the sparse factorization) are rebuilt lazily
        return (Grid, (self.extents, self.counts))

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def measure(self) -> float:
        return float(np.prod(self.extents))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(0.0, e, c) for e, c in zip(self.extents, self.counts))

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights, shaped like a field."""
        ws = [_trapezoid_weights(c, h) for c, h in zip(self.counts, self.h)]
        if self.dim == 1:
            return ws[0]
        return np.outer(ws[0], ws[1])

    @cached_property
    def edge_weights(self) -> tuple[np.ndarray, ...]:
        """Quadrature weight of each edge difference in the quadratic (p=2) energy."""
        if self.dim == 1:
            return (np.full(self.counts[0] - 1, self.h[0]),)
        (nx, ny), (hx, hy) = self.counts, self.h
        wx = np.outer(np.full(nx - 1, hx), _trapezoid_weights(ny, hy))
        wy = np.outer(_trapezoid_weights(nx, hx), np.full(ny - 1, hy))
        return wx, wy

    # -- discrete calculus ------------------------------------------------

    def mean(self, u: np.ndarray) -> float:
        return float(np.sum(self.weights * u) / self.measure)

    def project_zero_mean(self, u: np.ndarray) -> np.ndarray:
        return u - self.mean(u)

    def is_mean_zero(self, u: np.ndarray, tol: float = 1e-10) -> bool:
        return abs(self.mean(u)) <= tol * max(1.0, float(np.max(np.abs(u))))

    def gradient(self, u: np.ndarray) -> tuple[np.ndarray, ...]:
        """Edge differences per axis; boundary edges carry no flux and are omitted."""
        u = np.asarray(u, dtype=float)
        return tuple(np.diff(u, axis=k) / self.h[k] for k in range(self.dim))

    def _divergence_adjoint(self, fluxes) -> np.ndarray:
        # D^T applied to per-axis edge arrays: the Euclidean gradient of
        # sum(flux * gradient(u)) with respect to u.
        out = np.zeros(self.shape)
        for k, f in enumerate(fluxes):
            f = f / self.h[k]
            lo = [slice(None)] * self.dim
            hi = [slice(None)] * self.dim
            lo[k] = slice(0, -1)
            hi[k] = slice(1, None)
            out[tuple(lo)] -= f
            out[tuple(hi)] += f
        return out

    def p_energy_and_fluxes(self, u: np.ndarray, p: float, eps: float = 0.0):
        """Return (sum of (|grad u|^2 + eps^2)^(p/2) over the domain, edge fluxes).

        The fluxes are the Euclidean derivative of that sum divided by p with
        respect to the edge differences, already multiplied by their weights.
        1D: each edge is weighted by h. 2D: each cell averages the four
        corner combinations of one x-edge and one y-edge, which reproduces
        the 5-point Laplacian at p = 2.
        """
        grads = self.gradient(u)
        eps2 = eps * eps
        if self.dim == 1:
            (g,) = grads
            s = g * g + eps2
            total = float(np.sum(self.h[0] * _pow_half(s, p)))
            coef = _pow_half(s, p - 2.0)
            return total, (self.h[0] * coef * g,)
        gx, gy = grads
        quarter = 0.25 * self.h[0] * self.h[1]
        fx = np.zeros_like(gx)
        fy = np.zeros_like(gy)
        total = 0.0
        # cell (i, j): x-edges gx[i, j], gx[i, j+1]; y-edges gy[i, j], gy[i+1, j]
        x_sides = (np.s_[:, :-1], np.s_[:, 1:])
        y_sides = (np.s_[:-1, :], np.s_[1:, :])
        for xs in x_sides:
            ex = gx[xs]
            for ys in y_sides:
                ey = gy[ys]
                s = ex * ex + ey * ey + eps2
                total += quarter * float(np.sum(_pow_half(s, p)))
                coef = quarter * _pow_half(s, p - 2.0)
                fx[xs] += coef * ex
                fy[ys] += coef * ey
        return total, (fx, fy)

    def grad_p_energy(self, u: np.ndarray, p: float, eps: float = 0.0) -> np.ndarray:
        """Euclidean gradient of (1/p) * ||grad u||_p^p (regularized by eps)."""
        _, fluxes = self.p_energy_and_fluxes(u, p, eps)
        return self._divergence_adjoint(fluxes)

    def p_laplacian(self, u: np.ndarray, p: float, eps: float = 0.0) -> np.ndarray:
        """div((|grad u|^2 + eps^2)^((p-2)/2) grad u) with zero-flux boundary.

        For p < 2 and eps = 0 a vanishing gradient gives a zero flux.
        """
        return -self.grad_p_energy(u, p, eps) / self.weights

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """K with u^T K u = ||grad u||_2^2."""
        mats = []
        for k in range(self.dim):
            d1 = _diff_matrix(self.counts[k], self.h[k])
            if self.dim == 1:
                dk = d1
            else:
                eye = sp.identity(self.counts[1 - k], format="csr")
                dk = sp.kron(d1, eye) if k == 0 else sp.kron(eye, d1)
            mats.append(dk.T @ sp.diags(self.edge_weights[k].ravel()) @ dk)
        return sp.csr_matrix(sum(mats))

    @cached_property
    def mass_matrix(self) -> sp.csr_matrix:
        return sp.diags(self.weights.ravel(), format="csr")

    @cached_property
    def h1_matrix(self) -> sp.csc_matrix:
        """W + K, so that u^T (W + K) u = ||u||_{H^1}^2."""
        return sp.csc_matrix(self.mass_matrix + self.stiffness)

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        return -(self.stiffness @ np.ravel(u)).reshape(self.shape) / self.weights

    @cached_property
    def helmholtz(self) -> HelmholtzSolver:
        return HelmholtzSolver(self)

    def helmholtz_solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.helmholtz(rhs)

    def h1_inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.ravel(u) @ (self.h1_matrix @ np.ravel(v)))

    def h1_norm_sq(self, u: np.ndarray) -> float:
        return max(self.h1_inner(u, u), 0.0)

    def l2_norm_sq(self, u: np.ndarray) -> float:
        return float(np.sum(self.weights * u * u))


def _pow_half(s: np.ndarray, e: float) -> np.ndarray:
    """s ** (e/2) with 0 ** negative mapped to 0 (degenerate flux convention)."""
    if e == 0.0:
        return np.ones_like(s)
    if e > 0:
        return s ** (0.5 * e)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = s[pos] ** (0.5 * e)
    return out


class HelmholtzSolver:
    """Pre-factorized solver for (I - Delta_h) v = rhs.

    The system is assembled in its symmetric form (W + K) v = W rhs.
    Immutable after construction.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        try:
            self._solve = spla.factorized(grid.h1_matrix)
        except RuntimeError as exc:  # pragma: no cover - W + K is SPD
            raise RuntimeError(f"Helmholtz factorization failed on {grid}") from exc

    def __call__(self, rhs: np.ndarray) -> np.ndarray:
        g = self.grid
        b = (g.weights * rhs).ravel()
        return np.asarray(self._solve(b)).reshape(g.shape)

    def solve_weighted(self, b: np.ndarray) -> np.ndarray:
        """Solve (W + K) v = b for an already-weighted right-hand side."""
        return np.asarray(self._solve(np.ravel(b))).reshape(self.grid.shape)


# -- snapshot files --------------------------------------------------------

FIELD_TAG = "# potwell-field"


def write_field(path, grid: Grid, u: np.ndarray) -> None:
    counts = ",".join(str(c) for c in grid.counts)
    extents = ",".join(repr(e) for e in grid.extents)
    lines = [f"{FIELD_TAG} dim={grid.dim} counts={counts} extents={extents}"]
    lines += [repr(float(x)) for x in np.ravel(u, order="C")]
    Path(path).write_text("\n".join(lines) + "\n")


def read_field(path) -> tuple[Grid, np.ndarray]:
    text = Path(path).read_text().splitlines()
    header = text[0]
    if not header.startswith(FIELD_TAG):
        raise ValueError(f"{path}: not a potwell field file")
    meta = dict(tok.split("=", 1) for tok in header[len(FIELD_TAG):].split())
    counts = tuple(int(c) for c in meta["counts"].split(","))
    extents = tuple(float(e) for e in meta["extents"].split(","))
    if int(meta["dim"]) != len(counts):
        raise ValueError(f"{path}: dim does not match counts")
    grid = Grid(extents, counts)
    values = np.array([float(x) for x in text[1:] if x.strip()])
    if values.size != grid.size:
        raise ValueError(f"{path}: expected {grid.size} values, found {values.size}")
    return grid, values.reshape(grid.shape)

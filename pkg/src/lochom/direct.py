"""The original eps-dependent clamped eigenproblem on a box.

    d_ij(a(x, x/eps) d_kl u) - eps^-alpha d_i(b(x, x/eps) d_j u) + eps^-beta c(x, x/eps) u = lambda u
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator

from .coefficients import Box, CoefficientSpec, SlowStatistics, find_min_hessian
from .eigen import FactorizationError, is_positive_definite, shift_invert_lanczos
from .fd import BoxGrid
from .regions import ParameterPoint, RegionScaling, scaling

POINTS_PER_PERIOD = 16
SHIFT_RETRIES = 3


class ResolutionError(ValueError):
    pass


@dataclass(frozen=True)
class DirectProblem:
    spec: CoefficientSpec
    point: ParameterPoint
    eps: float
    intervals: int
    box: Box | None = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        need = self.min_intervals(self.eps, self.domain)
        if self.intervals < need:
            raise ResolutionError(
                f"{self.intervals} intervals do not resolve eps={self.eps:g}: need >= {need} "
                f"({POINTS_PER_PERIOD} points per microperiod)"
            )

    @property
    def domain(self) -> Box:
        return self.box if self.box is not None else self.spec.domain

    @staticmethod
    def min_intervals(eps: float, box: Box, points_per_period: int = POINTS_PER_PERIOD) -> int:
        # the longest side sets the count; every axis then has h <= eps / points_per_period
        side = float(np.max(np.subtract(box.hi, box.lo)))
        return int(np.ceil(points_per_period * side / eps - 1e-9))

    @property
    def grid(self) -> BoxGrid:
        return BoxGrid(tuple(self.domain.lo), tuple(self.domain.hi), (self.intervals,) * self.spec.dim)


def _fast(x, eps):
    return np.asarray(x) / eps


def assemble_direct(prob: DirectProblem) -> sp.csr_matrix:
    spec, grid, eps = prob.spec, prob.grid, float(prob.eps)
    d = spec.dim
    alpha, beta = float(prob.point.alpha), float(prob.point.beta)

    xn = grid.node_points
    a_nodes = spec.a_matrix(xn, _fast(xn, eps))
    A = grid.fourth_order(a_nodes)

    b_edges = []
    for axis in range(d):
        xe = grid.edge_points(axis)
        b_edges.append(spec.b_matrix(xe, _fast(xe, eps))[:, axis, axis])
    b_cells = None
    if d > 1:
        xc = grid.cell_points()
        b_cells = spec.b_matrix(xc, _fast(xc, eps))
    B = grid.second_order(b_edges, b_cells)

    xi = grid.inner_points()
    c = spec.c_value(xi, _fast(xi, eps))
    for name, arr in (("a", a_nodes), ("b", np.concatenate(b_edges)), ("c", c)):
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite {name} on the grid")
    M = A + eps ** (-alpha) * B + eps ** (-beta) * grid.potential(c)
    return grid.symmetrized(M)


@dataclass
class DirectSpectrum:
    values: np.ndarray
    vectors: np.ndarray  # (K, n_inner...) with ||u||^2 = eps^norm_exponent
    grid: BoxGrid
    scaling: RegionScaling
    eps: float
    stats: SlowStatistics
    residuals: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def shift(self) -> float:
        return self.stats.c0 / self.eps**self.scaling.shift_exponent

    def eta(self) -> np.ndarray:
        """``eps^eta_exponent * (lambda - c0 / eps^shift_exponent)``."""
        return self.eps**self.scaling.eta_exponent * (self.values - self.shift)

    def gram(self) -> np.ndarray:
        V = self.vectors.reshape(len(self.values), -1)
        return float(np.prod(self.grid.h)) * V @ V.T / self.eps**self.scaling.norm_exponent

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "eigenvalues": self.values.tolist(),
            "eta": self.eta().tolist(),
            "shift": self.shift,
            "residuals": self.residuals.tolist(),
            "scaling": self.scaling.to_dict(),
            "grid": {"lo": list(self.grid.lo), "hi": list(self.grid.hi), "intervals": list(self.grid.intervals)},
            "diagnostics": self.diagnostics,
        }


def solve_direct(prob: DirectProblem, K: int, *, stats: SlowStatistics | None = None, seed: int = 0,
                 tol: float = 1e-12) -> DirectSpectrum:
    """``K`` smallest eigenpairs, shift-invert around ``c0 / eps^beta``.

    If the shifted matrix is positive definite the Cholesky path is used.
    Otherwise an LU factorization is used (shift lowered by a factor
    ``1 - 1e-3`` on an exact zero pivot, at most three times) and the result is
    certified afterwards by a Cholesky inertia test just below the computed
    bottom eigenvalue.  A failed certificate falls back to the guaranteed lower
    bound ``eps^-beta * min c``.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    sc = scaling(prob.point, prob.spec.dim)
    if stats is None:
        stats = find_min_hessian(prob.spec)
    A = assemble_direct(prob)
    eps = float(prob.eps)
    sigma = stats.c0 / eps ** float(prob.point.beta)
    diag = {"shift_requested": sigma, "attempts": []}

    res = None
    if is_positive_definite(A, sigma):
        res = shift_invert_lanczos(A, K, sigma, definite=True, seed=seed, tol=tol)
        diag["attempts"].append({"shift": sigma, "mode": "cholesky"})
    else:
        s = sigma
        for attempt in range(SHIFT_RETRIES + 1):
            try:
                res = shift_invert_lanczos(A, K, s, definite=False, seed=seed, tol=tol)
                diag["attempts"].append({"shift": s, "mode": "lu"})
                break
            except FactorizationError:
                diag["attempts"].append({"shift": s, "mode": "lu", "failed": True})
                if attempt == SHIFT_RETRIES:
                    raise
                s *= 1 - 1e-3
        lam1 = res.values[0]
        if not is_positive_definite(A, lam1 - 1e-8 * abs(lam1)):
            floor = potential_lower_bound(prob)
            res = shift_invert_lanczos(A, K, floor, definite=True, seed=seed, tol=tol)
            diag["attempts"].append({"shift": floor, "mode": "cholesky", "reason": "inertia certificate failed"})
    lam1 = res.values[0]
    diag["bottom_certified"] = is_positive_definite(A, lam1 - 1e-8 * abs(lam1))
    diag["iterations"] = res.iterations
    diag["basis_size"] = res.basis_size
    diag["matrix_size"] = A.shape[0]

    grid = prob.grid
    w = float(np.prod(grid.h))
    scale = np.sqrt(eps**sc.norm_exponent / w)
    vecs = []
    for v in res.vectors.T:
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        vecs.append(grid.as_array(v * scale))
    return DirectSpectrum(res.values, np.stack(vecs), grid, sc, eps, stats, res.residuals, diag)


def _c_min(prob: DirectProblem) -> float:
    xi = prob.grid.inner_points()
    return float(prob.spec.c_value(xi, _fast(xi, prob.eps)).min())


def potential_lower_bound(prob: DirectProblem) -> float:
    """``eps^-beta * min c``: the fourth- and second-order forms are nonnegative."""
    return float(prob.eps) ** float(-prob.point.beta) * _c_min(prob)


@dataclass
class RescaledFunction:
    axes: list[np.ndarray]  # z coordinates per axis
    values: np.ndarray

    def norm_squared(self) -> float:
        w = np.prod([ax[1] - ax[0] for ax in self.axes])
        return float(w * np.sum(self.values**2))


def rescale_eigenfunction(u: np.ndarray, grid: BoxGrid, gamma: float, eps: float, x_star,
                          z_axes: list[np.ndarray] | None = None) -> RescaledFunction:
    """``v(z) = u(x* + eps^gamma z)``.

    Without ``z_axes`` the interior nodes are simply relabelled; otherwise
    ``u`` is linearly interpolated (zero outside the box) onto the tensor grid
    spanned by ``z_axes``.
    """
    s = float(eps) ** float(gamma)
    x_star = np.asarray(x_star, float).reshape(grid.dim)
    nodes = [grid.axis_nodes(a) for a in range(grid.dim)]
    inner = [(n[1:-1] - x_star[a]) / s for a, n in enumerate(nodes)]
    u = np.asarray(u, float)
    if z_axes is None:
        return RescaledFunction(inner, u.copy())
    full = np.pad(u, 1)  # boundary zeros
    zn = [(n - x_star[a]) / s for a, n in enumerate(nodes)]
    for a, z in enumerate(z_axes):
        if z.max() < zn[a][0] or z.min() > zn[a][-1]:
            raise ValueError("requested z-grid does not overlap the rescaled domain")
    interp = RegularGridInterpolator(zn, full, bounds_error=False, fill_value=0.0)
    mesh = np.meshgrid(*z_axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    return RescaledFunction([np.asarray(z) for z in z_axes], interp(pts).reshape(mesh[0].shape))

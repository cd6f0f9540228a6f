"""Periodic cell problems on the unit torus, Fourier-Galerkin discretization.

Unknowns are Fourier coefficients (``numpy.fft`` with ``norm="forward"``, so
``u(y) = sum_k u_k exp(2 pi i k.y)``) on the modes ``|k_i| < M/2``; the Nyquist
mode and the mean are held at zero.  Coefficient products are evaluated on a
3/2-padded physical grid, and the same padded quadrature is used by the
effective-tensor assembly so that weak-form identities hold to solver
tolerance.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientSpec

TWO_PI = 2.0 * np.pi


class CellSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class TorusGrid:
    dim: int
    modes: int

    def __post_init__(self):
        if self.modes < 4 or self.modes % 2:
            raise ValueError("modes must be even and >= 4")
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")

    @property
    def padded(self) -> int:
        mp = (3 * self.modes + 1) // 2
        return mp + (mp % 2)

    @property
    def spacing(self) -> float:
        return 1.0 / self.modes

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.modes,) * self.dim

    def wavenumbers(self) -> list[np.ndarray]:
        """Integer wavenumbers broadcast over the mode array, one per axis."""
        k = np.fft.fftfreq(self.modes, d=1.0 / self.modes)
        return np.meshgrid(*([k] * self.dim), indexing="ij", sparse=True)

    def active(self) -> np.ndarray:
        ks = self.wavenumbers()
        mask = np.ones(self.shape, dtype=bool)
        for k in ks:
            mask &= np.abs(k) < self.modes // 2
        mask[(0,) * self.dim] = False
        return mask

    def points(self, padded: bool = True) -> np.ndarray:
        n = self.padded if padded else self.modes
        t = np.arange(n) / n
        mesh = np.meshgrid(*([t] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)

    # -- transforms -------------------------------------------------------

    def to_physical(self, coef: np.ndarray) -> np.ndarray:
        """Evaluate a mode array on the padded grid (real part)."""
        mp = self.padded
        big = np.zeros((mp,) * self.dim, dtype=complex)
        big[self._embed_index(mp)] = coef
        return np.fft.ifftn(big, norm="forward").real

    def from_physical(self, values: np.ndarray) -> np.ndarray:
        """Fourier coefficients of padded-grid samples, truncated to the modes."""
        big = np.fft.fftn(values, norm="forward")
        return big[self._embed_index(self.padded)]

    def _embed_index(self, n):
        m = self.modes
        idx = np.concatenate([np.arange(m // 2), np.arange(n - m // 2, n)])
        return np.ix_(*([idx] * self.dim))

    def hermitian(self, coef: np.ndarray) -> np.ndarray:
        """Project onto coefficient arrays of real fields."""
        flipped = np.conj(np.flip(coef, axis=tuple(range(self.dim))))
        flipped = np.roll(flipped, shift=1, axis=tuple(range(self.dim)))
        return 0.5 * (coef + flipped)


# ---------------------------------------------------------------------------
# discrete operators

class CellOperator:
    """Symmetric weak form ``A(u, v) = int a H(u):H(v) + int b grad u . grad v``
    restricted to the active modes; either part may be absent."""

    def __init__(self, grid: TorusGrid, a_pts: np.ndarray | None, b_pts: np.ndarray | None):
        self.grid = grid
        self.a_pts = a_pts  # (Mp..., d*d, d*d)
        self.b_pts = b_pts  # (Mp..., d, d)
        d = grid.dim
        ks = [np.broadcast_to(k, grid.shape) for k in grid.wavenumbers()]
        self.grad_symbol = np.stack([1j * TWO_PI * k for k in ks])  # (d, M...)
        self.hess_symbol = np.stack(
            [-(TWO_PI**2) * ks[i] * ks[j] for i in range(d) for j in range(d)]
        )  # (d*d, M...)
        self.mask = grid.active()
        symbol = np.zeros(grid.shape)
        if a_pts is not None:
            abar = a_pts.reshape(-1, d * d, d * d).mean(axis=0)
            symbol += np.einsum("p...,pq,q...->...", self.hess_symbol, abar, self.hess_symbol).real
        if b_pts is not None:
            bbar = b_pts.reshape(-1, d, d).mean(axis=0)
            symbol += np.einsum("i...,ij,j...->...", self.grad_symbol.conj(), bbar, self.grad_symbol).real
        k2 = sum(k**2 for k in ks)
        scale = (TWO_PI**2) * k2 * (1.0 + (a_pts is not None) * (TWO_PI**2) * k2)
        symbol = np.where(symbol > 1e-8 * scale, symbol, scale)
        self.precond = np.where(self.mask, 1.0 / np.where(self.mask, symbol, 1.0), 0.0)

    # derivative fields on the padded grid
    def hessian_fields(self, coef):
        return np.stack([self.grid.to_physical(s * coef) for s in self.hess_symbol], axis=-1)

    def gradient_fields(self, coef):
        return np.stack([self.grid.to_physical(s * coef) for s in self.grad_symbol], axis=-1)

    def apply(self, coef: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid.shape, dtype=complex)
        if self.a_pts is not None:
            H = self.hessian_fields(coef)
            S = np.einsum("...pq,...q->...p", self.a_pts, H)
            for p, s in enumerate(self.hess_symbol):
                out += np.conj(s) * self.grid.from_physical(S[..., p])
        if self.b_pts is not None:
            G = self.gradient_fields(coef)
            T = np.einsum("...ij,...j->...i", self.b_pts, G)
            for i, s in enumerate(self.grad_symbol):
                out += np.conj(s) * self.grid.from_physical(T[..., i])
        return np.where(self.mask, out, 0.0)

    def form(self, u: np.ndarray, v: np.ndarray) -> complex:
        """``A(u, v) = sum_k conj(v_k) (A u)_k``."""
        return complex(np.vdot(v, self.apply(u)))


def conjugate_gradient(op: CellOperator, rhs: np.ndarray, tol: float, max_iter: int = 2000):
    """Preconditioned CG on the active modes; returns (solution, relative residual, iterations)."""
    mask = op.mask
    rhs = np.where(mask, rhs, 0.0)
    bnorm = np.linalg.norm(rhs)
    x = np.zeros_like(rhs)
    if bnorm == 0.0:
        return x, 0.0, 0
    r = rhs.copy()
    z = op.precond * r
    p = z.copy()
    rz = np.vdot(r, z).real
    for it in range(1, max_iter + 1):
        Ap = op.apply(p)
        pAp = np.vdot(p, Ap).real
        if pAp <= 0:
            raise CellSolveError("cell operator is not positive on the mean-zero space (ellipticity violated)")
        step = rz / pAp
        x += step * p
        r -= step * Ap
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            break
        z = op.precond * r
        rz_new = np.vdot(r, z).real
        p = z + (rz_new / rz) * p
        rz = rz_new
    else:
        raise CellSolveError(f"CG did not converge in {max_iter} iterations (residual {res:.2e})")
    # recompute the true residual
    true = np.linalg.norm(rhs - op.apply(x)) / bnorm
    return x, float(true), it


# ---------------------------------------------------------------------------
# solutions

@dataclass
class CellSolution:
    kind: str  # "fourth" | "mixed" | "second"
    grid: TorusGrid
    x_star: np.ndarray
    fields: dict  # key -> coefficient array; key (k, l) for fourth, n for mixed/second
    residuals: dict
    iterations: dict
    operator: CellOperator = field(repr=False)
    rhs_mean: float = 0.0

    def values(self, key, padded: bool = False) -> np.ndarray:
        """Corrector values on the (padded or plain) physical grid."""
        coef = self.fields[key]
        if padded:
            return self.grid.to_physical(coef)
        return np.fft.ifftn(coef, norm="forward").real

    def hessian(self, key) -> np.ndarray:
        return self.operator.hessian_fields(self.fields[key])

    def gradient(self, key) -> np.ndarray:
        return self.operator.gradient_fields(self.fields[key])

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    def to_dict(self) -> dict:
        fields = {}
        for key, coef in self.fields.items():
            name = "N_" + "".join(str(i + 1) for i in key) if self.kind == "fourth" else (
                ("M_" if self.kind == "mixed" else "N_") + str(key + 1))
            fields[name] = {
                "residual": self.residuals[key],
                "iterations": self.iterations[key],
                "mean": float(coef[(0,) * self.grid.dim].real),
                "coefficients_real": coef.real.tolist(),
                "coefficients_imag": coef.imag.tolist(),
            }
        return {
            "kind": self.kind,
            "dim": self.grid.dim,
            "modes": self.grid.modes,
            "wavenumbers": np.fft.fftfreq(self.grid.modes, d=1.0 / self.grid.modes).tolist(),
            "x_star": np.asarray(self.x_star).tolist(),
            "max_residual": self.max_residual,
            "rhs_mean": self.rhs_mean,
            "fields": fields,
        }


def _sample(spec: CoefficientSpec, x_star, grid: TorusGrid):
    y = grid.points(padded=True)
    x = np.broadcast_to(np.asarray(x_star, dtype=float).reshape(spec.dim), y.shape)
    return spec.a_matrix(x, y), spec.b_matrix(x, y)


def _check_grid(spec, grid):
    if spec.dim != grid.dim:
        raise ValueError("grid dimension does not match the coefficient spec")


def solve_cell_fourth(spec: CoefficientSpec, x_star, grid: TorusGrid, tol: float = 1e-12) -> CellSolution:
    """Correctors ``N_kl``: ``d_ij(a_ijmn d_mn N_kl) = -d_ij a_ijkl`` at frozen slow point."""
    _check_grid(spec, grid)
    a_pts, _ = _sample(spec, x_star, grid)
    op = CellOperator(grid, a_pts, None)
    d = grid.dim
    fields, res, its = {}, {}, {}
    rhs_mean = 0.0
    for k, l in itertools.product(range(d), repeat=2):
        col = k * d + l
        # weak right side -int a_{ij,kl} H(phi)_ij
        rhs = np.zeros(grid.shape, dtype=complex)
        for p, s in enumerate(op.hess_symbol):
            rhs -= np.conj(s) * grid.from_physical(a_pts[..., p, col])
        rhs_mean = max(rhs_mean, abs(rhs[(0,) * d]))
        x, r, it = conjugate_gradient(op, rhs, tol)
        fields[(k, l)] = grid.hermitian(x)
        res[(k, l)], its[(k, l)] = r, it
    return CellSolution("fourth", grid, np.asarray(x_star, float), fields, res, its, op, rhs_mean)


def _solve_b_family(kind, spec, x_star, grid, tol):
    _check_grid(spec, grid)
    a_pts, b_pts = _sample(spec, x_star, grid)
    op = CellOperator(grid, a_pts if kind == "mixed" else None, b_pts)
    d = grid.dim
    fields, res, its = {}, {}, {}
    rhs_mean = 0.0
    for n in range(d):
        # weak right side -int b_{ni} d_i phi
        rhs = np.zeros(grid.shape, dtype=complex)
        for i, s in enumerate(op.grad_symbol):
            rhs -= np.conj(s) * grid.from_physical(b_pts[..., n, i])
        rhs_mean = max(rhs_mean, abs(rhs[(0,) * d]))
        x, r, it = conjugate_gradient(op, rhs, tol)
        fields[n] = grid.hermitian(x)
        res[n], its[n] = r, it
    return CellSolution(kind, grid, np.asarray(x_star, float), fields, res, its, op, rhs_mean)


def solve_cell_mixed(spec: CoefficientSpec, x_star, grid: TorusGrid, tol: float = 1e-12) -> CellSolution:
    """Correctors ``M_n`` of the fourth-plus-second order cell problem."""
    return _solve_b_family("mixed", spec, x_star, grid, tol)


def solve_cell_second(spec: CoefficientSpec, x_star, grid: TorusGrid, tol: float = 1e-12) -> CellSolution:
    """Correctors ``N_n``: ``-d_i(b_ij d_j N_n) = d_i b_ni``."""
    return _solve_b_family("second", spec, x_star, grid, tol)


SOLVERS = {"fourth": solve_cell_fourth, "mixed": solve_cell_mixed, "second": solve_cell_second}

"""Constant effective tensors and the effective operator of each region."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cells import CellSolution, TorusGrid, solve_cell_fourth, solve_cell_mixed, solve_cell_second
from .coefficients import CoefficientSpec, SlowStatistics
from .regions import EffectiveForm, Region, RegionScaling, UnsupportedRegion

SYMMETRY_ACCEPT = 1e-8


class AssemblyError(ValueError):
    pass


class CoercivityError(ValueError):
    pass


@dataclass(frozen=True)
class Coercivity:
    min_quotient: float
    certificate: np.ndarray  # minimizing xi (unit norm)

    def to_dict(self) -> dict:
        return {"min_quotient": self.min_quotient, "certificate": self.certificate.tolist()}


@dataclass(frozen=True)
class Assembled:
    """A symmetrized tensor plus the size of the asymmetry that was removed."""

    value: np.ndarray
    asymmetry: float
    energy_value: np.ndarray | None = None

    @property
    def energy_gap(self) -> float:
        if self.energy_value is None:
            return 0.0
        return float(np.max(np.abs(self.value - self.energy_value)))


def _symmetrize(m: np.ndarray) -> tuple[np.ndarray, float]:
    asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    return 0.5 * (m + m.T), asym


def _cell_mean(values: np.ndarray) -> np.ndarray:
    """Mean over axis 0, taken about the first sample so constants come out exact."""
    ref = values[0]
    return ref + (values - ref).mean(axis=0)


def _frozen(spec, cell: CellSolution):
    y = cell.grid.points(padded=True)
    x = np.broadcast_to(np.asarray(cell.x_star, float).reshape(spec.dim), y.shape)
    return spec.a_matrix(x, y), spec.b_matrix(x, y)


def assemble_a_eff(cell: CellSolution, spec: CoefficientSpec, x_star=None) -> Assembled:
    """``a_eff[ij, kl] = mean(a_ijmn d_mn N_kl + a_ijkl)`` over the padded grid.

    The energy form ``mean((E_ij + H N_ij) : a : (E_kl + H N_kl))`` is returned
    alongside as an independent evaluation.
    """
    if cell.kind != "fourth":
        raise AssemblyError(f"a_eff needs the fourth-order correctors, got {cell.kind!r}")
    if x_star is not None and not np.allclose(x_star, cell.x_star):
        raise AssemblyError("cell solution was computed at a different slow point")
    d = spec.dim
    a_pts, _ = _frozen(spec, cell)
    # columns: E_kl + H(N_kl) flattened over (mn)
    grads = np.zeros(a_pts.shape[:-2] + (d * d, d * d))
    for k in range(d):
        for l in range(d):
            if (k, l) not in cell.fields:
                raise AssemblyError(f"missing corrector N_{k + 1}{l + 1}")
            col = k * d + l
            grads[..., :, col] = cell.hessian((k, l))
            grads[..., col, col] += 1.0
    flux = np.einsum("...pq,...qc->...pc", a_pts, grads)
    div = _cell_mean(flux.reshape(-1, d * d, d * d))
    energy = _cell_mean(np.einsum("...pr,...pc->...rc", grads, flux).reshape(-1, d * d, d * d))
    if not np.all(np.isfinite(div)):
        raise AssemblyError("non-finite quadrature in a_eff")
    value, asym = _symmetrize(div)
    return Assembled(value, asym, 0.5 * (energy + energy.T))


def b_average(spec: CoefficientSpec, x_star, grid: TorusGrid) -> np.ndarray:
    y = grid.points(padded=True)
    x = np.broadcast_to(np.asarray(x_star, float).reshape(spec.dim), y.shape)
    return _cell_mean(spec.b_matrix(x, y).reshape(-1, spec.dim, spec.dim))


def assemble_b_eff(region: Region, cell: CellSolution | None, spec: CoefficientSpec, x_star,
                   grid: TorusGrid | None = None) -> Assembled:
    """Second-order effective matrix for R2/R3 (plain average), R4 (mixed
    correctors ``M``) and R5 (second-order correctors ``N``)."""
    region = Region(region)
    d = spec.dim
    if region in (Region.R2, Region.R3):
        if grid is None:
            grid = cell.grid if cell is not None else TorusGrid(d, 64)
        value, asym = _symmetrize(b_average(spec, x_star, grid))
        return Assembled(value, asym, value)
    expected = {Region.R4: "mixed", Region.R5: "second"}.get(region)
    if expected is None:
        raise UnsupportedRegion(region)
    if cell is None or cell.kind != expected:
        got = None if cell is None else cell.kind
        raise AssemblyError(f"region {region.value} needs {expected} correctors, got {got}")
    a_pts, b_pts = _frozen(spec, cell)
    grads = np.zeros(b_pts.shape[:-2] + (d, d))  # [..., k, j] = delta_kj + d_k X_j
    for j in range(d):
        grads[..., :, j] = cell.gradient(j)
        grads[..., j, j] += 1.0
    flux = np.einsum("...ik,...kj->...ij", b_pts, grads)
    div = _cell_mean(flux.reshape(-1, d, d))
    energy = _cell_mean(np.einsum("...ki,...kj->...ij", grads, flux).reshape(-1, d, d))
    if region is Region.R4:
        hess = np.stack([cell.hessian(j) for j in range(d)], axis=-1)  # [..., p, j]
        energy = energy + _cell_mean(np.einsum("...pi,...pq,...qj->...ij", hess, a_pts, hess).reshape(-1, d, d))
    value, asym = _symmetrize(div)
    return Assembled(value, asym, 0.5 * (energy + energy.T))


def check_coercive(tensor, tol: float = 1e-10) -> Coercivity:
    """Exact minimum Rayleigh quotient via a dense symmetric eigendecomposition.

    Accepts a ``d x d`` matrix, a ``d^2 x d^2`` matrix acting on flattened
    ``d x d`` matrices, or a rank-4 array ``(d, d, d, d)``.
    """
    t = np.asarray(tensor, dtype=float)
    if t.ndim == 4:
        d = t.shape[0]
        t = t.reshape(d * d, d * d)
    if t.ndim == 0:
        t = t.reshape(1, 1)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise ValueError(f"cannot interpret shape {np.shape(tensor)} as a symmetric form")
    scale = max(1.0, float(np.max(np.abs(t))))
    if np.max(np.abs(t - t.T)) > tol * scale:
        raise ValueError("check_coercive requires a symmetric tensor")
    w, v = np.linalg.eigh(0.5 * (t + t.T))
    xi = v[:, 0]
    if xi[np.argmax(np.abs(xi))] < 0:
        xi = -xi
    return Coercivity(float(w[0]), xi)


@dataclass
class EffectiveOperator:
    form: EffectiveForm
    dim: int
    hessian: np.ndarray
    c0: float
    x_star: np.ndarray
    a_eff: np.ndarray | None = None  # (d*d, d*d)
    b_eff: np.ndarray | None = None  # (d, d)
    coercivity: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.hessian = np.atleast_2d(np.asarray(self.hessian, float))
        if self.a_eff is not None:
            self.a_eff = np.atleast_2d(np.asarray(self.a_eff, float))
        if self.b_eff is not None:
            self.b_eff = np.atleast_2d(np.asarray(self.b_eff, float))
        need_a = self.form in (EffectiveForm.FOURTH, EffectiveForm.FOURTH_PLUS_SECOND)
        need_b = self.form in (EffectiveForm.SECOND, EffectiveForm.FOURTH_PLUS_SECOND)
        if need_a != (self.a_eff is not None) or need_b != (self.b_eff is not None):
            raise ValueError(f"tensors present do not match form {self.form.value}")

    @classmethod
    def constant(cls, form, dim=1, a_eff=None, b_eff=None, hessian=2.0, c0=0.0):
        """Hand-built operator, mainly for oracles and tests."""
        d = dim
        if a_eff is not None and np.ndim(a_eff) == 0:
            a_eff = float(a_eff) * np.eye(d * d)
        if b_eff is not None and np.ndim(b_eff) == 0:
            b_eff = float(b_eff) * np.eye(d)
        if np.ndim(hessian) == 0:
            hessian = float(hessian) * np.eye(d)
        return cls(EffectiveForm(form), d, hessian, c0, np.zeros(d), a_eff, b_eff)

    def to_dict(self) -> dict:
        out = {
            "form": self.form.value,
            "dim": self.dim,
            "x_star": np.asarray(self.x_star).tolist(),
            "c0": self.c0,
            "hessian": self.hessian.tolist(),
            "a_eff": None if self.a_eff is None else self.a_eff.tolist(),
            "b_eff": None if self.b_eff is None else self.b_eff.tolist(),
            "coercivity": {k: v.to_dict() for k, v in self.coercivity.items()},
            "diagnostics": self.diagnostics,
        }
        return out


def required_cells(region: Region) -> tuple[str, ...]:
    return {
        Region.R1: ("fourth",),
        Region.R2: ("fourth",),
        Region.R3: (),
        Region.R4: ("mixed",),
        Region.R5: ("second",),
    }[region]


def solve_required_cells(scaling: RegionScaling, spec: CoefficientSpec, x_star, grid: TorusGrid,
                         tol: float = 1e-12) -> dict[str, CellSolution]:
    solvers = {"fourth": solve_cell_fourth, "mixed": solve_cell_mixed, "second": solve_cell_second}
    return {kind: solvers[kind](spec, x_star, grid, tol) for kind in required_cells(scaling.region)}


def build_effective_operator(scaling: RegionScaling, spec: CoefficientSpec, cells: dict,
                             stats: SlowStatistics, grid: TorusGrid | None = None) -> EffectiveOperator:
    region = scaling.region
    if not region.supported:
        raise UnsupportedRegion(region)
    for kind in required_cells(region):
        if kind not in cells:
            raise AssemblyError(f"region {region.value} needs {kind} cell solutions")
    if grid is None:
        grid = next(iter(cells.values())).grid if cells else TorusGrid(spec.dim, 64)
    x_star = stats.x_star
    diag = {}
    coercivity = {}
    a_eff = b_eff = None
    if scaling.form in (EffectiveForm.FOURTH, EffectiveForm.FOURTH_PLUS_SECOND):
        res = assemble_a_eff(cells["fourth"], spec, x_star)
        a_eff = res.value
        diag["a_eff_asymmetry"] = res.asymmetry
        diag["a_eff_energy_gap"] = res.energy_gap
        coercivity["a_eff"] = check_coercive(a_eff)
    if scaling.form in (EffectiveForm.SECOND, EffectiveForm.FOURTH_PLUS_SECOND):
        cell = cells.get({Region.R4: "mixed", Region.R5: "second"}.get(region, ""), None)
        res = assemble_b_eff(region, cell, spec, x_star, grid)
        b_eff = res.value
        diag["b_eff_asymmetry"] = res.asymmetry
        diag["b_eff_energy_gap"] = res.energy_gap
        coercivity["b_eff"] = check_coercive(b_eff)
    for name, cert in coercivity.items():
        if cert.min_quotient <= 0:
            raise CoercivityError(f"{name} is not coercive (min quotient {cert.min_quotient:.3e})")
    diag["cell_residuals"] = {k: c.max_residual for k, c in cells.items()}
    op = EffectiveOperator(scaling.form, spec.dim, stats.hessian, stats.c0, np.asarray(x_star),
                           a_eff, b_eff, coercivity, diag)
    return op

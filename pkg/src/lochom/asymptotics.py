"""eps-sweeps linking direct spectra to the effective problem, plus the
oscillating-integral rate check."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import subspace_angles

from .cells import TorusGrid
from .coefficients import Box, CoefficientSpec, find_min_hessian, torus_points
from .direct import DirectProblem, DirectSpectrum, solve_direct
from .effective import build_effective_operator, solve_required_cells
from .expr import Expression, parse_expression
from .oscillator import SpectrumResult, TruncatedDomain, default_half_width, solve_oscillator
from .regions import ParameterPoint, RegionScaling, scaling


# ---------------------------------------------------------------------------
# rates


@dataclass(frozen=True)
class RateEstimate:
    slope: float
    half_width: float
    intercept: float
    points: int
    status: str = "ok"

    def to_dict(self) -> dict:
        return {"slope": self.slope, "half_width": self.half_width, "intercept": self.intercept,
                "points": self.points, "status": self.status}


def estimate_rate(points) -> RateEstimate:
    """Least-squares slope of ``log e`` against ``log eps``; the half-width is
    the standard error of the slope."""
    pts = [(float(a), float(b)) for a, b in points]
    if len(pts) < 3:
        raise ValueError("a rate needs at least 3 points")
    if any(e <= 0 for _, e in pts):
        return RateEstimate(math.nan, math.nan, math.nan, len(pts), "converged below tolerance")
    if any(x <= 0 for x, _ in pts):
        raise ValueError("eps values must be positive")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    fit = sstats.linregress(x, y)
    return RateEstimate(float(fit.slope), float(fit.stderr), float(fit.intercept), len(pts))


# ---------------------------------------------------------------------------
# localization


@dataclass(frozen=True)
class Localization:
    radius: float  # in units of eps^gamma
    physical_radius: float
    mass: float
    localized: bool

    def to_dict(self) -> dict:
        return {"radius": self.radius, "physical_radius": self.physical_radius, "mass": self.mass,
                "localized": self.localized}


def localization_metric(u: np.ndarray, grid, eps: float, gamma: float, x_star, mass: float = 0.99) -> Localization:
    """Smallest ``R`` with ``int_{|x - x*| <= R eps^gamma} u^2 >= mass * ||u||^2``.

    ``localized`` is False when the ball needed reaches halfway from ``x*`` to
    the nearest side of the box, i.e. the function is not concentrated.
    """
    if not 0 < mass < 1:
        raise ValueError("mass must lie in (0, 1)")
    x_star = np.asarray(x_star, float).reshape(grid.dim)
    w = np.asarray(u, float).T.ravel() ** 2  # back to x-fastest ordering of inner points
    total = w.sum()
    if not total > 0:
        raise ValueError("mass unreachable: function vanishes on the grid")
    r = np.linalg.norm(grid.inner_points() - x_star, axis=1)
    order = np.argsort(r, kind="stable")
    cum = np.cumsum(w[order]) / total
    idx = int(np.searchsorted(cum, mass - 1e-15))
    rho = float(r[order][min(idx, len(r) - 1)])
    scale = float(eps) ** float(gamma)
    room = float(np.min(np.minimum(x_star - np.asarray(grid.lo), np.asarray(grid.hi) - x_star)))
    return Localization(rho / scale, rho, mass, rho < 0.5 * room)


# ---------------------------------------------------------------------------
# oscillating integrals


def bump(center, radius):
    """Smooth compactly supported bump ``exp(1 - 1/(1 - |x - c|^2 / r^2))``."""
    c = np.asarray(center, float)

    def f(x):
        s = np.sum((x - c) ** 2, axis=-1) / radius**2
        out = np.zeros(s.shape)
        inside = s < 1
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside]))
        return out

    return f


@dataclass
class MvtReport:
    g: str
    eps: list[float]
    integrals: list[float]
    rate: RateEstimate | None
    mean_check: float
    bound_ratio: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"g": self.g, "eps": self.eps, "integrals": self.integrals,
                "rate": None if self.rate is None else self.rate.to_dict(),
                "mean_check": self.mean_check, "bound_ratio": self.bound_ratio}


def _gauss_panels(lo, hi, panel, order):
    n = max(1, int(math.ceil((hi - lo) / panel)))
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, n + 1)
    a, b = edges[:-1, None], edges[1:, None]
    x = 0.5 * (b - a) * t + 0.5 * (a + b)
    wx = 0.5 * (b - a) * w
    return x.ravel(), np.broadcast_to(wx, x.shape).ravel()


def mvt_check(g: Expression | str, box: Box, eps_list, u=None, v=None, *, panels_per_period: int = 4,
              order: int = 10, mean_tol: float = 1e-12) -> MvtReport:
    """``I(eps) = |int g(x, x/eps) u v dx|`` by composite Gauss-Legendre
    quadrature resolving the microscale, with the fitted eps-power.

    ``u`` and ``v`` default to two smooth bumps inside ``box`` placed
    off-centre so that no symmetry makes ``I`` vanish identically.
    """
    if isinstance(g, str):
        g = parse_expression(g)
    d = box.d
    lo, hi = np.asarray(box.lo, float), np.asarray(box.hi, float)
    side = hi - lo
    mid = 0.5 * (lo + hi)
    if u is None:
        u = bump(mid + side * (math.sqrt(2) - 1) / 10, 0.3 * float(side.min()))
    if v is None:
        v = bump(mid + side * (math.sqrt(3) - 1.5) / 10, 0.35 * float(side.min()))

    # zero y-mean on sampled slow points
    y = torus_points(32, d)
    worst = 0.0
    for x in box.sample(5):
        vals = g.evaluate(np.broadcast_to(x, y.shape), y)
        worst = max(worst, abs(float(np.mean(vals))))
    if worst > mean_tol:
        raise ValueError(f"g has nonzero y-mean ({worst:.3e})")

    eps_list = [float(e) for e in eps_list]
    out = []
    for eps in eps_list:
        axes = [_gauss_panels(lo[a], hi[a], eps / panels_per_period, order) for a in range(d)]
        mesh = np.meshgrid(*[ax[0] for ax in axes], indexing="ij")
        wmesh = np.meshgrid(*[ax[1] for ax in axes], indexing="ij")
        x = np.stack([m.ravel() for m in mesh], axis=-1)
        w = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
        uv = u(x) * v(x)
        keep = uv != 0
        x, w, uv = x[keep], w[keep], uv[keep]
        gx = g.evaluate(x, x / eps) if len(x) else np.zeros(0)
        out.append(abs(float(np.sum(w * gx * uv))))
    rate = None
    if len(eps_list) >= 3:
        rate = estimate_rate(zip(eps_list, out))
    ratios = [I / e**2 for I, e in zip(out, eps_list)]
    return MvtReport(str(g), eps_list, out, rate, worst, ratios)


# ---------------------------------------------------------------------------
# sweeps


class SweepError(RuntimeError):
    def __init__(self, eps: float, cause: Exception):
        super().__init__(f"eps={eps:g}: {type(cause).__name__}: {cause}")
        self.eps = eps
        self.cause = cause


@dataclass
class SweepSettings:
    modes: int = 32
    cell_tol: float = 1e-12
    effective_points: int = 1024
    effective_half_width: float | None = None
    points_per_period: int = 16
    seed: int = 0
    workers: int = 1
    localization_mass: float = 0.99


@dataclass
class SweepResult:
    scaling: RegionScaling
    eps: list[float]
    eigenvalues: np.ndarray  # (n_eps, K)
    eta_eps: np.ndarray
    eta_eff: np.ndarray
    errors: np.ndarray
    rates: list[RateEstimate]
    localization: list[Localization]
    angles: np.ndarray  # largest principal angle per (eps, k)
    shift_ratio: np.ndarray  # |eta_k^eps| / (c0 eps^(eta - shift))
    effective: dict
    stats: dict
    diagnostics: dict = field(default_factory=dict)

    @property
    def radii(self) -> list[float]:
        return [loc.radius for loc in self.localization]

    def monotone_error(self, k: int = 0) -> bool:
        e = self.errors[:, k]
        return bool(np.all(np.diff(e) < 0))

    def csv_rows(self) -> list[dict]:
        return [
            {"eps": e, "lambda_1": lam[0], "eta_1_eps": et[0], "eta_1": self.eta_eff[0], "e_1": err[0], "R": loc.radius}
            for e, lam, et, err, loc in zip(self.eps, self.eigenvalues, self.eta_eps, self.errors, self.localization)
        ]

    def to_dict(self) -> dict:
        return {
            "scaling": self.scaling.to_dict(),
            "eps": self.eps,
            "eigenvalues": self.eigenvalues.tolist(),
            "eta_eps": self.eta_eps.tolist(),
            "eta_effective": self.eta_eff.tolist(),
            "errors": self.errors.tolist(),
            "rates": [r.to_dict() for r in self.rates],
            "localization": [loc.to_dict() for loc in self.localization],
            "principal_angles": self.angles.tolist(),
            "shift_ratio": self.shift_ratio.tolist(),
            "monotone_error": self.monotone_error(0),
            "effective": self.effective,
            "stats": self.stats,
            "diagnostics": self.diagnostics,
        }


def effective_spectrum(spec: CoefficientSpec, sc: RegionScaling, K: int, settings: SweepSettings, stats=None):
    stats = stats or find_min_hessian(spec)
    grid = TorusGrid(spec.dim, settings.modes)
    cells = solve_required_cells(sc, spec, stats.x_star, grid, settings.cell_tol)
    op = build_effective_operator(sc, spec, cells, stats, grid)
    L = settings.effective_half_width or default_half_width(op, K)
    spec_res = solve_oscillator(op, TruncatedDomain(L, settings.effective_points), K, seed=settings.seed)
    return op, spec_res, stats


def _angles(direct: DirectSpectrum, eff: SpectrumResult, sc: RegionScaling, x_star, rel_gap=1e-3):
    """Largest principal angle between each rescaled direct eigenfunction and
    the effective eigenspace of its cluster (multiple eigenvalues are compared
    as subspaces)."""
    g = eff.grid
    z_axes = [g.axis_nodes(a)[1:-1] for a in range(g.dim)]
    s = direct.eps**sc.gamma
    dg = direct.grid
    x_nodes = [(dg.axis_nodes(a) - x_star[a]) / s for a in range(dg.dim)]
    mesh = np.meshgrid(*z_axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    vals = eff.values
    out = []
    for k in range(len(direct.values)):
        interp = RegularGridInterpolator(x_nodes, np.pad(direct.vectors[k], 1), bounds_error=False, fill_value=0.0)
        vk = interp(pts)
        cluster = np.abs(vals - vals[k]) <= rel_gap * max(1.0, abs(vals[k]))
        basis = np.stack([eff.vectors[j].ravel() for j in np.flatnonzero(cluster)], axis=-1)
        out.append(float(np.max(subspace_angles(vk[:, None], basis))))
    return out


def run_sweep(spec: CoefficientSpec, point: ParameterPoint, eps_list, K: int,
              settings: SweepSettings | None = None) -> SweepResult:
    """Direct solve, shift and rescale at every eps plus one effective solve."""
    settings = settings or SweepSettings()
    sc = scaling(point, spec.dim)  # raises UnsupportedRegion
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 1 or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps values must be strictly decreasing")
    op, eff, stats = effective_spectrum(spec, sc, K, settings)
    x_star = stats.x_star

    def one(eps):
        try:
            n = DirectProblem.min_intervals(eps, spec.domain, settings.points_per_period)
            return solve_direct(DirectProblem(spec, point, eps, n), K, stats=stats, seed=settings.seed)
        except Exception as exc:
            raise SweepError(eps, exc) from exc

    if settings.workers > 1:
        with ThreadPoolExecutor(settings.workers) as pool:
            results = list(pool.map(one, eps_list))
    else:
        results = [one(e) for e in eps_list]

    lam = np.array([r.values for r in results])
    eta_eps = np.array([r.eta() for r in results])
    errors = np.abs(eta_eps - eff.values[None, :])
    rates = []
    for k in range(K):
        if len(eps_list) >= 3:
            rates.append(estimate_rate(zip(eps_list, errors[:, k])))
    loc = [localization_metric(r.vectors[0], r.grid, r.eps, sc.gamma, x_star, settings.localization_mass)
           for r in results]
    angles = np.array([_angles(r, eff, sc, x_star) for r in results])
    ratio = np.abs(eta_eps) / np.array([[stats.c0 * e ** (sc.eta_exponent - sc.shift_exponent)] for e in eps_list])
    diag = {
        "direct": [r.diagnostics for r in results],
        "effective": eff.diagnostics,
        "direct_residuals": [r.residuals.tolist() for r in results],
    }
    return SweepResult(sc, eps_list, lam, eta_eps, eff.values.copy(), errors, rates, loc, angles, ratio,
                       op.to_dict(), stats.to_dict(), diag)

"""Locally periodic coefficient fields a(x, y), b(x, y), c(x, y).

Fields are given as expressions in the slow variables ``x1..xd`` and the fast
variables ``y1..yd`` (1-periodic in every ``yi``).  The rank-4 field ``a`` is
stored as a ``d^2 x d^2`` matrix acting on ``d x d`` matrices, i.e. the pair
``(ij)`` is flattened to ``i*d + j``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import optimize

from .expr import Expression, ExpressionError, parse_expression

PERIODICITY_TOL = 1e-12
SYMMETRY_TOL = 1e-12


class HypothesisError(ValueError):
    """A structural hypothesis (periodicity, definiteness of H, ...) fails."""


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"invalid box {self.lo} .. {self.hi}")

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def diam(self) -> float:
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= np.asarray(self.lo)) and np.all(x <= np.asarray(self.hi)))

    def sample(self, n: int) -> np.ndarray:
        """Tensor grid of ``n`` points per dimension including the corners."""
        axes = [np.linspace(l, h, n) for l, h in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


def _zero_expr() -> Expression:
    return parse_expression("0")


@dataclass(frozen=True)
class CoefficientSpec:
    """Immutable description of the three coefficient fields.

    ``a`` maps ``(i, j, k, l)`` (zero-based) to an expression, ``b`` maps
    ``(i, j)``; absent entries are identically zero.
    """

    dim: int
    domain: Box
    a: Mapping[tuple[int, int, int, int], Expression]
    b: Mapping[tuple[int, int], Expression]
    c: Expression
    check_periodicity: bool = field(default=True, compare=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("only d = 1 or d = 2 is supported")
        if self.domain.d != self.dim:
            raise ValueError("domain dimension does not match d")
        for key in list(self.a) + list(self.b):
            if any(not 0 <= i < self.dim for i in key):
                raise IndexError(f"coefficient index {key} out of range for d={self.dim}")
        allowed = {f"x{i + 1}" for i in range(self.dim)} | {f"y{i + 1}" for i in range(self.dim)}
        for expr in self.expressions():
            extra = expr.variables - allowed
            if extra:
                raise ExpressionError(f"variables {sorted(extra)} not defined for d={self.dim}")
        if self.check_periodicity:
            self._check_periodic()

    def expressions(self):
        yield from self.a.values()
        yield from self.b.values()
        yield self.c

    def _check_periodic(self, n: int = 7):
        rng = np.random.default_rng(12345)
        x = self.domain.sample(3)
        y = rng.random((n, self.dim))
        X = np.repeat(x, n, axis=0)
        Y = np.tile(y, (len(x), 1))
        for expr in self.expressions():
            f0 = expr.evaluate(X, Y)
            for i in range(self.dim):
                shift = np.zeros(self.dim)
                shift[i] = 1.0
                f1 = expr.evaluate(X, Y + shift)
                gap = np.abs(f1 - f0) / np.maximum(1.0, np.abs(f0))
                if not np.all(gap <= PERIODICITY_TOL):
                    raise HypothesisError(f"expression {expr} is not 1-periodic in y{i + 1}")

    # -- evaluation -------------------------------------------------------

    def a_matrix(self, x, y) -> np.ndarray:
        """a as ``(..., d*d, d*d)`` arrays, row index ``i*d+j``, column ``k*d+l``."""
        x, y = _points(x, y, self.dim)
        d = self.dim
        out = np.zeros(x.shape[:-1] + (d * d, d * d))
        for (i, j, k, l), expr in self.a.items():
            out[..., i * d + j, k * d + l] = expr.evaluate(x, y)
        return out

    def a_tensor(self, x, y) -> np.ndarray:
        d = self.dim
        m = self.a_matrix(x, y)
        return m.reshape(m.shape[:-2] + (d, d, d, d))

    def b_matrix(self, x, y) -> np.ndarray:
        x, y = _points(x, y, self.dim)
        out = np.zeros(x.shape[:-1] + (self.dim, self.dim))
        for (i, j), expr in self.b.items():
            out[..., i, j] = expr.evaluate(x, y)
        return out

    def c_value(self, x, y) -> np.ndarray:
        x, y = _points(x, y, self.dim)
        return self.c.evaluate(x, y)

    def is_y_constant(self, which: str) -> bool:
        exprs = {"a": self.a.values(), "b": self.b.values(), "c": [self.c]}[which]
        return all(not any(v.startswith("y") for v in e.variables) for e in exprs)


def _points(x, y, d):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if y.ndim == 0:
        y = y.reshape(1)
    if x.shape[-1] != d or y.shape[-1] != d:
        raise IndexError(f"points must have trailing dimension {d}")
    return np.broadcast_arrays(x, y - np.floor(y))


def eval_field(spec: CoefficientSpec, which: str, x, y):
    """Value of one field at a single point, after periodic wrapping of ``y``."""
    x = np.asarray(x, dtype=float).reshape(spec.dim)
    y = np.asarray(y, dtype=float).reshape(spec.dim)
    if which == "a":
        value = spec.a_tensor(x, y)
    elif which == "b":
        value = spec.b_matrix(x, y)
    elif which == "c":
        value = float(spec.c_value(x, y))
    else:
        raise ValueError(f"unknown field {which!r}; expected 'a', 'b' or 'c'")
    if not np.all(np.isfinite(value)):
        raise FloatingPointError(f"non-finite value of {which} at x={x}, y={y}")
    return value


# ---------------------------------------------------------------------------
# construction helpers

def _expr(value) -> Expression:
    if isinstance(value, Expression):
        return value
    if isinstance(value, (int, float)):
        return parse_expression(repr(float(value)))
    return parse_expression(value)


def make_spec(dim, domain, a, b, c, check_periodicity=True) -> CoefficientSpec:
    """Build a spec from loose inputs.

    ``a`` is either a single expression (meaning ``f(x, y) * delta_ik delta_jl``,
    the identity on ``d x d`` matrices) or a mapping with keys like ``"1111"``
    or ``(0, 0, 0, 0)``.  ``b`` is either a single expression (``f * delta_ij``)
    or a mapping with keys like ``"12"``.
    """
    if not isinstance(domain, Box):
        lo, hi = zip(*domain)
        domain = Box(tuple(float(v) for v in lo), tuple(float(v) for v in hi))
    a_map = {}
    if isinstance(a, Mapping):
        for key, value in a.items():
            idx = _index(key, 4)
            a_map[idx] = _expr(value)
    else:
        f = _expr(a)
        for i, j in itertools.product(range(dim), repeat=2):
            a_map[(i, j, i, j)] = f
    b_map = {}
    if isinstance(b, Mapping):
        for key, value in b.items():
            b_map[_index(key, 2)] = _expr(value)
    else:
        f = _expr(b)
        for i in range(dim):
            b_map[(i, i)] = f
    return CoefficientSpec(dim, domain, a_map, b_map, _expr(c), check_periodicity)


def _index(key, rank):
    if isinstance(key, str):
        if len(key) != rank or not key.isdigit():
            raise ValueError(f"coefficient key {key!r} must be {rank} one-based digits")
        idx = tuple(int(ch) - 1 for ch in key)
    else:
        idx = tuple(int(k) for k in key)
    if len(idx) != rank or min(idx) < 0:
        raise IndexError(f"bad coefficient index {key!r}")
    return idx


# ---------------------------------------------------------------------------
# hypothesis checks

@dataclass
class HypothesisReport:
    lambda_a: float
    lambda_b: float
    symmetry_ok: bool
    positivity_ok: bool
    ellipticity_ok: bool
    min_c: float
    max_asymmetry: float

    @property
    def ok(self) -> bool:
        return self.symmetry_ok and self.positivity_ok and self.ellipticity_ok

    def to_dict(self) -> dict:
        return {
            "Lambda_est": self.lambda_a,
            "Lambda_prime_est": self.lambda_b,
            "symmetry_ok": self.symmetry_ok,
            "positivity_ok": self.positivity_ok,
            "ellipticity_ok": self.ellipticity_ok,
            "min_c": self.min_c,
            "max_asymmetry": self.max_asymmetry,
        }


def verify_hypotheses(spec: CoefficientSpec, samples: int = 64, seed: int = 0) -> HypothesisReport:
    """Seeded sampling estimate of the ellipticity constants and symmetry flags.

    Violations are reported, never raised.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    d = spec.dim
    lo, hi = np.asarray(spec.domain.lo), np.asarray(spec.domain.hi)
    x = lo + (hi - lo) * rng.random((samples, d))
    y = rng.random((samples, d))
    A = spec.a_matrix(x, y)
    B = spec.b_matrix(x, y)
    C = spec.c_value(x, y)

    asym = max(float(np.max(np.abs(A - np.swapaxes(A, -1, -2)))),
               float(np.max(np.abs(B - np.swapaxes(B, -1, -2)))))
    symmetry_ok = asym <= SYMMETRY_TOL

    xi_a = rng.standard_normal((samples, 16, d * d))
    xi_b = rng.standard_normal((samples, 16, d))
    qa = np.einsum("spi,sij,spj->sp", xi_a, A, xi_a) / np.einsum("spi,spi->sp", xi_a, xi_a)
    qb = np.einsum("spi,sij,spj->sp", xi_b, B, xi_b) / np.einsum("spi,spi->sp", xi_b, xi_b)
    lam_a = float(qa.min())
    lam_b = float(qb.min())
    # exact per-sample minimum over xi of the symmetric part
    sym_a = 0.5 * (A + np.swapaxes(A, -1, -2))
    sym_b = 0.5 * (B + np.swapaxes(B, -1, -2))
    lam_a = min(lam_a, float(np.linalg.eigvalsh(sym_a).min()))
    lam_b = min(lam_b, float(np.linalg.eigvalsh(sym_b).min()))
    finite = bool(np.all(np.isfinite(A)) and np.all(np.isfinite(B)) and np.all(np.isfinite(C)))
    return HypothesisReport(
        lambda_a=lam_a,
        lambda_b=lam_b,
        symmetry_ok=symmetry_ok and finite,
        positivity_ok=bool(np.all(C > 0)) and finite,
        ellipticity_ok=lam_a > 0 and lam_b > 0,
        min_c=float(C.min()),
        max_asymmetry=asym,
    )


# ---------------------------------------------------------------------------
# slow statistics of c

def torus_points(n: int, d: int) -> np.ndarray:
    """Periodic trapezoid nodes ``k/n`` on the unit torus, shape ``(n**d, d)``."""
    t = np.arange(n) / n
    mesh = np.meshgrid(*([t] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def local_average_c(spec: CoefficientSpec, x, n_quad: int = 64) -> float:
    """Average of ``c(x, .)`` over the unit torus by the periodic trapezoid rule."""
    if n_quad < 2:
        raise ValueError("n_quad must be >= 2")
    y = torus_points(n_quad, spec.dim)
    x = np.broadcast_to(np.asarray(x, dtype=float).reshape(spec.dim), y.shape)
    vals = spec.c_value(x, y)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError(f"non-finite c at x={x[0]}")
    return float(vals.mean())


@dataclass(frozen=True)
class SlowStatistics:
    x_star: np.ndarray
    c0: float
    hessian: np.ndarray
    gradient_norm: float
    n_quad: int
    iterations: int

    def c_bar(self, spec: CoefficientSpec, x) -> float:
        return local_average_c(spec, x, self.n_quad)

    def to_dict(self) -> dict:
        return {
            "x_star": self.x_star.tolist(),
            "c0": self.c0,
            "hessian": self.hessian.tolist(),
            "gradient_norm": self.gradient_norm,
            "n_quad": self.n_quad,
            "iterations": self.iterations,
        }


def _derivatives(f, x, h):
    d = len(x)
    f0 = f(x)
    g = np.zeros(d)
    H = np.zeros((d, d))
    E = np.eye(d) * h
    for i in range(d):
        fp, fm = f(x + E[i]), f(x - E[i])
        g[i] = (fp - fm) / (2 * h)
        H[i, i] = (fp - 2 * f0 + fm) / h**2
        for j in range(i):
            H[i, j] = H[j, i] = (
                f(x + E[i] + E[j]) - f(x + E[i] - E[j]) - f(x - E[i] + E[j]) + f(x - E[i] - E[j])
            ) / (4 * h * h)
    return f0, g, H


def find_min_hessian(spec: CoefficientSpec, x0=None, tol: float = 1e-10, n_quad: int = 64,
                     max_iter: int = 50, grid_scan: int = 21) -> SlowStatistics:
    """Newton iteration on the gradient of the averaged potential.

    Derivatives are central differences with step ``1e-4 * diam(domain)``.
    A coarse grid scan over the domain supplies the start when ``x0`` is None
    and spot-checks that the Newton limit is the global minimum.
    """
    d = spec.dim
    f = lambda x: local_average_c(spec, x, n_quad)
    h = 1e-4 * spec.domain.diam

    scan = spec.domain.sample(grid_scan)
    scan_vals = np.array([f(p) for p in scan])
    if x0 is None:
        x = scan[int(np.argmin(scan_vals))].astype(float)
    else:
        x = np.asarray(x0, dtype=float).reshape(d)
        if not spec.domain.contains(x):
            raise ValueError(f"x0={x} lies outside the domain")

    it = 0
    f0, g, H = _derivatives(f, x, h)
    while np.linalg.norm(g) > tol:
        if it >= max_iter:
            raise ConvergenceError(f"Newton did not converge: |grad| = {np.linalg.norm(g):.3e}")
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError as exc:
            raise HypothesisError("singular Hessian of the averaged potential") from exc
        x = x - step
        it += 1
        f0, g, H = _derivatives(f, x, h)
        if np.linalg.norm(step) < 1e-15 * max(1.0, np.linalg.norm(x)):
            break
    # polish the gradient with an independent root finder if differences stall
    if np.linalg.norm(g) > tol:
        sol = optimize.root(lambda z: _derivatives(f, z, h)[1], x, tol=tol)
        x = sol.x
        f0, g, H = _derivatives(f, x, h)
    H = 0.5 * (H + H.T)
    eig = np.linalg.eigvalsh(H)
    if eig.min() <= 0:
        raise HypothesisError(f"Hessian of c-bar at the minimizer is not positive definite: {eig}")
    if scan_vals.min() < f0 - 1e-8 * max(1.0, abs(f0)):
        raise HypothesisError(
            f"grid scan found c-bar = {scan_vals.min():.6g} below the Newton minimum {f0:.6g}; "
            "minimum is not unique/global"
        )
    return SlowStatistics(x, f0, H, float(np.linalg.norm(g)), n_quad, it)
